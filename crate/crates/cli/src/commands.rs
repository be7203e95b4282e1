use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use gsketch_core::apps::two_sample_test;
use gsketch_core::compress::replicated_sketched_dk2;
use gsketch_core::distance::{error_budget, exact_dk2, sketched_dk2};
use gsketch_core::io::{parse_pointset, write_sketch_file, InputFormat};
use gsketch_core::kpca::{kpca_error, kpca_fit, KpcaConfig, WidthSchedule};
use gsketch_core::planner::{estimate_radius, sketch_dims, PlanConstants, Task};
use gsketch_core::seed::table_rng;
use gsketch_core::{
    nn_index_build, nn_query, plan, AccuracyTarget, GaussianSketch, LabeledSet, PlannedConfig, PointSet, SketchConfig,
    Variant,
};
use log::warn;
use rand::Rng;

use crate::{Cli, Command, FormatArg, GlobalOpts, ScheduleArg, TaskArg};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(gsketch_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<gsketch_core::Error> for CliError {
    fn from(e: gsketch_core::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(b) = g.bandwidth {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Usage("--bandwidth must be positive".into()));
        }
    }
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::Plan { d, task, points } => cmd_plan(g, *d, *task, *points, &mut out),
        Command::Sketch { input, output, format } => cmd_sketch(g, input, output, *format, &mut out),
        Command::Dist {
            first,
            second,
            exact_only,
            sketch_only,
        } => cmd_dist(g, first, second, *exact_only, *sketch_only, &mut out),
        Command::Test2 {
            first,
            second,
            trials,
            level,
            resample,
        } => {
            let (p, q) = (load_single(g, first)?, load_single(g, second)?);
            let planned = plan_for(g, p.dim(), Task::Distance, radius_for(g, [&p, &q]))?;
            let sketch = GaussianSketch::from_plan(&planned, g.seed)?;
            let r = two_sample_test(&p, &q, *trials, *level, &sketch, *resample, g.seed)?;
            writeln!(out, "statistic={}", r.statistic)?;
            writeln!(out, "threshold={}", r.threshold)?;
            writeln!(out, "trials={}", r.trials)?;
            writeln!(out, "level={}", r.level)?;
            writeln!(out, "resample_mode={}", r.resample_mode)?;
            writeln!(out, "reject={}", r.reject)?;
            Ok(())
        }
        Command::Kpca {
            input,
            rank,
            output,
            verify,
            schedule,
        } => cmd_kpca(g, input, *rank, output, *verify, *schedule, &mut out),
        Command::Nn { index, query } => cmd_nn(g, index, query, &mut out),
        Command::Bench { dims, orders, points } => {
            let dims = dims.clone().unwrap_or_else(|| match g.variant {
                Variant::Gs => vec![2, 4, 8, 16],
                Variant::Hd => vec![16, 64, 512],
            });
            cmd_bench(g, &dims, orders, *points, &mut out)
        }
    }
}

fn format_for(path: &Path, format: Option<FormatArg>) -> InputFormat {
    match format {
        Some(FormatArg::Csv) => InputFormat::Csv,
        Some(FormatArg::Jsonl) => InputFormat::Jsonl,
        None => InputFormat::from_path(path),
    }
}

fn load_sets(g: &GlobalOpts, path: &Path, format: Option<FormatArg>) -> CliResult<Vec<LabeledSet>> {
    let mut sets = parse_pointset(path, format_for(path, format))?;
    if let Some(b) = g.bandwidth {
        for s in &mut sets {
            s.points = s.points.scaled(1.0 / b)?;
        }
    }
    Ok(sets)
}

fn load_single(g: &GlobalOpts, path: &Path) -> CliResult<PointSet> {
    let mut sets = load_sets(g, path, None)?;
    if sets.len() != 1 {
        return Err(CliError::Usage(format!(
            "{} holds {} sets; expected exactly one",
            path.display(),
            sets.len()
        )));
    }
    Ok(sets.remove(0).points)
}

/// `--radius` in bandwidth units, else the radius of the data.
fn radius_for<'a>(g: &GlobalOpts, sets: impl IntoIterator<Item = &'a PointSet>) -> f64 {
    match g.radius {
        Some(r) => r / g.bandwidth.unwrap_or(1.0),
        None => estimate_radius(g.variant, sets).max(f64::MIN_POSITIVE),
    }
}

fn plan_for(g: &GlobalOpts, d: usize, task: Task, radius: f64) -> CliResult<PlannedConfig> {
    let target = AccuracyTarget::new(g.variant, d, radius, g.epsilon, g.alpha, g.delta);
    Ok(plan(g.variant, &target, PlanConstants::default(), task)?)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn cmd_plan(g: &GlobalOpts, d: usize, task: TaskArg, points: Option<usize>, out: &mut impl Write) -> CliResult {
    let radius = g
        .radius
        .map(|r| r / g.bandwidth.unwrap_or(1.0))
        .ok_or_else(|| CliError::Usage("plan needs --radius".into()))?;
    let task = match (task, points) {
        (TaskArg::Distance, _) => Task::Distance,
        (TaskArg::Pca, Some(n)) => Task::Pca { n },
        (TaskArg::Pca, None) => return Err(CliError::Usage("--task pca needs --n".into())),
    };
    let p = plan_for(g, d, task, radius)?;
    writeln!(out, "variant={}", p.variant)?;
    writeln!(out, "dimension={}", p.dimension)?;
    writeln!(out, "radius={}", p.radius)?;
    writeln!(out, "epsilon={}", p.epsilon)?;
    writeln!(out, "alpha={}", p.alpha)?;
    writeln!(out, "xi={}", p.weight_budget)?;
    writeln!(out, "s={}", p.truncation_order)?;
    writeln!(out, "tail_bound={}", p.tail_bound)?;
    writeln!(out, "variance_constant={}", p.variance_constant)?;
    writeln!(out, "m={}", join(&p.dims))?;
    writeln!(out, "m_rounded={}", join(&p.effective_dims()))?;
    writeln!(out, "output_dim={}", p.total_dim())?;
    if let Some(j) = p.jl_dim {
        writeln!(out, "jl_dim={j}")?;
    }
    writeln!(out, "replicas={}", p.replicas)?;
    Ok(())
}

fn cmd_sketch(g: &GlobalOpts, input: &Path, output: &Path, format: Option<FormatArg>, out: &mut impl Write) -> CliResult {
    if g.jl_dim.is_some() || g.replicas.is_some() {
        return Err(CliError::Usage("sketch files hold unprojected single-sketch embeddings; drop --jl-dim/--replicas".into()));
    }
    let sets = load_sets(g, input, format)?;
    let d = sets[0].points.dim();
    let radius = radius_for(g, sets.iter().map(|s| &s.points));
    let planned = plan_for(g, d, Task::Distance, radius)?;
    let sketch = GaussianSketch::from_plan(&planned, g.seed)?;
    let embeddings = sets
        .iter()
        .map(|s| sketch.embed_set_with_radius(&s.points, Some(radius)))
        .collect::<Result<Vec<_>, _>>()?;
    write_sketch_file(output, &SketchConfig::from_plan(&planned, g.seed)?, &embeddings)?;
    writeln!(out, "fingerprint={}", sketch.fingerprint())?;
    writeln!(out, "sets={}", sets.len())?;
    writeln!(out, "output_dim={}", sketch.output_dim())?;
    for s in &sets {
        writeln!(out, "set={} points={}", s.label, s.points.len())?;
    }
    Ok(())
}

fn cmd_dist(g: &GlobalOpts, first: &Path, second: &Path, exact_only: bool, sketch_only: bool, out: &mut impl Write) -> CliResult {
    let (p, q) = (load_single(g, first)?, load_single(g, second)?);
    let exact = if sketch_only { None } else { Some(exact_dk2(&p, &q)?) };
    if let Some(e) = exact {
        writeln!(out, "exact_dk2={e}")?;
    }
    if exact_only {
        return Ok(());
    }
    let radius = radius_for(g, [&p, &q]);
    let planned = plan_for(g, p.dim(), Task::Distance, radius)?;
    let sketched = if g.replicas.is_some() || g.jl_dim.is_some() {
        let replicas = g.replicas.unwrap_or(1);
        let r = replicated_sketched_dk2(&planned, g.seed, replicas, g.jl_dim, &p, &q)?;
        writeln!(out, "replicas={replicas}")?;
        r.median
    } else {
        sketched_dk2(&GaussianSketch::from_plan(&planned, g.seed)?, &p, &q)?
    };
    writeln!(out, "sketched_dk2={sketched}")?;
    if let Some(e) = exact {
        writeln!(out, "budget={}", error_budget(e, g.epsilon, g.alpha))?;
        writeln!(out, "within_budget={}", (sketched - e).abs() <= error_budget(e, g.epsilon, g.alpha))?;
    }
    Ok(())
}

fn cmd_kpca(
    g: &GlobalOpts,
    input: &Path,
    rank: usize,
    output: &Path,
    verify: bool,
    schedule: ScheduleArg,
    out: &mut impl Write,
) -> CliResult {
    let x = load_single(g, input)?;
    let mut cfg = KpcaConfig::new(g.variant, g.epsilon, g.alpha, g.seed);
    cfg.radius = g.radius.map(|r| r / g.bandwidth.unwrap_or(1.0));
    cfg.schedule = match schedule {
        ScheduleArg::Linear => WidthSchedule::Linear,
        ScheduleArg::Geometric => WidthSchedule::Geometric,
    };
    let fit = kpca_fit(&x, rank, &cfg)?;
    let mut csv = String::new();
    for i in 0..fit.basis.nrows() {
        let row: Vec<String> = (0..fit.basis.ncols()).map(|j| fit.basis[(i, j)].to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    fs::write(output, csv)?;
    writeln!(out, "k={}", fit.rank)?;
    writeln!(out, "s={}", fit.truncation_order)?;
    writeln!(out, "m={}", fit.sketch_width)?;
    writeln!(out, "r={}", fit.projection_width)?;
    writeln!(out, "sketch_rank={}", fit.sketch_rank)?;
    if verify {
        let (residual, optimum) = kpca_error(&x, &fit.basis, rank)?;
        writeln!(out, "residual={residual}")?;
        writeln!(out, "optimum={optimum}")?;
        writeln!(out, "bound={}", (1.0 + g.epsilon) * optimum + g.alpha)?;
    }
    Ok(())
}

fn cmd_nn(g: &GlobalOpts, index: &Path, query: &Path, out: &mut impl Write) -> CliResult {
    if g.replicas.is_some() {
        warn!("--replicas is ignored by nn");
    }
    let sets = load_sets(g, index, None)?;
    let queries = load_sets(g, query, None)?;
    let radius = radius_for(g, sets.iter().chain(&queries).map(|s| &s.points));
    let planned = plan_for(g, sets[0].points.dim(), Task::Distance, radius)?;
    let idx = nn_index_build(&sets, &planned, g.seed, g.jl_dim)?;
    for q in &queries {
        let m = nn_query(&idx, &q.points)?;
        writeln!(
            out,
            "query={} nearest={} index={} sketched_dk2={}",
            q.label, m.label, m.index, m.squared_distance
        )?;
    }
    Ok(())
}

fn cmd_bench(g: &GlobalOpts, dims: &[usize], orders: &[usize], points: usize, out: &mut impl Write) -> CliResult {
    if points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    let constant = PlanConstants::default().variance;
    let mut rng = table_rng(g.seed);
    for &d in dims {
        for &s in orders {
            let blocks = match g.variant {
                Variant::Gs => sketch_dims(Variant::Gs, d, g.epsilon, constant)?,
                Variant::Hd => sketch_dims(Variant::Hd, s, g.epsilon, constant)?,
            };
            let sketch = GaussianSketch::from_config(SketchConfig::new(g.variant, d, s, &blocks, g.seed)?)?;
            let scale = 1.0 / (d as f64).sqrt();
            let data: Vec<f64> = (0..points * d).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
            let x = PointSet::new(d, data)?;
            let start = Instant::now();
            for row in x.rows() {
                std::hint::black_box(sketch.apply(row)?);
            }
            let us = start.elapsed().as_secs_f64() * 1e6 / points as f64;
            writeln!(
                out,
                "variant={} d={d} s={s} output_dim={} us_per_point={us:.2}",
                g.variant,
                sketch.output_dim()
            )?;
        }
    }
    Ok(())
}
