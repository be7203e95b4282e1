//! Checks `Var⟨T(u),T(v)⟩ ≤ (ε²/10)‖u‖²‖v‖²` at `m = C·k/ε²` for k in {2, 4, 8}.
//!
//! Usage: `calibrate [C] [trials]`. Exits nonzero if any degree fails.

use gsketch_core::calibrate::measure_variance;
use gsketch_core::planner::DEFAULT_VARIANCE_CONSTANT;

const EPSILON: f64 = 0.5;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let constant: f64 = args.first().map_or(DEFAULT_VARIANCE_CONSTANT, |a| a.parse().expect("C must be a number"));
    let trials: usize = args.get(1).map_or(20_000, |a| a.parse().expect("trials must be an integer"));
    let mut ok = true;
    for degree in [2, 4, 8] {
        for same in [true, false] {
            let r = measure_variance(degree, EPSILON, constant, same, trials, 2024).expect("calibration run");
            println!(
                "k={} m={} same_input={} var={:.6} bound={:.6} mean={:.5} target={:.5} {}",
                r.degree,
                r.sketch_dim,
                r.same_input,
                r.normalized_variance,
                r.bound,
                r.mean,
                r.target,
                if r.passes() { "PASS" } else { "FAIL" }
            );
            ok &= r.passes();
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
