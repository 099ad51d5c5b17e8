use phasebound::optimize::*;
use phasebound::qfi::qfi_bound_fixed_n;
use std::time::Instant;

fn main() {
    let opts = OptimizerOptions::default();
    for (n, eta) in [(20u32, 0.62), (40, 0.62), (60, 0.62), (60, 0.7)] {
        let t = Instant::now();
        let r = optimize_state(n, eta, &opts).unwrap();
        let bound = qfi_bound_fixed_n(n, eta).unwrap();
        println!(
            "n={n} eta={eta}: qfi={:.9} bound={:.4} frac={:.6} iters={} conv={} in {:.2?}",
            r.qfi, bound, r.qfi / bound, r.iterations, r.converged, t.elapsed()
        );
    }
    let t = Instant::now();
    let mut provider = |n: u32, eta: f64| optimize_state(n, eta, &opts);
    let fit = fit_from_direct(0.62, 30, 60, &mut provider).unwrap();
    println!(
        "fit eta=0.62 range 30..60: a={:.6} b={:.4} c={:.3} maxres={:.3e} in {:.2?}",
        fit.a, fit.b, fit.c, fit.max_relative_residual, t.elapsed()
    );
}
