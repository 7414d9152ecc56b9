//! Coincidence rates with and without the memory over a range of herald
//! probabilities, Monte Carlo against the closed form.

use wfuse::protocol::{sweep, ProtocolConfig};
use wfuse::stats::{log_space, loglog_slope};

fn main() -> wfuse::Result<()> {
    let cfg = ProtocolConfig::default();
    let ps = log_space(1e-4, 1e-2, 5);
    let points = sweep(&cfg, &ps, 200_000, 42)?;
    println!("{:>9} {:>12} {:>9} {:>12} {:>12} {:>7}", "p", "enhanced/h", "±", "exact", "memoryless/h", "gain");
    for pt in &points {
        println!(
            "{:>9.2e} {:>12.4e} {:>9.1e} {:>12.4e} {:>12.4e} {:>7.1}",
            pt.p,
            pt.enhanced.coincidences_per_hour,
            pt.enhanced.coincidences_per_hour_stderr,
            pt.analytic.enhanced.coincidences_per_hour,
            pt.memoryless.coincidences_per_hour,
            pt.enhancement_factor()
        );
    }
    let rate = |f: fn(&wfuse::protocol::SweepPoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
    println!("log-log slope, enhanced:   {:.3}", loglog_slope(&ps, &rate(|p| p.enhanced.coincidences_per_hour)));
    println!("log-log slope, memoryless: {:.3}", loglog_slope(&ps, &rate(|p| p.memoryless.coincidences_per_hour)));
    Ok(())
}
