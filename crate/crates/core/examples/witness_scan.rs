//! Search for the most negative certified witness on a measured state and
//! estimate how robust the violation is to the quoted uncertainties.

use wfuse::witness::{optimize_witness, witness_distribution, ScanOptions, StateSummary, SummaryErrors};

fn main() -> wfuse::Result<()> {
    let summary = StateSummary::new(0.30, 0.68, 0.02, 0.61)?.with_errors(SummaryErrors {
        p0: 0.02,
        p1: 0.02,
        p2: 0.005,
        fidelity: 0.03,
    })?;
    let opts = ScanOptions { step: 0.01, ..Default::default() };
    let best = optimize_witness(&summary, 4, 4, &opts)?;
    let w = &best.params;
    println!(
        "best witness (α, β, γ) = ({:.3}, {:.3}, {:.3}), min over biseparable states {:+.2e}",
        w.alpha, w.beta, w.gamma, best.certificate.min_value
    );
    println!("expectation on the state: {:.4}", best.expectation);

    let dist = witness_distribution(w, &summary, 20_000, 5, 30)?;
    println!("resampled mean {:.4}, negative in {:.1}% of draws", dist.mean, 100.0 * dist.negative_fraction);
    let peak = dist.histogram.iter().map(|b| b.count).max().unwrap_or(1);
    for b in &dist.histogram {
        println!("{:+.3} {}", b.left, "#".repeat((b.count * 50 / peak) as usize));
    }
    Ok(())
}
