//! Branch probabilities of W_N ⊗ W_N fusion with ideal and lossy detectors.

use wfuse::fock::w_state;
use wfuse::fusion::{branch_table, conditional_fused_state, herald_probability, ClickModel, DetectionModel, Ports};

fn main() -> wfuse::Result<()> {
    let detectors = [
        ("ideal, one port", DetectionModel::new(1.0)?),
        ("η = 0.25, one port", DetectionModel::new(0.25)?),
        ("η = 0.25, two ports", DetectionModel::new(0.25)?.with_ports(Ports::Two)),
        ("η = 0.6, exact clicks, V = 0.9", DetectionModel::new(0.6)?.with_click_model(ClickModel::Exact).with_visibility(0.9)),
    ];
    for n in [2, 3, 5] {
        for (label, det) in &detectors {
            println!("N = {n}, {label}: herald probability {:.5}", herald_probability(n, det)?);
            for row in branch_table(n, det)? {
                println!(
                    "    {:<12} {:.5}  heralded {:.5}",
                    row.branch.name(),
                    row.probability_predetect,
                    row.probability_heralded
                );
            }
            let rho = conditional_fused_state(n, det)?;
            let pops = rho.populations();
            println!(
                "    heralded state: p0 {:.4}  p1 {:.4}  F(W_{}) {:.4}",
                pops.p0,
                pops.p1,
                2 * (n - 1),
                rho.fidelity(&w_state(2 * (n - 1))?)?
            );
        }
    }
    Ok(())
}
