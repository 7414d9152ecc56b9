//! Certify witness parameters for a four-mode W state and evaluate them on the
//! heralded output of a three-by-three fusion.

use std::time::Instant;

use wfuse::fusion::{conditional_fused_state, DetectionModel};
use wfuse::witness::{evaluate_witness, is_valid_witness, StateSummary, WitnessParams, DEFAULT_GRID, DEFAULT_TOLERANCE};

fn main() -> wfuse::Result<()> {
    let sets = [(0.0977, 0.7775, 1.0), (0.3854, 0.7525, 0.4101), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0)];
    for (a, b, g) in sets {
        let w = WitnessParams::new(a, b, g, 4, 4)?;
        let t = Instant::now();
        let r = is_valid_witness(&w, DEFAULT_GRID, DEFAULT_TOLERANCE)?;
        println!(
            "({a:.4}, {b:.4}, {g:.4}): min f = {:+.3e} at θ = ({:.4}, {:.4}), l = {}  valid at 1e-9: {}  [{:.1} ms]",
            r.min_value,
            r.argmin.theta1,
            r.argmin.theta2,
            r.argmin.l,
            r.valid,
            t.elapsed().as_secs_f64() * 1e3
        );
    }

    let state = conditional_fused_state(3, &DetectionModel::new(0.25)?)?;
    let pops = state.populations();
    let fidelity = state.fidelity(&wfuse::fock::w_state(4)?)?;
    let summary = StateSummary::new(pops.p0, pops.p1, pops.p2, fidelity)?;
    let w = WitnessParams::new(0.0977, 0.7775, 1.0, 4, 4)?;
    println!(
        "heralded fused state p = ({:.4}, {:.4}, {:.4}), F = {:.4}: ⟨W⟩ = {:.6}",
        pops.p0,
        pops.p1,
        pops.p2,
        fidelity,
        evaluate_witness(&w, &summary)
    );
    Ok(())
}
