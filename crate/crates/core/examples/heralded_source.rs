//! Heralded single-excitation source: how pair-generation strength trades
//! vacuum against double excitations, and which background matches a target
//! vacuum fraction.

use wfuse::protocol::{background_for_vacuum, heralded_source_state};

fn main() -> wfuse::Result<()> {
    let eta = 0.3;
    for chi in [0.005, 0.02, 0.05, 0.1] {
        let s = heralded_source_state(chi, eta, 0.0)?;
        println!("χ = {chi:<5}  p0 {:.4}  p1 {:.4}  p2 {:.4}  F {:.4}", s.p0, s.p1, s.p2, s.fidelity);
    }
    let b = background_for_vacuum(0.02, eta, 0.1)?;
    let s = heralded_source_state(0.02, eta, b)?;
    println!("background {b:.3e} gives p0 = {:.4}", s.p0);
    Ok(())
}
