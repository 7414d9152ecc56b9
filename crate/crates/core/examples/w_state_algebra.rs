//! Build W states, split one into a single excitation plus a smaller W state,
//! and watch a beamsplitter turn two W states into a fused superposition.

use num_complex::Complex64;
use wfuse::fock::{decompose_w, w_state, Occupation, PureState};

fn main() -> wfuse::Result<()> {
    for n in 2..=6 {
        let (c1, c2) = decompose_w(n)?;
        println!("W_{n} = {c1:.4}·|1⟩|0…⟩ + {c2:.4}·|0⟩|W_{}⟩", n - 1);
    }

    // rebuild W_4 from its decomposition
    let (c1, c2) = decompose_w(4)?;
    let head = PureState::basis(Occupation::single(1, 0)?).tensor(&PureState::vacuum(3)?)?;
    let tail = PureState::vacuum(1)?.tensor(&w_state(3)?)?;
    let rebuilt = PureState::superpose(&[(Complex64::new(c1, 0.0), &head), (Complex64::new(c2, 0.0), &tail)])?;
    println!("rebuild error: {:.2e}", rebuilt.max_abs_diff(&w_state(4)?)?);

    let joint = w_state(3)?.tensor(&w_state(3)?)?.beamsplitter(0, 3)?;
    println!("after the beamsplitter: {} kets", joint.support());
    for b in joint.measure_modes(&[0, 3])? {
        println!(
            "  ports {:?}: probability {:.4}, {} excitation(s) left",
            b.outcome,
            b.probability,
            b.state.iter().map(|(k, _)| k.excitations()).max().unwrap_or(0)
        );
    }
    Ok(())
}
