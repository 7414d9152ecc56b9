//! Sample fusion outcomes shot by shot and compare the herald statistics with
//! the closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wfuse::fock::w_state;
use wfuse::fusion::{heralded_branch_probability, FusionBranch, FusionSampler, DetectionModel, Ports};

fn main() -> wfuse::Result<()> {
    let w3 = w_state(3)?;
    let det = DetectionModel::new(0.45)?.with_ports(Ports::Two);
    let sampler = FusionSampler::new(&w3, &w3, 0, 0, &det)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shots = 500_000;
    let mut counts = [0usize; 4];
    for _ in 0..shots {
        let s = sampler.sample(&mut rng);
        if s.heralded {
            counts[FusionBranch::ALL.iter().position(|b| *b == s.branch).unwrap()] += 1;
        }
    }
    println!("{shots} shots, η = {}, two ports", det.eta);
    for (branch, count) in FusionBranch::ALL.iter().zip(counts) {
        println!(
            "  {:<12} sampled {:.5}  expected {:.5}",
            branch.name(),
            count as f64 / shots as f64,
            heralded_branch_probability(3, *branch, &det)?
        );
    }
    Ok(())
}
