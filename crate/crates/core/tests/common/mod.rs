//! Independent oracles shared by the integration tests.
//!
//! Everything here recomputes results from the state algebra in `fock`
//! (explicit kets, beamsplitter unitaries, projective measurement) and never
//! calls the closed forms under test.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;

use wfuse::fock::{w_state, MixedState, Occupation, PureState};
use wfuse::fusion::FusionBranch;
use wfuse::witness::WitnessParams;

/// Every ket over `modes` modes with at most two excitations.
pub fn all_kets(modes: usize) -> Vec<Occupation> {
    let mut kets = vec![Occupation::vacuum(modes).unwrap()];
    for i in 0..modes {
        kets.push(Occupation::single(modes, i).unwrap());
        for j in i..modes {
            let mut c = vec![0u8; modes];
            c[i] += 1;
            c[j] += 1;
            kets.push(Occupation::new(c).unwrap());
        }
    }
    kets
}

/// A pure state with random complex amplitudes on a random subset of kets.
pub fn random_state(rng: &mut ChaCha8Rng, modes: usize) -> PureState {
    let kets = all_kets(modes);
    let mut terms = Vec::new();
    for k in &kets {
        if rng.random_bool(0.5) {
            terms.push((k.clone(), Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
        }
    }
    if terms.is_empty() {
        terms.push((kets[rng.random_range(0..kets.len())].clone(), Complex64::new(1.0, 0.0)));
    }
    PureState::from_amplitudes(modes, terms).unwrap()
}

pub fn random_mixed(rng: &mut ChaCha8Rng, modes: usize) -> MixedState {
    let branches = (0..rng.random_range(1..5))
        .map(|_| (rng.random::<f64>() + 1e-3, random_state(rng, modes)))
        .collect();
    MixedState::from_weights(branches).unwrap()
}

/// `cosθ|0…0⟩ + sinθ|W_m⟩` on `m` modes.
pub fn block_state(theta: f64, m: usize) -> PureState {
    let vac = PureState::vacuum(m).unwrap();
    let w = w_state(m).unwrap();
    PureState::superpose(&[
        (Complex64::new(theta.cos(), 0.0), &vac),
        (Complex64::new(theta.sin(), 0.0), &w),
    ])
    .unwrap()
}

/// `⟨𝒲⟩ = αp₀ + βp₁ + γp₂ − |⟨W_N|ψ⟩|²` computed from the explicit state.
pub fn witness_expectation(w: &WitnessParams, state: &PureState) -> f64 {
    let rho = MixedState::from(state.clone());
    let pops = rho.populations();
    let f = rho.fidelity(&w_state(w.n).unwrap()).unwrap();
    w.alpha * pops.p0 + w.beta * pops.p1 + w.gamma * pops.p2 - f
}

/// Two-block product state, its modes shuffled by `perm`.
pub fn product_state(theta1: f64, theta2: f64, n: usize, l: usize, perm: &[usize]) -> PureState {
    block_state(theta1, l)
        .tensor(&block_state(theta2, n - l))
        .unwrap()
        .permute_modes(perm)
        .unwrap()
}

/// Smallest witness expectation over `samples` random biseparable product
/// states with random admissible cut and random mode order.
pub fn random_state_minimum(w: &WitnessParams, samples: usize, seed: u64) -> (f64, (f64, f64, usize)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ls: Vec<usize> = (1..w.n).filter(|&l| w.n - l <= l && l < w.k).collect();
    let mut perm: Vec<usize> = (0..w.n).collect();
    let mut best = (f64::INFINITY, (0.0, 0.0, 0));
    for _ in 0..samples {
        let t1 = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
        let t2 = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
        let l = ls[rng.random_range(0..ls.len())];
        perm.shuffle(&mut rng);
        let v = witness_expectation(w, &product_state(t1, t2, w.n, l, &perm));
        if v < best.0 {
            best = (v, (t1, t2, l));
        }
    }
    best
}

/// Fusion by brute force: interfere mode 0 of A with mode 0 of B on a
/// beamsplitter and measure both outputs. Returns (branch, probability,
/// post-state) per detection outcome, with vacuum outcomes merged.
pub fn brute_force_fusion(n: usize) -> Vec<(FusionBranch, f64, PureState)> {
    let w = w_state(n).unwrap();
    let joint = w.tensor(&w).unwrap().beamsplitter(0, n).unwrap();
    let mut out: Vec<(FusionBranch, f64, PureState)> = Vec::new();
    for b in joint.measure_modes(&[0, n]).unwrap() {
        let branch = match (b.outcome[0], b.outcome[1]) {
            (0, 0) => FusionBranch::Separated,
            (1, 0) => FusionBranch::FusedPlus,
            (0, 1) => FusionBranch::FusedMinus,
            _ => FusionBranch::Vacuum,
        };
        match out.iter_mut().find(|(br, _, _)| *br == branch) {
            // both vacuum outcomes leave the same (empty) state
            Some(entry) => entry.1 += b.probability,
            None => out.push((branch, b.probability, b.state)),
        }
    }
    out
}

/// Largest amplitude difference after removing a global phase.
pub fn phase_aligned_diff(a: &PureState, b: &PureState) -> f64 {
    let overlap = a.inner(b).unwrap();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    let aligned = PureState::from_amplitudes(a.modes(), a.iter().map(|(k, amp)| (k.clone(), amp * phase))).unwrap();
    aligned.max_abs_diff(b).unwrap()
}

/// Log-log slope by least squares, computed independently of `wfuse::stats`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let sx: f64 = lx.iter().sum();
    let sy: f64 = ly.iter().sum();
    let sxx: f64 = lx.iter().map(|x| x * x).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
