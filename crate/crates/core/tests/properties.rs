mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wfuse::fock::{decompose_w, w_state, MixedState, Occupation, PureState};
use wfuse::fusion::{expand_fusion, fused_states};
use wfuse::protocol::{analytic_rates, ProtocolConfig};
use wfuse::witness::{evaluate_witness, is_valid_witness, StateSummary, WitnessParams};
use wfuse::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fidelity_is_bounded(seed in any::<u64>(), modes in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = common::random_mixed(&mut rng, modes);
        let target = common::random_state(&mut rng, modes);
        let f = rho.fidelity(&target).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((rho.populations().total() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn beamsplitter_preserves_inner_products(seed in any::<u64>(), modes in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_state(&mut rng, modes);
        let b = common::random_state(&mut rng, modes);
        let before = a.inner(&b).unwrap();
        let after = a.beamsplitter(0, modes - 1).unwrap().inner(&b.beamsplitter(0, modes - 1).unwrap()).unwrap();
        prop_assert!((before - after).norm() < 1e-12);
    }

    #[test]
    fn measurement_branches_are_complete(seed in any::<u64>(), modes in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_state(&mut rng, modes);
        let branches = s.measure_modes(&[modes - 1]).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for b in &branches {
            prop_assert!((b.state.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert_eq!(b.state.modes(), modes - 1);
        }
    }

    #[test]
    fn permutation_round_trip(seed in any::<u64>(), modes in 1usize..=6) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_state(&mut rng, modes);
        let mut perm: Vec<usize> = (0..modes).collect();
        perm.shuffle(&mut rng);
        let mut inverse = vec![0; modes];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let back = s.permute_modes(&perm).unwrap().permute_modes(&inverse).unwrap();
        prop_assert!(back.max_abs_diff(&s).unwrap() < 1e-15);
    }

    #[test]
    fn tensor_respects_truncation(seed in any::<u64>(), m1 in 1usize..=4, m2 in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_state(&mut rng, m1);
        let b = common::random_state(&mut rng, m2);
        let max = |s: &PureState| s.iter().map(|(k, _)| k.excitations()).max().unwrap();
        match a.tensor(&b) {
            Ok(t) => {
                prop_assert!(max(&a) + max(&b) <= 2);
                prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
                prop_assert_eq!(t.modes(), m1 + m2);
            }
            Err(Error::TruncationOverflow { .. }) => prop_assert!(max(&a) + max(&b) > 2),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn mixed_state_json_round_trip(seed in any::<u64>(), modes in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = common::random_mixed(&mut rng, modes);
        let back: MixedState = serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
        prop_assert_eq!(back.modes(), rho.modes());
        for ((w1, s1), (w2, s2)) in rho.branches().iter().zip(back.branches()) {
            prop_assert!((w1 - w2).abs() < 1e-15);
            prop_assert!(s1.max_abs_diff(s2).unwrap() < 1e-15);
        }
    }

    #[test]
    fn occupation_text_round_trip(counts in prop::collection::vec(0u8..=2, 1..8)) {
        prop_assume!(counts.iter().map(|&c| c as usize).sum::<usize>() <= 2);
        let ket = Occupation::new(counts).unwrap();
        prop_assert_eq!(ket.to_string().parse::<Occupation>().unwrap(), ket);
    }

    #[test]
    fn witness_min_is_monotone(
        base in prop::array::uniform3(0.0f64..1.0),
        bump in 0.0f64..0.5,
        which in 0usize..3,
        n in 3usize..=5,
    ) {
        let mut raised = base;
        raised[which] += bump;
        let lo = WitnessParams::new(base[0], base[1], base[2], n, n).unwrap();
        let hi = WitnessParams::new(raised[0], raised[1], raised[2], n, n).unwrap();
        let r_lo = is_valid_witness(&lo, 61, 1e-9).unwrap();
        let r_hi = is_valid_witness(&hi, 61, 1e-9).unwrap();
        prop_assert!(r_hi.min_value >= r_lo.min_value - 1e-10);
    }

    #[test]
    fn witness_expectation_is_affine(
        params in prop::array::uniform3(0.0f64..1.0),
        pops in prop::array::uniform3(0.0f64..1.0),
        f in 0.0f64..1.0,
        delta in 0.0f64..1.0,
    ) {
        let total: f64 = pops.iter().sum();
        prop_assume!(total > 1e-3);
        let s = StateSummary::new(pops[0] / total, pops[1] / total, pops[2] / total, f).unwrap();
        let w = WitnessParams::new(params[0], params[1], params[2], 3, 3).unwrap();
        let shifted = WitnessParams { gamma: w.gamma + delta, ..w };
        let diff = evaluate_witness(&shifted, &s) - evaluate_witness(&w, &s);
        prop_assert!((diff - delta * s.p2).abs() < 1e-12);
    }

    #[test]
    fn rates_grow_with_p_eta_and_tau(
        p in 1e-4f64..0.5,
        eta in 0.05f64..1.0,
        tau in 10.0f64..5000.0,
        factor in 1.01f64..3.0,
    ) {
        let cfg = ProtocolConfig { eta, tau, ..Default::default() }.with_p(p);
        let rate = |c: &ProtocolConfig| {
            let r = analytic_rates(c).unwrap();
            (r.enhanced.coincidences_per_hour, r.memoryless.coincidences_per_hour)
        };
        let (e0, m0) = rate(&cfg);
        for bigger in [
            cfg.with_p((p * factor).min(1.0)),
            ProtocolConfig { eta: (eta * factor).min(1.0), ..cfg },
            ProtocolConfig { tau: tau * factor, ..cfg },
        ] {
            let (e1, m1) = rate(&bigger);
            prop_assert!(e1 >= e0 * (1.0 - 1e-12));
            prop_assert!(m1 >= m0 * (1.0 - 1e-12));
        }
    }

    // each extra attempt pays off while the stored state keeps at least half
    // its retrieval weight; beyond that a larger cap can lower the rate
    #[test]
    fn rates_grow_with_cap_while_memory_holds(
        p in 1e-4f64..0.5,
        tau in 10.0f64..5000.0,
        caps in (1u64..2000, 1u64..2000),
    ) {
        let cfg = ProtocolConfig { tau, ..Default::default() }.with_p(p);
        let limit = (tau * 1e-6 * std::f64::consts::LN_2 / (cfg.t_attempt * 1e-9)).floor() as u64;
        prop_assume!(limit >= 2);
        let (a, b) = (caps.0.min(caps.1), caps.0.max(caps.1));
        let (a, b) = (a.min(limit - 1), b.min(limit - 1));
        let rate = |cap: u64| analytic_rates(&ProtocolConfig { attempt_cap: cap, ..cfg }).unwrap().enhanced.coincidences_per_hour;
        prop_assert!(rate(b) >= rate(a) * (1.0 - 1e-12));
    }
}

#[test]
fn oversized_cap_can_lower_the_rate() {
    let cfg = ProtocolConfig::default();
    let rate = |cap: u64| analytic_rates(&ProtocolConfig { attempt_cap: cap, ..cfg }).unwrap().enhanced.coincidences_per_hour;
    assert!(rate(1000) > rate(300));
    assert!(rate(100_000) < rate(1000));
}

#[test]
fn decomposition_rebuilds_w_states() {
    for n in 2..=8 {
        let (c1, c2) = decompose_w(n).unwrap();
        let one = PureState::basis(Occupation::single(1, 0).unwrap());
        let head = one.tensor(&PureState::vacuum(n - 1).unwrap()).unwrap();
        let tail = PureState::vacuum(1).unwrap().tensor(&w_state(n - 1).unwrap()).unwrap();
        let rebuilt = PureState::superpose(&[
            (num_complex::Complex64::new(c1, 0.0), &head),
            (num_complex::Complex64::new(c2, 0.0), &tail),
        ])
        .unwrap();
        assert!(rebuilt.max_abs_diff(&w_state(n).unwrap()).unwrap() < 1e-12);
    }
}

#[test]
fn fusion_branches_are_complete_and_signs_orthogonal() {
    for n in 2..=10 {
        let total: f64 = expand_fusion(n).unwrap().iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let (plus, minus) = fused_states(n).unwrap();
        assert!(plus.inner(&minus).unwrap().norm() < 1e-12);
    }
}
