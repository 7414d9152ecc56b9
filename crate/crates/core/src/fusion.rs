//! Fusion of two W states by single-photon interference on a 50:50 beamsplitter.
//!
//! One mode of each `|W_N⟩` is read out and interfered. Depending on how many
//! excitations the two read-out modes held, the remaining `2N − 2` modes end
//! up in two separate `|W_{N−1}⟩` states (no click), in the vacuum (two
//! photons) or in one of the fused states `|W_{2N−2}⟩±` (one photon, sign
//! fixed by the output port).

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{w_state, MixedState, PureState};

/// Which beamsplitter outputs are monitored by a detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ports {
    /// Only the `+` output is detected; `−` heralds are lost.
    #[default]
    One,
    Two,
}

/// How detector response scales with the number of incident photons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClickModel {
    /// `m` photons click with probability `m·η` (small-η expansion).
    #[default]
    Linearized,
    /// `m` photons click with probability `1 − (1 − η)^m`.
    Exact,
}

/// Detection and interference settings for the fusion read-out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    /// End-to-end retrieval and detection efficiency.
    pub eta: f64,
    #[serde(default)]
    pub ports: Ports,
    #[serde(default)]
    pub click_model: ClickModel,
    /// Two-photon interference visibility, 1 for indistinguishable modes.
    #[serde(default = "one")]
    pub visibility: f64,
    /// With two ports, whether the click identifies the port (and hence the sign).
    #[serde(default = "yes")]
    pub sign_resolving: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl DetectionModel {
    pub fn new(eta: f64) -> Result<Self> {
        let det = DetectionModel {
            eta,
            ports: Ports::One,
            click_model: ClickModel::Linearized,
            visibility: 1.0,
            sign_resolving: true,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn with_ports(mut self, ports: Ports) -> Self {
        self.ports = ports;
        self
    }

    pub fn with_click_model(mut self, model: ClickModel) -> Self {
        self.click_model = model;
        self
    }

    pub fn with_visibility(mut self, visibility: f64) -> Self {
        self.visibility = visibility;
        self
    }

    pub fn sign_blind(mut self) -> Self {
        self.sign_resolving = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("{} is outside [0, 1]", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::param(
                "visibility",
                format!("{} is outside [0, 1]", self.visibility),
            ));
        }
        Ok(())
    }

    // unclamped: the linearised response exceeds one for m·η > 1
    fn response(&self, photons: usize) -> f64 {
        match self.click_model {
            ClickModel::Linearized => photons as f64 * self.eta,
            ClickModel::Exact => 1.0 - (1.0 - self.eta).powi(photons as i32),
        }
    }

    /// Click probability for `photons` photons reaching the monitored detector(s).
    pub fn click_probability(&self, photons: usize) -> f64 {
        self.response(photons).min(1.0)
    }

    /// Herald probability of a lone photon entering the interference.
    pub fn single_photon_click(&self) -> f64 {
        match self.ports {
            Ports::One => 0.5 * self.response(1),
            Ports::Two => self.response(1),
        }
    }

    /// Herald probability when both read-out modes carry a photon.
    ///
    /// With visibility `V` the pair bunches into one output with probability
    /// `(1 + V)/2` and splits otherwise. In the linearised model this reduces to
    /// `2η` per monitored port fraction, i.e. `η` for one port and `2η` for two.
    pub fn photon_pair_click(&self) -> f64 {
        let v = self.visibility;
        match self.ports {
            Ports::One => 0.25 * (1.0 + v) * self.response(2) + 0.5 * (1.0 - v) * self.response(1),
            Ports::Two => self.response(2),
        }
    }

    // pair response at the `+` port only, used when conditioning on that port
    fn photon_pair_click_plus_port(&self) -> f64 {
        let v = self.visibility;
        0.25 * (1.0 + v) * self.response(2) + 0.5 * (1.0 - v) * self.response(1)
    }
}

/// Pre-detection outcome class of a fusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionBranch {
    /// Neither read-out mode excited; no photon.
    Separated,
    /// Both read-out modes excited; remaining modes empty.
    Vacuum,
    FusedPlus,
    FusedMinus,
}

impl FusionBranch {
    pub const ALL: [FusionBranch; 4] = [
        FusionBranch::Separated,
        FusionBranch::Vacuum,
        FusionBranch::FusedPlus,
        FusionBranch::FusedMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionBranch::Separated => "separated",
            FusionBranch::Vacuum => "vacuum",
            FusionBranch::FusedPlus => "fused_plus",
            FusionBranch::FusedMinus => "fused_minus",
        }
    }

    fn from_port_counts(plus: u8, minus: u8) -> FusionBranch {
        match (plus, minus) {
            (0, 0) => FusionBranch::Separated,
            (1, 0) => FusionBranch::FusedPlus,
            (0, 1) => FusionBranch::FusedMinus,
            _ => FusionBranch::Vacuum,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FusionOutcome {
    pub branch: FusionBranch,
    pub probability: f64,
    /// State of the `2(N − 1)` remaining modes, A's modes first.
    pub post_state: MixedState,
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("fusion needs N ≥ 2, got {n}")));
    }
    Ok(())
}

/// `|W_{2N−2}⟩± = (|W_{N−1}⟩|Vac⟩ ± |Vac⟩|W_{N−1}⟩)/√2`.
pub fn fused_states(n: usize) -> Result<(PureState, PureState)> {
    check_size(n)?;
    let w = w_state(n - 1)?;
    let vac = PureState::vacuum(n - 1)?;
    let left = w.tensor(&vac)?;
    let right = vac.tensor(&w)?;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let plus = PureState::superpose(&[(h, &left), (h, &right)])?;
    let minus = PureState::superpose(&[(h, &left), (-h, &right)])?;
    Ok((plus, minus))
}

/// Closed-form branch decomposition of `|W_N⟩_A |W_N⟩_B` before detection.
pub fn expand_fusion(n: usize) -> Result<Vec<FusionOutcome>> {
    check_size(n)?;
    let nf = n as f64;
    let w = w_state(n - 1)?;
    let (plus, minus) = fused_states(n)?;
    let fused = (nf - 1.0) / (nf * nf);
    Ok(vec![
        FusionOutcome {
            branch: FusionBranch::Separated,
            probability: ((nf - 1.0) / nf).powi(2),
            post_state: w.tensor(&w)?.into(),
        },
        FusionOutcome {
            branch: FusionBranch::Vacuum,
            probability: 1.0 / (nf * nf),
            post_state: PureState::vacuum(2 * (n - 1))?.into(),
        },
        FusionOutcome {
            branch: FusionBranch::FusedPlus,
            probability: fused,
            post_state: plus.into(),
        },
        FusionOutcome {
            branch: FusionBranch::FusedMinus,
            probability: fused,
            post_state: minus.into(),
        },
    ])
}

/// Probability that a branch occurs *and* produces a herald click.
pub fn heralded_branch_probability(n: usize, branch: FusionBranch, det: &DetectionModel) -> Result<f64> {
    check_size(n)?;
    det.validate()?;
    let nf = n as f64;
    let fused = (nf - 1.0) / (nf * nf) * det.response(1);
    Ok(match branch {
        FusionBranch::Separated => 0.0,
        FusionBranch::Vacuum => det.photon_pair_click() / (nf * nf),
        FusionBranch::FusedPlus => fused,
        FusionBranch::FusedMinus => match det.ports {
            Ports::One => 0.0,
            Ports::Two => fused,
        },
    })
}

/// Total herald probability: `2η/N` with both ports monitored, `η/N` with one
/// (linearised click model).
pub fn herald_probability(n: usize, det: &DetectionModel) -> Result<f64> {
    check_size(n)?;
    det.validate()?;
    let nf = n as f64;
    Ok(2.0 * (nf - 1.0) / (nf * nf) * det.single_photon_click() + det.photon_pair_click() / (nf * nf))
}

/// State of the remaining modes given a herald.
///
/// With a sign-resolving detector this is the state heralded by the `+`
/// port, `w|W_{2N−2}⟩⁺⟨·| + (1 − w)ρ_vac` with `w = (N − 1)/N` under the
/// linearised model; imperfect visibility admixes `|W_{2N−2}⟩⁻` with weight
/// `(1 − V)/2` inside the fused part. A sign-blind two-port detector yields an
/// equal `±` mixture.
pub fn conditional_fused_state(n: usize, det: &DetectionModel) -> Result<MixedState> {
    check_size(n)?;
    det.validate()?;
    let nf = n as f64;
    let (plus, minus) = fused_states(n)?;
    let vac = PureState::vacuum(2 * (n - 1))?;
    let single = (nf - 1.0) / (nf * nf) * det.response(1);
    let (w_plus, w_minus, w_vac) = if det.ports == Ports::Two && !det.sign_resolving {
        (single, single, det.photon_pair_click() / (nf * nf))
    } else {
        let v = det.visibility;
        (
            single * 0.5 * (1.0 + v),
            single * 0.5 * (1.0 - v),
            det.photon_pair_click_plus_port() / (nf * nf),
        )
    };
    if w_plus + w_minus + w_vac <= 0.0 {
        return Err(Error::param("eta", "no herald is possible at zero efficiency"));
    }
    MixedState::from_weights(vec![(w_plus, plus), (w_minus, minus), (w_vac, vac)])
}

/// Vacuum population of [`conditional_fused_state`].
pub fn vacuum_fraction(n: usize, det: &DetectionModel) -> Result<f64> {
    Ok(conditional_fused_state(n, det)?.populations().p0)
}

/// One row of the fusion branch table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchRow {
    pub branch: FusionBranch,
    pub probability_predetect: f64,
    pub probability_heralded: f64,
}

pub fn branch_table(n: usize, det: &DetectionModel) -> Result<Vec<BranchRow>> {
    expand_fusion(n)?
        .into_iter()
        .map(|o| {
            Ok(BranchRow {
                branch: o.branch,
                probability_predetect: o.probability,
                probability_heralded: heralded_branch_probability(n, o.branch, det)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Event {
    plus_photons: u8,
    minus_photons: u8,
    branch: FusionBranch,
    post_state: PureState,
}

/// Result of one sampled fusion attempt.
#[derive(Clone, Debug)]
pub struct FusionSample<'a> {
    pub heralded: bool,
    pub branch: FusionBranch,
    pub post_state: &'a PureState,
}

/// Precomputed outcome distribution for repeatedly fusing two given states.
///
/// Interference is exact for the indistinguishable fraction `V` of events
/// (beamsplitter on the joint state followed by port-number measurement);
/// the remaining `1 − V` route each photon independently to either port.
#[derive(Clone, Debug)]
pub struct FusionSampler {
    det: DetectionModel,
    events: Vec<Event>,
    cumulative: Vec<f64>,
}

impl FusionSampler {
    pub fn new(
        a: &PureState,
        b: &PureState,
        fuse_a: usize,
        fuse_b: usize,
        det: &DetectionModel,
    ) -> Result<Self> {
        det.validate()?;
        for (state, mode) in [(a, fuse_a), (b, fuse_b)] {
            if mode >= state.modes() {
                return Err(Error::InvalidModeIndex {
                    index: mode,
                    modes: state.modes(),
                });
            }
            if state.iter().any(|(k, _)| k.counts()[mode] > 1) {
                return Err(Error::param(
                    "fuse mode",
                    format!("mode {mode} carries more than one excitation"),
                ));
            }
        }
        let joint = a.tensor(b)?;
        let (ma, mb) = (fuse_a, a.modes() + fuse_b);
        let v = det.visibility;
        let mut weighted = Vec::new();

        if v > 0.0 {
            for br in joint.beamsplitter(ma, mb)?.measure_modes(&[ma, mb])? {
                let (p, m) = (br.outcome[0], br.outcome[1]);
                weighted.push((v * br.probability, p, m, br.state));
            }
        }
        if v < 1.0 {
            for br in joint.measure_modes(&[ma, mb])? {
                let n = (br.outcome[0] + br.outcome[1]) as u32;
                for to_plus in 0..=n {
                    let ways = (0..to_plus).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
                    let w = (1.0 - v) * br.probability * ways / 2f64.powi(n as i32);
                    weighted.push((w, to_plus as u8, (n - to_plus) as u8, br.state.clone()));
                }
            }
        }

        let mut events = Vec::with_capacity(weighted.len());
        let mut cumulative = Vec::with_capacity(weighted.len());
        let mut acc = 0.0;
        for (w, plus_photons, minus_photons, post_state) in weighted {
            acc += w;
            cumulative.push(acc);
            events.push(Event {
                plus_photons,
                minus_photons,
                branch: FusionBranch::from_port_counts(plus_photons, minus_photons),
                post_state,
            });
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Ok(FusionSampler {
            det: *det,
            events,
            cumulative,
        })
    }

    /// Pre-detection probability of each branch under this sampler.
    pub fn branch_probability(&self, branch: FusionBranch) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for (e, c) in self.events.iter().zip(&self.cumulative) {
            if e.branch == branch {
                total += c - prev;
            }
            prev = *c;
        }
        total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FusionSample<'_> {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.events.len() - 1);
        let e = &self.events[idx];
        let detected = match self.det.ports {
            Ports::One => e.plus_photons,
            Ports::Two => e.plus_photons + e.minus_photons,
        } as usize;
        let heralded = detected > 0 && rng.random::<f64>() < self.det.click_probability(detected);
        FusionSample {
            heralded,
            branch: e.branch,
            post_state: &e.post_state,
        }
    }
}

/// Owned result of [`sample_fusion`].
#[derive(Clone, Debug)]
pub struct SampledFusion {
    pub heralded: bool,
    pub post_state: MixedState,
    pub branch: FusionBranch,
}

/// Draws one fusion outcome for the given states, deterministic in `seed`.
pub fn sample_fusion(
    a: &PureState,
    b: &PureState,
    fuse_a: usize,
    fuse_b: usize,
    det: &DetectionModel,
    seed: u64,
) -> Result<SampledFusion> {
    let sampler = FusionSampler::new(a, b, fuse_a, fuse_b, det)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = sampler.sample(&mut rng);
    Ok(SampledFusion {
        heralded: s.heralded,
        post_state: s.post_state.clone().into(),
        branch: s.branch,
    })
}
