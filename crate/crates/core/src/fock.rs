//! Sparse multimode state algebra truncated to two total excitations.
//!
//! Kets are occupation tuples over `M` modes with every mode holding 0, 1 or 2
//! excitations and at most two excitations overall. States are kept sparse
//! (ordered maps keyed by occupation) so that iteration order, and therefore
//! every derived number, is deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest total excitation number representable by the model.
pub const MAX_EXCITATIONS: usize = 2;

/// Tolerance for normalisation and weight checks.
pub const TOLERANCE: f64 = 1e-12;

// amplitudes with |a|² below this are dropped from the sparse map
const PRUNE: f64 = 1e-32;

/// Excitation-number sector addressed by the projectors `P₀`, `P₁`, `P₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Vacuum,
    Single,
    Double,
}

impl Sector {
    pub const ALL: [Sector; 3] = [Sector::Vacuum, Sector::Single, Sector::Double];

    pub fn excitations(self) -> usize {
        match self {
            Sector::Vacuum => 0,
            Sector::Single => 1,
            Sector::Double => 2,
        }
    }

    pub fn from_excitations(n: usize) -> Option<Sector> {
        match n {
            0 => Some(Sector::Vacuum),
            1 => Some(Sector::Single),
            2 => Some(Sector::Double),
            _ => None,
        }
    }
}

/// A basis ket: per-mode excitation counts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(Vec<u8>);

impl Occupation {
    pub fn new(counts: Vec<u8>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidDimension("a ket needs at least one mode".into()));
        }
        let total: usize = counts.iter().map(|&c| c as usize).sum();
        if total > MAX_EXCITATIONS {
            return Err(Error::TruncationOverflow { excitations: total });
        }
        Ok(Occupation(counts))
    }

    pub fn vacuum(modes: usize) -> Result<Self> {
        Occupation::new(vec![0; modes])
    }

    /// One excitation in mode `j`, all other modes empty.
    pub fn single(modes: usize, j: usize) -> Result<Self> {
        if j >= modes {
            return Err(Error::InvalidModeIndex { index: j, modes });
        }
        let mut counts = vec![0; modes];
        counts[j] = 1;
        Occupation::new(counts)
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn excitations(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn sector(&self) -> Sector {
        // the constructor bounds the total by MAX_EXCITATIONS
        Sector::from_excitations(self.excitations()).expect("bounded occupation")
    }

    fn concat(&self, other: &Occupation) -> Result<Occupation> {
        let mut counts = Vec::with_capacity(self.modes() + other.modes());
        counts.extend_from_slice(&self.0);
        counts.extend_from_slice(&other.0);
        Occupation::new(counts)
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Occupation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let counts = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                '2' => Ok(2),
                other => Err(Error::param(
                    "occupation",
                    format!("unexpected character {other:?} in {s:?}"),
                )),
            })
            .collect::<Result<Vec<u8>>>()?;
        Occupation::new(counts)
    }
}

/// Normalised pure state with sparse complex amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PureStateRepr", into = "PureStateRepr")]
pub struct PureState {
    modes: usize,
    amps: BTreeMap<Occupation, Complex64>,
}

impl PureState {
    pub fn vacuum(modes: usize) -> Result<Self> {
        Ok(PureState::basis(Occupation::vacuum(modes)?))
    }

    pub fn basis(ket: Occupation) -> Self {
        let modes = ket.modes();
        let mut amps = BTreeMap::new();
        amps.insert(ket, Complex64::new(1.0, 0.0));
        PureState { modes, amps }
    }

    /// Builds a state from (possibly repeated) ket/amplitude pairs and normalises it.
    pub fn from_amplitudes<I>(modes: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, Complex64)>,
    {
        let mut amps: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (ket, a) in terms {
            if ket.modes() != modes {
                return Err(Error::DimensionMismatch {
                    expected: modes,
                    found: ket.modes(),
                });
            }
            *amps.entry(ket).or_default() += a;
        }
        PureState::normalized(modes, amps)
    }

    fn normalized(modes: usize, mut amps: BTreeMap<Occupation, Complex64>) -> Result<Self> {
        amps.retain(|_, a| a.norm_sqr() > PRUNE);
        let norm = amps.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        for a in amps.values_mut() {
            *a /= norm;
        }
        Ok(PureState { modes, amps })
    }

    /// `Σⱼ e^{iφⱼ}/√N |0…1ⱼ…0⟩` over `n = phases.len()` modes.
    pub fn w_state(phases: &[f64]) -> Result<Self> {
        let n = phases.len();
        if n == 0 {
            return Err(Error::InvalidDimension("a W state needs N ≥ 1".into()));
        }
        let scale = 1.0 / (n as f64).sqrt();
        let terms = phases
            .iter()
            .enumerate()
            .map(|(j, &phi)| Ok((Occupation::single(n, j)?, Complex64::from_polar(scale, phi))))
            .collect::<Result<Vec<_>>>()?;
        PureState::from_amplitudes(n, terms)
    }

    /// Normalised linear combination `Σ cᵢ |ψᵢ⟩`.
    pub fn superpose(terms: &[(Complex64, &PureState)]) -> Result<Self> {
        let modes = terms.first().ok_or(Error::ZeroNorm)?.1.modes;
        let mut amps: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (c, state) in terms {
            if state.modes != modes {
                return Err(Error::DimensionMismatch {
                    expected: modes,
                    found: state.modes,
                });
            }
            for (ket, a) in &state.amps {
                *amps.entry(ket.clone()).or_default() += c * a;
            }
        }
        PureState::normalized(modes, amps)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn amplitude(&self, ket: &Occupation) -> Complex64 {
        self.amps.get(ket).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amps.iter()
    }

    /// Number of kets with non-zero amplitude.
    pub fn support(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// `|a⟩ ⊗ |b⟩` with the modes of `self` first.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let mut amps = BTreeMap::new();
        for (ka, a) in &self.amps {
            for (kb, b) in &other.amps {
                amps.insert(ka.concat(kb)?, a * b);
            }
        }
        PureState::normalized(self.modes + other.modes, amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        self.check_modes(other.modes)?;
        let (small, large, conj_small) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps, true)
        } else {
            (&other.amps, &self.amps, false)
        };
        Ok(small
            .iter()
            .filter_map(|(k, a)| large.get(k).map(|b| if conj_small { a.conj() * b } else { b.conj() * a }))
            .sum())
    }

    /// Weight `⟨ψ|Pₙ|ψ⟩` of one excitation sector.
    pub fn sector_weight(&self, sector: Sector) -> f64 {
        self.amps
            .iter()
            .filter(|(k, _)| k.sector() == sector)
            .fold(0.0, |acc, (_, a)| acc + a.norm_sqr())
    }

    /// Renormalised projection onto a sector, or `None` when it carries no weight.
    pub fn project(&self, sector: Sector) -> (f64, Option<PureState>) {
        let amps: BTreeMap<_, _> = self
            .amps
            .iter()
            .filter(|(k, _)| k.sector() == sector)
            .map(|(k, a)| (k.clone(), *a))
            .collect();
        let weight: f64 = amps.values().map(|a| a.norm_sqr()).sum();
        match PureState::normalized(self.modes, amps) {
            Ok(state) => (weight, Some(state)),
            Err(_) => (0.0, None),
        }
    }

    pub fn project_excitations(&self, sector: Sector) -> (f64, Option<MixedState>) {
        MixedState::from(self.clone()).project_excitations(sector)
    }

    /// 50:50 beamsplitter on modes `a`, `b`: `a† → (a† + b†)/√2`, `b† → (a† − b†)/√2`.
    pub fn beamsplitter(&self, a: usize, b: usize) -> Result<PureState> {
        self.check_index(a)?;
        self.check_index(b)?;
        if a == b {
            return Err(Error::param("beamsplitter", "the two modes must differ"));
        }
        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (ket, amp) in &self.amps {
            let na = ket.0[a] as usize;
            let nb = ket.0[b] as usize;
            let n = na + nb;
            // coefficients of x^j y^(n-j) in (x + y)^na (x - y)^nb
            let mut poly = vec![1.0f64];
            for sign in std::iter::repeat_n(1.0, na).chain(std::iter::repeat_n(-1.0, nb)) {
                let mut next = vec![0.0; poly.len() + 1];
                for (j, c) in poly.iter().enumerate() {
                    next[j + 1] += c; // x
                    next[j] += sign * c; // ±y
                }
                poly = next;
            }
            let norm = (2f64.powi(n as i32) * factorial(na) * factorial(nb)).sqrt();
            for (j, c) in poly.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                let mut counts = ket.0.clone();
                counts[a] = j as u8;
                counts[b] = (n - j) as u8;
                let weight = c * (factorial(j) * factorial(n - j)).sqrt() / norm;
                *out.entry(Occupation(counts)).or_default() += amp * weight;
            }
        }
        PureState::normalized(self.modes, out)
    }

    /// Projective number measurement of `targets`, returning every outcome with
    /// its probability and the normalised state of the remaining modes (in
    /// their original order).
    pub fn measure_modes(&self, targets: &[usize]) -> Result<Vec<MeasuredBranch>> {
        for (i, &t) in targets.iter().enumerate() {
            self.check_index(t)?;
            if targets[..i].contains(&t) {
                return Err(Error::param("measure_modes", format!("mode {t} listed twice")));
            }
        }
        let remaining = self.modes - targets.len();
        if remaining == 0 {
            return Err(Error::InvalidDimension(
                "measurement must leave at least one mode".into(),
            ));
        }
        let mut groups: BTreeMap<Vec<u8>, BTreeMap<Occupation, Complex64>> = BTreeMap::new();
        for (ket, amp) in &self.amps {
            let outcome: Vec<u8> = targets.iter().map(|&t| ket.0[t]).collect();
            let rest: Vec<u8> = (0..self.modes)
                .filter(|m| !targets.contains(m))
                .map(|m| ket.0[m])
                .collect();
            groups.entry(outcome).or_default().insert(Occupation(rest), *amp);
        }
        groups
            .into_iter()
            .filter_map(|(outcome, amps)| {
                let probability: f64 = amps.values().map(|a| a.norm_sqr()).sum();
                match PureState::normalized(remaining, amps) {
                    Ok(state) => Some(Ok(MeasuredBranch {
                        outcome,
                        probability,
                        state,
                    })),
                    Err(Error::ZeroNorm) => None,
                    Err(e) => Some(Err(e)),
                }
            })
            .collect()
    }

    /// Reorders modes so that output mode `i` is input mode `perm[i]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<PureState> {
        if perm.len() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: perm.len(),
            });
        }
        let mut seen = vec![false; self.modes];
        for &p in perm {
            self.check_index(p)?;
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::param("permute_modes", "not a permutation"));
            }
        }
        let amps = self
            .amps
            .iter()
            .map(|(k, a)| (Occupation(perm.iter().map(|&p| k.0[p]).collect()), *a))
            .collect();
        Ok(PureState {
            modes: self.modes,
            amps,
        })
    }

    /// Largest amplitude difference over the union of both supports.
    pub fn max_abs_diff(&self, other: &PureState) -> Result<f64> {
        self.check_modes(other.modes)?;
        Ok(self
            .amps
            .keys()
            .chain(other.amps.keys())
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max))
    }

    fn check_modes(&self, found: usize) -> Result<()> {
        if found != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found,
            });
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.modes {
            return Err(Error::InvalidModeIndex {
                index,
                modes: self.modes,
            });
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One outcome of [`PureState::measure_modes`].
#[derive(Clone, Debug)]
pub struct MeasuredBranch {
    pub outcome: Vec<u8>,
    pub probability: f64,
    pub state: PureState,
}

/// `Σ e^{iφⱼ}/√N |0…1ⱼ…0⟩`; `phases.len()` must equal `n`.
pub fn make_w_state(n: usize, phases: &[f64]) -> Result<PureState> {
    if n == 0 {
        return Err(Error::InvalidDimension("a W state needs N ≥ 1".into()));
    }
    if phases.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: phases.len(),
        });
    }
    PureState::w_state(phases)
}

/// `|W_N⟩` with all relative phases zero.
pub fn w_state(n: usize) -> Result<PureState> {
    make_w_state(n, &vec![0.0; n])
}

/// Coefficients of `|W_N⟩ = c₁ |1⟩|Vac_{N−1}⟩ + c₂ |0⟩|W_{N−1}⟩`.
pub fn decompose_w(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "W-state decomposition needs N ≥ 2, got {n}"
        )));
    }
    let nf = n as f64;
    Ok((1.0 / nf.sqrt(), ((nf - 1.0) / nf).sqrt()))
}

/// Excitation populations `(p₀, p₁, p₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Populations {
    pub fn get(&self, sector: Sector) -> f64 {
        match sector {
            Sector::Vacuum => self.p0,
            Sector::Single => self.p1,
            Sector::Double => self.p2,
        }
    }

    pub fn total(&self) -> f64 {
        self.p0 + self.p1 + self.p2
    }
}

/// Weighted ensemble of pure states, `ρ = Σ wᵢ |ψᵢ⟩⟨ψᵢ|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixedStateRepr", into = "MixedStateRepr")]
pub struct MixedState {
    modes: usize,
    branches: Vec<(f64, PureState)>,
}

impl MixedState {
    /// Weights must be non-negative and sum to one within [`TOLERANCE`].
    pub fn new(branches: Vec<(f64, PureState)>) -> Result<Self> {
        let total = MixedState::check_branches(&branches)?;
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        let modes = branches[0].1.modes;
        Ok(MixedState { modes, branches })
    }

    /// Like [`MixedState::new`] but rescales the weights to sum to one.
    pub fn from_weights(branches: Vec<(f64, PureState)>) -> Result<Self> {
        let total = MixedState::check_branches(&branches)?;
        if total <= 0.0 {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        let modes = branches[0].1.modes;
        let branches = branches
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, s)| (w / total, s))
            .collect();
        Ok(MixedState { modes, branches })
    }

    fn check_branches(branches: &[(f64, PureState)]) -> Result<f64> {
        let first = branches
            .first()
            .ok_or_else(|| Error::InvalidWeights("no branches".into()))?;
        let mut total = 0.0;
        for (w, s) in branches {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidWeights(format!("weight {w} is not a probability")));
            }
            if s.modes != first.1.modes {
                return Err(Error::DimensionMismatch {
                    expected: first.1.modes,
                    found: s.modes,
                });
            }
            total += w;
        }
        Ok(total)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn branches(&self) -> &[(f64, PureState)] {
        &self.branches
    }

    pub fn sector_weight(&self, sector: Sector) -> f64 {
        self.branches
            .iter()
            .fold(0.0, |acc, (w, s)| acc + w * s.sector_weight(sector))
    }

    pub fn populations(&self) -> Populations {
        Populations {
            p0: self.sector_weight(Sector::Vacuum),
            p1: self.sector_weight(Sector::Single),
            p2: self.sector_weight(Sector::Double),
        }
    }

    /// `⟨target|ρ|target⟩`.
    pub fn fidelity(&self, target: &PureState) -> Result<f64> {
        let mut f = 0.0;
        for (w, s) in &self.branches {
            f += w * target.inner(s)?.norm_sqr();
        }
        Ok(f.clamp(0.0, 1.0))
    }

    /// `(tr[Pₙρ], PₙρPₙ / tr[Pₙρ])`; the state is `None` when the sector is empty.
    pub fn project_excitations(&self, sector: Sector) -> (f64, Option<MixedState>) {
        let mut kept = Vec::new();
        let mut probability = 0.0;
        for (w, s) in &self.branches {
            let (weight, projected) = s.project(sector);
            if let Some(p) = projected {
                probability += w * weight;
                kept.push((w * weight, p));
            }
        }
        if probability <= PRUNE {
            return (0.0, None);
        }
        (probability, MixedState::from_weights(kept).ok())
    }
}

impl From<PureState> for MixedState {
    fn from(state: PureState) -> Self {
        MixedState {
            modes: state.modes,
            branches: vec![(1.0, state)],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PureStateRepr {
    mode_count: usize,
    amplitudes: Vec<(String, f64, f64)>,
}

impl From<PureState> for PureStateRepr {
    fn from(s: PureState) -> Self {
        PureStateRepr {
            mode_count: s.modes,
            amplitudes: s
                .amps
                .iter()
                .map(|(k, a)| (k.to_string(), a.re, a.im))
                .collect(),
        }
    }
}

impl TryFrom<PureStateRepr> for PureState {
    type Error = Error;

    fn try_from(r: PureStateRepr) -> Result<Self> {
        let terms = r
            .amplitudes
            .into_iter()
            .map(|(k, re, im)| Ok((k.parse::<Occupation>()?, Complex64::new(re, im))))
            .collect::<Result<Vec<_>>>()?;
        PureState::from_amplitudes(r.mode_count, terms)
    }
}

#[derive(Serialize, Deserialize)]
struct MixedStateRepr {
    mode_count: usize,
    branches: Vec<WeightedRepr>,
}

#[derive(Serialize, Deserialize)]
struct WeightedRepr {
    weight: f64,
    amplitudes: Vec<(String, f64, f64)>,
}

impl From<MixedState> for MixedStateRepr {
    fn from(m: MixedState) -> Self {
        MixedStateRepr {
            mode_count: m.modes,
            branches: m
                .branches
                .into_iter()
                .map(|(weight, s)| WeightedRepr {
                    weight,
                    amplitudes: PureStateRepr::from(s).amplitudes,
                })
                .collect(),
        }
    }
}

impl TryFrom<MixedStateRepr> for MixedState {
    type Error = Error;

    fn try_from(r: MixedStateRepr) -> Result<Self> {
        let branches = r
            .branches
            .into_iter()
            .map(|b| {
                let state = PureState::try_from(PureStateRepr {
                    mode_count: r.mode_count,
                    amplitudes: b.amplitudes,
                })?;
                Ok((b.weight, state))
            })
            .collect::<Result<Vec<_>>>()?;
        MixedState::new(branches)
    }
}
