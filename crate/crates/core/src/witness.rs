//! Entanglement witnesses of the form `𝒲ₖ = αP₀ + βP₁ + γP₂ − |W_N⟩⟨W_N|`.
//!
//! A parameter triple is a valid witness for genuine `k`-partite entanglement
//! when `⟨𝒲ₖ⟩ ≥ 0` on every state whose entanglement depth is below `k`. For
//! `k > 2N/3` it suffices to check the two-block product states
//! `(cosθ₁|g⟩ + sinθ₁|W_l⟩) ⊗ (cosθ₂|g⟩ + sinθ₂|W_{N−l}⟩)` with
//! `N − l ≤ l < k`, on which the expectation has the closed form
//! [`f_theta`]. Validity is certified by minimising that form over
//! `[0, π/2]²` for every admissible `l`.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points per θ axis.
pub const DEFAULT_GRID: usize = 201;
/// Validity floor: a witness is valid when its minimum is ≥ `−DEFAULT_TOLERANCE`.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Default step of the α, β, γ parameter scan.
pub const DEFAULT_SCAN_STEP: f64 = 1e-3;
/// Allowed deviation of `p₀ + p₁ + p₂` from one in a [`StateSummary`].
pub const SUM_TOLERANCE: f64 = 1e-3;

const COARSE_SCAN_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: usize,
    pub k: usize,
}

impl WitnessParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, n: usize, k: usize) -> Result<Self> {
        let w = WitnessParams {
            alpha,
            beta,
            gamma,
            n,
            k,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("{v} must be a non-negative number")));
            }
        }
        check_depth(self.n, self.k)
    }

    /// Block sizes `l` with `N − l ≤ l < k`.
    pub fn partitions(&self) -> Vec<PartitionSpec> {
        (1..self.n)
            .filter(|&l| self.n - l <= l && l < self.k)
            .map(|l| PartitionSpec { l })
            .collect()
    }
}

fn check_depth(n: usize, k: usize) -> Result<()> {
    if k <= 2 || k > n {
        return Err(Error::param("k", format!("need 2 < k ≤ N, got k = {k}, N = {n}")));
    }
    if 3 * k <= 2 * n {
        return Err(Error::UnsupportedRegime(format!(
            "the two-block reduction needs k > 2N/3, got k = {k}, N = {n}"
        )));
    }
    Ok(())
}

/// Size `l` of the larger block of a biseparable cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub l: usize,
}

impl PartitionSpec {
    pub fn new(l: usize, n: usize, k: usize) -> Result<Self> {
        if !(l < n && n - l <= l && l < k) {
            return Err(Error::param(
                "l",
                format!("need N − l ≤ l < k and l < N, got l = {l}, N = {n}, k = {k}"),
            ));
        }
        Ok(PartitionSpec { l })
    }
}

/// `⟨𝒲ₖ⟩` on the two-block product state parameterised by `θ₁`, `θ₂`.
pub fn f_theta(theta1: f64, theta2: f64, w: &WitnessParams, part: PartitionSpec) -> f64 {
    let (c1, c2) = ((2.0 * theta1).cos(), (2.0 * theta2).cos());
    let (s1, s2) = ((2.0 * theta1).sin(), (2.0 * theta2).sin());
    let n = w.n as f64;
    let l = part.l as f64;
    0.25 * (w.alpha * (1.0 + c1) * (1.0 + c2) + 2.0 * w.beta * (1.0 - c1 * c2)
        + w.gamma * (1.0 - c1) * (1.0 - c2)
        - (1.0 + c1) * (1.0 - c2)
        + 2.0 * l / n * (c1 - c2)
        - 2.0 * (l * (n - l)).sqrt() / n * s1 * s2)
}

/// `f_theta` split as `α·a + β·b + γ·c + d`; `a`, `b`, `c` are the sector
/// populations of the product state and `−d` its W-state fidelity.
#[derive(Clone, Copy, Debug)]
struct Terms {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Terms {
    fn at(theta1: f64, theta2: f64, n: usize, l: usize) -> Terms {
        let (c1, c2) = ((2.0 * theta1).cos(), (2.0 * theta2).cos());
        let (s1, s2) = ((2.0 * theta1).sin(), (2.0 * theta2).sin());
        let (n, l) = (n as f64, l as f64);
        Terms {
            a: 0.25 * (1.0 + c1) * (1.0 + c2),
            b: 0.5 * (1.0 - c1 * c2),
            c: 0.25 * (1.0 - c1) * (1.0 - c2),
            d: 0.25
                * (-(1.0 + c1) * (1.0 - c2) + 2.0 * l / n * (c1 - c2)
                    - 2.0 * (l * (n - l)).sqrt() / n * s1 * s2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argmin {
    pub theta1: f64,
    pub theta2: f64,
    pub l: usize,
}

/// Outcome of a validity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub min_value: f64,
    pub argmin: Argmin,
}

/// Minimises [`f_theta`] over `[0, π/2]²` for every admissible block size
/// (grid search followed by Nelder–Mead refinement) and declares the witness
/// valid when the global minimum is at least `−tolerance`.
pub fn is_valid_witness(w: &WitnessParams, grid_resolution: usize, tolerance: f64) -> Result<ValidityReport> {
    w.validate()?;
    if grid_resolution < 2 {
        return Err(Error::param("grid_resolution", "need at least 2 points per axis"));
    }
    let parts = w.partitions();
    if parts.is_empty() {
        return Err(Error::UnsupportedRegime(format!(
            "no admissible block size for N = {}, k = {}",
            w.n, w.k
        )));
    }
    let mut best: Option<(f64, Argmin)> = None;
    for part in parts {
        let (value, (t1, t2)) = minimize_partition(w, part, grid_resolution);
        if best.is_none_or(|(b, _)| value < b) {
            best = Some((
                value,
                Argmin {
                    theta1: t1,
                    theta2: t2,
                    l: part.l,
                },
            ));
        }
    }
    let (min_value, argmin) = best.expect("at least one partition");
    Ok(ValidityReport {
        valid: min_value >= -tolerance,
        min_value,
        argmin,
    })
}

fn minimize_partition(w: &WitnessParams, part: PartitionSpec, res: usize) -> (f64, (f64, f64)) {
    const STARTS: usize = 4;
    let h = FRAC_PI_2 / (res - 1) as f64;
    let f = |t1: f64, t2: f64| f_theta(t1.clamp(0.0, FRAC_PI_2), t2.clamp(0.0, FRAC_PI_2), w, part);

    // a handful of the lowest grid cells seed the local refinement
    let mut seeds: Vec<(f64, f64, f64)> = Vec::with_capacity(STARTS + 1);
    for i in 0..res {
        let t1 = i as f64 * h;
        for j in 0..res {
            let t2 = j as f64 * h;
            let v = f(t1, t2);
            if seeds.len() < STARTS || v < seeds[seeds.len() - 1].0 {
                let pos = seeds.partition_point(|s| s.0 <= v);
                seeds.insert(pos, (v, t1, t2));
                seeds.truncate(STARTS);
            }
        }
    }

    let mut best = (seeds[0].0, (seeds[0].1, seeds[0].2));
    for &(_, t1, t2) in &seeds {
        let (v, x) = nelder_mead(|x| f(x[0], x[1]), [t1, t2], 0.5 * h, 1e-13, 2000);
        let x = [x[0].clamp(0.0, FRAC_PI_2), x[1].clamp(0.0, FRAC_PI_2)];
        if v < best.0 {
            best = (v, (x[0], x[1]));
        }
    }
    best
}

/// Downhill simplex in two dimensions.
fn nelder_mead<F>(f: F, start: [f64; 2], step: f64, ftol: f64, max_iter: usize) -> (f64, [f64; 2])
where
    F: Fn([f64; 2]) -> f64,
{
    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values = simplex.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if (values[2] - values[0]).abs() <= ftol {
            break;
        }
        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            (simplex[2], values[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let contracted = if fr < values[2] {
                lerp(centroid, reflected, 0.5)
            } else {
                lerp(centroid, simplex[2], 0.5)
            };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for i in 1..3 {
                    simplex[i] = lerp(simplex[0], simplex[i], 0.5);
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    (values[best], simplex[best])
}

/// Standard errors attached to a [`StateSummary`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryErrors {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
}

/// Measured or simulated excitation populations and W-state fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<SummaryErrors>,
}

impl StateSummary {
    pub fn new(p0: f64, p1: f64, p2: f64, fidelity: f64) -> Result<Self> {
        let s = StateSummary {
            p0,
            p1,
            p2,
            fidelity,
            err: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_errors(mut self, err: SummaryErrors) -> Result<Self> {
        self.err = Some(err);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p0", self.p0), ("p1", self.p1), ("p2", self.p2), ("F", self.fidelity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} is outside [0, 1]")));
            }
        }
        let total = self.p0 + self.p1 + self.p2;
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::param(
                "p0+p1+p2",
                format!("populations sum to {total}, expected 1 ± {SUM_TOLERANCE}"),
            ));
        }
        if let Some(e) = self.err {
            for (name, v) in [("err.p0", e.p0), ("err.p1", e.p1), ("err.p2", e.p2), ("err.F", e.fidelity)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::param(name, format!("{v} is not a standard error")));
                }
            }
        }
        Ok(())
    }
}

/// `tr[ρ𝒲ₖ] = αp₀ + βp₁ + γp₂ − F`.
pub fn evaluate_witness(w: &WitnessParams, s: &StateSummary) -> f64 {
    w.alpha * s.p0 + w.beta * s.p1 + w.gamma * s.p2 - s.fidelity
}

/// Settings for [`optimize_witness`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Grid step for α, β and γ over `[0, 1]`.
    pub step: f64,
    /// θ grid points per axis used to certify each candidate.
    pub grid_resolution: usize,
    pub tolerance: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            step: DEFAULT_SCAN_STEP,
            grid_resolution: DEFAULT_GRID,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalWitness {
    pub params: WitnessParams,
    pub expectation: f64,
    pub certificate: ValidityReport,
}

/// Picks, among the valid witnesses on the α, β, γ grid, the one with the
/// most negative expectation on `summary`.
///
/// The valid set is an up-set in each parameter, and for fixed (α, β) the
/// objective grows with γ, so only the smallest valid γ per (α, β) matters.
/// Candidates are ranked with a lower bound on that γ built from violated
/// θ-points found so far; the best-ranked candidate is certified with
/// [`is_valid_witness`] and, if it fails, its violating point joins the bound.
/// The accepted candidate is therefore the exact optimum of the grid scan.
pub fn optimize_witness(summary: &StateSummary, n: usize, k: usize, opts: &ScanOptions) -> Result<OptimalWitness> {
    summary.validate()?;
    check_depth(n, k)?;
    if !(opts.step.is_finite() && opts.step > 0.0) {
        return Err(Error::param("step", format!("{} must be positive", opts.step)));
    }
    let mut cuts = Vec::new();
    if opts.step < COARSE_SCAN_STEP {
        // a coarse pass collects the violated points near the optimum cheaply
        let coarse = ScanOptions {
            step: COARSE_SCAN_STEP,
            ..*opts
        };
        scan(summary, n, k, &coarse, &mut cuts)?;
    }
    scan(summary, n, k, opts, &mut cuts)
}

fn scan(summary: &StateSummary, n: usize, k: usize, opts: &ScanOptions, cuts: &mut Vec<Terms>) -> Result<OptimalWitness> {
    let last = (1.0 / opts.step + 1e-9).floor() as usize;
    let value = |i: usize| (i as f64 * opts.step).min(1.0);
    let tol = opts.tolerance;

    loop {
        let rows: Vec<Option<(f64, usize, usize, usize)>> = (0..=last)
            .into_par_iter()
            .map(|i| {
                let alpha = value(i);
                let mut best: Option<(f64, usize, usize, usize)> = None;
                for j in 0..=last {
                    let beta = value(j);
                    let Some(g) = gamma_floor(alpha, beta, cuts, tol) else {
                        continue;
                    };
                    let gi = ((g / opts.step) - 1e-9).ceil().max(0.0) as usize;
                    if gi > last {
                        continue;
                    }
                    let obj = alpha * summary.p0 + beta * summary.p1 + value(gi) * summary.p2 - summary.fidelity;
                    if best.is_none_or(|b| obj < b.0) {
                        best = Some((obj, i, j, gi));
                    }
                }
                best
            })
            .collect();
        let Some((_, i, j, g)) = rows
            .into_iter()
            .flatten()
            .reduce(|a, b| if b.0 < a.0 { b } else { a })
        else {
            return Err(Error::ResolutionTooCoarse { step: opts.step });
        };
        let params = WitnessParams::new(value(i), value(j), value(g), n, k)?;
        let report = is_valid_witness(&params, opts.grid_resolution, tol)?;
        if report.valid {
            return Ok(OptimalWitness {
                params,
                expectation: evaluate_witness(&params, summary),
                certificate: report,
            });
        }
        let a = report.argmin;
        cuts.push(Terms::at(a.theta1, a.theta2, n, a.l));
    }
}

/// Smallest γ satisfying every cut at (α, β), or `None` if no γ can.
fn gamma_floor(alpha: f64, beta: f64, cuts: &[Terms], tol: f64) -> Option<f64> {
    let mut g: f64 = 0.0;
    for t in cuts {
        let rest = alpha * t.a + beta * t.b + t.d + tol;
        if t.c > 0.0 {
            g = g.max(-rest / t.c);
        } else if rest < 0.0 {
            return None;
        }
    }
    Some(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessDistribution {
    pub negative_fraction: f64,
    pub mean: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Gaussian resampling of `(p₀, p₁, p₂, F)` by their standard errors.
///
/// Resampled populations are clipped at zero and rescaled to sum to one; the
/// fidelity is used as drawn.
pub fn witness_distribution(
    w: &WitnessParams,
    summary: &StateSummary,
    n_resamples: usize,
    seed: u64,
    bins: usize,
) -> Result<WitnessDistribution> {
    let err = summary.err.ok_or(Error::MissingErrors)?;
    if n_resamples == 0 {
        return Err(Error::param("n_resamples", "need at least one resample"));
    }
    let bins = bins.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |mean: f64, sd: f64| Normal::new(mean, sd).map_err(|e| Error::param("err", e.to_string()));
    let dists = [
        normal(summary.p0, err.p0)?,
        normal(summary.p1, err.p1)?,
        normal(summary.p2, err.p2)?,
        normal(summary.fidelity, err.fidelity)?,
    ];

    let values: Vec<f64> = (0..n_resamples)
        .map(|_| {
            let [p0, p1, p2, f] = dists.each_ref().map(|d| d.sample(&mut rng));
            let pops = [p0.max(0.0), p1.max(0.0), p2.max(0.0)];
            let total: f64 = pops.iter().sum();
            let pops = if total > 0.0 { pops.map(|p| p / total) } else { pops };
            w.alpha * pops[0] + w.beta * pops[1] + w.gamma * pops[2] - f
        })
        .collect();

    let negative = values.iter().filter(|&&v| v < 0.0).count();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in &values {
        let idx = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            left: lo + i as f64 * width,
            right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect();
    Ok(WitnessDistribution {
        negative_fraction: negative as f64 / n_resamples as f64,
        mean,
        histogram,
    })
}
