//! Rate models for memory-enhanced W-state fusion and its memory-less baseline.
//!
//! A memory-enhanced cycle prepares the first W state by repeated attempts,
//! stores it, then attempts the second one at most `attempt_cap` times while the
//! first decays. Once both are heralded they are fused and a verification
//! readout closes the four-photon coincidence. A cap overrun restarts the cycle.
//! The memory-less baseline needs both modules to herald in the same slot.
//!
//! Both are available as Monte-Carlo estimators ([`simulate_memory_enhanced`],
//! [`simulate_memoryless`]) and in closed form ([`analytic_rates`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{ClickModel, DetectionModel, Ports};
use crate::stats::binomial;
use crate::witness::StateSummary;

const SECONDS_PER_HOUR: f64 = 3600.0;
const CHUNK: u64 = 4096;

/// Time dependence of the stored state's retrieval or coherence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    /// `exp(−t/τ)`
    #[default]
    Exponential,
    /// `exp(−(t/τ)²)`
    Gaussian,
}

/// What the memory decay does to the first W state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// The stored excitation is lost: fewer heralds leave a fused state and
    /// fewer verification clicks follow.
    #[default]
    Loss,
    /// The excitation survives but its phase relative to the second module is
    /// scrambled: rates are unchanged and only the fidelity drops.
    Dephasing,
}

/// Fixed per-cycle times in nanoseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DutyOverheads {
    /// Switch from the first to the second module (cleaning pulse, row change).
    pub reconfigure_ns: f64,
    /// Fusion and verification readout window.
    pub readout_ns: f64,
    /// Extra cost of restarting after a cap overrun.
    pub restart_ns: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Herald probability per attempt for one W state.
    pub p: f64,
    pub eta: f64,
    /// 1/e coherence time in µs.
    pub tau: f64,
    /// Duration of one attempt in ns.
    pub t_attempt: f64,
    pub attempt_cap: u64,
    pub n_module: usize,
    pub ports: Ports,
    pub click_model: ClickModel,
    pub visibility: f64,
    pub decay_shape: DecayShape,
    pub channel: Channel,
    pub duty_overheads: DutyOverheads,
    pub schema_version: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            p: 0.0015,
            eta: 0.25,
            tau: 428.0,
            t_attempt: 650.0,
            attempt_cap: 300,
            n_module: 3,
            ports: Ports::One,
            click_model: ClickModel::Linearized,
            visibility: 1.0,
            decay_shape: DecayShape::Exponential,
            channel: Channel::Loss,
            duty_overheads: DutyOverheads::default(),
            schema_version: crate::SCHEMA_VERSION,
        }
    }
}

impl ProtocolConfig {
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: crate::SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::param("p", format!("{} is outside (0, 1]", self.p)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param("eta", format!("{} is outside (0, 1]", self.eta)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::param("tau", format!("{} must be positive", self.tau)));
        }
        if !(self.t_attempt.is_finite() && self.t_attempt > 0.0) {
            return Err(Error::param("t_attempt", format!("{} must be positive", self.t_attempt)));
        }
        if self.attempt_cap == 0 {
            return Err(Error::param("attempt_cap", "must be at least 1"));
        }
        if self.n_module < 2 {
            return Err(Error::param("n_module", format!("{} is below 2", self.n_module)));
        }
        let o = self.duty_overheads;
        for (name, v) in [
            ("reconfigure_ns", o.reconfigure_ns),
            ("readout_ns", o.readout_ns),
            ("restart_ns", o.restart_ns),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("{v} must be a non-negative time")));
            }
        }
        self.detection()?;
        Ok(())
    }

    pub fn detection(&self) -> Result<DetectionModel> {
        let det = DetectionModel::new(self.eta)?
            .with_ports(self.ports)
            .with_click_model(self.click_model)
            .with_visibility(self.visibility);
        det.validate()?;
        Ok(det)
    }

    fn decay(&self, seconds: f64) -> f64 {
        let x = seconds / (self.tau * 1e-6);
        match self.decay_shape {
            DecayShape::Exponential => (-x).exp(),
            DecayShape::Gaussian => (-x * x).exp(),
        }
    }
}

/// Per-cycle fusion and readout probabilities shared by both estimators.
#[derive(Clone, Copy, Debug)]
struct Fusion {
    /// Click probability for one photon entering the interference.
    single: f64,
    /// Click probability for a photon pair.
    pair: f64,
    visibility: f64,
    /// Photon present in a module's fusion mode.
    in_fuse: f64,
    readout: f64,
}

impl Fusion {
    fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let det = cfg.detection()?;
        Ok(Fusion {
            single: det.single_photon_click().min(1.0),
            pair: det.photon_pair_click().min(1.0),
            visibility: cfg.visibility,
            in_fuse: 1.0 / cfg.n_module as f64,
            readout: cfg.eta,
        })
    }

    /// Probability that a fused herald carries the right sign given the
    /// first module's coherence `c`.
    fn sign_correct(&self, coherence: f64) -> f64 {
        0.5 * (1.0 + self.visibility * coherence)
    }

    /// Expected (herald, fidelity-weighted herald, success) for a cycle whose
    /// first module has decay factor `d`.
    fn expectations(&self, d: f64, channel: Channel) -> (f64, f64, f64) {
        let f = self.in_fuse;
        let fused = 2.0 * f * (1.0 - f) * self.single;
        let pair = f * f * self.pair;
        match channel {
            Channel::Loss => {
                let lone = f * self.single;
                let herald = d * (fused + pair) + (1.0 - d) * lone;
                (herald, d * fused * self.sign_correct(1.0), d * fused * self.readout)
            }
            Channel::Dephasing => (fused + pair, fused * self.sign_correct(d), fused * self.readout),
        }
    }
}

/// Rate estimate; stderr fields are zero for closed-form results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub coincidences_per_hour: f64,
    pub coincidences_per_hour_stderr: f64,
    /// Mean duration of a cycle in seconds, failed cycles included.
    pub mean_cycle_time_s: f64,
    pub mean_cycle_time_s_stderr: f64,
    /// Fraction of cycles whose second module heralds within the cap.
    pub herald2_success_fraction: f64,
    pub herald2_success_fraction_stderr: f64,
    /// Fidelity of the heralded fused state with the target W state.
    pub effective_fidelity: f64,
    pub effective_fidelity_stderr: f64,
    pub trials: u64,
}

/// Outcome of one simulated cycle.
#[derive(Clone, Copy, Debug, Default)]
struct Cycle {
    time: f64,
    stage2: bool,
    herald: bool,
    fidelity: f64,
    success: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    n: f64,
    t: f64,
    t2: f64,
    x: f64,
    xt: f64,
    stage2: f64,
    heralds: f64,
    fidelity: f64,
    fidelity2: f64,
}

impl Tally {
    fn add(&mut self, c: Cycle) {
        let x = if c.success { 1.0 } else { 0.0 };
        self.n += 1.0;
        self.t += c.time;
        self.t2 += c.time * c.time;
        self.x += x;
        self.xt += x * c.time;
        self.stage2 += if c.stage2 { 1.0 } else { 0.0 };
        if c.herald {
            self.heralds += 1.0;
            self.fidelity += c.fidelity;
            self.fidelity2 += c.fidelity * c.fidelity;
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.n += o.n;
        self.t += o.t;
        self.t2 += o.t2;
        self.x += o.x;
        self.xt += o.xt;
        self.stage2 += o.stage2;
        self.heralds += o.heralds;
        self.fidelity += o.fidelity;
        self.fidelity2 += o.fidelity2;
        self
    }

    fn estimate(&self) -> RateEstimate {
        let n = self.n;
        let mean_t = self.t / n;
        let mean_x = self.x / n;
        let var_t = (self.t2 / n - mean_t * mean_t).max(0.0);
        let var_x = mean_x * (1.0 - mean_x);
        let cov = self.xt / n - mean_x * mean_t;
        // ratio estimator with delta-method error
        let r = mean_x / mean_t;
        let var_r = ((var_x - 2.0 * r * cov + r * r * var_t) / (n * mean_t * mean_t)).max(0.0);
        let (h2, h2_err) = binomial(self.stage2, n);
        let (f, f_err) = if self.heralds > 0.0 {
            let m = self.fidelity / self.heralds;
            let v = (self.fidelity2 / self.heralds - m * m).max(0.0);
            (m, (v / self.heralds).sqrt())
        } else {
            (0.0, 0.0)
        };
        RateEstimate {
            coincidences_per_hour: SECONDS_PER_HOUR * r,
            coincidences_per_hour_stderr: SECONDS_PER_HOUR * var_r.sqrt(),
            mean_cycle_time_s: mean_t,
            mean_cycle_time_s_stderr: (var_t / n).sqrt(),
            herald2_success_fraction: h2,
            herald2_success_fraction_stderr: h2_err,
            effective_fidelity: f,
            effective_fidelity_stderr: f_err,
            trials: n as u64,
        }
    }
}

/// Runs `n_trials` independent cycles; trial `i` draws from stream `i` of the
/// ChaCha generator seeded with `seed`, and chunks are reduced in index order,
/// so results do not depend on the thread count.
fn run<F>(n_trials: u64, seed: u64, cycle: F) -> Result<RateEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Cycle + Sync,
{
    if n_trials == 0 {
        return Err(Error::param("n_trials", "need at least one trial"));
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = n_trials.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let mut rng = base.clone();
                rng.set_stream(i);
                tally.add(cycle(&mut rng));
            }
            tally
        })
        .collect();
    let total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    Ok(total.estimate())
}

fn geometric(p: f64) -> Result<Geometric> {
    Geometric::new(p).map_err(|e| Error::param("p", e.to_string()))
}

/// Fusion, herald and readout draws for a cycle whose first module has decay factor `d`.
fn fuse<R: Rng>(rng: &mut R, fusion: &Fusion, d: f64, channel: Channel) -> (bool, f64, bool) {
    let intact1 = match channel {
        Channel::Loss => rng.random::<f64>() < d,
        Channel::Dephasing => true,
    };
    let photon1 = intact1 && rng.random::<f64>() < fusion.in_fuse;
    let photon2 = rng.random::<f64>() < fusion.in_fuse;
    let click = match (photon1, photon2) {
        (false, false) => 0.0,
        (true, true) => fusion.pair,
        _ => fusion.single,
    };
    if !(rng.random::<f64>() < click) {
        return (false, 0.0, false);
    }
    // a single photon leaves the other module's excitation, a fused state if
    // the first module still held one
    let fused = intact1 && photon1 != photon2;
    if !fused {
        return (true, 0.0, false);
    }
    let coherence = match channel {
        Channel::Loss => 1.0,
        Channel::Dephasing => d,
    };
    let fidelity = if rng.random::<f64>() < fusion.sign_correct(coherence) { 1.0 } else { 0.0 };
    let readout = rng.random::<f64>() < fusion.readout;
    (true, fidelity, readout)
}

/// Monte-Carlo estimate of the memory-enhanced coincidence rate.
pub fn simulate_memory_enhanced(cfg: &ProtocolConfig, n_trials: u64, seed: u64) -> Result<RateEstimate> {
    cfg.validate()?;
    let fusion = Fusion::new(cfg)?;
    let attempts = geometric(cfg.p)?;
    let t = cfg.t_attempt * 1e-9;
    let o = cfg.duty_overheads;
    let (reconf, readout, restart) = (o.reconfigure_ns * 1e-9, o.readout_ns * 1e-9, o.restart_ns * 1e-9);
    run(n_trials, seed, |rng| {
        let a1 = attempts.sample(rng) + 1;
        let a2 = attempts.sample(rng) + 1;
        let mut time = a1 as f64 * t + reconf;
        if a2 > cfg.attempt_cap {
            time += cfg.attempt_cap as f64 * t + restart;
            return Cycle {
                time,
                ..Default::default()
            };
        }
        let stored = reconf + a2 as f64 * t;
        time += a2 as f64 * t + readout;
        let (herald, fidelity, success) = fuse(rng, &fusion, cfg.decay(stored), cfg.channel);
        Cycle {
            time,
            stage2: true,
            herald,
            fidelity,
            success,
        }
    })
}

/// Monte-Carlo estimate of the memory-less baseline: both modules attempt in
/// the same slot of length `2·t_attempt` and nothing is stored.
pub fn simulate_memoryless(cfg: &ProtocolConfig, n_trials: u64, seed: u64) -> Result<RateEstimate> {
    cfg.validate()?;
    let fusion = Fusion::new(cfg)?;
    let slots = geometric(cfg.p * cfg.p)?;
    let t = cfg.t_attempt * 1e-9;
    let o = cfg.duty_overheads;
    let fixed = (o.reconfigure_ns + o.readout_ns) * 1e-9;
    run(n_trials, seed, |rng| {
        let s = slots.sample(rng) + 1;
        let (herald, fidelity, success) = fuse(rng, &fusion, 1.0, cfg.channel);
        Cycle {
            time: 2.0 * t * s as f64 + fixed,
            stage2: true,
            herald,
            fidelity,
            success,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRates {
    pub enhanced: RateEstimate,
    pub memoryless: RateEstimate,
    pub enhancement_factor: f64,
    /// Probability that the second module heralds within the cap.
    pub q: f64,
}

/// `q = 1 − (1 − p)^cap`, evaluated without cancellation for small `p`.
pub fn stage2_success_probability(p: f64, cap: u64) -> f64 {
    -(cap as f64 * (-p).ln_1p()).exp_m1()
}

/// Closed-form expectations of both protocols.
///
/// The rate is `E[coincidences per cycle] / E[cycle time]`, which is the long-run
/// rate of the renewal process the simulators sample.
pub fn analytic_rates(cfg: &ProtocolConfig) -> Result<AnalyticRates> {
    cfg.validate()?;
    let fusion = Fusion::new(cfg)?;
    let p = cfg.p;
    let t = cfg.t_attempt * 1e-9;
    let o = cfg.duty_overheads;
    let (reconf, readout, restart) = (o.reconfigure_ns * 1e-9, o.readout_ns * 1e-9, o.restart_ns * 1e-9);
    let q = stage2_success_probability(p, cfg.attempt_cap);

    // E[d] restricted to cycles whose second module heralds within the cap
    let mean_decay = decay_sum(cfg, reconf, t);
    let (h_full, f_full, s_full) = fusion.expectations(1.0, cfg.channel);
    let (h_none, f_none, s_none) = fusion.expectations(0.0, cfg.channel);
    // all expectations are affine in d
    let lin = |full: f64, none: f64| q * none + (full - none) * mean_decay;
    let heralds = lin(h_full, h_none);
    let fidelity = lin(f_full, f_none);
    let success = lin(s_full, s_none);

    let cycle = t / p + reconf + t * q / p + (1.0 - q) * restart + q * readout;
    let enhanced = RateEstimate {
        coincidences_per_hour: SECONDS_PER_HOUR * success / cycle,
        coincidences_per_hour_stderr: 0.0,
        mean_cycle_time_s: cycle,
        mean_cycle_time_s_stderr: 0.0,
        herald2_success_fraction: q,
        herald2_success_fraction_stderr: 0.0,
        effective_fidelity: if heralds > 0.0 { fidelity / heralds } else { 0.0 },
        effective_fidelity_stderr: 0.0,
        trials: 0,
    };

    let cycle0 = 2.0 * t / (p * p) + reconf + readout;
    let memoryless = RateEstimate {
        coincidences_per_hour: SECONDS_PER_HOUR * s_full / cycle0,
        coincidences_per_hour_stderr: 0.0,
        mean_cycle_time_s: cycle0,
        mean_cycle_time_s_stderr: 0.0,
        herald2_success_fraction: 1.0,
        herald2_success_fraction_stderr: 0.0,
        effective_fidelity: if h_full > 0.0 { f_full / h_full } else { 0.0 },
        effective_fidelity_stderr: 0.0,
        trials: 0,
    };
    Ok(AnalyticRates {
        enhancement_factor: enhanced.coincidences_per_hour / memoryless.coincidences_per_hour,
        enhanced,
        memoryless,
        q,
    })
}

/// `Σ_{a=1}^{cap} p(1−p)^{a−1} d(reconf + a·t)`.
fn decay_sum(cfg: &ProtocolConfig, reconf: f64, t: f64) -> f64 {
    let p = cfg.p;
    let cap = cfg.attempt_cap;
    let tau = cfg.tau * 1e-6;
    match cfg.decay_shape {
        DecayShape::Exponential => {
            // geometric series in x = (1 − p)·exp(−t/τ)
            let ln_x = (-p).ln_1p() - t / tau;
            let ratio = if ln_x == 0.0 {
                cap as f64
            } else {
                (cap as f64 * ln_x).exp_m1() / ln_x.exp_m1()
            };
            p * (-(reconf + t) / tau).exp() * ratio
        }
        DecayShape::Gaussian => {
            let ln_s = (-p).ln_1p();
            let mut sum = 0.0;
            for a in 1..=cap {
                let survive = ((a - 1) as f64 * ln_s).exp();
                sum += p * survive * cfg.decay(reconf + a as f64 * t);
                // the tail is bounded by the remaining geometric mass
                if survive * (1.0 - p) < 1e-17 * sum.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            sum
        }
    }
}

/// Result of sweeping `p` with both simulators and the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub enhanced: RateEstimate,
    pub memoryless: RateEstimate,
    pub analytic: AnalyticRates,
}

impl SweepPoint {
    /// Ratio of the simulated rates.
    pub fn enhancement_factor(&self) -> f64 {
        self.enhanced.coincidences_per_hour / self.memoryless.coincidences_per_hour
    }
}

/// Simulates every `p` in `ps`; point `i` uses seeds derived from `(seed, i)`.
pub fn sweep(cfg: &ProtocolConfig, ps: &[f64], n_trials: u64, seed: u64) -> Result<Vec<SweepPoint>> {
    ps.par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let c = cfg.with_p(p);
            let point_seed = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).random();
            Ok(SweepPoint {
                p,
                enhanced: simulate_memory_enhanced(&c, n_trials, point_seed)?,
                memoryless: simulate_memoryless(&c, n_trials, point_seed ^ 1)?,
                analytic: analytic_rates(&c)?,
            })
        })
        .collect()
}

/// Heralded single-module state from a thermal excitation ladder.
///
/// The source creates `n` excitations with probability `(1 − χ)χⁿ`; the herald
/// fires with probability `1 − (1 − b)(1 − η)ⁿ`, where `b` is the background
/// click probability. Two or more excitations are reported as `p₂`, and the
/// fidelity with the ideal single-excitation state equals `p₁`.
pub fn heralded_source_state(chi: f64, eta: f64, background: f64) -> Result<StateSummary> {
    if !(chi > 0.0 && chi < 1.0) {
        return Err(Error::param("chi", format!("{chi} is outside (0, 1)")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param("eta", format!("{eta} is outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&background) {
        return Err(Error::param("background", format!("{background} is outside [0, 1)")));
    }
    let keep = 1.0 - background;
    let dark = 1.0 - eta;
    let w0 = (1.0 - chi) * background;
    let w1 = (1.0 - chi) * chi * (1.0 - keep * dark);
    // Σ_{n≥2} (1 − χ)χⁿ [1 − (1 − b)(1 − η)ⁿ]
    let cd = chi * dark;
    let w2 = chi * chi - keep * (1.0 - chi) * cd * cd / (1.0 - cd);
    let total = w0 + w1 + w2;
    let p1 = w1 / total;
    StateSummary::new(w0 / total, p1, w2 / total, p1)
}

/// Background click probability at which [`heralded_source_state`] yields
/// vacuum population `p0`.
pub fn background_for_vacuum(chi: f64, eta: f64, p0: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p0) {
        return Err(Error::param("p0", format!("{p0} is outside [0, 1)")));
    }
    let vacuum = |b: f64| heralded_source_state(chi, eta, b).map(|s| s.p0);
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
    if vacuum(hi)? < p0 {
        return Err(Error::UnsupportedRegime(format!("vacuum population {p0} is out of reach")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if vacuum(mid)? < p0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
