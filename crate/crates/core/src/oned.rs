//! One-dimensional model of the restrained update: a single agent (or a
//! pair) steering toward a target from Gaussian measurements of its own
//! offset. Closed forms for steady-state spread, motion probability and
//! coherence time sit next to the Monte-Carlo ensembles that check them.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::controller::clamp_dz_scalar;
use crate::error::{domain, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::sgn;
use crate::rng::stream_rng;
use crate::stats::{integrate_adaptive_simpson, std_normal_cdf, std_normal_pdf, std_normal_quantile};

/// Agents per RNG stream in the ensembles. Fixed so results do not depend on
/// the number of worker threads.
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDConfig {
    /// Gain per control period, `k_e / f`.
    pub k_ef: f64,
    #[serde(default = "half")]
    pub ell: f64,
    /// Measurement standard deviation.
    pub sigma_m: f64,
    pub rate_hz: f64,
    /// Target position.
    #[serde(default)]
    pub d: f64,
    /// Standard deviation of the initial positions around the target.
    pub sigma_init: f64,
    pub n_agents: usize,
    pub horizon: usize,
    pub seed: u64,
    /// How many agents keep their full trajectory for convergence metrics.
    #[serde(default = "default_record")]
    pub record_agents: usize,
}

fn half() -> f64 {
    0.5
}
fn default_record() -> usize {
    1000
}

impl OneDConfig {
    /// Simulation accepts any positive gain so unstable regimes can be
    /// exercised; the closed forms check their own ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.k_ef.is_finite() && self.k_ef > 0.0) {
            return domain("k_ef must be positive");
        }
        if !(self.ell > 0.0 && self.ell <= 0.5) {
            return domain(format!("ell = {} outside (0, 0.5]", self.ell));
        }
        if !(self.sigma_m >= 0.0 && self.sigma_init >= 0.0 && self.rate_hz > 0.0) {
            return domain("sigmas must be non-negative and the rate positive");
        }
        if self.n_agents == 0 || self.horizon == 0 {
            return domain("need at least one agent and one step");
        }
        Ok(())
    }

    /// Dead-zone half-width `σ·Φ⁻¹(ℓ)` (non-positive).
    pub fn shift(&self) -> Result<f64> {
        Ok(self.sigma_m * std_normal_quantile(self.ell)?)
    }
}

/// `x + k_ef (d − m)`.
pub fn step_1d_proportional(x: f64, m: f64, k_ef: f64, d: f64) -> f64 {
    x + k_ef * (d - m)
}

/// Restrained update with a precomputed shift `σ·Φ⁻¹(ℓ)`.
#[inline]
pub fn restrained_update(x: f64, m: f64, k_ef: f64, d: f64, shift: f64) -> f64 {
    let e = d - m;
    x + k_ef * clamp_dz_scalar(e + sgn(e) * shift, e)
}

/// Restrained update: the setpoint is pulled from the target toward the
/// measurement by `|Φ⁻¹(ℓ)|` measurement standard deviations; no motion when
/// that overshoots the measurement.
pub fn step_1d_restrained(x: f64, m: f64, sigma_m: f64, k_ef: f64, d: f64, ell: f64) -> Result<f64> {
    Ok(restrained_update(x, m, k_ef, d, sigma_m * std_normal_quantile(ell)?))
}

/// Piecewise-linear continuous-time trajectory of the noiseless proportional
/// update: straight segments between the discrete states.
pub fn continuous_state_1d(t: f64, x0: f64, k_ef: f64, d: f64, rate_hz: f64) -> f64 {
    let tf = t * rate_hz;
    let k = tf.floor();
    let tau = tf - k;
    let xk = d + (x0 - d) * (1.0 - k_ef).powf(k);
    k_ef * d * tau + xk * (1.0 - k_ef * tau)
}

/// Exponential interpolation `d + (x0 − d)(1 − k_ef)^{tf}` through the same
/// discrete states. Defined for `k_ef ∈ (0, 1]`.
pub fn exp_approx_1d(t: f64, x0: f64, k_ef: f64, d: f64, rate_hz: f64) -> Result<f64> {
    if !(k_ef > 0.0 && k_ef <= 1.0) {
        return domain("exponential form needs k_ef in (0, 1]");
    }
    Ok(d + (x0 - d) * (1.0 - k_ef).powf(t * rate_hz))
}

fn check_stable_gain(k_ef: f64) -> Result<()> {
    if !(k_ef > 0.0 && k_ef < 2.0) {
        return domain(format!("k_ef = {k_ef} outside the stable range (0, 2)"));
    }
    Ok(())
}

/// Steady-state standard deviation of the proportional update,
/// `σ·sqrt(k_ef / (2 − k_ef))`.
pub fn sigma_ss_proportional(k_ef: f64, sigma_m: f64) -> Result<f64> {
    check_stable_gain(k_ef)?;
    Ok(sigma_m * (k_ef / (2.0 - k_ef)).sqrt())
}

/// Variance of the proportional state after `k` steps from an initial
/// variance `var0`.
pub fn variance_closed_form(k: u32, k_ef: f64, sigma_m: f64, var0: f64) -> Result<f64> {
    check_stable_gain(k_ef)?;
    let a = (1.0 - k_ef).powi(2).powi(k as i32);
    Ok(sigma_m * sigma_m * k_ef * (1.0 - a) / (2.0 - k_ef) + a * var0)
}

/// Fitted nodes of the exponent relating restrained and proportional
/// steady-state variance.
pub const BETA_NODES: [(f64, f64); 5] = [(0.1, 0.7251), (0.5, 0.8266), (1.0, 1.043), (1.5, 1.498), (1.9, 3.177)];

/// Piecewise-linear interpolation of [`BETA_NODES`], defined on [0.1, 1.9].
pub fn beta_exponent(k_ef: f64) -> Result<f64> {
    let (lo, hi) = (BETA_NODES[0].0, BETA_NODES[BETA_NODES.len() - 1].0);
    if !(k_ef >= lo && k_ef <= hi) {
        return domain(format!("k_ef = {k_ef} outside the fitted range [{lo}, {hi}]"));
    }
    for w in BETA_NODES.windows(2) {
        let ((k0, b0), (k1, b1)) = (w[0], w[1]);
        if k_ef <= k1 {
            return Ok(b0 + (b1 - b0) * (k_ef - k0) / (k1 - k0));
        }
    }
    unreachable!()
}

/// Approximate steady-state standard deviation of the restrained update.
pub fn sigma_ss_restrained(k_ef: f64, ell: f64, sigma_m: f64) -> Result<f64> {
    if !(0.01..=0.5).contains(&ell) {
        return domain(format!("ell = {ell} outside the fitted range [0.01, 0.5]"));
    }
    let beta = beta_exponent(k_ef)?;
    let var = k_ef * sigma_m * sigma_m / (2.0 - k_ef) * (beta * std_normal_quantile(ell)?).exp();
    Ok(var.sqrt())
}

/// Probability that the restrained agent at offset `delta` from the target
/// does not move in one step.
pub fn stopping_probability(delta: f64, sigma: f64, ell: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain("stopping probability needs sigma > 0");
    }
    let q = std_normal_quantile(ell)?;
    Ok(std_normal_cdf(-delta / sigma - q) - std_normal_cdf(-delta / sigma + q))
}

/// Linearised gain of the restrained update near the target, as given in
/// closed form. Equals `2ℓ·k_ef` for unit measurement noise.
pub fn effective_gain(k_ef: f64, sigma: f64, ell: f64) -> Result<f64> {
    let q = std_normal_quantile(ell)?;
    let corr = (1.0 - 1.0 / sigma) * (2.0 / std::f64::consts::PI).sqrt() * q * (-q * q / (2.0 * sigma * sigma)).exp();
    Ok(k_ef * (corr + 2.0 * ell))
}

/// Variance of the one-step displacement of a restrained agent sitting
/// exactly on the target: `2 k² σ² [(1 + q²) ℓ + q φ(q)]`, `q = Φ⁻¹(ℓ)`.
pub fn conditional_variance_at_target(k_ef: f64, sigma: f64, ell: f64) -> Result<f64> {
    let q = std_normal_quantile(ell)?;
    Ok(2.0 * k_ef * k_ef * sigma * sigma * ((1.0 + q * q) * ell + q * std_normal_pdf(q)))
}

/// Expected number of steps, counted from a random steady-state instant,
/// until the restrained agent next moves (the current step included).
pub fn expected_coherence_time(k_ef: f64, ell: f64, sigma_m: f64) -> Result<f64> {
    let s = sigma_ss_restrained(k_ef, ell, sigma_m)?;
    let q = std_normal_quantile(ell)?;
    let move_prob = |z: f64| 1.0 - (std_normal_cdf(-z / sigma_m - q) - std_normal_cdf(-z / sigma_m + q));
    Ok(integrate_adaptive_simpson(
        |t| std_normal_pdf(t) / move_prob(s * t),
        -8.0,
        8.0,
        1e-11,
    ))
}

/// Monte-Carlo counterpart of [`expected_coherence_time`]: one agent run for
/// `steps` steps after a burn-in, averaging the time to the next move over
/// every instant that has a later move.
pub fn simulate_coherence_time(
    k_ef: f64,
    ell: f64,
    sigma_m: f64,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<f64> {
    let shift = sigma_m * std_normal_quantile(ell)?;
    let mut rng = stream_rng(seed, 0, 0);
    let mut x = 0.0;
    for _ in 0..burn_in {
        let z: f64 = rng.sample(StandardNormal);
        x = restrained_update(x, x + sigma_m * z, k_ef, 0.0, shift);
    }
    let mut moved = Vec::with_capacity(steps);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let nx = restrained_update(x, x + sigma_m * z, k_ef, 0.0, shift);
        moved.push(nx != x);
        x = nx;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut to_next: Option<f64> = None;
    for &m in moved.iter().rev() {
        to_next = if m { Some(1.0) } else { to_next.map(|t| t + 1.0) };
        if let Some(t) = to_next {
            total += t;
            count += 1;
        }
    }
    if count == 0 {
        return domain("no motion observed");
    }
    Ok(total / count as f64)
}

/// KL divergence of the 64-bin histogram of `samples` (over ±5 empirical
/// standard deviations) from the Gaussian with the same mean and spread.
pub fn kl_gaussianity(samples: &[f64]) -> Result<f64> {
    const BINS: usize = 64;
    if samples.len() < 2 {
        return domain("need at least two samples");
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return domain("samples have zero spread");
    }
    let lo = mean - 5.0 * sd;
    let width = 10.0 * sd / BINS as f64;
    let mut counts = [0usize; BINS];
    let mut inside = 0usize;
    for &x in samples {
        let b = ((x - lo) / width).floor();
        if b >= 0.0 && (b as usize) < BINS {
            counts[b as usize] += 1;
            inside += 1;
        }
    }
    let mass = std_normal_cdf(5.0) - std_normal_cdf(-5.0);
    let mut kl = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = c as f64 / inside as f64;
        let a = -5.0 + 10.0 * i as f64 / BINS as f64;
        let b = -5.0 + 10.0 * (i + 1) as f64 / BINS as f64;
        let g = (std_normal_cdf(b) - std_normal_cdf(a)) / mass;
        kl += p * (p / g).ln();
    }
    Ok(kl)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceMetrics {
    /// First step whose offset is within three final deviations.
    pub k_c: usize,
    /// First step whose predecessor was still outside the band; `None` when
    /// the run starts inside it.
    pub k_c_literal: Option<usize>,
    /// `k_c` in seconds, or the horizon when not converged.
    pub t_c: f64,
    /// Root-mean-square offset from the target after `k_c`.
    pub sigma_t: f64,
    /// Mean absolute change between consecutive velocity segments.
    pub mean_dv: f64,
    pub converged: bool,
}

/// Root-mean-square of `x[k..] − d` for every `k`, by one backward pass.
pub fn suffix_rms(history: &[f64], d: f64) -> Vec<f64> {
    let mut out = vec![0.0; history.len()];
    let mut acc = 0.0;
    for (i, &x) in history.iter().enumerate().rev() {
        acc += (x - d) * (x - d);
        out[i] = (acc / (history.len() - i) as f64).sqrt();
    }
    out
}

/// Convergence time, final spread and velocity jitter of one trajectory.
///
/// The band is three times the RMS deviation from the target over the rest
/// of the run. A run is flagged as not converged, with `t_c` reported as the
/// horizon, when it only enters the band in the second half of the horizon
/// (the final spread would come from too short a tail) or when its last
/// quarter is more than twice as spread out as the quarter before (still
/// growing).
pub fn convergence_metrics_1d(history: &[f64], d: f64, rate_hz: f64) -> Result<ConvergenceMetrics> {
    if history.len() < 3 {
        return domain("need at least three states");
    }
    let rms = suffix_rms(history, d);
    let inside = |k: usize| (history[k] - d).abs() <= 3.0 * rms[k];
    let k_c = (0..history.len())
        .find(|&k| inside(k))
        .expect("last state is always inside");
    let k_c_literal = (1..history.len()).find(|&k| (history[k - 1] - d).abs() > 3.0 * rms[k]);
    let horizon = history.len() - 1;
    let q = history.len() / 4;
    let rms_of = |s: &[f64]| (s.iter().map(|x| (x - d) * (x - d)).sum::<f64>() / s.len().max(1) as f64).sqrt();
    let settled =
        rms_of(&history[history.len() - q..]) <= 2.0 * rms_of(&history[history.len() - 2 * q..history.len() - q]);
    let converged = k_c <= horizon / 2 && settled;
    let v: Vec<f64> = history.windows(2).map(|w| (w[1] - w[0]) * rate_hz).collect();
    let mean_dv = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (v.len() - 1) as f64;
    Ok(ConvergenceMetrics {
        k_c,
        k_c_literal,
        t_c: if converged {
            k_c as f64 / rate_hz
        } else {
            horizon as f64 / rate_hz
        },
        sigma_t: rms[k_c],
        mean_dv,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub step: usize,
    pub mean_abs_dd: f64,
    pub sigma_a: f64,
    pub mean_abs_dv: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleTrace {
    /// One row per state, step 0 being the initial one.
    pub rows: Vec<EnsembleRow>,
    /// Full trajectories of the first `record_agents` agents.
    pub histories: Vec<Vec<f64>>,
    /// Offset from the target of every agent at the end of the run.
    pub final_offsets: Vec<f64>,
}

struct ChunkResult {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    sum_abs: Vec<f64>,
    sum_dv: Vec<f64>,
    histories: Vec<Vec<f64>>,
    finals: Vec<f64>,
}

/// Independent restrained agents (proportional when `ℓ = 0.5`), each
/// measuring its own position with noise `σ_m`.
pub fn run_1d_ensemble(cfg: &OneDConfig, exec: Execution) -> Result<EnsembleTrace> {
    cfg.validate()?;
    let shift = cfg.shift()?;
    let n_chunks = cfg.n_agents.div_ceil(CHUNK);
    let h = cfg.horizon;
    let chunks = map_indexed(n_chunks, exec, |c| {
        let start = c * CHUNK;
        let len = CHUNK.min(cfg.n_agents - start);
        let mut rng = stream_rng(cfg.seed, 0, c as u64);
        let mut x: Vec<f64> = (0..len)
            .map(|_| cfg.d + cfg.sigma_init * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut v = vec![0.0; len];
        let n_rec = cfg.record_agents.saturating_sub(start).min(len);
        let mut histories: Vec<Vec<f64>> = (0..n_rec)
            .map(|a| {
                let mut hv = Vec::with_capacity(h + 1);
                hv.push(x[a]);
                hv
            })
            .collect();
        let mut r = ChunkResult {
            sum: vec![0.0; h + 1],
            sum_sq: vec![0.0; h + 1],
            sum_abs: vec![0.0; h + 1],
            sum_dv: vec![0.0; h + 1],
            histories: Vec::new(),
            finals: Vec::new(),
        };
        let tally = |k: usize, x: &[f64], dv: f64, r: &mut ChunkResult| {
            for &xi in x {
                let e = xi - cfg.d;
                r.sum[k] += e;
                r.sum_sq[k] += e * e;
                r.sum_abs[k] += e.abs();
            }
            r.sum_dv[k] += dv;
        };
        tally(0, &x, 0.0, &mut r);
        for k in 1..=h {
            let mut dv_sum = 0.0;
            for a in 0..len {
                let z: f64 = rng.sample(StandardNormal);
                let nx = restrained_update(x[a], x[a] + cfg.sigma_m * z, cfg.k_ef, cfg.d, shift);
                let nv = (nx - x[a]) * cfg.rate_hz;
                dv_sum += (nv - v[a]).abs();
                v[a] = nv;
                x[a] = nx;
            }
            for (a, hv) in histories.iter_mut().enumerate() {
                hv.push(x[a]);
            }
            tally(k, &x, dv_sum, &mut r);
        }
        r.finals = x.iter().map(|xi| xi - cfg.d).collect();
        r.histories = std::mem::take(&mut histories);
        r
    });

    let n = cfg.n_agents as f64;
    let mut rows = Vec::with_capacity(h + 1);
    for k in 0..=h {
        let (mut s, mut s2, mut sa, mut sd) = (0.0, 0.0, 0.0, 0.0);
        for c in &chunks {
            s += c.sum[k];
            s2 += c.sum_sq[k];
            sa += c.sum_abs[k];
            sd += c.sum_dv[k];
        }
        let mean = s / n;
        rows.push(EnsembleRow {
            step: k,
            mean_abs_dd: sa / n,
            sigma_a: (s2 / n - mean * mean).max(0.0).sqrt(),
            mean_abs_dv: sd / n,
        });
    }
    let mut histories = Vec::new();
    let mut final_offsets = Vec::with_capacity(cfg.n_agents);
    for c in chunks {
        histories.extend(c.histories);
        final_offsets.extend(c.finals);
    }
    Ok(EnsembleTrace {
        rows,
        histories,
        final_offsets,
    })
}

/// Per-agent convergence metrics averaged over the recorded trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub t_c: f64,
    pub sigma_t: f64,
    pub mean_dv: f64,
    pub converged_fraction: f64,
}

pub fn mean_metrics(trace: &EnsembleTrace, d: f64, rate_hz: f64) -> Result<MeanMetrics> {
    if trace.histories.is_empty() {
        return domain("no recorded trajectories");
    }
    let ms = trace
        .histories
        .iter()
        .map(|hv| convergence_metrics_1d(hv, d, rate_hz))
        .collect::<Result<Vec<_>>>()?;
    let n = ms.len() as f64;
    Ok(MeanMetrics {
        t_c: ms.iter().map(|m| m.t_c).sum::<f64>() / n,
        sigma_t: ms.iter().map(|m| m.sigma_t).sum::<f64>() / n,
        mean_dv: ms.iter().map(|m| m.mean_dv).sum::<f64>() / n,
        converged_fraction: ms.iter().filter(|m| m.converged).count() as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAgentConfig {
    pub k_ef: f64,
    pub ell: f64,
    pub sigma_m: f64,
    /// Desired position of agent 2 relative to agent 1.
    pub d12: f64,
    /// Initial error of the relative position, the same for every pair.
    pub delta0: f64,
    pub n_pairs: usize,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TwoAgentTrace {
    /// Ensemble mean of the relative-position error, per state.
    pub mean_delta: Vec<f64>,
    /// Fraction of agent updates zeroed by the dead zone, per step.
    pub clamp_rate: Vec<f64>,
    /// Whether the mean error settled below a tenth of its initial value.
    pub contracts: bool,
}

/// Two agents observing each other, each with its own independent noise of
/// equal spread. Their mean error evolves by the factor `1 − 2 k_ef` away
/// from the dead zone.
pub fn run_1d_two_agents(cfg: &TwoAgentConfig, exec: Execution) -> Result<TwoAgentTrace> {
    if !(cfg.k_ef > 0.0 && cfg.sigma_m >= 0.0 && cfg.n_pairs > 0 && cfg.horizon > 0) {
        return domain("invalid two-agent configuration");
    }
    let shift = cfg.sigma_m * std_normal_quantile(cfg.ell)?;
    let n_chunks = cfg.n_pairs.div_ceil(CHUNK);
    let h = cfg.horizon;
    let chunks = map_indexed(n_chunks, exec, |c| {
        let len = CHUNK.min(cfg.n_pairs - c * CHUNK);
        let mut rng = stream_rng(cfg.seed, 1, c as u64);
        let mut p1 = vec![0.0; len];
        let mut p2 = vec![cfg.d12 + cfg.delta0; len];
        let mut sums = vec![0.0; h + 1];
        let mut clamps = vec![0usize; h + 1];
        sums[0] = cfg.delta0 * len as f64;
        for k in 1..=h {
            for a in 0..len {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                // Each agent treats its measured relative position as the
                // measurement of its own offset from the desired spot.
                let m1 = p2[a] - p1[a] + cfg.sigma_m * z1;
                let m2 = p1[a] - p2[a] + cfg.sigma_m * z2;
                let n1 = restrained_update(0.0, -(m1 - cfg.d12), cfg.k_ef, 0.0, shift);
                let n2 = restrained_update(0.0, -(m2 + cfg.d12), cfg.k_ef, 0.0, shift);
                clamps[k] += (n1 == 0.0) as usize + (n2 == 0.0) as usize;
                p1[a] += n1;
                p2[a] += n2;
                sums[k] += p2[a] - p1[a] - cfg.d12;
            }
        }
        (sums, clamps)
    });
    let n = cfg.n_pairs as f64;
    let mut mean_delta = vec![0.0; h + 1];
    let mut clamp_rate = vec![0.0; h + 1];
    for (s, c) in &chunks {
        for k in 0..=h {
            mean_delta[k] += s[k];
            clamp_rate[k] += c[k] as f64;
        }
    }
    for k in 0..=h {
        mean_delta[k] /= n;
        clamp_rate[k] /= 2.0 * n;
    }
    let tail = &mean_delta[h - h / 10..];
    let tail_mean = tail.iter().map(|x| x.abs()).sum::<f64>() / tail.len() as f64;
    let contracts = tail_mean.is_finite() && tail_mean < 0.1 * cfg.delta0.abs();
    Ok(TwoAgentTrace {
        mean_delta,
        clamp_rate,
        contracts,
    })
}

/// One point of the convergence-time versus final-spread trade-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub k_ef: f64,
    pub ell: f64,
    pub t_c: f64,
    pub sigma_t: f64,
    pub mean_dv: f64,
}

/// Averages per-run metrics of `runs` single-agent runs for every gain in
/// `gains`, keeping the rest of `base`.
pub fn tradeoff_curve(
    base: &OneDConfig,
    gains: &[f64],
    ell: f64,
    runs: usize,
    exec: Execution,
) -> Result<Vec<TradeoffPoint>> {
    gains
        .iter()
        .map(|&k_ef| {
            let cfg = OneDConfig {
                k_ef,
                ell,
                n_agents: runs,
                record_agents: runs,
                ..*base
            };
            let tr = run_1d_ensemble(&cfg, exec)?;
            let m = mean_metrics(&tr, cfg.d, cfg.rate_hz)?;
            Ok(TradeoffPoint {
                k_ef,
                ell,
                t_c: m.t_c,
                sigma_t: m.sigma_t,
                mean_dv: m.mean_dv,
            })
        })
        .collect()
}

/// True when no point of `reference` beats `p` on both convergence time and
/// final spread by more than the relative `band`.
pub fn not_dominated(p: &TradeoffPoint, reference: &[TradeoffPoint], band: f64) -> bool {
    let mut pts: Vec<(f64, f64)> = reference.iter().map(|r| (r.t_c, r.sigma_t)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Lower envelope of the reference curve, linearly interpolated in t_c,
    // taken over every time not exceeding p's.
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let ((t0, s0), (t1, s1)) = (w[0], w[1]);
        if t0 <= p.t_c {
            best = best.min(s0);
            if t1 > p.t_c && t1 > t0 {
                best = best.min(s0 + (s1 - s0) * (p.t_c - t0) / (t1 - t0));
            }
        }
    }
    if let Some(&(t, s)) = pts.last() {
        if t <= p.t_c {
            best = best.min(s);
        }
    }
    p.sigma_t <= best * (1.0 + band)
}
