//! Formation-enforcing control: the proportional gradient law and the
//! restrained law, whose per-term setpoints are pulled from the measurement
//! toward the desired value by a quantile of the measurement noise and then
//! passed through a dead zone.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{azimuth, rotz, sgn, skew_z, wrap_angle, Mat3, Pose, Vec3};
use crate::stats::std_normal_quantile;
use crate::tolerances::COV_FLOOR_SIGMA;

/// A relative pose measurement together with the noise model it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyRelativePose {
    pub p: Vec3,
    pub psi: f64,
    /// Position covariance in the observer's body frame.
    pub cov_p: Mat3,
    /// Variance of the relative heading.
    pub var_psi: f64,
}

impl NoisyRelativePose {
    /// A noiseless measurement carrying only the covariance floor.
    pub fn exact(rel: &Pose) -> Self {
        let f = COV_FLOOR_SIGMA * COV_FLOOR_SIGMA;
        Self {
            p: rel.p,
            psi: rel.psi,
            cov_p: Mat3::identity() * f,
            var_psi: 0.0,
        }
    }
}

/// One observed neighbour: what was measured and what it should be.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub measured: NoisyRelativePose,
    pub desired: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    /// Body-frame velocity (m/s).
    pub u: Vec3,
    /// Yaw rate (rad/s).
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default = "default_k_e")]
    pub k_e: f64,
    /// Quantile level of the setpoint shift, in (0, 0.5]; 0.5 disables the shift.
    #[serde(default = "default_ell")]
    pub ell: f64,
    #[serde(default = "default_true")]
    pub restraining: bool,
    /// Largest heading change per control period (rad).
    #[serde(default = "default_cap")]
    pub omega_cap: f64,
}

fn default_k_e() -> f64 {
    0.5
}
fn default_ell() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_cap() -> f64 {
    PI
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            k_e: default_k_e(),
            ell: default_ell(),
            restraining: true,
            omega_cap: default_cap(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_e.is_finite() && self.k_e > 0.0) {
            return domain(format!("gain k_e = {} must be positive", self.k_e));
        }
        if !(self.ell > 0.0 && self.ell <= 0.5) {
            return domain(format!("quantile level ell = {} outside (0, 0.5]", self.ell));
        }
        if !(self.omega_cap > 0.0) {
            return domain("omega_cap must be positive");
        }
        Ok(())
    }
}

/// Dead zone: `y` if `y·a ∈ (0, a·a]`, else zero.
pub fn clamp_dz_scalar(y: f64, a: f64) -> f64 {
    let ya = y * a;
    if ya > 0.0 && ya <= a * a {
        y
    } else {
        0.0
    }
}

/// Vector dead zone: keeps `y` only if its projection on `a` lies in (0, ‖a‖²].
pub fn clamp_dz(y: &Vec3, a: &Vec3) -> Vec3 {
    let ya = y.dot(a);
    if ya > 0.0 && ya <= a.dot(a) {
        *y
    } else {
        Vec3::zeros()
    }
}

/// `p_dᵀ Sᵀ p`: horizontal cross product, `‖F p_d‖ ‖F p‖ sin α` with α the
/// angle from the desired to the measured bearing.
fn bearing_product(p_d: &Vec3, p: &Vec3) -> f64 {
    (skew_z() * p_d).dot(p)
}

fn rotated_desired(meas: &NoisyRelativePose, desired: &Pose) -> Vec3 {
    rotz(wrap_angle(meas.psi - desired.psi)) * desired.p
}

/// Proportional FEC command from all observed neighbours.
pub fn proportional_command(obs: &[Observation], cfg: &ControllerConfig) -> ControlCommand {
    let mut u = Vec3::zeros();
    let mut w = 0.0;
    for o in obs {
        let m = &o.measured;
        let p_d = &o.desired.p;
        let dpsi = wrap_angle(m.psi - o.desired.psi);
        let p_dr = rotz(dpsi) * p_d;
        u += (m.p - p_d) + (m.p - p_dr);
        w += bearing_product(p_d, &m.p) + 2.0 * dpsi;
    }
    ControlCommand {
        u: u * cfg.k_e,
        omega: w * cfg.k_e,
    }
}

/// Shifts `from` toward `toward` by `quantile` standard deviations of `cov`
/// measured along their difference. Zero difference leaves `from` in place.
fn shifted_setpoint(from: &Vec3, toward: &Vec3, cov: &Mat3, quantile: f64) -> Result<Vec3> {
    let d = from - toward;
    if d.norm_squared() == 0.0 {
        return Ok(*from);
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| crate::Error::Singular("measurement covariance not positive definite".into()))?;
    let q = d.dot(&chol.solve(&d));
    Ok(from + d * (quantile / q.sqrt()))
}

/// Position setpoint of the direct term: the measurement pulled toward the
/// desired position by `Φ⁻¹(ℓ)` standard deviations along their difference.
pub fn setpoint_p1(meas: &NoisyRelativePose, p_d: &Vec3, ell: f64) -> Result<Vec3> {
    shifted_setpoint(&meas.p, p_d, &meas.cov_p, std_normal_quantile(ell)?)
}

/// Gaussian approximation of the desired position rotated by the (noisy)
/// relative heading error: mean shrunk horizontally by `cos σψ` and a flat
/// covariance spanning the arc of ±σψ.
pub fn approx_rotated_desired(meas: &NoisyRelativePose, desired: &Pose) -> (Vec3, Mat3) {
    let p_dr = rotated_desired(meas, desired);
    let s = meas.var_psi.max(0.0).sqrt();
    let c = s.cos();
    let p_hat = Vec3::new(p_dr.x * c, p_dr.y * c, p_dr.z);
    let delta2 = COV_FLOOR_SIGMA * COV_FLOOR_SIGMA;
    let r2 = p_dr.x * p_dr.x + p_dr.y * p_dr.y;
    if r2 == 0.0 {
        return (p_hat, Mat3::identity() * delta2);
    }
    let r = r2.sqrt();
    let sc = s.min(FRAC_PI_2);
    let v = Mat3::from_columns(&[
        Vec3::new(p_dr.x / r, p_dr.y / r, 0.0),
        Vec3::new(-p_dr.y / r, p_dr.x / r, 0.0),
        Vec3::z(),
    ]);
    let l = Vec3::new((1.0 - sc.cos()).powi(2), sc.sin().powi(2), delta2) * r2;
    (p_hat, v * Mat3::from_diagonal(&l) * v.transpose())
}

/// Position setpoint of the rotated term, using the combined covariance of
/// the measurement and the rotated-desired approximation.
pub fn setpoint_p2(meas: &NoisyRelativePose, desired: &Pose, ell: f64) -> Result<Vec3> {
    let (p_hat, cov_t) = approx_rotated_desired(meas, desired);
    shifted_setpoint(&meas.p, &p_hat, &(meas.cov_p + cov_t), std_normal_quantile(ell)?)
}

/// Angular standard deviation of the measured bearing: tangential variance
/// of the position covariance divided by the range.
pub fn bearing_sigma(meas: &NoisyRelativePose) -> Result<f64> {
    let n = meas.p.norm();
    if n == 0.0 {
        return domain("bearing undefined at zero range");
    }
    let r = rotz(-azimuth(&meas.p));
    let cr = r * meas.cov_p * r.transpose();
    Ok(cr[(1, 1)].max(0.0).sqrt() / n)
}

/// Bearing term evaluated at the measured position rotated toward the
/// desired bearing by `|Φ⁻¹(ℓ)|` bearing standard deviations.
pub fn restrained_bearing_term(meas: &NoisyRelativePose, p_d: &Vec3, ell: f64) -> Result<f64> {
    let q = std_normal_quantile(ell)?;
    let sigma = bearing_sigma(meas)?;
    let toward = sgn(wrap_angle(azimuth(p_d) - azimuth(&meas.p)));
    let angle = -toward * sigma * q;
    let p_c3 = if angle == 0.0 { meas.p } else { rotz(angle) * meas.p };
    Ok(bearing_product(p_d, &p_c3))
}

/// Heading setpoint: the measured relative heading pulled toward the desired
/// one by `|Φ⁻¹(ℓ)|` heading standard deviations.
pub fn setpoint_psi2(meas: &NoisyRelativePose, psi_d: f64, ell: f64) -> Result<f64> {
    Ok(wrap_angle(meas.psi + heading_shift(meas, psi_d, ell)?))
}

fn heading_shift(meas: &NoisyRelativePose, psi_d: f64, ell: f64) -> Result<f64> {
    let q = std_normal_quantile(ell)?;
    Ok(meas.var_psi.max(0.0).sqrt() * sgn(wrap_angle(meas.psi - psi_d)) * q)
}

/// Restrained FEC command. Each of the four per-neighbour terms is
/// recomputed at its shifted setpoint and kept only if it still points the
/// same way as, and is no larger than, the proportional term. At `ℓ = 0.5`
/// this reproduces [`proportional_command`] bit for bit.
pub fn restrained_command(obs: &[Observation], cfg: &ControllerConfig) -> Result<ControlCommand> {
    let mut u = Vec3::zeros();
    let mut w = 0.0;
    for o in obs {
        let m = &o.measured;
        let p_d = &o.desired.p;
        let dpsi = wrap_angle(m.psi - o.desired.psi);
        let p_dr = rotz(dpsi) * p_d;

        let s1 = setpoint_p1(m, p_d, cfg.ell)?;
        let s2 = setpoint_p2(m, &o.desired, cfg.ell)?;
        u += clamp_dz(&(s1 - p_d), &(m.p - p_d)) + clamp_dz(&(s2 - p_dr), &(m.p - p_dr));

        let b = clamp_dz_scalar(restrained_bearing_term(m, p_d, cfg.ell)?, bearing_product(p_d, &m.p));
        let h = clamp_dz_scalar(wrap_angle(dpsi + heading_shift(m, o.desired.psi, cfg.ell)?), dpsi);
        w += b + 2.0 * h;
    }
    Ok(ControlCommand {
        u: u * cfg.k_e,
        omega: w * cfg.k_e,
    })
}

/// Limits the yaw rate so one control period turns at most `omega_cap`.
pub fn saturate_yaw_rate(cmd: ControlCommand, omega_cap: f64, rate_hz: f64) -> ControlCommand {
    let lim = omega_cap * rate_hz;
    ControlCommand {
        u: cmd.u,
        omega: cmd.omega.clamp(-lim, lim),
    }
}

/// The command an agent applies: restrained or proportional per `cfg`, with
/// the yaw-rate cap.
pub fn compute_command(obs: &[Observation], cfg: &ControllerConfig, rate_hz: f64) -> Result<ControlCommand> {
    let cmd = if cfg.restraining {
        restrained_command(obs, cfg)?
    } else {
        proportional_command(obs, cfg)
    };
    Ok(saturate_yaw_rate(cmd, cfg.omega_cap, rate_hz))
}
