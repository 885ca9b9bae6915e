//! Relative-pose sensor model: anisotropic Gaussian position noise aligned
//! with the line of sight, Gaussian heading noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::controller::NoisyRelativePose;
use crate::error::{domain, Result};
use crate::geometry::{wrap_angle, Mat3, Vec3};
use crate::tolerances::COV_FLOOR_SIGMA;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    /// Radial standard deviation as a fraction of the distance.
    #[serde(default = "default_dist")]
    pub dist_frac_sigma: f64,
    /// Angular standard deviation (rad) of the two directions orthogonal to
    /// the line of sight.
    #[serde(default = "default_bearing")]
    pub bearing_sigma: f64,
    /// Relative-heading standard deviation (rad).
    #[serde(default = "default_heading")]
    pub heading_sigma: f64,
    /// Measurement and control rate (Hz).
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
}

fn default_dist() -> f64 {
    0.10
}
fn default_bearing() -> f64 {
    0.03
}
fn default_heading() -> f64 {
    0.26
}
fn default_rate() -> f64 {
    10.0
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            dist_frac_sigma: default_dist(),
            bearing_sigma: default_bearing(),
            heading_sigma: default_heading(),
            rate_hz: default_rate(),
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let sig = [self.dist_frac_sigma, self.bearing_sigma, self.heading_sigma];
        if sig.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return domain("sensor standard deviations must be finite and non-negative");
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return domain("sensor rate must be positive");
        }
        Ok(())
    }

    /// Standard deviations along the line-of-sight frame of `p`
    /// (radial, horizontal tangent, third axis), without the floor.
    pub fn frame_sigmas(&self, p: &Vec3) -> Vec3 {
        let d = p.norm();
        Vec3::new(self.dist_frac_sigma * d, self.bearing_sigma * d, self.bearing_sigma * d)
    }

    /// Position covariance for a true relative position `p`, floored at
    /// `COV_FLOOR_SIGMA²` per principal direction.
    pub fn covariance_for(&self, p: &Vec3) -> Result<Mat3> {
        let frame = line_of_sight_frame(p)?;
        let s = self.frame_sigmas(p);
        let floor = COV_FLOOR_SIGMA * COV_FLOOR_SIGMA;
        let lam = Vec3::new((s.x * s.x).max(floor), (s.y * s.y).max(floor), (s.z * s.z).max(floor));
        Ok(frame * Mat3::from_diagonal(&lam) * frame.transpose())
    }
}

/// Orthonormal frame with columns: unit line of sight, horizontal tangent,
/// and their cross product. A vertical line of sight uses the x axis as
/// tangent.
pub fn line_of_sight_frame(p: &Vec3) -> Result<Mat3> {
    let d = p.norm();
    if !(d > 0.0 && d.is_finite()) {
        return domain("line of sight undefined for zero or non-finite relative position");
    }
    let er = p / d;
    let h = (er.x * er.x + er.y * er.y).sqrt();
    let et = if h > 1e-12 {
        Vec3::new(-er.y / h, er.x / h, 0.0)
    } else {
        Vec3::x()
    };
    let e3 = er.cross(&et);
    Ok(Mat3::from_columns(&[er, et, e3]))
}

/// Draws one noisy relative pose. Noise is generated from the unfloored
/// standard deviations; the attached covariance is the floored one.
pub fn sample_measurement<R: Rng + ?Sized>(
    p_true: &Vec3,
    psi_true: f64,
    spec: &SensorSpec,
    rng: &mut R,
) -> Result<NoisyRelativePose> {
    let frame = line_of_sight_frame(p_true)?;
    let s = spec.frame_sigmas(p_true);
    let z = Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    let zpsi: f64 = rng.sample(StandardNormal);
    let noise = frame * z.component_mul(&s);
    Ok(NoisyRelativePose {
        p: p_true + noise,
        psi: wrap_angle(psi_true + spec.heading_sigma * zpsi),
        cov_p: spec.covariance_for(p_true)?,
        var_psi: spec.heading_sigma * spec.heading_sigma,
    })
}
