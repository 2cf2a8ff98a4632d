//! Maximal operators, singular kernels, group convolution and the grand
//! maximal function on ℍ¹ grids.

mod convolution;
mod grand;
mod kernel;
mod maximal;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::group::h1;

pub use convolution::{convolve, convolve_at, convolve_onto};
pub use grand::{
    grand_maximal, grand_maximal_at, grand_maximal_onto, profile_response, GrandMaximalDictionary, Profile,
    MIN_POOLED_CELLS,
};
pub use kernel::{
    kernel_samples, riesz_kernel, validate_kernel_type, Kernel, KernelTypeReport, KernelTypeRow, SingularPolicy,
    KERNEL_REFINEMENT_TOL, KERNEL_SLOPE_TOL,
};
pub use maximal::{
    frac_maximal, frac_maximal_at, frac_maximal_onto, fs_ratio, hl_maximal, lattice_ball_measure, maximal_average,
};

/// Geometric radii `r_min·base^{k/steps}` up to `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiiSchedule {
    pub r_min: f64,
    pub r_max: f64,
    /// Number of radii per factor `base`.
    pub per_octave: u32,
    #[serde(default = "default_base")]
    pub base: f64,
}

fn default_base() -> f64 {
    2.0
}

impl RadiiSchedule {
    pub fn new(r_min: f64, r_max: f64, per_octave: u32) -> Result<Self> {
        Self::with_base(r_min, r_max, per_octave, 2.0)
    }

    /// `per_decade` radii per factor of ten.
    pub fn per_decade(r_min: f64, r_max: f64, per_decade: u32) -> Result<Self> {
        Self::with_base(r_min, r_max, per_decade, 10.0)
    }

    fn with_base(r_min: f64, r_max: f64, per_octave: u32, base: f64) -> Result<Self> {
        let s = Self {
            r_min,
            r_max,
            per_octave,
            base,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0) || !(self.r_max >= self.r_min) || !self.r_max.is_finite() {
            return invalid(format!("radii schedule needs 0 < r_min ≤ r_max, got [{}, {}]", self.r_min, self.r_max));
        }
        if self.per_octave == 0 || !(self.base > 1.0) {
            return invalid("radii schedule needs at least one step per octave");
        }
        Ok(())
    }

    /// Eight radii per octave from the x-spacing to twice the box diameter.
    pub fn for_grid(spec: &GridSpec) -> Self {
        let diam = h1::rho([2.0 * spec.lx, 2.0 * spec.lx, 2.0 * spec.lt]);
        Self {
            r_min: spec.hx,
            r_max: 2.0 * diam,
            per_octave: 8,
            base: 2.0,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let limit = self.r_max * (1.0 + 1e-12);
        let mut k = 0u32;
        loop {
            let r = self.r_min * self.base.powf(k as f64 / self.per_octave as f64);
            if r > limit {
                break;
            }
            out.push(r);
            k += 1;
        }
        out
    }

    pub fn dilated(&self, r: f64) -> Self {
        Self {
            r_min: self.r_min * r,
            r_max: self.r_max * r,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_is_geometric() {
        let s = RadiiSchedule::new(0.5, 4.0, 2).unwrap();
        let r = s.radii();
        assert_eq!(r.len(), 7);
        assert!((r[6] - 4.0).abs() < 1e-12);
        let d = RadiiSchedule::per_decade(0.1, 1.0, 16).unwrap().radii();
        assert_eq!(d.len(), 17);
        assert!(RadiiSchedule::new(1.0, 0.5, 8).is_err());
        assert!(RadiiSchedule::new(1.0, 2.0, 0).is_err());
    }
}
