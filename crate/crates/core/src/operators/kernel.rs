//! Kernels of type `(α, N)` and their numerical validation.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::{
    dilate_unchecked, h1, invariant_derivative, koranyi_norm, GroupContext, MultiIndex, Point, Side,
    UNIT_BALL_MEASURE_H1,
};

/// Largest relative change of a kernel constant under `h → h/2` still
/// counted as stable.
pub const KERNEL_REFINEMENT_TOL: f64 = 0.1;

/// Largest |log-log slope| of the per-shell constant still counted as bounded.
pub const KERNEL_SLOPE_TOL: f64 = 0.1;

/// What replaces the kernel on the cell that contains the singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularPolicy {
    /// Mean of `ρ^{α−Q}` over the Koranyi ball of the same measure as the cell.
    BallMean,
    /// Drop the singular cell.
    Zero,
}

#[derive(Clone)]
enum Form {
    Riesz,
    Custom(Arc<dyn Fn(&Point) -> f64 + Send + Sync>),
}

#[derive(Clone)]
pub struct Kernel {
    alpha: f64,
    q: usize,
    form: Form,
    /// Whether `K(r·z) = r^{α−Q} K(z)` holds exactly.
    pub homogeneous: bool,
    pub singular_policy: SingularPolicy,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("alpha", &self.alpha)
            .field("q", &self.q)
            .field("riesz", &self.is_riesz())
            .field("homogeneous", &self.homogeneous)
            .field("singular_policy", &self.singular_policy)
            .finish()
    }
}

/// `K_α(z) = ρ(z)^{α−Q}`.
pub fn riesz_kernel(alpha: f64, ctx: &GroupContext) -> Result<Kernel> {
    let q = ctx.q();
    if !(alpha > 0.0 && alpha < q as f64) {
        return invalid(format!("Riesz kernel needs 0 < α < Q = {q}, got {alpha}"));
    }
    Ok(Kernel {
        alpha,
        q,
        form: Form::Riesz,
        homogeneous: true,
        singular_policy: SingularPolicy::BallMean,
    })
}

impl Kernel {
    pub fn custom<F>(alpha: f64, ctx: &GroupContext, f: F, policy: SingularPolicy) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        let q = ctx.q();
        if !(alpha > 0.0 && alpha < q as f64) {
            return invalid(format!("kernel order must lie in (0, Q), got {alpha}"));
        }
        Ok(Self {
            alpha,
            q,
            form: Form::Custom(Arc::new(f)),
            homogeneous: false,
            singular_policy: policy,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn is_riesz(&self) -> bool {
        matches!(self.form, Form::Riesz)
    }

    pub fn evaluate(&self, z: &Point) -> f64 {
        match &self.form {
            Form::Riesz => koranyi_norm(z).powf(self.alpha - self.q as f64),
            Form::Custom(f) => f(z),
        }
    }

    #[inline]
    pub fn eval_h1(&self, z: [f64; 3]) -> f64 {
        match &self.form {
            Form::Riesz => riesz_from_rho4(h1::rho4(z), self.alpha, self.q as f64),
            Form::Custom(f) => f(&Point::from_h1(z)),
        }
    }

    /// Replacement value on a singular cell of volume `cell_volume` in ℍ¹.
    pub fn singular_value(&self, cell_volume: f64) -> f64 {
        match self.singular_policy {
            SingularPolicy::Zero => 0.0,
            SingularPolicy::BallMean => {
                let q = self.q as f64;
                let r_cell = (cell_volume / UNIT_BALL_MEASURE_H1).powf(1.0 / q);
                (q / self.alpha) * UNIT_BALL_MEASURE_H1 * r_cell.powf(self.alpha) / cell_volume
            }
        }
    }
}

/// `ρ^{α−Q}` from `ρ⁴`, with root-only paths for the common orders.
#[inline]
pub(crate) fn riesz_from_rho4(rho4: f64, alpha: f64, q: f64) -> f64 {
    let e = alpha - q;
    if e == -2.0 {
        1.0 / rho4.sqrt()
    } else if e == -3.0 {
        let r2 = rho4.sqrt();
        1.0 / (r2 * r2.sqrt())
    } else if e == -1.0 {
        1.0 / rho4.sqrt().sqrt()
    } else {
        rho4.powf(0.25 * e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTypeRow {
    pub index: MultiIndex,
    pub degree: u32,
    /// `sup |X̃^I K(z)|·ρ(z)^{Q+d(I)−α}` over the samples at step `h`.
    pub constant: f64,
    /// Same at step `h/2`.
    pub constant_refined: f64,
    pub refinement_change: f64,
    /// Log-log slope of the per-shell supremum against ρ.
    pub shell_slope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTypeReport {
    pub alpha: f64,
    pub order: u32,
    pub rows: Vec<KernelTypeRow>,
    pub max_refinement_change: f64,
    pub max_abs_slope: f64,
    pub pass: bool,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub(crate) fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_slope(&lx, &ly)
}

/// Shell index per sample: distinct radii when there are few, otherwise
/// eight logarithmic bins.
fn shells(rhos: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = rhos.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    if distinct.len() <= 32 {
        return rhos
            .iter()
            .map(|r| distinct.iter().position(|d| (r - d).abs() <= 1e-9 * d.abs()).unwrap_or(0))
            .collect();
    }
    let lo = distinct[0].ln();
    let hi = distinct[distinct.len() - 1].ln();
    let w = ((hi - lo) / 8.0).max(f64::MIN_POSITIVE);
    rhos.iter().map(|r| (((r.ln() - lo) / w) as usize).min(7)).collect()
}

/// Checks `|X̃^I K(z)| ≲ ρ(z)^{α−Q−d(I)}` for all `d(I) ≤ N` on the samples.
///
/// The finite-difference step at `z` is `h·ρ(z)`, so every shell sees the same
/// relative resolution. A row passes when its constants are finite, change by
/// less than [`KERNEL_REFINEMENT_TOL`] under `h → h/2`, and show no power-law
/// trend across shells (|slope| ≤ [`KERNEL_SLOPE_TOL`]).
pub fn validate_kernel_type(k: &Kernel, alpha: f64, n_order: u32, samples: &[Point], h: f64) -> Result<KernelTypeReport> {
    if samples.is_empty() {
        return invalid("kernel validation needs samples");
    }
    if !(h > 0.0) {
        return invalid("kernel validation needs h > 0");
    }
    let rhos: Vec<f64> = samples.iter().map(koranyi_norm).collect();
    if rhos.contains(&0.0) {
        return Err(Error::InvalidParameter("kernel sample at the identity".into()));
    }
    let n = samples[0].n();
    let ctx = GroupContext::new(n)?;
    let q = ctx.q() as f64;
    let shell = shells(&rhos);
    let n_shells = shell.iter().max().map_or(0, |m| m + 1);
    let f = |z: &Point| k.evaluate(z);

    let mut rows = Vec::new();
    for index in MultiIndex::up_to_degree(&ctx, n_order) {
        let degree = index.homogeneous_degree();
        let weight_exp = q + degree as f64 - alpha;
        let mut sup = [0.0f64; 2];
        let mut shell_sup = vec![0.0f64; n_shells];
        let mut finite = true;
        for (si, (z, &rho)) in samples.iter().zip(&rhos).enumerate() {
            for (level, step) in [h * rho, 0.5 * h * rho].into_iter().enumerate() {
                let d = invariant_derivative(&f, &index, Side::Right, z, step)?;
                let ratio = d.abs() * rho.powf(weight_exp);
                if !ratio.is_finite() {
                    finite = false;
                    continue;
                }
                sup[level] = sup[level].max(ratio);
                if level == 1 {
                    shell_sup[shell[si]] = shell_sup[shell[si]].max(ratio);
                }
            }
        }
        let change = if sup[0] == 0.0 && sup[1] == 0.0 {
            0.0
        } else {
            (sup[1] - sup[0]).abs() / sup[0].max(sup[1])
        };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (s, &v) in shell_sup.iter().enumerate() {
            if v > 0.0 {
                let members: Vec<f64> = rhos.iter().zip(&shell).filter(|(_, &sh)| sh == s).map(|(r, _)| *r).collect();
                let mean = (members.iter().map(|r| r.ln()).sum::<f64>() / members.len() as f64).exp();
                xs.push(mean);
                ys.push(v);
            }
        }
        let slope = log_log_slope(&xs, &ys);
        let pass = finite && change < KERNEL_REFINEMENT_TOL && slope.abs() <= KERNEL_SLOPE_TOL;
        rows.push(KernelTypeRow {
            index,
            degree,
            constant: sup[0],
            constant_refined: sup[1],
            refinement_change: change,
            shell_slope: slope,
            pass,
        });
    }
    let max_refinement_change = rows.iter().map(|r| r.refinement_change).fold(0.0, f64::max);
    let max_abs_slope = rows.iter().map(|r| r.shell_slope.abs()).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.pass);
    Ok(KernelTypeReport {
        alpha,
        order: n_order,
        rows,
        max_refinement_change,
        max_abs_slope,
        pass,
    })
}

/// `directions` seeded points on the unit Koranyi sphere, each dilated to
/// `shells` geometric radii in `[rho_min, rho_max]`.
pub fn kernel_samples(ctx: &GroupContext, rho_min: f64, rho_max: f64, shells: usize, directions: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = ctx.coords();
    let dirs: Vec<Point> = (0..directions)
        .map(|_| loop {
            let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = Point::new(&raw[..dim - 1], raw[dim - 1]);
            let r = koranyi_norm(&p);
            if r > 1e-3 {
                break dilate_unchecked(1.0 / r, &p);
            }
        })
        .collect();
    let mut out = Vec::with_capacity(shells * directions);
    for s in 0..shells {
        let t = if shells == 1 { 0.0 } else { s as f64 / (shells - 1) as f64 };
        let r = rho_min * (rho_max / rho_min).powf(t);
        out.extend(dirs.iter().map(|d| dilate_unchecked(r, d)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn riesz_examples() {
        let ctx = GroupContext::h1();
        let k = riesz_kernel(2.0, &ctx).unwrap();
        assert_relative_eq!(k.evaluate(&Point::h1(0.0, 0.0, 1.0)), 0.25, max_relative = 1e-15);
        let z = Point::h1(0.3, -0.7, 0.4);
        for r in [0.5, 3.0] {
            let scaled = k.evaluate(&dilate_unchecked(r, &z));
            assert_relative_eq!(scaled, r.powf(-2.0) * k.evaluate(&z), max_relative = 1e-14);
        }
        assert!(riesz_kernel(4.0, &ctx).is_err());
        assert!(riesz_kernel(0.0, &ctx).is_err());
    }

    #[test]
    fn fast_powers_agree() {
        let ctx = GroupContext::h1();
        for alpha in [1.0, 1.5, 2.0, 3.0] {
            let k = riesz_kernel(alpha, &ctx).unwrap();
            let z = Point::h1(0.2, 1.1, -0.3);
            assert_relative_eq!(k.eval_h1(z.as_h1()), k.evaluate(&z), max_relative = 1e-14);
        }
    }

    #[test]
    fn singular_value_is_ball_mean() {
        let k = riesz_kernel(2.0, &GroupContext::h1()).unwrap();
        let vol = 1e-3;
        let r = (vol / UNIT_BALL_MEASURE_H1).powf(0.25);
        assert_relative_eq!(k.singular_value(vol) * vol, 2.0 * UNIT_BALL_MEASURE_H1 * r * r, max_relative = 1e-13);
    }

    #[test]
    fn riesz_kernel_is_of_type_alpha_two() {
        let ctx = GroupContext::h1();
        let k = riesz_kernel(2.0, &ctx).unwrap();
        let samples = kernel_samples(&ctx, 0.5, 8.0, 5, 16, 1);
        let rep = validate_kernel_type(&k, 2.0, 2, &samples, 1e-3).unwrap();
        assert!(rep.pass, "{rep:?}");
        let zero = rep.rows.iter().find(|r| r.degree == 0).unwrap();
        assert_relative_eq!(zero.constant, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn wrong_order_is_rejected() {
        let ctx = GroupContext::h1();
        let k = riesz_kernel(2.0, &ctx).unwrap();
        let samples = kernel_samples(&ctx, 0.5, 8.0, 5, 16, 1);
        let rep = validate_kernel_type(&k, 3.0, 2, &samples, 1e-3).unwrap();
        assert!(!rep.pass);
        assert!(rep.rows.iter().all(|r| (r.shell_slope + 1.0).abs() < 0.05));
    }

    #[test]
    fn identity_sample_is_an_error() {
        let k = riesz_kernel(2.0, &GroupContext::h1()).unwrap();
        assert!(validate_kernel_type(&k, 2.0, 1, &[Point::identity(1)], 1e-3).is_err());
    }
}
