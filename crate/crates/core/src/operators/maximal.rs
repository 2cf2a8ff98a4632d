//! Centered fractional maximal functions with a semi-discrete ball quadrature.
//!
//! A field is read as piecewise constant in `t` on each x-column of cells
//! (midpoint rule in x, exact in t). The slice of `B(z,r)` over the column at
//! `y` is the open interval `c ± w` with `c = t + xᵀJy` and
//! `w = √(r⁴ − |y−x|⁴)/4`, so ball integrals reduce to differences of the
//! cumulative column integral. Ball measures use the same rule, which makes
//! averages of constants exact.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::exponent::{sobolev_exponent, ExponentFn};
use crate::grid::{Field, Grid};
use crate::group::{h1, GroupContext};
use crate::luxemburg::luxemburg_norm;

use super::RadiiSchedule;

const Q: f64 = 4.0;

struct AbsColumn {
    y: [f64; 2],
    /// Lower t-edge of the first stored cell.
    edge: f64,
    /// `ht·|f|` per stored cell.
    seg: Vec<f64>,
    prefix: Vec<f64>,
}

impl AbsColumn {
    #[inline]
    fn cumulative(&self, s: f64, ht: f64) -> f64 {
        let u = (s - self.edge) / ht;
        if u <= 0.0 {
            return 0.0;
        }
        let n = self.seg.len();
        if u >= n as f64 {
            return self.prefix[n];
        }
        let k = u as usize;
        self.prefix[k] + (u - k as f64) * self.seg[k]
    }
}

pub(crate) struct AbsColumns {
    cols: Vec<AbsColumn>,
    hx: f64,
    ht: f64,
    origin: [f64; 2],
    anchor: [f64; 3],
    /// Every point of the (semi-discrete) support lies within this Koranyi
    /// distance of `anchor`.
    r0: f64,
    /// `∫|f|`, bounding every ball integral.
    mass: f64,
}

impl AbsColumns {
    pub(crate) fn new(f: &Field) -> Self {
        let grid = f.grid();
        let [nx, ny, nt] = grid.shape();
        let spec = grid.spec();
        let ht = spec.ht;
        let anchor = f
            .support_hint
            .as_ref()
            .map(|b| b.center.as_h1())
            .unwrap_or(spec.center);
        let mut cols = Vec::new();
        let mut r0 = 0.0f64;
        let vals = f.values();
        for i in 0..nx {
            for j in 0..ny {
                let base = grid.index(i, j, 0);
                let column = &vals[base..base + nt];
                let first = column.iter().position(|v| *v != 0.0);
                let Some(lo) = first else { continue };
                let hi = column.iter().rposition(|v| *v != 0.0).unwrap_or(lo);
                let y = [grid.xs[i], grid.ys[j]];
                let seg: Vec<f64> = column[lo..=hi].iter().map(|v| ht * v.abs()).collect();
                let mut prefix = Vec::with_capacity(seg.len() + 1);
                let mut acc = 0.0;
                prefix.push(0.0);
                for s in &seg {
                    acc += s;
                    prefix.push(acc);
                }
                for k in lo..=hi {
                    if column[k] == 0.0 {
                        continue;
                    }
                    for s in [grid.ts[k] - 0.5 * ht, grid.ts[k] + 0.5 * ht] {
                        r0 = r0.max(h1::rho(h1::left_div(anchor, [y[0], y[1], s])));
                    }
                }
                cols.push(AbsColumn {
                    y,
                    edge: grid.ts[lo] - 0.5 * ht,
                    seg,
                    prefix,
                });
            }
        }
        let mass = cols.iter().map(|c| c.prefix[c.seg.len()]).sum::<f64>() * spec.hx * spec.hx;
        Self {
            cols,
            hx: spec.hx,
            ht,
            origin: [grid.xs[0], grid.ys[0]],
            anchor,
            r0,
            mass,
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// `∫_{B(z,r)} |f|` under the semi-discrete rule.
    fn ball_integral(&self, z: [f64; 3], r: f64) -> f64 {
        let r4 = r * r * r * r;
        let x = [z[0], z[1]];
        let mut acc = 0.0;
        for col in &self.cols {
            let d1 = col.y[0] - x[0];
            let d2 = col.y[1] - x[1];
            let dd = d1 * d1 + d2 * d2;
            let rem = r4 - dd * dd;
            if rem <= 0.0 {
                continue;
            }
            let w = 0.25 * rem.sqrt();
            let c = z[2] + h1::symplectic(x, col.y);
            acc += col.cumulative(c + w, self.ht) - col.cumulative(c - w, self.ht);
        }
        acc * self.hx * self.hx
    }

    fn phase(&self, x: [f64; 2]) -> [f64; 2] {
        [
            ((x[0] - self.origin[0]) / self.hx).rem_euclid(1.0),
            ((x[1] - self.origin[1]) / self.hx).rem_euclid(1.0),
        ]
    }
}

/// `h_x² Σ_{d ∈ h_x(ℤ² + phase), |d| < r} √(r⁴ − |d|⁴)/2`: the measure of
/// `B(z,r)` under the semi-discrete rule for a center whose x-coordinates sit
/// at fractional offset `phase` from the column lattice.
pub fn lattice_ball_measure(r: f64, hx: f64, phase: [f64; 2]) -> f64 {
    let r4 = r.powi(4);
    let m = (r / hx).ceil() as i64 + 1;
    let mut acc = 0.0;
    for k1 in -m..=m {
        let d1 = (k1 as f64 - phase[0]) * hx;
        if d1.abs() >= r {
            continue;
        }
        for k2 in -m..=m {
            let d2 = (k2 as f64 - phase[1]) * hx;
            let dd = d1 * d1 + d2 * d2;
            let rem = r4 - dd * dd;
            if rem > 0.0 {
                acc += 0.5 * rem.sqrt();
            }
        }
    }
    acc * hx * hx
}

struct WeightCache {
    radii: Vec<f64>,
    alpha: f64,
    hx: f64,
    cache: HashMap<(i64, i64), Vec<f64>>,
}

impl WeightCache {
    fn new(radii: Vec<f64>, alpha: f64, hx: f64) -> Self {
        Self {
            radii,
            alpha,
            hx,
            cache: HashMap::new(),
        }
    }

    /// `|B(·,r)|^{α/Q − 1}` per scheduled radius for a given phase.
    fn weights(&mut self, phase: [f64; 2]) -> &[f64] {
        let key = ((phase[0] * 1e9).round() as i64, (phase[1] * 1e9).round() as i64);
        let (radii, alpha, hx) = (&self.radii, self.alpha, self.hx);
        self.cache.entry(key).or_insert_with(|| {
            radii
                .iter()
                .map(|&r| {
                    let m = lattice_ball_measure(r, hx, phase);
                    if m <= 0.0 {
                        0.0
                    } else if alpha == 0.0 {
                        1.0 / m
                    } else {
                        m.powf(alpha / Q - 1.0)
                    }
                })
                .collect()
        })
    }
}

fn eval_point(cols: &AbsColumns, radii: &[f64], weights: &[f64], z: [f64; 3]) -> f64 {
    let rz = h1::rho(h1::left_div(cols.anchor, z));
    let mut best = 0.0f64;
    for (&r, &w) in radii.iter().zip(weights) {
        if r <= rz - cols.r0 {
            continue;
        }
        // weights decrease with r, so no larger ball can beat `best`
        if w * cols.mass <= best {
            break;
        }
        if w > 0.0 {
            best = best.max(cols.ball_integral(z, r) * w);
        }
        if r > rz + cols.r0 {
            break;
        }
    }
    best
}

fn check_inputs(f: &Field, alpha: f64, radii: &RadiiSchedule) -> Result<Vec<f64>> {
    if !(0.0..Q).contains(&alpha) {
        return invalid(format!("fractional maximal order must lie in [0, Q), got {alpha}"));
    }
    radii.validate()?;
    let r = radii.radii();
    if r.is_empty() {
        return invalid("empty radii schedule");
    }
    if let Some(b) = &f.support_hint {
        if !f.grid().contains_ball(b, 0.0) {
            return Err(Error::OutOfBox("declared support leaves the grid box".into()));
        }
    }
    Ok(r)
}

/// `M_α f` evaluated at the cell centers of `out`.
pub fn frac_maximal_onto(f: &Field, alpha: f64, radii: &RadiiSchedule, out: &Grid) -> Result<Field> {
    let r = check_inputs(f, alpha, radii)?;
    let cols = AbsColumns::new(f);
    let mut result = Field::zeros(out);
    if cols.is_empty() {
        return Ok(result);
    }
    let mut cache = WeightCache::new(r.clone(), alpha, cols.hx);
    let [nx, ny, nt] = out.shape();
    let values = result.values_mut();
    for i in 0..nx {
        for j in 0..ny {
            let x = [out.xs[i], out.ys[j]];
            let weights = cache.weights(cols.phase(x)).to_vec();
            let base = out.index(i, j, 0);
            for k in 0..nt {
                values[base + k] = eval_point(&cols, &r, &weights, [x[0], x[1], out.ts[k]]);
            }
        }
    }
    Ok(result)
}

pub fn frac_maximal(f: &Field, alpha: f64, radii: &RadiiSchedule) -> Result<Field> {
    frac_maximal_onto(f, alpha, radii, f.grid())
}

pub fn hl_maximal(f: &Field, radii: &RadiiSchedule) -> Result<Field> {
    frac_maximal(f, 0.0, radii)
}

/// `M_α f(z)` at a single point.
pub fn frac_maximal_at(f: &Field, alpha: f64, radii: &RadiiSchedule, z: [f64; 3]) -> Result<f64> {
    let r = check_inputs(f, alpha, radii)?;
    let cols = AbsColumns::new(f);
    if cols.is_empty() {
        return Ok(0.0);
    }
    let mut cache = WeightCache::new(r.clone(), alpha, cols.hx);
    let weights = cache.weights(cols.phase([z[0], z[1]])).to_vec();
    Ok(eval_point(&cols, &r, &weights, z))
}

/// `|B(z,r)|^{α/Q−1} ∫_{B(z,r)} |f|` for one ball, under the same rule.
pub fn maximal_average(f: &Field, alpha: f64, z: [f64; 3], r: f64) -> f64 {
    let cols = AbsColumns::new(f);
    if cols.is_empty() {
        return 0.0;
    }
    let m = lattice_ball_measure(r, cols.hx, cols.phase([z[0], z[1]]));
    if m <= 0.0 {
        return 0.0;
    }
    let w = if alpha == 0.0 { 1.0 / m } else { m.powf(alpha / Q - 1.0) };
    cols.ball_integral(z, r) * w
}

/// `‖(Σⱼ (M_α fⱼ)^r)^{1/r}‖_{q(·)} / ‖(Σⱼ |fⱼ|^r)^{1/r}‖_{p(·)}` with
/// `1/q = 1/p − α/Q`.
pub fn fs_ratio(fs: &[Field], r: f64, alpha: f64, p: &ExponentFn, radii: &RadiiSchedule) -> Result<f64> {
    let Some(first) = fs.first() else {
        return invalid("fs_ratio needs at least one field");
    };
    if !(r > 1.0) || !r.is_finite() {
        return invalid(format!("fs_ratio needs r > 1, got {r}"));
    }
    if fs.iter().any(|f| !f.same_grid(first)) {
        return Err(Error::GridMismatch("fs_ratio family".into()));
    }
    let q = if alpha > 0.0 {
        sobolev_exponent(p, alpha, &GroupContext::h1())?
    } else {
        p.clone()
    };
    let n = first.values().len();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for f in fs {
        let m = frac_maximal(f, alpha, radii)?;
        for ((a, b), (mv, fv)) in num.iter_mut().zip(den.iter_mut()).zip(m.values().iter().zip(f.values())) {
            *a += mv.powf(r);
            *b += fv.abs().powf(r);
        }
    }
    let inv = 1.0 / r;
    let num = Field::from_values(first.grid(), num.into_iter().map(|v| v.powf(inv)).collect())?;
    let den = Field::from_values(first.grid(), den.into_iter().map(|v| v.powf(inv)).collect())?;
    let d = luxemburg_norm(&den, p)?.value;
    if d == 0.0 {
        return Err(Error::Degenerate("fs_ratio denominator vanishes".into()));
    }
    Ok(luxemburg_norm(&num, &q)?.value / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{constant, gaussian_bump};
    use crate::grid::{ball_indicator, build_grid, sample, GridSpec};
    use crate::group::{Ball, Point, UNIT_BALL_MEASURE_H1};
    use approx::assert_relative_eq;

    fn setup() -> (Grid, Field) {
        let g = build_grid(GridSpec::new(2.0, 2.0, 1.0 / 8.0, 1.0 / 16.0).unwrap()).unwrap();
        let f = ball_indicator(&g, &Ball::new(Point::identity(1), 1.0).unwrap());
        (g, f)
    }

    #[test]
    fn lattice_measure_approaches_analytic() {
        let m = lattice_ball_measure(1.0, 1.0 / 64.0, [0.5, 0.5]);
        assert_relative_eq!(m, UNIT_BALL_MEASURE_H1, max_relative = 1e-3);
        let m2 = lattice_ball_measure(2.0, 2.0 / 64.0, [0.5, 0.5]);
        assert_relative_eq!(m2, 16.0 * m, max_relative = 1e-12);
    }

    #[test]
    fn indicator_average_at_identity_is_one() {
        let (g, f) = setup();
        let v = frac_maximal_at(&f, 0.0, &RadiiSchedule::for_grid(g.spec()), [0.0; 3]).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_field_has_constant_maximal_function() {
        let g = build_grid(GridSpec::new(1.0, 1.0, 1.0 / 8.0, 1.0 / 8.0).unwrap()).unwrap();
        let f = sample(|_| 3.0, &g).unwrap();
        let m = hl_maximal(&f, &RadiiSchedule::new(0.125, 0.5, 4).unwrap()).unwrap();
        let c = g.index(8, 8, 8);
        assert_relative_eq!(m.values()[c], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn order_zero_matches_hardy_littlewood_exactly() {
        let g = build_grid(GridSpec::new(2.0, 2.0, 0.25, 0.25).unwrap()).unwrap();
        let f = sample(|z| (-(z.x[0] * z.x[0] + z.x[1] * z.x[1] + z.t.abs())).exp(), &g).unwrap();
        let s = RadiiSchedule::new(0.25, 8.0, 4).unwrap();
        let a = frac_maximal(&f, 0.0, &s).unwrap();
        let b = hl_maximal(&f, &s).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn fractional_maximal_of_ball_at_identity() {
        let (g, f) = setup();
        let s = RadiiSchedule::for_grid(g.spec());
        for alpha in [1.0, 2.0] {
            let v = frac_maximal_at(&f, alpha, &s, [0.0; 3]).unwrap();
            let expected = g.ball_measure(&Ball::new(Point::identity(1), 1.0).unwrap()).powf(alpha / 4.0);
            assert_relative_eq!(v, expected, max_relative = 0.05);
        }
    }

    #[test]
    fn pointwise_dominates_every_scheduled_average() {
        let (_, f) = setup();
        let s = RadiiSchedule::new(0.125, 6.0, 4).unwrap();
        let z = [0.8, -0.3, 0.9];
        let m = frac_maximal_at(&f, 1.0, &s, z).unwrap();
        for r in s.radii() {
            assert!(m >= maximal_average(&f, 1.0, z, r));
        }
    }

    #[test]
    fn scaling_and_duplicates_leave_fs_ratio_unchanged() {
        let coarse = build_grid(GridSpec::new(2.0, 2.0, 0.25, 0.25).unwrap()).unwrap();
        let f = sample(|z| if Ball::new(Point::identity(1), 1.0).unwrap().contains(z) { 1.0 } else { 0.0 }, &coarse).unwrap();
        let s = RadiiSchedule::new(0.25, 8.0, 4).unwrap();
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        let r1 = fs_ratio(std::slice::from_ref(&f), 2.0, 1.0, &p, &s).unwrap();
        let r2 = fs_ratio(&[f.scaled(3.5)], 2.0, 1.0, &p, &s).unwrap();
        let r3 = fs_ratio(&[f.clone(), f.clone()], 2.0, 1.0, &p, &s).unwrap();
        assert!(r1.is_finite() && r1 > 0.0);
        assert_relative_eq!(r1, r2, max_relative = 1e-9);
        assert_relative_eq!(r1, r3, max_relative = 1e-9);
        assert!(fs_ratio(&[], 2.0, 0.0, &constant(2.0).unwrap(), &s).is_err());
        assert!(fs_ratio(&[Field::zeros(&coarse)], 2.0, 0.0, &constant(2.0).unwrap(), &s).is_err());
    }
}
