//! Group convolution `(f∗K)(z) = ∫ f(w) K(w⁻¹z) dw` by direct quadrature.
//!
//! For a source column at `y` and a target column at `x`, `w⁻¹z` has
//! horizontal part `d = x − y` and vertical part `t − s − yᵀJd`. When source
//! and target share the t-spacing the kernel along the pair is a function of
//! `t − s` alone, so each column pair costs one kernel vector and one 1D
//! correlation.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::group::h1;

use super::Kernel;

struct SourceColumn {
    y: [f64; 2],
    /// First t-index of the stored run.
    m0: usize,
    /// `f·cellvol` along the run.
    vals: Vec<f64>,
}

fn source_columns(f: &Field) -> Vec<SourceColumn> {
    let grid = f.grid();
    let [nx, ny, nt] = grid.shape();
    let vol = grid.cell_volume();
    let vals = f.values();
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let base = grid.index(i, j, 0);
            let column = &vals[base..base + nt];
            let Some(lo) = column.iter().position(|v| *v != 0.0) else { continue };
            let hi = column.iter().rposition(|v| *v != 0.0).unwrap_or(lo);
            out.push(SourceColumn {
                y: [grid.xs[i], grid.ys[j]],
                m0: lo,
                vals: column[lo..=hi].iter().map(|v| v * vol).collect(),
            });
        }
    }
    out
}

fn check_support(f: &Field, out: &Grid) -> Result<()> {
    if let Some(b) = &f.support_hint {
        if !out.contains_ball(b, 0.0) {
            return Err(Error::OutOfBox("output grid does not cover the declared support".into()));
        }
    }
    Ok(())
}

/// True when `w⁻¹z` falls in the source cell around `w`.
#[inline]
fn in_singular_cell(v: [f64; 3], hx: f64, ht: f64) -> bool {
    v[0].abs() < 0.5 * hx && v[1].abs() < 0.5 * hx && v[2].abs() < 0.5 * ht
}

// 8-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Kernel weight of a non-singular cell at horizontal offset `d` and vertical
/// offset `tau`. Riesz kernels close to the vertical axis vary strongly along
/// the cell's t-extent, so there the weight is the t-average over the cell,
/// computed in the variable `t = (|d|²/4)·sinh u`.
#[inline]
fn cell_kernel(k: &Kernel, d: [f64; 2], dd: f64, dd2: f64, tau: f64, ht: f64) -> f64 {
    if !k.is_riesz() {
        return k.eval_h1([d[0], d[1], tau]);
    }
    let (alpha, q) = (k.alpha(), k.q() as f64);
    if dd >= 8.0 * ht || tau.abs() >= 8.0 * ht || dd == 0.0 {
        return super::kernel::riesz_from_rho4(dd2 + 16.0 * tau * tau, alpha, q);
    }
    // ∫ (a² + 16t²)^{e/4} dt = (a^{e/2+1}/4) ∫ cosh(u)^{e/2+1} du
    let a = dd;
    let p = 0.5 * (alpha - q) + 1.0;
    let u0 = (4.0 * (tau - 0.5 * ht) / a).asinh();
    let u1 = (4.0 * (tau + 0.5 * ht) / a).asinh();
    let panels = 1 + ((u1 - u0) / 2.0).ceil() as usize;
    let h = (u1 - u0) / panels as f64;
    let mut sum = 0.0;
    for i in 0..panels {
        let mid = u0 + (i as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(GL_W) {
            let off = 0.5 * h * x;
            sum += w * ((mid - off).cosh().powf(p) + (mid + off).cosh().powf(p));
        }
    }
    sum * 0.5 * h * a.powf(p) / (4.0 * ht)
}

pub fn convolve(f: &Field, k: &Kernel) -> Result<Field> {
    convolve_onto(f, k, f.grid())
}

/// `f∗K` at the cell centers of `out`.
pub fn convolve_onto(f: &Field, k: &Kernel, out: &Grid) -> Result<Field> {
    check_support(f, out)?;
    let src = f.grid().spec();
    let aligned = (out.spec().ht - src.ht).abs() <= 1e-12 * src.ht;
    let cols = source_columns(f);
    let mut result = Field::zeros(out);
    if cols.is_empty() {
        return Ok(result);
    }
    if aligned {
        fast_path(f, k, out, &cols, result.values_mut());
    } else {
        for idx in 0..out.len() {
            let z = out.center(idx);
            result.values_mut()[idx] = point_sum(f, k, &cols, z);
        }
    }
    if result.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("convolution output".into()));
    }
    Ok(result)
}

fn fast_path(f: &Field, k: &Kernel, out: &Grid, cols: &[SourceColumn], values: &mut [f64]) {
    let src = f.grid();
    let spec = src.spec();
    let (hx, ht) = (spec.hx, spec.ht);
    let singular = k.singular_value(spec.cell_volume());
    let [nx, ny, nt] = out.shape();
    // t_out[k] − s_in[m] = (k − m)·ht + off
    let off = out.ts[0] - src.ts[0];
    let mut kv: Vec<f64> = Vec::new();
    let mut acc = vec![0.0; nt];
    for i in 0..nx {
        for j in 0..ny {
            let x = [out.xs[i], out.ys[j]];
            acc.iter_mut().for_each(|a| *a = 0.0);
            for col in cols {
                let d = [x[0] - col.y[0], x[1] - col.y[1]];
                let c = h1::symplectic(col.y, d);
                let len = col.vals.len();
                // j = k − m ranges over [−(m0+len−1), nt−1−m0]
                let j_min = -((col.m0 + len - 1) as i64);
                let j_max = nt as i64 - 1 - col.m0 as i64;
                let n = (j_max - j_min + 1) as usize;
                kv.clear();
                kv.reserve(n);
                let dd = d[0] * d[0] + d[1] * d[1];
                let dd2 = dd * dd;
                let near_axis = d[0].abs() < 0.5 * hx && d[1].abs() < 0.5 * hx;
                for jj in 0..n {
                    let tau = (j_min + jj as i64) as f64 * ht + off - c;
                    let v = if near_axis && tau.abs() < 0.5 * ht {
                        singular
                    } else {
                        cell_kernel(k, d, dd, dd2, tau, ht)
                    };
                    kv.push(v);
                }
                for (mm, &fv) in col.vals.iter().enumerate() {
                    // output k pairs with kv index k − (m0 + mm) − j_min
                    let start = len - 1 - mm;
                    let window = &kv[start..start + nt];
                    for (a, &kk) in acc.iter_mut().zip(window) {
                        *a += fv * kk;
                    }
                }
            }
            let base = out.index(i, j, 0);
            values[base..base + nt].copy_from_slice(&acc);
        }
    }
}

fn point_sum(f: &Field, k: &Kernel, cols: &[SourceColumn], z: [f64; 3]) -> f64 {
    let src = f.grid();
    let spec = src.spec();
    let singular = k.singular_value(spec.cell_volume());
    let mut acc = 0.0;
    for col in cols {
        for (mm, &fv) in col.vals.iter().enumerate() {
            let w = [col.y[0], col.y[1], src.ts[col.m0 + mm]];
            let v = h1::left_div(w, z);
            let kk = if in_singular_cell(v, spec.hx, spec.ht) {
                singular
            } else {
                let d = [v[0], v[1]];
                let dd = d[0] * d[0] + d[1] * d[1];
                cell_kernel(k, d, dd, dd * dd, v[2], spec.ht)
            };
            acc += fv * kk;
        }
    }
    acc
}

/// `(f∗K)(z)` at a single point.
pub fn convolve_at(f: &Field, k: &Kernel, z: [f64; 3]) -> Result<f64> {
    let cols = source_columns(f);
    let v = point_sum(f, k, &cols, z);
    if !v.is_finite() {
        return Err(Error::NonFinite("convolution value".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ball_indicator, build_grid, sample, GridSpec};
    use crate::group::{Ball, GroupContext, Point, UNIT_BALL_MEASURE_H1};
    use crate::operators::riesz_kernel;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        build_grid(GridSpec::centered_cells(10, 12, 0.125, 0.0625).unwrap()).unwrap()
    }

    #[test]
    fn fast_path_matches_pointwise_sum() {
        let g = grid();
        let f = sample(|z| (-(z.x[0] * z.x[0] + 2.0 * z.x[1] * z.x[1]) - 3.0 * z.t * z.t).exp() * (1.0 + z.x[0]), &g).unwrap();
        let k = riesz_kernel(1.0, &GroupContext::h1()).unwrap();
        let full = convolve(&f, &k).unwrap();
        for idx in [0, 17, g.len() / 2, g.len() - 5] {
            let z = g.center(idx);
            assert_relative_eq!(full.values()[idx], convolve_at(&f, &k, z).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn fast_path_matches_pointwise_on_shifted_output() {
        let g = grid();
        let f = sample(|z| (1.0 - z.x[0] * z.x[0]).max(0.0) * (0.5 - z.t.abs()).max(0.0), &g).unwrap();
        let k = riesz_kernel(2.0, &GroupContext::h1()).unwrap();
        let out = build_grid(GridSpec::centered_cells(6, 8, 0.125, 0.0625).unwrap().with_center([0.3, -0.1, 0.03125])).unwrap();
        let conv = convolve_onto(&f, &k, &out).unwrap();
        for idx in [3, out.len() / 3, out.len() - 1] {
            assert_relative_eq!(conv.values()[idx], convolve_at(&f, &k, out.center(idx)).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn ball_integral_of_riesz_kernel() {
        // ∫_{B(e,1)} ρ^{α−Q} = (Q/α)|B(e,1)|
        let g = build_grid(GridSpec::centered_cells(17, 16, 1.0 / 16.0, 1.0 / 64.0).unwrap()).unwrap();
        let f = ball_indicator(&g, &Ball::new(Point::identity(1), 1.0).unwrap());
        for (alpha, tol) in [(1.0, 0.03), (2.0, 0.01), (3.0, 0.01)] {
            let k = riesz_kernel(alpha, &GroupContext::h1()).unwrap();
            let v = convolve_at(&f, &k, [0.0; 3]).unwrap();
            assert_relative_eq!(v, 4.0 / alpha * UNIT_BALL_MEASURE_H1, max_relative = tol);
        }
    }

    #[test]
    fn linear_in_the_field() {
        let g = grid();
        let a = sample(|z| (-(z.x[0] * z.x[0] + z.x[1] * z.x[1] + 4.0 * z.t.abs())).exp(), &g).unwrap();
        let b = sample(|z| z.x[1] * (-(z.x[0] * z.x[0] + z.x[1] * z.x[1]) - z.t * z.t).exp(), &g).unwrap();
        let k = riesz_kernel(1.5, &GroupContext::h1()).unwrap();
        let lhs = convolve(&a.combine(2.0, &b, -3.0).unwrap(), &k).unwrap();
        let rhs = convolve(&a, &k).unwrap().combine(2.0, &convolve(&b, &k).unwrap(), -3.0).unwrap();
        let scale = lhs.sup_abs();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }
}
