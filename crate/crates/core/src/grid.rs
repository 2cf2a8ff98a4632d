//! Uniform midpoint grids over boxes in ℍ¹ and Haar-measure quadrature.
//!
//! Axis order is `(x₁, x₂, t)` with `t` varying fastest in the flat value
//! array. Cell centers sit at `c − L + (k + ½)h` on each axis.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::{h1, Ball, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-width of each of the two x-axes.
    pub lx: f64,
    /// Half-width of the t-axis.
    pub lt: f64,
    pub hx: f64,
    pub ht: f64,
    /// Euclidean center of the box; the origin unless a frame needs otherwise.
    #[serde(default)]
    pub center: [f64; 3],
}

impl GridSpec {
    pub fn new(lx: f64, lt: f64, hx: f64, ht: f64) -> Result<Self> {
        let spec = Self {
            lx,
            lt,
            hx,
            ht,
            center: [0.0; 3],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Box made of `2·nx_half + 1` by `2·nx_half + 1` by `2·nt_half + 1` cells,
    /// so the box center is itself a cell center.
    pub fn centered_cells(nx_half: usize, nt_half: usize, hx: f64, ht: f64) -> Result<Self> {
        Self::new((nx_half as f64 + 0.5) * hx, (nt_half as f64 + 0.5) * ht, hx, ht)
    }

    pub fn with_center(mut self, center: [f64; 3]) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lx", self.lx), ("lt", self.lt), ("hx", self.hx), ("ht", self.ht)] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("grid {name} must be positive and finite, got {v}"));
            }
        }
        if self.hx > self.lx || self.ht > self.lt {
            return invalid("grid spacing must not exceed the half-width");
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("grid center".into()));
        }
        Ok(())
    }

    /// The image of this grid under the dilation by `r` (spacings and
    /// half-widths scale like x and t respectively).
    pub fn dilated(&self, r: f64) -> Self {
        Self {
            lx: self.lx * r,
            lt: self.lt * r * r,
            hx: self.hx * r,
            ht: self.ht * r * r,
            center: h1::dilate(r, self.center),
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hx * self.ht
    }
}

/// Relative slack on `ρ⁴ < r⁴` in [`Grid::ball_cells`].
const DISCRETE_BALL_SHRINK: f64 = 1.0 - 1e-12;

fn axis_cells(half_width: f64, h: f64) -> usize {
    let ratio = 2.0 * half_width / h;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

/// A materialized grid: axis centers and flat-index helpers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    pub(crate) xs: Vec<f64>,
    pub(crate) ys: Vec<f64>,
    pub(crate) ts: Vec<f64>,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let nx = axis_cells(spec.lx, spec.hx);
    let nt = axis_cells(spec.lt, spec.ht);
    let axis = |c: f64, l: f64, h: f64, n: usize| -> Vec<f64> {
        (0..n).map(|k| c - l + (k as f64 + 0.5) * h).collect()
    };
    Ok(Grid {
        xs: axis(spec.center[0], spec.lx, spec.hx, nx),
        ys: axis(spec.center[1], spec.lx, spec.hx, nx),
        ts: axis(spec.center[2], spec.lt, spec.ht, nt),
        spec,
    })
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.xs.len(), self.ys.len(), self.ts.len()]
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spec.cell_volume()
    }

    pub fn x_centers(&self) -> &[f64] {
        &self.xs
    }

    pub fn t_centers(&self) -> &[f64] {
        &self.ts
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ys.len() + j) * self.ts.len() + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let nt = self.ts.len();
        let ny = self.ys.len();
        (idx / (ny * nt), (idx / nt) % ny, idx % nt)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.xs[i], self.ys[j], self.ts[k]]
    }

    pub fn center_point(&self, idx: usize) -> Point {
        Point::from_h1(self.center(idx))
    }

    /// Euclidean extent actually covered by the cells, per axis `[lo, hi]`.
    pub fn extent(&self) -> [[f64; 2]; 3] {
        let s = &self.spec;
        let span = |c: f64, l: f64, h: f64, n: usize| [c - l, c - l + n as f64 * h];
        [
            span(s.center[0], s.lx, s.hx, self.xs.len()),
            span(s.center[1], s.lx, s.hx, self.ys.len()),
            span(s.center[2], s.lt, s.ht, self.ts.len()),
        ]
    }

    /// Euclidean bounding box of a Koranyi ball.
    pub fn ball_bounds(ball: &Ball) -> [[f64; 2]; 3] {
        let c = ball.center.as_h1();
        let d = ball.radius;
        let xnorm = (c[0] * c[0] + c[1] * c[1]).sqrt();
        let tw = 0.5 * xnorm * d + 0.25 * d * d;
        [[c[0] - d, c[0] + d], [c[1] - d, c[1] + d], [c[2] - tw, c[2] + tw]]
    }

    /// Whether the box holds `ball` with at least `margin_cells` cells to spare.
    pub fn contains_ball(&self, ball: &Ball, margin_cells: f64) -> bool {
        let ext = self.extent();
        let b = Self::ball_bounds(ball);
        let h = [self.spec.hx, self.spec.hx, self.spec.ht];
        (0..3).all(|a| b[a][0] >= ext[a][0] + margin_cells * h[a] && b[a][1] <= ext[a][1] - margin_cells * h[a])
    }

    /// Index range of t-cells whose centers lie strictly inside `(lo, hi)`.
    #[inline]
    pub(crate) fn t_range_open(&self, lo: f64, hi: f64) -> (usize, usize) {
        let nt = self.ts.len();
        let t0 = self.ts[0];
        let ht = self.spec.ht;
        let a = ((lo - t0) / ht).floor() + 1.0;
        let b = ((hi - t0) / ht).ceil() - 1.0;
        let a = a.max(0.0).min(nt as f64) as usize;
        let b = (b + 1.0).max(0.0).min(nt as f64) as usize;
        (a, b.max(a))
    }

    /// Flat indices of cells whose centers lie in `ball`, in index order.
    /// Centers within rounding of the boundary sphere count as outside, so
    /// lattice points exactly on the sphere stay excluded after translation.
    pub fn ball_cells(&self, ball: &Ball) -> Vec<usize> {
        let c = ball.center.as_h1();
        let r = ball.radius;
        let r4 = r.powi(4);
        let mut out = Vec::new();
        for (i, &x1) in self.xs.iter().enumerate() {
            let d1 = x1 - c[0];
            if d1.abs() >= r {
                continue;
            }
            for (j, &x2) in self.ys.iter().enumerate() {
                let d2 = x2 - c[1];
                let dx2 = d1 * d1 + d2 * d2;
                if dx2 * dx2 >= r4 {
                    continue;
                }
                let mid = c[2] + h1::symplectic([c[0], c[1]], [x1, x2]);
                let w = (r4 - dx2 * dx2).sqrt() / 4.0;
                let (ka, kb) = self.t_range_open(mid - w - self.spec.ht, mid + w + self.spec.ht);
                for k in ka..kb {
                    let idx = self.index(i, j, k);
                    if h1::rho4(h1::left_div(c, [x1, x2, self.ts[k]])) < r4 * DISCRETE_BALL_SHRINK {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }

    /// Discrete measure of a ball: number of cells with center inside times cell volume.
    pub fn ball_measure(&self, ball: &Ball) -> f64 {
        self.ball_cells(ball).len() as f64 * self.cell_volume()
    }

    /// Whether the ball is at least `cells` cells across along x and along t.
    pub fn resolves(&self, radius: f64, cells: f64) -> bool {
        2.0 * radius / self.spec.hx >= cells && 0.5 * radius * radius / self.spec.ht >= cells
    }

    /// Nearest cell to a point, if the point lies in the covered box.
    pub fn locate(&self, c: [f64; 3]) -> Option<usize> {
        let ext = self.extent();
        let h = [self.spec.hx, self.spec.hx, self.spec.ht];
        let n = self.shape();
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            if c[a] < ext[a][0] || c[a] > ext[a][1] {
                return None;
            }
            ijk[a] = (((c[a] - ext[a][0]) / h[a]).floor() as usize).min(n[a] - 1);
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }

    /// Trilinear interpolation of cell-centered values; zero outside the box.
    pub fn interpolate(&self, values: &[f64], c: [f64; 3]) -> f64 {
        let ext = self.extent();
        let h = [self.spec.hx, self.spec.hx, self.spec.ht];
        let n = self.shape();
        let mut base = [0isize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            if c[a] < ext[a][0] || c[a] > ext[a][1] {
                return 0.0;
            }
            let u = (c[a] - ext[a][0]) / h[a] - 0.5;
            let f = u.floor();
            base[a] = f as isize;
            frac[a] = u - f;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut ijk = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                let k = base[a] + bit as isize;
                if k < 0 || k >= n[a] as isize {
                    inside = false;
                    break;
                }
                ijk[a] = k as usize;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if inside && w != 0.0 {
                acc += w * values[self.index(ijk[0], ijk[1], ijk[2])];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    pub support_hint: Option<Ball>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            support_hint: None,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at cell {k}")));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            support_hint: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_support(mut self, ball: Ball) -> Self {
        self.support_hint = Some(ball);
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            support_hint: self.support_hint.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }

    /// `a·self + b·other` on a shared grid.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch("linear combination of fields".into()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            support_hint: None,
        })
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule `Lᵖ` norm for a constant exponent `p ≥ 1`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let vol = self.grid.cell_volume();
        let s: f64 = sum_ordered(self.values.iter().map(|v| v.abs().powf(p)), self.values.len());
        (s * vol).powf(1.0 / p)
    }

    /// Same function sampled on the dilated grid, reading values as `f(δ⁻¹·z)`.
    pub fn dilated(&self, r: f64) -> Result<Self> {
        let grid = build_grid(self.grid.spec().dilated(r))?;
        if grid.shape() != self.grid.shape() {
            return Err(Error::GridMismatch("dilated grid changed shape".into()));
        }
        Ok(Self {
            grid,
            values: self.values.clone(),
            support_hint: None,
        })
    }
}

pub fn sample<F>(f: F, grid: &Grid) -> Result<Field>
where
    F: Fn(&Point) -> f64,
{
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let p = grid.center_point(idx);
        let v = f(&p);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("sample at {:?}", p.as_h1())));
        }
        values.push(v);
    }
    Ok(Field {
        grid: grid.clone(),
        values,
        support_hint: None,
    })
}

/// Sample a function declared to vanish outside `support`; the box must hold
/// the support with at least one cell of margin.
pub fn sample_supported<F>(f: F, grid: &Grid, support: &Ball) -> Result<Field>
where
    F: Fn(&Point) -> f64,
{
    if !grid.contains_ball(support, 1.0) {
        return Err(Error::OutOfBox(format!(
            "support ball of radius {} at {:?} needs one cell of margin",
            support.radius,
            support.center.as_h1()
        )));
    }
    Ok(sample(f, grid)?.with_support(support.clone()))
}

/// Indicator of the cells whose centers lie in `ball`.
pub fn ball_indicator(grid: &Grid, ball: &Ball) -> Field {
    let mut f = Field::zeros(grid);
    for idx in grid.ball_cells(ball) {
        f.values[idx] = 1.0;
    }
    f.support_hint = Some(ball.clone());
    f
}

pub(crate) fn sum_ordered(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    if count > 1_000_000 {
        // Neumaier compensated summation.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    } else {
        values.sum()
    }
}

pub fn integrate(field: &Field) -> f64 {
    sum_ordered(field.values.iter().copied(), field.values.len()) * field.grid.cell_volume()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub spec: GridSpec,
    pub shape: [usize; 3],
    pub endianness: String,
    pub dtype: String,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_hint: Option<Ball>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn sidecar_path(bin_path: &Path) -> PathBuf {
    bin_path.with_extension("json")
}

/// Write `field` as little-endian f64 values at `bin_path` plus a JSON sidecar
/// next to it (same stem, `.json` extension).
pub fn export_field(field: &Field, bin_path: &Path, extra: serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(bin_path)?);
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let sidecar = FieldSidecar {
        spec: *field.spec(),
        shape: field.grid.shape(),
        endianness: "little".into(),
        dtype: "f64".into(),
        order: "x1,x2,t (t fastest)".into(),
        support_hint: field.support_hint.clone(),
        extra,
    };
    let s = File::create(sidecar_path(bin_path))?;
    serde_json::to_writer_pretty(BufWriter::new(s), &sidecar)?;
    Ok(())
}

pub fn import_field(bin_path: &Path) -> Result<(Field, FieldSidecar)> {
    let sidecar: FieldSidecar =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(bin_path))?))?;
    if sidecar.endianness != "little" || sidecar.dtype != "f64" {
        return invalid(format!(
            "unsupported field encoding {} {}",
            sidecar.endianness, sidecar.dtype
        ));
    }
    let grid = build_grid(sidecar.spec)?;
    if grid.shape() != sidecar.shape {
        return Err(Error::GridMismatch(format!(
            "sidecar shape {:?} disagrees with spec shape {:?}",
            sidecar.shape,
            grid.shape()
        )));
    }
    let mut bytes = Vec::new();
    BufReader::new(File::open(bin_path)?).read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::DimensionMismatch {
            expected: grid.len() * 8,
            got: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut field = Field::from_values(&grid, values)?;
    field.support_hint = sidecar.support_hint.clone();
    Ok((field, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{koranyi_norm, UNIT_BALL_MEASURE_H1};
    use approx::assert_relative_eq;

    #[test]
    fn midpoint_centers() {
        let g = build_grid(GridSpec::new(1.0, 0.5, 0.5, 0.25).unwrap()).unwrap();
        assert_eq!(g.x_centers(), &[-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.t_centers().len(), 4);
        let spec = GridSpec::new(1.0, 1.0, 0.1, 0.05).unwrap();
        assert_relative_eq!(spec.cell_volume(), 5e-4, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(0.0, 1.0, 0.1, 0.1).is_err());
        assert!(GridSpec::new(1.0, 1.0, -0.1, 0.1).is_err());
        assert!(GridSpec::new(1.0, 1.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = build_grid(GridSpec::new(1.0, 1.0, 0.25, 0.5).unwrap()).unwrap();
        for idx in [0, 7, 13, g.len() - 1] {
            let (i, j, k) = g.unravel(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn constant_integrates_to_box_volume() {
        let g = build_grid(GridSpec::new(1.5, 0.75, 0.25, 0.125).unwrap()).unwrap();
        let f = sample(|_| 2.5, &g).unwrap();
        assert_relative_eq!(integrate(&f), 2.5 * 3.0 * 3.0 * 1.5, max_relative = 1e-12);
    }

    #[test]
    fn sampling_the_ball_indicator() {
        let g = build_grid(GridSpec::new(1.25, 0.5, 0.125, 0.0625).unwrap()).unwrap();
        let b = Ball::new(Point::identity(1), 1.0).unwrap();
        let f = sample(|z| if b.contains(z) { 1.0 } else { 0.0 }, &g).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(f.values(), ball_indicator(&g, &b).values());
    }

    #[test]
    fn ball_cells_match_brute_force_for_shifted_center() {
        let g = build_grid(GridSpec::new(2.0, 1.5, 0.125, 0.0625).unwrap()).unwrap();
        let b = Ball::new(Point::h1(0.6, -0.4, 0.3), 0.9).unwrap();
        let fast = g.ball_cells(&b);
        let r4 = b.radius.powi(4) * DISCRETE_BALL_SHRINK;
        let brute: Vec<usize> = (0..g.len())
            .filter(|&i| h1::rho4(h1::left_div(b.center.as_h1(), g.center(i))) < r4)
            .collect();
        assert_eq!(fast, brute);
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let g = build_grid(GridSpec::new(1.0, 1.0, 0.5, 0.5).unwrap()).unwrap();
        assert!(sample(|z| 1.0 / koranyi_norm(z).min(0.0), &g).is_err());
    }

    #[test]
    fn support_needs_margin() {
        let g = build_grid(GridSpec::new(1.0, 0.3, 0.125, 0.05).unwrap()).unwrap();
        let b = Ball::new(Point::identity(1), 1.0).unwrap();
        assert!(sample_supported(|_| 0.0, &g, &b).is_err());
        let g = build_grid(GridSpec::new(1.25, 0.5, 0.125, 0.05).unwrap()).unwrap();
        assert!(sample_supported(|_| 0.0, &g, &b).is_ok());
    }

    #[test]
    fn ball_measure_is_close_to_analytic() {
        let g = build_grid(GridSpec::new(1.1, 0.3, 1.0 / 32.0, 1.0 / 64.0).unwrap()).unwrap();
        let b = Ball::new(Point::identity(1), 1.0).unwrap();
        assert_relative_eq!(g.ball_measure(&b), UNIT_BALL_MEASURE_H1, max_relative = 0.02);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = build_grid(GridSpec::new(1.0, 1.0, 0.25, 0.125).unwrap()).unwrap();
        let f = sample(|z| 1.0 + 2.0 * z.x[0] - z.x[1] + 0.5 * z.t, &g).unwrap();
        let c = [0.1, -0.3, 0.27];
        assert_relative_eq!(g.interpolate(f.values(), c), 1.0 + 0.2 + 0.3 + 0.135, max_relative = 1e-12);
    }

    #[test]
    fn export_then_import() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(GridSpec::new(1.0, 0.5, 0.25, 0.25).unwrap()).unwrap();
        let f = sample(|z| z.x[0] * z.t + 1.0, &g).unwrap();
        let path = dir.path().join("f.bin");
        export_field(&f, &path, serde_json::Value::Null).unwrap();
        let (back, sidecar) = import_field(&path).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(sidecar.shape, g.shape());
        assert_eq!(sidecar.endianness, "little");
    }
}
