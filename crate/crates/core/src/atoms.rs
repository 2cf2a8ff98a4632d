//! `(p(·), p₀, D)`-atoms: construction, validation, translation and finite sums.
//!
//! An atom on `B(c, δ)` is stored together with an analytic recipe
//!
//! ```text
//! a(u) = s · φ(v) · (P(v) − Σ_J c_J v^J),   v = δ⁻¹·(c⁻¹·u),   φ(v) = exp(1 − 1/(1 − ρ(v)⁴))
//! ```
//!
//! so that translates and dilates can be evaluated exactly instead of
//! interpolated. The coefficients `c_J` come from the normal equations of the
//! `φ`-weighted least-squares fit of `P` by `{v^J : d(J) ≤ D}` over the ball's
//! cells, which makes every discrete moment `Σ a(u)·u^I` with `d(I) ≤ D`
//! vanish. Polynomials of homogeneous degree `≤ D` in `v` and in the global
//! coordinates span the same space, so the local basis only improves the
//! conditioning.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exponent::{ExponentFn, ExponentSpec};
use crate::grid::{build_grid, export_field, import_field, Field, Grid};
use crate::group::{h1, monomial, Ball, GroupContext, MultiIndex, Point};
use crate::luxemburg::ball_indicator_norm;

/// Cells a ball must span along x and along t before an atom is built on it.
pub const ATOM_MIN_CELLS: f64 = 8.0;
/// Default relative slack on the size axiom.
pub const SIZE_RTOL: f64 = 1e-8;
/// Default slack on the normalized moments.
pub const MOMENT_RTOL: f64 = 1e-10;
/// Slack for atoms that were resampled by a translation.
pub const RESAMPLE_TOL: f64 = 1e-6;

const MAX_SEED_ATTEMPTS: u64 = 8;
/// Residual-to-seed ratio below which the projection counts as annihilating.
const DEGENERATE_RATIO: f64 = 1e-6;

type Terms = Vec<([u32; 3], f64)>;

fn eval_terms(terms: &[([u32; 3], f64)], v: [f64; 3]) -> f64 {
    terms
        .iter()
        .map(|(e, c)| c * v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32))
        .sum()
}

fn exponents_up_to(degree: u32) -> Vec<[u32; 3]> {
    MultiIndex::up_to_degree(&GroupContext::h1(), degree)
        .into_iter()
        .map(|i| [i.0[0], i.0[1], i.0[2]])
        .collect()
}

#[inline]
fn mono(e: [u32; 3], v: [f64; 3]) -> f64 {
    v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32)
}

/// `exp(1 − 1/(1 − s))` for `s = ρ⁴ < 1`, else 0.
#[inline]
fn bump(rho4: f64) -> f64 {
    if rho4 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - rho4)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecipe {
    pub center: [f64; 3],
    pub delta: f64,
    /// Seed polynomial `P` in local coordinates.
    pub seed_poly: Terms,
    /// Removed moment component `Σ c_J v^J`.
    pub moments: Terms,
    pub scale: f64,
}

impl AtomRecipe {
    #[inline]
    fn local(&self, u: [f64; 3]) -> [f64; 3] {
        h1::dilate(1.0 / self.delta, h1::left_div(self.center, u))
    }

    /// Unscaled profile at local coordinates `v`.
    #[inline]
    fn profile(&self, v: [f64; 3]) -> f64 {
        let b = bump(h1::rho4(v));
        if b == 0.0 {
            0.0
        } else {
            b * (eval_terms(&self.seed_poly, v) - eval_terms(&self.moments, v))
        }
    }

    pub fn eval(&self, u: [f64; 3]) -> f64 {
        self.scale * self.profile(self.local(u))
    }

    /// Recipe of `u ↦ a(z0·u)`.
    pub fn translated(&self, z0: [f64; 3]) -> Self {
        Self {
            center: h1::left_div(z0, self.center),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Seed requested by the caller.
    pub seed: u64,
    /// Seed that produced a non-degenerate projection.
    pub seed_used: u64,
    /// `‖·‖_{p₀}` before scaling.
    pub raw_norm: f64,
    pub scale: f64,
    /// `|B|^{1/p₀}/‖χ_B‖_{p(·)}` over the discrete ball.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub field: Field,
    pub ball: Ball,
    pub p0: f64,
    pub d: u32,
    pub exponent: ExponentFn,
    pub normalization: Normalization,
    pub recipe: AtomRecipe,
}

/// `|B|^{1/p₀}/‖χ_B‖_{p(·)}` with both measures taken on the grid.
pub fn size_bound(grid: &Grid, ball: &Ball, p: &ExponentFn, p0: f64) -> Result<f64> {
    let measure = grid.ball_measure(ball);
    let chi = ball_indicator_norm(grid, ball, p)?.value;
    Ok(measure.powf(1.0 / p0) / chi)
}

fn p0_norm(values: &[f64], p0: f64, vol: f64) -> f64 {
    (values.iter().map(|v| v.abs().powf(p0)).sum::<f64>() * vol).powf(1.0 / p0)
}

fn seed_polynomial(seed: u64, d: u32) -> Terms {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    exponents_up_to(d + 2)
        .into_iter()
        .map(|e| (e, rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Weighted least-squares coefficients of `target` on `basis`, with one step
/// of iterative refinement.
fn weighted_fit(rows: &[Vec<f64>], weights: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    let m = rows.first().map_or(0, Vec::len);
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for (row, w) in rows.iter().zip(weights) {
        for a in 0..m {
            let wa = w * row[a];
            for b in 0..m {
                gram[(a, b)] += wa * row[b];
            }
        }
    }
    let lu = gram.clone().lu();
    let rhs = |resid: &dyn Fn(usize) -> f64| {
        let mut r = DVector::<f64>::zeros(m);
        for (i, (row, w)) in rows.iter().zip(weights).enumerate() {
            let v = w * resid(i);
            for a in 0..m {
                r[a] += v * row[a];
            }
        }
        r
    };
    let b = rhs(&|i| target[i]);
    let mut c = lu
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("moment Gram matrix is singular".into()))?;
    let fitted = |c: &DVector<f64>, i: usize| rows[i].iter().zip(c.iter()).map(|(x, y)| x * y).sum::<f64>();
    let r = rhs(&|i| target[i] - fitted(&c, i));
    if let Some(dc) = lu.solve(&r) {
        c += dc;
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("moment coefficients".into()));
    }
    Ok(c.iter().copied().collect())
}

/// A seed-random atom on `ball` whose moments of homogeneous degree `≤ d`
/// vanish on `grid` and whose `L^{p₀}` norm meets the size bound with equality.
pub fn make_atom(ball: &Ball, p: &ExponentFn, p0: f64, d: u32, seed: u64, grid: &Grid) -> Result<Atom> {
    if !(p0 > 1.0) || !p0.is_finite() {
        return invalid(format!("atoms need p0 > 1, got {p0}"));
    }
    if ball.center.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: ball.center.n(),
        });
    }
    if !grid.resolves(ball.radius, ATOM_MIN_CELLS) {
        return Err(Error::Unresolved(format!(
            "atom ball of radius {} spans fewer than {ATOM_MIN_CELLS} cells",
            ball.radius
        )));
    }
    if !grid.contains_ball(ball, 1.0) {
        return Err(Error::OutOfBox("atom ball needs one cell of margin inside the grid".into()));
    }
    let cells = grid.ball_cells(ball);
    let shell = AtomRecipe {
        center: ball.center.as_h1(),
        delta: ball.radius,
        seed_poly: Vec::new(),
        moments: Vec::new(),
        scale: 1.0,
    };
    let locals: Vec<[f64; 3]> = cells.iter().map(|&i| shell.local(grid.center(i))).collect();
    let weights: Vec<f64> = locals.iter().map(|v| bump(h1::rho4(*v))).collect();
    let basis = exponents_up_to(d);
    let rows: Vec<Vec<f64>> = locals.iter().map(|v| basis.iter().map(|e| mono(*e, *v)).collect()).collect();

    for attempt in 0..MAX_SEED_ATTEMPTS {
        let seed_used = seed.wrapping_add(attempt);
        let seed_poly = seed_polynomial(seed_used, d);
        let target: Vec<f64> = locals.iter().map(|v| eval_terms(&seed_poly, *v)).collect();
        let coeffs = weighted_fit(&rows, &weights, &target)?;
        let recipe = AtomRecipe {
            seed_poly,
            moments: basis.iter().copied().zip(coeffs).collect(),
            ..shell.clone()
        };
        let raw: Vec<f64> = locals.iter().map(|v| recipe.profile(*v)).collect();
        let seed_size = target.iter().zip(&weights).map(|(t, w)| (w * t).abs()).fold(0.0, f64::max);
        let raw_size = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(raw_size > DEGENERATE_RATIO * seed_size) {
            continue;
        }
        let vol = grid.cell_volume();
        let raw_norm = p0_norm(&raw, p0, vol);
        let target_norm = size_bound(grid, ball, p, p0)?;
        let scale = target_norm / raw_norm;
        let recipe = AtomRecipe { scale, ..recipe };
        let mut field = Field::zeros(grid);
        for (&i, v) in cells.iter().zip(&locals) {
            field.values_mut()[i] = recipe.scale * recipe.profile(*v);
        }
        return Ok(Atom {
            field: field.with_support(ball.clone()),
            ball: ball.clone(),
            p0,
            d,
            exponent: p.clone(),
            normalization: Normalization {
                seed,
                seed_used,
                raw_norm,
                scale,
                target: target_norm,
            },
            recipe,
        });
    }
    Err(Error::Degenerate(format!(
        "moment projection annihilated seeds {seed}..{}",
        seed.wrapping_add(MAX_SEED_ATTEMPTS - 1)
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomTolerances {
    pub size_rtol: f64,
    pub moment_rtol: f64,
}

impl Default for AtomTolerances {
    fn default() -> Self {
        Self {
            size_rtol: SIZE_RTOL,
            moment_rtol: MOMENT_RTOL,
        }
    }
}

impl AtomTolerances {
    pub fn resampled() -> Self {
        Self {
            size_rtol: RESAMPLE_TOL,
            moment_rtol: RESAMPLE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: String,
    pub measured: f64,
    pub bound: f64,
    /// Distance to failure; negative when violated.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub support: AxiomCheck,
    pub size: AxiomCheck,
    pub moments: AxiomCheck,
    pub pass: bool,
}

pub fn validate_atom(f: &Field, ball: &Ball, p: &ExponentFn, p0: f64, d: u32) -> Result<AtomReport> {
    validate_atom_with(f, ball, p, p0, d, AtomTolerances::default())
}

/// Per-axiom verdicts for `f` as a `(p(·), p₀, D)`-atom on `ball`.
///
/// Moments are measured as `|Σ f·z^I·vol| / (‖f‖₁·max_B |z^I|)`.
pub fn validate_atom_with(
    f: &Field,
    ball: &Ball,
    p: &ExponentFn,
    p0: f64,
    d: u32,
    tol: AtomTolerances,
) -> Result<AtomReport> {
    let grid = f.grid();
    let cells = grid.ball_cells(ball);
    let vol = grid.cell_volume();
    let values = f.values();

    let mut inside = vec![false; grid.len()];
    for &i in &cells {
        inside[i] = true;
    }
    let outside = values
        .iter()
        .zip(&inside)
        .filter(|(_, &ins)| !ins)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let support = AxiomCheck {
        axiom: "a1 support".into(),
        measured: outside,
        bound: 0.0,
        slack: -outside,
        pass: outside == 0.0,
    };

    let norm = p0_norm(values, p0, vol);
    let bound = size_bound(grid, ball, p, p0)?;
    let size = AxiomCheck {
        axiom: "a2 size".into(),
        measured: norm,
        bound,
        slack: bound / norm - 1.0,
        pass: norm <= bound * (1.0 + tol.size_rtol),
    };

    let l1: f64 = cells.iter().map(|&i| values[i].abs()).sum::<f64>() * vol;
    let mut worst = 0.0f64;
    if l1 > 0.0 {
        let points: Vec<Point> = cells.iter().map(|&i| grid.center_point(i)).collect();
        for index in MultiIndex::up_to_degree(&GroupContext::h1(), d) {
            let mut moment = 0.0;
            let mut scale = 0.0f64;
            for (&i, z) in cells.iter().zip(&points) {
                let m = monomial(&index, z);
                moment += values[i] * m;
                scale = scale.max(m.abs());
            }
            // values outside the ball belong to the support check, but count them
            // here too so a field that leaks cannot pass on moments alone
            let leak: f64 = values
                .iter()
                .enumerate()
                .filter(|(i, v)| !inside[*i] && **v != 0.0)
                .map(|(i, v)| v * monomial(&index, &grid.center_point(i)))
                .sum();
            let rel = ((moment + leak) * vol).abs() / (l1 * scale.max(f64::MIN_POSITIVE));
            worst = worst.max(rel);
        }
    }
    let moments = AxiomCheck {
        axiom: format!("a3 moments d(I) <= {d}"),
        measured: worst,
        bound: tol.moment_rtol,
        slack: tol.moment_rtol - worst,
        pass: l1 > 0.0 && worst <= tol.moment_rtol,
    };
    let pass = support.pass && size.pass && moments.pass;
    Ok(AtomReport {
        support,
        size,
        moments,
        pass,
    })
}

impl Atom {
    pub fn report(&self) -> Result<AtomReport> {
        validate_atom(&self.field, &self.ball, &self.exponent, self.p0, self.d)
    }
}

/// Removes from `f` its unweighted least-squares fit by monomials of
/// homogeneous degree `≤ d` over the cells of `ball`.
pub fn project_moments(f: &Field, ball: &Ball, d: u32) -> Result<Field> {
    let grid = f.grid();
    let cells = grid.ball_cells(ball);
    if cells.is_empty() {
        return Err(Error::Unresolved("projection ball holds no cells".into()));
    }
    let frame = AtomRecipe {
        center: ball.center.as_h1(),
        delta: ball.radius,
        seed_poly: Vec::new(),
        moments: Vec::new(),
        scale: 1.0,
    };
    let basis = exponents_up_to(d);
    let rows: Vec<Vec<f64>> = cells
        .iter()
        .map(|&i| {
            let v = frame.local(grid.center(i));
            basis.iter().map(|e| mono(*e, v)).collect()
        })
        .collect();
    let target: Vec<f64> = cells.iter().map(|&i| f.values()[i]).collect();
    let coeffs = weighted_fit(&rows, &vec![1.0; cells.len()], &target)?;
    let mut out = f.clone();
    for (&i, row) in cells.iter().zip(&rows) {
        let fit: f64 = row.iter().zip(&coeffs).map(|(a, b)| a * b).sum();
        out.values_mut()[i] -= fit;
    }
    Ok(out)
}

/// `u ↦ a(z0·u)` on the grid moved by `z0⁻¹`, declared on `B(z0⁻¹·c, δ)` and
/// validated against `p(z0·)`.
pub fn translate_atom(a: &Atom, z0: &Point) -> Result<Atom> {
    let c = a.ball.center.as_h1();
    let z = z0.as_h1();
    if z.iter().zip(&c).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + y.abs())) {
        return invalid("translate_atom expects z0 to be the atom's center");
    }
    let old = a.field.grid().spec();
    let spec = old.with_center(h1::left_div(z, old.center));
    let grid = build_grid(spec)?;
    let ball = Ball::new(Point::from_h1(h1::left_div(z, c)), a.ball.radius)?;
    if !grid.contains_ball(&ball, 1.0) {
        return Err(Error::OutOfBox("translated support escapes the grid".into()));
    }
    let recipe = a.recipe.translated(z);
    let mut field = Field::zeros(&grid);
    for i in grid.ball_cells(&ball) {
        field.values_mut()[i] = recipe.eval(grid.center(i));
    }
    Ok(Atom {
        field: field.with_support(ball.clone()),
        ball,
        p0: a.p0,
        d: a.d,
        exponent: a.exponent.translated(z0),
        normalization: a.normalization.clone(),
        recipe,
    })
}

/// `Σ λⱼ aⱼ` on the atoms' common grid.
pub fn synthesize(lambdas: &[f64], atoms: &[Atom]) -> Result<Field> {
    if lambdas.len() != atoms.len() {
        return Err(Error::DimensionMismatch {
            expected: atoms.len(),
            got: lambdas.len(),
        });
    }
    let Some(first) = atoms.first() else {
        return invalid("synthesize needs at least one atom");
    };
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return invalid(format!("atomic coefficients must be nonnegative, got {l}"));
    }
    let mut out = Field::zeros(first.field.grid());
    for (lambda, atom) in lambdas.iter().zip(atoms) {
        if !atom.field.same_grid(&first.field) {
            return Err(Error::GridMismatch("atoms live on different grids".into()));
        }
        for (o, v) in out.values_mut().iter_mut().zip(atom.field.values()) {
            *o += lambda * v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AtomSidecar {
    ball: Ball,
    p0: f64,
    d: u32,
    exponent: ExponentSpec,
    normalization: Normalization,
    recipe: AtomRecipe,
}

/// Writes the field binary plus a sidecar holding the atom metadata.
pub fn export_atom(a: &Atom, bin_path: &Path) -> Result<()> {
    let meta = AtomSidecar {
        ball: a.ball.clone(),
        p0: a.p0,
        d: a.d,
        exponent: a.exponent.clone().into(),
        normalization: a.normalization.clone(),
        recipe: a.recipe.clone(),
    };
    export_field(&a.field, bin_path, serde_json::json!({ "atom": meta }))
}

pub fn import_atom(bin_path: &Path) -> Result<Atom> {
    let (field, sidecar) = import_field(bin_path)?;
    let meta = sidecar
        .extra
        .get("atom")
        .cloned()
        .ok_or_else(|| Error::InvalidParameter("sidecar has no atom metadata".into()))?;
    let meta: AtomSidecar = serde_json::from_value(meta)?;
    Ok(Atom {
        field,
        ball: meta.ball,
        p0: meta.p0,
        d: meta.d,
        exponent: ExponentFn::try_from(meta.exponent)?,
        normalization: meta.normalization,
        recipe: meta.recipe,
    })
}

/// Grid for atoms on `B(center, δ)`: spacings `δ/8` and `δ²/16`, centered on
/// the ball, `margin` radii of room on each side.
pub fn atom_grid(center: [f64; 3], delta: f64, margin: f64) -> Result<Grid> {
    let hx = delta / 8.0;
    let ht = delta * delta / 16.0;
    let nx = (margin * delta / hx).ceil() as usize;
    // t-extent of B(c, mδ) around the center, plus the shear from |x_c|
    let xc = (center[0] * center[0] + center[1] * center[1]).sqrt();
    let tw = 0.25 * (margin * delta).powi(2) + 0.5 * xc * margin * delta;
    let nt = (tw / ht).ceil() as usize + 1;
    build_grid(crate::grid::GridSpec::centered_cells(nx, nt, hx, ht)?.with_center(center))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{constant, gaussian_bump, log_decay};
    use crate::grid::{ball_indicator, integrate};
    use approx::assert_relative_eq;

    fn setup(center: [f64; 3], delta: f64) -> (Grid, Ball) {
        let g = atom_grid(center, delta, 1.25).unwrap();
        (g, Ball::new(Point::from_h1(center), delta).unwrap())
    }

    #[test]
    fn constructed_atoms_pass_every_axiom() {
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        for (center, delta, d) in [([0.0; 3], 0.5, 0), ([1.0, 0.0, 0.0], 0.25, 1), ([0.0, 0.0, 1.0], 1.0, 2)] {
            let (g, b) = setup(center, delta);
            let a = make_atom(&b, &p, 2.5, d, 3, &g).unwrap();
            let rep = a.report().unwrap();
            assert!(rep.pass, "{rep:?}");
            assert_relative_eq!(rep.size.measured, rep.size.bound, max_relative = 1e-8);
        }
    }

    #[test]
    fn mean_vanishes_for_order_zero() {
        let (g, b) = setup([0.0; 3], 0.5);
        let a = make_atom(&b, &constant(2.0).unwrap(), 2.0, 0, 1, &g).unwrap();
        let l1: f64 = a.field.values().iter().map(|v| v.abs()).sum::<f64>() * g.cell_volume();
        assert!(integrate(&a.field).abs() <= 1e-10 * l1);
    }

    #[test]
    fn zero_outside_the_ball() {
        let (g, b) = setup([1.0, 0.0, 0.0], 0.5);
        let a = make_atom(&b, &log_decay(2.0, 0.5).unwrap(), 3.0, 1, 2, &g).unwrap();
        let inside: std::collections::HashSet<usize> = g.ball_cells(&b).into_iter().collect();
        for (i, v) in a.field.values().iter().enumerate() {
            if !inside.contains(&i) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn indicator_and_doubled_atom_fail() {
        let p = constant(2.0).unwrap();
        let (g, b) = setup([0.0; 3], 0.5);
        let bound = size_bound(&g, &b, &p, 2.0).unwrap();
        let chi = ball_indicator(&g, &b);
        let chi_norm = chi.lp_norm(2.0);
        let rep = validate_atom(&chi.scaled(bound / chi_norm), &b, &p, 2.0, 0).unwrap();
        assert!(rep.support.pass && rep.size.pass && !rep.moments.pass);
        let a = make_atom(&b, &p, 2.0, 1, 4, &g).unwrap();
        let rep = validate_atom(&a.field.scaled(2.0), &b, &p, 2.0, 1).unwrap();
        assert!(!rep.size.pass && rep.moments.pass);
    }

    #[test]
    fn projection_is_idempotent_on_atoms() {
        let (g, b) = setup([0.0, 0.0, 1.0], 0.5);
        let a = make_atom(&b, &gaussian_bump(0.9, 0.3, 1.0).unwrap(), 1.8, 1, 5, &g).unwrap();
        let again = project_moments(&a.field, &b, 1).unwrap();
        let scale = a.field.sup_abs();
        for (x, y) in a.field.values().iter().zip(again.values()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn translation_revalidates_at_the_identity() {
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        for center in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]] {
            for delta in [0.25, 0.5, 1.0] {
                let (g, b) = setup(center, delta);
                let a = make_atom(&b, &p, 2.5, 1, 1, &g).unwrap();
                let t = translate_atom(&a, &b.center).unwrap();
                assert_eq!(t.ball.center.as_h1(), [0.0; 3]);
                let rep = validate_atom_with(&t.field, &t.ball, &t.exponent, t.p0, t.d, AtomTolerances::resampled()).unwrap();
                assert!(rep.pass, "{center:?} {delta}: {rep:?}");
                let n0 = a.field.lp_norm(2.5);
                assert_relative_eq!(t.field.lp_norm(2.5), n0, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn translating_by_identity_keeps_values() {
        let (g, b) = setup([0.0; 3], 0.5);
        let a = make_atom(&b, &constant(1.5).unwrap(), 2.0, 0, 9, &g).unwrap();
        let t = translate_atom(&a, &Point::identity(1)).unwrap();
        assert_eq!(t.field.values(), a.field.values());
        assert!(translate_atom(&a, &Point::h1(0.1, 0.0, 0.0)).is_err());
    }

    #[test]
    fn disjoint_atoms_are_orthogonal_in_l2_sense() {
        let g = build_grid(crate::grid::GridSpec::centered_cells(24, 40, 1.0 / 16.0, 1.0 / 64.0).unwrap()).unwrap();
        let p = constant(2.0).unwrap();
        let b1 = Ball::new(Point::h1(-0.75, 0.0, 0.0), 0.5).unwrap();
        let b2 = Ball::new(Point::h1(0.75, 0.0, 0.0), 0.5).unwrap();
        let a1 = make_atom(&b1, &p, 2.0, 1, 1, &g).unwrap();
        let a2 = make_atom(&b2, &p, 2.0, 1, 2, &g).unwrap();
        let s = synthesize(&[3.0, 4.0], &[a1.clone(), a2.clone()]).unwrap();
        let lhs = s.lp_norm(2.0).powi(2);
        let rhs = 9.0 * a1.field.lp_norm(2.0).powi(2) + 16.0 * a2.field.lp_norm(2.0).powi(2);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        let one = synthesize(&[1.0], std::slice::from_ref(&a1)).unwrap();
        assert_eq!(one.values(), a1.field.values());
        assert!(synthesize(&[1.0], &[]).is_err());
    }

    #[test]
    fn unresolved_ball_is_rejected() {
        let g = build_grid(crate::grid::GridSpec::centered_cells(8, 8, 0.25, 0.25).unwrap()).unwrap();
        let b = Ball::new(Point::identity(1), 0.5).unwrap();
        assert!(matches!(
            make_atom(&b, &constant(2.0).unwrap(), 2.0, 0, 1, &g),
            Err(Error::Unresolved(_))
        ));
    }

    #[test]
    fn atom_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let (g, b) = setup([1.0, 0.0, 0.0], 0.5);
        let a = make_atom(&b, &gaussian_bump(1.5, 0.5, 1.0).unwrap(), 2.0, 1, 7, &g).unwrap();
        let path = dir.path().join("atom.bin");
        export_atom(&a, &path).unwrap();
        let back = import_atom(&path).unwrap();
        assert_eq!(back.field.values(), a.field.values());
        assert_eq!(back.recipe, a.recipe);
        assert_eq!(back.normalization, a.normalization);
        assert!(back.report().unwrap().pass);
    }
}
