//! Modulars and Luxemburg norms of sampled fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exponent::{conjugate, ExponentFn};
use crate::grid::{sum_ordered, Field, Grid};
use crate::group::{h1, Ball};

/// Relative tolerance on λ for the bisection.
pub const LAMBDA_RTOL: f64 = 1e-10;

/// Cells a ball must span along each axis before its discrete norm is trusted.
pub const MIN_CELLS_ACROSS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub iterations: u32,
    pub bracket: (f64, f64),
    pub residual: f64,
}

impl NormResult {
    fn zero() -> Self {
        Self {
            value: 0.0,
            iterations: 0,
            bracket: (0.0, 0.0),
            residual: 0.0,
        }
    }
}

/// `(ln|f|, p)` over the nonzero cells, ready for repeated modular evaluation.
#[derive(Debug, Clone)]
pub struct PreparedModular {
    log_abs: Vec<f64>,
    p: Vec<f64>,
    vol: f64,
    sup: f64,
    p_minus: f64,
}

impl PreparedModular {
    pub fn new(values: &[f64], p: &[f64], cell_volume: f64) -> Result<Self> {
        if values.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: p.len(),
            });
        }
        let mut log_abs = Vec::new();
        let mut ps = Vec::new();
        let mut sup = 0.0f64;
        let mut p_minus = f64::INFINITY;
        for (&v, &pv) in values.iter().zip(p) {
            if !v.is_finite() {
                return Err(Error::NonFinite("field value in modular".into()));
            }
            if v != 0.0 {
                log_abs.push(v.abs().ln());
                ps.push(pv);
                sup = sup.max(v.abs());
                p_minus = p_minus.min(pv);
            }
        }
        Ok(Self {
            log_abs,
            p: ps,
            vol: cell_volume,
            sup,
            p_minus,
        })
    }

    /// Indicator of a set of `count` cells (all values 1).
    pub fn indicator(p: Vec<f64>, cell_volume: f64) -> Self {
        let p_minus = p.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            log_abs: vec![0.0; p.len()],
            sup: if p.is_empty() { 0.0 } else { 1.0 },
            p,
            vol: cell_volume,
            p_minus,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs.is_empty()
    }

    pub fn support_measure(&self) -> f64 {
        self.log_abs.len() as f64 * self.vol
    }

    pub fn eval_log(&self, log_lambda: f64) -> f64 {
        let terms = self
            .log_abs
            .iter()
            .zip(&self.p)
            .map(|(&a, &p)| (p * (a - log_lambda)).exp());
        sum_ordered(terms, self.log_abs.len()) * self.vol
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.eval_log(lambda.ln())
    }

    /// Modular at `e^s` together with `−d/ds ln F(s) = Σpᵢeᵢ/Σeᵢ`.
    fn eval_log_slope(&self, log_lambda: f64, buf: &mut Vec<f64>) -> (f64, f64) {
        buf.clear();
        buf.extend(self.log_abs.iter().zip(&self.p).map(|(&a, &p)| (p * (a - log_lambda)).exp()));
        let total = sum_ordered(buf.iter().copied(), buf.len());
        let weighted: f64 = buf.iter().zip(&self.p).map(|(e, p)| e * p).sum();
        (total * self.vol, weighted / total)
    }

    /// Smallest λ with modular ≤ 1, to relative accuracy [`LAMBDA_RTOL`].
    ///
    /// `ln F` is convex and decreasing in `s = ln λ`. A Newton step from
    /// either side lands left of the root and later steps climb towards it
    /// without overshooting; once they stall, a probe just past the last step
    /// closes the bracket. Doubling and bisection remain as the fallback.
    pub fn norm(&self) -> NormResult {
        if self.is_zero() {
            return NormResult::zero();
        }
        let tol = LAMBDA_RTOL.ln_1p();
        let mut iterations = 0u32;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut buf = Vec::with_capacity(self.log_abs.len());
        let mut s = (self.sup * self.support_measure().powf(1.0 / self.p_minus)).ln();
        while iterations < 60 {
            let (f, slope) = self.eval_log_slope(s, &mut buf);
            iterations += 1;
            if f <= 1.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
            if hi - lo <= tol {
                break;
            }
            let step = f.ln() / slope;
            if !step.is_finite() || step == 0.0 {
                break;
            }
            let next = if f > 1.0 && step < 0.25 * tol { s + 2.0 * step + 0.25 * tol } else { s + step };
            if !(next > lo && next < hi) {
                break;
            }
            s = next;
        }
        if hi.is_infinite() {
            hi = lo + std::f64::consts::LN_2;
            while self.eval_log(hi) > 1.0 {
                lo = hi;
                hi += std::f64::consts::LN_2;
                iterations += 1;
            }
        }
        if lo.is_infinite() {
            lo = hi - std::f64::consts::LN_2;
            while self.eval_log(lo) <= 1.0 {
                hi = lo;
                lo -= std::f64::consts::LN_2;
                iterations += 1;
            }
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.eval_log(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
        NormResult {
            value: hi.exp(),
            iterations,
            bracket: (lo.exp(), hi.exp()),
            residual: (self.eval_log(hi) - 1.0).abs(),
        }
    }
}

fn exponent_values(grid: &Grid, p: &ExponentFn) -> Vec<f64> {
    p.on_grid(grid)
}

pub fn modular(f: &Field, p: &ExponentFn, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("modular needs λ > 0, got {lambda}"));
    }
    let prepared = PreparedModular::new(f.values(), &exponent_values(f.grid(), p), f.grid().cell_volume())?;
    Ok(prepared.eval(lambda))
}

pub fn luxemburg_norm(f: &Field, p: &ExponentFn) -> Result<NormResult> {
    let pv = exponent_values(f.grid(), p);
    luxemburg_norm_with(f, &pv)
}

/// Luxemburg norm with exponent values already sampled on `f`'s grid.
pub fn luxemburg_norm_with(f: &Field, p_values: &[f64]) -> Result<NormResult> {
    Ok(PreparedModular::new(f.values(), p_values, f.grid().cell_volume())?.norm())
}

/// `(∫|fg|, 2‖f‖_{p(·)}‖g‖_{p'(·)})`.
pub fn holder_pairing(f: &Field, g: &Field, p: &ExponentFn) -> Result<(f64, f64)> {
    if p.p_minus() <= 1.0 {
        return invalid("Hölder pairing needs p₋ > 1");
    }
    if !f.same_grid(g) {
        return Err(Error::GridMismatch("Hölder pairing".into()));
    }
    let pc = conjugate(p)?;
    let lhs = pairing(f, g);
    let rhs = 2.0 * luxemburg_norm(f, p)?.value * luxemburg_norm(g, &pc)?.value;
    Ok((lhs, rhs))
}

fn pairing(f: &Field, g: &Field) -> f64 {
    let n = f.values().len();
    sum_ordered(f.values().iter().zip(g.values()).map(|(a, b)| (a * b).abs()), n) * f.grid().cell_volume()
}

/// Lower estimate of `sup {∫|fg| : ‖g‖_{p'(·)} ≤ 1}` over random bumps and the
/// canonical candidate `|f/‖f‖|^{p(·)−1}`.
pub fn dual_norm_estimate(f: &Field, p: &ExponentFn, trial_count: usize, seed: u64) -> Result<f64> {
    if p.p_minus() <= 1.0 {
        return invalid("dual norm estimate needs p₋ > 1");
    }
    if trial_count == 0 {
        return invalid("dual norm estimate needs at least one trial");
    }
    let grid = f.grid();
    let pv = exponent_values(grid, p);
    let norm = luxemburg_norm_with(f, &pv)?.value;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let pc: Vec<f64> = pv.iter().map(|&q| q / (q - 1.0)).collect();
    let normalized_pairing = |g: Field| -> Result<f64> {
        let gn = luxemburg_norm_with(&g, &pc)?.value;
        if gn == 0.0 {
            return Ok(0.0);
        }
        Ok(pairing(f, &g) / gn)
    };
    let canonical: Vec<f64> = f
        .values()
        .iter()
        .zip(&pv)
        .map(|(&v, &q)| (v.abs() / norm).powf(q - 1.0))
        .collect();
    let mut best = normalized_pairing(Field::from_values(grid, canonical)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = grid.extent();
    for _ in 0..trial_count {
        let c = [
            rng.gen_range(ext[0][0]..ext[0][1]),
            rng.gen_range(ext[1][0]..ext[1][1]),
            rng.gen_range(ext[2][0]..ext[2][1]),
        ];
        let width = (ext[0][1] - ext[0][0]) * rng.gen_range(0.05..0.5);
        let values = (0..grid.len())
            .map(|i| {
                let r2 = h1::rho4(h1::left_div(c, grid.center(i))).sqrt();
                (-r2 / (width * width)).exp()
            })
            .collect();
        best = best.max(normalized_pairing(Field::from_values(grid, values)?)?);
    }
    Ok(best)
}

/// `‖χ_B‖_{p(·)}` over the discrete ball (cells whose centers lie in `ball`).
pub fn ball_indicator_norm(grid: &Grid, ball: &Ball, p: &ExponentFn) -> Result<NormResult> {
    let cells = grid.ball_cells(ball);
    if cells.is_empty() {
        return Err(Error::Unresolved(format!("ball of radius {} holds no cell centers", ball.radius)));
    }
    let pv = cells.iter().map(|&i| p.eval_h1(grid.center(i))).collect();
    Ok(PreparedModular::indicator(pv, grid.cell_volume()).norm())
}

fn check_resolved(grid: &Grid, ball: &Ball) -> Result<()> {
    if !grid.resolves(ball.radius, MIN_CELLS_ACROSS) {
        return Err(Error::Unresolved(format!(
            "ball of radius {} spans fewer than {MIN_CELLS_ACROSS} cells",
            ball.radius
        )));
    }
    Ok(())
}

/// `‖{Σⱼ (λⱼ χ_{Bⱼ}/‖χ_{Bⱼ}‖_{p(·)})^{s}}^{1/s}‖_{p(·)}` for a given power `s`.
pub fn script_a_with_power(lambdas: &[f64], balls: &[Ball], p: &ExponentFn, grid: &Grid, power: f64) -> Result<f64> {
    if lambdas.len() != balls.len() {
        return Err(Error::DimensionMismatch {
            expected: balls.len(),
            got: lambdas.len(),
        });
    }
    if balls.is_empty() {
        return invalid("𝒜 needs at least one ball");
    }
    if !(power > 0.0) {
        return invalid("𝒜 power must be positive");
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return invalid(format!("𝒜 coefficients must be nonnegative and finite, got {l}"));
    }
    let mut acc = vec![0.0; grid.len()];
    for (lambda, ball) in lambdas.iter().zip(balls) {
        check_resolved(grid, ball)?;
        if *lambda == 0.0 {
            continue;
        }
        let cells = grid.ball_cells(ball);
        if cells.is_empty() {
            return Err(Error::Unresolved("ball without cells".into()));
        }
        let pv = cells.iter().map(|&i| p.eval_h1(grid.center(i))).collect();
        let norm = PreparedModular::indicator(pv, grid.cell_volume()).norm().value;
        let term = (lambda / norm).powf(power);
        for i in cells {
            acc[i] += term;
        }
    }
    let values: Vec<f64> = acc.into_iter().map(|s| s.powf(1.0 / power)).collect();
    let field = Field::from_values(grid, values)?;
    Ok(luxemburg_norm(&field, p)?.value)
}

/// The 𝒜-quantity with the power `p̲`.
pub fn script_a(lambdas: &[f64], balls: &[Ball], p: &ExponentFn, grid: &Grid) -> Result<f64> {
    script_a_with_power(lambdas, balls, p, grid, p.p_underline())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{constant, gaussian_bump, log_decay};
    use crate::grid::{ball_indicator, build_grid, sample, GridSpec};
    use crate::group::Point;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        build_grid(GridSpec::new(1.25, 0.5, 1.0 / 16.0, 1.0 / 32.0).unwrap()).unwrap()
    }

    fn unit_ball() -> Ball {
        Ball::new(Point::identity(1), 1.0).unwrap()
    }

    #[test]
    fn modular_of_indicator_is_closed_form() {
        let g = grid();
        let b = unit_ball();
        let f = ball_indicator(&g, &b);
        let m = g.ball_measure(&b);
        assert_relative_eq!(modular(&f, &constant(3.0).unwrap(), 2.0).unwrap(), m / 8.0, max_relative = 1e-13);
        assert_eq!(modular(&Field::zeros(&g), &constant(2.0).unwrap(), 0.5).unwrap(), 0.0);
        assert!(modular(&f, &constant(2.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn modular_decreases_in_lambda() {
        let g = grid();
        let f = sample(|z| (z.x[0] * 3.0).sin() + z.t, &g).unwrap();
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        assert!(modular(&f, &p, 1.0).unwrap() > modular(&f, &p, 2.0).unwrap());
    }

    #[test]
    fn constant_exponent_indicator_norm() {
        let g = grid();
        let b = unit_ball();
        let f = ball_indicator(&g, &b);
        let m = g.ball_measure(&b);
        let r = luxemburg_norm(&f, &constant(2.0).unwrap()).unwrap();
        assert_relative_eq!(r.value, m.sqrt(), max_relative = 1e-6);
        assert!(r.bracket.0 <= r.value && r.value <= r.bracket.1);
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let r = luxemburg_norm(&Field::zeros(&grid()), &constant(2.0).unwrap()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn homogeneity_and_power_identity() {
        let g = grid();
        let p = log_decay(1.3, 0.8).unwrap();
        let f = sample(|z| (-(z.x[0] * z.x[0] + z.x[1] * z.x[1]) - 4.0 * z.t.abs()).exp(), &g).unwrap();
        let n1 = luxemburg_norm(&f, &p).unwrap().value;
        let n2 = luxemburg_norm(&f.scaled(2.0), &p).unwrap().value;
        assert_relative_eq!(n2, 2.0 * n1, max_relative = 1e-9);

        let chi = ball_indicator(&g, &unit_ball());
        let lhs = luxemburg_norm(&chi.map(|v| v * v), &constant(2.0).unwrap()).unwrap().value;
        let rhs = luxemburg_norm(&chi, &constant(4.0).unwrap()).unwrap().value.powi(2);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
    }

    #[test]
    fn bisection_lands_on_unit_modular() {
        let g = grid();
        let p = gaussian_bump(0.9, 0.3, 1.0).unwrap();
        let f = sample(|z| 1.0 + z.x[0] * z.x[1] - z.t, &g).unwrap();
        let r = luxemburg_norm(&f, &p).unwrap();
        assert!((modular(&f, &p, r.value).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn holder_examples() {
        let g = grid();
        let chi = ball_indicator(&g, &unit_ball());
        let m = g.ball_measure(&unit_ball());
        let (lhs, rhs) = holder_pairing(&chi, &chi, &constant(2.0).unwrap()).unwrap();
        assert_relative_eq!(lhs, m, max_relative = 1e-12);
        assert_relative_eq!(rhs, 2.0 * m, max_relative = 1e-8);
        assert_eq!(holder_pairing(&chi, &Field::zeros(&g), &constant(2.0).unwrap()).unwrap(), (0.0, 0.0));
        assert!(holder_pairing(&chi, &chi, &constant(1.0).unwrap()).is_err());
    }

    #[test]
    fn dual_estimate_finds_the_extremal_for_constant_exponent() {
        let g = grid();
        let chi = ball_indicator(&g, &unit_ball());
        let m = g.ball_measure(&unit_ball());
        let d = dual_norm_estimate(&chi, &constant(2.0).unwrap(), 4, 1).unwrap();
        assert!(d >= m.sqrt() * (1.0 - 1e-6));
        assert_eq!(dual_norm_estimate(&Field::zeros(&g), &constant(2.0).unwrap(), 4, 1).unwrap(), 0.0);
    }

    #[test]
    fn script_a_examples() {
        let g = build_grid(GridSpec::new(2.5, 1.0, 1.0 / 8.0, 1.0 / 32.0).unwrap()).unwrap();
        let p = constant(2.0).unwrap();
        let b1 = Ball::new(Point::h1(-1.2, 0.0, 0.0), 1.0).unwrap();
        let b2 = Ball::new(Point::h1(1.2, 0.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(script_a(&[1.0], std::slice::from_ref(&b1), &p, &g).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(script_a(&[3.0, 4.0], &[b1.clone(), b2.clone()], &p, &g).unwrap(), 5.0, max_relative = 1e-9);
        let q = gaussian_bump(0.9, 0.3, 1.0).unwrap();
        let a1 = script_a(&[0.5, 2.0], &[b1.clone(), b2.clone()], &q, &g).unwrap();
        let a3 = script_a(&[1.5, 6.0], &[b1.clone(), b2], &q, &g).unwrap();
        assert_relative_eq!(a3, 3.0 * a1, max_relative = 1e-9);
        assert!(script_a(&[], &[], &p, &g).is_err());
        assert!(script_a(&[1.0, 2.0], &[b1], &p, &g).is_err());
    }
}
