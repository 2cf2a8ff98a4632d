//! `luxemburg` and `ballnorms` suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frame::UnitFrame;
use super::Checks;
use crate::error::Result;
use crate::exponent::{conjugate, constant, log_holder_estimate, log_holder_estimate_fn, ExponentFn, PairSampler};
use crate::grid::{ball_indicator, build_grid, sample, Field, Grid, GridSpec};
use crate::group::{h1, Ball, GroupContext, Point};
use crate::luxemburg::{
    dual_norm_estimate, holder_pairing, luxemburg_norm, luxemburg_norm_with, modular, PreparedModular,
};

const HOLDER_PAIRS: usize = 200;
const DUAL_FIELDS: usize = 50;
const DUAL_TRIALS: usize = 32;
const RANDOM_FIELDS: usize = 10;

/// Random signed sum of compact bumps inside the box.
fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, signed: bool) -> Result<Field> {
    let ext = grid.extent();
    let bumps: Vec<([f64; 3], f64, f64)> = (0..3)
        .map(|_| {
            let r = rng.gen_range(0.2..0.6);
            let c = [
                rng.gen_range(ext[0][0] + r..ext[0][1] - r),
                rng.gen_range(ext[1][0] + r..ext[1][1] - r),
                rng.gen_range(ext[2][0] + 0.25 * r * r..ext[2][1] - 0.25 * r * r),
            ];
            let amp = rng.gen_range(0.2..3.0) * if signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            (c, r, amp)
        })
        .collect();
    sample(
        |z: &Point| {
            bumps
                .iter()
                .map(|(c, r, a)| {
                    let s = h1::rho4(h1::left_div(*c, z.as_h1())) / r.powi(4);
                    if s < 1.0 {
                        a * (1.0 - s) * (1.0 - s)
                    } else {
                        0.0
                    }
                })
                .sum()
        },
        grid,
    )
}

fn default_grid() -> Result<GridSpec> {
    GridSpec::new(1.25, 0.5, 1.0 / 16.0, 1.0 / 32.0)
}

fn coarse_grid() -> Result<Grid> {
    build_grid(GridSpec::new(1.0, 0.5, 1.0 / 8.0, 1.0 / 16.0)?)
}

pub(super) fn luxemburg(c: &mut Checks) -> Result<()> {
    let exps = c.config.exponent_fns()?;
    let spec = c.config.grid.map_or_else(default_grid, Ok)?;
    let grid = build_grid(spec)?;
    let e = Point::identity(1);

    // constant exponents against |B|_grid^{1/p}
    let mut worst = 0.0f64;
    for ball in [Ball::new(e.clone(), 1.0)?, Ball::new(Point::h1(0.25, 0.0, 0.0), 0.5)?] {
        let chi = ball_indicator(&grid, &ball);
        let measure = grid.ball_measure(&ball);
        for p0 in [0.5, 1.0, 2.0, 3.5] {
            let n = luxemburg_norm(&chi, &constant(p0)?)?.value;
            worst = worst.max((n / measure.powf(1.0 / p0) - 1.0).abs());
        }
    }
    c.at_most("constant_exponent_ball_norm", "luxemburg-norm", worst, 1e-6)?;

    // power identity ‖|χ_B|²‖₂ = ‖χ_B‖₄²
    let chi = ball_indicator(&grid, &Ball::new(e.clone(), 1.0)?);
    let lhs = luxemburg_norm(&chi.map(|v| v * v), &constant(2.0)?)?.value;
    let rhs = luxemburg_norm(&chi, &constant(4.0)?)?.value.powi(2);
    c.rel("power_identity_indicator", "luxemburg-power", lhs, rhs, 1e-8)?;

    let coarse = coarse_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.config.seeds[0]);
    let fields: Vec<Field> = (0..RANDOM_FIELDS).map(|_| random_field(&coarse, &mut rng, true)).collect::<Result<_>>()?;
    let mut homog = 0.0f64;
    let mut power = 0.0f64;
    let mut residual = 0.0f64;
    let mut quasi = 0.0f64;
    for p in &exps {
        let pv = p.on_grid(&coarse);
        let pu = p.p_underline();
        for (i, f) in fields.iter().enumerate() {
            let n = luxemburg_norm_with(f, &pv)?.value;
            for k in [2.0, -0.3, 7.0] {
                let scaled = luxemburg_norm_with(&f.scaled(k), &pv)?.value;
                homog = homog.max((scaled / (k.abs() * n) - 1.0).abs());
            }
            for s in [0.5, 2.0] {
                let ps: Vec<f64> = pv.iter().map(|q| q / s).collect();
                let m = luxemburg_norm_with(&f.map(|v| v.abs().powf(s)), &ps)?.value;
                power = power.max((m / n.powf(s) - 1.0).abs());
            }
            residual = residual.max((modular(f, p, n)? - 1.0).abs());
            let g = &fields[(i + 1) % fields.len()];
            let sum = luxemburg_norm_with(&f.combine(1.0, g, 1.0)?, &pv)?.value;
            let bound = 2f64.powf(1.0 / pu - 1.0) * (n + luxemburg_norm_with(g, &pv)?.value);
            quasi = quasi.max(sum / bound);
        }
    }
    c.at_most("homogeneity", "luxemburg-homogeneity", homog, 1e-8)?;
    c.at_most("power_identity_variable", "luxemburg-power", power, 1e-8)?;
    c.at_most("bisection_residual", "luxemburg-norm", residual, 1e-8)?;
    c.at_most("quasi_triangle_ratio", "luxemburg-quasi-triangle", quasi, 1.0)?;

    holder_and_dual(c, &exps, &coarse, &grid)?;
    exponent_diagnostics(c, &exps)
}

fn holder_and_dual(c: &mut Checks, exps: &[ExponentFn], coarse: &Grid, grid: &Grid) -> Result<()> {
    let seed = c.config.seeds[0];
    let eligible: Vec<&ExponentFn> = exps.iter().filter(|p| p.p_minus() > 1.0).collect();
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x401d);
    for p in &eligible {
        for _ in 0..HOLDER_PAIRS {
            let f = random_field(coarse, &mut rng, true)?;
            let g = random_field(coarse, &mut rng, true)?;
            let (lhs, rhs) = holder_pairing(&f, &g, p)?;
            worst = worst.max(lhs / rhs);
            if lhs > rhs {
                violations += 1;
            }
        }
    }
    c.holds(
        "holder_zero_violations",
        "holder",
        violations == 0,
        format!("{} pairs per exponent over {} exponents with p₋ > 1, {violations} violations", HOLDER_PAIRS, eligible.len()),
    )?;
    c.at_most("holder_worst_ratio", "holder", worst, 1.0)?;

    // explicit extremal pair for p ≡ 2
    let chi = ball_indicator(grid, &Ball::new(Point::identity(1), 1.0)?);
    let two = constant(2.0)?;
    let est = dual_norm_estimate(&chi, &two, DUAL_TRIALS, seed)?;
    let exact = grid.ball_measure(&Ball::new(Point::identity(1), 1.0)?).sqrt();
    c.at_least("dual_norm_extremal_pair", "dual-norm", est / exact, 1.0 - 1e-6)?;

    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in eligible.iter().filter(|p| !p.is_constant()) {
        for k in 0..DUAL_FIELDS {
            let f = random_field(coarse, &mut rng, true)?;
            let r = dual_norm_estimate(&f, p, DUAL_TRIALS, seed.wrapping_add(k as u64))? / luxemburg_norm(&f, p)?.value;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    c.at_least("dual_norm_ratio_min", "dual-norm", lo, 0.5)?;
    c.at_most("dual_norm_ratio_max", "dual-norm", hi, 2.0)
}

fn exponent_diagnostics(c: &mut Checks, exps: &[ExponentFn]) -> Result<()> {
    let ctx = GroupContext::h1();
    let seed = c.config.seeds[0];
    let violations: usize = exps.iter().map(|p| p.check_bounds(&ctx, 10_000, seed)).sum();
    c.holds("exponent_declared_bounds", "exponent-bounds", violations == 0, format!("{violations} violations"))?;

    let mut involution = 0.0f64;
    let mut conj_bound = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in exps.iter().filter(|p| p.p_minus() > 1.0) {
        let pc = conjugate(p)?;
        let pcc = conjugate(&pc)?;
        for _ in 0..1000 {
            let z = crate::exponent::random_point(&mut rng, &ctx, 8.0);
            involution = involution.max((pcc.eval(&z) - p.eval(&z)).abs());
        }
        let pm = p.p_minus();
        conj_bound = conj_bound.max((pc.p_plus() - pm / (pm - 1.0)).abs());
    }
    c.at_most("conjugate_involution", "conjugate-exponent", involution, 1e-12)?;
    c.at_most("conjugate_upper_bound", "conjugate-exponent", conj_bound, 1e-12)?;

    let mut finite = true;
    let mut excess = 0.0f64;
    for p in exps {
        let cp = log_holder_estimate(p, &mut PairSampler::new(ctx, seed, 10.0), 20_000);
        let ci = log_holder_estimate_fn(
            |z| 1.0 / p.eval(z),
            1.0 / p.p_inf(),
            &mut PairSampler::new(ctx, seed, 10.0),
            20_000,
        );
        finite &= cp.0.is_finite() && cp.1.is_finite() && ci.0.is_finite() && ci.1.is_finite();
        let k = p.p_minus() * p.p_minus();
        excess = excess.max(ci.0 - cp.0 / k).max(ci.1 - cp.1 / k);
    }
    c.holds("log_holder_finite", "log-holder", finite, "")?;
    c.at_most("log_holder_reciprocal", "log-holder-reciprocal", excess, 1e-12)
}

const FRAME_HX: f64 = 1.0 / 16.0;
const FRAME_HT: f64 = 1.0 / 32.0;
const FAMILY_DRAWS: usize = 20;

fn ball_family(config_centers: &[[f64; 3]]) -> Vec<([f64; 3], f64)> {
    let mut centers: Vec<[f64; 3]> = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 0.25],
        [0.0, 2.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.5, -1.5, 0.5],
        [3.0, 0.0, 0.0],
        [0.0, 0.0, 2.25],
    ];
    for c in config_centers {
        if h1::rho(*c) <= 3.0 && !centers.contains(c) {
            centers.push(*c);
        }
    }
    centers
        .into_iter()
        .flat_map(|c| [0.25, 0.5, 1.0, 2.0].map(move |d| (c, d)))
        .collect()
}

pub(super) fn ballnorms(c: &mut Checks) -> Result<()> {
    let exps = c.config.exponent_fns()?;
    let frame = UnitFrame::new(FRAME_HX, FRAME_HT);
    let balls = ball_family(&c.config.centers);
    c.note(format!("{} balls, frame of {} cells", balls.len(), frame.len()));
    let mut families = 0usize;
    for p in &exps {
        let label = p.label();
        if p.p_minus() <= 1.0 {
            c.note(format!("{label}: skipped for ball-norm products, p₋ ≤ 1 has no conjugate"));
            continue;
        }
        families += 1;
        let pc = conjugate(p)?;
        let mut r = Vec::with_capacity(balls.len());
        let mut d = Vec::with_capacity(balls.len());
        for &(center, delta) in &balls {
            let np = frame.ball_norm(p, center, delta);
            let npc = frame.ball_norm(&pc, center, delta);
            r.push(np * npc / frame.measure(delta));
            d.push(frame.ball_norm(p, center, 2.0 * delta) / np);
        }
        if p.is_constant() {
            let q = p.p_plus();
            let dev_r = r.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            let want = 2f64.powf(4.0 / q);
            let dev_d = d.iter().map(|v| (v / want - 1.0).abs()).fold(0.0, f64::max);
            c.at_most(&format!("product_constant_exponent[{label}]"), "ball-norm-product", dev_r, 1e-6)?;
            c.at_most(&format!("doubling_constant_exponent[{label}]"), "ball-norm-dilate", dev_d, 1e-6)?;
        }
        c.spread(&format!("product_spread[{label}]"), "ball-norm-product", &r, 10.0)?;
        c.at_least(&format!("doubling_at_least_one[{label}]"), "ball-norm-dilate", super::min(&d), 1.0)?;
        c.spread(&format!("doubling_spread[{label}]"), "ball-norm-dilate", &d, 10.0)?;
    }
    c.holds("ball_family_size", "ball-norm-product", balls.len() >= 30 && families >= 3, format!("{families} exponent families"))?;
    bump_sums(c, &exps)
}

/// Ratio `‖Σλₖbₖ‖_{q/q⋆} / ‖ΣAₖλₖχ_{Bₖ}‖_{q/q⋆}` over random families.
fn bump_sums(c: &mut Checks, exps: &[ExponentFn]) -> Result<()> {
    let grid = build_grid(GridSpec::new(1.625, 0.625, 1.0 / 16.0, 1.0 / 32.0)?)?;
    for p in exps {
        let label = p.label();
        let q_star = 0.5 * p.p_underline();
        let s = 2.0 * p.p_plus() / q_star;
        let pv: Vec<f64> = p.on_grid(&grid).into_iter().map(|q| q / q_star).collect();
        let mut ratios = Vec::with_capacity(FAMILY_DRAWS * c.config.seeds.len());
        for &seed in &c.config.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0b5);
            for _ in 0..FAMILY_DRAWS.div_ceil(c.config.seeds.len()) {
                ratios.push(bump_ratio(&grid, &pv, s, &mut rng)?);
            }
        }
        c.spread(&format!("bump_sum_ratio_spread[{label}]"), "bump-sum", &ratios, 10.0)?;
    }
    Ok(())
}

fn bump_ratio(grid: &Grid, pv: &[f64], s: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let count = rng.gen_range(2..=8);
    let mut num = vec![0.0; grid.len()];
    let mut den = vec![0.0; grid.len()];
    for _ in 0..count {
        let delta = if rng.gen_bool(0.5) { 0.5 } else { 1.0 };
        let center = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.25..0.25)];
        let ball = Ball::new(Point::from_h1(center), delta)?;
        let a = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let (amp, lambda) = (rng.gen_range(0.5..2.0), rng.gen_range(0.1..1.0));
        let cells = grid.ball_cells(&ball);
        let raw: Vec<f64> = cells
            .iter()
            .map(|&i| {
                let v = h1::dilate(1.0 / delta, h1::left_div(center, grid.center(i)));
                let w = 1.0 - h1::rho4(v);
                w * w * (1.0 + a[0] * v[0] + a[1] * v[1] + a[2] * v[2])
            })
            .collect();
        let vol = grid.cell_volume();
        let measure = cells.len() as f64 * vol;
        let size = (raw.iter().map(|b| b.powf(s)).sum::<f64>() * vol).powf(1.0 / s);
        let k = amp * measure.powf(1.0 / s) / size;
        for (&i, b) in cells.iter().zip(&raw) {
            num[i] += lambda * k * b;
            den[i] += amp * lambda;
        }
    }
    let vol = grid.cell_volume();
    let n = PreparedModular::new(&num, pv, vol)?.norm().value;
    let d = PreparedModular::new(&den, pv, vol)?.norm().value;
    Ok(n / d)
}
