//! `algebra` and `measure` suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Checks;
use crate::error::Result;
use crate::grid::{ball_indicator, build_grid, integrate, sample, GridSpec};
use crate::group::{
    ball_contains, dilate, group_inv, group_mul, invariant_derivative, koranyi_norm, mul_unchecked, Ball, GroupContext,
    MultiIndex, Point, Side, UNIT_BALL_MEASURE_H1,
};

const DEFAULT_ALGEBRA_SAMPLES: usize = 100_000;
const ALGEBRA_TOL: f64 = 1e-12;
const DERIVATIVE_SAMPLES: usize = 1_000;
const DERIVATIVE_TOL: f64 = 1e-6;

fn unit_point(rng: &mut ChaCha8Rng) -> Point {
    Point::h1(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn dist(a: &Point, b: &Point) -> f64 {
    a.x.iter().zip(&b.x).map(|(u, v)| (u - v).abs()).fold((a.t - b.t).abs(), f64::max)
}

#[derive(Default)]
struct Worst {
    symmetry: f64,
    triangle: f64,
    reverse: f64,
    assoc: f64,
    inverse: f64,
    dil_hom: f64,
    dil_norm: f64,
    translation: f64,
    membership_flips: usize,
}

pub(super) fn algebra(c: &mut Checks) -> Result<()> {
    let ctx = GroupContext::h1();
    let total = c.config.samples.unwrap_or(DEFAULT_ALGEBRA_SAMPLES);
    let seeds = &c.config.seeds;
    let per_seed = total.div_ceil(seeds.len());
    let mut w = Worst::default();
    let e = ctx.identity();
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..per_seed {
            let (z, v, u) = (unit_point(&mut rng), unit_point(&mut rng), unit_point(&mut rng));
            let r = rng.gen_range(0.5..2.0);
            let (rz, rv) = (koranyi_norm(&z), koranyi_norm(&v));
            w.symmetry = w.symmetry.max((koranyi_norm(&group_inv(&z)) - rz).abs());
            let zv = group_mul(&ctx, &z, &v)?;
            w.triangle = w.triangle.max(koranyi_norm(&zv) - rz - rv);
            let vinv_z = group_mul(&ctx, &group_inv(&v), &z)?;
            w.reverse = w.reverse.max((rz - rv).abs() - koranyi_norm(&vinv_z));
            let left = group_mul(&ctx, &zv, &u)?;
            let right = group_mul(&ctx, &z, &group_mul(&ctx, &v, &u)?)?;
            w.assoc = w.assoc.max(dist(&left, &right));
            w.inverse = w.inverse.max(dist(&group_mul(&ctx, &z, &group_inv(&z))?, &e));
            let hom = group_mul(&ctx, &dilate(r, &z)?, &dilate(r, &v)?)?;
            w.dil_hom = w.dil_hom.max(dist(&dilate(r, &zv)?, &hom));
            w.dil_norm = w.dil_norm.max((koranyi_norm(&dilate(r, &z)?) - r * rz).abs());
            // z·B(v, δ) = B(z·v, δ)
            let moved = group_mul(&ctx, &z, &u)?;
            let before = koranyi_norm(&group_mul(&ctx, &group_inv(&v), &u)?);
            let after = koranyi_norm(&group_mul(&ctx, &group_inv(&zv), &moved)?);
            w.translation = w.translation.max((before - after).abs());
            let delta = rng.gen_range(0.1..2.0);
            if (before - delta).abs() > 1e-9 {
                let b0 = Ball::new(v.clone(), delta)?;
                let b1 = Ball::new(zv.clone(), delta)?;
                if ball_contains(&b0, &u) != ball_contains(&b1, &moved) {
                    w.membership_flips += 1;
                }
            }
        }
    }
    c.note(format!("{} random unit-scale samples over {} seeds", per_seed * seeds.len(), seeds.len()));
    c.at_most("koranyi_symmetry", "koranyi-norm", w.symmetry, ALGEBRA_TOL)?;
    c.at_most("koranyi_triangle", "koranyi-norm", w.triangle, ALGEBRA_TOL)?;
    c.at_most("koranyi_reverse_triangle", "koranyi-norm", w.reverse, ALGEBRA_TOL)?;
    c.at_most("associativity", "group-law", w.assoc, ALGEBRA_TOL)?;
    c.at_most("inverse", "group-law", w.inverse, ALGEBRA_TOL)?;
    c.at_most("dilation_homomorphism", "dilation-automorphism", w.dil_hom, ALGEBRA_TOL)?;
    c.at_most("dilation_norm_homogeneity", "dilation-automorphism", w.dil_norm, ALGEBRA_TOL)?;
    c.at_most("ball_translation_distance", "ball-translation", w.translation, ALGEBRA_TOL)?;
    c.holds(
        "ball_translation_membership",
        "ball-translation",
        w.membership_flips == 0,
        format!("{} membership flips", w.membership_flips),
    )?;
    invariant_fields(c)
}

/// Finite-difference invariant derivatives against the closed forms
/// `X₁ = ∂₁ + ½x₂∂ₜ`, `X₂ = ∂₂ − ½x₁∂ₜ` and their right-invariant mirrors.
fn invariant_fields(c: &mut Checks) -> Result<()> {
    let f = |z: &Point| z.t + z.x[0] * z.x[0] * z.x[1] + (z.x[1] - z.t).sin();
    // ∂₁f, ∂₂f, ∂ₜf
    let grad = |z: &Point| {
        let cs = (z.x[1] - z.t).cos();
        [2.0 * z.x[0] * z.x[1], z.x[0] * z.x[0] + cs, 1.0 - cs]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(c.config.seeds[0]);
    let mut worst = 0.0f64;
    let mut worst_t = 0.0f64;
    for _ in 0..DERIVATIVE_SAMPLES {
        let z = unit_point(&mut rng);
        let g = grad(&z);
        for (side, sign) in [(Side::Left, 1.0), (Side::Right, -1.0)] {
            let exact = [g[0] + sign * 0.5 * z.x[1] * g[2], g[1] - sign * 0.5 * z.x[0] * g[2]];
            for (k, want) in exact.iter().enumerate() {
                let i = MultiIndex::new(if k == 0 { &[1, 0, 0] } else { &[0, 1, 0] });
                let got = invariant_derivative(&f, &i, side, &z, 1e-4)?;
                worst = worst.max((got - want).abs());
            }
            let got = invariant_derivative(&f, &MultiIndex::new(&[0, 0, 1]), side, &z, 1e-4)?;
            worst_t = worst_t.max((got - g[2]).abs());
        }
    }
    c.at_most("horizontal_field_closed_form", "invariant-fields", worst, DERIVATIVE_TOL)?;
    c.at_most("vertical_field_closed_form", "invariant-fields", worst_t, DERIVATIVE_TOL)
}

const MEASURE_H: f64 = 1.0 / 64.0;

/// Box of half-widths `(1.1δ, 0.3δ²)`, enough to hold `B(e, δ)` with margin.
fn ball_box(delta: f64, h: f64) -> Result<GridSpec> {
    GridSpec::new(1.1 * delta, 0.3 * delta * delta, h, h)
}

pub(super) fn measure(c: &mut Checks) -> Result<()> {
    let e = Point::identity(1);
    let spec = match c.config.grid {
        Some(g) => g,
        None => ball_box(1.0, MEASURE_H)?,
    };
    let grid = build_grid(spec)?;
    let unit = Ball::new(e.clone(), 1.0)?;
    let m1 = integrate(&ball_indicator(&grid, &unit));
    c.rel("unit_ball_measure", "ball-volume", m1, UNIT_BALL_MEASURE_H1, 0.01)?;
    c.with_note(format!("spacing hx = {}, ht = {}", spec.hx, spec.ht));

    // δ^Q scaling at one fixed spacing
    let mut ratios = Vec::new();
    for delta in [0.5, 1.0, 2.0] {
        let g = build_grid(ball_box(delta, MEASURE_H)?)?;
        let m = g.ball_measure(&Ball::new(e.clone(), delta)?);
        ratios.push(m / delta.powi(4));
    }
    c.at_most("ball_measure_scaling_spread", "ball-volume", super::spread(&ratios) - 1.0, 0.02)?;
    c.with_note(format!("|B(e,δ)|/δ⁴ for δ = 0.5, 1, 2: {ratios:?}"));

    // midpoint refinement on the indicator: error at h versus h/2
    let errs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
        .iter()
        .map(|&h| -> Result<f64> {
            let g = build_grid(ball_box(1.0, h)?)?;
            Ok((g.ball_measure(&unit) - UNIT_BALL_MEASURE_H1).abs())
        })
        .collect::<Result<_>>()?;
    c.at_least("refinement_gain_first_halving", "ball-volume", errs[0] / errs[1], 1.5)?;
    c.with_note(format!("errors at h = 1/16, 1/32, 1/64: {errs:?}"));
    c.at_least("refinement_gain_second_halving", "ball-volume", errs[1] / errs[2], 1.5)?;

    // Haar invariance: ∫f(z₀·z)dz = ∫f(z)dz for a rapidly decaying f
    let g = build_grid(GridSpec::centered_cells(48, 48, 1.0 / 8.0, 1.0 / 8.0)?)?;
    let bump = |z: &Point| (-(z.x[0] * z.x[0] + z.x[1] * z.x[1]) - 2.0 * z.t * z.t).exp() * (1.0 + 0.5 * z.x[0]);
    let base = integrate(&sample(bump, &g)?);
    let mut worst = 0.0f64;
    for center in &c.config.centers {
        let z0 = Point::from_h1(*center);
        let moved = integrate(&sample(|z: &Point| bump(&mul_unchecked(&z0, z)), &g)?);
        worst = worst.max((moved / base - 1.0).abs());
        // right translations preserve Lebesgue measure as well
        let right = integrate(&sample(|z: &Point| bump(&mul_unchecked(z, &z0)), &g)?);
        worst = worst.max((right / base - 1.0).abs());
    }
    c.at_most("haar_translation_invariance", "haar-measure", worst, 1e-8)?;

    // integrate is linear and monotone
    let f1 = sample(bump, &g)?;
    let f2 = sample(|z: &Point| (-(z.x[0] * z.x[0] + z.x[1] * z.x[1] + z.t * z.t)).exp(), &g)?;
    let lhs = integrate(&f1.combine(2.0, &f2, -0.5)?);
    let rhs = 2.0 * integrate(&f1) - 0.5 * integrate(&f2);
    c.at_most("integral_linearity", "haar-measure", (lhs - rhs).abs() / rhs.abs(), 1e-11)?;
    let bigger = f1.map(|v| v.abs()).combine(1.0, &f2, 1.0)?;
    c.holds("integral_monotone", "haar-measure", integrate(&bigger) >= integrate(&f1), "")?;
    Ok(())
}
