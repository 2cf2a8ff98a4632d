//! `atoms` suite: atom axioms, translation, synthesis and the 𝒜-quantity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Checks;
use crate::atoms::{
    atom_grid, make_atom, project_moments, synthesize, translate_atom, validate_atom, validate_atom_with, Atom,
    AtomTolerances,
};
use crate::error::Result;
use crate::exponent::{constant, dpdot, sobolev_exponent, ExponentFn};
use crate::grid::{build_grid, Grid, GridSpec};
use crate::group::{Ball, GroupContext, Point};
use crate::luxemburg::{script_a, script_a_with_power};

const Q: f64 = 4.0;
const FAMILY_DRAWS: usize = 20;
const MAX_OVERLAP: usize = 4;
const ATOM_MARGIN: f64 = 1.25;

/// `p₀` strictly above `max(1, p₊)`.
pub(super) fn sweep_p0(p: &ExponentFn) -> f64 {
    p.p_plus().max(1.0) + 0.5
}

/// Moment order used by the sweep: at least `𝒟_p`, and `N − 1` for the
/// largest configured kernel order.
fn sweep_order(p: &ExponentFn, orders: &[u32]) -> u32 {
    let n = orders.iter().copied().max().unwrap_or(1);
    dpdot(p, &GroupContext::h1()).max(n.saturating_sub(1))
}

pub(super) fn atoms(c: &mut Checks) -> Result<()> {
    let exps = c.config.exponent_fns()?;
    let mut built = 0usize;
    let mut valid = 0usize;
    let mut translated_ok = 0usize;
    let mut worst_size = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut worst_translated = 0.0f64;
    let mut idempotence = 0.0f64;
    let mut norm_drift = 0.0f64;
    for p in &exps {
        let p0 = sweep_p0(p);
        let d = sweep_order(p, &c.config.orders);
        for &delta in &c.config.deltas {
            for center in &c.config.centers {
                let grid = atom_grid(*center, delta, ATOM_MARGIN)?;
                let ball = Ball::new(Point::from_h1(*center), delta)?;
                for &seed in &c.config.seeds {
                    let a = make_atom(&ball, p, p0, d, seed, &grid)?;
                    built += 1;
                    let rep = a.report()?;
                    valid += usize::from(rep.pass);
                    worst_size = worst_size.max(rep.size.slack);
                    worst_moment = worst_moment.max(rep.moments.measured);

                    let t = translate_atom(&a, &ball.center)?;
                    let trep = validate_atom_with(&t.field, &t.ball, &t.exponent, p0, d, AtomTolerances::resampled())?;
                    translated_ok += usize::from(trep.pass);
                    worst_translated = worst_translated.max(trep.moments.measured);
                    norm_drift = norm_drift.max((t.field.lp_norm(p0) / a.field.lp_norm(p0) - 1.0).abs());

                    let again = project_moments(&a.field, &a.ball, d)?;
                    let scale = a.field.sup_abs();
                    let change = again
                        .values()
                        .iter()
                        .zip(a.field.values())
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    idempotence = idempotence.max(change / scale);
                }
            }
        }
    }
    c.note(format!("{built} atoms over exponents × radii × centers × seeds"));
    c.holds("atoms_pass_axioms", "atom-axioms", valid == built, format!("{valid} of {built} pass"))?;
    c.at_most("atom_size_slack", "atom-axioms", worst_size, 1e-8)?;
    c.at_most("atom_moment_residual", "atom-validation", worst_moment, 1e-10)?;
    c.holds(
        "translated_atoms_revalidate",
        "atom-translation",
        translated_ok == built,
        format!("{translated_ok} of {built} pass at resampling tolerance"),
    )?;
    c.at_most("translated_moment_residual", "atom-translation", worst_translated, 1e-6)?;
    c.at_most("translated_size_drift", "atom-translation", norm_drift, 1e-6)?;
    c.at_most("projection_idempotent", "atom-projection", idempotence, 1e-12)?;

    validator_rejections(c)?;
    synthesis(c)?;
    script_a_families(c, &exps)
}

fn validator_rejections(c: &mut Checks) -> Result<()> {
    let p = constant(2.0)?;
    let ball = Ball::new(Point::identity(1), 1.0)?;
    let grid = atom_grid([0.0; 3], 1.0, ATOM_MARGIN)?;
    let a = make_atom(&ball, &p, 2.5, 1, c.config.seeds[0], &grid)?;
    let doubled = validate_atom(&a.field.scaled(2.0), &ball, &p, 2.5, 1)?;
    c.holds("doubled_atom_fails_size", "atom-validation", doubled.moments.pass && !doubled.size.pass, "")?;
    let chi = crate::grid::ball_indicator(&grid, &ball);
    let target = crate::atoms::size_bound(&grid, &ball, &p, 2.5)?;
    let chi = chi.scaled(target / chi.lp_norm(2.5));
    let rep = validate_atom(&chi, &ball, &p, 2.5, 0)?;
    c.holds("indicator_fails_moments", "atom-validation", rep.size.pass && !rep.moments.pass, "")
}

fn synthesis(c: &mut Checks) -> Result<()> {
    let p = constant(2.0)?;
    let grid = build_grid(GridSpec::new(2.0, 1.0, 1.0 / 16.0, 1.0 / 64.0)?)?;
    let seed = c.config.seeds[0];
    let balls = [
        Ball::new(Point::h1(-1.0, 0.0, 0.0), 0.75)?,
        Ball::new(Point::h1(1.0, 0.0, 0.0), 0.75)?,
        Ball::new(Point::h1(0.0, 0.0, 0.5), 0.5)?,
    ];
    let atoms: Vec<Atom> = balls
        .iter()
        .enumerate()
        .map(|(k, b)| make_atom(b, &p, 2.0, 1, seed + k as u64, &grid))
        .collect::<Result<_>>()?;
    let single = synthesize(&[1.0], &atoms[..1])?;
    c.holds("synthesize_single_atom", "atomic-sum", single.values() == atoms[0].field.values(), "")?;
    let lambdas = [0.5, 2.0, 1.25];
    let sum = synthesize(&lambdas, &atoms)?;
    let lhs = sum.lp_norm(2.0);
    let tri: f64 = lambdas.iter().zip(&atoms).map(|(l, a)| l * a.field.lp_norm(2.0)).sum();
    c.at_most("synthesize_triangle", "atomic-sum", lhs / tri, 1.0)?;
    // the balls are pairwise disjoint
    let pyth: f64 = lambdas.iter().zip(&atoms).map(|(l, a)| (l * a.field.lp_norm(2.0)).powi(2)).sum();
    c.rel("synthesize_disjoint_pythagoras", "atomic-sum", lhs * lhs, pyth, 1e-10)
}

fn family_grid() -> Result<Grid> {
    build_grid(GridSpec::new(1.625, 0.625, 1.0 / 16.0, 1.0 / 32.0)?)
}

/// Up to 8 balls of radius ½ or 1, redrawn until no cell lies in more than
/// four of them.
fn random_family(grid: &Grid, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<Ball>)> {
    loop {
        let count = rng.gen_range(1..=8);
        let mut cover = vec![0usize; grid.len()];
        let mut balls = Vec::with_capacity(count);
        for _ in 0..count {
            let delta = if rng.gen_bool(0.5) { 0.5 } else { 1.0 };
            let center = Point::h1(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.25..0.25));
            let b = Ball::new(center, delta)?;
            for i in grid.ball_cells(&b) {
                cover[i] += 1;
            }
            balls.push(b);
        }
        if cover.iter().all(|k| *k <= MAX_OVERLAP) {
            let lambdas = (0..count).map(|_| rng.gen_range(0.1..2.0)).collect();
            return Ok((lambdas, balls));
        }
    }
}

fn script_a_families(c: &mut Checks, exps: &[ExponentFn]) -> Result<()> {
    let grid = family_grid()?;
    let seeds = &c.config.seeds;
    let mut families = Vec::with_capacity(FAMILY_DRAWS);
    for k in 0..FAMILY_DRAWS {
        let seed = seeds[k % seeds.len()].wrapping_mul(0x9e37_79b9).wrapping_add(k as u64);
        families.push(random_family(&grid, &mut ChaCha8Rng::seed_from_u64(seed))?);
    }
    for p in exps {
        let label = p.label();
        let pu = p.p_underline();
        let mut ratios = Vec::with_capacity(families.len());
        for (lambdas, balls) in &families {
            let a = script_a(lambdas, balls, p, &grid)?;
            ratios.push(script_a_with_power(lambdas, balls, p, &grid, 0.5 * pu)? / a);
        }
        c.at_least(&format!("power_embedding[{label}]"), "script-a-power", super::min(&ratios), 1.0 - 1e-9)?;
        c.spread(&format!("power_equivalence_spread[{label}]"), "script-a-power", &ratios, 10.0)?;
    }
    for p in exps {
        for &alpha in &c.config.alphas {
            if !(p.p_plus() < Q / alpha) {
                c.note(format!("{}, α = {alpha}: Sobolev comparison skipped, needs p₊ < Q/α", p.label()));
                continue;
            }
            let q = sobolev_exponent(p, alpha, &GroupContext::h1())?;
            let ratios: Vec<f64> = families
                .iter()
                .map(|(l, b)| Ok(script_a(l, b, &q, &grid)? / script_a(l, b, p, &grid)?))
                .collect::<Result<_>>()?;
            c.spread(&format!("sobolev_script_a_spread[{},α={alpha}]", p.label()), "script-a-sobolev", &ratios, 10.0)?;
        }
    }
    Ok(())
}
