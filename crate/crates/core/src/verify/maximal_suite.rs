//! `maximal` suite: fractional maximal identities and Fefferman–Stein ratios.

use super::Checks;
use crate::error::Result;
use crate::exponent::{sobolev_exponent, ExponentFn};
use crate::grid::{ball_indicator, build_grid, sample_supported, Field, Grid, GridSpec};
use crate::group::{h1, Ball, GroupContext, Point, UNIT_BALL_MEASURE_H1};
use crate::luxemburg::luxemburg_norm;
use crate::operators::{frac_maximal, frac_maximal_at, fs_ratio, hl_maximal, maximal_average, RadiiSchedule};

const Q: f64 = 4.0;
const FS_DELTAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const FS_R: f64 = 2.0;

/// Theorem hypotheses for the off-diagonal inequality: `1 < p₋ ≤ p₊ < Q/α`.
pub(super) fn fs_admissible(p: &ExponentFn, alpha: f64) -> bool {
    p.p_minus() > 1.0 && (alpha == 0.0 || p.p_plus() < Q / alpha)
}

fn unit_grid() -> Result<GridSpec> {
    GridSpec::centered_cells(16, 32, 1.0 / 8.0, 1.0 / 16.0)
}

pub(super) fn maximal(c: &mut Checks) -> Result<()> {
    identities(c)?;
    let exps = c.config.exponent_fns()?;
    let mut alphas = vec![0.0];
    alphas.extend(c.config.alphas.iter().copied().filter(|a| *a < Q));
    let unit = unit_grid()?;
    let schedule = RadiiSchedule::for_grid(&unit);
    let centers: Vec<[f64; 3]> = c
        .config
        .centers
        .iter()
        .copied()
        .filter(|ctr| build_grid(unit).map(|g| g.contains_ball(&Ball::new(Point::from_h1(*ctr), 1.0).unwrap(), 0.0)).unwrap_or(false))
        .collect();
    // The discrete operator commutes with dilations of grid and schedule
    // together, M_α(f∘δ⁻¹)(δz) = δ^α M_α f(z), so one evaluation per
    // (center, α) serves every exponent and every δ.
    let unit_grid = build_grid(unit)?;
    let mut cross_checked = false;
    let (mut points, mut finite) = (0usize, 0usize);
    for ctr in &centers {
        let ball = Ball::new(Point::from_h1(*ctr), 1.0)?;
        let f1 = ball_indicator(&unit_grid, &ball);
        for &alpha in &alphas {
            let admissible: Vec<&ExponentFn> = exps.iter().filter(|p| fs_admissible(p, alpha)).collect();
            if admissible.is_empty() {
                continue;
            }
            let m1 = frac_maximal(&f1, alpha, &schedule)?;
            for p in admissible {
                let q = if alpha > 0.0 { sobolev_exponent(p, alpha, &GroupContext::h1())? } else { p.clone() };
                let mut ratios = Vec::with_capacity(FS_DELTAS.len());
                for delta in FS_DELTAS {
                    let grid = build_grid(unit.dilated(delta))?;
                    let m = Field::from_values(&grid, m1.values().iter().map(|v| v * delta.powf(alpha)).collect())?;
                    let f = Field::from_values(&grid, f1.values().to_vec())?;
                    let num = luxemburg_norm(&m, &q)?.value;
                    let den = luxemburg_norm(&f, p)?.value;
                    ratios.push(num / den);
                    points += 1;
                    finite += usize::from((num / den).is_finite() && num / den > 0.0);
                    if !cross_checked && alpha > 0.0 && delta == 2.0 {
                        let fd = ball_indicator(&grid, &Ball::new(Point::from_h1(h1::dilate(delta, *ctr)), delta)?);
                        let direct = fs_ratio(&[fd], FS_R, alpha, p, &schedule.dilated(delta))?;
                        c.rel("fs_dilation_reuse_consistency", "fefferman-stein", num / den, direct, 1e-9)?;
                        cross_checked = true;
                    }
                }
                let tag = format!("{},α={alpha},c={ctr:?}", p.label());
                let slope = super::log_log_slope(&FS_DELTAS, &ratios);
                c.abs(&format!("fs_single_ball_slope[{tag}]"), "fefferman-stein", slope, 0.0, 0.2)?;
                c.with_note(format!("ratios over δ = 0.5, 1, 2, 4: {ratios:.6?}"));
            }
        }
    }
    c.holds("fs_sweep_finite", "fefferman-stein", points > 0 && finite == points, format!("{finite} of {points} sweep points finite"))?;
    for p in &exps {
        for &alpha in &alphas {
            if !fs_admissible(p, alpha) {
                c.note(format!("{}, α = {alpha}: skipped, needs 1 < p₋ ≤ p₊ < Q/α", p.label()));
            }
        }
    }
    family_identities(c, &exps)
}

fn identity_grid() -> Result<Grid> {
    build_grid(GridSpec::new(2.0, 2.0, 1.0 / 8.0, 1.0 / 16.0)?)
}

fn identities(c: &mut Checks) -> Result<()> {
    let grid = identity_grid()?;
    let sched = RadiiSchedule::for_grid(grid.spec());
    let e = Point::identity(1);
    let f = ball_indicator(&grid, &Ball::new(e.clone(), 1.0)?);

    let mut worst = 0.0f64;
    for alpha in [0.0, 1.0, 2.0] {
        let v = frac_maximal_at(&f, alpha, &sched, [0.0; 3])?;
        worst = worst.max((v / UNIT_BALL_MEASURE_H1.powf(alpha / Q) - 1.0).abs());
    }
    c.at_most("ball_maximal_at_identity", "maximal-definition", worst, 0.05)?;

    // dilation under a rescaled schedule at one fixed spacing
    let mut worst = 0.0f64;
    for alpha in [1.0, 2.0] {
        for delta in [0.5f64, 2.0] {
            let g = build_grid(GridSpec::new(1.1 * delta, 0.3 * delta * delta, 1.0 / 32.0, 1.0 / 64.0)?)?;
            let fd = ball_indicator(&g, &Ball::new(e.clone(), delta)?);
            let v = frac_maximal_at(&fd, alpha, &sched.dilated(delta), [0.0; 3])?;
            let want = delta.powf(alpha) * UNIT_BALL_MEASURE_H1.powf(alpha / Q);
            worst = worst.max((v / want - 1.0).abs());
        }
    }
    c.at_most("ball_maximal_dilation", "maximal-definition", worst, 0.05)?;

    // B(z, R+1) ⊇ B(e,1) when ρ(z) = R, so its average is (R+1)^{−Q} and the
    // maximal function sits above it
    let mut worst_avg = 0.0f64;
    let mut lowest = f64::INFINITY;
    let mut excess = Vec::new();
    for z in [[2.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.5, 0.0, 0.75]] {
        let r = h1::rho(z);
        let want = (r + 1.0).powf(-Q);
        let avg = maximal_average(&f, 0.0, z, r + 1.0);
        worst_avg = worst_avg.max((avg / want - 1.0).abs());
        let m = frac_maximal_at(&f, 0.0, &sched, z)?;
        lowest = lowest.min(m / want);
        excess.push(m / want);
    }
    c.at_most("far_field_enclosing_average", "maximal-definition", worst_avg, 0.25)?;
    c.at_least("far_field_lower_bound", "maximal-definition", lowest, 1.0 - 0.25)?;
    c.with_note(format!("M χ(z)·(R+1)^Q = {excess:.4?}; smaller balls give larger averages"));

    // operator identities on a coarse grid with a compactly supported bump
    let grid = build_grid(GridSpec::new(2.0, 2.0, 0.25, 0.125)?)?;
    let sched = RadiiSchedule::for_grid(grid.spec());
    let f = ball_indicator(&grid, &Ball::new(e.clone(), 1.0)?);
    let support = Ball::new(Point::h1(0.25, 0.0, 0.125), 1.25)?;
    let bump = sample_supported(
        |z: &Point| {
            let s = h1::rho4(h1::left_div([0.25, 0.0, 0.125], z.as_h1())) / 1.25f64.powi(4);
            if s < 1.0 {
                (1.0 - s).powi(2) * (1.0 + 0.5 * z.x[0])
            } else {
                0.0
            }
        },
        &grid,
        &support,
    )?;
    let m0 = frac_maximal(&bump, 0.0, &sched)?;
    let hl = hl_maximal(&bump, &sched)?;
    c.holds("order_zero_is_hardy_littlewood", "maximal-definition", m0.values() == hl.values(), "bitwise comparison")?;

    let m1 = frac_maximal(&bump, 1.0, &sched)?;
    let bigger = bump.combine(1.0, &f, 0.5)?;
    let mb = frac_maximal(&bigger, 1.0, &sched)?;
    let monotone = m1.values().iter().zip(mb.values()).all(|(a, b)| a <= b);
    c.holds("maximal_monotone", "maximal-definition", monotone, "")?;
    let m3 = frac_maximal(&bump.scaled(3.0), 1.0, &sched)?;
    let homog = m1
        .values()
        .iter()
        .zip(m3.values())
        .map(|(a, b)| (b - 3.0 * a).abs() / (3.0 * a).max(1e-300))
        .fold(0.0, f64::max);
    c.at_most("maximal_homogeneity", "maximal-definition", homog, 1e-12)?;

    let mut below = 0usize;
    for idx in (0..grid.len()).step_by(97) {
        let z = grid.center(idx);
        for r in sched.radii() {
            if maximal_average(&bump, 1.0, z, r) > m1.values()[idx] * (1.0 + 1e-12) {
                below += 1;
            }
        }
    }
    c.holds("maximal_dominates_averages", "maximal-definition", below == 0, format!("{below} violations"))
}

fn family_identities(c: &mut Checks, exps: &[ExponentFn]) -> Result<()> {
    let grid = build_grid(GridSpec::new(2.0, 2.0, 0.25, 0.125)?)?;
    let sched = RadiiSchedule::for_grid(grid.spec());
    let balls = [
        Ball::new(Point::identity(1), 1.0)?,
        Ball::new(Point::h1(0.5, -0.5, 0.25), 0.75)?,
        Ball::new(Point::h1(-0.75, 0.25, -0.5), 1.0)?,
    ];
    let fam: Vec<_> = balls.iter().map(|b| ball_indicator(&grid, b)).collect();
    let mut scale_dev = 0.0f64;
    let mut dup_dev = 0.0f64;
    let mut finite = true;
    for p in exps {
        for alpha in [0.0, 1.0] {
            if !fs_admissible(p, alpha) {
                continue;
            }
            let base = fs_ratio(&fam[..1], FS_R, alpha, p, &sched)?;
            let scaled = fs_ratio(&[fam[0].scaled(3.5)], FS_R, alpha, p, &sched)?;
            let dup = fs_ratio(&[fam[0].clone(), fam[0].clone()], FS_R, alpha, p, &sched)?;
            scale_dev = scale_dev.max((scaled / base - 1.0).abs());
            dup_dev = dup_dev.max((dup / base - 1.0).abs());
            let all = fs_ratio(&fam, FS_R, alpha, p, &sched)?;
            finite &= all.is_finite() && all > 0.0;
        }
    }
    c.at_most("fs_ratio_scale_invariance", "fefferman-stein", scale_dev, 1e-9)?;
    c.at_most("fs_ratio_duplicate_family", "fefferman-stein", dup_dev, 1e-9)?;
    c.holds("fs_ratio_family_finite", "fefferman-stein", finite, "three-ball families")
}
