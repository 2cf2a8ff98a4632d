//! Grand maximal function over a finite dictionary of normalized profiles.
//!
//! Each scale `t` reads the input through a pooled copy of the grid (blocks of
//! `kx × kx × kt` cells, zero-padded) with both factors as coarse as possible
//! while `B(z,t)` still spans [`MIN_POOLED_CELLS`] pooled cells along x and
//! along t. Both conditions are dilation invariant, so the result is covariant
//! under a joint rescaling of grid and t-schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exponent::{dpdot, ExponentFn};
use crate::grid::{Field, Grid};
use crate::group::{default_step, h1, invariant_derivative, koranyi_norm, GroupContext, MultiIndex, Point, Side};

use super::RadiiSchedule;

/// Pooled cells a ball must span along x and along t.
pub const MIN_POOLED_CELLS: f64 = 4.0;

const Q: f64 = 4.0;

/// `scale · (1 − ρ(u)⁴)₊^m · P(u)` for a polynomial `P` in `(x₁, x₂, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub terms: Vec<([u32; 3], f64)>,
    pub bump_power: u32,
    pub scale: f64,
    /// Numerically evaluated Schwartz seminorm of the unscaled profile.
    pub seminorm: f64,
}

impl Profile {
    pub fn new(name: &str, terms: Vec<([u32; 3], f64)>, bump_power: u32) -> Self {
        Self {
            name: name.into(),
            terms,
            bump_power,
            scale: 1.0,
            seminorm: f64::NAN,
        }
    }

    #[inline]
    fn poly(&self, u: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * u[0].powi(e[0] as i32) * u[1].powi(e[1] as i32) * u[2].powi(e[2] as i32))
            .sum()
    }

    #[inline]
    fn bump(&self, u: [f64; 3]) -> f64 {
        let s = h1::rho4(u);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(self.bump_power as i32)
        }
    }

    /// The profile without its normalization.
    pub fn raw(&self, u: [f64; 3]) -> f64 {
        let b = self.bump(u);
        if b == 0.0 {
            0.0
        } else {
            b * self.poly(u)
        }
    }

    pub fn eval(&self, u: [f64; 3]) -> f64 {
        self.scale * self.raw(u)
    }
}

/// `Σ_{d(I) ≤ L} sup_z (1+ρ(z))^{(L+1)(Q+1)} |X^I φ(z)|` over `samples`.
pub fn schwartz_seminorm<F>(phi: &F, l: u32, samples: &[Point]) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    let Some(first) = samples.first() else {
        return invalid("seminorm needs samples");
    };
    let ctx = GroupContext::new(first.n())?;
    let weight_exp = ((l + 1) * (ctx.q() as u32 + 1)) as i32;
    let mut total = 0.0;
    for index in MultiIndex::up_to_degree(&ctx, l) {
        let mut sup = 0.0f64;
        for z in samples {
            let h = default_step(&index, z);
            let d = invariant_derivative(phi, &index, Side::Left, z, h)?;
            sup = sup.max((1.0 + koranyi_norm(z)).powi(weight_exp) * d.abs());
        }
        total += sup;
    }
    Ok(total)
}

/// Seeded points spread through the unit ball.
pub fn unit_ball_samples(count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Point::identity(1)];
    while out.len() < count {
        let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.25..0.25)];
        if h1::rho4(c) < 1.0 {
            out.push(Point::from_h1(c));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandMaximalDictionary {
    pub profiles: Vec<Profile>,
    pub l: u32,
    pub t_schedule: RadiiSchedule,
}

impl GrandMaximalDictionary {
    /// `L = 𝒟_{p(·)} + Q + 3`.
    pub fn default_order(p: &ExponentFn) -> u32 {
        let ctx = GroupContext::h1();
        dpdot(p, &ctx) + ctx.q() as u32 + 3
    }

    /// The six built-in profiles, each divided by its seminorm of order `l`.
    pub fn standard(l: u32, t_schedule: RadiiSchedule) -> Result<Self> {
        let m = l + 2;
        let profiles = vec![
            Profile::new("bump", vec![([0, 0, 0], 1.0)], m),
            Profile::new("tilt", vec![([1, 0, 0], 1.0), ([0, 1, 0], 1.0)], m),
            Profile::new("ring", vec![([0, 0, 0], 1.0), ([2, 0, 0], -3.0), ([0, 2, 0], -3.0)], m),
            Profile::new("twist", vec![([0, 0, 1], 4.0), ([2, 0, 1], -8.0), ([0, 2, 1], -8.0)], m),
            Profile::new("cubic", vec![([3, 0, 0], 4.0), ([1, 0, 0], -3.0)], m),
            Profile::new("layers", vec![([0, 0, 4], 128.0), ([0, 0, 2], -32.0), ([0, 0, 0], 1.0)], m),
        ];
        Self::from_profiles(profiles, l, t_schedule)
    }

    pub fn from_profiles(mut profiles: Vec<Profile>, l: u32, t_schedule: RadiiSchedule) -> Result<Self> {
        if profiles.is_empty() {
            return invalid("grand maximal dictionary must not be empty");
        }
        t_schedule.validate()?;
        let samples = unit_ball_samples(256, 0x5eed);
        for p in &mut profiles {
            let raw = p.clone();
            let norm = schwartz_seminorm(&|z: &Point| raw.raw(z.as_h1()), l, &samples)?;
            if !(norm > 0.0) || !norm.is_finite() {
                return invalid(format!("profile `{}` has seminorm {norm}", p.name));
            }
            p.seminorm = norm;
            p.scale = 1.0 / norm;
        }
        Ok(Self {
            profiles,
            l,
            t_schedule,
        })
    }

    /// The same dictionary restricted to its first `n` profiles.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            profiles: self.profiles[..n.min(self.profiles.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Same profiles with the t-schedule dilated by `r`.
    pub fn dilated(&self, r: f64) -> Self {
        Self {
            t_schedule: self.t_schedule.dilated(r),
            ..self.clone()
        }
    }
}

struct PooledColumn {
    y: [f64; 2],
    k0: usize,
    mass: Vec<f64>,
}

struct Pooled {
    ht: f64,
    t0: f64,
    /// Block width along x and y.
    w: f64,
    /// Center of block (0, 0).
    origin: [f64; 2],
    blocks: [usize; 2],
    /// Column slot per block, row-major in (bi, bj).
    slot: Vec<Option<u32>>,
    cols: Vec<PooledColumn>,
}

fn pool(f: &Field, (k, kt): (usize, usize)) -> Pooled {
    let grid = f.grid();
    let spec = grid.spec();
    let [nx, ny, nt] = grid.shape();
    let (px, py, pt) = (nx.div_ceil(k), ny.div_ceil(k), nt.div_ceil(kt));
    let vol = grid.cell_volume();
    let vals = f.values();
    let half = (k as f64 - 1.0) / 2.0;
    let half_t = (kt as f64 - 1.0) / 2.0;
    let mut cols = Vec::new();
    let mut slot = vec![None; px * py];
    for bi in 0..px {
        for bj in 0..py {
            let mut mass = vec![0.0; pt];
            let mut any = false;
            for i in bi * k..((bi + 1) * k).min(nx) {
                for j in bj * k..((bj + 1) * k).min(ny) {
                    let base = grid.index(i, j, 0);
                    for (kk, v) in vals[base..base + nt].iter().enumerate() {
                        if *v != 0.0 {
                            mass[kk / kt] += v * vol;
                            any = true;
                        }
                    }
                }
            }
            if !any {
                continue;
            }
            let lo = mass.iter().position(|m| *m != 0.0).unwrap_or(0);
            let hi = mass.iter().rposition(|m| *m != 0.0).unwrap_or(lo);
            slot[bi * py + bj] = Some(cols.len() as u32);
            cols.push(PooledColumn {
                y: [
                    grid.xs[0] + (bi as f64 * k as f64 + half) * spec.hx,
                    grid.ys[0] + (bj as f64 * k as f64 + half) * spec.hx,
                ],
                k0: lo,
                mass: mass[lo..=hi].to_vec(),
            });
        }
    }
    Pooled {
        ht: spec.ht * kt as f64,
        t0: grid.ts[0] + half_t * spec.ht,
        w: k as f64 * spec.hx,
        origin: [grid.xs[0] + half * spec.hx, grid.ys[0] + half * spec.hx],
        blocks: [px, py],
        slot,
        cols,
    }
}

/// Block indices whose centers may lie within `r` of `x` along one axis.
fn block_range(x: f64, r: f64, origin: f64, w: f64, n: usize) -> std::ops::Range<usize> {
    let lo = ((x - r - origin) / w).floor().max(0.0) as usize;
    let hi = (((x + r - origin) / w).ceil() + 1.0).clamp(0.0, n as f64) as usize;
    lo.min(hi)..hi
}

/// Profile polynomials as `(coefficient, [i, j, k])` lists read from power tables.
struct Monomials {
    degree: [usize; 3],
    terms: Vec<Vec<(f64, [usize; 3])>>,
}

impl Monomials {
    fn new(profiles: &[Profile]) -> Self {
        let mut degree = [0usize; 3];
        let terms = profiles
            .iter()
            .map(|p| {
                p.terms
                    .iter()
                    .map(|(e, c)| {
                        let e = [e[0] as usize, e[1] as usize, e[2] as usize];
                        for a in 0..3 {
                            degree[a] = degree[a].max(e[a]);
                        }
                        (c * p.scale, e)
                    })
                    .collect()
            })
            .collect();
        Self { degree, terms }
    }
}

/// `(kx, kt)`: the largest block sides with `kx·hx ≤ 2t/m` and `kt·ht ≤ t²/(2m)`.
fn pool_factor(hx: f64, ht: f64, t: f64) -> (usize, usize) {
    let kx = ((2.0 * t / MIN_POOLED_CELLS) / hx * (1.0 + 1e-12)).floor().max(1.0);
    let kt = ((t * t / (2.0 * MIN_POOLED_CELLS)) / ht * (1.0 + 1e-12)).floor().max(1.0);
    (kx as usize, kt as usize)
}

struct Engine<'a> {
    dict: &'a GrandMaximalDictionary,
    scales: Vec<(f64, usize)>,
    pools: Vec<((usize, usize), Pooled)>,
    monomials: Monomials,
}

impl<'a> Engine<'a> {
    fn new(f: &Field, dict: &'a GrandMaximalDictionary) -> Result<Self> {
        if dict.profiles.is_empty() {
            return invalid("grand maximal dictionary must not be empty");
        }
        let spec = f.grid().spec();
        let mut pools: Vec<((usize, usize), Pooled)> = Vec::new();
        let mut scales = Vec::new();
        for t in dict.t_schedule.radii() {
            let k = pool_factor(spec.hx, spec.ht, t);
            let slot = match pools.iter().position(|(kk, _)| *kk == k) {
                Some(s) => s,
                None => {
                    pools.push((k, pool(f, k)));
                    pools.len() - 1
                }
            };
            scales.push((t, slot));
        }
        Ok(Self {
            dict,
            scales,
            pools,
            monomials: Monomials::new(&dict.profiles),
        })
    }

    /// `(f∗φ_t)(z)` for every profile, accumulated into `out`.
    fn responses(&self, scale: usize, z: [f64; 3], out: &mut [f64]) {
        let (t, slot) = self.scales[scale];
        let pooled = &self.pools[slot].1;
        out.iter_mut().for_each(|v| *v = 0.0);
        let t4 = t * t * t * t;
        let x = [z[0], z[1]];
        let (inv_t, inv_t2) = (1.0 / t, 1.0 / (t * t));
        let bump_power = self.dict.profiles[0].bump_power;
        let same_bump = self.dict.profiles.iter().all(|p| p.bump_power == bump_power);
        let [px, py] = pooled.blocks;
        let mut pw = [[1.0f64; 5]; 3];
        let deg = self.monomials.degree;
        let fast = same_bump && deg.iter().all(|d| *d < 5);
        for bi in block_range(x[0], t, pooled.origin[0], pooled.w, px) {
            for bj in block_range(x[1], t, pooled.origin[1], pooled.w, py) {
                let Some(ci) = pooled.slot[bi * py + bj] else { continue };
                let col = &pooled.cols[ci as usize];
                let d = [col.y[0] - x[0], col.y[1] - x[1]];
                let dd = d[0] * d[0] + d[1] * d[1];
                let rem = t4 - dd * dd;
                if rem <= 0.0 {
                    continue;
                }
                let half = 0.25 * rem.sqrt();
                let c = z[2] + h1::symplectic(x, col.y);
                let first = pooled.t0 + col.k0 as f64 * pooled.ht;
                let a = (((c - half) - first) / pooled.ht).floor().max(0.0) as usize;
                let b = ((((c + half) - first) / pooled.ht).ceil() as i64 + 1).clamp(0, col.mass.len() as i64) as usize;
                for m in a.min(b)..b {
                    let mass = col.mass[m];
                    if mass == 0.0 {
                        continue;
                    }
                    let s = first + m as f64 * pooled.ht;
                    // w⁻¹z = (z⁻¹w)⁻¹ = (−d, −(s − c))
                    let u = [-d[0] * inv_t, -d[1] * inv_t, -(s - c) * inv_t2];
                    if fast {
                        let r4 = h1::rho4(u);
                        if r4 >= 1.0 {
                            continue;
                        }
                        let b = mass * (1.0 - r4).powi(bump_power as i32);
                        for a in 0..3 {
                            for e in 1..=deg[a] {
                                pw[a][e] = pw[a][e - 1] * u[a];
                            }
                        }
                        for (o, terms) in out.iter_mut().zip(&self.monomials.terms) {
                            let mut v = 0.0;
                            for (coef, e) in terms {
                                v += coef * pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]];
                            }
                            *o += b * v;
                        }
                    } else {
                        for (o, p) in out.iter_mut().zip(&self.dict.profiles) {
                            *o += mass * p.eval(u);
                        }
                    }
                }
            }
        }
        let norm = t.powf(-Q);
        out.iter_mut().for_each(|v| *v *= norm);
    }

    fn value(&self, z: [f64; 3], buf: &mut [f64]) -> f64 {
        let mut best = 0.0f64;
        for s in 0..self.scales.len() {
            self.responses(s, z, buf);
            for v in buf.iter() {
                best = best.max(v.abs());
            }
        }
        best
    }
}

/// `max_{t, φ} |(f∗φ_t)(z)|` at the cell centers of `out`.
pub fn grand_maximal_onto(f: &Field, dict: &GrandMaximalDictionary, out: &Grid) -> Result<Field> {
    let engine = Engine::new(f, dict)?;
    let mut buf = vec![0.0; dict.profiles.len()];
    let values = (0..out.len()).map(|i| engine.value(out.center(i), &mut buf)).collect();
    Field::from_values(out, values)
}

pub fn grand_maximal(f: &Field, dict: &GrandMaximalDictionary) -> Result<Field> {
    grand_maximal_onto(f, dict, f.grid())
}

pub fn grand_maximal_at(f: &Field, dict: &GrandMaximalDictionary, z: [f64; 3]) -> Result<f64> {
    let engine = Engine::new(f, dict)?;
    let mut buf = vec![0.0; dict.profiles.len()];
    Ok(engine.value(z, &mut buf))
}

/// Signed `(f∗φ_t)(z)` for one profile and one scheduled scale, computed by
/// the same quadrature the grand maximal function uses.
pub fn profile_response(f: &Field, dict: &GrandMaximalDictionary, profile: usize, scale: usize, z: [f64; 3]) -> Result<f64> {
    let engine = Engine::new(f, dict)?;
    if profile >= dict.profiles.len() || scale >= engine.scales.len() {
        return invalid("profile or scale index out of range");
    }
    let mut buf = vec![0.0; dict.profiles.len()];
    engine.responses(scale, z, &mut buf);
    Ok(buf[profile])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample, GridSpec};

    fn dict() -> GrandMaximalDictionary {
        GrandMaximalDictionary::standard(7, RadiiSchedule::per_decade(0.125, 2.0, 16).unwrap()).unwrap()
    }

    fn bump_field() -> Field {
        let g = build_grid(GridSpec::centered_cells(12, 24, 0.125, 0.0625).unwrap()).unwrap();
        sample(|z| (1.0 - h1::rho4(z.as_h1())).max(0.0).powi(3), &g).unwrap()
    }

    #[test]
    fn profiles_are_normalized() {
        let d = dict();
        assert_eq!(d.profiles.len(), 6);
        for p in &d.profiles {
            assert!(p.seminorm.is_finite() && p.seminorm > 0.0);
            assert!((p.scale * p.seminorm - 1.0).abs() < 1e-15);
        }
        assert_eq!(GrandMaximalDictionary::default_order(&crate::exponent::constant(2.0).unwrap()), 7);
    }

    #[test]
    fn pool_factor_respects_resolution() {
        assert_eq!(pool_factor(0.125, 0.0625, 0.125), (1, 1));
        let (kx, kt) = pool_factor(0.125, 0.0625, 4.0);
        assert_eq!((kx, kt), (16, 32));
        assert!(kx as f64 * 0.125 <= 2.0);
        assert!(kt as f64 * 0.0625 <= 2.0);
    }

    #[test]
    fn zero_field_gives_zero() {
        let f = bump_field();
        let z = Field::zeros(f.grid());
        let g = grand_maximal_at(&z, &dict(), [0.0; 3]).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn dominates_each_response_and_grows_with_the_dictionary() {
        let f = bump_field();
        let d = dict();
        let z = [0.25, -0.125, 0.0625];
        let full = grand_maximal_at(&f, &d, z).unwrap();
        let part = grand_maximal_at(&f, &d.truncated(2), z).unwrap();
        assert!(full >= part);
        for p in 0..d.profiles.len() {
            for s in [0, 5, 10] {
                assert!(full >= profile_response(&f, &d, p, s, z).unwrap().abs());
            }
        }
        assert!(full > 0.0);
    }
}
