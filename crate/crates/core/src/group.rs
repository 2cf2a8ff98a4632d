//! Exact arithmetic on the Heisenberg group ℍⁿ = ℝ²ⁿ × ℝ.
//!
//! Points are `(x, t)` with the law `(x,t)·(y,s) = (x+y, t+s+xᵀJy)` where
//! `xᵀJy = ½ Σᵢ (x_{i+n} yᵢ − xᵢ y_{i+n})`, parabolic dilations
//! `r·(x,t) = (rx, r²t)` and the Koranyi gauge `ρ(x,t) = (|x|⁴+16t²)^{1/4}`.
//!
//! Grid-based modules work in ℍ¹ and use the `h1` helpers on `[f64; 3]`
//! coordinates to stay allocation-free in hot loops.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};

/// Measure of the unit Koranyi ball in ℍ¹: `π ∫₀¹ r√(1−r⁴) dr = π²/8`.
pub const UNIT_BALL_MEASURE_H1: f64 = std::f64::consts::PI * std::f64::consts::PI / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupContext {
    n: usize,
}

impl GroupContext {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("group dimension n must be at least 1");
        }
        Ok(Self { n })
    }

    pub fn h1() -> Self {
        Self { n: 1 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneous dimension `Q = 2n + 2`.
    pub fn q(&self) -> usize {
        2 * self.n + 2
    }

    /// Number of coordinates `2n + 1`.
    pub fn coords(&self) -> usize {
        2 * self.n + 1
    }

    pub fn identity(&self) -> Point {
        Point::identity(self.n)
    }

    fn check(&self, z: &Point) -> Result<()> {
        if z.x.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                got: z.x.len(),
            });
        }
        Ok(())
    }
}

impl Default for GroupContext {
    fn default() -> Self {
        Self::h1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: SmallVec<[f64; 2]>,
    pub t: f64,
}

impl Point {
    pub fn new(x: &[f64], t: f64) -> Self {
        Self {
            x: SmallVec::from_slice(x),
            t,
        }
    }

    pub fn h1(x1: f64, x2: f64, t: f64) -> Self {
        Self {
            x: SmallVec::from_slice(&[x1, x2]),
            t,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            x: SmallVec::from_elem(0.0, 2 * n),
            t: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len() / 2
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }

    /// Coordinates `(x₁, x₂, t)` of a point of ℍ¹.
    pub fn as_h1(&self) -> [f64; 3] {
        debug_assert_eq!(self.x.len(), 2);
        [self.x[0], self.x[1], self.t]
    }

    pub fn from_h1(c: [f64; 3]) -> Self {
        Self::h1(c[0], c[1], c[2])
    }

    /// Coordinate `k` in the ordering `(x₁, …, x₂ₙ, t)`.
    pub fn coord(&self, k: usize) -> f64 {
        if k < self.x.len() {
            self.x[k]
        } else {
            self.t
        }
    }

    /// The one-parameter subgroup element `s·e_k` (coordinate `k` set to `s`).
    pub fn basis(n: usize, k: usize, s: f64) -> Self {
        let mut p = Self::identity(n);
        if k < 2 * n {
            p.x[k] = s;
        } else {
            p.t = s;
        }
        p
    }
}

/// `xᵀJy` for the symplectic block matrix of the group law.
fn symplectic(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += x[i + n] * y[i] - x[i] * y[i + n];
    }
    0.5 * acc
}

pub fn group_mul(ctx: &GroupContext, z: &Point, w: &Point) -> Result<Point> {
    ctx.check(z)?;
    ctx.check(w)?;
    Ok(mul_unchecked(z, w))
}

pub(crate) fn mul_unchecked(z: &Point, w: &Point) -> Point {
    let x = z.x.iter().zip(&w.x).map(|(a, b)| a + b).collect();
    Point {
        x,
        t: z.t + w.t + symplectic(&z.x, &w.x),
    }
}

pub fn group_inv(z: &Point) -> Point {
    Point {
        x: z.x.iter().map(|v| -v).collect(),
        t: -z.t,
    }
}

pub fn dilate(r: f64, z: &Point) -> Result<Point> {
    if !(r > 0.0) || !r.is_finite() {
        return invalid(format!("dilation factor must be positive, got {r}"));
    }
    Ok(dilate_unchecked(r, z))
}

pub(crate) fn dilate_unchecked(r: f64, z: &Point) -> Point {
    Point {
        x: z.x.iter().map(|v| r * v).collect(),
        t: r * r * z.t,
    }
}

pub fn koranyi_norm(z: &Point) -> f64 {
    let x2: f64 = z.x.iter().map(|v| v * v).sum();
    (x2 * x2 + 16.0 * z.t * z.t).sqrt().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        if !center.is_finite() {
            return Err(Error::NonFinite("ball center".into()));
        }
        Ok(Self { center, radius })
    }

    /// The concentric ball with radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.center.clone(), self.radius * factor)
    }

    pub fn contains(&self, z: &Point) -> bool {
        ball_contains(self, z)
    }
}

pub fn ball_contains(b: &Ball, z: &Point) -> bool {
    koranyi_norm(&mul_unchecked(&group_inv(&b.center), z)) < b.radius
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub SmallVec<[u32; 3]>);

impl MultiIndex {
    pub fn new(entries: &[u32]) -> Self {
        Self(SmallVec::from_slice(entries))
    }

    pub fn zero(ctx: &GroupContext) -> Self {
        Self(SmallVec::from_elem(0, ctx.coords()))
    }

    /// `e_k` as a multiindex.
    pub fn unit(ctx: &GroupContext, k: usize) -> Self {
        let mut m = Self::zero(ctx);
        m.0[k] = 1;
        m
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn length(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Homogeneous degree: spatial entries count once, the last (t) entry twice.
    pub fn homogeneous_degree(&self) -> u32 {
        let last = self.0.len() - 1;
        self.0[..last].iter().sum::<u32>() + 2 * self.0[last]
    }

    /// All multiindices for `ctx` with homogeneous degree at most `max_degree`,
    /// ordered by degree and then lexicographically.
    pub fn up_to_degree(ctx: &GroupContext, max_degree: u32) -> Vec<Self> {
        let dims = ctx.coords();
        let mut out = Vec::new();
        let mut cur = vec![0u32; dims];
        fn rec(k: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            let dims = cur.len();
            if k == dims {
                out.push(MultiIndex::new(cur));
                return;
            }
            let weight = if k == dims - 1 { 2 } else { 1 };
            for v in 0..=remaining / weight {
                cur[k] = v;
                rec(k + 1, remaining - v * weight, cur, out);
            }
            cur[k] = 0;
        }
        rec(0, max_degree, &mut cur, &mut out);
        out.sort_by(|a, b| {
            a.homogeneous_degree()
                .cmp(&b.homogeneous_degree())
                .then_with(|| b.0.cmp(&a.0))
        });
        out
    }
}

/// `(|I|, d(I))`.
pub fn multiindex_degrees(i: &MultiIndex) -> (u32, u32) {
    (i.length(), i.homogeneous_degree())
}

pub fn monomial(i: &MultiIndex, z: &Point) -> f64 {
    let mut acc = 1.0;
    for (k, &e) in i.0.iter().enumerate() {
        if e > 0 {
            acc *= z.coord(k).powi(e as i32);
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Left-invariant fields `Xᵢ f(z) = d/ds f(z·s eᵢ)`.
    Left,
    /// Right-invariant fields `X̃ᵢ f(z) = d/ds f(s eᵢ·z)`.
    Right,
}

/// Finite-difference step used when the caller has no preference: grows with
/// the derivative order so nested central differences stay above rounding.
pub fn default_step(i: &MultiIndex, z: &Point) -> f64 {
    let order = i.length() as f64;
    let base = f64::EPSILON.powf(1.0 / (order + 2.0)).max(1e-4);
    base * koranyi_norm(z).max(1.0)
}

/// `X^I f(z)` (or `X̃^I f(z)`) by nested second-order central differences
/// along the group flows, outermost factor `X₁^{i₁}` applied last.
pub fn invariant_derivative<F>(f: &F, i: &MultiIndex, side: Side, z: &Point, h: f64) -> Result<f64>
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("finite-difference step must be positive, got {h}"));
    }
    let n = z.n();
    if i.0.len() != 2 * n + 1 {
        return Err(Error::DimensionMismatch {
            expected: 2 * n + 1,
            got: i.0.len(),
        });
    }
    let mut ops: SmallVec<[usize; 8]> = SmallVec::new();
    for (k, &e) in i.0.iter().enumerate() {
        for _ in 0..e {
            ops.push(k);
        }
    }
    Ok(nested_difference(f, &ops, side, z, h))
}

fn nested_difference<F>(f: &F, ops: &[usize], side: Side, z: &Point, h: f64) -> f64
where
    F: Fn(&Point) -> f64 + ?Sized,
{
    match ops.split_first() {
        None => f(z),
        Some((&k, rest)) => {
            let n = z.n();
            let plus = Point::basis(n, k, h);
            let minus = Point::basis(n, k, -h);
            let (zp, zm) = match side {
                Side::Left => (mul_unchecked(z, &plus), mul_unchecked(z, &minus)),
                Side::Right => (mul_unchecked(&plus, z), mul_unchecked(&minus, z)),
            };
            (nested_difference(f, rest, side, &zp, h) - nested_difference(f, rest, side, &zm, h))
                / (2.0 * h)
        }
    }
}

/// Allocation-free ℍ¹ arithmetic on `(x₁, x₂, t)` triples.
pub mod h1 {
    #[inline]
    pub fn mul(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[0] + b[0],
            a[1] + b[1],
            a[2] + b[2] + 0.5 * (a[1] * b[0] - a[0] * b[1]),
        ]
    }

    #[inline]
    pub fn inv(a: [f64; 3]) -> [f64; 3] {
        [-a[0], -a[1], -a[2]]
    }

    /// `a⁻¹·b`.
    #[inline]
    pub fn left_div(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        mul(inv(a), b)
    }

    #[inline]
    pub fn dilate(r: f64, a: [f64; 3]) -> [f64; 3] {
        [r * a[0], r * a[1], r * r * a[2]]
    }

    /// `ρ⁴ = |x|⁴ + 16t²`.
    #[inline]
    pub fn rho4(a: [f64; 3]) -> f64 {
        let x2 = a[0] * a[0] + a[1] * a[1];
        x2 * x2 + 16.0 * a[2] * a[2]
    }

    #[inline]
    pub fn rho(a: [f64; 3]) -> f64 {
        rho4(a).sqrt().sqrt()
    }

    /// `xᵀJy`.
    #[inline]
    pub fn symplectic(x: [f64; 2], y: [f64; 2]) -> f64 {
        0.5 * (x[1] * y[0] - x[0] * y[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_of_horizontal_basis_vectors() {
        let ctx = GroupContext::h1();
        let z = group_mul(&ctx, &Point::h1(1.0, 0.0, 0.0), &Point::h1(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(z, Point::h1(1.0, 1.0, -0.5));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let ctx = GroupContext::h1();
        let err = group_mul(&ctx, &Point::new(&[1.0, 2.0, 3.0, 4.0], 0.0), &Point::h1(0.0, 0.0, 0.0));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        assert!(GroupContext::new(0).is_err());
    }

    #[test]
    fn inverse_and_identity() {
        assert_eq!(group_inv(&Point::h1(1.0, 2.0, 3.0)), Point::h1(-1.0, -2.0, -3.0));
        let e = Point::identity(1);
        assert_eq!(group_inv(&e), e);
        let ctx = GroupContext::h1();
        let z = Point::h1(0.3, -1.2, 0.7);
        assert_eq!(group_mul(&ctx, &z, &e).unwrap(), z);
        let zi = group_mul(&ctx, &z, &group_inv(&z)).unwrap();
        assert_abs_diff_eq!(koranyi_norm(&zi), 0.0);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(2.0, &Point::h1(1.0, 1.0, 1.0)).unwrap(), Point::h1(2.0, 2.0, 4.0));
        let z = Point::h1(0.1, 0.2, 0.3);
        assert_eq!(dilate(1.0, &z).unwrap(), z);
        assert!(dilate(0.0, &z).is_err());
        assert!(dilate(-1.0, &z).is_err());
    }

    #[test]
    fn koranyi_examples() {
        assert_abs_diff_eq!(koranyi_norm(&Point::h1(3.0, 4.0, 0.0)), 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(koranyi_norm(&Point::h1(0.0, 0.0, 4.0)), 4.0, epsilon = 1e-14);
        assert_eq!(koranyi_norm(&Point::identity(1)), 0.0);
    }

    #[test]
    fn ball_membership_is_strict() {
        let b = Ball::new(Point::identity(1), 1.0).unwrap();
        assert!(ball_contains(&b, &Point::h1(0.5, 0.0, 0.0)));
        assert!(!ball_contains(&b, &Point::h1(1.0, 0.0, 0.0)));
        assert!(Ball::new(Point::identity(1), 0.0).is_err());
    }

    #[test]
    fn ball_membership_is_left_invariant() {
        let ctx = GroupContext::h1();
        let z0 = Point::h1(0.7, -0.4, 0.25);
        let b = Ball::new(z0.clone(), 0.8).unwrap();
        let b0 = Ball::new(Point::identity(1), 0.8).unwrap();
        for k in 0..200 {
            let s = k as f64 * 0.37;
            let z = Point::h1(0.5 * s.sin() + 0.6, 0.4 * (1.3 * s).cos() - 0.3, 0.3 * (0.7 * s).sin());
            let moved = group_mul(&ctx, &group_inv(&z0), &z).unwrap();
            assert_eq!(ball_contains(&b, &z), ball_contains(&b0, &moved));
        }
    }

    #[test]
    fn degree_examples() {
        assert_eq!(multiindex_degrees(&MultiIndex::new(&[1, 0, 2])), (3, 5));
        assert_eq!(multiindex_degrees(&MultiIndex::new(&[0, 0, 0])), (0, 0));
        assert_eq!(multiindex_degrees(&MultiIndex::new(&[0, 0, 1])), (1, 2));
    }

    #[test]
    fn enumerates_multiindices_by_degree() {
        let ctx = GroupContext::h1();
        let all = MultiIndex::up_to_degree(&ctx, 2);
        // 1; x1, x2; x1², x1x2, x2², t
        assert_eq!(all.len(), 7);
        assert!(all.windows(2).all(|w| w[0].homogeneous_degree() <= w[1].homogeneous_degree()));
        assert_eq!(MultiIndex::up_to_degree(&ctx, 7).len(), 70);
    }

    #[test]
    fn monomial_examples() {
        let z = Point::h1(2.0, 0.0, 3.0);
        assert_eq!(monomial(&MultiIndex::new(&[0, 0, 0]), &z), 1.0);
        assert_eq!(monomial(&MultiIndex::new(&[1, 0, 2]), &z), 18.0);
        let i = MultiIndex::new(&[1, 0, 1]);
        let w = Point::h1(1.0, 1.0, 1.0);
        assert_eq!(monomial(&i, &w), 1.0);
        assert_eq!(monomial(&i, &dilate(2.0, &w).unwrap()), 8.0);
    }

    #[test]
    fn vector_fields_on_the_t_coordinate() {
        let f = |z: &Point| z.t;
        let z = Point::h1(0.3, 0.8, -0.2);
        let x1 = MultiIndex::new(&[1, 0, 0]);
        let xt = MultiIndex::new(&[0, 0, 1]);
        let left = invariant_derivative(&f, &x1, Side::Left, &z, 1e-4).unwrap();
        let right = invariant_derivative(&f, &x1, Side::Right, &z, 1e-4).unwrap();
        assert_abs_diff_eq!(left, 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(right, -0.4, epsilon = 1e-9);
        for side in [Side::Left, Side::Right] {
            let d = invariant_derivative(&f, &xt, side, &z, 1e-4).unwrap();
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-9);
        }
        assert!(invariant_derivative(&f, &xt, Side::Left, &z, 0.0).is_err());
    }

    #[test]
    fn h1_helpers_agree_with_generic_law() {
        let a = Point::h1(0.3, -1.1, 0.4);
        let b = Point::h1(-0.7, 0.2, 1.5);
        let generic = mul_unchecked(&a, &b);
        let fast = h1::mul(a.as_h1(), b.as_h1());
        assert_eq!(generic.as_h1(), fast);
        assert_abs_diff_eq!(h1::rho(fast), koranyi_norm(&generic), epsilon = 1e-15);
    }
}
