//! Variable exponents `p(·)` and the exponents derived from them.

use std::f64::consts::E;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::group::{h1, koranyi_norm, mul_unchecked, GroupContext, Point};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constant { p0: f64 },
    LogDecay { p_inf: f64, a: f64 },
    GaussianBump { a: f64, b: f64, s: f64 },
    Conjugate(Arc<ExponentFn>),
    Sobolev { base: Arc<ExponentFn>, alpha: f64, q_dim: f64 },
    Translate { base: Arc<ExponentFn>, z0: Point },
}

/// A variable exponent with declared essential bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentSpec", into = "ExponentSpec")]
pub struct ExponentFn {
    kind: Kind,
    p_minus: f64,
    p_plus: f64,
    p_inf: f64,
}

/// Serialized form `{kind, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

fn param(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidParameter(format!("exponent parameter `{key}` missing or not a number")))
}

fn base_param(params: &Value) -> Result<ExponentFn> {
    let base = params
        .get("base")
        .ok_or_else(|| Error::InvalidParameter("derived exponent needs `base`".into()))?;
    let spec: ExponentSpec = serde_json::from_value(base.clone())?;
    ExponentFn::try_from(spec)
}

impl TryFrom<ExponentSpec> for ExponentFn {
    type Error = Error;

    fn try_from(spec: ExponentSpec) -> Result<Self> {
        let p = &spec.params;
        match spec.kind.as_str() {
            "constant" => constant(param(p, "p0")?),
            "log_decay" => log_decay(param(p, "p_inf")?, param(p, "A")?),
            "gaussian_bump" => gaussian_bump(param(p, "a")?, param(p, "b")?, param(p, "s")?),
            "pointwise_derived" => {
                let op = p.get("op").and_then(Value::as_str).unwrap_or("");
                let base = base_param(p)?;
                match op {
                    "conjugate" => conjugate(&base),
                    "sobolev" => {
                        let n = p.get("n").and_then(Value::as_u64).unwrap_or(1) as usize;
                        sobolev_exponent(&base, param(p, "alpha")?, &GroupContext::new(n)?)
                    }
                    "translate" => {
                        let z0: Point = serde_json::from_value(
                            p.get("z0").cloned().ok_or_else(|| Error::InvalidParameter("translate needs `z0`".into()))?,
                        )?;
                        Ok(base.translated(&z0))
                    }
                    other => invalid(format!("unknown derived exponent op `{other}`")),
                }
            }
            other => invalid(format!("unknown exponent kind `{other}`")),
        }
    }
}

impl From<ExponentFn> for ExponentSpec {
    fn from(p: ExponentFn) -> Self {
        let derived = |op: &str, base: &ExponentFn, mut extra: Value| {
            extra["op"] = json!(op);
            extra["base"] = serde_json::to_value(base).expect("exponent serializes");
            ExponentSpec {
                kind: "pointwise_derived".into(),
                params: extra,
            }
        };
        match &p.kind {
            Kind::Constant { p0 } => ExponentSpec {
                kind: "constant".into(),
                params: json!({ "p0": p0 }),
            },
            Kind::LogDecay { p_inf, a } => ExponentSpec {
                kind: "log_decay".into(),
                params: json!({ "p_inf": p_inf, "A": a }),
            },
            Kind::GaussianBump { a, b, s } => ExponentSpec {
                kind: "gaussian_bump".into(),
                params: json!({ "a": a, "b": b, "s": s }),
            },
            Kind::Conjugate(base) => derived("conjugate", base, json!({})),
            Kind::Sobolev { base, alpha, q_dim } => {
                derived("sobolev", base, json!({ "alpha": alpha, "n": (*q_dim as usize - 2) / 2 }))
            }
            Kind::Translate { base, z0 } => derived("translate", base, json!({ "z0": z0 })),
        }
    }
}

pub fn make_exponent(kind: &str, params: Value) -> Result<ExponentFn> {
    ExponentFn::try_from(ExponentSpec {
        kind: kind.into(),
        params,
    })
}

fn finite_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return invalid(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

pub fn constant(p0: f64) -> Result<ExponentFn> {
    finite_positive("p0", p0)?;
    Ok(ExponentFn {
        kind: Kind::Constant { p0 },
        p_minus: p0,
        p_plus: p0,
        p_inf: p0,
    })
}

/// `p(z) = p_inf + A / log(e + ρ(z))`.
pub fn log_decay(p_inf: f64, a: f64) -> Result<ExponentFn> {
    finite_positive("p_inf", p_inf)?;
    if !a.is_finite() || a < 0.0 {
        return invalid(format!("log_decay amplitude must be nonnegative, got {a}"));
    }
    Ok(ExponentFn {
        kind: Kind::LogDecay { p_inf, a },
        p_minus: p_inf,
        p_plus: p_inf + a,
        p_inf,
    })
}

/// `p(z) = a + b·exp(−ρ(z)²/s²)`.
pub fn gaussian_bump(a: f64, b: f64, s: f64) -> Result<ExponentFn> {
    finite_positive("a", a)?;
    finite_positive("s", s)?;
    if !b.is_finite() || a + b <= 0.0 {
        return invalid(format!("gaussian_bump needs a + b > 0, got a={a}, b={b}"));
    }
    Ok(ExponentFn {
        kind: Kind::GaussianBump { a, b, s },
        p_minus: a.min(a + b),
        p_plus: a.max(a + b),
        p_inf: a,
    })
}

fn conj(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `p'(z) = p(z)/(p(z) − 1)`.
pub fn conjugate(p: &ExponentFn) -> Result<ExponentFn> {
    if p.p_minus <= 1.0 {
        return invalid(format!("conjugate exponent needs p₋ > 1, got {}", p.p_minus));
    }
    if let Kind::Conjugate(base) = &p.kind {
        return Ok((**base).clone());
    }
    Ok(ExponentFn {
        kind: Kind::Conjugate(Arc::new(p.clone())),
        p_minus: conj(p.p_plus),
        p_plus: conj(p.p_minus),
        p_inf: conj(p.p_inf),
    })
}

fn sob(p: f64, alpha: f64, q_dim: f64) -> f64 {
    1.0 / (1.0 / p - alpha / q_dim)
}

/// `1/q(z) = 1/p(z) − α/Q`.
pub fn sobolev_exponent(p: &ExponentFn, alpha: f64, ctx: &GroupContext) -> Result<ExponentFn> {
    let q_dim = ctx.q() as f64;
    if !(alpha > 0.0 && alpha < q_dim) {
        return invalid(format!("sobolev exponent needs 0 < α < Q, got α={alpha}"));
    }
    if p.p_plus >= q_dim / alpha {
        return invalid(format!("sobolev exponent needs p₊ < Q/α, got p₊={} and Q/α={}", p.p_plus, q_dim / alpha));
    }
    Ok(ExponentFn {
        kind: Kind::Sobolev {
            base: Arc::new(p.clone()),
            alpha,
            q_dim,
        },
        p_minus: sob(p.p_minus, alpha, q_dim),
        p_plus: sob(p.p_plus, alpha, q_dim),
        p_inf: sob(p.p_inf, alpha, q_dim),
    })
}

/// Minimal `k ≥ 0` with `(2n+k+3)·p₋ > 2n+2`.
pub fn dpdot(p: &ExponentFn, ctx: &GroupContext) -> u32 {
    let n = ctx.n() as f64;
    let mut k = 0u32;
    while (2.0 * n + k as f64 + 3.0) * p.p_minus <= 2.0 * n + 2.0 {
        k += 1;
    }
    k
}

impl ExponentFn {
    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// `p̲ = min(p₋, 1)`.
    pub fn p_underline(&self) -> f64 {
        self.p_minus.min(1.0)
    }

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Constant { .. } => "constant",
            Kind::LogDecay { .. } => "log_decay",
            Kind::GaussianBump { .. } => "gaussian_bump",
            _ => "pointwise_derived",
        }
    }

    /// Short human-readable label, stable across runs.
    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Constant { p0 } => format!("constant({p0})"),
            Kind::LogDecay { p_inf, a } => format!("log_decay({p_inf},{a})"),
            Kind::GaussianBump { a, b, s } => format!("gaussian_bump({a},{b},{s})"),
            Kind::Conjugate(base) => format!("conjugate({})", base.label()),
            Kind::Sobolev { base, alpha, .. } => format!("sobolev({},{alpha})", base.label()),
            Kind::Translate { base, z0 } => {
                let c = z0.as_h1();
                format!("translate({},{:?})", base.label(), c)
            }
        }
    }

    /// `z ↦ p(z0·z)`, with the same bounds.
    pub fn translated(&self, z0: &Point) -> ExponentFn {
        if z0.x.iter().all(|&v| v == 0.0) && z0.t == 0.0 {
            return self.clone();
        }
        ExponentFn {
            kind: Kind::Translate {
                base: Arc::new(self.clone()),
                z0: z0.clone(),
            },
            p_minus: self.p_minus,
            p_plus: self.p_plus,
            p_inf: self.p_inf,
        }
    }

    pub fn eval(&self, z: &Point) -> f64 {
        match &self.kind {
            Kind::Constant { p0 } => *p0,
            Kind::LogDecay { p_inf, a } => p_inf + a / (E + koranyi_norm(z)).ln(),
            Kind::GaussianBump { a, b, s } => {
                let r = koranyi_norm(z);
                a + b * (-(r * r) / (s * s)).exp()
            }
            Kind::Conjugate(base) => conj(base.eval(z)),
            Kind::Sobolev { base, alpha, q_dim } => sob(base.eval(z), *alpha, *q_dim),
            Kind::Translate { base, z0 } => base.eval(&mul_unchecked(z0, z)),
        }
    }

    /// Allocation-free evaluation at an ℍ¹ point.
    pub fn eval_h1(&self, c: [f64; 3]) -> f64 {
        match &self.kind {
            Kind::Constant { p0 } => *p0,
            Kind::LogDecay { p_inf, a } => p_inf + a / (E + h1::rho(c)).ln(),
            Kind::GaussianBump { a, b, s } => {
                let r2 = h1::rho4(c).sqrt();
                a + b * (-r2 / (s * s)).exp()
            }
            Kind::Conjugate(base) => conj(base.eval_h1(c)),
            Kind::Sobolev { base, alpha, q_dim } => sob(base.eval_h1(c), *alpha, *q_dim),
            Kind::Translate { base, z0 } => {
                if z0.n() == 1 {
                    base.eval_h1(h1::mul(z0.as_h1(), c))
                } else {
                    base.eval(&mul_unchecked(z0, &Point::from_h1(c)))
                }
            }
        }
    }

    /// Exponent values at every cell center of an ℍ¹ grid.
    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval_h1(grid.center(i))).collect()
    }

    /// Spot-check the declared bounds on random points; returns the number of violations.
    pub fn check_bounds(&self, ctx: &GroupContext, samples: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slack = 1e-12 * self.p_plus.max(1.0);
        (0..samples)
            .filter(|_| {
                let z = random_point(&mut rng, ctx, 8.0);
                let v = self.eval(&z);
                !(v >= self.p_minus - slack && v <= self.p_plus + slack)
            })
            .count()
    }
}

/// Random point whose Koranyi norm is spread log-uniformly up to `scale`.
pub fn random_point<R: Rng>(rng: &mut R, ctx: &GroupContext, scale: f64) -> Point {
    let dim = ctx.coords();
    let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = Point::new(&raw[..dim - 1], raw[dim - 1]);
    let r = koranyi_norm(&p).max(1e-12);
    let target = scale * 10f64.powf(-3.0 * rng.gen::<f64>());
    crate::group::dilate_unchecked(target / r, &p)
}

/// Deterministic source of nearby point pairs for log-Hölder estimation.
pub struct PairSampler {
    rng: ChaCha8Rng,
    ctx: GroupContext,
    scale: f64,
}

impl PairSampler {
    pub fn new(ctx: GroupContext, seed: u64, scale: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            ctx,
            scale,
        }
    }

    /// Returns `(z, w)` with `ρ(z⁻¹w)` log-uniform in `[1e−8, ½]`.
    pub fn next_pair(&mut self) -> (Point, Point) {
        let z = random_point(&mut self.rng, &self.ctx, self.scale);
        let v = random_point(&mut self.rng, &self.ctx, 1.0);
        let rv = koranyi_norm(&v).max(1e-300);
        let target = 0.5 * 10f64.powf(-8.0 * self.rng.gen::<f64>());
        let v = crate::group::dilate_unchecked(target / rv, &v);
        let w = mul_unchecked(&z, &v);
        (z, w)
    }
}

/// Empirical log-Hölder constants `(C, C_∞)` of a scalar function with limit `f_inf`.
pub fn log_holder_estimate_fn<F>(f: F, f_inf: f64, sampler: &mut PairSampler, trials: usize) -> (f64, f64)
where
    F: Fn(&Point) -> f64,
{
    let mut c_local = 0.0f64;
    let mut c_inf = 0.0f64;
    for _ in 0..trials.max(1) {
        let (z, w) = sampler.next_pair();
        let fz = f(&z);
        let fw = f(&w);
        let d = koranyi_norm(&mul_unchecked(&crate::group::group_inv(&z), &w));
        if d > 0.0 && d <= 0.5 {
            c_local = c_local.max((fz - fw).abs() * (-d.ln()));
        }
        for (p, v) in [(&z, fz), (&w, fw)] {
            c_inf = c_inf.max((v - f_inf).abs() * (E + koranyi_norm(p)).ln());
        }
    }
    (c_local, c_inf)
}

pub fn log_holder_estimate(p: &ExponentFn, sampler: &mut PairSampler, trials: usize) -> (f64, f64) {
    log_holder_estimate_fn(|z| p.eval(z), p.p_inf, sampler, trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx() -> GroupContext {
        GroupContext::h1()
    }

    #[test]
    fn builder_examples() {
        let p = constant(2.0).unwrap();
        assert_eq!(p.eval(&Point::h1(3.0, 1.0, 2.0)), 2.0);
        assert_eq!(p.p_underline(), 1.0);

        let p = log_decay(2.0, 0.5).unwrap();
        assert_eq!(p.eval(&Point::identity(1)), 2.5);

        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        assert_eq!(p.eval(&Point::identity(1)), 2.0);
        assert_eq!((p.p_minus(), p.p_plus()), (1.5, 2.0));
        let q = gaussian_bump(0.9, 0.3, 1.0).unwrap();
        assert_eq!(q.p_underline(), 0.9);
    }

    #[test]
    fn builders_reject_nonpositive_exponents() {
        assert!(constant(0.0).is_err());
        assert!(log_decay(-1.0, 0.5).is_err());
        assert!(gaussian_bump(1.0, -1.0, 1.0).is_err());
        assert!(make_exponent("cubic", json!({})).is_err());
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate(&constant(2.0).unwrap()).unwrap().eval(&Point::identity(1)), 2.0);
        assert_relative_eq!(
            conjugate(&constant(4.0).unwrap()).unwrap().eval(&Point::identity(1)),
            4.0 / 3.0,
            max_relative = 1e-15
        );
        let pc = conjugate(&gaussian_bump(1.5, 0.5, 1.0).unwrap()).unwrap();
        assert_relative_eq!(pc.p_plus(), 3.0, max_relative = 1e-15);
        assert_relative_eq!(pc.p_minus(), 2.0, max_relative = 1e-15);
        assert!(conjugate(&constant(1.0).unwrap()).is_err());
    }

    #[test]
    fn conjugate_is_an_involution() {
        let p = log_decay(1.5, 0.7).unwrap();
        let pcc = conjugate(&conjugate(&p).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z = random_point(&mut rng, &ctx(), 10.0);
            assert!((pcc.eval(&z) - p.eval(&z)).abs() < 1e-12);
        }
    }

    #[test]
    fn sobolev_examples() {
        let e = Point::identity(1);
        assert_relative_eq!(sobolev_exponent(&constant(2.0).unwrap(), 1.0, &ctx()).unwrap().eval(&e), 4.0);
        assert_relative_eq!(sobolev_exponent(&constant(1.0).unwrap(), 2.0, &ctx()).unwrap().eval(&e), 2.0);
        assert!(sobolev_exponent(&constant(2.0).unwrap(), 2.0, &ctx()).is_err());
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        let q = sobolev_exponent(&p, 1.0, &ctx()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let z = random_point(&mut rng, &ctx(), 5.0);
            assert!((1.0 / p.eval(&z) - 1.0 / q.eval(&z) - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn dpdot_examples() {
        let c = ctx();
        assert_eq!(dpdot(&constant(1.0).unwrap(), &c), 0);
        assert_eq!(dpdot(&constant(0.8).unwrap(), &c), 1);
        assert_eq!(dpdot(&constant(0.5).unwrap(), &c), 4);
    }

    #[test]
    fn declared_bounds_hold() {
        for p in [
            constant(2.0).unwrap(),
            log_decay(2.0, 0.5).unwrap(),
            gaussian_bump(1.5, 0.5, 1.0).unwrap(),
            gaussian_bump(2.0, -0.5, 0.7).unwrap(),
            conjugate(&log_decay(1.5, 1.0).unwrap()).unwrap(),
            sobolev_exponent(&gaussian_bump(1.2, 0.4, 1.0).unwrap(), 2.0, &ctx()).unwrap(),
        ] {
            assert_eq!(p.check_bounds(&ctx(), 10_000, 1), 0, "{}", p.label());
        }
    }

    #[test]
    fn h1_evaluation_agrees_with_generic() {
        let p = sobolev_exponent(&log_decay(1.2, 0.6).unwrap(), 1.0, &ctx())
            .unwrap()
            .translated(&Point::h1(0.3, -1.0, 0.2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let z = random_point(&mut rng, &ctx(), 4.0);
            assert_relative_eq!(p.eval(&z), p.eval_h1(z.as_h1()), max_relative = 1e-14);
        }
    }

    #[test]
    fn serde_round_trip() {
        let p = sobolev_exponent(&conjugate(&log_decay(1.5, 0.5).unwrap()).unwrap(), 1.0, &ctx())
            .unwrap()
            .translated(&Point::h1(1.0, 0.0, 0.5));
        let s = serde_json::to_string(&p).unwrap();
        let back: ExponentFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let g: ExponentFn = serde_json::from_str(r#"{"kind":"gaussian_bump","params":{"a":1.5,"b":0.5,"s":1}}"#).unwrap();
        assert_eq!(g, gaussian_bump(1.5, 0.5, 1.0).unwrap());
    }

    #[test]
    fn log_holder_constant_is_zero() {
        let mut s = PairSampler::new(ctx(), 1, 10.0);
        assert_eq!(log_holder_estimate(&constant(3.0).unwrap(), &mut s, 1000), (0.0, 0.0));
    }

    #[test]
    fn log_holder_at_infinity_is_exact_for_log_decay() {
        let mut s = PairSampler::new(ctx(), 2, 100.0);
        let (_, c_inf) = log_holder_estimate(&log_decay(2.0, 0.5).unwrap(), &mut s, 2000);
        assert_relative_eq!(c_inf, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn log_holder_estimates_stabilize() {
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        let a = log_holder_estimate(&p, &mut PairSampler::new(ctx(), 7, 10.0), 10_000);
        let b = log_holder_estimate(&p, &mut PairSampler::new(ctx(), 7, 10.0), 100_000);
        assert!(a.0.is_finite() && a.1.is_finite());
        assert!(b.0 <= 2.0 * a.0 && b.1 <= 2.0 * a.1);
    }

    #[test]
    fn reciprocal_exponent_is_also_log_holder() {
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        let cp = log_holder_estimate(&p, &mut PairSampler::new(ctx(), 11, 10.0), 20_000);
        let ci = log_holder_estimate_fn(|z| 1.0 / p.eval(z), 1.0 / p.p_inf(), &mut PairSampler::new(ctx(), 11, 10.0), 20_000);
        let k = p.p_minus() * p.p_minus();
        assert!(ci.0 <= cp.0 / k * (1.0 + 1e-12));
        assert!(ci.1 <= cp.1 / k * (1.0 + 1e-12));
    }
}
