//! Browser bindings for a few `hha-core` computations.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch a thrown value, and
//! the same functions run natively in tests.

use hha_core::exponent::{conjugate, make_exponent};
use hha_core::grid::{ball_indicator, build_grid, GridSpec};
use hha_core::group::{group_mul, koranyi_norm, Ball, GroupContext, Point, UNIT_BALL_MEASURE_H1};
use hha_core::luxemburg::ball_indicator_norm;
use hha_core::operators::{convolve_at, riesz_kernel};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const Q: f64 = 4.0;
/// Cells per radius along the horizontal axes.
const CELLS_PER_RADIUS: f64 = 16.0;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Product `z·w` in ℍ¹ with the Korányi norms of both factors and the product.
#[wasm_bindgen]
pub fn group_product(x1: f64, x2: f64, t: f64, y1: f64, y2: f64, s: f64) -> String {
    respond((|| {
        let z = Point::h1(x1, x2, t);
        let w = Point::h1(y1, y2, s);
        let zw = group_mul(&GroupContext::h1(), &z, &w).map_err(err)?;
        let (rz, rw, rzw) = (koranyi_norm(&z), koranyi_norm(&w), koranyi_norm(&zw));
        Ok(json!({
            "product": zw.as_h1(),
            "rho_z": rz,
            "rho_w": rw,
            "rho_product": rzw,
            "triangle_holds": rzw <= rz + rw + 1e-12,
        }))
    })())
}

/// `‖χ_B‖_{p(·)}`, `‖χ_B‖_{p'(·)}` and `R(B) = ‖χ_B‖_{p(·)}‖χ_B‖_{p'(·)}/|B|`
/// for `B = B((cx,cy,ct), radius)`. `params` is a JSON object such as
/// `{"p0": 2}`; the conjugate is skipped when `p₋ ≤ 1`.
#[wasm_bindgen]
pub fn ball_norm(kind: &str, params: &str, cx: f64, cy: f64, ct: f64, radius: f64) -> String {
    respond((|| {
        let params: Value = serde_json::from_str(params).map_err(err)?;
        let p = make_exponent(kind, params).map_err(err)?;
        let ball = Ball::new(Point::h1(cx, cy, ct), radius).map_err(err)?;
        let hx = radius / CELLS_PER_RADIUS;
        let ht = hx * hx;
        let nx = CELLS_PER_RADIUS as usize + 1;
        // the ball leans in t by ½|x_c|·radius on top of its own ¼radius²
        let shear = 0.5 * cx.hypot(cy) * radius;
        let nt = ((0.25 * radius * radius + shear) / ht).ceil() as usize + 1;
        let spec = GridSpec::centered_cells(nx, nt, hx, ht).map_err(err)?.with_center([cx, cy, ct]);
        let grid = build_grid(spec).map_err(err)?;
        let measure = grid.ball_measure(&ball);
        let norm = ball_indicator_norm(&grid, &ball, &p).map_err(err)?.value;
        let dual = if p.p_minus() > 1.0 {
            let pc = conjugate(&p).map_err(err)?;
            Some(ball_indicator_norm(&grid, &ball, &pc).map_err(err)?.value)
        } else {
            None
        };
        Ok(json!({
            "exponent": p.label(),
            "p_minus": p.p_minus(),
            "p_plus": p.p_plus(),
            "measure": measure,
            "norm": norm,
            "dual_norm": dual,
            "ratio": dual.map(|d| norm * d / measure),
        }))
    })())
}

/// Riesz potential `I_α χ_{B(e,δ)}` at the identity against its closed form
/// `(Q/α)·|B(e,1)|·δ^α`, on a grid with `cells` cells per radius.
#[wasm_bindgen]
pub fn riesz_ball(alpha: f64, delta: f64, cells: u32) -> String {
    respond((|| {
        if !(alpha > 0.0 && alpha < Q) {
            return Err(format!("α must lie in (0, {Q}), got {alpha}"));
        }
        if !(4..=48).contains(&cells) {
            return Err(format!("cells per radius must lie in 4..=48, got {cells}"));
        }
        let hx = delta / f64::from(cells);
        let ht = hx * delta / f64::from(cells);
        let nx = cells as usize + 1;
        let nt = (0.25 * delta * delta / ht).ceil() as usize + 1;
        let grid = build_grid(GridSpec::centered_cells(nx, nt, hx, ht).map_err(err)?).map_err(err)?;
        let f = ball_indicator(&grid, &Ball::new(Point::identity(1), delta).map_err(err)?);
        let k = riesz_kernel(alpha, &GroupContext::h1()).map_err(err)?;
        let value = convolve_at(&f, &k, [0.0; 3]).map_err(err)?;
        let exact = Q / alpha * UNIT_BALL_MEASURE_H1 * delta.powf(alpha);
        Ok(json!({
            "value": value,
            "exact": exact,
            "relative_error": (value / exact - 1.0).abs(),
            "cells": grid.len(),
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn product_matches_group_law() {
        let v = parse(&group_product(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        let p = v["product"].as_array().unwrap();
        assert_eq!(p[0].as_f64(), Some(1.0));
        assert_eq!(p[1].as_f64(), Some(1.0));
        // t + s + ½(x₂y₁ − x₁y₂) = −½
        assert!((p[2].as_f64().unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(v["triangle_holds"], Value::Bool(true));
    }

    #[test]
    fn constant_exponent_ratio_is_one() {
        let v = parse(&ball_norm("constant", r#"{"p0": 3}"#, 0.5, 0.0, 0.25, 1.0));
        let measure = v["measure"].as_f64().unwrap();
        assert!((v["norm"].as_f64().unwrap() / measure.powf(1.0 / 3.0) - 1.0).abs() < 1e-8);
        assert!((v["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn off_center_ball_keeps_full_measure() {
        let near = parse(&ball_norm("constant", r#"{"p0": 2}"#, 0.0, 0.0, 0.0, 1.0));
        let far = parse(&ball_norm("constant", r#"{"p0": 2}"#, 3.0, -2.0, 1.0, 1.0));
        // same ball up to lattice effects
        let (a, b) = (near["measure"].as_f64().unwrap(), far["measure"].as_f64().unwrap());
        assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn bad_input_reports_error() {
        assert!(parse(&ball_norm("nope", "{}", 0.0, 0.0, 0.0, 1.0))["error"].is_string());
        assert!(parse(&ball_norm("constant", "not json", 0.0, 0.0, 0.0, 1.0))["error"].is_string());
        assert!(parse(&riesz_ball(4.0, 1.0, 16))["error"].is_string());
    }

    #[test]
    fn riesz_ball_near_closed_form() {
        let v = parse(&riesz_ball(2.0, 1.0, 16));
        assert!(v["relative_error"].as_f64().unwrap() < 0.05, "{v}");
    }
}
