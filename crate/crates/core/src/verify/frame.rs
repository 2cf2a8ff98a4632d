//! Ball-adapted quadrature frames.
//!
//! A frame is the set of unit-grid cell centers `v` inside `B(e,1)`. The ball
//! `B(c,δ)` is discretized by the points `c·δv` with cell volume `δ^Q·vol₀`,
//! so every ball sees the same cell count and `|B|_frame = δ^Q·|B(e,1)|_frame`
//! holds exactly. Exponents are sampled at the moved points.

use crate::exponent::ExponentFn;
use crate::group::h1;
use crate::luxemburg::PreparedModular;

pub(crate) struct UnitFrame {
    cells: Vec<[f64; 3]>,
    vol0: f64,
}

impl UnitFrame {
    /// Cells of spacing `(hx, ht)` centered on the identity.
    pub(crate) fn new(hx: f64, ht: f64) -> Self {
        let nx = (1.0 / hx).ceil() as i64 + 1;
        let nt = (0.25 / ht).ceil() as i64 + 1;
        let mut cells = Vec::new();
        for i in -nx..=nx {
            for j in -nx..=nx {
                for k in -nt..=nt {
                    let v = [i as f64 * hx, j as f64 * hx, k as f64 * ht];
                    if h1::rho4(v) < 1.0 - 1e-12 {
                        cells.push(v);
                    }
                }
            }
        }
        Self {
            cells,
            vol0: hx * hx * ht,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.cells.len()
    }

    /// Frame measure of `B(e,1)`.
    pub(crate) fn unit_measure(&self) -> f64 {
        self.cells.len() as f64 * self.vol0
    }

    pub(crate) fn measure(&self, delta: f64) -> f64 {
        self.unit_measure() * delta.powi(4)
    }

    /// `c·δv` for every frame cell.
    pub(crate) fn points(&self, center: [f64; 3], delta: f64) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.cells.iter().map(move |&v| h1::mul(center, h1::dilate(delta, v)))
    }

    /// Exponent values at the frame points of `B(c,δ)`.
    pub(crate) fn exponent(&self, p: &ExponentFn, center: [f64; 3], delta: f64) -> Vec<f64> {
        self.points(center, delta).map(|z| p.eval_h1(z)).collect()
    }

    /// `‖χ_{B(c,δ)}‖` for exponent values already sampled on the frame.
    pub(crate) fn indicator_norm(&self, p_values: Vec<f64>, delta: f64) -> f64 {
        PreparedModular::indicator(p_values, self.vol0 * delta.powi(4)).norm().value
    }

    pub(crate) fn ball_norm(&self, p: &ExponentFn, center: [f64; 3], delta: f64) -> f64 {
        self.indicator_norm(self.exponent(p, center, delta), delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{constant, gaussian_bump};
    use crate::group::UNIT_BALL_MEASURE_H1;

    #[test]
    fn frame_measure_and_constant_norms() {
        let f = UnitFrame::new(1.0 / 16.0, 1.0 / 32.0);
        // same cells as a centered grid of the same spacing
        let g = crate::grid::build_grid(crate::grid::GridSpec::centered_cells(20, 12, 1.0 / 16.0, 1.0 / 32.0).unwrap()).unwrap();
        let ball = crate::group::Ball::new(crate::group::Point::identity(1), 1.0).unwrap();
        assert_eq!(f.len(), g.ball_cells(&ball).len());
        assert!((f.unit_measure() / UNIT_BALL_MEASURE_H1 - 1.0).abs() < 0.05);
        let p = constant(2.0).unwrap();
        let n = f.ball_norm(&p, [1.0, 0.0, 0.5], 0.5);
        assert!((n / f.measure(0.5).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn points_lie_in_the_moved_ball() {
        let f = UnitFrame::new(1.0 / 8.0, 1.0 / 16.0);
        let c = [0.3, -1.0, 2.0];
        let p = gaussian_bump(1.5, 0.5, 1.0).unwrap();
        assert_eq!(f.exponent(&p, c, 2.0).len(), f.len());
        for z in f.points(c, 2.0) {
            assert!(h1::rho(h1::left_div(c, z)) < 2.0);
        }
    }
}
