//! Fixed degree-4 quadrature rules for cells and boundary edges.
//!
//! One table is shared by every assembly routine and by the empirical
//! interpolation training sets, so that "quadrature point `p`" means the
//! same physical location everywhere: volume point `p` is point `p % 6` of
//! cell `p / 6`, boundary point `p` is point `p % 3` of boundary edge `p / 3`.

use crate::scalar::Scalar;

pub const VOLUME_POINTS: usize = 6;
pub const BOUNDARY_POINTS: usize = 3;

/// Quadrature rules in reference coordinates.
#[derive(Clone, Debug)]
pub struct QuadratureTable<T> {
    /// Barycentric coordinates of the volume points.
    pub volume_points: [[T; 3]; VOLUME_POINTS],
    /// Weights on the reference triangle (they sum to 1/2).
    pub volume_weights: [T; VOLUME_POINTS],
    /// Edge parameters in [0, 1].
    pub boundary_points: [T; BOUNDARY_POINTS],
    /// Weights on [0, 1] (they sum to 1).
    pub boundary_weights: [T; BOUNDARY_POINTS],
}

impl<T: Scalar> QuadratureTable<T> {
    /// Six-point symmetric triangle rule and three-point Gauss-Legendre edge
    /// rule; exact to degree 4 and 5 respectively.
    pub fn degree4() -> Self {
        let a1 = 0.445_948_490_915_964_886_32;
        let b1 = 1.0 - 2.0 * a1;
        let w1 = 0.223_381_589_678_011_465_7 * 0.5;
        let a2 = 0.091_576_213_509_770_743_46;
        let b2 = 1.0 - 2.0 * a2;
        let w2 = 0.109_951_743_655_321_867_6 * 0.5;
        let p = |x: [f64; 3]| x.map(T::lit);
        let g = (0.6f64).sqrt() * 0.5;
        QuadratureTable {
            volume_points: [
                p([b1, a1, a1]),
                p([a1, b1, a1]),
                p([a1, a1, b1]),
                p([b2, a2, a2]),
                p([a2, b2, a2]),
                p([a2, a2, b2]),
            ],
            volume_weights: [w1, w1, w1, w2, w2, w2].map(T::lit),
            boundary_points: [0.5 - g, 0.5, 0.5 + g].map(T::lit),
            boundary_weights: [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0].map(T::lit),
        }
    }

    /// Physical position of a volume point given the cell's vertices.
    pub fn volume_position(&self, q: usize, cell: [[T; 2]; 3]) -> [T; 2] {
        let l = self.volume_points[q];
        [
            l[0] * cell[0][0] + l[1] * cell[1][0] + l[2] * cell[2][0],
            l[0] * cell[0][1] + l[1] * cell[1][1] + l[2] * cell[2][1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Integral of x^a y^b over the reference triangle via the barycentric
    /// rule (x = l1, y = l2).
    fn triangle_rule(q: &QuadratureTable<f64>, a: i32, b: i32) -> f64 {
        (0..VOLUME_POINTS)
            .map(|k| {
                let l = q.volume_points[k];
                q.volume_weights[k] * l[1].powi(a) * l[2].powi(b)
            })
            .sum()
    }

    #[test]
    fn weights_positive_and_normalized() {
        let q = QuadratureTable::<f64>::degree4();
        assert!(q.volume_weights.iter().all(|&w| w > 0.0));
        assert!(q.boundary_weights.iter().all(|&w| w > 0.0));
        assert!((q.volume_weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        assert!((q.boundary_weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for l in q.volume_points {
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        let q = QuadratureTable::<f64>::degree4();
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                // int_T x^a y^b = a! b! / (a + b + 2)!
                let exact = factorial(a as u32) * factorial(b as u32) / factorial((a + b + 2) as u32);
                let got = triangle_rule(&q, a, b);
                assert!((got - exact).abs() < 1e-13, "x^{a} y^{b}: {got} vs {exact}");
            }
        }
        assert!((triangle_rule(&q, 2, 2) - 1.0 / 180.0).abs() < 1e-13);
    }

    #[test]
    fn edge_rule_exact_to_degree_five() {
        let q = QuadratureTable::<f64>::degree4();
        for k in 0..=5 {
            let got: f64 = (0..BOUNDARY_POINTS)
                .map(|i| q.boundary_weights[i] * q.boundary_points[i].powi(k))
                .sum();
            assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
