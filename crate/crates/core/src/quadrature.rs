//! Quadrature rules on the reference triangle and the unit interval.

use crate::error::{Error, Result};

/// A point of a triangle rule given by barycentric coordinates and a weight
/// normalised so that the weights sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Seven-point rule exact for polynomials of degree five.
pub fn triangle_rule_deg5() -> [TriPoint; 7] {
    let sq = 15f64.sqrt();
    let a1 = (6.0 - sq) / 21.0;
    let a2 = (6.0 + sq) / 21.0;
    let w1 = (155.0 - sq) / 1200.0;
    let w2 = (155.0 + sq) / 1200.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    [
        TriPoint {
            bary: [1.0 / 3.0; 3],
            weight: 9.0 / 40.0,
        },
        TriPoint {
            bary: [a1, a1, b1],
            weight: w1,
        },
        TriPoint {
            bary: [a1, b1, a1],
            weight: w1,
        },
        TriPoint {
            bary: [b1, a1, a1],
            weight: w1,
        },
        TriPoint {
            bary: [a2, a2, b2],
            weight: w2,
        },
        TriPoint {
            bary: [a2, b2, a2],
            weight: w2,
        },
        TriPoint {
            bary: [b2, a2, a2],
            weight: w2,
        },
    ]
}

/// Gauss–Legendre nodes and weights on (0, 1), `n` in 2..=10.
pub fn gauss_legendre_unit(n: usize) -> Result<Vec<(f64, f64)>> {
    if !(2..=10).contains(&n) {
        return Err(Error::invalid(format!(
            "Gauss-Legendre order must be in 2..=10, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 + x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
