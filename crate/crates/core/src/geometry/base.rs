use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::jet::Taylor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    RoundSphere,
    FlatTorus,
}

/// The closed Einstein base `(N, g_N)` with `Ric_N = (dim - 1) rho g_N`.
///
/// Sphere charts use hyperspherical angles: `theta1 .. theta(dim-1)` in
/// `(0, pi)` and the last angle periodic. Torus angles are all periodic with
/// period `2 pi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseSpace {
    pub kind: BaseKind,
    pub dim: usize,
    pub rho: f64,
    pub volume: f64,
}

impl BaseSpace {
    pub fn sphere(dim: usize) -> Self {
        BaseSpace {
            kind: BaseKind::RoundSphere,
            dim,
            rho: 1.0,
            volume: sphere_area(dim),
        }
    }

    pub fn torus(dim: usize) -> Self {
        BaseSpace {
            kind: BaseKind::FlatTorus,
            dim,
            rho: 0.0,
            volume: (2.0 * PI).powi(dim as i32),
        }
    }

    /// Diagonal entries of `g_N` as jets of the angles.
    pub fn metric_diag<J: Taylor>(&self, theta: &[J]) -> Vec<J> {
        let one = theta[0].constant_like(1.0);
        match self.kind {
            BaseKind::FlatTorus => vec![one; self.dim],
            BaseKind::RoundSphere => {
                let mut out = Vec::with_capacity(self.dim);
                let mut acc = one;
                out.push(acc);
                for t in theta.iter().take(self.dim - 1) {
                    let x = t.value();
                    let sin = t.compose([x.sin(), x.cos(), -x.sin(), -x.cos()]);
                    acc = acc * sin * sin;
                    out.push(acc);
                }
                out
            }
        }
    }

    /// `sqrt(det g_N)` at plain angle values.
    pub fn sqrt_det(&self, theta: &[f64]) -> f64 {
        match self.kind {
            BaseKind::FlatTorus => 1.0,
            BaseKind::RoundSphere => {
                let mut d = 1.0;
                for (k, t) in theta.iter().take(self.dim - 1).enumerate() {
                    d *= t.sin().powi((self.dim - 1 - k) as i32);
                }
                d
            }
        }
    }

    /// Whether base angle `k` (0-based) is periodic in the chart.
    pub fn is_periodic(&self, k: usize) -> bool {
        match self.kind {
            BaseKind::FlatTorus => true,
            BaseKind::RoundSphere => k + 1 == self.dim,
        }
    }

    pub fn chart_contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim
            && theta
                .iter()
                .enumerate()
                .all(|(k, t)| t.is_finite() && (self.is_periodic(k) || (*t > 0.0 && *t < PI)))
    }
}

/// Area of the unit sphere `S^d`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 1.0) * sphere_area(d - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn sphere_metric_diag() {
        let b = BaseSpace::sphere(3);
        let g = b.metric_diag(&[0.3, 1.2, 2.0]);
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 0.3f64.sin().powi(2)).abs() < 1e-15);
        assert!((g[2] - (0.3f64.sin() * 1.2f64.sin()).powi(2)).abs() < 1e-15);
        let det: f64 = g.iter().product();
        assert!((det.sqrt() - b.sqrt_det(&[0.3, 1.2, 2.0])).abs() < 1e-15);
    }
}
