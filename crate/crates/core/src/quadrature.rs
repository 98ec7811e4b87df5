//! Deterministic tensor-product quadrature on annular domains and on the base.
//!
//! Radial integrals use Gauss-Legendre, in `t = sqrt(s - s_0)` when the inner
//! end is a horizon. On the round `S^2` the polar rule is Gauss-Legendre in
//! `cos(theta)` and the azimuthal rule is the trapezoid; on the flat torus
//! both angles use the trapezoid. Sums are evaluated in parallel and then
//! reduced pairwise in index order, so results do not depend on the thread
//! count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BaseKind, BaseSpace, Point, WarpedSpace};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let d = legendre(n, z).1;
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * d * d);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

/// Sum in a fixed binary tree over index order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Node counts. The defaults are 32 radial, 32 polar and 64 azimuthal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radial: 32,
            polar: 32,
            azimuthal: 64,
        }
    }
}

impl GridSpec {
    pub fn new(radial: usize, polar: usize, azimuthal: usize) -> Self {
        GridSpec {
            radial,
            polar,
            azimuthal,
        }
    }

    /// All counts multiplied by `factor`, rounded, at least 2.
    pub fn scaled(&self, factor: f64) -> Self {
        let f = |k: usize| ((k as f64 * factor).round() as usize).max(2);
        GridSpec::new(f(self.radial), f(self.polar), f(self.azimuthal))
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial < 2 || self.polar < 2 || self.azimuthal < 2 {
            return Err(Error::InvalidParams(format!("grid too coarse: {self:?}")));
        }
        Ok(())
    }
}

/// A quadrature node on the base `N` with weight including `sqrt(det g_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseNode {
    pub theta: Vec<f64>,
    pub weight: f64,
}

/// Product rule on a two-dimensional base.
pub fn base_rule(base: &BaseSpace, spec: GridSpec) -> Result<Vec<BaseNode>> {
    spec.validate()?;
    if base.dim != 2 {
        return Err(Error::Unsupported(format!(
            "integration is implemented for three-dimensional spaces, base dimension {}",
            base.dim
        )));
    }
    let m = spec.azimuthal;
    let dphi = 2.0 * PI / m as f64;
    let mut out = Vec::with_capacity(spec.polar * m);
    match base.kind {
        BaseKind::RoundSphere => {
            let (x, w) = gauss_legendre(spec.polar);
            for (xi, wi) in x.iter().zip(&w) {
                let theta = (-xi).acos();
                for k in 0..m {
                    out.push(BaseNode {
                        theta: vec![theta, (k as f64 + 0.5) * dphi],
                        weight: wi * dphi,
                    });
                }
            }
        }
        BaseKind::FlatTorus => {
            let p = spec.polar;
            let dt = 2.0 * PI / p as f64;
            for i in 0..p {
                for k in 0..m {
                    out.push(BaseNode {
                        theta: vec![(i as f64 + 0.5) * dt, (k as f64 + 0.5) * dphi],
                        weight: dt * dphi,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// A radial node with its `ds` weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialNode {
    pub s: f64,
    pub weight: f64,
}

/// Gauss-Legendre in `s` on `[s0, s1]`, or in `t = sqrt(s - s0)` when `s0`
/// is the horizon of `space`.
pub fn radial_rule(space: &WarpedSpace, s0: f64, s1: f64, count: usize) -> Result<Vec<RadialNode>> {
    let pr = &space.profile;
    if !(s0 >= pr.s_min && s1 <= pr.s_max && s1 > s0) {
        return Err(Error::OutOfDomain {
            s: if s0 < pr.s_min { s0 } else { s1 },
            min: pr.s_min,
            max: pr.s_max,
        });
    }
    let (x, w) = gauss_legendre(count);
    let horizon = space.horizon().is_some_and(|h| (s0 - h).abs() < 1e-14);
    Ok(if horizon {
        let tb = (s1 - s0).sqrt();
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let t = 0.5 * tb * (xi + 1.0);
                RadialNode {
                    s: s0 + t * t,
                    weight: 0.5 * tb * wi * 2.0 * t,
                }
            })
            .collect()
    } else {
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| RadialNode {
                s: 0.5 * (s1 - s0) * xi + 0.5 * (s1 + s0),
                weight: 0.5 * (s1 - s0) * wi,
            })
            .collect()
    })
}

/// A volume node and its weight for `dOmega`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeNode {
    pub point: Point,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct VolumeGrid {
    pub s0: f64,
    pub s1: f64,
    pub spec: GridSpec,
    pub nodes: Vec<VolumeNode>,
}

impl VolumeGrid {
    pub fn new(space: &WarpedSpace, s0: f64, s1: f64, spec: GridSpec) -> Result<Self> {
        let radial = radial_rule(space, s0, s1, spec.radial)?;
        let base = base_rule(&space.base, spec)?;
        let n = space.n as i32;
        let mut nodes = Vec::with_capacity(radial.len() * base.len());
        for r in &radial {
            let density = r.s.powi(n - 1) / space.profile.phi(r.s)?.sqrt();
            for b in &base {
                nodes.push(VolumeNode {
                    point: Point::new(r.s, &b.theta),
                    weight: r.weight * density * b.weight,
                });
            }
        }
        Ok(VolumeGrid {
            s0,
            s1,
            spec,
            nodes,
        })
    }

    /// Region `s_in <= s <= outer(theta)` under a star-shaped graph, with a
    /// separate radial rule along each base direction.
    pub fn under_graph(
        space: &WarpedSpace,
        s_in: f64,
        outer: impl Fn(&[f64]) -> Result<f64>,
        spec: GridSpec,
    ) -> Result<Self> {
        let base = base_rule(&space.base, spec)?;
        let n = space.n as i32;
        let mut nodes = Vec::with_capacity(spec.radial * base.len());
        let mut s1_max = s_in;
        for b in &base {
            let s1 = outer(&b.theta)?;
            if !(s1 > s_in) {
                return Err(Error::InvalidParams(format!(
                    "outer boundary {s1} not above inner radius {s_in} at theta = {:?}",
                    b.theta
                )));
            }
            s1_max = s1_max.max(s1);
            for r in radial_rule(space, s_in, s1, spec.radial)? {
                let density = r.s.powi(n - 1) / space.profile.phi(r.s)?.sqrt();
                nodes.push(VolumeNode {
                    point: Point::new(r.s, &b.theta),
                    weight: r.weight * density * b.weight,
                });
            }
        }
        Ok(VolumeGrid {
            s0: s_in,
            s1: s1_max,
            spec,
            nodes,
        })
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> Result<f64> + Sync) -> Result<f64> {
        weighted_sum(
            &self.nodes,
            |n| Ok(n.weight * f(&n.point)?),
            |n| format!("s = {}, theta = {:?}", n.point.s, n.point.theta),
        )
    }

    /// Several integrals of a vector-valued integrand of length `k` at once.
    pub fn integrate_many(
        &self,
        k: usize,
        f: impl Fn(&Point) -> Result<Vec<f64>> + Sync,
    ) -> Result<Vec<f64>> {
        weighted_sums(
            &self.nodes,
            k,
            |n| {
                let mut v = f(&n.point)?;
                v.iter_mut().for_each(|x| *x *= n.weight);
                Ok(v)
            },
            |n| format!("s = {}, theta = {:?}", n.point.s, n.point.theta),
        )
    }
}

/// Componentwise [`weighted_sum`] for integrands with `k` components.
pub fn weighted_sums<T: Sync>(
    items: &[T],
    k: usize,
    f: impl Fn(&T) -> Result<Vec<f64>> + Sync,
    locate: impl Fn(&T) -> String + Sync,
) -> Result<Vec<f64>> {
    let terms: Vec<Vec<f64>> = items
        .par_iter()
        .map(|it| {
            let v = f(it)?;
            if v.len() == k && v.iter().all(|x| x.is_finite()) {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    location: locate(it),
                })
            }
        })
        .collect::<Result<_>>()?;
    let mut column = vec![0.0; terms.len()];
    Ok((0..k)
        .map(|c| {
            for (dst, t) in column.iter_mut().zip(&terms) {
                *dst = t[c];
            }
            pairwise_sum(&column)
        })
        .collect())
}

/// `sum_i f(items[i])` evaluated in parallel and reduced pairwise.
/// Non-finite terms are reported with the location given by `locate`.
pub fn weighted_sum<T: Sync>(
    items: &[T],
    f: impl Fn(&T) -> Result<f64> + Sync,
    locate: impl Fn(&T) -> String + Sync,
) -> Result<f64> {
    let terms: Vec<f64> = items
        .par_iter()
        .map(|it| {
            let v = f(it)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    location: locate(it),
                })
            }
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// `int_{s0}^{s1} int_N f dOmega`.
pub fn volume_integrate(
    space: &WarpedSpace,
    s0: f64,
    s1: f64,
    spec: GridSpec,
    f: impl Fn(&Point) -> Result<f64> + Sync,
) -> Result<f64> {
    VolumeGrid::new(space, s0, s1, spec)?.integrate(f)
}

/// `int_{s0}^{s1} f(s) ds` on the radial rule.
pub fn radial_integrate(
    space: &WarpedSpace,
    s0: f64,
    s1: f64,
    count: usize,
    f: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<f64> {
    let nodes = radial_rule(space, s0, s1, count)?;
    weighted_sum(
        &nodes,
        |n| Ok(n.weight * f(n.s)?),
        |n| format!("s = {}", n.s),
    )
}

/// Observed order from three refinement levels `N, 2N, 4N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOrder {
    pub order: f64,
    pub errors: [f64; 2],
    /// Errors did not decrease from `N` to `2N`.
    pub non_monotone: bool,
    /// Order below 3, typical of a non-smooth integrand.
    pub low_order: bool,
}

pub const ORDER_CAP: f64 = 12.0;

/// `p = log2(|e_N / e_2N|)` with errors measured against the finest level.
pub fn convergence_order(values: [f64; 3]) -> ConvergenceOrder {
    let e0 = (values[0] - values[2]).abs();
    let e1 = (values[1] - values[2]).abs();
    order_from_errors(e0, e1)
}

/// As [`convergence_order`] with errors against a known `exact` value and
/// the two coarser levels.
pub fn convergence_order_exact(values: [f64; 2], exact: f64) -> ConvergenceOrder {
    order_from_errors((values[0] - exact).abs(), (values[1] - exact).abs())
}

fn order_from_errors(e0: f64, e1: f64) -> ConvergenceOrder {
    let order = if e1 == 0.0 {
        ORDER_CAP
    } else if e0 == 0.0 {
        0.0
    } else {
        (e0 / e1).log2().min(ORDER_CAP)
    };
    ConvergenceOrder {
        order,
        errors: [e0, e1],
        non_monotone: e1 > e0,
        low_order: order < 3.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinName;
    use std::collections::BTreeMap;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let int = |k: i32| -> f64 { x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum() };
        for k in 0..14 {
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((int(k) - exact).abs() < 1e-14, "k = {k}");
        }
        assert!(w.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn large_rule_is_accurate() {
        let (x, w) = gauss_legendre(200);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (1f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }

    fn euclid() -> WarpedSpace {
        WarpedSpace::builtin(BuiltinName::Euclidean, 3, &BTreeMap::new(), None).unwrap()
    }

    #[test]
    fn euclidean_ball_volume() {
        let sp = euclid();
        let v = volume_integrate(&sp, 0.0, 2.0, GridSpec::new(24, 24, 48), |_| Ok(1.0)).unwrap();
        assert!((v - 4.0 * PI * 8.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_rule_integrates_harmonics() {
        let b = BaseSpace::sphere(2);
        let nodes = base_rule(&b, GridSpec::new(8, 12, 24)).unwrap();
        let area: f64 = nodes.iter().map(|n| n.weight).sum();
        assert!((area - 4.0 * PI).abs() < 1e-13);
        let z2: f64 = nodes
            .iter()
            .map(|n| n.weight * n.theta[0].cos().powi(2))
            .sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-13);
        let xy: f64 = nodes
            .iter()
            .map(|n| n.weight * n.theta[0].sin().powi(2) * n.theta[1].cos() * n.theta[1].sin())
            .sum();
        assert!(xy.abs() < 1e-14);
    }

    #[test]
    fn horizon_substitution_gives_ads_volume_identity() {
        let mut p = BTreeMap::new();
        p.insert("m".to_string(), 1.0);
        let sp = WarpedSpace::builtin(BuiltinName::AdsSchwarzschild, 3, &p, None).unwrap();
        let s0 = sp.horizon().unwrap();
        let s1 = s0 + 1.5;
        let v = volume_integrate(&sp, s0, s1, GridSpec::default(), |pt| {
            sp.profile.potential(pt.s)
        })
        .unwrap();
        let exact = 4.0 * PI * (s1.powi(3) - s0.powi(3)) / 3.0;
        assert!((v - exact).abs() < 1e-10 * exact, "{v} vs {exact}");
    }

    #[test]
    fn trapezoid_on_periodic_function_caps_order() {
        let f = |m: usize| {
            let h = 2.0 * PI / m as f64;
            (0..m)
                .map(|k| h * (((k as f64) * h).cos()).exp())
                .sum::<f64>()
        };
        let c = convergence_order([f(8), f(16), f(32)]);
        assert_eq!(c.order, ORDER_CAP);
    }

    #[test]
    fn kink_is_flagged_low_order() {
        let f = |m: usize| {
            let (x, w) = gauss_legendre(m);
            x.iter()
                .zip(&w)
                .map(|(x, w)| w * (x - 0.3f64).abs())
                .sum::<f64>()
        };
        let c = convergence_order_exact([f(8), f(16)], 1.09);
        assert!(c.order < 3.0 && c.low_order);
    }

    #[test]
    fn non_finite_integrand_reports_location() {
        let sp = euclid();
        let e =
            volume_integrate(&sp, 0.0, 1.0, GridSpec::new(4, 4, 4), |_| Ok(f64::NAN)).unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
    }
}
