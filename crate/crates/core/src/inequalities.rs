//! Heintze-Karcher, Minkowski and almost-Schur inequalities evaluated by
//! quadrature, with their hypotheses recorded next to the margins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BaseKind, BoundaryClass, WarpedSpace};
use crate::quadrature::GridSpec;
use crate::reilly::{Domain, InnerBoundary};
use crate::surfaces::{
    space_form_curvature, static_convexity_margin, surface_geometry, Orientation, RadialGraph,
    SurfaceGeometry,
};

/// `|margin|` below this counts as equality at default grids.
pub const EQUALITY_TOL: f64 = 1e-6;

/// Radial samples for the sub-static check.
const SUBSTATIC_SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityName {
    HeintzeKarcher,
    HeintzeKarcherHorizon,
    Minkowski,
    MinkowskiHorizon,
    AfAlmostSchur,
    AfSigma2,
}

impl InequalityName {
    pub fn as_str(self) -> &'static str {
        match self {
            InequalityName::HeintzeKarcher => "heintze-karcher",
            InequalityName::HeintzeKarcherHorizon => "heintze-karcher-horizon",
            InequalityName::Minkowski => "minkowski",
            InequalityName::MinkowskiHorizon => "minkowski-horizon",
            InequalityName::AfAlmostSchur => "af-almost-schur",
            InequalityName::AfSigma2 => "af-sigma2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub value: f64,
    pub passed: bool,
}

impl HypothesisCheck {
    fn at_least(value: f64, bound: f64) -> Self {
        HypothesisCheck {
            value,
            passed: value >= bound,
        }
    }
}

/// An inequality written as `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: InequalityName,
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / scale`; non-negative when the inequality holds.
    pub margin: f64,
    pub scale: f64,
    pub equality_detected: bool,
    /// Largest `|h - H g / (n-1)|` over the surface nodes.
    pub umbilicity_defect: f64,
    pub hypothesis_checks: BTreeMap<String, HypothesisCheck>,
    pub grid: GridSpec,
}

impl InequalityReport {
    fn new(
        name: InequalityName,
        lhs: f64,
        rhs: f64,
        scale: f64,
        geo: &SurfaceGeometry,
        hypothesis_checks: BTreeMap<String, HypothesisCheck>,
    ) -> Self {
        let scale = scale.abs().max(f64::MIN_POSITIVE);
        let margin = (rhs - lhs) / scale;
        InequalityReport {
            name,
            lhs,
            rhs,
            margin,
            scale,
            equality_detected: margin.abs() <= EQUALITY_TOL,
            umbilicity_defect: geo.umbilicity_defect(),
            hypothesis_checks,
            grid: geo.spec,
        }
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypothesis_checks.values().all(|c| c.passed)
    }
}

/// Limits at the horizon of the slice mean curvature, the potential and
/// `(Lap V g - Hess V)(nu, nu) / V`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerBoundaryReport {
    pub s0: f64,
    pub potential: f64,
    pub mean_curvature: f64,
    pub limit_value: f64,
    pub passed: bool,
}

/// Tolerance for `V` and `H` to count as zero at the computed root.
const HORIZON_ZERO_TOL: f64 = 1e-5;

pub fn validate_inner_boundary(space: &WarpedSpace) -> Result<InnerBoundaryReport> {
    let s0 = horizon_radius(space)?;
    let v = space.profile.potential(s0)?;
    let h = (space.n as f64 - 1.0) * v / s0;
    let limit_value = space
        .horizon_limit_value()
        .ok_or_else(|| Error::NoHorizon(space.profile.label.clone()))?;
    Ok(InnerBoundaryReport {
        s0,
        potential: v,
        mean_curvature: h,
        limit_value,
        passed: v <= HORIZON_ZERO_TOL && h <= HORIZON_ZERO_TOL && limit_value > 0.0,
    })
}

fn horizon_radius(space: &WarpedSpace) -> Result<f64> {
    if space.profile.boundary_class != BoundaryClass::Horizon {
        return Err(Error::NoHorizon(space.profile.label.clone()));
    }
    space
        .horizon()
        .ok_or_else(|| Error::NoHorizon(space.profile.label.clone()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonConstant {
    /// `-(n-1)/n` over the limit value, i.e. `-2 s0 / (n phi'(s0))`.
    pub c_l: f64,
    /// `-2(n-1) / (n (R_N - R))` from the horizon and ambient scalar curvatures.
    pub c_l_scalar: f64,
    pub difference: f64,
}

pub fn horizon_constant(space: &WarpedSpace) -> Result<HorizonConstant> {
    let b = validate_inner_boundary(space)?;
    if !(b.limit_value > 0.0) {
        return Err(Error::InvalidParams(format!(
            "horizon limit value {} is not positive",
            b.limit_value
        )));
    }
    let nf = space.n as f64;
    let c_l = -(nf - 1.0) / nf / b.limit_value;
    // N is Einstein with Ric = (n-2) rho g_N, scaled by s0^2
    let r_n = (nf - 1.0) * (nf - 2.0) * space.base.rho / (b.s0 * b.s0);
    let r = space.scalar_curvature(b.s0)?;
    let c_l_scalar = -2.0 * (nf - 1.0) / (nf * (r_n - r));
    Ok(HorizonConstant {
        c_l,
        c_l_scalar,
        difference: (c_l - c_l_scalar).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonTerm {
    /// `s0^n |N| / n`.
    pub term: f64,
    /// `c_l int_N V_nu` with `V_nu = -phi'(s0)/2`.
    pub flux: f64,
    pub residual: f64,
}

pub fn horizon_term(space: &WarpedSpace) -> Result<HorizonTerm> {
    let c = horizon_constant(space)?;
    let s0 = horizon_radius(space)?;
    let n = space.n as i32;
    let term = s0.powi(n) * space.base.volume / n as f64;
    let vnu = -0.5 * space.profile.jet(s0)?.d[1];
    let flux = c.c_l * vnu * s0.powi(n - 1) * space.base.volume;
    Ok(HorizonTerm {
        term,
        flux,
        residual: (term - flux).abs(),
    })
}

fn enclosed_domain(space: &WarpedSpace, graph: &RadialGraph, with_horizon: bool) -> Result<Domain> {
    let inner = match (with_horizon, space.profile.boundary_class) {
        (true, BoundaryClass::Horizon) => InnerBoundary::Horizon,
        (true, BoundaryClass::Center) => return Err(Error::NoHorizon(space.profile.label.clone())),
        (false, BoundaryClass::Center) => InnerBoundary::Center,
        (false, BoundaryClass::Horizon) => {
            return Err(Error::InvalidParams(format!(
                "a radial graph in {} encloses the horizon; use the horizon variant",
                space.profile.label
            )))
        }
    };
    Ok(Domain {
        inner,
        outer: graph.clone(),
    })
}

fn common_checks(
    space: &WarpedSpace,
    geo: &SurfaceGeometry,
    with_horizon: bool,
) -> Result<BTreeMap<String, HypothesisCheck>> {
    let mut checks = BTreeMap::new();
    let min_v = geo
        .nodes
        .iter()
        .map(|nd| nd.potential)
        .fold(f64::INFINITY, f64::min);
    checks.insert(
        "positive-potential".to_string(),
        HypothesisCheck::at_least(min_v, f64::MIN_POSITIVE),
    );
    let m = space.substatic_margin(SUBSTATIC_SAMPLES)?;
    checks.insert(
        "sub-static".to_string(),
        HypothesisCheck::at_least(m.min_eigenvalue, -1e-10),
    );
    if with_horizon {
        let b = validate_inner_boundary(space)?;
        checks.insert(
            "inner-boundary".to_string(),
            HypothesisCheck {
                value: b.limit_value,
                passed: b.passed,
            },
        );
    }
    Ok(checks)
}

/// `int_Omega V` and, with a horizon, `c_l int_N V_nu = s0^n |N| / n`.
fn weighted_volume(space: &WarpedSpace, domain: &Domain, spec: GridSpec) -> Result<(f64, f64)> {
    let grid = domain.volume_grid(space, spec)?;
    let vol = grid.integrate(|p| space.profile.potential(p.s))?;
    let horizon = match domain.inner {
        InnerBoundary::Horizon => horizon_term(space)?.flux,
        _ => 0.0,
    };
    Ok((vol, horizon))
}

/// `n (int_Omega V + c_l int_N V_nu) <= (n-1) int_Sigma V / H` for the region
/// enclosed by `graph` (and the horizon if `with_horizon`).
pub fn heintze_karcher(
    space: &WarpedSpace,
    graph: &RadialGraph,
    with_horizon: bool,
    spec: GridSpec,
) -> Result<InequalityReport> {
    let domain = enclosed_domain(space, graph, with_horizon)?;
    let geo = surface_geometry(space, graph, Orientation::Outward, spec)?;
    let mut checks = common_checks(space, &geo, with_horizon)?;
    let min_h = geo
        .nodes
        .iter()
        .map(|nd| nd.mean_curvature)
        .fold(f64::INFINITY, f64::min);
    checks.insert(
        "mean-convexity".to_string(),
        HypothesisCheck::at_least(min_h, f64::MIN_POSITIVE),
    );
    let (vol, horizon) = weighted_volume(space, &domain, spec)?;
    let nf = space.n as f64;
    let lhs = nf * (vol + horizon);
    let rhs = (nf - 1.0) * geo.integrate(|nd| Ok(nd.potential / nd.mean_curvature))?;
    let name = if with_horizon {
        InequalityName::HeintzeKarcherHorizon
    } else {
        InequalityName::HeintzeKarcher
    };
    Ok(InequalityReport::new(
        name,
        lhs,
        rhs,
        lhs.max(rhs),
        &geo,
        checks,
    ))
}

/// `n/(n-1) (int_Omega V + s0^n |N| / n) int_Sigma H V <= (int_Sigma V)^2`.
pub fn minkowski(
    space: &WarpedSpace,
    graph: &RadialGraph,
    with_horizon: bool,
    spec: GridSpec,
) -> Result<InequalityReport> {
    let domain = enclosed_domain(space, graph, with_horizon)?;
    let geo = surface_geometry(space, graph, Orientation::Outward, spec)?;
    let mut checks = common_checks(space, &geo, with_horizon)?;
    checks.insert(
        "static-convexity".to_string(),
        HypothesisCheck::at_least(static_convexity_margin(&geo)?, 0.0),
    );
    let (vol, horizon) = weighted_volume(space, &domain, spec)?;
    let s = geo.integrate_many(2, |nd| {
        Ok(vec![nd.potential, nd.potential * nd.mean_curvature])
    })?;
    let nf = space.n as f64;
    let lhs = nf / (nf - 1.0) * (vol + horizon) * s[1];
    let rhs = s[0] * s[0];
    let name = if with_horizon {
        InequalityName::MinkowskiHorizon
    } else {
        InequalityName::Minkowski
    };
    Ok(InequalityReport::new(
        name,
        lhs,
        rhs,
        lhs.max(rhs),
        &geo,
        checks,
    ))
}

/// Both forms of the weighted almost-Schur inequality and the gap between
/// their margins, which the Ge-Wang identity says is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostSchur {
    /// `int V (H - mean_V H)^2 <= (n-1)/(n-2) int V |h - H g/(n-1)|^2`.
    pub af1: InequalityReport,
    /// `2(n-1)/(n-2) int V int sigma_2 V <= (int H V)^2`.
    pub af2: InequalityReport,
    /// `mean_V H = int H V / int V`.
    pub weighted_mean_curvature: f64,
    /// `|(rhs - lhs)_1 - (rhs - lhs)_2 / int V|`, relative to the first scale.
    pub ge_wang_gap: f64,
}

/// Evaluated for a closed graph in the hyperbolic space or the hemisphere with
/// weight `v_scale * V`.
pub fn af_almost_schur(
    space: &WarpedSpace,
    graph: &RadialGraph,
    spec: GridSpec,
    v_scale: f64,
) -> Result<AlmostSchur> {
    let k = space_form_curvature(space)
        .filter(|k| (k.abs() - 1.0).abs() < 1e-12 && space.base.kind == BaseKind::RoundSphere);
    let Some(k) = k else {
        return Err(Error::Unsupported(format!(
            "the almost-Schur inequality needs the hyperbolic space or the hemisphere, got {}",
            space.profile.label
        )));
    };
    if !(v_scale > 0.0) {
        return Err(Error::InvalidParams(format!(
            "weight scale {v_scale} must be positive"
        )));
    }
    let geo = surface_geometry(space, graph, Orientation::Outward, spec)?;
    let mut checks = BTreeMap::new();
    if k < 0.0 {
        checks.insert(
            "static-convexity".to_string(),
            HypothesisCheck::at_least(static_convexity_margin(&geo)?, 0.0),
        );
    } else {
        let mut min_k = f64::INFINITY;
        for nd in &geo.nodes {
            min_k = min_k.min(nd.principal_curvatures()?[0]);
        }
        checks.insert(
            "convexity".to_string(),
            HypothesisCheck::at_least(min_k, f64::MIN_POSITIVE),
        );
    }
    let nf = space.n as f64;
    let s = geo.integrate_many(3, |nd| {
        let v = v_scale * nd.potential;
        Ok(vec![v, v * nd.mean_curvature, v * nd.sigma2()])
    })?;
    let (int_v, int_hv, int_s2v) = (s[0], s[1], s[2]);
    let mean = int_hv / int_v;
    let t = geo.integrate_many(3, |nd| {
        let v = v_scale * nd.potential;
        let c = nd.mean_curvature / (nf - 1.0);
        let d = nd.g.dim;
        let traceless = |a: usize, b: usize| nd.h.get2(a, b) - c * nd.g.get2(a, b);
        let mut norm = 0.0;
        for a in 0..d {
            for b in 0..d {
                for e in 0..d {
                    for f in 0..d {
                        norm += nd.ginv.get2(a, e)
                            * nd.ginv.get2(b, f)
                            * traceless(a, b)
                            * traceless(e, f);
                    }
                }
            }
        }
        let dh = nd.mean_curvature - mean;
        Ok(vec![
            v * dh * dh,
            v * norm,
            v * nd.mean_curvature * nd.mean_curvature,
        ])
    })?;
    let ratio = (nf - 1.0) / (nf - 2.0);
    let af1 = InequalityReport::new(
        InequalityName::AfAlmostSchur,
        t[0],
        ratio * t[1],
        t[2],
        &geo,
        checks.clone(),
    );
    let af2 = InequalityReport::new(
        InequalityName::AfSigma2,
        2.0 * ratio * int_v * int_s2v,
        int_hv * int_hv,
        int_hv * int_hv,
        &geo,
        checks,
    );
    let d1 = af1.rhs - af1.lhs;
    let d2 = (af2.rhs - af2.lhs) / int_v;
    Ok(AlmostSchur {
        ge_wang_gap: (d1 - d2).abs() / af1.scale,
        af1,
        af2,
        weighted_mean_curvature: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FieldExpr;
    use crate::geometry::BuiltinName;
    use crate::surfaces::{off_center_sphere, SpaceFormKind};
    use std::f64::consts::PI;

    fn space(name: BuiltinName, params: &[(&str, f64)]) -> WarpedSpace {
        let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        WarpedSpace::builtin(name, 3, &p, None).unwrap()
    }

    fn graph(src: &str) -> RadialGraph {
        RadialGraph::new(src, FieldExpr::parse(src).unwrap()).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec {
            radial: 24,
            polar: 24,
            azimuthal: 48,
        }
    }

    fn ads() -> WarpedSpace {
        space(BuiltinName::AdsSchwarzschild, &[("m", 1.0)])
    }

    #[test]
    fn inner_boundary_validation() {
        for sp in [
            ads(),
            space(BuiltinName::Schwarzschild, &[("m", 1.0)]),
            space(BuiltinName::DsSchwarzschild, &[("m", 0.2)]),
            space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]),
        ] {
            let b = validate_inner_boundary(&sp).unwrap();
            assert!(b.passed, "{}: {b:?}", sp.profile.label);
        }
        let s0 = ads().horizon().unwrap();
        let b = validate_inner_boundary(&ads()).unwrap();
        // (n-1) phi'(s0) / (2 s0) with phi' = 2 s + m / s^2
        assert!((b.limit_value - (2.0 * s0 + 1.0 / (s0 * s0)) / s0).abs() < 1e-12);
        assert!(matches!(
            validate_inner_boundary(&space(BuiltinName::Hemisphere, &[])),
            Err(Error::NoHorizon(_))
        ));
    }

    #[test]
    fn horizon_constant_two_ways() {
        for sp in [
            ads(),
            space(BuiltinName::Schwarzschild, &[("m", 1.5)]),
            space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]),
        ] {
            let c = horizon_constant(&sp).unwrap();
            assert!(c.c_l < 0.0);
            assert!(
                c.difference <= 1e-10 * c.c_l.abs(),
                "{}: {c:?}",
                sp.profile.label
            );
        }
        // Schwarzschild n = 3: phi'(s0) = 1/s0, so c_l = -2 s0^2 / 3
        let c = horizon_constant(&space(BuiltinName::Schwarzschild, &[("m", 1.5)])).unwrap();
        assert!((c.c_l + 2.0 * 1.5 * 1.5 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn horizon_term_identity() {
        let t = horizon_term(&space(BuiltinName::Schwarzschild, &[("m", 1.0)])).unwrap();
        assert!((t.term - 4.0 * PI / 3.0).abs() < 1e-10);
        let sp = ads();
        let s0 = sp.horizon().unwrap();
        assert!((1.0 + s0 * s0 - 1.0 / s0).abs() < 1e-10);
        let t = horizon_term(&sp).unwrap();
        assert!((t.term - 4.0 * PI * s0.powi(3) / 3.0).abs() < 1e-12);
        for sp in [
            sp,
            space(BuiltinName::DsSchwarzschild, &[("m", 0.2)]),
            space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]),
            space(BuiltinName::AdsTorus, &[("m", 1.0)]),
        ] {
            let t = horizon_term(&sp).unwrap();
            assert!(t.residual <= 1e-10 * t.term, "{}: {t:?}", sp.profile.label);
        }
    }

    #[test]
    fn euclidean_ball_is_an_equality_case() {
        let sp = space(BuiltinName::Euclidean, &[]);
        let g = RadialGraph::slice(1.3);
        for r in [
            heintze_karcher(&sp, &g, false, grid()).unwrap(),
            minkowski(&sp, &g, false, grid()).unwrap(),
        ] {
            assert!(r.equality_detected && r.hypotheses_hold(), "{r:?}");
            assert!(r.umbilicity_defect <= 1e-8);
        }
        let hk = heintze_karcher(&sp, &g, false, grid()).unwrap();
        assert!((hk.lhs - 4.0 * PI * 1.3f64.powi(3)).abs() < 1e-10 * hk.lhs);
    }

    #[test]
    fn ads_slices_with_horizon_are_equality_cases() {
        let sp = ads();
        let s1 = 2.0;
        let g = RadialGraph::slice(s1);
        let hk = heintze_karcher(&sp, &g, true, grid()).unwrap();
        let closed = s1.powi(3) * 4.0 * PI;
        assert!((hk.lhs - closed).abs() <= 1e-8 * closed, "{hk:?}");
        assert!((hk.rhs - closed).abs() <= 1e-8 * closed, "{hk:?}");
        assert!(hk.margin.abs() <= 1e-8 && hk.hypotheses_hold());
        let mk = minkowski(&sp, &g, true, grid()).unwrap();
        assert!(mk.margin.abs() <= 1e-7 && mk.equality_detected, "{mk:?}");
        assert!(mk.umbilicity_defect <= 1e-8);
    }

    #[test]
    fn perturbed_graphs_are_strict() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        // a first harmonic is a translation to first order, so use the second
        let g = graph("1.2*(1 + 0.1*cos(theta1)^2)");
        let hk = heintze_karcher(&sp, &g, false, grid()).unwrap();
        assert!(hk.hypotheses_hold() && hk.margin > 1e-4, "{hk:?}");
        let mk = minkowski(&sp, &g, false, grid()).unwrap();
        assert!(mk.hypotheses_hold(), "{mk:?}");
        assert!(mk.margin > 1e-4, "{mk:?}");
        assert!(mk.umbilicity_defect > 1e-3);
    }

    #[test]
    fn horizon_flag_must_match_the_space() {
        let g = RadialGraph::slice(2.0);
        assert!(heintze_karcher(&ads(), &g, false, grid()).is_err());
        assert!(minkowski(&space(BuiltinName::Euclidean, &[]), &g, true, grid()).is_err());
    }

    #[test]
    fn mean_concave_surface_fails_the_hypothesis() {
        // a deep dimple gives H < 0 near the pole
        let sp = space(BuiltinName::Euclidean, &[]);
        let g = graph("1 - 0.6*exp(-8*theta1^2)");
        let hk = heintze_karcher(&sp, &g, false, grid()).unwrap();
        assert!(!hk.hypothesis_checks["mean-convexity"].passed);
        assert!(hk.margin.is_finite());
    }

    #[test]
    fn geodesic_spheres_are_af_equality_cases() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        for g in [
            RadialGraph::slice(0.8),
            off_center_sphere(SpaceFormKind::Hyperbolic, 0.3, 0.9).unwrap(),
        ] {
            let a = af_almost_schur(&sp, &g, grid(), 1.0).unwrap();
            assert!(a.af1.equality_detected && a.af2.equality_detected, "{a:?}");
            assert!(a.af1.hypotheses_hold());
            assert!(a.ge_wang_gap <= 1e-9, "{}", a.ge_wang_gap);
        }
        let a = af_almost_schur(&sp, &RadialGraph::slice(0.8), grid(), 1.0).unwrap();
        assert!(a.af1.lhs.abs() < 1e-12 && a.af1.rhs.abs() < 1e-12);
    }

    #[test]
    fn horo_convex_perturbation_is_strict() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let g = graph("0.9 + 0.05*cos(theta1)");
        let a = af_almost_schur(&sp, &g, grid(), 1.0).unwrap();
        assert!(a.af1.hypotheses_hold(), "{a:?}");
        assert!(a.af1.margin > 0.0 && a.af2.margin > 0.0, "{a:?}");
        assert!(a.af1.rhs - a.af1.lhs > 0.1 * a.af1.rhs, "{a:?}");
        let b = af_almost_schur(&sp, &graph("0.9 + 0.05*cos(theta1)^2"), grid(), 1.0).unwrap();
        assert!(
            b.af1.hypotheses_hold() && b.af1.margin > 1e-5 && !b.af1.equality_detected,
            "{b:?}"
        );
        assert!(a.ge_wang_gap <= 1e-9);
    }

    #[test]
    fn hemisphere_convex_and_nonconvex() {
        let sp = space(BuiltinName::Hemisphere, &[]);
        let a = af_almost_schur(&sp, &graph("0.5 + 0.03*cos(theta1)"), grid(), 1.0).unwrap();
        assert!(a.af1.hypotheses_hold() && a.af2.margin >= -1e-9, "{a:?}");
        let b = af_almost_schur(&sp, &graph("0.6 - 0.25*exp(-6*theta1^2)"), grid(), 1.0).unwrap();
        assert!(!b.af2.hypothesis_checks["convexity"].passed);
        assert!(b.af2.margin.is_finite());
    }

    #[test]
    fn scaling_the_weight_scales_both_sides() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let g = graph("0.9 + 0.05*cos(theta1)");
        let a = af_almost_schur(&sp, &g, grid(), 1.0).unwrap();
        let b = af_almost_schur(&sp, &g, grid(), 2.0).unwrap();
        assert!((b.af1.lhs - 2.0 * a.af1.lhs).abs() <= 1e-14 * a.af1.lhs.abs().max(1e-300));
        assert!((b.af1.rhs - 2.0 * a.af1.rhs).abs() <= 1e-14 * a.af1.rhs.abs());
        assert!((b.af1.margin - a.af1.margin).abs() <= 1e-13);
        assert!((b.weighted_mean_curvature - a.weighted_mean_curvature).abs() <= 1e-14);
    }

    #[test]
    fn almost_schur_needs_a_space_form() {
        let e = af_almost_schur(&ads(), &RadialGraph::slice(2.0), grid(), 1.0);
        assert!(matches!(e, Err(Error::Unsupported(_))));
    }
}
