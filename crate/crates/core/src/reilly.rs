//! Term-by-term evaluation of the Reilly-type integral formulas on domains
//! bounded by radial graphs, and of the pointwise divergence identities
//! used to derive them.
//!
//! Every integral is a sum of named ledger entries. The residual of an
//! identity is reported against `scale`, the sum of the absolute entries, so
//! that a near cancellation cannot pass as agreement.
//!
//! Domains have an outer radial graph and one of three inner boundaries: the
//! center of a regular space (no boundary), a slice `s = a`, or the horizon.
//! On a horizon every boundary term carrying a factor `V` vanishes and the
//! remaining ones are evaluated in their limit forms.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalEnv, FieldExpr};
use crate::fields::field_data;
use crate::geometry::{
    raise, FdScheme, Point, Rank, TensorValue, WarpedField, WarpedSpace, WarpedTensor,
};
use crate::jet::Jet2;
use crate::quadrature::{base_rule, weighted_sums, GridSpec, VolumeGrid};
use crate::surfaces::{
    intrinsic_ricci, surface_geometry, tangential_calculus, Orientation, RadialGraph,
    SurfaceGeometry, SurfaceNode,
};

/// Inner end of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnerBoundary {
    /// The regular center `s = 0`; the domain has no inner boundary.
    Center,
    /// The horizon `phi(s_0) = 0`.
    Horizon,
    Slice {
        s: f64,
    },
}

/// `{ s_in <= s <= rho(theta) }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub inner: InnerBoundary,
    pub outer: RadialGraph,
}

impl Domain {
    pub fn ball(radius: f64) -> Self {
        Domain {
            inner: InnerBoundary::Center,
            outer: RadialGraph::slice(radius),
        }
    }

    pub fn annulus(a: f64, b: f64) -> Self {
        Domain {
            inner: InnerBoundary::Slice { s: a },
            outer: RadialGraph::slice(b),
        }
    }

    pub fn from_horizon(b: f64) -> Self {
        Domain {
            inner: InnerBoundary::Horizon,
            outer: RadialGraph::slice(b),
        }
    }

    pub fn inner_radius(&self, space: &WarpedSpace) -> Result<f64> {
        let pr = &space.profile;
        match self.inner {
            InnerBoundary::Center => {
                if pr.s_min != 0.0 || space.is_horizon() {
                    return Err(Error::InvalidParams(format!(
                        "{} has no regular center",
                        pr.label
                    )));
                }
                Ok(0.0)
            }
            InnerBoundary::Horizon => space
                .horizon()
                .ok_or_else(|| Error::NoHorizon(pr.label.clone())),
            InnerBoundary::Slice { s } => {
                if !(s > pr.s_min && s < pr.s_max) {
                    return Err(Error::OutOfDomain {
                        s,
                        min: pr.s_min,
                        max: pr.s_max,
                    });
                }
                Ok(s)
            }
        }
    }

    pub fn volume_grid(&self, space: &WarpedSpace, spec: GridSpec) -> Result<VolumeGrid> {
        spec.validate()?;
        let s_in = self.inner_radius(space)?;
        let graph = &self.outer;
        VolumeGrid::under_graph(space, s_in, |theta| graph_radius(space, graph, theta), spec)
    }

    fn components(&self, space: &WarpedSpace, spec: GridSpec) -> Result<Vec<Component>> {
        let mut out = vec![Component::Surface(surface_geometry(
            space,
            &self.outer,
            Orientation::Outward,
            spec,
        )?)];
        match self.inner {
            InnerBoundary::Center => {}
            InnerBoundary::Horizon => out.push(Component::Horizon(horizon_slice(
                space,
                self.inner_radius(space)?,
                spec,
            )?)),
            InnerBoundary::Slice { s } => out.push(Component::Surface(surface_geometry(
                space,
                &RadialGraph::slice(s),
                Orientation::Inward,
                spec,
            )?)),
        }
        Ok(out)
    }
}

fn graph_radius(space: &WarpedSpace, graph: &RadialGraph, theta: &[f64]) -> Result<f64> {
    let r = graph.rho.eval::<f64>(&EvalEnv {
        s: None,
        theta,
        profile: Some(&space.profile),
    })?;
    if !r.is_finite() {
        return Err(Error::NonFinite {
            location: format!("{} at theta = {theta:?}", graph.label),
        });
    }
    Ok(r)
}

enum Component {
    Surface(SurfaceGeometry),
    Horizon(HorizonSlice),
}

impl Component {
    fn label(&self) -> String {
        match self {
            Component::Surface(g) => g.label.clone(),
            Component::Horizon(h) => format!("horizon s = {}", h.s0),
        }
    }
}

/// Base nodes of the horizon with the area weight `s_0^{n-1} dvol_N`.
struct HorizonSlice {
    s0: f64,
    nodes: Vec<(Vec<f64>, f64)>,
}

fn horizon_slice(space: &WarpedSpace, s0: f64, spec: GridSpec) -> Result<HorizonSlice> {
    let area = s0.powi(space.n as i32 - 1);
    Ok(HorizonSlice {
        s0,
        nodes: base_rule(&space.base, spec)?
            .into_iter()
            .map(|b| (b.theta, b.weight * area))
            .collect(),
    })
}

/// Smallest relative offset tried when a field cannot be evaluated exactly
/// on the horizon (for instance `V` where the computed `phi` is `-1e-14`).
const HORIZON_OFFSET: f64 = 1e-13;

/// Value and `|grad z|^2` of `f` restricted to the horizon slice.
fn horizon_trace(space: &WarpedSpace, f: &FieldExpr, s0: f64, theta: &[f64]) -> Result<(f64, f64)> {
    let m = space.n - 1;
    let tj: Vec<Jet2> = (0..m).map(|k| Jet2::variable(m, k, theta[k])).collect();
    let at = |s: f64| -> Result<Jet2> {
        let j: Jet2 = f.eval(&EvalEnv {
            s: Some(Jet2::constant(m, s)),
            theta: &tj,
            profile: Some(&space.profile),
        })?;
        if j.value.is_finite() && j.grad_slice().iter().all(|g| g.is_finite()) {
            Ok(j)
        } else {
            Err(Error::NonFinite {
                location: format!("`{}` on the horizon", f.source()),
            })
        }
    };
    let mut j = at(s0);
    let mut offset = HORIZON_OFFSET;
    while j.is_err() && offset < 1e-9 {
        j = at(s0 * (1.0 + offset));
        offset *= 2.0;
    }
    let j = j?;
    let gn = space.base.metric_diag(theta);
    let grad_sq = (0..m)
        .map(|a| j.grad[a] * j.grad[a] / (s0 * s0 * gn[a]))
        .sum();
    Ok((j.value, grad_sq))
}

/// Symmetric tensor `P` entering the general formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PChoice {
    /// `P = 0`: the classical Reilly formula when `V = 1`.
    Zero,
    /// `P = (n-1) kappa g`.
    ConstantCurvature { kappa: f64 },
    /// `P = (Hess V - Lap V g) / V`.
    Potential,
    /// `P = p g` for a scalar field `p`.
    Custom { p: FieldExpr },
}

/// `P`, its trace, `div P` as a covector and `div div P` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct PData {
    pub p: TensorValue,
    pub trace: f64,
    pub div: Vec<f64>,
    pub divdiv: f64,
}

/// Step for the coordinate divergence when `P` comes from a user potential.
const NESTED_STEP: f64 = 1e-3;

pub fn p_data(
    space: &WarpedSpace,
    choice: &PChoice,
    v_override: Option<&FieldExpr>,
    pt: &Point,
) -> Result<PData> {
    let n = space.n;
    let (g, ginv) = space.metric_at(pt)?;
    let scaled_metric = |c: f64| {
        let mut t = g.clone();
        t.components.iter_mut().for_each(|x| *x *= c);
        t
    };
    Ok(match choice {
        PChoice::Zero => PData {
            p: TensorValue::zeros(Rank::Covariant2, n),
            trace: 0.0,
            div: vec![0.0; n],
            divdiv: 0.0,
        },
        PChoice::ConstantCurvature { kappa } => {
            let c = (n as f64 - 1.0) * kappa;
            PData {
                p: scaled_metric(c),
                trace: n as f64 * c,
                div: vec![0.0; n],
                divdiv: 0.0,
            }
        }
        PChoice::Custom { p } => {
            let d = field_data(space, p, pt)?;
            PData {
                p: scaled_metric(d.value),
                trace: n as f64 * d.value,
                div: d.grad,
                divdiv: d.laplacian,
            }
        }
        PChoice::Potential => match v_override {
            None => {
                let phi = space.profile.phi(pt.s)?;
                let (w, _) = space.warped_with_derivative(WarpedField::PPotential, pt.s)?;
                let (d, divdiv) = space.warped_divergence(WarpedField::PPotential, pt.s)?;
                let mut div = vec![0.0; n];
                div[0] = d / phi.sqrt();
                PData {
                    p: w.to_coords(phi, pt.s, &space.base.metric_diag(&pt.theta)),
                    trace: w.trace(n),
                    div,
                    divdiv,
                }
            }
            Some(v) => {
                let at = |q: &Point| potential_p_tensor(space, v, q);
                let p = at(pt)?;
                let fd = FdScheme::fourth(NESTED_STEP);
                PData {
                    trace: p.trace_with(&ginv),
                    div: divergence_fd(space, pt, fd, &at)?,
                    divdiv: double_divergence_fd(space, pt, fd, &at)?,
                    p,
                }
            }
        },
    })
}

/// `(Hess V - Lap V g) / V` for a potential given as an expression.
pub fn potential_p_tensor(space: &WarpedSpace, v: &FieldExpr, pt: &Point) -> Result<TensorValue> {
    let d = field_data(space, v, pt)?;
    if d.value.abs() < 1e-300 {
        return Err(Error::VanishingPotential(format!(
            "`{}` at s = {}, theta = {:?}",
            v.source(),
            pt.s,
            pt.theta
        )));
    }
    let (g, _) = space.metric_at(pt)?;
    let mut p = d.hess.clone();
    for (x, gij) in p.components.iter_mut().zip(&g.components) {
        *x = (*x - d.laplacian * gij) / d.value;
    }
    Ok(p)
}

/// `(div T)_j = g^{ik} T_{ij;k}` with coordinate differences of `T`.
pub fn divergence_fd(
    space: &WarpedSpace,
    pt: &Point,
    fd: FdScheme,
    t: &impl Fn(&Point) -> Result<TensorValue>,
) -> Result<Vec<f64>> {
    let n = space.n;
    let x = pt.coords();
    let dt: Vec<Vec<f64>> = (0..n)
        .map(|k| fd.partial(&x, k, |y| Ok(t(&Point::from_coords(y))?.components)))
        .collect::<Result<_>>()?;
    let t0 = t(pt)?;
    let gamma = space.christoffel_at(pt)?;
    let (_, ginv) = space.metric_at(pt)?;
    Ok((0..n)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let gik = ginv.get2(i, k);
                    if gik == 0.0 {
                        continue;
                    }
                    let mut cov = dt[k][i * n + j];
                    for l in 0..n {
                        cov -= gamma.get3(l, k, i) * t0.get2(l, j)
                            + gamma.get3(l, k, j) * t0.get2(i, l);
                    }
                    acc += gik * cov;
                }
            }
            acc
        })
        .collect())
}

/// `div div T` by differencing [`divergence_fd`] once more.
pub fn double_divergence_fd(
    space: &WarpedSpace,
    pt: &Point,
    fd: FdScheme,
    t: &impl Fn(&Point) -> Result<TensorValue>,
) -> Result<f64> {
    let n = space.n;
    let x = pt.coords();
    let w = |q: &Point| divergence_fd(space, q, fd, t);
    let dw: Vec<Vec<f64>> = (0..n)
        .map(|k| fd.partial(&x, k, |y| w(&Point::from_coords(y))))
        .collect::<Result<_>>()?;
    let w0 = w(pt)?;
    let gamma = space.christoffel_at(pt)?;
    let (_, ginv) = space.metric_at(pt)?;
    let mut acc = 0.0;
    for j in 0..n {
        for k in 0..n {
            let gjk = ginv.get2(j, k);
            if gjk == 0.0 {
                continue;
            }
            let mut cov = dw[k][j];
            for l in 0..n {
                cov -= gamma.get3(l, k, j) * w0[l];
            }
            acc += gjk * cov;
        }
    }
    Ok(acc)
}

/// `g^{ik} g^{jl} A_ij B_kl`.
fn contract(a: &TensorValue, b: &TensorValue, ginv: &TensorValue) -> f64 {
    (a.raised(ginv) * b.raised(ginv)).trace()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual.abs() / scale
    } else {
        0.0
    }
}

/// `Q(X, X)` for a coordinate covector `x`.
fn warped_quadratic(space: &WarpedSpace, w: WarpedTensor, pt: &Point, x: &[f64]) -> Result<f64> {
    let phi = space.profile.phi(pt.s)?;
    let gn = space.base.metric_diag(&pt.theta);
    let tan: f64 = (1..space.n)
        .map(|a| x[a] * x[a] / (pt.s * pt.s * gn[a - 1]))
        .sum();
    Ok(w.rad * phi * x[0] * x[0] + w.tan * tan)
}

/// Boundary integrals of the potential-weighted formula on one component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTerms {
    /// `int V h(grad z, grad z)`.
    #[serde(rename = "B_h")]
    pub b_h: f64,
    /// `int 2 V u Lap z`.
    #[serde(rename = "B_mixed")]
    pub b_mixed: f64,
    /// `int V H u^2`.
    #[serde(rename = "B_H")]
    pub b_mean: f64,
    /// `int V_nu |grad z|^2`.
    #[serde(rename = "B_Vnu")]
    pub b_vnu: f64,
    /// `int 2 z Hess V(grad z, nu)`.
    #[serde(rename = "B_hessV")]
    pub b_hess_v: f64,
    /// `-int 2 z u (Lap V + H V_nu)`, with the boundary Laplacian.
    #[serde(rename = "B_cross")]
    pub b_cross: f64,
    /// `-int z^2 P(grad V, nu)` with `P = (Hess V - Lap V g) / V`.
    #[serde(rename = "B_q")]
    pub b_q: f64,
}

impl BoundaryTerms {
    fn from_slice(v: &[f64]) -> Self {
        BoundaryTerms {
            b_h: v[0],
            b_mixed: v[1],
            b_mean: v[2],
            b_vnu: v[3],
            b_hess_v: v[4],
            b_cross: v[5],
            b_q: v[6],
        }
    }

    fn entries(&self) -> [f64; 7] {
        [
            self.b_h,
            self.b_mixed,
            self.b_mean,
            self.b_vnu,
            self.b_hess_v,
            self.b_cross,
            self.b_q,
        ]
    }

    pub fn total(&self) -> f64 {
        self.entries().iter().sum()
    }

    pub fn abs_total(&self) -> f64 {
        self.entries().iter().map(|x| x.abs()).sum()
    }

    fn add(&self, o: &BoundaryTerms) -> BoundaryTerms {
        let (a, b) = (self.entries(), o.entries());
        BoundaryTerms::from_slice(&std::array::from_fn::<f64, 7, _>(|k| a[k] + b[k]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTerms {
    pub label: String,
    pub terms: BoundaryTerms,
}

/// Pointwise `|A_ij|^2 >= A^2 / n` at every volume node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySchwarzCheck {
    pub nodes: usize,
    pub violations: usize,
    /// `(n-1)/n int V A^2`, an upper bound for `lhs_volume` when `V > 0`.
    pub lhs_bound: f64,
}

/// Ledger of the potential-weighted Reilly identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReillyBreakdown {
    pub space: String,
    pub field: String,
    pub grid: GridSpec,
    /// `int V [A(f)^2 - |A_ij(f)|^2]`.
    pub lhs_volume: f64,
    /// Componentwise sum of the boundary terms.
    pub boundary: BoundaryTerms,
    pub components: Vec<ComponentTerms>,
    /// `int V Q(X, X)` with `X = grad f - f grad V / V`.
    #[serde(rename = "bulk_Q")]
    pub bulk_q: f64,
    pub residual: f64,
    pub scale: f64,
    pub relative_residual: f64,
    pub cauchy_schwarz: CauchySchwarzCheck,
}

impl ReillyBreakdown {
    /// Right-hand side of the identity.
    pub fn rhs(&self) -> f64 {
        self.boundary.total() + self.bulk_q
    }
}

/// Roundoff allowance in the pointwise Cauchy-Schwarz check.
const CS_SLACK: f64 = 1e-12;

/// Volume integrands `[V(A^2 - |A_ij|^2), V Q(X, X), V A^2]`.
fn weighted_reilly_volume(
    space: &WarpedSpace,
    f: &FieldExpr,
    pt: &Point,
    violations: &AtomicUsize,
) -> Result<Vec<f64>> {
    let fd = field_data(space, f, pt)?;
    let pj = space.potential_jet(pt, true)?;
    let (_, ginv) = space.metric_at(pt)?;
    let a = fd.laplacian - pj.laplacian * fd.value;
    let mut aij = fd.hess.clone();
    for (x, h) in aij.components.iter_mut().zip(&pj.hess.components) {
        *x -= h * fd.value;
    }
    let norm = aij.norm_sq_with(&ginv);
    let size = fd.hess.norm_sq_with(&ginv) + (fd.value * fd.value) * pj.hess.norm_sq_with(&ginv);
    if norm < a * a / space.n as f64 - CS_SLACK * size {
        violations.fetch_add(1, Ordering::Relaxed);
    }
    let x: Vec<f64> = (0..space.n)
        .map(|i| fd.grad[i] - fd.value * pj.grad[i] / pj.v)
        .collect();
    let bulk = pj.v * warped_quadratic(space, space.q_warped(pt.s)?, pt, &x)?;
    Ok(vec![pj.v * (a * a - norm), bulk, pj.v * a * a])
}

/// The seven boundary integrands at a node with `V > 0`, plus the
/// reassembled `z^2 (Q - Ric)(grad V, nu)` used by the inequality form.
fn weighted_reilly_surface(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    f: &FieldExpr,
    potential: &FieldExpr,
) -> Result<Vec<f64>> {
    let fd = field_data(space, f, &node.point)?;
    let tz = tangential_calculus(space, graph, node, f)?;
    let tv = tangential_calculus(space, graph, node, potential)?;
    let pj = space.potential_jet(&node.point, false)?;
    let (_, ginv) = space.metric_at(&node.point)?;
    let nu = &node.normal;
    let (v, vnu, h_mean) = (node.potential, node.potential_normal, node.mean_curvature);
    let z = tz.value;
    let u = dot(&fd.grad, nu);
    let zc = tz.raised(node);
    let grad_z = node.push_forward(&zc);
    let grad_v = raise(&ginv, &pj.grad);
    let p_vnu = (pj.hess.apply2(&grad_v, nu) - pj.laplacian * vnu) / v;
    let q = space.q_tensor_at(&node.point)?;
    let ric = space.curvature_at(&node.point)?.ricci;
    let q_minus_ric = q.apply2(&grad_v, nu) - ric.apply2(&grad_v, nu);
    Ok(vec![
        v * node.h.apply2(&zc, &zc),
        2.0 * v * u * tz.laplacian,
        v * h_mean * u * u,
        vnu * tz.grad_sq,
        2.0 * z * pj.hess.apply2(&grad_z, nu),
        -2.0 * z * u * (tv.laplacian + h_mean * vnu),
        -z * z * p_vnu,
        z * z * q_minus_ric,
    ])
}

/// Horizon limits: only `B_Vnu` and `B_q` survive. With the inward normal
/// `V_nu = -phi'(s_0)/2` and `P(grad V, nu) = (n-1) phi'^2 / (4 s_0)`.
fn weighted_reilly_horizon(
    space: &WarpedSpace,
    f: &FieldExpr,
    hz: &HorizonSlice,
) -> Result<Vec<f64>> {
    let s0 = hz.s0;
    let dphi = space.profile.jet(s0)?.d[1];
    let nm1 = space.n as f64 - 1.0;
    let (q, ric) = (space.q_warped(s0)?, space.ricci_warped(s0)?);
    let vnu = -0.5 * dphi;
    weighted_sums(
        &hz.nodes,
        8,
        |(theta, w)| {
            let (z, grad_sq) = horizon_trace(space, f, s0, theta)?;
            let mut t = vec![0.0; 8];
            t[3] = w * vnu * grad_sq;
            t[6] = -w * z * z * nm1 * dphi * dphi / (4.0 * s0);
            t[7] = w * z * z * (q.rad - ric.rad) * 0.5 * dphi * -1.0;
            Ok(t)
        },
        |(theta, _)| format!("horizon at theta = {theta:?}"),
    )
}

struct WeightedReillyRaw {
    volume: Vec<f64>,
    components: Vec<(String, Vec<f64>)>,
    violations: usize,
    nodes: usize,
}

fn weighted_reilly_raw(
    space: &WarpedSpace,
    domain: &Domain,
    f: &FieldExpr,
    spec: GridSpec,
) -> Result<WeightedReillyRaw> {
    check_field(space, f)?;
    let grid = domain.volume_grid(space, spec)?;
    let violations = AtomicUsize::new(0);
    let volume = grid.integrate_many(3, |p| weighted_reilly_volume(space, f, p, &violations))?;
    let potential = FieldExpr::parse("V")?;
    let mut components = Vec::new();
    for c in domain.components(space, spec)? {
        let terms = match &c {
            Component::Surface(geo) => {
                if let Some(nd) = geo.nodes.iter().find(|nd| !(nd.potential > 0.0)) {
                    return Err(Error::VanishingPotential(format!(
                        "{} at theta = {:?}",
                        geo.label, nd.u
                    )));
                }
                geo.integrate_many(8, |nd| {
                    weighted_reilly_surface(space, &geo.graph, nd, f, &potential)
                })?
            }
            Component::Horizon(hz) => weighted_reilly_horizon(space, f, hz)?,
        };
        components.push((c.label(), terms));
    }
    Ok(WeightedReillyRaw {
        volume,
        components,
        violations: violations.into_inner(),
        nodes: grid.nodes.len(),
    })
}

fn check_field(space: &WarpedSpace, f: &FieldExpr) -> Result<()> {
    if let Some(p) = f.free_params().first() {
        return Err(Error::UnknownSymbol(p.clone()));
    }
    if f.max_theta() > space.n - 1 {
        return Err(Error::InvalidParams(format!(
            "`{}` uses more angles than the base has",
            f.source()
        )));
    }
    Ok(())
}

fn breakdown_from_raw(
    space: &WarpedSpace,
    f: &FieldExpr,
    spec: GridSpec,
    raw: &WeightedReillyRaw,
) -> ReillyBreakdown {
    let components: Vec<ComponentTerms> = raw
        .components
        .iter()
        .map(|(label, t)| ComponentTerms {
            label: label.clone(),
            terms: BoundaryTerms::from_slice(t),
        })
        .collect();
    let boundary = components
        .iter()
        .fold(BoundaryTerms::default(), |acc, c| acc.add(&c.terms));
    let (lhs, bulk) = (raw.volume[0], raw.volume[1]);
    let residual = lhs - (boundary.total() + bulk);
    let scale =
        lhs.abs() + components.iter().map(|c| c.terms.abs_total()).sum::<f64>() + bulk.abs();
    ReillyBreakdown {
        space: space.profile.label.clone(),
        field: f.source().to_string(),
        grid: spec,
        lhs_volume: lhs,
        boundary,
        components,
        bulk_q: bulk,
        residual,
        scale,
        relative_residual: relative(residual, scale),
        cauchy_schwarz: CauchySchwarzCheck {
            nodes: raw.nodes,
            violations: raw.violations,
            lhs_bound: (space.n as f64 - 1.0) / space.n as f64 * raw.volume[2],
        },
    }
}

/// Every term of the potential-weighted Reilly identity, integrated on
/// `domain`. The potential must be positive on the closed domain except on
/// a horizon inner boundary.
pub fn evaluate_weighted_reilly(
    space: &WarpedSpace,
    domain: &Domain,
    f: &FieldExpr,
    spec: GridSpec,
) -> Result<ReillyBreakdown> {
    let raw = weighted_reilly_raw(space, domain, f, spec)?;
    Ok(breakdown_from_raw(space, f, spec, &raw))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub grid: GridSpec,
    pub relative_residual: f64,
}

/// [`evaluate_weighted_reilly`] on each grid in turn.
pub fn weighted_reilly_refinement(
    space: &WarpedSpace,
    domain: &Domain,
    f: &FieldExpr,
    grids: &[GridSpec],
) -> Result<Vec<RefinementRow>> {
    grids
        .iter()
        .map(|&grid| {
            Ok(RefinementRow {
                grid,
                relative_residual: evaluate_weighted_reilly(space, domain, f, grid)?
                    .relative_residual,
            })
        })
        .collect()
}

/// The inequality form, with the last boundary term written as
/// `z^2 (Q - Ric)(grad V, nu)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityForm {
    pub lhs_volume: f64,
    /// Boundary side of the inequality.
    pub rhs: f64,
    /// `lhs_volume - rhs`; nonnegative on a sub-static space.
    pub slack: f64,
    #[serde(rename = "bulk_Q")]
    pub bulk_q: f64,
    /// `|slack - bulk_Q|`, which vanishes when the reassembled boundary
    /// term agrees with `B_q` and the identity holds.
    pub consistency: f64,
    pub scale: f64,
}

pub fn inequality_form_slack(
    space: &WarpedSpace,
    domain: &Domain,
    f: &FieldExpr,
    spec: GridSpec,
) -> Result<InequalityForm> {
    let raw = weighted_reilly_raw(space, domain, f, spec)?;
    let br = breakdown_from_raw(space, f, spec, &raw);
    let rhs: f64 = raw
        .components
        .iter()
        .map(|(_, t)| t[..6].iter().sum::<f64>() + t[7])
        .sum();
    let slack = br.lhs_volume - rhs;
    Ok(InequalityForm {
        lhs_volume: br.lhs_volume,
        rhs,
        slack,
        bulk_q: br.bulk_q,
        consistency: (slack - br.bulk_q).abs(),
        scale: br.scale,
    })
}

/// Rearranged ledger with the outer graph as the distinguished component `Sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RearrangedForm {
    /// `int_Sigma V [h - (V_nu/V) g](Y, Y)` with `Y = grad z - z grad V / V`.
    pub sigma_static_convex: f64,
    /// `int_Sigma V H (u - V_nu z / V)^2`.
    pub sigma_mean: f64,
    /// `int_Sigma 2 V (u - V_nu z / V)(Lap z - Lap V z / V)`.
    pub sigma_mixed: f64,
    /// Boundary terms on the rest of the boundary.
    pub inner_block: f64,
    #[serde(rename = "bulk_Q")]
    pub bulk_q: f64,
    pub total: f64,
    /// Right-hand side of [`evaluate_weighted_reilly`] on the same grid.
    pub weighted_reilly_total: f64,
    /// `|total - weighted_reilly_total| / scale`.
    pub relative_difference: f64,
    pub lhs_volume: f64,
    pub scale: f64,
}

fn rearranged_form_sigma(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    f: &FieldExpr,
    potential: &FieldExpr,
) -> Result<Vec<f64>> {
    let fd = field_data(space, f, &node.point)?;
    let tz = tangential_calculus(space, graph, node, f)?;
    let tv = tangential_calculus(space, graph, node, potential)?;
    let (v, vnu) = (node.potential, node.potential_normal);
    let z = tz.value;
    let u = dot(&fd.grad, &node.normal);
    let (zc, vc) = (tz.raised(node), tv.raised(node));
    let y: Vec<f64> = zc.iter().zip(&vc).map(|(a, b)| a - z * b / v).collect();
    let w = u - vnu * z / v;
    Ok(vec![
        v * node.h.apply2(&y, &y) - vnu * node.g.apply2(&y, &y),
        v * node.mean_curvature * w * w,
        2.0 * v * w * (tz.laplacian - tv.laplacian * z / v),
    ])
}

pub fn evaluate_rearranged_form(
    space: &WarpedSpace,
    domain: &Domain,
    f: &FieldExpr,
    spec: GridSpec,
) -> Result<RearrangedForm> {
    let raw = weighted_reilly_raw(space, domain, f, spec)?;
    let br = breakdown_from_raw(space, f, spec, &raw);
    let geo = surface_geometry(space, &domain.outer, Orientation::Outward, spec)?;
    let potential = FieldExpr::parse("V")?;
    let sigma = geo.integrate_many(3, |nd| {
        rearranged_form_sigma(space, &geo.graph, nd, f, &potential)
    })?;
    let inner_block: f64 = br.components[1..].iter().map(|c| c.terms.total()).sum();
    let total = sigma.iter().sum::<f64>() + inner_block + br.bulk_q;
    let rhs = br.rhs();
    let scale = br.scale + sigma.iter().map(|x| x.abs()).sum::<f64>();
    Ok(RearrangedForm {
        sigma_static_convex: sigma[0],
        sigma_mean: sigma[1],
        sigma_mixed: sigma[2],
        inner_block,
        bulk_q: br.bulk_q,
        total,
        weighted_reilly_total: rhs,
        relative_difference: relative(total - rhs, scale),
        lhs_volume: br.lhs_volume,
        scale,
    })
}

/// Boundary integrals of the general formula on one component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneralBoundaryTerms {
    #[serde(rename = "B_h")]
    pub b_h: f64,
    #[serde(rename = "B_mixed")]
    pub b_mixed: f64,
    #[serde(rename = "B_H")]
    pub b_mean: f64,
    #[serde(rename = "B_Vnu")]
    pub b_vnu: f64,
    /// `int 2 V z P(grad f, nu)`.
    pub b_zfp: f64,
    /// `-int z^2 P(grad V, nu)`.
    pub b_zzvp: f64,
    /// `-int z^2 V (div P)(nu)`.
    pub b_zzdivp: f64,
}

impl GeneralBoundaryTerms {
    fn entries(&self) -> [f64; 7] {
        [
            self.b_h,
            self.b_mixed,
            self.b_mean,
            self.b_vnu,
            self.b_zfp,
            self.b_zzvp,
            self.b_zzdivp,
        ]
    }

    fn from_slice(v: &[f64]) -> Self {
        GeneralBoundaryTerms {
            b_h: v[0],
            b_mixed: v[1],
            b_mean: v[2],
            b_vnu: v[3],
            b_zfp: v[4],
            b_zzvp: v[5],
            b_zzdivp: v[6],
        }
    }

    pub fn total(&self) -> f64 {
        self.entries().iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralComponentTerms {
    pub label: String,
    pub terms: GeneralBoundaryTerms,
}

/// Ledger of the general formula for a symmetric tensor `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralBreakdown {
    pub space: String,
    pub field: String,
    pub potential: String,
    pub p: PChoice,
    pub grid: GridSpec,
    pub lhs_volume: f64,
    pub components: Vec<GeneralComponentTerms>,
    /// `int [(Hess V - Lap V g - V P) + V (Ric - P)](grad f, grad f)`.
    pub bulk_gradient: f64,
    /// `int [P : (Hess V + tr P V g/(n-1) - V P) + V div div P + 2 <grad V, div P>] f^2`.
    pub bulk_f2: f64,
    pub residual: f64,
    pub scale: f64,
    pub relative_residual: f64,
}

/// Value, gradient, Hessian and Laplacian of the weight.
fn weight_data(space: &WarpedSpace, v: &FieldExpr, pt: &Point) -> Result<crate::fields::FieldData> {
    field_data(space, v, pt)
}

fn general_reilly_volume(
    space: &WarpedSpace,
    f: &FieldExpr,
    v: &FieldExpr,
    v_override: Option<&FieldExpr>,
    choice: &PChoice,
    pt: &Point,
) -> Result<Vec<f64>> {
    let n = space.n;
    let nm1 = n as f64 - 1.0;
    let fd = field_data(space, f, pt)?;
    let vd = weight_data(space, v, pt)?;
    let (g, ginv) = space.metric_at(pt)?;
    let ric = space.curvature_at(pt)?.ricci;
    let pd = p_data(space, choice, v_override, pt)?;
    let fv = fd.value;
    let a = fd.laplacian + pd.trace * fv / nm1;
    let aij = TensorValue::from_fn2(n, |i, j| {
        fd.hess.get2(i, j) + pd.trace * fv * g.get2(i, j) / nm1 - fv * pd.p.get2(i, j)
    });
    let lhs = vd.value * (a * a - aij.norm_sq_with(&ginv));
    let m = TensorValue::from_fn2(n, |i, j| {
        let pij = pd.p.get2(i, j);
        vd.hess.get2(i, j) - vd.laplacian * g.get2(i, j) - vd.value * pij
            + vd.value * (ric.get2(i, j) - pij)
    });
    let grad_f = raise(&ginv, &fd.grad);
    let x2 = TensorValue::from_fn2(n, |i, j| {
        vd.hess.get2(i, j) + pd.trace * vd.value * g.get2(i, j) / nm1 - vd.value * pd.p.get2(i, j)
    });
    let grad_v = raise(&ginv, &vd.grad);
    let f2 = contract(&pd.p, &x2, &ginv) + vd.value * pd.divdiv + 2.0 * dot(&grad_v, &pd.div);
    Ok(vec![lhs, m.apply2(&grad_f, &grad_f), f2 * fv * fv])
}

fn general_reilly_surface(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    f: &FieldExpr,
    v: &FieldExpr,
    v_override: Option<&FieldExpr>,
    choice: &PChoice,
) -> Result<Vec<f64>> {
    let fd = field_data(space, f, &node.point)?;
    let vd = weight_data(space, v, &node.point)?;
    let tz = tangential_calculus(space, graph, node, f)?;
    let (_, ginv) = space.metric_at(&node.point)?;
    let pd = p_data(space, choice, v_override, &node.point)?;
    let nu = &node.normal;
    let (vv, vnu, h_mean) = (vd.value, dot(&vd.grad, nu), node.mean_curvature);
    let z = tz.value;
    let u = dot(&fd.grad, nu);
    let zc = tz.raised(node);
    let (grad_f, grad_v) = (raise(&ginv, &fd.grad), raise(&ginv, &vd.grad));
    Ok(vec![
        vv * node.h.apply2(&zc, &zc),
        2.0 * vv * u * tz.laplacian,
        vv * h_mean * u * u,
        vnu * tz.grad_sq,
        2.0 * vv * z * pd.p.apply2(&grad_f, nu),
        -z * z * pd.p.apply2(&grad_v, nu),
        -z * z * vv * dot(&pd.div, nu),
    ])
}

/// Every term of the general formula. `v_override` replaces the potential
/// of the space by an arbitrary smooth weight.
pub fn evaluate_general_reilly(
    space: &WarpedSpace,
    domain: &Domain,
    f: &FieldExpr,
    v_override: Option<&FieldExpr>,
    choice: &PChoice,
    spec: GridSpec,
) -> Result<GeneralBreakdown> {
    check_field(space, f)?;
    if matches!(domain.inner, InnerBoundary::Horizon) {
        return Err(Error::Unsupported(
            "the general formula needs P smooth up to the boundary; use a slice instead of the horizon"
                .into(),
        ));
    }
    if let PChoice::Custom { p } = choice {
        check_field(space, p)?;
    }
    let potential = FieldExpr::parse("V")?;
    let v = match v_override {
        Some(e) => {
            check_field(space, e)?;
            e
        }
        None => &potential,
    };
    let grid = domain.volume_grid(space, spec)?;
    let volume = grid.integrate_many(3, |p| {
        general_reilly_volume(space, f, v, v_override, choice, p)
    })?;
    let mut components = Vec::new();
    for c in domain.components(space, spec)? {
        let Component::Surface(geo) = &c else {
            unreachable!("horizon rejected above")
        };
        let t = geo.integrate_many(7, |nd| {
            general_reilly_surface(space, &geo.graph, nd, f, v, v_override, choice)
        })?;
        components.push(GeneralComponentTerms {
            label: c.label(),
            terms: GeneralBoundaryTerms::from_slice(&t),
        });
    }
    let boundary: f64 = components.iter().map(|c| c.terms.total()).sum();
    let residual = volume[0] - (boundary + volume[1] + volume[2]);
    let scale = volume.iter().map(|x| x.abs()).sum::<f64>()
        + components
            .iter()
            .flat_map(|c| c.terms.entries())
            .map(|x| x.abs())
            .sum::<f64>();
    Ok(GeneralBreakdown {
        space: space.profile.label.clone(),
        field: f.source().to_string(),
        potential: v.source().to_string(),
        p: choice.clone(),
        grid: spec,
        lhs_volume: volume[0],
        components,
        bulk_gradient: volume[1],
        bulk_f2: volume[2],
        residual,
        scale,
        relative_residual: relative(residual, scale),
    })
}

/// The potential-weighted identity on a closed graph, which has no boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedManifoldBreakdown {
    pub surface: String,
    pub field: String,
    /// `int_Sigma V (Lap f - Lap V f / V)^2 - V |Hess f - Hess V f / V|^2`.
    pub lhs: f64,
    /// `int_Sigma (Lap V g - Hess V + V Ric)(X, X)` with intrinsic operators.
    #[serde(rename = "bulk_Q")]
    pub bulk_q: f64,
    pub residual: f64,
    pub scale: f64,
    pub relative_residual: f64,
}

fn closed_manifold_node(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    f: &FieldExpr,
    potential: &FieldExpr,
) -> Result<Vec<f64>> {
    let tf = tangential_calculus(space, graph, node, f)?;
    let tv = tangential_calculus(space, graph, node, potential)?;
    let v = tv.value;
    let fv = tf.value;
    let a = tf.laplacian - tv.laplacian * fv / v;
    let mut aij = tf.hess.clone();
    for (x, h) in aij.components.iter_mut().zip(&tv.hess.components) {
        *x -= h * fv / v;
    }
    let ric = intrinsic_ricci(space, node)?;
    let m = node.g.dim;
    let vq = TensorValue::from_fn2(m, |a, b| {
        tv.laplacian * node.g.get2(a, b) - tv.hess.get2(a, b) + v * ric.get2(a, b)
    });
    let x: Vec<f64> = tf
        .du
        .iter()
        .zip(&tv.du)
        .map(|(df, dv)| df - fv * dv / v)
        .collect();
    let xc = raise(&node.ginv, &x);
    Ok(vec![
        v * (a * a - aij.norm_sq_with(&node.ginv)),
        vq.apply2(&xc, &xc),
    ])
}

pub fn closed_manifold_identity(
    space: &WarpedSpace,
    graph: &RadialGraph,
    f: &FieldExpr,
    spec: GridSpec,
) -> Result<ClosedManifoldBreakdown> {
    check_field(space, f)?;
    let geo = surface_geometry(space, graph, Orientation::Outward, spec)?;
    if let Some(nd) = geo.nodes.iter().find(|nd| !(nd.potential > 0.0)) {
        return Err(Error::VanishingPotential(format!(
            "{} at theta = {:?}",
            graph.label, nd.u
        )));
    }
    let potential = FieldExpr::parse("V")?;
    let t = geo.integrate_many(2, |nd| {
        closed_manifold_node(space, graph, nd, f, &potential)
    })?;
    let residual = t[0] - t[1];
    let scale = t[0].abs() + t[1].abs();
    Ok(ClosedManifoldBreakdown {
        surface: graph.label.clone(),
        field: f.source().to_string(),
        lhs: t[0],
        bulk_q: t[1],
        residual,
        scale,
        relative_residual: relative(residual, scale),
    })
}

/// A pointwise identity `sum terms = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaResidual {
    pub s: f64,
    pub terms: Vec<f64>,
    pub residual: f64,
    pub scale: f64,
    pub relative_residual: f64,
}

impl LemmaResidual {
    fn new(s: f64, terms: Vec<f64>) -> Self {
        let residual: f64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.abs()).sum();
        LemmaResidual {
            s,
            terms,
            residual,
            scale,
            relative_residual: relative(residual, scale),
        }
    }

    /// Passes when `|residual| <= rel * scale`, or the terms are all below `floor`.
    pub fn passes(&self, rel: f64, floor: f64) -> bool {
        self.residual.abs() <= rel * self.scale || self.scale <= floor
    }
}

/// `V, e_r(V), sqrt(phi) R'(s)`, requiring `V > 0`.
fn radial_potential(space: &WarpedSpace, s: f64) -> Result<(f64, f64, f64)> {
    let j = space.radial_values(s)?;
    if !(j.phi > 0.0) {
        return Err(Error::VanishingPotential(format!("s = {s}")));
    }
    let v = j.phi.sqrt();
    Ok((v, 0.5 * j.dphi, v * space.scalar_curvature_derivative(s)?))
}

/// `V div div P + 2 <grad V, div P> - Hess V : Q - <grad V, grad R>/2` for
/// the potential choice of `P`. Only `s` matters in a warped product.
pub fn div_div_identity_residual_at(space: &WarpedSpace, p: &Point) -> Result<LemmaResidual> {
    let s = p.s;
    let (v, vr, rr) = radial_potential(space, s)?;
    let (d, dd) = space.warped_divergence(WarpedField::PPotential, s)?;
    let hess_v = space.hess_ratio_warped(s)?.scale(v);
    let q = space.q_warped(s)?;
    Ok(LemmaResidual::new(
        s,
        vec![
            v * dd,
            2.0 * vr * d,
            -hess_v.contract(&q, space.n),
            -0.5 * vr * rr,
        ],
    ))
}

/// The same identity with every tensor in coordinates and both divergences
/// of `P` taken by nested coordinate differences.
pub fn div_div_identity_residual_fd(
    space: &WarpedSpace,
    p: &Point,
    fd: FdScheme,
) -> Result<LemmaResidual> {
    let vexpr = FieldExpr::parse("V")?;
    let at = |q: &Point| potential_p_tensor(space, &vexpr, q);
    let div = divergence_fd(space, p, fd, &at)?;
    let divdiv = double_divergence_fd(space, p, fd, &at)?;
    let pj = space.potential_jet(p, false)?;
    let (_, ginv) = space.metric_at(p)?;
    let grad_v = raise(&ginv, &pj.grad);
    let q = space.q_tensor_at(p)?;
    let drs = space.scalar_curvature_derivative(p.s)?;
    Ok(LemmaResidual::new(
        p.s,
        vec![
            pj.v * divdiv,
            2.0 * dot(&grad_v, &div),
            -contract(&pj.hess, &q, &ginv),
            -0.5 * grad_v[0] * drs,
        ],
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QIdentityResidual {
    /// `<grad V, div Q> - <grad V, grad R>/2 + Q(grad V, grad V)/V`.
    pub contracted: LemmaResidual,
    /// Radial component of `V div Q + Q(grad V) - V grad R / 2`.
    pub intermediate: LemmaResidual,
}

pub fn q_identity_residual_at(space: &WarpedSpace, p: &Point) -> Result<QIdentityResidual> {
    let s = p.s;
    let (v, vr, rr) = radial_potential(space, s)?;
    let (dq, _) = space.warped_divergence(WarpedField::Q, s)?;
    let q = space.q_warped(s)?;
    Ok(QIdentityResidual {
        contracted: LemmaResidual::new(s, vec![vr * dq, -0.5 * vr * rr, q.rad * vr * vr / v]),
        intermediate: LemmaResidual::new(s, vec![v * dq, vr * q.rad, -0.5 * v * rr]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinName;
    use crate::surfaces::{off_center_sphere, SpaceFormKind};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn space(name: BuiltinName, params: &[(&str, f64)]) -> WarpedSpace {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        WarpedSpace::builtin(name, 3, &p, None).unwrap()
    }

    fn f(src: &str) -> FieldExpr {
        FieldExpr::parse(src).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::new(16, 16, 32)
    }

    #[test]
    fn hyperbolic_annulus_height_function() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let br = evaluate_weighted_reilly(
            &sp,
            &Domain::annulus(0.5, 1.5),
            &f("s*cos(theta1)"),
            GridSpec::default(),
        )
        .unwrap();
        assert!(br.relative_residual <= 1e-7, "{}", br.relative_residual);
        assert_eq!(br.cauchy_schwarz.violations, 0);
        assert!(br.lhs_volume <= br.cauchy_schwarz.lhs_bound);
    }

    #[test]
    fn potential_is_annihilated() {
        for (sp, dom) in [
            (space(BuiltinName::Hyperbolic, &[]), Domain::ball(1.2)),
            (
                space(BuiltinName::Schwarzschild, &[("m", 1.0)]),
                Domain::annulus(2.5, 4.0),
            ),
            (
                space(BuiltinName::AdsSchwarzschild, &[("m", 1.0)]),
                Domain::from_horizon(3.0),
            ),
        ] {
            let br = evaluate_weighted_reilly(&sp, &dom, &f("V"), grid()).unwrap();
            assert!(br.lhs_volume.abs() <= 1e-9 * br.scale.max(1.0));
            assert!(br.residual.abs() <= 1e-9 * br.scale.max(1.0));
        }
    }

    #[test]
    fn reissner_nordstrom_strictly_substatic_bulk() {
        let sp = space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]);
        let dom = Domain::annulus(2.5, 4.0);
        let radial =
            evaluate_weighted_reilly(&sp, &dom, &f("s^2 - 16"), GridSpec::default()).unwrap();
        assert!(radial.relative_residual <= 1e-7);
        // Q vanishes in the radial direction, so radial fields see no bulk term.
        assert!(radial.bulk_q.abs() <= 1e-12 * radial.scale);
        let tilted = evaluate_weighted_reilly(
            &sp,
            &dom,
            &f("s^2 - 16 + s*cos(theta1)"),
            GridSpec::default(),
        )
        .unwrap();
        assert!(tilted.relative_residual <= 1e-7);
        assert!(tilted.bulk_q > 1e-6 * tilted.scale, "{}", tilted.bulk_q);
    }

    #[test]
    fn horizon_domains() {
        for (name, params) in [
            (BuiltinName::Schwarzschild, vec![("m", 1.0)]),
            (BuiltinName::ReissnerNordstrom, vec![("m", 2.0), ("q", 0.5)]),
        ] {
            let sp = space(name, &params);
            let s0 = sp.horizon().unwrap();
            for src in ["s*cos(theta1)", "s^3 - 2*s + 1", "V*s*cos(theta1)"] {
                let br = evaluate_weighted_reilly(
                    &sp,
                    &Domain::from_horizon(s0 + 2.0),
                    &f(src),
                    GridSpec::default(),
                )
                .unwrap();
                assert!(br.relative_residual <= 1e-7);
            }
        }
    }

    #[test]
    fn classical_reilly_in_the_euclidean_ball() {
        let sp = space(BuiltinName::Euclidean, &[]);
        let one = f("1");
        let br = evaluate_general_reilly(
            &sp,
            &Domain::ball(1.0),
            &f("0.5*s^2 + s*cos(theta1) + s^3*sin(theta1)*cos(theta2)"),
            Some(&one),
            &PChoice::Zero,
            GridSpec::default(),
        )
        .unwrap();
        assert!(br.relative_residual <= 1e-8);
        assert_eq!(br.bulk_f2, 0.0);
    }

    #[test]
    fn zero_and_flat_constant_curvature_agree_exactly() {
        let sp = space(BuiltinName::Schwarzschild, &[("m", 1.0)]);
        let dom = Domain::annulus(2.5, 3.5);
        let z =
            evaluate_general_reilly(&sp, &dom, &f("s*cos(theta1)"), None, &PChoice::Zero, grid())
                .unwrap();
        let k = evaluate_general_reilly(
            &sp,
            &dom,
            &f("s*cos(theta1)"),
            None,
            &PChoice::ConstantCurvature { kappa: 0.0 },
            grid(),
        )
        .unwrap();
        assert!((z.residual - k.residual).abs() <= 1e-12 * z.scale);
        assert!((z.lhs_volume - k.lhs_volume).abs() <= 1e-12 * z.scale);
        assert!(z.relative_residual <= 1e-8);
    }

    #[test]
    fn hemisphere_constant_curvature_matches_potential_choice() {
        let sp = space(BuiltinName::Hemisphere, &[]);
        let dom = Domain::ball(0.8);
        let src = f("exp(-s^2)*(1 + 0.3*s*cos(theta1))");
        let a = evaluate_general_reilly(
            &sp,
            &dom,
            &src,
            None,
            &PChoice::ConstantCurvature { kappa: 1.0 },
            grid(),
        )
        .unwrap();
        let b =
            evaluate_general_reilly(&sp, &dom, &src, None, &PChoice::Potential, grid()).unwrap();
        assert!((a.lhs_volume - b.lhs_volume).abs() <= 1e-8 * a.scale);
        assert!(
            (a.bulk_gradient + a.bulk_f2 - b.bulk_gradient - b.bulk_f2).abs() <= 1e-8 * a.scale
        );
    }

    #[test]
    fn potential_choice_reduces_to_the_weighted_identity() {
        let sp = space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]);
        let dom = Domain::annulus(2.5, 3.5);
        let src = f("s^2*sin(theta1)*cos(theta2)");
        let g =
            evaluate_general_reilly(&sp, &dom, &src, None, &PChoice::Potential, grid()).unwrap();
        let t = evaluate_weighted_reilly(&sp, &dom, &src, grid()).unwrap();
        assert!(g.relative_residual <= 1e-8);
        assert!((g.lhs_volume - t.lhs_volume).abs() <= 1e-9 * t.scale);
        assert!((g.bulk_gradient + g.bulk_f2 - t.bulk_q).abs() <= 1e-8 * t.scale);
        let v =
            evaluate_general_reilly(&sp, &dom, &f("V"), None, &PChoice::Potential, grid()).unwrap();
        assert!(v.lhs_volume.abs() <= 1e-9 * v.scale);
        assert!(v.relative_residual <= 1e-9);
    }

    #[test]
    fn weight_override_and_custom_p() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let dom = Domain::annulus(0.4, 1.3);
        let w = f("1 + 0.2*s^2 + 0.1*s*cos(theta1)");
        let src = f("s^3 - 2*s + 1 + s*sin(theta1)*sin(theta2)");
        for p in [
            PChoice::Potential,
            PChoice::Custom {
                p: f("0.3 + s*cos(theta1)"),
            },
        ] {
            let br = evaluate_general_reilly(&sp, &dom, &src, Some(&w), &p, grid()).unwrap();
            assert!(br.relative_residual <= 1e-7);
        }
    }

    #[test]
    fn horizon_is_rejected_by_the_general_formula() {
        let sp = space(BuiltinName::Schwarzschild, &[("m", 1.0)]);
        let e = evaluate_general_reilly(
            &sp,
            &Domain::from_horizon(3.0),
            &f("s"),
            None,
            &PChoice::Potential,
            grid(),
        );
        assert!(matches!(e, Err(Error::Unsupported(_))));
    }

    #[test]
    fn rearranged_form_rearrangement() {
        let sp = space(BuiltinName::AdsSchwarzschild, &[("m", 1.0)]);
        let s0 = sp.horizon().unwrap();
        for (dom, src) in [
            (
                Domain::annulus(s0 + 0.3, s0 + 1.5),
                "s*cos(theta1) + 0.2*s^2",
            ),
            (
                Domain::from_horizon(s0 + 1.5),
                "exp(-s^2)*(1 + 0.3*s*cos(theta1))",
            ),
        ] {
            let c = evaluate_rearranged_form(&sp, &dom, &f(src), GridSpec::default()).unwrap();
            assert!(c.relative_difference <= 1e-10);
        }
        let hyp = space(BuiltinName::Hyperbolic, &[]);
        let c = evaluate_rearranged_form(&hyp, &Domain::ball(1.0), &f("2*V"), grid()).unwrap();
        assert!(c.sigma_static_convex.abs() <= 1e-12 * c.scale);
    }

    #[test]
    fn inequality_form_slack_signs() {
        let rn = space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]);
        let dom = Domain::annulus(2.5, 3.5);
        let c = inequality_form_slack(&rn, &dom, &f("s*cos(theta1)"), grid()).unwrap();
        assert!(c.slack > 0.0);
        assert!(c.consistency <= 1e-9 * c.scale);
        let v = inequality_form_slack(&rn, &dom, &f("3*V"), grid()).unwrap();
        assert!(v.slack.abs() <= 1e-9 * v.scale);
        let hyp = space(BuiltinName::Hyperbolic, &[]);
        let h = inequality_form_slack(
            &hyp,
            &Domain::ball(1.1),
            &f("s^2*sin(theta1)*cos(theta2)"),
            grid(),
        )
        .unwrap();
        assert!(h.slack.abs() <= 1e-9 * h.scale && h.consistency <= 1e-9 * h.scale);
    }

    #[test]
    fn closed_surfaces() {
        let hyp = space(BuiltinName::Hyperbolic, &[]);
        let sphere = RadialGraph::slice(1.2);
        let v = closed_manifold_identity(&hyp, &sphere, &f("V"), grid()).unwrap();
        assert!(v.residual.abs() <= 1e-9);
        let c = closed_manifold_identity(&hyp, &sphere, &f("cos(theta1)"), GridSpec::default())
            .unwrap();
        assert!(c.relative_residual <= 1e-7);
        let hemi = space(BuiltinName::Hemisphere, &[]);
        let graph = off_center_sphere(SpaceFormKind::Hemisphere, 0.2, 0.7).unwrap();
        let g = closed_manifold_identity(
            &hemi,
            &graph,
            &f("sin(theta1)*cos(theta2)*(1 + 0.5*cos(theta1))"),
            GridSpec::default(),
        )
        .unwrap();
        assert!(g.relative_residual <= 1e-6);
    }

    #[test]
    fn lemma_identities() {
        let cases = [
            space(BuiltinName::Hyperbolic, &[]),
            space(BuiltinName::Hemisphere, &[]),
            space(BuiltinName::Schwarzschild, &[("m", 1.0)]),
            space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]),
            space(BuiltinName::AdsSchwarzschild, &[("m", 1.0)]),
        ];
        for sp in &cases {
            let lo = sp.profile.s_min + 0.2;
            for k in 0..5 {
                let s = lo + 0.3 * k as f64;
                if s >= sp.profile.s_max {
                    continue;
                }
                let p = Point::new(s, &[0.7, 1.9]);
                let l3 = div_div_identity_residual_at(sp, &p).unwrap();
                let l4 = q_identity_residual_at(sp, &p).unwrap();
                let label = &sp.profile.label;
                assert!(l3.passes(1e-6, 1e-8), "{label} {l3:?}");
                assert!(l4.contracted.passes(1e-6, 1e-8), "{label} {l4:?}");
                assert!(l4.intermediate.passes(1e-6, 1e-8), "{label} {l4:?}");
                let fd = div_div_identity_residual_fd(sp, &p, FdScheme::fourth(1e-3)).unwrap();
                assert!(fd.passes(1e-6, 1e-6), "{label} {fd:?}");
            }
        }
    }

    #[test]
    fn reissner_nordstrom_lemma_terms_are_not_trivial() {
        let sp = space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]);
        let l3 = div_div_identity_residual_at(&sp, &Point::new(2.4, &[1.0, 1.0])).unwrap();
        assert!(l3.scale > 1e-4);
        assert!(l3.relative_residual < 1e-8);
    }

    #[test]
    fn ads_schwarzschild_scalar_curvature_is_constant() {
        let sp = space(BuiltinName::AdsSchwarzschild, &[("m", 1.0)]);
        for s in [1.0, 1.7, 3.0, 6.0] {
            assert!((sp.scalar_curvature(s).unwrap() + 6.0).abs() < 1e-10);
            assert!(sp.scalar_curvature_derivative(s).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn warped_divergence_matches_coordinate_oracle() {
        let sp = space(BuiltinName::ReissnerNordstrom, &[("m", 2.0), ("q", 0.5)]);
        let p = Point::new(2.6, &[0.9, 0.3]);
        let v = f("V");
        let at = |q: &Point| potential_p_tensor(&sp, &v, q);
        let fd = FdScheme::fourth(1e-3);
        let (d, dd) = sp.warped_divergence(WarpedField::PPotential, p.s).unwrap();
        let phi = sp.profile.phi(p.s).unwrap();
        let div = divergence_fd(&sp, &p, fd, &at).unwrap();
        assert!((div[0] - d / phi.sqrt()).abs() < 1e-8);
        assert!(div[1].abs() < 1e-8 && div[2].abs() < 1e-8);
        assert!(
            (double_divergence_fd(&sp, &p, fd, &at).unwrap() - dd).abs()
                < 1e-6 * dd.abs().max(1e-3)
        );
    }

    #[test]
    fn refinement_improves_residual() {
        let sp = space(BuiltinName::Schwarzschild, &[("m", 1.0)]);
        let graph = RadialGraph::new("wavy", f("3 + 0.2*cos(theta1)")).unwrap();
        let dom = Domain {
            inner: InnerBoundary::Slice { s: 2.3 },
            outer: graph,
        };
        let rows = weighted_reilly_refinement(
            &sp,
            &dom,
            &f("s*cos(theta1) + 0.1*s^2"),
            &[
                GridSpec::new(3, 3, 6),
                GridSpec::new(6, 6, 12),
                GridSpec::new(12, 12, 24),
            ],
        )
        .unwrap();
        let r: Vec<f64> = rows.iter().map(|r| r.relative_residual).collect();
        assert!(r[0] > 100.0 * r[2] || r[2] <= 1e-12, "{r:?}");
        assert!(r[2] <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn identity_holds_for_random_fields(
            a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, inner in 2.2f64..2.6, width in 0.3f64..1.5
        ) {
            let sp = space(BuiltinName::Schwarzschild, &[("m", 1.0)]);
            let src = format!("{a}*s^2 + {b}*s*cos(theta1) + {c}*V*sin(theta1)*sin(theta2)");
            let br = evaluate_weighted_reilly(&sp, &Domain::annulus(inner, inner + width), &f(&src), GridSpec::new(10, 10, 20)).unwrap();
            prop_assert!(br.relative_residual < 1e-10, "{}", br.relative_residual);
            prop_assert_eq!(br.cauchy_schwarz.violations, 0);
            prop_assert!(br.bulk_q >= -1e-12 * br.scale);
        }
    }
}
