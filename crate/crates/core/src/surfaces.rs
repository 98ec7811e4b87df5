//! Closed hypersurfaces given as radial graphs `s = rho(theta)` over the base.
//!
//! Everything is evaluated at base quadrature nodes. Tangential derivatives
//! come from jets of `rho` and of restricted ambient fields; the induced
//! Christoffel symbols are assembled from the second derivatives of `rho`, so
//! no differencing on the parameter grid is needed. Finite-difference
//! versions are kept as oracles.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalEnv, FieldExpr};
use crate::geometry::{
    invert, ricci_from_riemann, riemann_from_christoffel_fd, FdScheme, Point, Rank, TensorValue,
    WarpedSpace,
};
use crate::jet::{Jet2, Taylor};
use crate::quadrature::{base_rule, weighted_sum, weighted_sums, GridSpec};

/// The graph `{ s = rho(theta) }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGraph {
    pub label: String,
    pub rho: FieldExpr,
}

impl RadialGraph {
    pub fn new(label: impl Into<String>, rho: FieldExpr) -> Result<Self> {
        if rho.depends_on_s() {
            return Err(Error::InvalidParams(format!(
                "graph radius `{}` may depend on the base angles only",
                rho.source()
            )));
        }
        if let Some(p) = rho.free_params().first() {
            return Err(Error::UnknownSymbol(p.clone()));
        }
        Ok(RadialGraph {
            label: label.into(),
            rho,
        })
    }

    pub fn slice(s0: f64) -> Self {
        RadialGraph {
            label: format!("slice s = {s0}"),
            rho: FieldExpr::constant(s0),
        }
    }

    /// The radius when the graph is a slice.
    pub fn slice_radius(&self) -> Option<f64> {
        if self.rho.max_theta() > 0 {
            return None;
        }
        self.rho
            .eval::<f64>(&EvalEnv {
                s: None,
                theta: &[0.0],
                profile: None,
            })
            .ok()
    }
}

/// Direction of the unit normal relative to increasing `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Outward,
    Inward,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Outward => 1.0,
            Orientation::Inward => -1.0,
        }
    }
}

/// Geometry at one node of the base grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceNode {
    /// Base coordinates.
    pub u: Vec<f64>,
    pub point: Point,
    /// Quadrature weight for `dA`.
    pub weight: f64,
    /// Coordinate tangent vectors `T_a = rho_a d_s + d_a` in ambient components.
    pub tangents: Vec<Vec<f64>>,
    /// Unit normal, contravariant ambient components.
    pub normal: Vec<f64>,
    pub g: TensorValue,
    pub ginv: TensorValue,
    /// `h(X, Y) = <D_X nu, Y>`.
    pub h: TensorValue,
    pub mean_curvature: f64,
    /// Induced Christoffel symbols.
    pub gamma: TensorValue,
    pub potential: f64,
    /// `dV(nu)`.
    pub potential_normal: f64,
}

impl SurfaceNode {
    /// Ambient vector `sum_a c^a T_a`.
    pub fn push_forward(&self, c: &[f64]) -> Vec<f64> {
        let n = self.normal.len();
        let mut v = vec![0.0; n];
        for (a, ca) in c.iter().enumerate() {
            for i in 0..n {
                v[i] += ca * self.tangents[a][i];
            }
        }
        v
    }

    /// `A g^{-1} B` for two surface tensors.
    pub fn compose(&self, a: &TensorValue, b: &TensorValue) -> TensorValue {
        TensorValue::from_matrix(&(a.matrix() * self.ginv.matrix() * b.matrix()))
    }

    /// `sigma_2 = (H^2 - |h|^2) / 2`.
    pub fn sigma2(&self) -> f64 {
        0.5 * (self.mean_curvature.powi(2) - self.h.norm_sq_with(&self.ginv))
    }

    /// Principal curvatures, smallest first.
    pub fn principal_curvatures(&self) -> Result<Vec<f64>> {
        generalized_eigenvalues(&self.h, &self.g)
    }
}

/// Eigenvalues of `A` relative to the positive definite `g`, ascending.
pub fn generalized_eigenvalues(a: &TensorValue, g: &TensorValue) -> Result<Vec<f64>> {
    let chol = g
        .matrix()
        .cholesky()
        .ok_or_else(|| Error::Singular("metric is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Cholesky factor not invertible".into()))?;
    let m: DMatrix<f64> = &linv * a.matrix() * linv.transpose();
    let sym = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

struct Local {
    s: f64,
    drho: Vec<f64>,
    g: TensorValue,
    ginv: TensorValue,
    gamma: TensorValue,
    sqrt_det: f64,
}

fn theta_jets(m: usize, u: &[f64]) -> Vec<Jet2> {
    (0..m).map(|k| Jet2::variable(m, k, u[k])).collect()
}

fn rho_jet(space: &WarpedSpace, graph: &RadialGraph, u: &[f64]) -> Result<Jet2> {
    let m = space.n - 1;
    if graph.rho.max_theta() > m {
        return Err(Error::InvalidParams(format!(
            "`{}` uses more angles than the base has",
            graph.rho.source()
        )));
    }
    let tj = theta_jets(m, u);
    let r: Jet2 = graph.rho.eval(&EvalEnv {
        s: None,
        theta: &tj,
        profile: None,
    })?;
    // A constant radius parses without angle dependence; give it the layout.
    let mut out = Jet2::constant(m, r.value);
    if r.dim == m {
        out = r;
    }
    let pr = &space.profile;
    if !(out.value > pr.s_min && out.value < pr.s_max) {
        return Err(Error::OutOfDomain {
            s: out.value,
            min: pr.s_min,
            max: pr.s_max,
        });
    }
    Ok(out)
}

/// Induced metric with its first derivatives, and the induced Christoffels.
fn local(space: &WarpedSpace, graph: &RadialGraph, u: &[f64]) -> Result<Local> {
    let m = space.n - 1;
    let r = rho_jet(space, graph, u)?;
    let s = r.value;
    let pj = space.profile.jet(s)?;
    let (phi, dphi) = (pj.d[0], pj.d[1]);
    let gn = space.base.metric_diag(&theta_jets(m, u));
    let mut g = TensorValue::zeros(Rank::Covariant2, m);
    // dg[c][a*m + b] = d_c g_ab
    let mut dg = vec![vec![0.0; m * m]; m];
    for a in 0..m {
        for b in 0..m {
            let gnab = if a == b { gn[a].value } else { 0.0 };
            g.set2(a, b, r.grad[a] * r.grad[b] / phi + s * s * gnab);
            for c in 0..m {
                let dgn = if a == b { gn[a].grad[c] } else { 0.0 };
                dg[c][a * m + b] = (r.hess[a][c] * r.grad[b] + r.grad[a] * r.hess[b][c]) / phi
                    - r.grad[a] * r.grad[b] * dphi * r.grad[c] / (phi * phi)
                    + 2.0 * s * r.grad[c] * gnab
                    + s * s * dgn;
            }
        }
    }
    let ginv = invert(&g)?;
    let mut gamma = TensorValue::zeros(Rank::Mixed12, m);
    for k in 0..m {
        for a in 0..m {
            for b in 0..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc +=
                        ginv.get2(k, l) * (dg[a][b * m + l] + dg[b][a * m + l] - dg[l][a * m + b]);
                }
                gamma.set3(k, a, b, 0.5 * acc);
            }
        }
    }
    let det = g.matrix().determinant();
    if !(det > 0.0) {
        return Err(Error::Singular(format!(
            "induced metric degenerate at {u:?}"
        )));
    }
    Ok(Local {
        s,
        drho: r.grad_slice().to_vec(),
        g,
        ginv,
        gamma,
        sqrt_det: det.sqrt(),
    })
}

/// Unit normal and tangent vectors at `u`.
fn frame(
    space: &WarpedSpace,
    s: f64,
    u: &[f64],
    drho: &[f64],
    sigma: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    let n = space.n;
    let (_, ginv) = space.metric_at(&Point::new(s, u))?;
    let mut df = vec![1.0; n];
    for a in 0..n - 1 {
        df[a + 1] = -drho[a];
    }
    let grad: Vec<f64> = (0..n).map(|i| ginv.get2(i, i) * df[i]).collect();
    let norm = (0..n).map(|i| grad[i] * df[i]).sum::<f64>().sqrt();
    let normal = grad.iter().map(|x| sigma * x / norm).collect();
    let tangents = (0..n - 1)
        .map(|a| {
            let mut t = vec![0.0; n];
            t[0] = drho[a];
            t[a + 1] = 1.0;
            t
        })
        .collect();
    Ok((normal, tangents, norm))
}

fn node(
    space: &WarpedSpace,
    graph: &RadialGraph,
    u: &[f64],
    base_weight: f64,
    sigma: f64,
) -> Result<SurfaceNode> {
    let loc = local(space, graph, u)?;
    let m = space.n - 1;
    let n = space.n;
    let p = Point::new(loc.s, u);
    space.check_interior(&p)?;
    let (normal, tangents, norm) = frame(space, loc.s, u, &loc.drho, sigma)?;
    let r = rho_jet(space, graph, u)?;
    let amb_gamma = space.christoffel_at(&p)?;
    let mut df = vec![1.0; n];
    for a in 0..m {
        df[a + 1] = -loc.drho[a];
    }
    let hess_f = TensorValue::from_fn2(n, |i, j| {
        let mut v = if i > 0 && j > 0 {
            -r.hess[i - 1][j - 1]
        } else {
            0.0
        };
        for k in 0..n {
            v -= amb_gamma.get3(k, i, j) * df[k];
        }
        v
    });
    let h = TensorValue::from_fn2(m, |a, b| {
        sigma * hess_f.apply2(&tangents[a], &tangents[b]) / norm
    });
    let mean_curvature = h.trace_with(&loc.ginv);
    let pj = space.profile.jet(loc.s)?;
    let potential = pj.d[0].sqrt();
    if potential == 0.0 {
        return Err(Error::VanishingPotential(format!(
            "graph node s = {}",
            loc.s
        )));
    }
    let potential_normal = 0.5 * pj.d[1] / potential * normal[0];
    Ok(SurfaceNode {
        u: u.to_vec(),
        point: p,
        weight: base_weight / space.base.sqrt_det(u) * loc.sqrt_det,
        tangents,
        normal,
        g: loc.g,
        ginv: loc.ginv,
        h,
        mean_curvature,
        gamma: loc.gamma,
        potential,
        potential_normal,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    pub label: String,
    pub graph: RadialGraph,
    pub orientation: Orientation,
    pub spec: GridSpec,
    pub nodes: Vec<SurfaceNode>,
}

/// Geometry of `graph` at the base nodes of `spec`.
pub fn surface_geometry(
    space: &WarpedSpace,
    graph: &RadialGraph,
    orientation: Orientation,
    spec: GridSpec,
) -> Result<SurfaceGeometry> {
    let base = base_rule(&space.base, spec)?;
    let sigma = orientation.sign();
    let nodes = base
        .iter()
        .map(|b| node(space, graph, &b.theta, b.weight, sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceGeometry {
        label: graph.label.clone(),
        graph: graph.clone(),
        orientation,
        spec,
        nodes,
    })
}

impl SurfaceGeometry {
    pub fn integrate(&self, f: impl Fn(&SurfaceNode) -> Result<f64> + Sync) -> Result<f64> {
        weighted_sum(
            &self.nodes,
            |nd| Ok(nd.weight * f(nd)?),
            |nd| format!("{} at theta = {:?}", self.label, nd.u),
        )
    }

    pub fn integrate_many(
        &self,
        k: usize,
        f: impl Fn(&SurfaceNode) -> Result<Vec<f64>> + Sync,
    ) -> Result<Vec<f64>> {
        weighted_sums(
            &self.nodes,
            k,
            |nd| {
                let mut v = f(nd)?;
                v.iter_mut().for_each(|x| *x *= nd.weight);
                Ok(v)
            },
            |nd| format!("{} at theta = {:?}", self.label, nd.u),
        )
    }

    pub fn area(&self) -> Result<f64> {
        self.integrate(|_| Ok(1.0))
    }

    /// Largest `| |nu| - 1 |`.
    pub fn normal_defect(&self, space: &WarpedSpace) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for nd in &self.nodes {
            let (g, _) = space.metric_at(&nd.point)?;
            let len = g.apply2(&nd.normal, &nd.normal).sqrt();
            worst = worst.max((len - 1.0).abs());
        }
        Ok(worst)
    }

    /// Largest `|h - c g|` for the best umbilic factor `c = H / (n-1)` at each node.
    pub fn umbilicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for nd in &self.nodes {
            let c = nd.mean_curvature / nd.g.dim as f64;
            for (h, g) in nd.h.components.iter().zip(&nd.g.components) {
                worst = worst.max((h - c * g).abs());
            }
        }
        worst
    }
}

/// A field restricted to the surface with its intrinsic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentialData {
    pub value: f64,
    /// `d_a z` in base coordinates.
    pub du: Vec<f64>,
    pub grad_sq: f64,
    pub hess: TensorValue,
    pub laplacian: f64,
}

impl TangentialData {
    /// Tangential gradient raised with the induced metric, `g^{ab} d_b z`.
    pub fn raised(&self, node: &SurfaceNode) -> Vec<f64> {
        let m = self.du.len();
        (0..m)
            .map(|a| (0..m).map(|b| node.ginv.get2(a, b) * self.du[b]).sum())
            .collect()
    }
}

/// Intrinsic calculus of the ambient field `z` restricted to the graph.
pub fn tangential_calculus(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    z: &FieldExpr,
) -> Result<TangentialData> {
    let m = space.n - 1;
    if z.max_theta() > m {
        return Err(Error::InvalidParams(format!(
            "`{}` uses more angles than the base has",
            z.source()
        )));
    }
    let r = rho_jet(space, graph, &node.u)?;
    let tj = theta_jets(m, &node.u);
    let j: Jet2 = z.eval(&EvalEnv {
        s: Some(r),
        theta: &tj,
        profile: Some(&space.profile),
    })?;
    let j = if j.dim == m {
        j
    } else {
        Jet2::constant(m, j.value())
    };
    let hess = TensorValue::from_fn2(m, |a, b| {
        let mut v = 0.5 * (j.hess[a][b] + j.hess[b][a]);
        for k in 0..m {
            v -= node.gamma.get3(k, a, b) * j.grad[k];
        }
        v
    });
    let du = j.grad_slice().to_vec();
    let grad_sq = (0..m)
        .flat_map(|a| (0..m).map(move |b| (a, b)))
        .map(|(a, b)| node.ginv.get2(a, b) * du[a] * du[b])
        .sum();
    Ok(TangentialData {
        value: j.value,
        laplacian: hess.trace_with(&node.ginv),
        du,
        grad_sq,
        hess,
    })
}

/// Induced Christoffel symbols from finite differences of the induced metric.
pub fn induced_christoffel_oracle(
    space: &WarpedSpace,
    graph: &RadialGraph,
    u: &[f64],
    fd: FdScheme,
) -> Result<TensorValue> {
    let m = space.n - 1;
    let metric = |v: &[f64]| -> Result<Vec<f64>> { Ok(local(space, graph, v)?.g.components) };
    let dg: Vec<Vec<f64>> = (0..m)
        .map(|c| fd.partial(u, c, metric))
        .collect::<Result<_>>()?;
    let ginv = local(space, graph, u)?.ginv;
    let mut gamma = TensorValue::zeros(Rank::Mixed12, m);
    for k in 0..m {
        for a in 0..m {
            for b in 0..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc +=
                        ginv.get2(k, l) * (dg[a][b * m + l] + dg[b][a * m + l] - dg[l][a * m + b]);
                }
                gamma.set3(k, a, b, 0.5 * acc);
            }
        }
    }
    Ok(gamma)
}

/// Second fundamental form from finite differences of the normal field,
/// `h_ab = <d_a nu + Gamma(T_a, nu), T_b>`.
pub fn second_fundamental_form_oracle(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    sigma: f64,
    fd: FdScheme,
) -> Result<TensorValue> {
    let m = space.n - 1;
    let n = space.n;
    let nu_at = |v: &[f64]| -> Result<Vec<f64>> {
        let loc = local(space, graph, v)?;
        Ok(frame(space, loc.s, v, &loc.drho, sigma)?.0)
    };
    let gamma = space.christoffel_at(&node.point)?;
    let (g, _) = space.metric_at(&node.point)?;
    let mut h = TensorValue::zeros(Rank::Covariant2, m);
    for a in 0..m {
        let dnu = fd.partial(&node.u, a, nu_at)?;
        let ta = &node.tangents[a];
        let cov: Vec<f64> = (0..n)
            .map(|k| {
                let mut v = dnu[k];
                for i in 0..n {
                    for j in 0..n {
                        v += gamma.get3(k, i, j) * ta[i] * node.normal[j];
                    }
                }
                v
            })
            .collect();
        for b in 0..m {
            h.set2(a, b, g.apply2(&cov, &node.tangents[b]));
        }
    }
    Ok(h)
}

fn pullback4(rm: &TensorValue, t: &[Vec<f64>]) -> TensorValue {
    let m = t.len();
    let n = rm.dim;
    // contract one slot at a time
    let mut cur = rm.components.clone();
    let mut dims = [n, n, n, n];
    for slot in 0..4 {
        let mut next_dims = dims;
        next_dims[slot] = m;
        let size: usize = next_dims.iter().product();
        let mut next = vec![0.0; size];
        for idx in 0..size {
            let mut rem = idx;
            let mut ix = [0usize; 4];
            for k in (0..4).rev() {
                ix[k] = rem % next_dims[k];
                rem /= next_dims[k];
            }
            let mut acc = 0.0;
            for i in 0..n {
                let c = t[ix[slot]][i];
                if c == 0.0 {
                    continue;
                }
                let mut src = ix;
                src[slot] = i;
                let flat = ((src[0] * dims[1] + src[1]) * dims[2] + src[2]) * dims[3] + src[3];
                acc += c * cur[flat];
            }
            next[idx] = acc;
        }
        cur = next;
        dims = next_dims;
    }
    let mut out = TensorValue::zeros(Rank::Covariant4, m);
    out.components = cur;
    out
}

/// Intrinsic Ricci tensor from the Gauss equation with the ambient Riemann tensor.
pub fn intrinsic_ricci(space: &WarpedSpace, node: &SurfaceNode) -> Result<TensorValue> {
    let m = node.g.dim;
    let rm = space.curvature_at(&node.point)?.riemann;
    let mut r = pullback4(&rm, &node.tangents);
    let h = &node.h;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let v = r.get4(a, b, c, d) + h.get2(a, c) * h.get2(b, d)
                        - h.get2(a, d) * h.get2(b, c);
                    r.set4(a, b, c, d, v);
                }
            }
        }
    }
    Ok(ricci_from_riemann(&r, &node.ginv))
}

/// `H h - h g^{-1} h + K (n-2) g`, valid in a space form of curvature `k`.
pub fn intrinsic_ricci_space_form(node: &SurfaceNode, k: f64) -> TensorValue {
    let m = node.g.dim as f64;
    let hh = node.compose(&node.h, &node.h);
    let mut out = node.h.clone();
    for ((o, q), g) in out
        .components
        .iter_mut()
        .zip(&hh.components)
        .zip(&node.g.components)
    {
        *o = node.mean_curvature * *o - q + k * (m - 1.0) * g;
    }
    out
}

/// Intrinsic Ricci tensor from finite differences of the induced Christoffels.
pub fn intrinsic_ricci_oracle(
    space: &WarpedSpace,
    graph: &RadialGraph,
    node: &SurfaceNode,
    fd: FdScheme,
) -> Result<TensorValue> {
    let rm =
        riemann_from_christoffel_fd(&node.u, fd, &node.g, |v| Ok(local(space, graph, v)?.gamma))?;
    Ok(ricci_from_riemann(&rm, &node.ginv))
}

/// `K` when the ambient space has constant curvature `K` on its whole range.
pub fn space_form_curvature(space: &WarpedSpace) -> Option<f64> {
    let pr = &space.profile;
    let mut k: Option<f64> = None;
    for i in 1..8 {
        let s = pr.s_min + (pr.s_max - pr.s_min) * i as f64 / 8.0;
        let (kt, kr) = space.sectional(s).ok()?;
        if (kt - kr).abs() > 1e-12 * kt.abs().max(1.0) {
            return None;
        }
        match k {
            None => k = Some(kt),
            Some(k0) if (k0 - kt).abs() > 1e-12 * k0.abs().max(1.0) => return None,
            _ => {}
        }
    }
    k
}

/// Smallest eigenvalue over the nodes of `h - (V_nu / V) g`.
pub fn static_convexity_margin(geo: &SurfaceGeometry) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for nd in &geo.nodes {
        if !(nd.potential > 0.0) {
            return Err(Error::VanishingPotential(format!("at theta = {:?}", nd.u)));
        }
        let c = nd.potential_normal / nd.potential;
        let mut a = nd.h.clone();
        for (x, g) in a.components.iter_mut().zip(&nd.g.components) {
            *x -= c * g;
        }
        worst = worst.min(generalized_eigenvalues(&a, &nd.g)?[0]);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstaticComparison {
    /// Largest componentwise gap between the two tensors.
    pub discrepancy: f64,
    /// Largest component, for scaling.
    pub scale: f64,
    /// Smallest eigenvalue of the intrinsic tensor over the nodes.
    pub min_eigenvalue: f64,
    pub positive_semidefinite: bool,
}

/// The hypersurface sub-static tensor `Lap V g - Hess V + V Ric` computed
/// intrinsically, against `(V h - V_nu g) g^{-1} (H g - h)` computed from the
/// second fundamental form. Needs a space-form ambient.
pub fn surface_substatic_two_ways(
    space: &WarpedSpace,
    geo: &SurfaceGeometry,
    fd: FdScheme,
) -> Result<SubstaticComparison> {
    if space_form_curvature(space).is_none() {
        return Err(Error::Unsupported(
            "the extrinsic form needs a space form".into(),
        ));
    }
    let v = FieldExpr::parse("V").expect("static expression");
    let mut discrepancy: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for nd in &geo.nodes {
        let t = tangential_calculus(space, &geo.graph, nd, &v)?;
        let ric = intrinsic_ricci_oracle(space, &geo.graph, nd, fd)?;
        let intrinsic = TensorValue::from_fn2(nd.g.dim, |a, b| {
            t.laplacian * nd.g.get2(a, b) - t.hess.get2(a, b) + t.value * ric.get2(a, b)
        });
        let left = TensorValue::from_fn2(nd.g.dim, |a, b| {
            nd.potential * nd.h.get2(a, b) - nd.potential_normal * nd.g.get2(a, b)
        });
        let right = TensorValue::from_fn2(nd.g.dim, |a, b| {
            nd.mean_curvature * nd.g.get2(a, b) - nd.h.get2(a, b)
        });
        let extrinsic = nd.compose(&left, &right);
        discrepancy = discrepancy.max(intrinsic.max_abs_diff(&extrinsic));
        scale = scale.max(intrinsic.max_abs()).max(extrinsic.max_abs());
        min_eig = min_eig.min(generalized_eigenvalues(&intrinsic, &nd.g)?[0]);
    }
    Ok(SubstaticComparison {
        discrepancy,
        scale,
        min_eigenvalue: min_eig,
        positive_semidefinite: min_eig >= -1e-8 * scale.max(1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Report {
    /// `int sigma_2 V dA`.
    pub weighted_integral: f64,
    /// Largest gap between `(H^2 - |h|^2)/2` and the symmetric polynomial of
    /// the principal curvatures.
    pub eigen_check: f64,
}

pub fn sigma2(geo: &SurfaceGeometry) -> Result<Sigma2Report> {
    let mut worst: f64 = 0.0;
    for nd in &geo.nodes {
        let k = nd.principal_curvatures()?;
        let mut e2 = 0.0;
        for i in 0..k.len() {
            for j in i + 1..k.len() {
                e2 += k[i] * k[j];
            }
        }
        worst = worst.max((e2 - nd.sigma2()).abs());
    }
    Ok(Sigma2Report {
        weighted_integral: geo.integrate(|nd| Ok(nd.sigma2() * nd.potential))?,
        eigen_check: worst,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiIdentity {
    /// `int H <X, nu> dA`.
    pub lhs: f64,
    /// `(n-1) int V dA`.
    pub rhs: f64,
    pub residual: f64,
}

/// Minkowski identity for the conformal field `X = s sqrt(phi) d_s`, for
/// which `<X, nu> = s nu^s / sqrt(phi)`.
pub fn minkowski_identity(space: &WarpedSpace, geo: &SurfaceGeometry) -> Result<MinkowskiIdentity> {
    let lhs =
        geo.integrate(|nd| Ok(nd.mean_curvature * nd.point.s * nd.normal[0] / nd.potential))?;
    let rhs = (space.n as f64 - 1.0) * geo.integrate(|nd| Ok(nd.potential))?;
    Ok(MinkowskiIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Closed forms on the slice `s = s0` with normal `sigma d_s / |d_s|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceForms {
    pub normal_s: f64,
    /// `h = umbilic * g`.
    pub umbilic: f64,
    pub mean_curvature: f64,
    pub potential_normal: f64,
}

pub fn slice_forms(space: &WarpedSpace, s0: f64, sigma: f64) -> Result<SliceForms> {
    let j = space.profile.jet(s0)?;
    let v = j.d[0].max(0.0).sqrt();
    let c = sigma * v / s0;
    Ok(SliceForms {
        normal_s: sigma * v,
        umbilic: c,
        mean_curvature: (space.n as f64 - 1.0) * c,
        potential_normal: sigma * 0.5 * j.d[1],
    })
}

/// Space forms for which geodesic spheres have closed-form graph radii.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceFormKind {
    Euclidean,
    Hyperbolic,
    Hemisphere,
}

/// Graph radius of the geodesic sphere of radius `radius` whose center lies
/// at distance `d` from the origin along `theta1 = 0`.
pub fn off_center_sphere(kind: SpaceFormKind, d: f64, radius: f64) -> Result<RadialGraph> {
    if !(d >= 0.0 && radius > d) {
        return Err(Error::InvalidParams(format!(
            "need 0 <= d < radius, got d = {d}, radius = {radius}"
        )));
    }
    let src = match kind {
        SpaceFormKind::Euclidean => format!(
            "{d:?}*cos(theta1) + sqrt({r2:?} - {d2:?}*sin(theta1)^2)",
            r2 = radius * radius,
            d2 = d * d
        ),
        SpaceFormKind::Hyperbolic => {
            let (a, bd, c) = (d.cosh(), d.sinh(), radius.cosh());
            let b = format!("({bd:?}*cos(theta1))");
            format!(
                "({b}*{c:?} + sqrt({b}^2*{c2:?} - ({a2:?} - {b}^2)*({a2:?} - {c2:?})))/({a2:?} - {b}^2)",
                c2 = c * c,
                a2 = a * a
            )
        }
        SpaceFormKind::Hemisphere => {
            if d + radius >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::InvalidParams("sphere leaves the hemisphere".into()));
            }
            let (a, bd, c) = (d.cos(), d.sin(), radius.cos());
            let b = format!("({bd:?}*cos(theta1))");
            format!(
                "({b}*{c:?} + sqrt({b}^2*{c2:?} - ({a2:?} + {b}^2)*({c2:?} - {a2:?})))/({a2:?} + {b}^2)",
                c2 = c * c,
                a2 = a * a
            )
        }
    };
    RadialGraph::new(
        format!("{kind:?} sphere radius {radius} offset {d}"),
        FieldExpr::parse(&src)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinName;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn space(name: BuiltinName, kv: &[(&str, f64)]) -> WarpedSpace {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        WarpedSpace::builtin(name, 3, &p, None).unwrap()
    }

    fn graph(src: &str) -> RadialGraph {
        RadialGraph::new(src, FieldExpr::parse(src).unwrap()).unwrap()
    }

    fn geo(sp: &WarpedSpace, g: &RadialGraph, spec: GridSpec) -> SurfaceGeometry {
        surface_geometry(sp, g, Orientation::Outward, spec).unwrap()
    }

    const SMALL: GridSpec = GridSpec {
        radial: 4,
        polar: 12,
        azimuthal: 16,
    };

    #[test]
    fn euclidean_sphere() {
        let sp = space(BuiltinName::Euclidean, &[]);
        let g = geo(&sp, &RadialGraph::slice(2.0), SMALL);
        for nd in &g.nodes {
            assert!((nd.mean_curvature - 1.0).abs() < 1e-13);
        }
        assert!(g.umbilicity_defect() < 1e-13);
        assert!((g.area().unwrap() - 16.0 * PI).abs() < 1e-11);
        assert!(g.normal_defect(&sp).unwrap() < 1e-14);
        let h = g.integrate(|nd| Ok(nd.mean_curvature)).unwrap();
        assert!((h - 16.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn hyperbolic_slice_matches_closed_form() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let s0: f64 = 1.0;
        let g = geo(&sp, &RadialGraph::slice(s0), SMALL);
        let f = slice_forms(&sp, s0, 1.0).unwrap();
        assert!((f.mean_curvature - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        for nd in &g.nodes {
            assert!((nd.mean_curvature - f.mean_curvature).abs() < 1e-12);
            assert!((nd.potential_normal - f.potential_normal).abs() < 1e-12);
        }
        let m = static_convexity_margin(&g).unwrap();
        assert!((m - (2f64.sqrt() - 0.5f64.sqrt())).abs() < 1e-12, "{m}");
    }

    #[test]
    fn inward_orientation_flips_curvature() {
        let sp = space(BuiltinName::Schwarzschild, &[("m", 1.0)]);
        let out = geo(&sp, &RadialGraph::slice(2.0), SMALL);
        let inw =
            surface_geometry(&sp, &RadialGraph::slice(2.0), Orientation::Inward, SMALL).unwrap();
        let f = slice_forms(&sp, 2.0, -1.0).unwrap();
        assert!((inw.nodes[0].mean_curvature + out.nodes[0].mean_curvature).abs() < 1e-14);
        assert!((inw.nodes[0].mean_curvature - f.mean_curvature).abs() < 1e-13);
        assert!((inw.nodes[0].normal[0] - f.normal_s).abs() < 1e-14);
    }

    #[test]
    fn second_fundamental_form_matches_normal_variation() {
        let sp = space(BuiltinName::Euclidean, &[]);
        let gr = graph("1 + 0.2*cos(theta1)^2");
        let g = geo(&sp, &gr, SMALL);
        for nd in g.nodes.iter().step_by(7) {
            let o = second_fundamental_form_oracle(&sp, &gr, nd, 1.0, FdScheme::default()).unwrap();
            assert!(nd.h.max_abs_diff(&o) < 1e-6);
            assert!(nd.h.symmetry_defect() < 1e-14);
        }
    }

    #[test]
    fn induced_christoffels_match_metric_differences() {
        let sp = space(BuiltinName::AdsSchwarzschild, &[("m", 1.0)]);
        let gr = graph("2 + 0.3*cos(theta1) + 0.1*sin(theta1)^2*cos(theta2)");
        let g = geo(&sp, &gr, SMALL);
        for nd in g.nodes.iter().step_by(11) {
            let o = induced_christoffel_oracle(&sp, &gr, &nd.u, FdScheme::fourth(1e-3)).unwrap();
            assert!(nd.gamma.max_abs_diff(&o) < 1e-9);
        }
    }

    #[test]
    fn tangential_calculus_on_sphere() {
        let sp = space(BuiltinName::Euclidean, &[]);
        let gr = RadialGraph::slice(1.5);
        let g = geo(&sp, &gr, SMALL);
        let z = FieldExpr::parse("cos(theta1)").unwrap();
        let one = FieldExpr::parse("1").unwrap();
        for nd in &g.nodes {
            let t = tangential_calculus(&sp, &gr, nd, &z).unwrap();
            assert!((t.laplacian + 2.0 * nd.u[0].cos() / 2.25).abs() < 1e-12);
            let c = tangential_calculus(&sp, &gr, nd, &one).unwrap();
            assert!(c.laplacian == 0.0 && c.grad_sq == 0.0);
        }
    }

    #[test]
    fn divergence_theorem_on_graph() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let gr = graph("1 + 0.2*cos(theta1)");
        let g = geo(&sp, &gr, GridSpec::new(4, 32, 8));
        let z = FieldExpr::parse("cos(theta1)").unwrap();
        let int = g
            .integrate(|nd| Ok(tangential_calculus(&sp, &gr, nd, &z)?.laplacian))
            .unwrap();
        assert!(int.abs() < 1e-8, "{int}");
    }

    #[test]
    fn gauss_equation_paths_agree() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let gr = graph("1.2 + 0.1*cos(theta1)");
        let g = geo(&sp, &gr, SMALL);
        for nd in g.nodes.iter().step_by(13) {
            let a = intrinsic_ricci(&sp, nd).unwrap();
            let b = intrinsic_ricci_space_form(nd, -1.0);
            let c = intrinsic_ricci_oracle(&sp, &gr, nd, FdScheme::fourth(1e-3)).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
            assert!(a.max_abs_diff(&c) < 1e-6);
        }
    }

    #[test]
    fn hyperbolic_slice_is_round_of_radius_s0() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        let g = geo(&sp, &RadialGraph::slice(0.8), SMALL);
        let nd = &g.nodes[5];
        let r = intrinsic_ricci(&sp, nd).unwrap();
        for (x, y) in r.components.iter().zip(&nd.g.components) {
            assert!((x - y / 0.64).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_slice_gauss_equation_against_differences() {
        let sp = space(BuiltinName::AdsTorus, &[("m", 1.0)]);
        let gr = graph("2 + 0.1*cos(theta1)");
        let g = geo(&sp, &gr, SMALL);
        for nd in g.nodes.iter().step_by(17) {
            let a = intrinsic_ricci(&sp, nd).unwrap();
            let c = intrinsic_ricci_oracle(&sp, &gr, nd, FdScheme::fourth(1e-3)).unwrap();
            assert!(a.max_abs_diff(&c) < 1e-6);
        }
    }

    #[test]
    fn substatic_tensor_two_ways() {
        let sp = space(BuiltinName::Hyperbolic, &[]);
        for gr in [RadialGraph::slice(1.0), graph("1 + 0.05*cos(theta1)")] {
            let g = geo(&sp, &gr, GridSpec::new(4, 8, 8));
            let c = surface_substatic_two_ways(&sp, &g, FdScheme::fourth(1e-3)).unwrap();
            assert!(c.discrepancy < 1e-6 * c.scale.max(1.0), "{c:?}");
        }
        let hs = space(BuiltinName::Hemisphere, &[]);
        let g = geo(&hs, &RadialGraph::slice(0.5), GridSpec::new(4, 8, 8));
        let c = surface_substatic_two_ways(&hs, &g, FdScheme::fourth(1e-3)).unwrap();
        assert!(c.positive_semidefinite && c.discrepancy < 1e-6);
    }

    #[test]
    fn sigma2_values() {
        let sp = space(BuiltinName::Euclidean, &[]);
        let g = geo(&sp, &RadialGraph::slice(2.0), SMALL);
        assert!((g.nodes[0].sigma2() - 0.25).abs() < 1e-14);
        let hy = space(BuiltinName::Hyperbolic, &[]);
        let g = geo(&hy, &RadialGraph::slice(0.5), SMALL);
        // coth^2 r with sinh r = 0.5
        assert!((g.nodes[0].sigma2() - 1.25 / 0.25).abs() < 1e-12);
        let g = geo(&hy, &graph("1 + 0.3*cos(theta1)"), SMALL);
        assert!(sigma2(&g).unwrap().eigen_check < 1e-12);
    }

    #[test]
    fn minkowski_identity_on_graphs() {
        for (sp, gr) in [
            (
                space(BuiltinName::Euclidean, &[]),
                graph("1 + 0.2*cos(theta1)"),
            ),
            (
                space(BuiltinName::Schwarzschild, &[("m", 1.0)]),
                graph("3 + 0.4*cos(theta1)^2"),
            ),
            (
                space(BuiltinName::AdsTorus, &[("m", 1.0)]),
                graph("2 + 0.1*cos(theta1)*sin(theta2)"),
            ),
        ] {
            let g = geo(&sp, &gr, GridSpec::new(4, 40, 40));
            let m = minkowski_identity(&sp, &g).unwrap();
            assert!(m.residual < 1e-9 * m.rhs.abs(), "{}: {m:?}", gr.label);
        }
    }

    #[test]
    fn off_center_spheres_are_umbilic() {
        for (kind, name) in [
            (SpaceFormKind::Euclidean, BuiltinName::Euclidean),
            (SpaceFormKind::Hyperbolic, BuiltinName::Hyperbolic),
            (SpaceFormKind::Hemisphere, BuiltinName::Hemisphere),
        ] {
            let sp = space(name, &[]);
            let gr = off_center_sphere(kind, 0.2, 0.6).unwrap();
            let g = geo(&sp, &gr, GridSpec::new(4, 16, 8));
            let h0 = g.nodes[0].mean_curvature;
            for nd in &g.nodes {
                assert!((nd.mean_curvature - h0).abs() < 1e-10, "{kind:?}");
            }
            assert!(g.umbilicity_defect() < 1e-10);
        }
    }

    #[test]
    fn space_form_detection() {
        assert_eq!(
            space_form_curvature(&space(BuiltinName::Hyperbolic, &[])),
            Some(-1.0)
        );
        assert_eq!(
            space_form_curvature(&space(BuiltinName::Hemisphere, &[])),
            Some(1.0)
        );
        assert!(space_form_curvature(&space(BuiltinName::Schwarzschild, &[("m", 1.0)])).is_none());
    }
}
