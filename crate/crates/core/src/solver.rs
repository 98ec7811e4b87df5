//! Rotationally symmetric boundary value problems for `Lap f - q f = 1`,
//! `q = Lap V / V`, the first Dirichlet eigenvalue of `-Lap + q`, and the
//! inequality chains that consume their solutions.
//!
//! For radial `f` the operator is `(p f')' / rho` with `p = s^{n-1} sqrt(phi)`
//! and density `rho = s^{n-1} / sqrt(phi)`. Meshes are uniform in `s`, or in
//! `t = sqrt(s - s_0)` next to a horizon; in `t` both coefficients stay
//! finite and the horizon is an ordinary boundary point. Discretization is
//! the three-point finite volume scheme on dual cells, with the cell
//! integrals of the density and of `q` times it taken by Gauss-Legendre;
//! it is second order and exact for the Euclidean model solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpedSpace;
use crate::quadrature::gauss_legendre;
use crate::reilly::InnerBoundary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BvpKind {
    /// `f = 0` on the outer slice, `f = c_l` on a horizon.
    DirichletHk,
    /// `V f_nu - V_nu f = c V` on the outer slice, gauge `f(b) = 0`.
    NeumannMinkowski,
    /// As `NeumannMinkowski` with `f = c_0` on the horizon.
    NeumannHorizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialBvp {
    pub kind: BvpKind,
    pub inner: InnerBoundary,
    /// Outer slice radius.
    pub b: f64,
    /// Number of mesh cells.
    pub mesh: usize,
}

pub const DEFAULT_MESH: usize = 2048;

/// Radial mesh in a coordinate `x`, with `s = s_0 + x^2` next to a horizon
/// and `s = x` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialMesh {
    pub horizon: bool,
    pub s0: f64,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub h: f64,
}

impl RadialMesh {
    pub fn new(space: &WarpedSpace, inner: &InnerBoundary, b: f64, cells: usize) -> Result<Self> {
        if cells < 4 {
            return Err(Error::InvalidParams(format!(
                "mesh of {cells} cells is too coarse"
            )));
        }
        let a = inner_radius(space, inner)?;
        if !(b > a && b <= space.profile.s_max) {
            return Err(Error::OutOfDomain {
                s: b,
                min: a,
                max: space.profile.s_max,
            });
        }
        let horizon = matches!(inner, InnerBoundary::Horizon);
        let (x0, x1) = if horizon {
            (0.0, (b - a).sqrt())
        } else {
            (a, b)
        };
        let h = (x1 - x0) / cells as f64;
        let x: Vec<f64> = (0..=cells)
            .map(|i| if i == cells { x1 } else { x0 + h * i as f64 })
            .collect();
        let s = x
            .iter()
            .map(|&xi| if horizon { a + xi * xi } else { xi })
            .collect();
        Ok(RadialMesh {
            horizon,
            s0: a,
            x,
            s,
            h,
        })
    }

    pub fn cells(&self) -> usize {
        self.x.len() - 1
    }

    pub fn s_of(&self, x: f64) -> f64 {
        if self.horizon {
            self.s0 + x * x
        } else {
            x
        }
    }

    /// `ds/dx`.
    pub fn jacobian(&self, x: f64) -> f64 {
        if self.horizon {
            2.0 * x
        } else {
            1.0
        }
    }
}

fn inner_radius(space: &WarpedSpace, inner: &InnerBoundary) -> Result<f64> {
    crate::reilly::Domain {
        inner: inner.clone(),
        outer: crate::surfaces::RadialGraph::slice(space.profile.s_max),
    }
    .inner_radius(space)
}

/// Coefficients of `(P f_x)_x - W q f = W` in the mesh coordinate.
struct Coefficients<'a> {
    space: &'a WarpedSpace,
    mesh: &'a RadialMesh,
    /// `sqrt(phi'(s_0))` on a horizon.
    kappa_root: f64,
    /// `phi(s_0)` as evaluated, a round-off sized value subtracted so that
    /// `phi / t^2` stays accurate at the first nodes.
    phi_shift: f64,
}

impl<'a> Coefficients<'a> {
    fn new(space: &'a WarpedSpace, mesh: &'a RadialMesh) -> Result<Self> {
        let (kappa_root, phi_shift) = if mesh.horizon {
            let j = space.profile.jet(mesh.s0)?;
            (j.d[1].sqrt(), j.d[0])
        } else {
            (0.0, 0.0)
        };
        Ok(Coefficients {
            space,
            mesh,
            kappa_root,
            phi_shift,
        })
    }

    fn nm1(&self) -> i32 {
        self.space.n as i32 - 1
    }

    /// `sqrt(phi) / (ds/dx)`, finite at a horizon.
    fn root_over_jacobian(&self, x: f64) -> Result<f64> {
        if self.mesh.horizon && x == 0.0 {
            return Ok(0.5 * self.kappa_root);
        }
        let s = self.mesh.s_of(x);
        let phi = self.space.profile.phi(s)? - self.phi_shift;
        Ok(phi.max(0.0).sqrt() / self.mesh.jacobian(x))
    }

    /// `P = s^{n-1} sqrt(phi) / S'`.
    fn p(&self, x: f64) -> Result<f64> {
        Ok(self.mesh.s_of(x).powi(self.nm1()) * self.root_over_jacobian(x)?)
    }

    /// `W = S' s^{n-1} / sqrt(phi)`.
    fn w(&self, x: f64) -> Result<f64> {
        let s = self.mesh.s_of(x);
        Ok(s.powi(self.nm1()) / self.root_over_jacobian(x)?)
    }

    fn q(&self, x: f64) -> Result<f64> {
        let s = self.mesh.s_of(x);
        if s == 0.0 {
            return Err(Error::InvalidParams("q requested at the center".into()));
        }
        self.space.q_potential(s)
    }

    /// `int W` and `int W q` over `[lo, hi]` by Gauss-Legendre.
    fn cell_masses(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let (xg, wg) = gauss_legendre(8);
        let (mut m, mut mq) = (0.0, 0.0);
        for (xi, wi) in xg.iter().zip(&wg) {
            let x = 0.5 * (hi - lo) * xi + 0.5 * (hi + lo);
            let w = 0.5 * (hi - lo) * wi * self.w(x)?;
            m += w;
            mq += w * self.q(x)?;
        }
        Ok((m, mq))
    }
}

/// Symmetric tridiagonal stiffness `A` and diagonal mass `M` such that
/// `A f = -M 1` discretizes the equation and `A f = lambda M f` the
/// eigenproblem. At a center or a horizon row 0 is a half cell with zero
/// flux (regularity in `x`); at a slice it is left for a Dirichlet value.
struct System {
    diag: Vec<f64>,
    off: Vec<f64>,
    mass: Vec<f64>,
}

fn assemble(c: &Coefficients) -> Result<System> {
    let mesh = c.mesh;
    let nc = mesh.cells();
    let h = mesh.h;
    let pm: Vec<f64> = (0..nc)
        .map(|i| c.p(0.5 * (mesh.x[i] + mesh.x[i + 1])))
        .collect::<Result<_>>()?;
    let mut diag = vec![0.0; nc + 1];
    let mut mass = vec![0.0; nc + 1];
    let off: Vec<f64> = pm.iter().map(|p| -p / h).collect();
    for i in 1..nc {
        let x = mesh.x[i];
        let (m, mq) = c.cell_masses(x - 0.5 * h, x + 0.5 * h)?;
        mass[i] = m;
        diag[i] = (pm[i - 1] + pm[i]) / h + mq;
    }
    if mesh.s[0] == 0.0 || mesh.horizon {
        let (m0, m0q) = c.cell_masses(0.0, 0.5 * h)?;
        mass[0] = m0;
        diag[0] = pm[0] / h + m0q;
    }
    Ok(System { diag, off, mass })
}

/// Thomas algorithm for a symmetric tridiagonal matrix.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return Err(Error::Singular("zero pivot in row 0".into()));
    }
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        let lower = off[i - 1];
        denom = diag[i] - lower * c[i - 1];
        if !(denom.abs() > 1e-300) || !denom.is_finite() {
            return Err(Error::Singular(format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves `A f = rhs` with the rows listed in `fixed` replaced by `f_i = v`.
fn solve_with_dirichlet(sys: &System, rhs: &[f64], fixed: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut diag = sys.diag.clone();
    let mut off = sys.off.clone();
    let mut r = rhs.to_vec();
    for &(i, v) in fixed {
        // move the known value to the right-hand side of the neighbours
        if i > 0 {
            r[i - 1] -= sys.off[i - 1] * v;
            off[i - 1] = 0.0;
        }
        if i + 1 < diag.len() {
            r[i + 1] -= sys.off[i] * v;
            off[i] = 0.0;
        }
        diag[i] = 1.0;
        r[i] = v;
    }
    solve_tridiagonal(&diag, &off, &r)
}

/// Flux identity `int_Omega V = int_Sigma (V u - V_nu z) + int_N (-V_nu z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxCheck {
    pub volume_integral: f64,
    pub outer_flux: f64,
    pub inner_flux: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpSolution {
    pub kind: BvpKind,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    /// `df/dr` with `dr = ds / sqrt(phi)`, finite on a horizon.
    pub f_r: Vec<f64>,
    /// `f` and `f_nu` on the outer slice (outward normal).
    pub z_outer: f64,
    pub u_outer: f64,
    /// `f` and `f_nu` on the inner slice (normal pointing out of the domain), if any.
    pub z_inner: Option<f64>,
    pub u_inner: Option<f64>,
    /// Outer Robin constant `c` or `c_1`.
    pub c_outer: Option<f64>,
    /// Horizon value `c_l` or `c_0`.
    pub c_inner: Option<f64>,
    pub flux: FluxCheck,
    /// `int_Omega V f`.
    pub int_vf: f64,
    /// Largest residual of the equation at interior nodes with an
    /// independent three-point stencil; second order in the mesh size.
    pub pde_residual: f64,
    /// Largest residual of the finite volume equations, relative to the cell
    /// mass. Round-off for the Dirichlet kinds; for the quadrature solve of
    /// the Neumann problem it is a truncation error like `pde_residual`.
    pub discrete_residual: f64,
    /// Largest violation of the imposed conditions: the Dirichlet values and
    /// the gauge, plus the Robin condition where it is imposed.
    pub bc_residual: f64,
    /// `|V f_nu - V_nu f - c V|` on the outer slice for the Neumann kinds.
    /// With a horizon the Robin condition is implied by the flux identity
    /// rather than imposed, so this measures discretization consistency.
    pub robin_residual: Option<f64>,
    /// `f_r` at a horizon. In `s` the limit of the equation is the Robin row
    /// `phi'(s_0)/2 f_s - q f = 1`, which needs a finite `f_s`; solutions
    /// behave like `f(s_0) + f_r r` in the distance `r` to the horizon, so the
    /// row is consistent with the imposed value exactly when this vanishes.
    pub horizon_slope: Option<f64>,
}

/// `c_l = c_0 = -2 s_0 / (n phi'(s_0))`.
pub fn horizon_value(space: &WarpedSpace) -> Result<f64> {
    let s0 = space
        .horizon()
        .ok_or_else(|| Error::NoHorizon(space.profile.label.clone()))?;
    let dphi = space.profile.jet(s0)?.d[1];
    Ok(-2.0 * s0 / (space.n as f64 * dphi))
}

/// `df/dx` on the mesh: central inside, second-order one-sided at the ends.
fn mesh_derivative(mesh: &RadialMesh, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let h = mesh.h;
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// `df/dr` at both ends of the mesh from the half-cell flux balance
/// `[P f_x] = int W (q f + 1)`, which is second order with a small constant.
fn end_slopes_by_balance(coef: &Coefficients, f: &[f64]) -> Result<(f64, f64)> {
    let mesh = coef.mesh;
    let nc = mesh.cells();
    let h = mesh.h;
    let (xg, wg) = gauss_legendre(8);
    let source = |lo: f64, hi: f64, f_lo: f64, f_hi: f64| -> Result<f64> {
        let mut total = 0.0;
        for (xi, wi) in xg.iter().zip(&wg) {
            let t = 0.5 * (xi + 1.0);
            let x = lo + t * (hi - lo);
            let v = f_lo + t * (f_hi - f_lo);
            total += 0.5 * (hi - lo) * wi * coef.w(x)? * (coef.q(x)? * v + 1.0);
        }
        Ok(total)
    };
    let nm1 = coef.nm1();
    let (x0, x1) = (mesh.x[0], mesh.x[nc]);
    let inner = if mesh.s[0] == 0.0 {
        0.0
    } else {
        let pm = coef.p(x0 + 0.5 * h)?;
        let fm = 0.5 * (f[0] + f[1]);
        let flux = pm * (f[1] - f[0]) / h - source(x0, x0 + 0.5 * h, f[0], fm)?;
        flux / mesh.s[0].powi(nm1)
    };
    let pm = coef.p(x1 - 0.5 * h)?;
    let fm = 0.5 * (f[nc - 1] + f[nc]);
    let flux = pm * (f[nc] - f[nc - 1]) / h + source(x1 - 0.5 * h, x1, fm, f[nc])?;
    Ok((inner, flux / mesh.s[nc].powi(nm1)))
}

/// `int g(x) f(x) dx` for the piecewise linear interpolant of `f`.
fn interpolant_integral(
    mesh: &RadialMesh,
    f: &[f64],
    g: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let (xg, wg) = gauss_legendre(8);
    let mut total = 0.0;
    for i in 0..mesh.cells() {
        let (lo, hi) = (mesh.x[i], mesh.x[i + 1]);
        for (xi, wi) in xg.iter().zip(&wg) {
            let t = 0.5 * (xi + 1.0);
            let x = lo + t * (hi - lo);
            total += 0.5 * (hi - lo) * wi * g(x)? * (f[i] + t * (f[i + 1] - f[i]));
        }
    }
    Ok(total)
}

/// Largest residual of `((P f_x)_x / W - q f - 1)` at interior nodes with the
/// nonconservative stencil `P f_xx + P_x f_x`, independent of the scheme
/// used for the solve. `P_x` comes from central differences of `P`.
fn pde_residual(coef: &Coefficients, f: &[f64]) -> Result<f64> {
    let mesh = coef.mesh;
    let h = mesh.h;
    let d = 0.25 * h.min(1e-3);
    let mut worst: f64 = 0.0;
    for i in 1..mesh.cells() {
        let x = mesh.x[i];
        let px = (8.0 * (coef.p(x + d)? - coef.p(x - d)?) - coef.p(x + 2.0 * d)?
            + coef.p(x - 2.0 * d)?)
            / (12.0 * d);
        let fxx = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
        let fx = (f[i + 1] - f[i - 1]) / (2.0 * h);
        let r = (coef.p(x)? * fxx + px * fx) / coef.w(x)? - coef.q(x)? * f[i] - 1.0;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Largest `|(A f + M 1)_i| / M_i` over interior rows: the residual of the
/// assembled finite volume equations.
fn discrete_residual(sys: &System, f: &[f64]) -> f64 {
    let n = f.len();
    (1..n - 1)
        .map(|i| {
            let af = sys.off[i - 1] * f[i - 1] + sys.diag[i] * f[i] + sys.off[i] * f[i + 1];
            ((af + sys.mass[i]) / sys.mass[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// `|N| int_a^b s^{n-1} ds`, the integral of `V` over the annulus.
fn volume_of_potential(space: &WarpedSpace, a: f64, b: f64) -> f64 {
    let n = space.n as i32;
    space.base.volume * (b.powi(n) - a.powi(n)) / n as f64
}

impl RadialBvp {
    pub fn new(kind: BvpKind, inner: InnerBoundary, b: f64) -> Self {
        RadialBvp {
            kind,
            inner,
            b,
            mesh: DEFAULT_MESH,
        }
    }

    pub fn with_mesh(mut self, mesh: usize) -> Self {
        self.mesh = mesh;
        self
    }

    pub fn solve(&self, space: &WarpedSpace) -> Result<BvpSolution> {
        match self.kind {
            BvpKind::DirichletHk | BvpKind::NeumannHorizon => self.solve_fd(space),
            BvpKind::NeumannMinkowski => self.solve_w_form(space),
        }
    }

    fn check_inner(&self) -> Result<()> {
        let ok = match self.kind {
            BvpKind::DirichletHk => !matches!(self.inner, InnerBoundary::Slice { .. }),
            BvpKind::NeumannMinkowski => !matches!(self.inner, InnerBoundary::Horizon),
            BvpKind::NeumannHorizon => matches!(self.inner, InnerBoundary::Horizon),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "{:?} is not defined with inner boundary {:?}",
                self.kind, self.inner
            )))
        }
    }

    /// Finite volume solve with Dirichlet data at both ends (or regularity at
    /// the center). For the horizon Neumann problem the horizon condition
    /// forces `z = c_0` and `f(b) = 0` fixes the `alpha V` gauge; the outer
    /// Robin condition then follows from the flux identity and is reported.
    fn solve_fd(&self, space: &WarpedSpace) -> Result<BvpSolution> {
        self.check_inner()?;
        let mesh = RadialMesh::new(space, &self.inner, self.b, self.mesh)?;
        let coef = Coefficients::new(space, &mesh)?;
        let sys = assemble(&coef)?;
        let nc = mesh.cells();
        let rhs: Vec<f64> = sys.mass.iter().map(|m| -m).collect();
        let mut fixed = vec![(nc, 0.0)];
        let c_inner = if mesh.horizon {
            let c = horizon_value(space)?;
            fixed.push((0, c));
            Some(c)
        } else {
            None
        };
        let f = solve_with_dirichlet(&sys, &rhs, &fixed)?;
        self.finish(space, &mesh, &coef, f, c_inner, None)
    }

    /// Solves `div(V^2 grad w) = V` for `w = f/V` by one radial quadrature:
    /// `s^{n-1} phi^{3/2} w' = (s^n - a^n)/n`, zero flux at an inner slice.
    fn solve_w_form(&self, space: &WarpedSpace) -> Result<BvpSolution> {
        self.check_inner()?;
        let mesh = RadialMesh::new(space, &self.inner, self.b, self.mesh)?;
        let coef = Coefficients::new(space, &mesh)?;
        let a = mesh.s0;
        let n = space.n as i32;
        let dw = |s: f64| -> Result<f64> {
            let phi = space.profile.phi(s)?;
            if !(phi > 0.0) {
                return Err(Error::VanishingPotential(format!("s = {s}")));
            }
            Ok((s.powi(n) - a.powi(n)) / (n as f64 * s.powi(n - 1) * phi.powf(1.5)))
        };
        let (xg, wg) = gauss_legendre(12);
        let nc = mesh.cells();
        let mut w = vec![0.0; nc + 1];
        for i in (0..nc).rev() {
            let (lo, hi) = (mesh.s[i], mesh.s[i + 1]);
            let mut cell = 0.0;
            for (xi, wi) in xg.iter().zip(&wg) {
                cell += 0.5 * (hi - lo) * wi * dw(0.5 * (hi - lo) * xi + 0.5 * (hi + lo))?;
            }
            w[i] = w[i + 1] - cell;
        }
        let f: Vec<f64> = mesh
            .s
            .iter()
            .zip(&w)
            .map(|(&s, wi)| Ok(space.profile.potential(s)? * wi))
            .collect::<Result<_>>()?;
        // f_r = sqrt(phi) (V' w + V w') exactly at both ends
        let slope = |s: f64, w: f64| -> Result<f64> {
            if s == 0.0 {
                return Ok(0.0);
            }
            let j = space.radial_values(s)?;
            Ok(0.5 * j.dphi * w + j.phi * dw(s)?)
        };
        let ends = (slope(mesh.s[0], w[0])?, slope(mesh.s[nc], w[nc])?);
        self.finish(space, &mesh, &coef, f, None, Some(ends))
    }

    fn finish(
        &self,
        space: &WarpedSpace,
        mesh: &RadialMesh,
        coef: &Coefficients,
        f: Vec<f64>,
        c_inner: Option<f64>,
        end_slopes: Option<(f64, f64)>,
    ) -> Result<BvpSolution> {
        let nc = mesh.cells();
        let fx = mesh_derivative(mesh, &f);
        let mut f_r: Vec<f64> = mesh
            .x
            .iter()
            .zip(&fx)
            .map(|(&x, d)| Ok(coef.root_over_jacobian(x)? * d))
            .collect::<Result<_>>()?;
        let (r0, r1) = match end_slopes {
            Some(e) => e,
            None => end_slopes_by_balance(coef, &f)?,
        };
        f_r[0] = r0;
        f_r[nc] = r1;
        let b = self.b;
        let area = |s: f64| s.powi(space.n as i32 - 1) * space.base.volume;
        let jb = space.radial_values(b)?;
        let (vb, vnu_b) = (jb.phi.sqrt(), 0.5 * jb.dphi);
        let (z_outer, u_outer) = (f[nc], f_r[nc]);
        let volume_integral = volume_of_potential(space, mesh.s0, b);
        let outer_flux = area(b) * (vb * u_outer - vnu_b * z_outer);
        let (z_inner, u_inner, inner_flux) = match self.inner {
            InnerBoundary::Center => (None, None, 0.0),
            _ => {
                let j = space.profile.jet(mesh.s0)?;
                let v = if mesh.horizon {
                    0.0
                } else {
                    j.d[0].max(0.0).sqrt()
                };
                let vnu = -0.5 * j.d[1];
                let u = -f_r[0];
                (Some(f[0]), Some(u), area(mesh.s0) * (v * u - vnu * f[0]))
            }
        };
        let flux = FluxCheck {
            volume_integral,
            outer_flux,
            inner_flux,
            residual: volume_integral - outer_flux - inner_flux,
        };
        let c_outer = match self.kind {
            BvpKind::DirichletHk => None,
            BvpKind::NeumannMinkowski => Some(volume_integral / (area(b) * vb)),
            BvpKind::NeumannHorizon => {
                let s0 = mesh.s0;
                Some((volume_integral + area(s0) * s0 / space.n as f64) / (area(b) * vb))
            }
        };
        let robin_residual = c_outer.map(|c| (vb * u_outer - vnu_b * z_outer - c * vb).abs());
        let mut bc_residual: f64 = match self.kind {
            BvpKind::DirichletHk | BvpKind::NeumannHorizon => z_outer.abs(),
            BvpKind::NeumannMinkowski => robin_residual.unwrap_or(0.0).max(z_outer.abs()),
        };
        if let (Some(c), Some(z)) = (c_inner, z_inner) {
            bc_residual = bc_residual.max((z - c).abs());
        }
        let horizon_slope = if mesh.horizon { Some(f_r[0]) } else { None };
        let int_vf = space.base.volume
            * interpolant_integral(mesh, &f, |x| {
                Ok(mesh.s_of(x).powi(space.n as i32 - 1) * mesh.jacobian(x))
            })?;
        Ok(BvpSolution {
            kind: self.kind,
            int_vf,
            pde_residual: pde_residual(coef, &f)?,
            discrete_residual: discrete_residual(&assemble(coef)?, &f),
            s: mesh.s.clone(),
            f,
            f_r,
            z_outer,
            u_outer,
            z_inner,
            u_inner,
            c_outer,
            c_inner,
            flux,
            bc_residual,
            robin_residual,
            horizon_slope,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda1: f64,
    pub s: Vec<f64>,
    /// First eigenfunction, positive inside, `int f^2 = 1` for the nodal mass.
    pub eigenfunction: Vec<f64>,
    /// `f^T A f / f^T M f`, the discrete Rayleigh quotient.
    pub rayleigh_discrete: f64,
    /// `int |grad f|^2 + q f^2 / int f^2` for the piecewise linear
    /// interpolant. By the min-max principle this bounds the continuum
    /// `lambda_1` from above.
    pub rayleigh_interpolant: f64,
    pub positive: bool,
    pub iterations: usize,
}

const EIGEN_MAX_ITERATIONS: usize = 1000;

/// Quadratic forms `(int P f_x^2 + W q f^2, int W f^2)` of the interpolant.
fn interpolant_forms(coef: &Coefficients, f: &[f64]) -> Result<(f64, f64)> {
    let mesh = coef.mesh;
    let (xg, wg) = gauss_legendre(8);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..mesh.cells() {
        let (lo, hi) = (mesh.x[i], mesh.x[i + 1]);
        let slope = (f[i + 1] - f[i]) / (hi - lo);
        for (xi, wi) in xg.iter().zip(&wg) {
            let t = 0.5 * (xi + 1.0);
            let x = lo + t * (hi - lo);
            let v = f[i] + t * (f[i + 1] - f[i]);
            let w = 0.5 * (hi - lo) * wi;
            let wx = coef.w(x)?;
            num += w * (coef.p(x)? * slope * slope + wx * coef.q(x)? * v * v);
            den += w * wx * v * v;
        }
    }
    Ok((num, den))
}

/// `lambda_1(-Lap + q)` on the radial domain from `inner` to the slice `b`,
/// with Dirichlet data on slices and regularity at a center or horizon.
pub fn first_eigenvalue(
    space: &WarpedSpace,
    inner: &InnerBoundary,
    b: f64,
    cells: usize,
) -> Result<EigenResult> {
    let mesh = RadialMesh::new(space, inner, b, cells)?;
    let coef = Coefficients::new(space, &mesh)?;
    let sys = assemble(&coef)?;
    let nc = mesh.cells();
    let lo = usize::from(matches!(inner, InnerBoundary::Slice { .. }));
    let free = lo..nc;
    let diag = &sys.diag[free.clone()];
    let off = &sys.off[free.start..free.end - 1];
    let mass = &sys.mass[free.clone()];
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut y = diag[i] * x[i];
                if i > 0 {
                    y += off[i - 1] * x[i - 1];
                }
                if i + 1 < x.len() {
                    y += off[i] * x[i + 1];
                }
                y
            })
            .collect()
    };
    let dot_m = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).zip(mass).map(|((a, b), m)| a * b * m).sum()
    };
    let mut x: Vec<f64> = vec![1.0; diag.len()];
    let mut lambda = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < EIGEN_MAX_ITERATIONS {
        iterations += 1;
        let rhs: Vec<f64> = x.iter().zip(mass).map(|(a, m)| a * m).collect();
        let mut y = solve_tridiagonal(diag, off, &rhs)?;
        let norm = dot_m(&y, &y).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let ay = apply(&y);
        let next: f64 = y.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let change = (next - lambda).abs();
        x = y;
        lambda = next;
        if change <= 1e-14 * lambda.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        let ax = apply(&x);
        let residual = ax
            .iter()
            .zip(&x)
            .zip(mass)
            .map(|((a, v), m)| (a - lambda * m * v).abs())
            .fold(0.0, f64::max);
        return Err(Error::NotConverged {
            iterations,
            residual,
        });
    }
    let mut f = vec![0.0; nc + 1];
    f[free.clone()].copy_from_slice(&x);
    if f.iter().sum::<f64>() < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
    }
    let scale = space.base.volume.sqrt();
    f.iter_mut().for_each(|v| *v /= scale);
    let positive = f[lo..nc].iter().all(|&v| v > 0.0);
    let ax = apply(&f[free.clone()]);
    let rayleigh_discrete = f[free.clone()]
        .iter()
        .zip(&ax)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / dot_m(&f[free.clone()], &f[free]);
    let (num, den) = interpolant_forms(&coef, &f)?;
    Ok(EigenResult {
        lambda1: lambda,
        s: mesh.s.clone(),
        eigenfunction: f,
        rayleigh_discrete,
        rayleigh_interpolant: num / den,
        positive,
        iterations,
    })
}

/// Both sides of `int |grad f|^2 + q f^2 = int |grad f - f grad V / V|^2`
/// for the piecewise linear interpolant of mesh values `f`, which must vanish
/// on the first two and the last node.
pub fn decomposition_identity(
    space: &WarpedSpace,
    inner: &InnerBoundary,
    b: f64,
    f: &[f64],
) -> Result<(f64, f64)> {
    let mesh = RadialMesh::new(space, inner, b, f.len().saturating_sub(1))?;
    let n = f.len();
    if f[0] != 0.0 || f[1] != 0.0 || f[n - 1] != 0.0 {
        return Err(Error::InvalidParams(
            "mesh function must vanish on the first two and the last node".into(),
        ));
    }
    let coef = Coefficients::new(space, &mesh)?;
    let (lhs, _) = interpolant_forms(&coef, f)?;
    let (xg, wg) = gauss_legendre(8);
    let mut rhs = 0.0;
    for i in 1..mesh.cells() {
        let (lo, hi) = (mesh.x[i], mesh.x[i + 1]);
        let slope = (f[i + 1] - f[i]) / (hi - lo);
        for (xi, wi) in xg.iter().zip(&wg) {
            let t = 0.5 * (xi + 1.0);
            let x = lo + t * (hi - lo);
            let v = f[i] + t * (f[i + 1] - f[i]);
            let s = mesh.s_of(x);
            let j = space.radial_values(s)?;
            let g = slope / mesh.jacobian(x) - v * j.dphi / (2.0 * j.phi);
            rhs += 0.5 * (hi - lo) * wi * coef.w(x)? * j.phi * g * g;
        }
    }
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `lhs >= rhs`.
    AtLeast,
    /// `lhs = rhs`.
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl ChainStep {
    fn new(name: &str, relation: Relation, lhs: f64, rhs: f64) -> Self {
        ChainStep {
            name: name.to_string(),
            relation,
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }

    /// `slack >= -tol` for inequalities, `|slack| <= tol` for equalities.
    pub fn holds(&self, tol: f64) -> bool {
        match self.relation {
            Relation::AtLeast => self.slack >= -tol,
            Relation::Equal => self.slack.abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofChain {
    pub steps: Vec<ChainStep>,
    /// Magnitude used to make slacks relative.
    pub scale: f64,
}

impl ProofChain {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.steps.iter().all(|st| st.holds(rel_tol * self.scale))
    }

    pub fn max_abs_slack(&self) -> f64 {
        self.steps
            .iter()
            .map(|st| st.slack.abs())
            .fold(0.0, f64::max)
    }
}

/// Integrals on the outer slice `s = b` and the horizon.
struct SliceData {
    /// `int_Omega V`.
    volume: f64,
    /// `int_Sigma V`, `int_Sigma V H`, `int_Sigma V / H`.
    sigma_v: f64,
    sigma_vh: f64,
    sigma_v_over_h: f64,
    /// `int_N V_nu` and `s_0^n |N|` when the inner boundary is a horizon.
    horizon_vnu: f64,
    horizon_power: f64,
}

fn slice_data(space: &WarpedSpace, sol: &BvpSolution) -> Result<SliceData> {
    let n = space.n as i32;
    let b = *sol.s.last().expect("mesh is non-empty");
    let a = sol.s[0];
    let v = space.profile.potential(b)?;
    let h = (n as f64 - 1.0) * v / b;
    let area = space.base.volume * b.powi(n - 1);
    let horizon = sol.c_inner.is_some();
    let (horizon_vnu, horizon_power) = if horizon {
        let dphi = space.profile.jet(a)?.d[1];
        (
            -0.5 * dphi * space.base.volume * a.powi(n - 1),
            space.base.volume * a.powi(n),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(SliceData {
        volume: volume_of_potential(space, a, b),
        sigma_v: area * v,
        sigma_vh: area * v * h,
        sigma_v_over_h: area * v / h,
        horizon_vnu,
        horizon_power,
    })
}

/// `z^2 int_N V_nu (Lap V g - Hess V)(nu, nu) / V`, the horizon block of
/// the boundary terms for a function equal to `z` on the horizon.
fn horizon_block(space: &WarpedSpace, sol: &BvpSolution, d: &SliceData) -> Result<f64> {
    match sol.z_inner {
        Some(z) if sol.c_inner.is_some() => {
            let limit = space
                .horizon_limit_value()
                .ok_or_else(|| Error::NoHorizon(space.profile.label.clone()))?;
            Ok(z * z * d.horizon_vnu * limit)
        }
        _ => Ok(0.0),
    }
}

fn require_radial_outer(sol: &BvpSolution, kinds: &[BvpKind], what: &str) -> Result<()> {
    if !kinds.contains(&sol.kind) {
        return Err(Error::InvalidParams(format!(
            "{what} needs a {kinds:?} solution"
        )));
    }
    if sol.z_inner.is_some() && sol.c_inner.is_none() {
        return Err(Error::Unsupported(format!(
            "{what} with an inner slice boundary"
        )));
    }
    Ok(())
}

/// Steps of the Heintze-Karcher argument for the Dirichlet solution on the
/// domain bounded by the slice `s = b` and a center or horizon:
/// the trace inequality, the horizon substitution, the flux identity, the
/// Hoelder step and the final inequality.
pub fn hk_proof_chain(space: &WarpedSpace, sol: &BvpSolution) -> Result<ProofChain> {
    require_radial_outer(sol, &[BvpKind::DirichletHk], "the Heintze-Karcher chain")?;
    let d = slice_data(space, sol)?;
    let k = (space.n as f64 - 1.0) / space.n as f64;
    let u = sol.u_outer;
    let vhu2 = d.sigma_vh * u * u;
    let vu = d.sigma_v * u;
    let c_l = sol.c_inner.unwrap_or(0.0);
    let block = horizon_block(space, sol, &d)?;
    let a = d.volume + c_l * d.horizon_vnu;
    let steps = vec![
        ChainStep::new("trace", Relation::AtLeast, k * d.volume, vhu2 + block),
        ChainStep::new(
            "horizon",
            Relation::Equal,
            vhu2 + block,
            vhu2 - k * c_l * d.horizon_vnu,
        ),
        ChainStep::new("flux", Relation::Equal, vu, a),
        ChainStep::new(
            "hoelder",
            Relation::AtLeast,
            vhu2 * d.sigma_v_over_h,
            vu * vu,
        ),
        ChainStep::new(
            "heintze-karcher",
            Relation::AtLeast,
            k * a * d.sigma_v_over_h,
            vhu2 * d.sigma_v_over_h,
        ),
    ];
    Ok(ProofChain {
        steps,
        scale: d.volume.abs().max(a * d.sigma_v_over_h).max(1.0),
    })
}

/// Steps of the Minkowski argument for a Neumann solution on the domain
/// bounded by the slice `s = b` and a center or horizon: the trace
/// inequality with the horizon block, the Robin substitution and the final
/// inequality `(int_Sigma V)^2 >= n/(n-1) (int V + s_0^n |N|/n) int H V`.
pub fn minkowski_proof_chain(space: &WarpedSpace, sol: &BvpSolution) -> Result<ProofChain> {
    require_radial_outer(
        sol,
        &[BvpKind::NeumannMinkowski, BvpKind::NeumannHorizon],
        "the Minkowski chain",
    )?;
    let d = slice_data(space, sol)?;
    let nf = space.n as f64;
    let k = (nf - 1.0) / nf;
    let b = *sol.s.last().expect("non-empty");
    let j = space.radial_values(b)?;
    let v = j.phi.sqrt();
    let vnu = 0.5 * j.dphi;
    let robin = sol.u_outer - vnu / v * sol.z_outer;
    let block = horizon_block(space, sol, &d)?;
    let c = sol.c_outer.expect("Neumann kinds set c");
    let mass = d.volume + d.horizon_power / nf;
    let steps = vec![
        ChainStep::new(
            "trace",
            Relation::AtLeast,
            k * d.volume,
            d.sigma_vh * robin * robin + block,
        ),
        ChainStep::new(
            "robin",
            Relation::Equal,
            d.sigma_vh * robin * robin,
            d.sigma_vh * c * c,
        ),
        ChainStep::new("horizon", Relation::Equal, block, -k / nf * d.horizon_power),
        ChainStep::new(
            "minkowski",
            Relation::AtLeast,
            d.sigma_v * d.sigma_v,
            mass * d.sigma_vh / k,
        ),
    ];
    Ok(ProofChain {
        steps,
        scale: (d.sigma_v * d.sigma_v).max(d.volume.abs()).max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinName;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn space(name: BuiltinName, n: usize, m: f64) -> WarpedSpace {
        let mut p = BTreeMap::new();
        if !name.is_space_form() {
            p.insert("m".to_string(), m);
        }
        WarpedSpace::builtin(name, n, &p, None).unwrap()
    }

    fn euclid() -> WarpedSpace {
        space(BuiltinName::Euclidean, 3, 0.0)
    }

    fn solve(
        sp: &WarpedSpace,
        kind: BvpKind,
        inner: InnerBoundary,
        b: f64,
        mesh: usize,
    ) -> BvpSolution {
        RadialBvp::new(kind, inner, b)
            .with_mesh(mesh)
            .solve(sp)
            .unwrap()
    }

    fn max_error(sol: &BvpSolution, exact: impl Fn(f64) -> f64) -> f64 {
        sol.s
            .iter()
            .zip(&sol.f)
            .map(|(&s, f)| (f - exact(s)).abs())
            .fold(0.0, f64::max)
    }

    /// `max |f_N - f_2N|` over the common nodes.
    fn self_convergence(sp: &WarpedSpace, kind: BvpKind, inner: InnerBoundary, b: f64) -> Vec<f64> {
        let sols: Vec<BvpSolution> = [64, 128, 256, 512]
            .iter()
            .map(|&m| solve(sp, kind, inner.clone(), b, m))
            .collect();
        sols.windows(2)
            .map(|w| {
                w[0].f
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (f - w[1].f[2 * i]).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn orders(d: &[f64]) -> Vec<f64> {
        d.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    #[test]
    fn euclidean_dirichlet_ball_matches_the_closed_form() {
        let sp = euclid();
        for m in [16, 256, DEFAULT_MESH] {
            let sol = solve(&sp, BvpKind::DirichletHk, InnerBoundary::Center, 1.0, m);
            assert!(max_error(&sol, |s| (s * s - 1.0) / 6.0) < 1e-12);
            assert!((sol.f[0] + 1.0 / 6.0).abs() < 1e-12);
            assert!(sol.bc_residual <= 1e-10);
            assert!(sol.flux.residual.abs() < 1e-12 * sol.flux.volume_integral);
        }
    }

    #[test]
    fn dirichlet_self_convergence_is_second_order() {
        let ads = space(BuiltinName::AdsSchwarzschild, 3, 1.0);
        let cases = [
            (
                space(BuiltinName::Hyperbolic, 3, 0.0),
                InnerBoundary::Center,
                2.0,
            ),
            (
                space(BuiltinName::Hemisphere, 4, 0.0),
                InnerBoundary::Center,
                0.9,
            ),
            (
                ads.clone(),
                InnerBoundary::Horizon,
                ads.horizon().unwrap() + 1.0,
            ),
        ];
        for (sp, inner, b) in cases {
            let o = orders(&self_convergence(&sp, BvpKind::DirichletHk, inner, b));
            assert!(
                o.iter().all(|o| (1.8..=2.2).contains(o)),
                "{}: {o:?}",
                sp.profile.label
            );
        }
        let o = orders(&self_convergence(
            &ads,
            BvpKind::NeumannHorizon,
            InnerBoundary::Horizon,
            2.0,
        ));
        assert!(
            o.iter().all(|o| (1.8..=2.2).contains(o)),
            "neumann-horizon: {o:?}"
        );
    }

    #[test]
    fn hemisphere_dirichlet_satisfies_the_stencil() {
        let sp = space(BuiltinName::Hemisphere, 3, 0.0);
        let sol = solve(
            &sp,
            BvpKind::DirichletHk,
            InnerBoundary::Center,
            0.8,
            DEFAULT_MESH,
        );
        assert!(sol.discrete_residual <= 1e-8, "{}", sol.discrete_residual);
        let coarse = solve(
            &sp,
            BvpKind::DirichletHk,
            InnerBoundary::Center,
            0.8,
            DEFAULT_MESH / 4,
        );
        let ratio = coarse.pde_residual / sol.pde_residual;
        assert!(
            ratio > 12.0 && ratio < 20.0,
            "{} {}",
            coarse.pde_residual,
            sol.pde_residual
        );
        assert!(sol.f[1..sol.f.len() - 1].iter().all(|&v| v < 0.0));
    }

    #[test]
    fn ads_horizon_flux_identity() {
        let sp = space(BuiltinName::AdsSchwarzschild, 3, 1.0);
        let s0 = sp.horizon().unwrap();
        let sol = solve(
            &sp,
            BvpKind::DirichletHk,
            InnerBoundary::Horizon,
            s0 + 1.0,
            DEFAULT_MESH,
        );
        let c_l = horizon_value(&sp).unwrap();
        assert_eq!(sol.c_inner, Some(c_l));
        assert!(sol.bc_residual <= 1e-10);
        let fl = sol.flux;
        assert!(fl.residual.abs() <= 1e-6 * fl.volume_integral, "{fl:?}");
        // the horizon flux is -c_l int_N V_nu
        let vnu = -0.5 * sp.profile.jet(s0).unwrap().d[1] * sp.base.volume * s0 * s0;
        assert!((fl.inner_flux + c_l * vnu).abs() < 1e-12 * fl.volume_integral);
        assert!(sol.discrete_residual < 1e-8, "{}", sol.discrete_residual);
        assert!(sol.pde_residual < 1e-4, "{}", sol.pde_residual);
        assert_eq!(sol.horizon_slope, Some(-sol.u_inner.unwrap()));
    }

    #[test]
    fn ads_horizon_value() {
        let sp = space(BuiltinName::AdsSchwarzschild, 3, 1.0);
        let s0 = sp.horizon().unwrap();
        let expect = -2.0 * s0 / (3.0 * (2.0 * s0 + 1.0 / (s0 * s0)));
        assert!((horizon_value(&sp).unwrap() - expect).abs() < 1e-13);
        assert!(horizon_value(&euclid()).is_err());
    }

    #[test]
    fn neumann_euclidean_ball_is_exact() {
        let sp = euclid();
        let sol = solve(
            &sp,
            BvpKind::NeumannMinkowski,
            InnerBoundary::Center,
            1.5,
            64,
        );
        assert!(max_error(&sol, |s| (s * s - 2.25) / 6.0) < 1e-13);
        // c = |Omega| / |Sigma| = b / n
        assert!((sol.c_outer.unwrap() - 0.5).abs() < 1e-14);
        assert!(sol.bc_residual <= 1e-10);
        assert!(sol.flux.residual.abs() <= 1e-10);
    }

    #[test]
    fn neumann_flux_identities() {
        for (name, b) in [
            (BuiltinName::Hyperbolic, 1.5),
            (BuiltinName::Hemisphere, 0.7),
        ] {
            let sp = space(name, 3, 0.0);
            let sol = solve(
                &sp,
                BvpKind::NeumannMinkowski,
                InnerBoundary::Center,
                b,
                DEFAULT_MESH,
            );
            assert!(
                sol.flux.residual.abs() <= 1e-8 * sol.flux.volume_integral,
                "{name:?}"
            );
            assert!(sol.bc_residual <= 1e-10);
            assert!(sol.pde_residual <= 1e-5, "{name:?} {}", sol.pde_residual);
        }
        let sp = space(BuiltinName::Schwarzschild, 3, 1.0);
        let sol = solve(
            &sp,
            BvpKind::NeumannMinkowski,
            InnerBoundary::Slice { s: 1.5 },
            3.0,
            DEFAULT_MESH,
        );
        assert!(sol.flux.residual.abs() <= 1e-8 * sol.flux.volume_integral);
        assert!(sol.u_inner.unwrap().abs() < 1e-9 || sol.flux.inner_flux.abs() < 1e-12);
    }

    #[test]
    fn neumann_horizon_problem() {
        let sp = space(BuiltinName::AdsSchwarzschild, 3, 1.0);
        let s0 = sp.horizon().unwrap();
        let sol = solve(
            &sp,
            BvpKind::NeumannHorizon,
            InnerBoundary::Horizon,
            s0 + 1.5,
            DEFAULT_MESH,
        );
        let c0 = -2.0 * s0 / (3.0 * (2.0 * s0 + 1.0 / (s0 * s0)));
        assert!((sol.z_inner.unwrap() - c0).abs() < 1e-13);
        assert!(sol.flux.residual.abs() <= 1e-6 * sol.flux.volume_integral);
        let robin = sol.robin_residual.unwrap();
        assert!(robin <= 1e-6 * sol.c_outer.unwrap().abs(), "{robin}");
        let err =
            RadialBvp::new(BvpKind::NeumannHorizon, InnerBoundary::Center, 1.0).solve(&euclid());
        assert!(err.is_err());
    }

    #[test]
    fn euclidean_ball_eigenvalue_converges_to_pi_squared() {
        let sp = euclid();
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&m| {
                let e = first_eigenvalue(&sp, &InnerBoundary::Center, 1.0, m).unwrap();
                assert!((e.rayleigh_discrete - e.lambda1).abs() <= 1e-8 * e.lambda1);
                assert!(e.rayleigh_interpolant >= PI * PI);
                (e.lambda1 - PI * PI).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "{errs:?}");
        }
    }

    #[test]
    fn eigenvalues_are_positive_on_proper_domains() {
        let cases = [
            (
                space(BuiltinName::Hyperbolic, 3, 0.0),
                InnerBoundary::Center,
                2.0,
            ),
            (
                space(BuiltinName::Hemisphere, 4, 0.0),
                InnerBoundary::Center,
                0.9,
            ),
            (
                space(BuiltinName::Schwarzschild, 3, 1.0),
                InnerBoundary::Slice { s: 1.2 },
                4.0,
            ),
            (
                space(BuiltinName::AdsSchwarzschild, 3, 1.0),
                InnerBoundary::Horizon,
                3.0,
            ),
        ];
        for (sp, inner, b) in cases {
            let e = first_eigenvalue(&sp, &inner, b, 512).unwrap();
            assert!(
                e.lambda1 > 0.0 && e.positive,
                "{}: {}",
                sp.profile.label,
                e.lambda1
            );
            assert!((e.rayleigh_discrete - e.lambda1).abs() <= 1e-8 * e.lambda1);
            let mesh = RadialMesh::new(&sp, &inner, b, 512).unwrap();
            let coef = Coefficients::new(&sp, &mesh).unwrap();
            let (_, den) = interpolant_forms(&coef, &e.eigenfunction).unwrap();
            assert!((den * sp.base.volume - 1.0).abs() < 1e-3, "{den}");
        }
    }

    #[test]
    fn eigenvalue_decreases_with_the_domain() {
        let sp = space(BuiltinName::Hyperbolic, 3, 0.0);
        let l: Vec<f64> = [0.8, 1.0, 1.2]
            .iter()
            .map(|&b| {
                first_eigenvalue(&sp, &InnerBoundary::Center, b, 512)
                    .unwrap()
                    .lambda1
            })
            .collect();
        assert!(l[0] > l[1] && l[1] > l[2], "{l:?}");
        let s0 = space(BuiltinName::Schwarzschild, 3, 1.0);
        let a = first_eigenvalue(&s0, &InnerBoundary::Slice { s: 1.5 }, 3.0, 512).unwrap();
        let b = first_eigenvalue(&s0, &InnerBoundary::Slice { s: 1.2 }, 3.0, 512).unwrap();
        assert!(a.lambda1 > b.lambda1);
    }

    #[test]
    fn decomposition_identity_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases = [
            (
                space(BuiltinName::Hyperbolic, 3, 0.0),
                InnerBoundary::Center,
                1.5,
            ),
            (
                space(BuiltinName::Hemisphere, 3, 0.0),
                InnerBoundary::Center,
                0.9,
            ),
            (
                space(BuiltinName::AdsSchwarzschild, 4, 1.0),
                InnerBoundary::Horizon,
                2.5,
            ),
        ];
        for (sp, inner, b) in cases {
            for _ in 0..5 {
                let mut f: Vec<f64> = (0..65).map(|_| rng.random_range(-1.0..1.0)).collect();
                f[0] = 0.0;
                f[1] = 0.0;
                f[64] = 0.0;
                let (lhs, rhs) = decomposition_identity(&sp, &inner, b, &f).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * lhs.abs(),
                    "{}: {lhs} {rhs}",
                    sp.profile.label
                );
            }
        }
    }

    #[test]
    fn hk_chain_is_an_equality_on_slices() {
        let cases = [
            (euclid(), InnerBoundary::Center, 1.0),
            (
                space(BuiltinName::Hyperbolic, 3, 0.0),
                InnerBoundary::Center,
                1.3,
            ),
            (
                space(BuiltinName::AdsSchwarzschild, 3, 1.0),
                InnerBoundary::Horizon,
                2.0,
            ),
            (
                space(BuiltinName::Schwarzschild, 3, 1.0),
                InnerBoundary::Horizon,
                3.0,
            ),
        ];
        for (sp, inner, b) in cases {
            let sol = solve(&sp, BvpKind::DirichletHk, inner, b, DEFAULT_MESH);
            let chain = hk_proof_chain(&sp, &sol).unwrap();
            assert!(chain.holds(1e-7), "{}: {chain:?}", sp.profile.label);
            assert!(
                chain.max_abs_slack() <= 1e-7 * chain.scale,
                "{}: {chain:?}",
                sp.profile.label
            );
        }
    }

    #[test]
    fn minkowski_chain_is_an_equality_on_slices() {
        let s0 = space(BuiltinName::AdsSchwarzschild, 3, 1.0);
        let h = s0.horizon().unwrap();
        let cases = [
            (
                euclid(),
                BvpKind::NeumannMinkowski,
                InnerBoundary::Center,
                1.0,
            ),
            (
                space(BuiltinName::Hemisphere, 3, 0.0),
                BvpKind::NeumannMinkowski,
                InnerBoundary::Center,
                0.6,
            ),
            (s0, BvpKind::NeumannHorizon, InnerBoundary::Horizon, h + 1.0),
        ];
        for (sp, kind, inner, b) in cases {
            let sol = solve(&sp, kind, inner, b, DEFAULT_MESH);
            let chain = minkowski_proof_chain(&sp, &sol).unwrap();
            assert!(
                chain.max_abs_slack() <= 1e-7 * chain.scale,
                "{}: {chain:?}",
                sp.profile.label
            );
        }
    }

    #[test]
    fn chains_reject_mismatched_solutions() {
        let sp = euclid();
        let sol = solve(
            &sp,
            BvpKind::NeumannMinkowski,
            InnerBoundary::Center,
            1.0,
            64,
        );
        assert!(hk_proof_chain(&sp, &sol).is_err());
        let sol = solve(
            &sp,
            BvpKind::NeumannMinkowski,
            InnerBoundary::Slice { s: 0.5 },
            1.0,
            64,
        );
        assert!(minkowski_proof_chain(&sp, &sol).is_err());
    }

    #[test]
    fn dirichlet_is_rejected_on_an_inner_slice() {
        let e = RadialBvp::new(BvpKind::DirichletHk, InnerBoundary::Slice { s: 0.5 }, 1.0)
            .solve(&euclid());
        assert!(e.is_err());
    }
}
