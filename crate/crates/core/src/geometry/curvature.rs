//! Metric, connection, curvature and potential tensors of a warped space.

use serde::{Deserialize, Serialize};

use super::space::{Point, WarpedSpace};
use super::tensors::{
    christoffel_from_jets, kulkarni_nomizu, ricci_from_riemann, riemann_from_christoffel_fd,
    FdScheme, Rank, TensorValue, WarpedTensor,
};
use crate::error::{Error, Result};
use crate::jet::{Jet2, Jet3, Taylor};

/// `s`, `phi`, `phi'`, `phi''` as jets in `s`, generic so the same formula
/// yields values (`f64`) or values with one reliable derivative (`Jet3`).
#[derive(Clone, Copy, Debug)]
pub struct RadialJets<T> {
    pub s: T,
    pub phi: T,
    pub dphi: T,
    pub ddphi: T,
}

impl RadialJets<Jet3> {
    pub fn values(&self) -> RadialJets<f64> {
        RadialJets {
            s: self.s.d[0],
            phi: self.phi.d[0],
            dphi: self.dphi.d[0],
            ddphi: self.ddphi.d[0],
        }
    }
}

/// Curvature at a point in coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    /// `Rm_abcd` with `Rm_abab` the sectional curvature times `|a ^ b|^2`.
    pub riemann: TensorValue,
    pub ricci: TensorValue,
    pub scalar: f64,
}

impl Curvature {
    /// Largest componentwise difference, relative to the larger magnitude.
    pub fn relative_diff(&self, other: &Curvature) -> f64 {
        let scale = self
            .riemann
            .max_abs()
            .max(self.ricci.max_abs())
            .max(self.scalar.abs())
            .max(1.0);
        self.riemann
            .max_abs_diff(&other.riemann)
            .max(self.ricci.max_abs_diff(&other.ricci))
            .max((self.scalar - other.scalar).abs())
            / scale
    }
}

/// `V`, its coordinate gradient and its Hessian (or `Hessian / V`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialJet {
    pub v: f64,
    pub grad: Vec<f64>,
    pub hess: TensorValue,
    /// Trace of `hess` with respect to the metric.
    pub laplacian: f64,
    /// Whether `hess` and `laplacian` are divided by `V`.
    pub ratio: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstaticMargin {
    /// Smallest eigenvalue of `VQ` over the samples.
    pub min_eigenvalue: f64,
    pub argmin_s: f64,
    /// Whether `phi'/s - (n-2)(rho-phi)/s^2` is non-decreasing on the samples.
    pub brendle_monotone: bool,
    /// Most negative successive difference of the Brendle function.
    pub brendle_worst_step: f64,
    pub samples: Vec<f64>,
    pub brendle: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicciEigen {
    pub psi: f64,
    pub phi: f64,
    /// Max norm of `Ric + Psi g + Phi dr^2`.
    pub residual: f64,
    /// Largest off-diagonal Ricci component.
    pub cross_terms: f64,
}

// Coefficient formulas. Each returns the `(g_R, g_T)` coefficients.

pub(crate) fn hess_ratio_coeffs<T: Taylor>(j: &RadialJets<T>) -> (T, T) {
    let half = j.s.constant_like(0.5);
    (half * j.ddphi, half * j.dphi / j.s)
}

pub(crate) fn q_coeff<T: Taylor>(n: usize, j: &RadialJets<T>) -> T {
    let half = j.s.constant_like(0.5);
    let nm1 = j.s.constant_like(n as f64 - 1.0);
    half * j.ddphi + nm1 * half * j.dphi / j.s
}

pub(crate) fn ricci_coeffs<T: Taylor>(n: usize, rho: f64, j: &RadialJets<T>) -> (T, T) {
    let c = |x: f64| j.s.constant_like(x);
    let krad = -(c(0.5) * j.dphi / j.s);
    let ktan = (c(rho) - j.phi) / (j.s * j.s);
    (c(n as f64 - 1.0) * krad, krad + c(n as f64 - 2.0) * ktan)
}

/// `Q = q g - Hess V / V + Ric`, straight from the definition.
pub(crate) fn q_coeffs<T: Taylor>(n: usize, rho: f64, j: &RadialJets<T>) -> (T, T) {
    let q = q_coeff(n, j);
    let (hr, ht) = hess_ratio_coeffs(j);
    let (rr, rt) = ricci_coeffs(n, rho, j);
    (q - hr + rr, q - ht + rt)
}

/// `P = (Hess V - Lap V g) / V = Ric - Q`.
pub(crate) fn p_potential_coeffs<T: Taylor>(n: usize, j: &RadialJets<T>) -> (T, T) {
    let q = q_coeff(n, j);
    let (hr, ht) = hess_ratio_coeffs(j);
    (hr - q, ht - q)
}

pub(crate) fn scalar_curvature_formula<T: Taylor>(n: usize, rho: f64, j: &RadialJets<T>) -> T {
    let c = |x: f64| j.s.constant_like(x);
    let nf = n as f64;
    -(c(nf - 1.0) * j.dphi / j.s) + c((nf - 1.0) * (nf - 2.0)) * (c(rho) - j.phi) / (j.s * j.s)
}

/// Two warped tensors: the values and their `s`-derivatives.
/// Step of the finite difference in [`WarpedSpace::warped_divergence`].
pub const DIVERGENCE_STEP: f64 = 1e-4;

/// Closed-form warped tensors that can be differentiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpedField {
    Ricci,
    Q,
    /// `(Hess V - Lap V g) / V`.
    PPotential,
}

pub type WarpedWithDerivative = (WarpedTensor, WarpedTensor);

fn split(pair: (Jet3, Jet3)) -> WarpedWithDerivative {
    (
        WarpedTensor::new(pair.0.d[0], pair.1.d[0]),
        WarpedTensor::new(pair.0.d[1], pair.1.d[1]),
    )
}

impl WarpedSpace {
    fn check_positive_s(&self, s: f64) -> Result<()> {
        if !(s > 0.0) || !self.profile.contains(s) {
            return Err(Error::OutOfDomain {
                s,
                min: self.profile.s_min.max(f64::MIN_POSITIVE),
                max: self.profile.s_max,
            });
        }
        Ok(())
    }

    pub fn radial_jets(&self, s: f64) -> Result<RadialJets<Jet3>> {
        self.check_positive_s(s)?;
        let phi = self.profile.jet(s)?;
        let dphi = phi.derivative();
        Ok(RadialJets {
            s: Jet3::variable(s),
            phi,
            dphi,
            ddphi: dphi.derivative(),
        })
    }

    pub fn radial_values(&self, s: f64) -> Result<RadialJets<f64>> {
        Ok(self.radial_jets(s)?.values())
    }

    /// `q = Lap V / V = phi''/2 + (n-1) phi' / (2 s)`.
    pub fn q_potential(&self, s: f64) -> Result<f64> {
        Ok(q_coeff(self.n, &self.radial_values(s)?))
    }

    pub fn hess_ratio_warped(&self, s: f64) -> Result<WarpedTensor> {
        let (a, b) = hess_ratio_coeffs(&self.radial_values(s)?);
        Ok(WarpedTensor::new(a, b))
    }

    pub fn ricci_warped(&self, s: f64) -> Result<WarpedTensor> {
        let (a, b) = ricci_coeffs(self.n, self.base.rho, &self.radial_values(s)?);
        Ok(WarpedTensor::new(a, b))
    }

    /// `Q` in warped form. Finite at a horizon.
    pub fn q_warped(&self, s: f64) -> Result<WarpedTensor> {
        let (a, b) = q_coeffs(self.n, self.base.rho, &self.radial_values(s)?);
        Ok(WarpedTensor::new(a, b))
    }

    pub fn q_warped_with_derivative(&self, s: f64) -> Result<WarpedWithDerivative> {
        Ok(split(q_coeffs(
            self.n,
            self.base.rho,
            &self.radial_jets(s)?,
        )))
    }

    pub fn p_potential_with_derivative(&self, s: f64) -> Result<WarpedWithDerivative> {
        Ok(split(p_potential_coeffs(self.n, &self.radial_jets(s)?)))
    }

    pub fn warped_with_derivative(
        &self,
        which: WarpedField,
        s: f64,
    ) -> Result<WarpedWithDerivative> {
        let j = self.radial_jets(s)?;
        Ok(split(match which {
            WarpedField::Ricci => ricci_coeffs(self.n, self.base.rho, &j),
            WarpedField::Q => q_coeffs(self.n, self.base.rho, &j),
            WarpedField::PPotential => p_potential_coeffs(self.n, &j),
        }))
    }

    /// Divergence of a rotationally symmetric tensor `a g_R + b g_T`.
    ///
    /// Returns `(d, div div)` where `div = d e_r` and
    /// `d = sqrt(phi) (a' + (n-1)(a-b)/s)`. The derivative `a'` comes from
    /// the jets; `d'` is a fourth-order central difference with step
    /// `DIVERGENCE_STEP`, shrunk near the ends of the profile interval.
    pub fn warped_divergence(&self, which: WarpedField, s: f64) -> Result<(f64, f64)> {
        let nm1 = self.n as f64 - 1.0;
        let d_at = |x: f64| -> Result<f64> {
            let (v, dv) = self.warped_with_derivative(which, x)?;
            let phi = self.profile.phi(x)?;
            Ok(phi.sqrt() * (dv.rad + nm1 * (v.rad - v.tan) / x))
        };
        let pr = &self.profile;
        let room = (s - pr.s_min).min(pr.s_max - s);
        let h = DIVERGENCE_STEP.min(0.25 * room);
        if !(h > 0.0) {
            return Err(Error::OutOfDomain {
                s,
                min: pr.s_min,
                max: pr.s_max,
            });
        }
        let d = d_at(s)?;
        let dd = FdScheme::fourth(h).derivative(s, d_at)?;
        let phi = pr.phi(s)?;
        Ok((d, phi.sqrt() * (dd + nm1 * d / s)))
    }

    pub fn scalar_curvature(&self, s: f64) -> Result<f64> {
        Ok(scalar_curvature_formula(
            self.n,
            self.base.rho,
            &self.radial_values(s)?,
        ))
    }

    pub fn scalar_curvature_derivative(&self, s: f64) -> Result<f64> {
        Ok(scalar_curvature_formula(self.n, self.base.rho, &self.radial_jets(s)?).d[1])
    }

    /// `(Lap V g - Hess V)(nu, nu) / V` for the unit radial normal, which
    /// equals `(n-1) phi' / (2 s)` on every slice including a horizon.
    pub fn radial_static_value(&self, s: f64) -> Result<f64> {
        let j = self.radial_values(s)?;
        Ok(q_coeff(self.n, &j) - hess_ratio_coeffs(&j).0)
    }

    /// `(n-1) phi'(s_0) / (2 s_0)`, the horizon value of [`Self::radial_static_value`].
    pub fn horizon_limit_value(&self) -> Option<f64> {
        let s0 = self.horizon()?;
        let j = self.profile.jet(s0).ok()?;
        Some((self.n as f64 - 1.0) * j.d[1] / (2.0 * s0))
    }

    pub fn brendle_function(&self, s: f64) -> Result<f64> {
        let j = self.radial_values(s)?;
        Ok(j.dphi / s - (self.n as f64 - 2.0) * (self.base.rho - j.phi) / (s * s))
    }

    /// Sectional curvatures `(tangential, radial)`.
    pub fn sectional(&self, s: f64) -> Result<(f64, f64)> {
        let j = self.radial_values(s)?;
        Ok(((self.base.rho - j.phi) / (s * s), -0.5 * j.dphi / s))
    }

    /// Diagonal metric jets in the variables `(s, theta)`.
    pub fn metric_jets(&self, p: &Point) -> Result<Vec<Jet2>> {
        self.check_interior(p)?;
        let n = self.n;
        let s = Jet2::variable(n, 0, p.s);
        let theta: Vec<Jet2> = (0..n - 1)
            .map(|k| Jet2::variable(n, k + 1, p.theta[k]))
            .collect();
        let phi = s.compose(self.profile.jet(p.s)?.d);
        let mut diag = vec![s.constant_like(1.0) / phi];
        for g in self.base.metric_diag(&theta) {
            diag.push(s * s * g);
        }
        Ok(diag)
    }

    fn dense(diag: &[Jet2]) -> Vec<Vec<Jet2>> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            diag[i]
                        } else {
                            Jet2::constant(n, 0.0)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `g` and `g^{-1}`.
    pub fn metric_at(&self, p: &Point) -> Result<(TensorValue, TensorValue)> {
        let diag = self.metric_jets(p)?;
        let n = self.n;
        let g = TensorValue::from_fn2(n, |i, j| if i == j { diag[i].value } else { 0.0 });
        let ginv = TensorValue::from_fn2(n, |i, j| if i == j { 1.0 / diag[i].value } else { 0.0 });
        Ok((g, ginv))
    }

    /// Christoffel symbols `G^k_ij` from metric jets.
    pub fn christoffel_at(&self, p: &Point) -> Result<TensorValue> {
        let diag = self.metric_jets(p)?;
        Ok(christoffel_from_jets(&Self::dense(&diag))?.2)
    }

    /// Christoffel symbols from finite differences of the metric values.
    pub fn christoffel_oracle_at(&self, p: &Point, fd: FdScheme) -> Result<TensorValue> {
        self.check_reach(p, fd)?;
        let n = self.n;
        let x = p.coords();
        let metric = |y: &[f64]| -> Result<Vec<f64>> {
            Ok(self.metric_at(&Point::from_coords(y))?.0.components)
        };
        let dg: Vec<Vec<f64>> = (0..n)
            .map(|i| fd.partial(&x, i, metric))
            .collect::<Result<_>>()?;
        let (_, ginv) = self.metric_at(p)?;
        let mut gamma = TensorValue::zeros(Rank::Mixed12, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += ginv.get2(k, l)
                            * (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j]);
                    }
                    gamma.set3(k, i, j, 0.5 * acc);
                }
            }
        }
        Ok(gamma)
    }

    fn check_reach(&self, p: &Point, fd: FdScheme) -> Result<()> {
        self.check_interior(p)?;
        let r = fd.reach();
        let mut shifted = p.clone();
        for ds in [-r, r] {
            shifted.s = p.s + ds;
            if self.check_interior(&shifted).is_err() {
                return Err(Error::OutOfDomain {
                    s: p.s,
                    min: self.profile.s_min + r,
                    max: self.profile.s_max - r,
                });
            }
        }
        for k in 0..p.theta.len() {
            if !self.base.is_periodic(k) {
                let t = p.theta[k];
                if t - r <= 0.0 || t + r >= std::f64::consts::PI {
                    return Err(Error::InvalidParams(format!(
                        "angle {t} within the finite-difference reach of the chart edge"
                    )));
                }
            }
        }
        Ok(())
    }

    fn radial_and_tangential(&self, p: &Point) -> Result<(TensorValue, TensorValue)> {
        let (g, _) = self.metric_at(p)?;
        let n = self.n;
        let gr = TensorValue::from_fn2(n, |i, j| if i == 0 && j == 0 { g.get2(0, 0) } else { 0.0 });
        let gt = TensorValue::from_fn2(n, |i, j| if i > 0 && i == j { g.get2(i, j) } else { 0.0 });
        Ok((gr, gt))
    }

    /// Closed-form curvature through the sectional curvatures of the slices.
    pub fn curvature_at(&self, p: &Point) -> Result<Curvature> {
        let (ktan, krad) = self.sectional(p.s)?;
        let (gr, gt) = self.radial_and_tangential(p)?;
        let mut riemann = kulkarni_nomizu(&gt, &gt);
        let mixed = kulkarni_nomizu(&gr, &gt);
        for (r, m) in riemann.components.iter_mut().zip(&mixed.components) {
            *r = 0.5 * ktan * *r + krad * m;
        }
        let (_, ginv) = self.metric_at(p)?;
        let ricci = ricci_from_riemann(&riemann, &ginv);
        let scalar = ricci.trace_with(&ginv);
        Ok(Curvature {
            riemann,
            ricci,
            scalar,
        })
    }

    /// Curvature from finite differences of [`Self::christoffel_at`].
    pub fn curvature_oracle_at(&self, p: &Point, fd: FdScheme) -> Result<Curvature> {
        self.check_reach(p, fd)?;
        let (g, ginv) = self.metric_at(p)?;
        let riemann = riemann_from_christoffel_fd(&p.coords(), fd, &g, |y| {
            self.christoffel_at(&Point::from_coords(y))
        })?;
        let ricci = ricci_from_riemann(&riemann, &ginv);
        let scalar = ricci.trace_with(&ginv);
        Ok(Curvature {
            riemann,
            ricci,
            scalar,
        })
    }

    /// Potential, gradient and Hessian. With `ratio` the Hessian and
    /// Laplacian are divided by `V`.
    pub fn potential_jet(&self, p: &Point, ratio: bool) -> Result<PotentialJet> {
        self.check_interior(p)?;
        let j = self.radial_values(p.s)?;
        let v = j.phi.sqrt();
        if v == 0.0 {
            return Err(Error::VanishingPotential(format!("s = {}", p.s)));
        }
        let mut grad = vec![0.0; self.n];
        grad[0] = 0.5 * j.dphi / v;
        let w = self.hess_ratio_warped(p.s)?;
        let scale = if ratio { 1.0 } else { v };
        let gn = self.base.metric_diag(&p.theta);
        let hess = w.scale(scale).to_coords(j.phi, p.s, &gn);
        let laplacian = w.trace(self.n) * scale;
        Ok(PotentialJet {
            v,
            grad,
            hess,
            laplacian,
            ratio,
        })
    }

    pub fn q_tensor_at(&self, p: &Point) -> Result<TensorValue> {
        self.check_interior(p)?;
        let phi = self.profile.phi(p.s)?;
        Ok(self
            .q_warped(p.s)?
            .to_coords(phi, p.s, &self.base.metric_diag(&p.theta)))
    }

    /// Sub-static margin and Brendle monotonicity on `samples` midpoints.
    pub fn substatic_margin(&self, samples: usize) -> Result<SubstaticMargin> {
        if samples < 8 {
            return Err(Error::InvalidParams("at least 8 samples are needed".into()));
        }
        let pr = &self.profile;
        let lo = pr.s_min;
        let width = pr.s_max - lo;
        let mut min_eig = f64::INFINITY;
        let mut argmin = lo;
        let mut ss = Vec::with_capacity(samples);
        let mut bs = Vec::with_capacity(samples);
        for i in 0..samples {
            let s = lo + width * (i as f64 + 0.5) / samples as f64;
            let v = pr.potential(s)?;
            let e = self.q_warped(s)?.scale(v).min_eigenvalue();
            if e < min_eig {
                min_eig = e;
                argmin = s;
            }
            ss.push(s);
            bs.push(self.brendle_function(s)?);
        }
        let worst = bs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        Ok(SubstaticMargin {
            min_eigenvalue: min_eig,
            argmin_s: argmin,
            brendle_monotone: worst >= -1e-10,
            brendle_worst_step: worst,
            samples: ss,
            brendle: bs,
        })
    }

    /// `Psi`, `Phi` of `Ric = -Psi g - Phi dr^2`, checked against the
    /// contracted Riemann tensor.
    pub fn ricci_eigenstructure_at(&self, p: &Point) -> Result<RicciEigen> {
        let j = self.radial_values(p.s)?;
        let nf = self.n as f64;
        let s = p.s;
        let rho = self.base.rho;
        let psi = 0.5 * j.dphi / s - (nf - 2.0) * (rho - j.phi) / (s * s);
        let phi_c = (nf - 2.0) * (0.5 * j.dphi / s + (rho - j.phi) / (s * s));
        let curv = self.curvature_at(p)?;
        let (g, _) = self.metric_at(p)?;
        let mut residual: f64 = 0.0;
        let mut cross: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let dr2 = if a == 0 && b == 0 { g.get2(0, 0) } else { 0.0 };
                let r = curv.ricci.get2(a, b) + psi * g.get2(a, b) + phi_c * dr2;
                residual = residual.max(r.abs());
                if a != b {
                    cross = cross.max(curv.ricci.get2(a, b).abs());
                }
            }
        }
        Ok(RicciEigen {
            psi,
            phi: phi_c,
            residual,
            cross_terms: cross,
        })
    }

    /// Sectional curvatures at a point, checked for domain membership.
    pub fn sectional_at(&self, p: &Point) -> Result<(f64, f64)> {
        self.check_interior(p)?;
        self.sectional(p.s)
    }

    /// Largest component of `div Ric - dR/2` with derivatives of the
    /// closed-form Ricci tensor taken by finite differences.
    pub fn bianchi_residual_at(&self, p: &Point, fd: FdScheme) -> Result<f64> {
        self.check_reach(p, fd)?;
        let n = self.n;
        let x = p.coords();
        let ric = |y: &[f64]| -> Result<Vec<f64>> {
            Ok(self.curvature_at(&Point::from_coords(y))?.ricci.components)
        };
        let dric: Vec<Vec<f64>> = (0..n)
            .map(|k| fd.partial(&x, k, ric))
            .collect::<Result<_>>()?;
        let scal = |y: &[f64]| -> Result<Vec<f64>> {
            Ok(vec![self.curvature_at(&Point::from_coords(y))?.scalar])
        };
        let dr: Vec<f64> = (0..n)
            .map(|k| Ok(fd.partial(&x, k, scal)?[0]))
            .collect::<Result<_>>()?;
        let gamma = self.christoffel_at(p)?;
        let (_, ginv) = self.metric_at(p)?;
        let r = self.curvature_at(p)?.ricci;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let mut div = 0.0;
            for k in 0..n {
                for i in 0..n {
                    let gki = ginv.get2(k, i);
                    if gki == 0.0 {
                        continue;
                    }
                    let mut cov = dric[k][i * n + j];
                    for l in 0..n {
                        cov -=
                            gamma.get3(l, k, i) * r.get2(l, j) + gamma.get3(l, k, j) * r.get2(i, l);
                    }
                    div += gki * cov;
                }
            }
            worst = worst.max((div - 0.5 * dr[j]).abs());
        }
        Ok(worst)
    }
}
