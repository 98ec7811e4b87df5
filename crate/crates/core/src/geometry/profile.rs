use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalEnv, FieldExpr};
use crate::jet::Jet3;
use crate::quadrature::gauss_legendre;

/// Behaviour of the profile at `s_min`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryClass {
    /// Smooth center: `s_min = 0`, `phi(0) = 1`, `phi'(0) = 0`.
    #[serde(rename = "H1-center")]
    Center,
    /// Horizon: `phi(s_min) = 0` and `phi'(s_min) > 0`.
    #[serde(rename = "H2-horizon")]
    Horizon,
}

/// Derivatives of the warping function `lambda(r)` expressed through `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaJet {
    pub lambda: f64,
    pub d1: f64,
    pub d2: f64,
    /// `lambda''' / lambda'`, which stays finite at a horizon.
    pub d3_over_d1: f64,
}

/// The squared potential `phi(s) = V(s)^2` on `[s_min, s_max]`.
#[derive(Clone, Debug)]
pub struct Profile {
    pub label: String,
    phi: FieldExpr,
    pub s_min: f64,
    pub s_max: f64,
    pub boundary_class: BoundaryClass,
    pub params: BTreeMap<String, f64>,
}

const POSITIVITY_SAMPLES: usize = 257;

impl Profile {
    /// Builds and validates a profile. `phi` may mention the parameters by
    /// name; they are substituted here.
    pub fn new(
        label: impl Into<String>,
        phi: &FieldExpr,
        params: BTreeMap<String, f64>,
        s_min: f64,
        s_max: f64,
        boundary_class: BoundaryClass,
    ) -> Result<Self> {
        let phi = phi.with_params(&params);
        if let Some(name) = phi.free_params().first() {
            return Err(Error::UnknownSymbol(name.clone()));
        }
        if phi.max_theta() > 0 {
            return Err(Error::InvalidParams(
                "the profile may depend on s only".into(),
            ));
        }
        if !(s_min >= 0.0 && s_max > s_min && s_max.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "bad s-range [{s_min}, {s_max}]"
            )));
        }
        let p = Profile {
            label: label.into(),
            phi,
            s_min,
            s_max,
            boundary_class,
            params,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let width = self.s_max - self.s_min;
        for i in 1..POSITIVITY_SAMPLES {
            let s = self.s_min + width * i as f64 / POSITIVITY_SAMPLES as f64;
            let v = self.phi(s)?;
            if !(v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "phi({s}) = {v} is not positive inside the range"
                )));
            }
        }
        let j = self.jet(self.s_min)?;
        match self.boundary_class {
            BoundaryClass::Center => {
                if self.s_min != 0.0 || (j.d[0] - 1.0).abs() > 1e-12 || j.d[1].abs() > 1e-12 {
                    return Err(Error::InvalidParams(format!(
                        "center class needs s_min = 0, phi(0) = 1, phi'(0) = 0; got s_min = {}, phi = {}, phi' = {}",
                        self.s_min, j.d[0], j.d[1]
                    )));
                }
            }
            BoundaryClass::Horizon => {
                if j.d[0].abs() > 1e-10 || !(j.d[1] > 0.0) {
                    return Err(Error::NoHorizon(format!(
                        "phi({}) = {}, phi' = {}",
                        self.s_min, j.d[0], j.d[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.phi
    }

    /// `phi` and its first three derivatives at `s`.
    pub fn jet(&self, s: f64) -> Result<Jet3> {
        let j = self.phi.eval(&EvalEnv {
            s: Some(Jet3::variable(s)),
            theta: &[],
            profile: None,
        })?;
        if j.d.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("profile jet at s = {s}"),
            });
        }
        Ok(j)
    }

    pub fn phi(&self, s: f64) -> Result<f64> {
        Ok(self.jet(s)?.d[0])
    }

    /// `V = sqrt(phi)`; tiny negative round-off at a horizon is clamped.
    pub fn potential(&self, s: f64) -> Result<f64> {
        let v = self.phi(s)?;
        if v < -1e-12 {
            return Err(Error::OutOfDomain {
                s,
                min: self.s_min,
                max: self.s_max,
            });
        }
        Ok(v.max(0.0).sqrt())
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.s_min && s <= self.s_max
    }

    pub fn lambda_jet(&self, s: f64) -> Result<LambdaJet> {
        let j = self.jet(s)?;
        Ok(LambdaJet {
            lambda: s,
            d1: j.d[0].max(0.0).sqrt(),
            d2: 0.5 * j.d[1],
            d3_over_d1: 0.5 * j.d[2],
        })
    }

    /// Geodesic distance `r(b) - r(a) = int_a^b ds / sqrt(phi)`.
    ///
    /// On a horizon the substitution `s = s_min + t^2` removes the inverse
    /// square-root singularity.
    pub fn radial_distance(&self, a: f64, b: f64, nodes: usize) -> Result<f64> {
        let (x, w) = gauss_legendre(nodes);
        if self.boundary_class == BoundaryClass::Horizon && a - self.s_min < 1e-3 {
            let ta = (a - self.s_min).max(0.0).sqrt();
            let tb = (b - self.s_min).sqrt();
            let mut sum = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let t = 0.5 * (tb - ta) * xi + 0.5 * (tb + ta);
                let s = self.s_min + t * t;
                // ds/sqrt(phi) = 2t/sqrt(phi) dt, and phi/t^2 is regular
                sum += wi * 2.0 / (self.phi(s)? / (t * t)).sqrt();
            }
            Ok(0.5 * (tb - ta) * sum)
        } else {
            let mut sum = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let s = 0.5 * (b - a) * xi + 0.5 * (b + a);
                sum += wi / self.phi(s)?.sqrt();
            }
            Ok(0.5 * (b - a) * sum)
        }
    }
}

/// Bisection for a sign change of `f` on `[a, b]`, to absolute width `tol`
/// or until the bracket cannot shrink further; returns the endpoint with the
/// smaller `|f|`.
pub fn bisect(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoHorizon(format!(
            "no sign change on [{a}, {b}] (values {fa}, {fb})"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= tol || m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}
