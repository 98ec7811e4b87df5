use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::base::{BaseKind, BaseSpace};
use super::profile::{bisect, BoundaryClass, Profile};
use crate::error::{Error, Result};
use crate::expr::FieldExpr;
use crate::jet::MAX_DIM;

/// A point in area-radius coordinates `(s, theta_1, ..., theta_{n-1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub s: f64,
    pub theta: Vec<f64>,
}

impl Point {
    pub fn new(s: f64, theta: &[f64]) -> Self {
        Point {
            s,
            theta: theta.to_vec(),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.theta.len() + 1);
        x.push(self.s);
        x.extend_from_slice(&self.theta);
        x
    }

    pub fn from_coords(x: &[f64]) -> Self {
        Point {
            s: x[0],
            theta: x[1..].to_vec(),
        }
    }
}

/// The Riemannian triple `ds^2/phi + s^2 g_N` with potential `V = sqrt(phi)`.
#[derive(Clone, Debug)]
pub struct WarpedSpace {
    pub n: usize,
    pub base: BaseSpace,
    pub profile: Profile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinName {
    Euclidean,
    Hyperbolic,
    Hemisphere,
    Schwarzschild,
    AdsSchwarzschild,
    DsSchwarzschild,
    ReissnerNordstrom,
    AdsTorus,
}

impl BuiltinName {
    pub const ALL: [BuiltinName; 8] = [
        BuiltinName::Euclidean,
        BuiltinName::Hyperbolic,
        BuiltinName::Hemisphere,
        BuiltinName::Schwarzschild,
        BuiltinName::AdsSchwarzschild,
        BuiltinName::DsSchwarzschild,
        BuiltinName::ReissnerNordstrom,
        BuiltinName::AdsTorus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BuiltinName::Euclidean => "euclidean",
            BuiltinName::Hyperbolic => "hyperbolic",
            BuiltinName::Hemisphere => "hemisphere",
            BuiltinName::Schwarzschild => "schwarzschild",
            BuiltinName::AdsSchwarzschild => "ads_schwarzschild",
            BuiltinName::DsSchwarzschild => "ds_schwarzschild",
            BuiltinName::ReissnerNordstrom => "reissner_nordstrom",
            BuiltinName::AdsTorus => "ads_torus",
        }
    }

    pub fn is_space_form(&self) -> bool {
        matches!(
            self,
            BuiltinName::Euclidean | BuiltinName::Hyperbolic | BuiltinName::Hemisphere
        )
    }
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BuiltinName::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown builtin space `{s}`")))
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::InvalidParams(format!("missing parameter `{key}`")))
}

// horizon roots are bracketed down to adjacent floats
const ROOT_TOL: f64 = 0.0;

impl WarpedSpace {
    pub fn new(n: usize, base: BaseSpace, profile: Profile) -> Result<Self> {
        if n < 3 || n > MAX_DIM {
            return Err(Error::InvalidParams(format!(
                "dimension n = {n} outside 3..={MAX_DIM}"
            )));
        }
        if base.dim != n - 1 {
            return Err(Error::InvalidParams("base dimension must be n - 1".into()));
        }
        Ok(WarpedSpace { n, base, profile })
    }

    /// One of the named model spaces. `s_max` overrides the default outer
    /// truncation and must stay inside the natural range.
    pub fn builtin(
        name: BuiltinName,
        n: usize,
        params: &BTreeMap<String, f64>,
        s_max: Option<f64>,
    ) -> Result<Self> {
        if n < 3 || n > MAX_DIM {
            return Err(Error::InvalidParams(format!(
                "dimension n = {n} outside 3..={MAX_DIM}"
            )));
        }
        let nf = n as f64;
        let e = 2.0 - nf; // exponent of the mass term
        let mut base = BaseSpace::sphere(n - 1);
        let positive_mass = |m: f64| -> Result<f64> {
            if m > 0.0 && m.is_finite() {
                Ok(m)
            } else {
                Err(Error::InvalidParams(format!(
                    "mass m = {m} must be positive"
                )))
            }
        };
        let (src, s_min, natural_max, class) = match name {
            BuiltinName::Euclidean => ("1".to_string(), 0.0, 10.0, BoundaryClass::Center),
            BuiltinName::Hyperbolic => ("1 + s^2".to_string(), 0.0, 10.0, BoundaryClass::Center),
            BuiltinName::Hemisphere => ("1 - s^2".to_string(), 0.0, 1.0, BoundaryClass::Center),
            BuiltinName::Schwarzschild => {
                let m = positive_mass(param(params, "m")?)?;
                let s0 = m.powf(1.0 / (nf - 2.0));
                (
                    format!("1 - m*s^({e})"),
                    s0,
                    20.0 * s0,
                    BoundaryClass::Horizon,
                )
            }
            BuiltinName::AdsSchwarzschild => {
                let m = positive_mass(param(params, "m")?)?;
                let hi = m.powf(1.0 / (nf - 2.0)).max(1e-3);
                let f = |s: f64| Ok(1.0 + s * s - m * s.powf(e));
                let s0 = bisect(f, 1e-6 * hi, hi, ROOT_TOL)?;
                (
                    format!("1 + s^2 - m*s^({e})"),
                    s0,
                    (10.0 * s0).max(s0 + 5.0),
                    BoundaryClass::Horizon,
                )
            }
            BuiltinName::DsSchwarzschild => {
                let m = positive_mass(param(params, "m")?)?;
                let f = |s: f64| Ok(1.0 - m * s.powf(e) - s * s);
                let peak = ((nf - 2.0) * m / 2.0).powf(1.0 / nf);
                if f(peak)? <= 0.0 {
                    return Err(Error::NoHorizon(format!(
                        "ds_schwarzschild with m = {m} has no static region (max phi = {})",
                        f(peak)?
                    )));
                }
                let inner = bisect(f, 1e-9 * peak, peak, ROOT_TOL)?;
                let outer = bisect(f, peak, 1.0 + peak, ROOT_TOL)?;
                (
                    format!("1 - m*s^({e}) - s^2"),
                    inner,
                    outer,
                    BoundaryClass::Horizon,
                )
            }
            BuiltinName::ReissnerNordstrom => {
                let m = positive_mass(param(params, "m")?)?;
                let q = param(params, "q")?;
                if m * m <= 4.0 * q * q {
                    return Err(Error::NoHorizon(format!(
                        "reissner_nordstrom needs m^2 > 4 q^2 (m = {m}, q = {q})"
                    )));
                }
                let e2 = 4.0 - 2.0 * nf;
                let f = |s: f64| Ok(1.0 - m * s.powf(e) + q * q * s.powf(e2));
                // phi is negative where s^(2-n) = m / (2 q^2)
                let mid = if q == 0.0 {
                    1e-9
                } else {
                    (m / (2.0 * q * q)).powf(1.0 / e)
                };
                let hi = m.powf(1.0 / (nf - 2.0)).max(2.0 * mid);
                let s0 = bisect(f, mid, hi, ROOT_TOL)?;
                (
                    format!("1 - m*s^({e}) + q^2*s^({e2})"),
                    s0,
                    20.0 * s0,
                    BoundaryClass::Horizon,
                )
            }
            BuiltinName::AdsTorus => {
                let m = positive_mass(param(params, "m")?)?;
                base = BaseSpace::torus(n - 1);
                let s0 = m.powf(1.0 / nf);
                (
                    format!("s^2 - m*s^({e})"),
                    s0,
                    10.0 * s0,
                    BoundaryClass::Horizon,
                )
            }
        };
        let s_max = match s_max {
            Some(v) if v > s_min && v <= natural_max => v,
            Some(v) => {
                return Err(Error::InvalidParams(format!(
                    "s_max = {v} outside ({s_min}, {natural_max}]"
                )))
            }
            None => natural_max,
        };
        let expr = FieldExpr::parse(&src)?;
        let profile = Profile::new(name.as_str(), &expr, params.clone(), s_min, s_max, class)?;
        WarpedSpace::new(n, base, profile)
    }

    /// A space from a user supplied profile expression.
    pub fn custom(
        phi: &FieldExpr,
        n: usize,
        base: BaseKind,
        params: &BTreeMap<String, f64>,
        s_min: f64,
        s_max: f64,
        class: BoundaryClass,
    ) -> Result<Self> {
        let base = match base {
            BaseKind::RoundSphere => BaseSpace::sphere(n.saturating_sub(1).max(1)),
            BaseKind::FlatTorus => BaseSpace::torus(n.saturating_sub(1).max(1)),
        };
        let profile = Profile::new("custom", phi, params.clone(), s_min, s_max, class)?;
        WarpedSpace::new(n, base, profile)
    }

    pub fn is_horizon(&self) -> bool {
        self.profile.boundary_class == BoundaryClass::Horizon
    }

    /// Horizon radius `s_0`, if the profile has one.
    pub fn horizon(&self) -> Option<f64> {
        self.is_horizon().then_some(self.profile.s_min)
    }

    /// Checks that `p` lies in the open coordinate domain.
    pub fn check_interior(&self, p: &Point) -> Result<()> {
        let pr = &self.profile;
        if !(p.s > pr.s_min && p.s < pr.s_max) {
            return Err(Error::OutOfDomain {
                s: p.s,
                min: pr.s_min,
                max: pr.s_max,
            });
        }
        if !self.base.chart_contains(&p.theta) {
            return Err(Error::InvalidParams(format!(
                "base coordinates {:?} outside the chart",
                p.theta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn ds_schwarzschild_roots() {
        let sp = WarpedSpace::builtin(
            BuiltinName::DsSchwarzschild,
            3,
            &params(&[("m", 0.2)]),
            None,
        )
        .unwrap();
        let p = &sp.profile;
        assert!(p.phi(p.s_min).unwrap().abs() < 1e-11);
        assert!(p.phi(p.s_max).unwrap().abs() < 1e-11);
        assert!(p.s_min < p.s_max);
        assert!(WarpedSpace::builtin(
            BuiltinName::DsSchwarzschild,
            3,
            &params(&[("m", 0.4)]),
            None
        )
        .is_err());
    }

    #[test]
    fn reissner_nordstrom_outer_root() {
        let sp = WarpedSpace::builtin(
            BuiltinName::ReissnerNordstrom,
            3,
            &params(&[("m", 2.0), ("q", 0.5)]),
            None,
        )
        .unwrap();
        let exact = (2.0 + (4.0f64 - 1.0).sqrt()) / 2.0;
        assert!((sp.profile.s_min - exact).abs() < 1e-11);
    }

    #[test]
    fn schwarzschild_horizon_at_mass() {
        let sp = WarpedSpace::builtin(BuiltinName::Schwarzschild, 3, &params(&[("m", 1.0)]), None)
            .unwrap();
        assert_eq!(sp.horizon(), Some(1.0));
    }

    #[test]
    fn names_round_trip() {
        for b in BuiltinName::ALL {
            assert_eq!(b.as_str().parse::<BuiltinName>().unwrap(), b);
        }
    }

    #[test]
    fn missing_mass_is_an_error() {
        assert!(
            WarpedSpace::builtin(BuiltinName::Schwarzschild, 3, &BTreeMap::new(), None).is_err()
        );
        assert!(
            WarpedSpace::builtin(BuiltinName::Schwarzschild, 3, &params(&[("m", -1.0)]), None)
                .is_err()
        );
    }
}
