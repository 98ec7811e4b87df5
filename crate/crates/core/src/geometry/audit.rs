//! Comparison of two commonly displayed closed forms against the derived
//! coefficients.
//!
//! Both forms are written as coefficients of `g_N`, i.e. the tangential
//! coefficient times `s^2`.

use serde::{Deserialize, Serialize};

use super::curvature::{q_coeffs, ricci_coeffs};
use super::space::WarpedSpace;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditedQuantity {
    /// Displayed: `s^2 phi''/2 + (n-3) s phi'/2 + (n-2) sqrt(phi) (rho - phi)`.
    QTangential,
    /// Displayed: `(n-2) rho - (sqrt(phi) phi'/2 + (n-2) s^2)`.
    RicciTangential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub quantity: AuditedQuantity,
    pub s: f64,
    pub displayed: f64,
    pub derived: f64,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub space: String,
    pub rows: Vec<AuditRow>,
    pub q_agrees: bool,
    pub ricci_agrees: bool,
}

pub fn displayed_q_tangential(n: usize, rho: f64, s: f64, phi: f64, dphi: f64, ddphi: f64) -> f64 {
    let nf = n as f64;
    s * s * ddphi / 2.0 + (nf - 3.0) * s * dphi / 2.0 + (nf - 2.0) * phi.sqrt() * (rho - phi)
}

pub fn displayed_ricci_tangential(n: usize, rho: f64, s: f64, phi: f64, dphi: f64) -> f64 {
    let nf = n as f64;
    (nf - 2.0) * rho - (phi.sqrt() * dphi / 2.0 + (nf - 2.0) * s * s)
}

/// Evaluates both forms at `samples` interior points.
pub fn audit_formulas(space: &WarpedSpace, samples: usize, tol: f64) -> Result<AuditReport> {
    let pr = &space.profile;
    let mut rows = Vec::with_capacity(2 * samples);
    for i in 0..samples {
        let s = pr.s_min + (pr.s_max - pr.s_min) * (i as f64 + 0.5) / samples as f64;
        let j = space.radial_values(s)?;
        let (_, qt) = q_coeffs(space.n, space.base.rho, &j);
        let (_, rt) = ricci_coeffs(space.n, space.base.rho, &j);
        let shown_q = displayed_q_tangential(space.n, space.base.rho, s, j.phi, j.dphi, j.ddphi);
        let shown_r = displayed_ricci_tangential(space.n, space.base.rho, s, j.phi, j.dphi);
        for (quantity, displayed, derived) in [
            (AuditedQuantity::QTangential, shown_q, qt * s * s),
            (AuditedQuantity::RicciTangential, shown_r, rt * s * s),
        ] {
            let agree = (displayed - derived).abs() <= tol * derived.abs().max(1.0);
            rows.push(AuditRow {
                quantity,
                s,
                displayed,
                derived,
                agree,
            });
        }
    }
    let all = |q: AuditedQuantity| rows.iter().filter(|r| r.quantity == q).all(|r| r.agree);
    Ok(AuditReport {
        space: pr.label.clone(),
        q_agrees: all(AuditedQuantity::QTangential),
        ricci_agrees: all(AuditedQuantity::RicciTangential),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinName;
    use std::collections::BTreeMap;

    fn space(name: BuiltinName, m: Option<f64>) -> WarpedSpace {
        let mut p = BTreeMap::new();
        if let Some(m) = m {
            p.insert("m".to_string(), m);
        }
        WarpedSpace::builtin(name, 3, &p, None).unwrap()
    }

    #[test]
    fn displayed_q_fails_on_hemisphere() {
        let r = audit_formulas(&space(BuiltinName::Hemisphere, None), 16, 1e-10).unwrap();
        assert!(!r.q_agrees);
    }

    #[test]
    fn displayed_q_agrees_where_phi_is_one_or_rho_equals_phi() {
        // Euclidean space: phi = 1 = rho, both sides vanish.
        let r = audit_formulas(&space(BuiltinName::Euclidean, None), 16, 1e-10).unwrap();
        assert!(r.q_agrees);
    }

    #[test]
    fn displayed_ricci_fails_on_schwarzschild() {
        let r = audit_formulas(&space(BuiltinName::Schwarzschild, Some(1.0)), 16, 1e-10).unwrap();
        assert!(!r.ricci_agrees);
    }
}
