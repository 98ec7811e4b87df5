//! Scalar fields given by expressions, with covariant derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalEnv, FieldExpr};
use crate::geometry::{covariant_hessian_from_jet, FdScheme, Point, TensorValue, WarpedSpace};
use crate::jet::Jet2;

/// Jets of the coordinates `(s, theta_1, ..)` at `p`.
pub fn coordinate_jets(space: &WarpedSpace, p: &Point) -> (Jet2, Vec<Jet2>) {
    let n = space.n;
    let s = Jet2::variable(n, 0, p.s);
    let theta = (0..n - 1)
        .map(|k| Jet2::variable(n, k + 1, p.theta[k]))
        .collect();
    (s, theta)
}

pub fn eval_jet2(space: &WarpedSpace, expr: &FieldExpr, p: &Point) -> Result<Jet2> {
    if expr.max_theta() > space.n - 1 {
        return Err(Error::InvalidParams(format!(
            "`{}` uses theta{} but the base has dimension {}",
            expr.source(),
            expr.max_theta(),
            space.n - 1
        )));
    }
    let (s, theta) = coordinate_jets(space, p);
    let j = expr.eval(&EvalEnv {
        s: Some(s),
        theta: &theta,
        profile: Some(&space.profile),
    })?;
    if !j.value.is_finite() || j.grad_slice().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("`{}` at s = {}, theta = {:?}", expr.source(), p.s, p.theta),
        });
    }
    Ok(j)
}

/// Value, coordinate gradient, covariant Hessian and Laplacian of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldData {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: TensorValue,
    pub laplacian: f64,
    /// `|grad f|^2`.
    pub grad_norm_sq: f64,
}

pub fn field_data(space: &WarpedSpace, expr: &FieldExpr, p: &Point) -> Result<FieldData> {
    let j = eval_jet2(space, expr, p)?;
    let gamma = space.christoffel_at(p)?;
    let (_, ginv) = space.metric_at(p)?;
    let hess = covariant_hessian_from_jet(&j, &gamma);
    let grad = j.grad_slice().to_vec();
    let grad_norm_sq = (0..space.n)
        .map(|i| ginv.get2(i, i) * grad[i] * grad[i])
        .sum();
    Ok(FieldData {
        value: j.value,
        laplacian: hess.trace_with(&ginv),
        grad,
        hess,
        grad_norm_sq,
    })
}

/// `f_{,ij} = d_i d_j f - G^k_ij d_k f`.
pub fn covariant_hessian(space: &WarpedSpace, expr: &FieldExpr, p: &Point) -> Result<TensorValue> {
    Ok(field_data(space, expr, p)?.hess)
}

pub fn laplace_beltrami(space: &WarpedSpace, expr: &FieldExpr, p: &Point) -> Result<f64> {
    Ok(field_data(space, expr, p)?.laplacian)
}

/// Largest component of `f_{,ijj} - (Lap f)_{,i} - R_ij f^{,j}`, with the
/// third derivatives taken by finite differences of the covariant Hessian.
pub fn ricci_identity_residual(
    space: &WarpedSpace,
    expr: &FieldExpr,
    p: &Point,
    fd: FdScheme,
) -> Result<f64> {
    let n = space.n;
    let x = p.coords();
    let hess_at = |y: &[f64]| -> Result<Vec<f64>> {
        let d = field_data(space, expr, &Point::from_coords(y))?;
        let mut v = d.hess.components;
        v.push(d.laplacian);
        Ok(v)
    };
    let dh: Vec<Vec<f64>> = (0..n)
        .map(|k| fd.partial(&x, k, hess_at))
        .collect::<Result<_>>()?;
    let d = field_data(space, expr, p)?;
    let gamma = space.christoffel_at(p)?;
    let (_, ginv) = space.metric_at(p)?;
    let ric = space.curvature_at(p)?.ricci;
    let h = &d.hess;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut div = 0.0;
        for j in 0..n {
            for k in 0..n {
                let gjk = ginv.get2(j, k);
                if gjk == 0.0 {
                    continue;
                }
                let mut cov = dh[k][i * n + j];
                for l in 0..n {
                    cov -= gamma.get3(l, k, i) * h.get2(l, j) + gamma.get3(l, k, j) * h.get2(i, l);
                }
                div += gjk * cov;
            }
        }
        let ric_grad: f64 = (0..n)
            .flat_map(|j| (0..n).map(move |l| (j, l)))
            .map(|(j, l)| ric.get2(i, j) * ginv.get2(j, l) * d.grad[l])
            .sum();
        worst = worst.max((div - dh[i][n * n] - ric_grad).abs());
    }
    Ok(worst)
}

/// A named test field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogField {
    pub name: String,
    pub expr: FieldExpr,
}

/// Smooth test fields on the closed domain `s <= s_outer`. They cover the
/// potential itself, radial polynomials, first harmonics and products.
pub fn test_field_catalog(space: &WarpedSpace, s_outer: f64) -> Vec<CatalogField> {
    let mut src = vec![
        ("potential", "V".to_string()),
        (
            "radial-vanishing-outer",
            format!("s^2 - {}", s_outer * s_outer),
        ),
        ("radial-cubic", "s^3 - 2*s + 1".to_string()),
        ("height", "s*cos(theta1)".to_string()),
        ("potential-harmonic", "V*s*cos(theta1)".to_string()),
        (
            "gaussian-tilt",
            "exp(-s^2)*(1 + 0.3*s*cos(theta1))".to_string(),
        ),
    ];
    if space.n >= 3 {
        src.push(("planar", "s^2*sin(theta1)*cos(theta2)".to_string()));
    }
    src.into_iter()
        .map(|(name, s)| CatalogField {
            name: name.to_string(),
            expr: FieldExpr::parse(&s).expect("catalog expressions parse"),
        })
        .collect()
}

/// Largest gap between jet partials and finite differences of the jet.
pub fn jet_vs_fd(space: &WarpedSpace, expr: &FieldExpr, p: &Point, fd: FdScheme) -> Result<f64> {
    let j = eval_jet2(space, expr, p)?;
    let x = p.coords();
    let n = space.n;
    let value = |y: &[f64]| -> Result<Vec<f64>> {
        let jj = eval_jet2(space, expr, &Point::from_coords(y))?;
        let mut v = vec![jj.value];
        v.extend_from_slice(jj.grad_slice());
        Ok(v)
    };
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let d = fd.partial(&x, k, value)?;
        worst = worst.max((d[0] - j.grad[k]).abs());
        for i in 0..n {
            worst = worst.max((d[1 + i] - j.hess[i][k]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinName;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn space(name: BuiltinName, n: usize) -> WarpedSpace {
        let mut p = BTreeMap::new();
        if !name.is_space_form() {
            p.insert("m".to_string(), 1.0);
        }
        WarpedSpace::builtin(name, n, &p, None).unwrap()
    }

    fn f(src: &str) -> FieldExpr {
        FieldExpr::parse(src).unwrap()
    }

    #[test]
    fn square_jet_in_s() {
        let sp = space(BuiltinName::Euclidean, 3);
        let j = eval_jet2(&sp, &f("s^2"), &Point::new(2.0, &[1.0, 0.5])).unwrap();
        assert_eq!((j.value, j.grad[0], j.hess[0][0]), (4.0, 4.0, 2.0));
    }

    #[test]
    fn hemisphere_potential_jet() {
        let sp = space(BuiltinName::Hemisphere, 3);
        let j = eval_jet2(&sp, &f("V"), &Point::new(0.6, &[1.0, 0.5])).unwrap();
        assert!((j.value - 0.8).abs() < 1e-15);
        assert!((j.grad[0] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn half_square_has_metric_hessian_in_euclidean_space() {
        let sp = space(BuiltinName::Euclidean, 3);
        let p = Point::new(1.3, &[0.8, 2.0]);
        let h = covariant_hessian(&sp, &f("0.5*s^2"), &p).unwrap();
        let (g, _) = sp.metric_at(&p).unwrap();
        assert!(h.max_abs_diff(&g) < 1e-12);
        assert!((laplace_beltrami(&sp, &f("0.5*s^2"), &p).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(laplace_beltrami(&sp, &f("7"), &p).unwrap(), 0.0);
    }

    #[test]
    fn hemisphere_potential_is_eigenfunction() {
        let sp = space(BuiltinName::Hemisphere, 4);
        let p = Point::new(0.3, &[0.8, 1.1, 2.0]);
        let l = laplace_beltrami(&sp, &f("V"), &p).unwrap();
        assert!((l + 4.0 * 0.91f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn potential_hessian_matches_potential_jet() {
        let sp = space(BuiltinName::AdsSchwarzschild, 3);
        let p = Point::new(1.7, &[0.8, 2.0]);
        let h = covariant_hessian(&sp, &f("V"), &p).unwrap();
        let pj = sp.potential_jet(&p, false).unwrap();
        assert!(h.max_abs_diff(&pj.hess) < 1e-10);
    }

    #[test]
    fn catalog_contains_required_fields() {
        let sp = space(BuiltinName::Hyperbolic, 3);
        let cat = test_field_catalog(&sp, 2.0);
        let srcs: Vec<&str> = cat.iter().map(|c| c.expr.source()).collect();
        assert!(srcs.contains(&"V"));
        assert!(srcs.contains(&"s^2 - 4"));
        assert!(srcs.contains(&"s*cos(theta1)"));
        let p = Point::new(2.0, &[0.4, 0.1]);
        assert!(eval_jet2(&sp, &cat[1].expr, &p).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn ricci_identity_on_catalog() {
        for sp in [
            space(BuiltinName::Hyperbolic, 3),
            space(BuiltinName::Schwarzschild, 3),
        ] {
            let p = Point::new(sp.profile.s_min + 1.1, &[0.9, 1.4]);
            for c in test_field_catalog(&sp, 3.0) {
                let r = ricci_identity_residual(&sp, &c.expr, &p, FdScheme::fourth(1e-3)).unwrap();
                assert!(r < 1e-7, "{} {}: {r}", sp.profile.label, c.name);
            }
        }
    }

    #[test]
    fn unknown_angle_is_rejected() {
        let sp = space(BuiltinName::Euclidean, 3);
        let e = eval_jet2(&sp, &f("cos(theta3)"), &Point::new(1.0, &[1.0, 1.0]));
        assert!(e.is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn jets_agree_with_central_differences(
            s in 0.3f64..2.5, t1 in 0.2f64..2.9, t2 in 0.0f64..6.2, which in 0usize..7
        ) {
            let sp = space(BuiltinName::Hyperbolic, 3);
            let cat = test_field_catalog(&sp, 3.0);
            let c = &cat[which % cat.len()];
            let err = jet_vs_fd(&sp, &c.expr, &Point::new(s, &[t1, t2]), FdScheme::default()).unwrap();
            prop_assert!(err < 1e-6, "{}: {err}", c.name);
        }
    }
}
