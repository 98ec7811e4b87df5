use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jet::{Jet2, Taylor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rank {
    Scalar,
    /// Covariant two-tensor `T_ij`.
    Covariant2,
    /// Connection-like `T^k_ij`, stored as `[k][i][j]`.
    Mixed12,
    /// Curvature-like `T^l_kij`, stored as `[l][k][i][j]`.
    Mixed13,
    /// Fully covariant `T_abcd`.
    Covariant4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Coordinate,
    Orthonormal,
}

/// Dense tensor components at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorValue {
    pub rank: Rank,
    pub frame: Frame,
    pub dim: usize,
    pub components: Vec<f64>,
}

impl TensorValue {
    pub fn scalar(v: f64) -> Self {
        TensorValue {
            rank: Rank::Scalar,
            frame: Frame::Coordinate,
            dim: 0,
            components: vec![v],
        }
    }

    pub fn zeros(rank: Rank, dim: usize) -> Self {
        let len = match rank {
            Rank::Scalar => 1,
            Rank::Covariant2 => dim * dim,
            Rank::Mixed12 => dim * dim * dim,
            Rank::Mixed13 | Rank::Covariant4 => dim * dim * dim * dim,
        };
        TensorValue {
            rank,
            frame: Frame::Coordinate,
            dim,
            components: vec![0.0; len],
        }
    }

    pub fn from_fn2(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(Rank::Covariant2, dim);
        for i in 0..dim {
            for j in 0..dim {
                t.components[i * dim + j] = f(i, j);
            }
        }
        t
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.components[i * self.dim + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        self.components[i * self.dim + j] = v;
    }

    pub fn get3(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim;
        self.components[(k * n + i) * n + j]
    }

    pub fn set3(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.dim;
        self.components[(k * n + i) * n + j] = v;
    }

    pub fn get4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.components[((a * n + b) * n + c) * n + d]
    }

    pub fn set4(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let n = self.dim;
        self.components[((a * n + b) * n + c) * n + d] = v;
    }

    pub fn value(&self) -> f64 {
        self.components[0]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        debug_assert_eq!(self.rank, Rank::Covariant2);
        DMatrix::from_row_slice(self.dim, self.dim, &self.components)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn2(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn max_abs_diff(&self, other: &TensorValue) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    /// Largest `|T_ij - T_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.get2(i, j) - self.get2(j, i)).abs());
            }
        }
        m
    }

    /// `T(X, Y)` for a covariant two-tensor.
    pub fn apply2(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.get2(i, j) * x[i] * y[j];
            }
        }
        acc
    }

    /// Full trace `g^{ij} T_ij` against an inverse metric.
    pub fn trace_with(&self, ginv: &TensorValue) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += ginv.get2(i, j) * self.get2(i, j);
            }
        }
        acc
    }

    /// `|T|^2 = g^{ik} g^{jl} T_ij T_kl`.
    pub fn norm_sq_with(&self, ginv: &TensorValue) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc +=
                            ginv.get2(i, k) * ginv.get2(j, l) * self.get2(i, j) * self.get2(k, l);
                    }
                }
            }
        }
        acc
    }

    /// Raise the first index: `T^i_j = g^{ik} T_kj`, as a plain matrix.
    pub fn raised(&self, ginv: &TensorValue) -> DMatrix<f64> {
        ginv.matrix() * self.matrix()
    }
}

/// A symmetric tensor `rad * g_R + tan * g_T` built from the radial part
/// `g_R = ds^2/phi` and the tangential part `g_T = s^2 g_N` of the metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedTensor {
    pub rad: f64,
    pub tan: f64,
}

impl WarpedTensor {
    pub fn new(rad: f64, tan: f64) -> Self {
        WarpedTensor { rad, tan }
    }

    pub fn scale(self, c: f64) -> Self {
        WarpedTensor::new(self.rad * c, self.tan * c)
    }

    /// `g^{ik} g^{jl} A_ij B_kl` in dimension `n`.
    pub fn contract(&self, other: &WarpedTensor, n: usize) -> f64 {
        self.rad * other.rad + (n as f64 - 1.0) * self.tan * other.tan
    }

    pub fn trace(&self, n: usize) -> f64 {
        self.rad + (n as f64 - 1.0) * self.tan
    }

    /// Eigenvalues relative to the metric, smallest first.
    pub fn min_eigenvalue(&self) -> f64 {
        self.rad.min(self.tan)
    }

    /// Coordinate components given `phi(s)`, `s` and the diagonal of `g_N`.
    pub fn to_coords(&self, phi: f64, s: f64, gn_diag: &[f64]) -> TensorValue {
        let n = gn_diag.len() + 1;
        let mut t = TensorValue::zeros(Rank::Covariant2, n);
        t.set2(0, 0, self.rad / phi);
        for (k, g) in gn_diag.iter().enumerate() {
            t.set2(k + 1, k + 1, self.tan * s * s * g);
        }
        t
    }
}

/// Christoffel symbols from metric jets: `G^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)`.
pub fn christoffel_from_jets(g: &[Vec<Jet2>]) -> Result<(TensorValue, TensorValue, TensorValue)> {
    let n = g.len();
    let gm = TensorValue::from_fn2(n, |i, j| g[i][j].value());
    let ginv = invert(&gm)?;
    let mut gamma = TensorValue::zeros(Rank::Mixed12, n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    let gl = ginv.get2(k, l);
                    if gl == 0.0 {
                        continue;
                    }
                    acc += gl * (g[j][l].grad[i] + g[i][l].grad[j] - g[i][j].grad[l]);
                }
                gamma.set3(k, i, j, 0.5 * acc);
                gamma.set3(k, j, i, 0.5 * acc);
            }
        }
    }
    Ok((gm, ginv, gamma))
}

pub fn invert(g: &TensorValue) -> Result<TensorValue> {
    let m = g.matrix();
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| crate::error::Error::Singular(format!("metric not invertible: {m}")))?;
    let mut out = TensorValue::from_matrix(&inv);
    // exact symmetry for symmetric input
    for i in 0..g.dim {
        for j in i + 1..g.dim {
            let v = 0.5 * (out.get2(i, j) + out.get2(j, i));
            out.set2(i, j, v);
            out.set2(j, i, v);
        }
    }
    Ok(out)
}

/// Finite difference weights for a first derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdScheme {
    pub step: f64,
    /// Use the five-point (fourth order) stencil instead of the three-point one.
    pub fourth_order: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        FdScheme {
            step: 1e-5,
            fourth_order: false,
        }
    }
}

impl FdScheme {
    pub fn fourth(step: f64) -> Self {
        FdScheme {
            step,
            fourth_order: true,
        }
    }

    /// `(offset multiple, weight)` pairs; the derivative is `sum w f(x + o h) / h`.
    pub fn stencil(&self) -> &'static [(f64, f64)] {
        if self.fourth_order {
            &[
                (-2.0, 1.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ]
        } else {
            &[(-1.0, -0.5), (1.0, 0.5)]
        }
    }

    pub fn reach(&self) -> f64 {
        if self.fourth_order {
            2.0 * self.step
        } else {
            self.step
        }
    }

    /// Derivative of `f` along coordinate `dir` of `x`, applied componentwise.
    pub fn partial(
        &self,
        x: &[f64],
        dir: usize,
        mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        let mut y = x.to_vec();
        for (o, w) in self.stencil() {
            y[dir] = x[dir] + o * self.step;
            let v = f(&y)?;
            let a = acc.get_or_insert_with(|| vec![0.0; v.len()]);
            for (ai, vi) in a.iter_mut().zip(&v) {
                *ai += w * vi;
            }
        }
        let mut out = acc.unwrap_or_default();
        for v in &mut out {
            *v /= self.step;
        }
        Ok(out)
    }

    pub fn derivative(&self, x: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (o, w) in self.stencil() {
            acc += w * f(x + o * self.step)?;
        }
        Ok(acc / self.step)
    }
}

/// Riemann tensor `Rm_abcd = g_cl R^l_dab` from finite differences of a
/// Christoffel field.
pub fn riemann_from_christoffel_fd(
    x: &[f64],
    fd: FdScheme,
    g: &TensorValue,
    mut gamma_at: impl FnMut(&[f64]) -> Result<TensorValue>,
) -> Result<TensorValue> {
    let n = x.len();
    let gamma = gamma_at(x)?;
    // dgamma[i] = d_i Gamma
    let mut dgamma = Vec::with_capacity(n);
    for i in 0..n {
        dgamma.push(fd.partial(x, i, |y| Ok(gamma_at(y)?.components))?);
    }
    let idx = |l: usize, a: usize, b: usize| (l * n + a) * n + b;
    let mut rup = TensorValue::zeros(Rank::Mixed13, n);
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = dgamma[i][idx(l, j, k)] - dgamma[j][idx(l, i, k)];
                    for m in 0..n {
                        v += gamma.get3(l, i, m) * gamma.get3(m, j, k)
                            - gamma.get3(l, j, m) * gamma.get3(m, i, k);
                    }
                    rup.set4(l, k, i, j, v);
                }
            }
        }
    }
    let mut rm = TensorValue::zeros(Rank::Covariant4, n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        v += g.get2(c, l) * rup.get4(l, d, a, b);
                    }
                    rm.set4(a, b, c, d, v);
                }
            }
        }
    }
    Ok(rm)
}

/// `Ric_bd = g^{ac} Rm_abcd`.
pub fn ricci_from_riemann(rm: &TensorValue, ginv: &TensorValue) -> TensorValue {
    let n = rm.dim;
    TensorValue::from_fn2(n, |b, d| {
        let mut v = 0.0;
        for a in 0..n {
            for c in 0..n {
                v += ginv.get2(a, c) * rm.get4(a, b, c, d);
            }
        }
        v
    })
}

/// Kulkarni-Nomizu product `(h o k)_abcd = h_ac k_bd + h_bd k_ac - h_ad k_bc - h_bc k_ad`.
pub fn kulkarni_nomizu(h: &TensorValue, k: &TensorValue) -> TensorValue {
    let n = h.dim;
    let mut out = TensorValue::zeros(Rank::Covariant4, n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = h.get2(a, c) * k.get2(b, d) + h.get2(b, d) * k.get2(a, c)
                        - h.get2(a, d) * k.get2(b, c)
                        - h.get2(b, c) * k.get2(a, d);
                    out.set4(a, b, c, d, v);
                }
            }
        }
    }
    out
}

/// Covariant Hessian `d_i d_j f - G^k_ij d_k f` from a jet.
pub fn covariant_hessian_from_jet(f: &Jet2, gamma: &TensorValue) -> TensorValue {
    let n = gamma.dim;
    TensorValue::from_fn2(n, |i, j| {
        let mut v = 0.5 * (f.hess[i][j] + f.hess[j][i]);
        for k in 0..n {
            v -= gamma.get3(k, i, j) * f.grad[k];
        }
        v
    })
}

/// Raise a covector: `v^i = g^{ij} w_j`.
pub fn raise(ginv: &TensorValue, w: &[f64]) -> Vec<f64> {
    let n = ginv.dim;
    (0..n)
        .map(|i| (0..n).map(|j| ginv.get2(i, j) * w[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_stencil_is_exact_on_quartics() {
        let fd = FdScheme::fourth(0.1);
        let d = fd.derivative(1.0, |x| Ok(x.powi(4) - 3.0 * x)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kulkarni_nomizu_of_metric_gives_unit_curvature() {
        let g = TensorValue::from_fn2(3, |i, j| if i == j { 1.0 } else { 0.0 });
        let rm = kulkarni_nomizu(&g, &g);
        assert_eq!(rm.get4(0, 1, 0, 1), 2.0);
        assert_eq!(rm.get4(0, 1, 1, 0), -2.0);
        let ric = ricci_from_riemann(&rm, &g);
        assert_eq!(ric.get2(0, 0), 4.0);
    }

    #[test]
    fn warped_contraction() {
        let a = WarpedTensor::new(1.0, 2.0);
        let b = WarpedTensor::new(3.0, -1.0);
        assert_eq!(a.contract(&b, 3), 3.0 - 4.0);
        assert_eq!(a.trace(4), 7.0);
    }
}
