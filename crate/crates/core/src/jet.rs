//! Truncated Taylor arithmetic.
//!
//! [`Jet2`] carries a value together with its gradient and Hessian with respect
//! to up to [`MAX_DIM`] variables. [`Jet3`] is univariate and carries three
//! derivatives; profiles use it because the lemma-level identities need third
//! derivatives of the metric.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest number of independent variables a [`Jet2`] can track.
pub const MAX_DIM: usize = 6;

/// Arithmetic shared by the jet types so expression trees can be evaluated
/// generically.
pub trait Taylor:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> f64;
    /// A constant with the same variable layout as `self`.
    fn constant_like(&self, c: f64) -> Self;
    /// Applies a univariate function given its value and first three
    /// derivatives at `self.value()`.
    fn compose(&self, d: [f64; 4]) -> Self;
}

impl Taylor for f64 {
    fn value(&self) -> f64 {
        *self
    }

    fn constant_like(&self, c: f64) -> Self {
        c
    }

    fn compose(&self, d: [f64; 4]) -> Self {
        d[0]
    }
}

/// Value, gradient and Hessian of a scalar with respect to `dim` variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub dim: usize,
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet2 {
    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        Jet2 {
            dim,
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_index` evaluated at `value`.
    pub fn variable(dim: usize, index: usize, value: f64) -> Self {
        let mut j = Self::constant(dim, value);
        j.grad[index] = 1.0;
        j
    }

    pub fn grad_slice(&self) -> &[f64] {
        &self.grad[..self.dim]
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i][j]
    }

    pub fn powi(self, k: i32) -> Self {
        let x = self.value;
        let kf = k as f64;
        let d1 = if k == 0 { 0.0 } else { kf * x.powi(k - 1) };
        let d2 = if k == 0 || k == 1 {
            0.0
        } else {
            kf * (kf - 1.0) * x.powi(k - 2)
        };
        self.compose([x.powi(k), d1, d2, 0.0])
    }
}

impl Taylor for Jet2 {
    fn value(&self) -> f64 {
        self.value
    }

    fn constant_like(&self, c: f64) -> Self {
        Jet2::constant(self.dim, c)
    }

    fn compose(&self, d: [f64; 4]) -> Self {
        let mut out = Jet2::constant(self.dim, d[0]);
        let n = self.dim;
        for i in 0..n {
            out.grad[i] = d[1] * self.grad[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.hess[i][j] = d[1] * self.hess[i][j] + d[2] * self.grad[i] * self.grad[j];
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: Jet2) -> Jet2 {
        debug_assert_eq!(self.dim, rhs.dim);
        self.value += rhs.value;
        for i in 0..self.dim {
            self.grad[i] += rhs.grad[i];
            for j in 0..self.dim {
                self.hess[i][j] += rhs.hess[i][j];
            }
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        self + (-rhs)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(mut self) -> Jet2 {
        self.value = -self.value;
        for i in 0..self.dim {
            self.grad[i] = -self.grad[i];
            for j in 0..self.dim {
                self.hess[i][j] = -self.hess[i][j];
            }
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        debug_assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Jet2::constant(n, self.value * rhs.value);
        for i in 0..n {
            out.grad[i] = self.value * rhs.grad[i] + rhs.value * self.grad[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.hess[i][j] = self.value * rhs.hess[i][j]
                    + rhs.value * self.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        out
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        let x = rhs.value;
        let inv = rhs.compose([1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), 0.0]);
        self * inv
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(mut self, c: f64) -> Jet2 {
        self.value *= c;
        for i in 0..self.dim {
            self.grad[i] *= c;
            for j in 0..self.dim {
                self.hess[i][j] *= c;
            }
        }
        self
    }
}

/// Univariate jet: value and first three derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet3 {
    pub d: [f64; 4],
}

impl Jet3 {
    pub fn constant(c: f64) -> Self {
        Jet3 {
            d: [c, 0.0, 0.0, 0.0],
        }
    }

    pub fn variable(x: f64) -> Self {
        Jet3 {
            d: [x, 1.0, 0.0, 0.0],
        }
    }

    /// The jet of the derivative. The top coefficient is unknown and set to
    /// NaN so that any accidental use is visible.
    pub fn derivative(&self) -> Self {
        Jet3 {
            d: [self.d[1], self.d[2], self.d[3], f64::NAN],
        }
    }
}

impl Taylor for Jet3 {
    fn value(&self) -> f64 {
        self.d[0]
    }

    fn constant_like(&self, c: f64) -> Self {
        Jet3::constant(c)
    }

    // Faa di Bruno to third order.
    fn compose(&self, f: [f64; 4]) -> Self {
        let [_, a1, a2, a3] = self.d;
        Jet3 {
            d: [
                f[0],
                f[1] * a1,
                f[1] * a2 + f[2] * a1 * a1,
                f[1] * a3 + 3.0 * f[2] * a1 * a2 + f[3] * a1 * a1 * a1,
            ],
        }
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, r: Jet3) -> Jet3 {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(r.d) {
            *x += y;
        }
        Jet3 { d }
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, r: Jet3) -> Jet3 {
        self + (-r)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        Jet3 {
            d: self.d.map(|x| -x),
        }
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, r: Jet3) -> Jet3 {
        let a = self.d;
        let b = r.d;
        Jet3 {
            d: [
                a[0] * b[0],
                a[1] * b[0] + a[0] * b[1],
                a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
                a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3],
            ],
        }
    }
}

impl Div for Jet3 {
    type Output = Jet3;
    fn div(self, r: Jet3) -> Jet3 {
        let x = r.d[0];
        let inv = r.compose([
            1.0 / x,
            -1.0 / (x * x),
            2.0 / (x * x * x),
            -6.0 / (x * x * x * x),
        ]);
        self * inv
    }
}

/// Derivatives of `x^p` for a constant exponent, exact for integer `p`.
pub fn pow_derivs(x: f64, p: f64) -> [f64; 4] {
    if p.fract() == 0.0 && p.abs() < 64.0 {
        let k = p as i32;
        let term = |m: i32| -> f64 {
            // p (p-1) ... (p-m+1) x^(p-m)
            let mut c = 1.0;
            for i in 0..m {
                c *= p - i as f64;
            }
            if c == 0.0 {
                0.0
            } else {
                c * x.powi(k - m)
            }
        };
        [term(0), term(1), term(2), term(3)]
    } else {
        [
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        ]
    }
}
