//! Truncated Taylor series arithmetic.
//!
//! A [`Jet<N>`] stores the first `N` Taylor coefficients of a function at a
//! point, `c[k] = u^{(k)}(x0) / k!`. Arithmetic on jets propagates exact
//! derivatives through compositions, which is how the radial profiles obtain
//! their higher derivatives without symbolic differentiation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    c: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = value;
        Self { c }
    }

    /// The identity function `x ↦ x` expanded at `x0`.
    pub fn variable(x0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x0;
        if N > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn from_coeffs(c: [f64; N]) -> Self {
        Self { c }
    }

    /// Builds a jet from derivative values `d[k] = u^{(k)}(x0)`.
    pub fn from_derivatives(d: [f64; N]) -> Self {
        let mut c = d;
        let mut fact = 1.0;
        for (k, ck) in c.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *ck /= fact;
        }
        Self { c }
    }

    pub fn coeffs(&self) -> &[f64; N] {
        &self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// The `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        self.c[k] * fact
    }

    /// Composition with `x ↦ a·x`: rescales the independent variable.
    pub fn rescale(&self, a: f64) -> Self {
        let mut c = self.c;
        let mut p = 1.0;
        for ck in c.iter_mut() {
            *ck *= p;
            p *= a;
        }
        Self { c }
    }

    pub fn recip(&self) -> Self {
        let a0 = self.c[0];
        let mut r = [0.0; N];
        r[0] = 1.0 / a0;
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.c[j] * r[k - j];
            }
            r[k] = -acc / a0;
        }
        Self { c: r }
    }

    /// Real power `u^a`, valid when the constant term is positive.
    pub fn powf(&self, a: f64) -> Self {
        let u0 = self.c[0];
        let mut y = [0.0; N];
        y[0] = u0.powf(a);
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (a * j as f64 - (k - j) as f64) * self.c[j] * y[k - j];
            }
            y[k] = acc / (k as f64 * u0);
        }
        Self { c: y }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn cbrt(&self) -> Self {
        let mut j = self.powf(1.0 / 3.0);
        j.c[0] = self.c[0].cbrt();
        j
    }

    pub fn exp(&self) -> Self {
        let mut y = [0.0; N];
        y[0] = self.c[0].exp();
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * y[k - j];
            }
            y[k] = acc / k as f64;
        }
        Self { c: y }
    }

    /// Returns `(sinh u, cosh u)`.
    pub fn sinh_cosh(&self) -> (Self, Self) {
        let ep = self.exp();
        let em = (-*self).exp();
        ((ep - em).scale(0.5), (ep + em).scale(0.5))
    }

    /// The antiderivative with constant term `c0`, truncated to `N` terms.
    pub fn integral(&self, c0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = c0;
        for k in 1..N {
            c[k] = self.c[k - 1] / k as f64;
        }
        Self { c }
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= a);
        Self { c }
    }

    /// Evaluates the truncated series at offset `h` from the expansion point.
    pub fn eval_offset(&self, h: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &ck| acc * h + ck)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        Self { c }
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        Self { c }
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Self { c }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let b0 = rhs.c[0];
        let mut q = [0.0; N];
        for k in 0..N {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Self { c: q }
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.c[0] -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl<const N: usize> Div<f64> for Jet<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.scale(1.0 / rhs)
    }
}
