//! Truncated Taylor arithmetic in one variable.
//!
//! A [`Jet`] stores normalized Taylor coefficients `c[k] = f^(k)(x0) / k!`
//! of a scalar function at a base point. All operations are exact on the
//! truncated series, so the `k`-th derivative of a composite expression is
//! available to machine precision without symbolic algebra.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Default truncation order used throughout the crate.
pub const DEFAULT_ORDER: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    base: f64,
    coeffs: Vec<f64>,
}

impl Jet {
    /// Jet from raw normalized coefficients.
    pub fn from_coeffs(base: f64, coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the value coefficient");
        Self { base, coeffs }
    }

    /// The constant function `value`.
    pub fn constant(base: f64, value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { base, coeffs }
    }

    /// The identity function `x ↦ x` expanded at `base`.
    pub fn variable(base: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = base;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Self { base, coeffs }
    }

    pub fn base_point(&self) -> f64 {
        self.base
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `f^(k)(x0)`, i.e. the normalized coefficient times `k!`.
    pub fn derivative_value(&self, k: usize) -> f64 {
        self.coeffs[k] * factorial(k)
    }

    /// All derivatives `f(x0), f'(x0), …, f^(order)(x0)`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|k| self.derivative_value(k)).collect()
    }

    /// Jet of `f'`; the order drops by one.
    pub fn derivative(&self) -> Jet {
        if self.order() == 0 {
            return Jet::constant(self.base, 0.0, 0);
        }
        let coeffs = (1..self.coeffs.len())
            .map(|k| k as f64 * self.coeffs[k])
            .collect();
        Jet { base: self.base, coeffs }
    }

    /// Jet of `v ↦ f(u0 + slope·(v − v0))` at `v0`, given the jet of `f` at `u0`.
    pub fn rescale_argument(&self, new_base: f64, slope: f64) -> Jet {
        let mut scale = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let out = c * scale;
                scale *= slope;
                out
            })
            .collect();
        Jet { base: new_base, coeffs }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let n = (order + 1).min(self.coeffs.len());
        Jet { base: self.base, coeffs: self.coeffs[..n].to_vec() }
    }

    pub fn scale(&self, k: f64) -> Jet {
        self.map(|c| c * k)
    }

    pub fn offset(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    pub fn exp(&self) -> Jet {
        let n = self.coeffs.len();
        let f = &self.coeffs;
        let mut y = vec![0.0; n];
        y[0] = f[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * f[j] * y[k - j]).sum();
            y[k] = s / k as f64;
        }
        Jet { base: self.base, coeffs: y }
    }

    pub fn recip(&self) -> Jet {
        Jet::constant(self.base, 1.0, self.order()) / self.clone()
    }

    pub fn sqrt(&self) -> Jet {
        let n = self.coeffs.len();
        let f = &self.coeffs;
        let mut s = vec![0.0; n];
        s[0] = f[0].sqrt();
        for k in 1..n {
            let cross: f64 = (1..k).map(|j| s[j] * s[k - j]).sum();
            s[k] = (f[k] - cross) / (2.0 * s[0]);
        }
        Jet { base: self.base, coeffs: s }
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(self.base, 1.0, self.order());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Evaluate the polynomial `Σ p[i] xⁱ` on this jet (Horner).
    pub fn poly(&self, p: &[f64]) -> Jet {
        let mut acc = Jet::constant(self.base, 0.0, self.order());
        for &c in p.iter().rev() {
            acc = (&acc * self).offset(c);
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet { base: self.base, coeffs: self.coeffs.iter().map(|&c| f(c)).collect() }
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeffs[k] + rhs.coeffs[k]).collect();
        Jet { base: self.base, coeffs }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeffs[k] - rhs.coeffs[k]).collect();
        Jet { base: self.base, coeffs }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|k| (0..=k).map(|j| self.coeffs[j] * rhs.coeffs[k - j]).sum())
            .collect();
        Jet { base: self.base, coeffs }
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let b = &rhs.coeffs;
        let mut q = vec![0.0; n];
        for k in 0..n {
            let s: f64 = (1..=k).map(|j| b[j] * q[k - j]).sum();
            q[k] = (self.coeffs[k] - s) / b[0];
        }
        Jet { base: self.base, coeffs: q }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|c| -c)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}
