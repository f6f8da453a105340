//! Finite-difference bracket oracle.
//!
//! Four nested central differences amplify rounding by roughly `h⁻⁴`, so the
//! raw vector fields are re-evaluated in double-double arithmetic and the
//! differences are taken there. The fields are written out again from the
//! model definition rather than reusing the jet-based code path.

use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::TwoFloat;

use super::BracketSet;
use crate::diffusion::{DiffusionKind, InputDiffusionSpec, State5};
use crate::gating::{E_K, E_L, E_NA, G_K, G_L, G_NA};
use crate::signal::SignalSpec;

/// Base step of the central differences.
pub const ORACLE_STEP: f64 = 5e-2;

pub(crate) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn lift(x: f64) -> Self;
    fn lower(self) -> f64;
    fn sqrt(self) -> Self;
    fn quot(self, rhs: Self) -> Self;
}

impl Scalar for f64 {
    fn lift(x: f64) -> Self {
        x
    }
    fn lower(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Scalar for TwoFloat {
    fn lift(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn lower(self) -> f64 {
        self.hi() + self.lo()
    }
    fn sqrt(self) -> Self {
        dd_sqrt(self)
    }
    fn quot(self, rhs: Self) -> Self {
        dd_div(self, rhs)
    }
}

// The library's own double-double quotient and square root are only accurate
// to about 1e-19, which the nested differences would amplify.

fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::from(q1) + q2 + q3
}

fn dd_sqrt(x: TwoFloat) -> TwoFloat {
    if x.hi() <= 0.0 {
        return TwoFloat::from(0.0);
    }
    let s = x.hi().sqrt();
    let r = x - TwoFloat::new_mul(s, s);
    TwoFloat::from(s) + r.hi() / (2.0 * s)
}

type Vec5<T> = [T; 5];

/// Two rounds of Richardson extrapolation on a central difference `c(ε)`.
fn richardson<T: Scalar>(c: impl Fn(f64) -> Vec5<T>, h: f64) -> Vec5<T> {
    let (c1, c2, c4) = (c(h), c(h / 2.0), c(h / 4.0));
    let (three, fifteen, four, sixteen) = (T::lift(3.0), T::lift(15.0), T::lift(4.0), T::lift(16.0));
    std::array::from_fn(|i| {
        let r1 = (four * c2[i] - c1[i]).quot(three);
        let r2 = (four * c4[i] - c2[i]).quot(three);
        (sixteen * r2 - r1).quot(fifteen)
    })
}

/// `Df(x)·u` by extrapolated central differences along `u/|u|`.
fn directional<T: Scalar>(f: &dyn Fn(T, &Vec5<T>) -> Vec5<T>, t: T, x: &Vec5<T>, u: &Vec5<T>, h: f64) -> Vec5<T> {
    let norm = u.iter().fold(T::lift(0.0), |acc, &c| acc + c * c).sqrt();
    if norm.lower() == 0.0 {
        return [T::lift(0.0); 5];
    }
    let unit: Vec5<T> = u.map(|c| c.quot(norm));
    let central = |eps: f64| {
        let e = T::lift(eps);
        let p = f(t, &std::array::from_fn(|i| x[i] + e * unit[i]));
        let m = f(t, &std::array::from_fn(|i| x[i] - e * unit[i]));
        std::array::from_fn(|i| (norm * (p[i] - m[i])).quot(T::lift(2.0) * e))
    };
    richardson(central, h)
}

fn time_derivative<T: Scalar>(f: &dyn Fn(T, &Vec5<T>) -> Vec5<T>, t: T, x: &Vec5<T>, h: f64) -> Vec5<T> {
    let central = |eps: f64| {
        let e = T::lift(eps);
        let (p, m) = (f(t + e, x), f(t - e, x));
        std::array::from_fn(|i| (p[i] - m[i]).quot(T::lift(2.0) * e))
    };
    richardson(central, h)
}

type Field<'a, T> = Box<dyn Fn(T, &Vec5<T>) -> Vec5<T> + 'a>;

/// `[X, Y] = DY·X − DX·Y`, plus `∂_t Y` when `X` carries the time direction.
fn bracket<'a, T: Scalar + 'a>(x_field: &'a Field<'a, T>, y_field: &'a Field<'a, T>, with_time: bool, h: f64) -> Field<'a, T> {
    Box::new(move |t, p| {
        let dy_x = directional(&**y_field, t, p, &x_field(t, p), h);
        let dx_y = directional(&**x_field, t, p, &y_field(t, p), h);
        let dt_y = if with_time { time_derivative(&**y_field, t, p, h) } else { [T::lift(0.0); 5] };
        std::array::from_fn(|i| dt_y[i] + dy_x[i] - dx_y[i])
    })
}

/// `[X, Y]` of two explicit fields at one point, by central differences.
pub fn lie_bracket_numeric(
    x_field: &dyn Fn(f64, &[f64; 5]) -> [f64; 5],
    y_field: &dyn Fn(f64, &[f64; 5]) -> [f64; 5],
    t: f64,
    p: &[f64; 5],
    h: f64,
) -> [f64; 5] {
    let dy_x = directional(y_field, t, p, &x_field(t, p), h);
    let dx_y = directional(x_field, t, p, &y_field(t, p), h);
    std::array::from_fn(|i| dy_x[i] - dx_y[i])
}

type Dd = TwoFloat;

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

/// `eˣ` by argument reduction, a Taylor sum and repeated squaring.
fn exp(x: Dd) -> Dd {
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = (x - twofloat::consts::LN_2 * k) / 16.0;
    let mut term = dd(1.0);
    let mut sum = dd(1.0);
    for n in 1..=24 {
        term = term * r / n as f64;
        sum += term;
    }
    for _ in 0..4 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

/// `x / (eˣ − 1)`.
fn phi(x: Dd) -> Dd {
    if x.hi().abs() < 1e-3 {
        let x2 = x * x;
        // 1 − x/2 + x²/12 − x⁴/720 + x⁶/30240 − x⁸/1209600
        let even = dd(1.0) + x2 * (dd(1.0) / 12.0 - x2 * (dd(1.0) / 720.0 - x2 * (dd(1.0) / 30240.0 - x2 / 1209600.0)));
        even - x / 2.0
    } else {
        dd_div(x, exp(x) - 1.0)
    }
}

fn rates(v: Dd) -> [(Dd, Dd); 3] {
    let tenth = v / 10.0;
    [
        (phi(dd(1.0) - tenth) * 0.1, exp(-v / 80.0) * 0.125),
        (phi(dd(2.5) - tenth), exp(-v / 18.0) * 4.0),
        (exp(-v / 20.0) * 0.07, dd_div(dd(1.0), exp(dd(3.0) - tenth) + 1.0)),
    ]
}

struct DdModel<'a> {
    spec: &'a InputDiffusionSpec,
    signal: &'a SignalSpec,
}

impl DdModel<'_> {
    /// `(d(ζ), d'(ζ))`.
    fn d(&self, zeta: Dd) -> (Dd, Dd) {
        let scale = dd_sqrt(dd(self.spec.tau)) * self.spec.gamma;
        match self.spec.kind {
            DiffusionKind::Ou => (scale, dd(0.0)),
            DiffusionKind::Cir { k } => {
                let root = dd_sqrt(zeta + k);
                (scale * root, dd_div(scale, root * 2.0))
            }
        }
    }

    fn drift(&self, t: Dd, p: &Vec5<Dd>) -> Vec5<Dd> {
        let [v, n, m, h, zeta] = *p;
        let current = n * n * n * n * G_K * (v - E_K) + m * m * m * h * G_NA * (v - E_NA) + (v - E_L) * G_L;
        let (d, dp) = self.d(zeta);
        let correction = d * dp / 2.0;
        let mean_reversion = (dd(self.signal.eval(t.hi() + t.lo())) - zeta) * self.spec.tau;
        let r = rates(v);
        let gate = |(a, b): (Dd, Dd), x: Dd| a * (dd(1.0) - x) - b * x;
        [
            mean_reversion - current - correction,
            gate(r[0], n),
            gate(r[1], m),
            gate(r[2], h),
            mean_reversion - correction,
        ]
    }

    fn sigma(&self, p: &Vec5<Dd>) -> Vec5<Dd> {
        let d = self.d(p[4]).0;
        [d, dd(0.0), dd(0.0), dd(0.0), d]
    }
}

/// Brackets by repeated central differencing of the raw vector fields,
/// following `V₂ = [∂_t + b̃, σ]`, `V_{k+1} = [σ, V_k]`.
pub fn brackets_numeric_oracle(t: f64, x: &State5, spec: &InputDiffusionSpec, signal: &SignalSpec) -> BracketSet {
    brackets_numeric_oracle_with_step(t, x, spec, signal, ORACLE_STEP)
}

pub fn brackets_numeric_oracle_with_step(
    t: f64,
    x: &State5,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    h: f64,
) -> BracketSet {
    let model = DdModel { spec, signal };
    let drift: Field<Dd> = Box::new(|t, p| model.drift(t, p));
    let sigma: Field<Dd> = Box::new(|_, p| model.sigma(p));
    let v2 = bracket(&drift, &sigma, true, h);
    let v3 = bracket(&sigma, &v2, false, h);
    let v4 = bracket(&sigma, &v3, false, h);
    let v5 = bracket(&sigma, &v4, false, h);
    let p = x.to_array().map(dd);
    let td = dd(t);
    let lower = |w: Vec5<Dd>| w.map(Scalar::lower);
    let v = [lower(v2(td, &p)), lower(v3(td, &p)), lower(v4(td, &p)), lower(v5(td, &p))];
    BracketSet { t, x: *x, sigma: lower(sigma(td, &p)), a: v.map(|b| b[4]), v }
}
