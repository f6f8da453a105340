//! Periodic input signals `S(t)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A T-periodic deterministic input signal.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    /// `S ≡ c`; the conventional period is 1 ms.
    Constant(f64),
    /// `S(t) = a (1 + sin(2πt/T))`.
    Sinusoid { amplitude: f64, period: f64 },
    /// Periodic cubic spline through tabulated samples.
    Table(PeriodicSpline),
}

impl SignalSpec {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::SpecViolation(format!("constant signal {c} is not finite")));
        }
        Ok(Self::Constant(c))
    }

    pub fn sinusoid(amplitude: f64, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) || !amplitude.is_finite() {
            return Err(Error::SpecViolation(format!(
                "sinusoid needs finite amplitude and period > 0 (got a = {amplitude}, T = {period})"
            )));
        }
        Ok(Self::Sinusoid { amplitude, period })
    }

    pub fn table(period: f64, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        PeriodicSpline::new(period, grid, values).map(Self::Table)
    }

    pub fn period(&self) -> f64 {
        match self {
            Self::Constant(_) => 1.0,
            Self::Sinusoid { period, .. } => *period,
            Self::Table(s) => s.period,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Sinusoid { amplitude, period } => amplitude * (1.0 + (2.0 * PI * t / period).sin()),
            Self::Table(s) => s.eval(t),
        }
    }

    /// `∫₀ˢ S(u) du`.
    pub fn integral(&self, s: f64) -> f64 {
        match self {
            Self::Constant(c) => c * s,
            Self::Sinusoid { amplitude, period } => {
                amplitude * (s + period / (2.0 * PI) * (1.0 - (2.0 * PI * s / period).cos()))
            }
            Self::Table(sp) => sp.integral(s),
        }
    }

    /// Period average of the signal.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Sinusoid { amplitude, .. } => *amplitude,
            Self::Table(s) => s.integral(s.period) / s.period,
        }
    }

    /// `sup_t |S(t)|`; tables are sampled densely between knots.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Self::Constant(c) => c.abs(),
            Self::Sinusoid { amplitude, .. } => 2.0 * amplitude.abs(),
            Self::Table(s) => s.sup_abs(),
        }
    }
}

/// Periodic cubic spline on `[0, T)` with knots starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    period: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(period: f64, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::SpecViolation(msg));
        if !(period > 0.0 && period.is_finite()) {
            return bad(format!("table period {period} must be positive"));
        }
        if knots.len() != values.len() || knots.len() < 3 {
            return bad("table needs at least 3 (t, value) samples of equal length".into());
        }
        if knots[0] != 0.0 {
            return bad("table grid must start at t = 0".into());
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || *knots.last().unwrap() >= period {
            return bad("table grid must be strictly increasing within [0, T)".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("table values must be finite".into());
        }

        let n = knots.len();
        let h = |i: usize| -> f64 {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                period - knots[n - 1]
            }
        };
        // cyclic system for the second derivatives
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let (hp, hn) = (h(prev), h(i));
            a[(i, prev)] += hp / 6.0;
            a[(i, i)] += (hp + hn) / 3.0;
            a[(i, next)] += hn / 6.0;
            rhs[i] = (values[next] - values[i]) / hn - (values[i] - values[prev]) / hp;
        }
        let second = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SpecViolation("singular spline system".into()))?;
        Ok(Self { period, knots, values, second: second.iter().copied().collect() })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, i: usize) -> (f64, f64, f64, f64, f64) {
        let n = self.knots.len();
        let j = (i + 1) % n;
        let h = if i + 1 < n { self.knots[i + 1] - self.knots[i] } else { self.period - self.knots[i] };
        (h, self.values[i], self.values[j], self.second[i], self.second[j])
    }

    fn locate(&self, tau: f64) -> usize {
        match self.knots.binary_search_by(|k| k.partial_cmp(&tau).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let tau = t.rem_euclid(self.period);
        let i = self.locate(tau);
        let (h, y0, y1, m0, m1) = self.segment(i);
        let x = tau - self.knots[i];
        let a = h - x;
        m0 * a.powi(3) / (6.0 * h) + m1 * x.powi(3) / (6.0 * h) + (y0 / h - m0 * h / 6.0) * a + (y1 / h - m1 * h / 6.0) * x
    }

    fn segment_integral(&self, i: usize, x: f64) -> f64 {
        let (h, y0, y1, m0, m1) = self.segment(i);
        let a = h - x;
        m0 / (24.0 * h) * (h.powi(4) - a.powi(4))
            + m1 * x.powi(4) / (24.0 * h)
            + (y0 / h - m0 * h / 6.0) * (h * h - a * a) / 2.0
            + (y1 / h - m1 * h / 6.0) * x * x / 2.0
    }

    pub fn integral(&self, s: f64) -> f64 {
        let n = self.knots.len();
        let full: f64 = (0..n).map(|i| self.segment_integral(i, self.segment(i).0)).sum();
        let cycles = (s / self.period).floor();
        let tau = s - cycles * self.period;
        let i = self.locate(tau.min(self.period * (1.0 - f64::EPSILON)));
        let partial: f64 = (0..i).map(|j| self.segment_integral(j, self.segment(j).0)).sum::<f64>()
            + self.segment_integral(i, tau - self.knots[i]);
        cycles * full + partial
    }

    fn sup_abs(&self) -> f64 {
        let n = self.knots.len();
        let mut sup: f64 = 0.0;
        for i in 0..n {
            let h = self.segment(i).0;
            for k in 0..=64 {
                sup = sup.max(self.eval(self.knots[i] + h * k as f64 / 64.0).abs());
            }
        }
        sup
    }
}
