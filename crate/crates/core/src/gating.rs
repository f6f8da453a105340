//! Hodgkin-Huxley rate functions, steady states and the ionic current.
//!
//! Membrane potentials are in mV with the resting potential shifted to 0,
//! rates in 1/ms. The two rate functions with a removable singularity
//! (`α_n` at v = 10, `α_m` at v = 25) are evaluated through
//! `φ(x) = x / (eˣ − 1)`, which switches to its Bernoulli series near 0.
//!
//! `α_h(v) = 0.07·e^{−v/20}` is the classical (decreasing) inactivation
//! rate; the reference values F∞(±10) = (−6.15, 26.61) require it.

use crate::error::{Error, Result};
use crate::jet::{Jet, DEFAULT_ORDER};

/// |x| below which φ is evaluated from its Bernoulli series.
pub const PHI_SERIES_THRESHOLD: f64 = 0.25;

/// Normalized Bernoulli coefficients `B_k / k!` of `x / (eˣ − 1)`, k = 0..=16.
const PHI_SERIES: [f64; 17] = [
    1.0,
    -0.5,
    1.0 / 12.0,
    0.0,
    -1.0 / 720.0,
    0.0,
    1.0 / 30240.0,
    0.0,
    -1.0 / 1209600.0,
    0.0,
    1.0 / 47900160.0,
    0.0,
    -691.0 / 1307674368000.0,
    0.0,
    1.0 / 74724249600.0,
    0.0,
    -3617.0 / 10670622842880000.0,
];

pub const G_K: f64 = 36.0;
pub const G_NA: f64 = 120.0;
pub const G_L: f64 = 0.3;
pub const E_K: f64 = -12.0;
pub const E_NA: f64 = 120.0;
pub const E_L: f64 = 10.6;

/// `x / (eˣ − 1)`, continuous at 0 with φ(0) = 1.
pub fn phi(x: f64) -> f64 {
    if x.abs() < PHI_SERIES_THRESHOLD {
        phi_series(x)
    } else {
        x / x.exp_m1()
    }
}

/// Truncated Bernoulli series of φ; exact to rounding for |x| ≤ 0.25.
pub fn phi_series(x: f64) -> f64 {
    PHI_SERIES.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn phi_jet(x: f64, order: usize) -> Jet {
    let u = Jet::variable(x, order);
    if x.abs() < PHI_SERIES_THRESHOLD {
        u.poly(&PHI_SERIES)
    } else {
        // eˣ − 1 with an accurate value coefficient
        let mut c = u.exp().coeffs().to_vec();
        c[0] = x.exp_m1();
        &u / &Jet::from_coeffs(x, c)
    }
}

/// The three gating variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateKind {
    N,
    M,
    H,
}

impl RateKind {
    pub const ALL: [RateKind; 3] = [RateKind::N, RateKind::M, RateKind::H];

    pub fn symbol(self) -> char {
        match self {
            RateKind::N => 'n',
            RateKind::M => 'm',
            RateKind::H => 'h',
        }
    }
}

/// `(α(v), β(v))` for one gate.
pub fn rates(kind: RateKind, v: f64) -> (f64, f64) {
    match kind {
        RateKind::N => (0.1 * phi(1.0 - 0.1 * v), 0.125 * (-v / 80.0).exp()),
        RateKind::M => (phi(2.5 - 0.1 * v), 4.0 * (-v / 18.0).exp()),
        RateKind::H => (0.07 * (-v / 20.0).exp(), 1.0 / ((3.0 - 0.1 * v).exp() + 1.0)),
    }
}

/// Jets in v of `(α, β)` at `v`.
pub fn rates_jet(kind: RateKind, v: f64, order: usize) -> (Jet, Jet) {
    let var = Jet::variable(v, order);
    match kind {
        RateKind::N => (
            phi_jet(1.0 - 0.1 * v, order).rescale_argument(v, -0.1).scale(0.1),
            var.scale(-1.0 / 80.0).exp().scale(0.125),
        ),
        RateKind::M => (
            phi_jet(2.5 - 0.1 * v, order).rescale_argument(v, -0.1),
            var.scale(-1.0 / 18.0).exp().scale(4.0),
        ),
        RateKind::H => (
            var.scale(-1.0 / 20.0).exp().scale(0.07),
            var.scale(-0.1).offset(3.0).exp().offset(1.0).recip(),
        ),
    }
}

/// Source of gating kinetics. The Hodgkin-Huxley rates are the production
/// implementation; alternative kinetics exist for testing determinant logic.
pub trait Kinetics: Sync {
    fn rates(&self, kind: RateKind, v: f64) -> (f64, f64);
    fn rates_jet(&self, kind: RateKind, v: f64, order: usize) -> (Jet, Jet);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HodgkinHuxley;

impl Kinetics for HodgkinHuxley {
    fn rates(&self, kind: RateKind, v: f64) -> (f64, f64) {
        rates(kind, v)
    }
    fn rates_jet(&self, kind: RateKind, v: f64, order: usize) -> (Jet, Jet) {
        rates_jet(kind, v, order)
    }
}

/// `α / (α + β)`.
pub fn steady_state(kind: RateKind, v: f64) -> f64 {
    let (a, b) = rates(kind, v);
    a / (a + b)
}

pub fn steady_state_jet(kind: RateKind, v: f64, order: usize) -> Jet {
    let (a, b) = rates_jet(kind, v, order);
    &a / &(&a + &b)
}

/// Relaxation rate `α + β` of a gate.
pub fn relaxation_rate(kind: RateKind, v: f64) -> f64 {
    let (a, b) = rates(kind, v);
    a + b
}

/// Gating drift `G_x(v, x) = α(v)(1 − x) − β(v)x`.
pub fn gating_drift(kind: RateKind, v: f64, x: f64) -> f64 {
    let (a, b) = rates(kind, v);
    a * (1.0 - x) - b * x
}

/// A point `(v, n, m, h)` of the four-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State4 {
    pub v: f64,
    pub n: f64,
    pub m: f64,
    pub h: f64,
}

impl State4 {
    /// Checked constructor: gating values must lie in the open interval (0,1).
    pub fn new(v: f64, n: f64, m: f64, h: f64) -> Result<Self> {
        let s = Self { v, n, m, h };
        s.validate()?;
        Ok(s)
    }

    /// Unchecked constructor for analytic probes (closed boundary allowed).
    pub const fn probe(v: f64, n: f64, m: f64, h: f64) -> Self {
        Self { v, n, m, h }
    }

    /// Rest state on the steady-state curve at potential `v`.
    pub fn on_steady_state_curve(v: f64) -> Self {
        Self {
            v,
            n: steady_state(RateKind::N, v),
            m: steady_state(RateKind::M, v),
            h: steady_state(RateKind::H, v),
        }
    }

    pub fn gate(&self, kind: RateKind) -> f64 {
        match kind {
            RateKind::N => self.n,
            RateKind::M => self.m,
            RateKind::H => self.h,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.v, self.n, self.m, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { v: a[0], n: a[1], m: a[2], h: a[3] }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v.is_finite() {
            return Err(Error::InvalidState(format!("v = {} is not finite", self.v)));
        }
        for kind in RateKind::ALL {
            let x = self.gate(kind);
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::InvalidState(format!(
                    "gating variable {} = {x} not in (0,1)",
                    kind.symbol()
                )));
            }
        }
        Ok(())
    }
}

/// Ionic current `F(v, n, m, h)`.
pub fn current_f(s: &State4) -> f64 {
    G_K * s.n.powi(4) * (s.v - E_K) + G_NA * s.m.powi(3) * s.h * (s.v - E_NA) + G_L * (s.v - E_L)
}

/// `∂_v F`, positive on the whole phase space.
pub fn current_f_dv(s: &State4) -> f64 {
    G_K * s.n.powi(4) + G_NA * s.m.powi(3) * s.h + G_L
}

/// Jet of `v ↦ F(v, n, m, h)` with the gating values held fixed.
pub fn current_f_v_jet(s: &State4, order: usize) -> Jet {
    let v = Jet::variable(s.v, order);
    let k = G_K * s.n.powi(4);
    let na = G_NA * s.m.powi(3) * s.h;
    v.offset(-E_K).scale(k) + v.offset(-E_NA).scale(na) + v.offset(-E_L).scale(G_L)
}

/// `F∞(v) = F(v, n∞(v), m∞(v), h∞(v))`.
pub fn f_infty(v: f64) -> f64 {
    current_f(&State4::on_steady_state_curve(v))
}

pub fn f_infty_jet(v: f64, order: usize) -> Jet {
    let var = Jet::variable(v, order);
    let n = steady_state_jet(RateKind::N, v, order);
    let m = steady_state_jet(RateKind::M, v, order);
    let h = steady_state_jet(RateKind::H, v, order);
    let k = n.powi(4).scale(G_K) * var.offset(-E_K);
    let na = (m.powi(3) * h).scale(G_NA) * var.offset(-E_NA);
    k + na + var.offset(-E_L).scale(G_L)
}

/// `[g, ∂_v g, …, ∂_v^max_order g]` at `(v, x)` where
/// `g_x(v, x) = α'(v)(1 − x) − β'(v)x`.
pub fn g_value_and_v_derivs(kind: RateKind, v: f64, x: f64, max_order: usize) -> Result<Vec<f64>> {
    g_value_and_v_derivs_with(&HodgkinHuxley, kind, v, x, max_order, DEFAULT_ORDER)
}

pub fn g_value_and_v_derivs_with<K: Kinetics + ?Sized>(
    kinetics: &K,
    kind: RateKind,
    v: f64,
    x: f64,
    max_order: usize,
    jet_order: usize,
) -> Result<Vec<f64>> {
    if max_order + 1 > jet_order {
        return Err(Error::OrderTooHigh { requested: max_order + 1, available: jet_order });
    }
    let (a, b) = kinetics.rates_jet(kind, v, jet_order);
    Ok((0..=max_order)
        .map(|k| a.derivative_value(k + 1) * (1.0 - x) - b.derivative_value(k + 1) * x)
        .collect())
}
