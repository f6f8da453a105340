//! The mean-reverting input diffusion
//! `dξ = (S(t) − ξ) τ dt + γ q(ξ) √τ dW` and the five-dimensional state.

use crate::error::{Error, Result};
use crate::gating::State4;
use crate::jet::Jet;
use crate::signal::SignalSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionKind {
    /// Ornstein-Uhlenbeck type: `q ≡ 1`, state space ℝ.
    Ou,
    /// Cox-Ingersoll-Ross type: `q(x) = √((x + K) ∨ 0)`, state space (−K, ∞).
    Cir { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputDiffusionSpec {
    pub kind: DiffusionKind,
    /// Mean-reversion speed (1/ms).
    pub tau: f64,
    /// Spread of the one-dimensional marginals.
    pub gamma: f64,
}

impl InputDiffusionSpec {
    pub fn ou(tau: f64, gamma: f64) -> Result<Self> {
        Self::new(DiffusionKind::Ou, tau, gamma)
    }

    pub fn cir(tau: f64, gamma: f64, k: f64) -> Result<Self> {
        Self::new(DiffusionKind::Cir { k }, tau, gamma)
    }

    /// `gamma = 0` is accepted: it is the deterministic limit used by
    /// consistency checks, although the bracket conditions need `d > 0`.
    pub fn new(kind: DiffusionKind, tau: f64, gamma: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::SpecViolation(format!("tau = {tau} must be positive")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::SpecViolation(format!("gamma = {gamma} must be non-negative")));
        }
        if let DiffusionKind::Cir { k } = kind {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::SpecViolation(format!("K = {k} must be positive")));
            }
        }
        Ok(Self { kind, tau, gamma })
    }

    /// CIR boundary condition `K > γ²/2 + sup|S|`.
    pub fn check_signal(&self, signal: &SignalSpec) -> Result<()> {
        if let DiffusionKind::Cir { k } = self.kind {
            let bound = self.gamma * self.gamma / 2.0 + signal.sup_abs();
            if !(k > bound) {
                return Err(Error::SpecViolation(format!(
                    "CIR needs K > γ²/2 + sup|S| = {bound} (got K = {k})"
                )));
            }
        }
        Ok(())
    }

    /// Lower end of the state interval `U` (−∞ for OU).
    pub fn lower_bound(&self) -> f64 {
        match self.kind {
            DiffusionKind::Ou => f64::NEG_INFINITY,
            DiffusionKind::Cir { k } => -k,
        }
    }

    pub fn contains(&self, zeta: f64) -> bool {
        zeta.is_finite() && zeta > self.lower_bound()
    }

    pub fn q(&self, zeta: f64) -> f64 {
        match self.kind {
            DiffusionKind::Ou => 1.0,
            DiffusionKind::Cir { k } => (zeta + k).max(0.0).sqrt(),
        }
    }

    pub fn q_jet(&self, zeta: f64, order: usize) -> Jet {
        match self.kind {
            DiffusionKind::Ou => Jet::constant(zeta, 1.0, order),
            DiffusionKind::Cir { k } => Jet::variable(zeta, order).offset(k).sqrt(),
        }
    }

    /// Diffusion coefficient `d(ζ) = γ √τ q(ζ)`.
    pub fn d(&self, zeta: f64) -> f64 {
        self.gamma * self.tau.sqrt() * self.q(zeta)
    }

    pub fn d_jet(&self, zeta: f64, order: usize) -> Jet {
        self.q_jet(zeta, order).scale(self.gamma * self.tau.sqrt())
    }

    /// `d'(ζ) d(ζ)`, twice the Stratonovich correction.
    pub fn d_prime_d(&self, zeta: f64) -> f64 {
        match self.kind {
            DiffusionKind::Ou => 0.0,
            DiffusionKind::Cir { .. } => {
                let j = self.d_jet(zeta, 1);
                j.value() * j.derivative_value(1)
            }
        }
    }

    /// Coordinate shift to the positive process `ξ̃ = ξ + K` (0 for OU).
    pub fn shift(&self) -> f64 {
        match self.kind {
            DiffusionKind::Ou => 0.0,
            DiffusionKind::Cir { k } => k,
        }
    }
}

/// A point `(v, n, m, h, ζ)` of the five-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State5 {
    pub v: f64,
    pub n: f64,
    pub m: f64,
    pub h: f64,
    pub zeta: f64,
}

impl State5 {
    pub fn new(y: State4, zeta: f64, spec: &InputDiffusionSpec) -> Result<Self> {
        y.validate()?;
        if !spec.contains(zeta) {
            return Err(Error::InvalidState(format!("ζ = {zeta} outside the state interval")));
        }
        Ok(Self::probe(y, zeta))
    }

    pub const fn probe(y: State4, zeta: f64) -> Self {
        Self { v: y.v, n: y.n, m: y.m, h: y.h, zeta }
    }

    pub fn project(&self) -> State4 {
        State4::probe(self.v, self.n, self.m, self.h)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.v, self.n, self.m, self.h, self.zeta]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { v: a[0], n: a[1], m: a[2], h: a[3], zeta: a[4] }
    }

    pub fn distance(&self, other: &State5) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
