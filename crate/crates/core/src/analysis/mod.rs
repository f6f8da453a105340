//! Analytic companions of the input diffusion, the control construction
//! behind tube positivity, and Monte Carlo positivity probes.

mod control;
mod laplace;
mod probes;

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::diffusion::{DiffusionKind, InputDiffusionSpec};
use crate::error::{Error, Result};
use crate::signal::SignalSpec;

pub use control::{control_h_dot, integrate_controlled, ControlProblem, ControlledTrajectory, CONTROL_DT};
pub use laplace::{
    cir_laplace_monte_carlo, cir_laplace_printed, cir_laplace_riccati, laplace_comparison, printed_psi, riccati_exponent,
    LaplaceEstimate, LaplaceRow, RICCATI_STEPS,
};
pub use probes::{
    ball_hit_probability, drifted_equilibrium_pair, kde_positivity_probe, tube_distances, tube_probabilities, tube_probability, tube_reference,
    wilson_interval,
    TubeResult, WILSON_Z,
};

/// Number of Gauss–Laguerre nodes used for the moving average.
pub const LAGUERRE_NODES: usize = 64;

/// Nodes and weights of the `n`-point Gauss–Laguerre rule for `∫₀^∞ f(r) e^{−r} dr`.
///
/// Eigenvalues of the Jacobi matrix give starting points, which are then
/// polished by Newton's method on `L_n`.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Laguerre needs at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 1 {
            (i.max(j)) as f64
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (ln, ln1) = laguerre_pair(n, *x);
            let deriv = n as f64 * (ln - ln1) / *x;
            let step = ln / deriv;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs() {
                break;
            }
        }
        let prev = laguerre_pair(n, *x).1;
        weights.push(*x / (n as f64 * prev).powi(2));
    }
    (nodes, weights)
}

/// `(L_n(x), L_{n−1}(x))` by the three-term recurrence.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn laguerre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_laguerre(LAGUERRE_NODES))
}

/// `M(s) = ∫₀^∞ S(s − r/τ) e^{−r} dr`.
pub fn moving_average(signal: &SignalSpec, s: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("moving average needs τ > 0 (got {tau})")));
    }
    let (nodes, weights) = laguerre_rule();
    Ok(nodes.iter().zip(weights).map(|(r, w)| w * signal.eval(s - r / tau)).sum())
}

/// Marginal law `𝒩(M(s), γ²/2)` of a stationary-start OU input.
#[derive(Debug, Clone, PartialEq)]
pub struct OuStationary {
    signal: SignalSpec,
    tau: f64,
    gamma: f64,
}

impl OuStationary {
    pub fn mean(&self, s: f64) -> f64 {
        moving_average(&self.signal, s, self.tau).expect("τ validated on construction")
    }

    pub fn variance(&self) -> f64 {
        self.gamma * self.gamma / 2.0
    }
}

pub fn ou_stationary(signal: &SignalSpec, spec: &InputDiffusionSpec) -> Result<OuStationary> {
    if spec.kind != DiffusionKind::Ou {
        return Err(Error::Domain("stationary law is only available for OU input".into()));
    }
    Ok(OuStationary { signal: signal.clone(), tau: spec.tau, gamma: spec.gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laguerre_rule_integrates_moments() {
        let (x, w) = gauss_laguerre(LAGUERRE_NODES);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let mut factorial = 1.0;
        for k in 1..=12 {
            factorial *= k as f64;
            let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert_relative_eq!(moment, factorial, max_relative = 1e-12);
        }
    }

    #[test]
    fn small_rules_match_tables() {
        let (x, w) = gauss_laguerre(2);
        assert_relative_eq!(x[0], 2.0 - 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], (2.0 + 2f64.sqrt()) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_signal_average() {
        let sig = SignalSpec::constant(-3.5).unwrap();
        for s in [0.0, 1.3, 40.0] {
            assert_relative_eq!(moving_average(&sig, s, 0.7).unwrap(), -3.5, epsilon = 1e-12);
        }
        assert!(moving_average(&sig, 0.0, 0.0).is_err());
    }

    #[test]
    fn stationary_law_needs_ou() {
        let sig = SignalSpec::constant(1.0).unwrap();
        let cir = InputDiffusionSpec::cir(1.0, 1.0, 3.0).unwrap();
        assert!(ou_stationary(&sig, &cir).is_err());
        let law = ou_stationary(&sig, &InputDiffusionSpec::ou(2.0, 3.0).unwrap()).unwrap();
        assert_eq!(law.variance(), 4.5);
    }
}
