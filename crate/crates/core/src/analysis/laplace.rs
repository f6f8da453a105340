//! Laplace transform of the shifted CIR input `ξ̃ = ξ + K`.
//!
//! Given `ξ̃_s = x̃`, the transition is affine:
//! `E[e^{−λ ξ̃_t}] = exp(−x̃ ψ(s) − φ(s))` where, backwards from `ψ(t) = λ`,
//! `φ(t) = 0`,
//!
//! ```text
//! ψ' = τ ψ + ½ γ² τ ψ²,    φ' = −τ S̃(s) ψ.
//! ```
//!
//! The printed kernel `Ψ_{s,t}(λ) = τ e^{−τ(t−s)} / (1 + λγ²/2 (1 − e^{−τ(t−s)}))`
//! is evaluated as given, for comparison only: it does not reduce to 1 at `λ = 0`.

use crate::diffusion::{DiffusionKind, InputDiffusionSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::signal::SignalSpec;
use crate::stochsys::{run_ensemble, simulate_input_from};

/// Minimum number of backward RK4 steps for the Riccati system.
pub const RICCATI_STEPS: usize = 4000;

fn check_args(x_tilde: f64, s: f64, t: f64, lam: f64, signal: &SignalSpec, spec: &InputDiffusionSpec) -> Result<f64> {
    let DiffusionKind::Cir { k } = spec.kind else {
        return Err(Error::Domain("Laplace transform needs CIR input".into()));
    };
    spec.check_signal(signal)?;
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(Error::Domain(format!("λ must be finite and ≥ 0 (got {lam})")));
    }
    if !(s >= 0.0 && s < t && t.is_finite()) {
        return Err(Error::Domain(format!("need 0 ≤ s < t (got s = {s}, t = {t})")));
    }
    if !(x_tilde > 0.0 && x_tilde.is_finite()) {
        return Err(Error::Domain(format!("x̃ must be positive (got {x_tilde})")));
    }
    Ok(k)
}

/// The kernel `Ψ_{s,t}(λ)` exactly as printed.
pub fn printed_psi(s: f64, t: f64, lam: f64, spec: &InputDiffusionSpec) -> f64 {
    let decay = (-spec.tau * (t - s)).exp();
    spec.tau * decay / (1.0 + lam * spec.gamma * spec.gamma / 2.0 * (1.0 - decay))
}

/// `exp{−x̃ Ψ_{s,t}(λ) − ∫ₛᵗ S̃(v) Ψ_{v,t}(λ) τ dv}` with the printed kernel.
pub fn cir_laplace_printed(
    x_tilde: f64,
    s: f64,
    t: f64,
    lam: f64,
    signal: &SignalSpec,
    spec: &InputDiffusionSpec,
) -> Result<f64> {
    let k = check_args(x_tilde, s, t, lam, signal, spec)?;
    let n = 2 * RICCATI_STEPS;
    let h = (t - s) / n as f64;
    let f = |v: f64| (signal.eval(v) + k) * printed_psi(v, t, lam, spec) * spec.tau;
    let interior: f64 = (1..n).map(|i| f(s + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    let integral = h / 3.0 * (f(s) + interior + f(t));
    Ok((-x_tilde * printed_psi(s, t, lam, spec) - integral).exp())
}

/// `(ψ(s), φ(s))` from the backward Riccati system.
pub fn riccati_exponent(s: f64, t: f64, lam: f64, signal: &SignalSpec, spec: &InputDiffusionSpec) -> Result<(f64, f64)> {
    let k = check_args(1.0, s, t, lam, signal, spec)?;
    let (tau, g2) = (spec.tau, spec.gamma * spec.gamma);
    let steps = RICCATI_STEPS.max(((t - s) / 1e-3).ceil() as usize);
    let h = (t - s) / steps as f64;
    // Reversed time r = t − u turns the terminal problem into an initial one.
    let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] {
        let psi = y[0];
        [-(tau * psi + 0.5 * g2 * tau * psi * psi), tau * (signal.eval(t - r) + k) * psi]
    };
    let mut y = [lam, 0.0];
    for i in 0..steps {
        let r = i as f64 * h;
        let k1 = rhs(r, y);
        let k2 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok((y[0], y[1]))
}

/// `E[e^{−λ ξ̃_t} | ξ̃_s = x̃]` from the Riccati exponent.
pub fn cir_laplace_riccati(
    x_tilde: f64,
    s: f64,
    t: f64,
    lam: f64,
    signal: &SignalSpec,
    spec: &InputDiffusionSpec,
) -> Result<f64> {
    check_args(x_tilde, s, t, lam, signal, spec)?;
    let (psi, phi) = riccati_exponent(s, t, lam, signal, spec)?;
    Ok((-x_tilde * psi - phi).exp())
}

/// Monte Carlo estimate of `E[e^{−λ ξ̃_t}]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Estimates the transform at every `λ` from one ensemble of simulated
/// endpoints `ξ̃_t`.
#[allow(clippy::too_many_arguments)]
pub fn cir_laplace_monte_carlo(
    x_tilde: f64,
    s: f64,
    t: f64,
    lambdas: &[f64],
    signal: &SignalSpec,
    spec: &InputDiffusionSpec,
    paths: usize,
    dt: f64,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<Vec<LaplaceEstimate>> {
    let mut k = 0.0;
    for &lam in lambdas {
        k = check_args(x_tilde, s, t, lam, signal, spec)?;
    }
    let ends = run_ensemble(paths, rng, workers, |_, r| {
        let path = simulate_input_from(s, spec, signal, x_tilde - k, t, dt, r)?;
        Ok(path.values[path.values.len() - 1] + k)
    })?;
    let n = ends.len() as f64;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let mean = ends.iter().map(|x| (-lambda * x).exp()).sum::<f64>() / n;
            let var = ends.iter().map(|x| ((-lambda * x).exp() - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            LaplaceEstimate { lambda, mean, stderr: (var / n).sqrt() }
        })
        .collect())
}

/// One row of the printed / Riccati / Monte Carlo comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceRow {
    pub lambda: f64,
    pub printed: f64,
    pub riccati: f64,
    pub mc: f64,
    pub mc_stderr: f64,
}

/// The three evaluations of the transform at each `λ`.
#[allow(clippy::too_many_arguments)]
pub fn laplace_comparison(
    x_tilde: f64,
    s: f64,
    t: f64,
    lambdas: &[f64],
    signal: &SignalSpec,
    spec: &InputDiffusionSpec,
    paths: usize,
    dt: f64,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<Vec<LaplaceRow>> {
    let mc = cir_laplace_monte_carlo(x_tilde, s, t, lambdas, signal, spec, paths, dt, rng, workers)?;
    mc.into_iter()
        .map(|est| {
            Ok(LaplaceRow {
                lambda: est.lambda,
                printed: cir_laplace_printed(x_tilde, s, t, est.lambda, signal, spec)?,
                riccati: cir_laplace_riccati(x_tilde, s, t, est.lambda, signal, spec)?,
                mc: est.mean,
                mc_stderr: est.stderr,
            })
        })
        .collect()
}
