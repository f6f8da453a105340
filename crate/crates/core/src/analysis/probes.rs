//! Monte Carlo probes of strict positivity: tube and ball hitting
//! frequencies with Wilson intervals, and a kernel density probe.
//!
//! These only corroborate positivity at reachable points; a density estimate
//! is not a statement about the transition density itself.

use std::f64::consts::PI;

use crate::detsys::{check_step, integrate_det, find_equilibrium};
use crate::diffusion::{InputDiffusionSpec, State5};
use crate::error::{Error, Result};
use crate::hormander::{normalized_determinant, DEFAULT_TOL_D};
use crate::rng::RngStream;
use crate::signal::SignalSpec;
use crate::stochsys::{run_ensemble, simulate_xhh, simulate_xhh_observed};

use super::ControlProblem;

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeResult {
    pub hits: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub wilson_ci: (f64, f64),
}

impl TubeResult {
    fn new(hits: usize, trials: usize, epsilon: f64) -> Self {
        Self { hits, trials, epsilon, wilson_ci: wilson_interval(hits, trials) }
    }

    pub fn fraction(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("radius must be positive (got {epsilon})")));
    }
    Ok(())
}

/// `𝕏_s = (𝕐_s, Ĩ_s)`: the deterministic system driven by `S̃` together with
/// the target input, on the grid `0, dt, …, horizon`.
pub fn tube_reference(problem: &ControlProblem, dt: f64) -> Result<Vec<State5>> {
    let det = integrate_det(problem.start.project(), &problem.target_signal, problem.horizon, dt)?;
    Ok(det.times.iter().zip(&det.states).map(|(&s, y)| State5::probe(*y, problem.target_integral(s))).collect())
}

/// Grid sup-distance of each simulated path (driven by `S`) to the reference.
pub fn tube_distances(
    problem: &ControlProblem,
    trials: usize,
    dt: f64,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<Vec<f64>> {
    check_step(dt)?;
    let reference = tube_reference(problem, dt)?;
    run_ensemble(trials, rng, workers, |_, r| {
        let mut sup: f64 = 0.0;
        let mut k = 0;
        simulate_xhh_observed(
            0.0,
            problem.start,
            &problem.spec,
            &problem.driving_signal,
            problem.horizon,
            dt,
            r,
            |_, x| {
                sup = sup.max(x.distance(&reference[k]));
                k += 1;
                true
            },
        )?;
        Ok(sup)
    })
}

/// Frequency of paths staying within `epsilon` of the reference at every grid time.
pub fn tube_probability(
    problem: &ControlProblem,
    epsilon: f64,
    trials: usize,
    dt: f64,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<TubeResult> {
    Ok(tube_probabilities(problem, &[epsilon], trials, dt, rng, workers)?[0])
}

/// Tube frequencies for several radii from one ensemble; hits are therefore
/// nondecreasing in `epsilon`.
pub fn tube_probabilities(
    problem: &ControlProblem,
    epsilons: &[f64],
    trials: usize,
    dt: f64,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<Vec<TubeResult>> {
    if epsilons.is_empty() {
        return Err(Error::Domain("no tube radius given".into()));
    }
    for &eps in epsilons {
        check_epsilon(eps)?;
    }
    let distances = tube_distances(problem, trials, dt, rng, workers)?;
    Ok(epsilons
        .iter()
        .map(|&eps| TubeResult::new(distances.iter().filter(|&&d| d <= eps).count(), trials, eps))
        .collect())
}

/// Frequency of `|X_t − x1| < epsilon` for paths started at `x0`.
#[allow(clippy::too_many_arguments)]
pub fn ball_hit_probability(
    x0: State5,
    x1: State5,
    epsilon: f64,
    t: f64,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    trials: usize,
    dt: f64,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<TubeResult> {
    check_epsilon(epsilon)?;
    x1.project().validate()?;
    if !spec.contains(x1.zeta) {
        return Err(Error::InvalidState(format!("target ζ = {} outside the state interval", x1.zeta)));
    }
    let ends = run_ensemble(trials, rng, workers, |_, r| {
        let path = simulate_xhh(x0, spec, signal, t, dt, r)?;
        Ok(path.states[path.states.len() - 1])
    })?;
    let hits = ends.iter().filter(|x| x.distance(&x1) < epsilon).count();
    Ok(TubeResult::new(hits, trials, epsilon))
}

/// The pair `x_c = (v_c, n∞, m∞, h∞, ζ)`, `x_c′ = (v_c, n∞, m∞, h∞, ζ + c t)`
/// where `v_c` is the equilibrium voltage for the constant input `c`.
pub fn drifted_equilibrium_pair(c: f64, zeta: f64, t: f64) -> Result<(State5, State5)> {
    let eq = find_equilibrium(c)?;
    Ok((State5::probe(eq, zeta), State5::probe(eq, zeta + c * t)))
}

/// Product-Gaussian kernel density estimate at `center`.
pub fn kde_positivity_probe(samples: &[State5], center: &State5, bandwidth: &[f64; 5]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if bandwidth.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::Domain(format!("bandwidths must be positive (got {bandwidth:?})")));
    }
    let normalized_d = normalized_determinant(&center.project());
    if !(normalized_d.abs() > DEFAULT_TOL_D) {
        return Err(Error::OutsideHormanderSet { normalized_d });
    }
    let c = center.to_array();
    let norm: f64 = bandwidth.iter().map(|b| b * (2.0 * PI).sqrt()).product();
    let total: f64 = samples
        .iter()
        .map(|x| {
            let a = x.to_array();
            let q: f64 = (0..5).map(|i| ((a[i] - c[i]) / bandwidth[i]).powi(2)).sum();
            (-0.5 * q).exp()
        })
        .sum();
    Ok(total / (samples.len() as f64 * norm))
}
