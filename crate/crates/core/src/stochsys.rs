//! Monte Carlo simulation of the input diffusion and of the five-dimensional
//! system.
//!
//! One step of length `dt` from `(t, v, n, m, h, ξ)`:
//! 1. ξ advances by the exact OU transition, or by full-truncation Euler on
//!    `ξ̃ = ξ + K` for CIR;
//! 2. `V⁺ = V + Δξ − F(v, n, m, h) dt` with the realized increment `Δξ`;
//! 3. each gate relaxes exponentially towards its steady state at frozen `V`.

use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::detsys::{check_gates, check_step, step_count};
use crate::diffusion::{DiffusionKind, InputDiffusionSpec, State5};
use crate::error::{Error, Result};
use crate::gating::{current_f, rates, RateKind, State4};
use crate::rng::{standard_normal, RngStream};
use crate::signal::SignalSpec;

/// Default Monte Carlo step (ms).
pub const MC_DT: f64 = 1e-2;

/// Samples of ξ on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// A simulated path of (ξHH).
#[derive(Debug, Clone, PartialEq)]
pub struct Path5 {
    pub times: Vec<f64>,
    pub states: Vec<State5>,
    /// Smallest `n` with every state inside `K_n`; `None` if no finite `n`
    /// covers the path.
    pub exit_level: Option<u64>,
}

/// One-step transition of the input diffusion.
#[derive(Debug, Clone, Copy)]
struct InputStepper<'a> {
    spec: &'a InputDiffusionSpec,
    signal: &'a SignalSpec,
    dt: f64,
    decay: f64,
    ou_sd: f64,
}

impl<'a> InputStepper<'a> {
    fn new(spec: &'a InputDiffusionSpec, signal: &'a SignalSpec, dt: f64) -> Result<Self> {
        check_step(dt)?;
        spec.check_signal(signal)?;
        let decay = (-spec.tau * dt).exp();
        let ou_sd = spec.gamma * (-(-2.0 * spec.tau * dt).exp_m1() / 2.0).sqrt();
        Ok(Self { spec, signal, dt, decay, ou_sd })
    }

    /// `∫_t^{t+dt} τ S(u) e^{−τ(t+dt−u)} du` by Simpson's rule.
    fn forcing(&self, t: f64) -> f64 {
        let (tau, dt) = (self.spec.tau, self.dt);
        let s = |u: f64| self.signal.eval(u);
        tau * dt / 6.0 * (s(t) * self.decay + 4.0 * s(t + dt / 2.0) * (-tau * dt / 2.0).exp() + s(t + dt))
    }

    fn step(&self, t: f64, xi: f64, z: f64) -> f64 {
        match self.spec.kind {
            DiffusionKind::Ou => xi * self.decay + self.forcing(t) + self.ou_sd * z,
            DiffusionKind::Cir { k } => {
                let shifted = xi + k;
                let target = self.signal.eval(t) + k;
                let diffusion = self.spec.gamma * self.spec.tau.sqrt() * shifted.max(0.0).sqrt();
                shifted + (target - shifted) * self.spec.tau * self.dt + diffusion * self.dt.sqrt() * z - k
            }
        }
    }
}

fn check_start(spec: &InputDiffusionSpec, zeta0: f64) -> Result<()> {
    if !spec.contains(zeta0) {
        return Err(Error::InvalidState(format!("ζ₀ = {zeta0} outside the state interval")));
    }
    Ok(())
}

/// Simulates ξ on `[0, t_end]`.
pub fn simulate_input(
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    zeta0: f64,
    t_end: f64,
    dt: f64,
    rng: RngStream,
) -> Result<InputPath> {
    simulate_input_from(0.0, spec, signal, zeta0, t_end, dt, rng)
}

/// Simulates ξ on `[t0, t_end]` from `ξ_{t0} = zeta0`.
pub fn simulate_input_from(
    t0: f64,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    zeta0: f64,
    t_end: f64,
    dt: f64,
    rng: RngStream,
) -> Result<InputPath> {
    let stepper = InputStepper::new(spec, signal, dt)?;
    check_start(spec, zeta0)?;
    let steps = step_count(t_end - t0, dt)?;
    let mut g = rng.generator();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut xi = zeta0;
    times.push(t0);
    values.push(xi);
    for i in 0..steps {
        xi = stepper.step(t0 + i as f64 * dt, xi, standard_normal(&mut g));
        times.push(t0 + (i + 1) as f64 * dt);
        values.push(xi);
    }
    Ok(InputPath { times, values })
}

/// ξ at `0, T, 2T, …, kT`. The step is adjusted to `T / round(T / dt)` so that
/// the period is hit exactly.
pub fn grid_chain(
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    zeta0: f64,
    k: usize,
    dt: f64,
    rng: RngStream,
) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::Domain("grid chain needs k ≥ 1".into()));
    }
    let period = signal.period();
    let per_period = (period / dt).round().max(1.0) as usize;
    let dt = period / per_period as f64;
    let stepper = InputStepper::new(spec, signal, dt)?;
    check_start(spec, zeta0)?;
    let mut g = rng.generator();
    let mut xi = zeta0;
    let mut out = Vec::with_capacity(k + 1);
    out.push(xi);
    for j in 0..k {
        for i in 0..per_period {
            let t = j as f64 * period + i as f64 * dt;
            xi = stepper.step(t, xi, standard_normal(&mut g));
        }
        out.push(xi);
    }
    Ok(out)
}

/// Smallest `n` with `x ∈ K_n = [−n, n] × [1/n, 1 − 1/n]³ × C_n`, where
/// `C_n = [−n, n]` for OU and `[−K + 1/n, n]` for CIR.
pub fn compact_level(x: &State5, spec: &InputDiffusionSpec) -> Option<u64> {
    let gate = |g: f64| 1.0 / g.min(1.0 - g);
    let zeta = match spec.kind {
        DiffusionKind::Ou => x.zeta.abs(),
        DiffusionKind::Cir { k } => x.zeta.max(1.0 / (x.zeta + k)),
    };
    let need = [x.v.abs(), gate(x.n), gate(x.m), gate(x.h), zeta, 1.0]
        .into_iter()
        .fold(0.0f64, |a, b| if a.is_nan() || b.is_nan() || b < 0.0 { f64::NAN } else { a.max(b) });
    if need.is_finite() && need < u64::MAX as f64 {
        Some(need.ceil() as u64)
    } else {
        None
    }
}

/// Exponential gating step at frozen voltage; exact for constant `v`.
pub fn rush_larsen(kind: RateKind, v: f64, x: f64, dt: f64) -> f64 {
    let (a, b) = rates(kind, v);
    let lambda = a + b;
    let decay = (-lambda * dt).exp();
    x * decay - a / lambda * (-lambda * dt).exp_m1()
}

/// Streams the states of one path to `observe(t, state)`, starting with the
/// initial state at `t0`. Stops early when `observe` returns `false`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_xhh_observed(
    t0: f64,
    x0: State5,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    t_end: f64,
    dt: f64,
    rng: RngStream,
    mut observe: impl FnMut(f64, &State5) -> bool,
) -> Result<()> {
    let stepper = InputStepper::new(spec, signal, dt)?;
    x0.project().validate()?;
    check_start(spec, x0.zeta)?;
    let steps = step_count(t_end - t0, dt)?;
    let mut g = rng.generator();
    let mut x = x0;
    if !observe(t0, &x) {
        return Ok(());
    }
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        x = xhh_step(&stepper, t, &x, &mut g)?;
        if !observe(t0 + (i + 1) as f64 * dt, &x) {
            break;
        }
    }
    Ok(())
}

fn xhh_step(stepper: &InputStepper, t: f64, x: &State5, g: &mut ChaCha20Rng) -> Result<State5> {
    let dt = stepper.dt;
    let zeta = stepper.step(t, x.zeta, standard_normal(g));
    let y = x.project();
    let v = x.v + (zeta - x.zeta) - current_f(&y) * dt;
    let next = State4::probe(
        v,
        rush_larsen(RateKind::N, x.v, x.n, dt),
        rush_larsen(RateKind::M, x.v, x.m, dt),
        rush_larsen(RateKind::H, x.v, x.h, dt),
    );
    check_gates(&next, t + dt)?;
    Ok(State5::probe(next, zeta))
}

/// Simulates (ξHH) on `[0, t_end]`, keeping every state.
pub fn simulate_xhh(
    x0: State5,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    t_end: f64,
    dt: f64,
    rng: RngStream,
) -> Result<Path5> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut exit_level = Some(0);
    simulate_xhh_observed(0.0, x0, spec, signal, t_end, dt, rng, |t, x| {
        times.push(t);
        states.push(*x);
        exit_level = exit_level.zip(compact_level(x, spec)).map(|(a, b)| a.max(b));
        true
    })?;
    Ok(Path5 { times, states, exit_level })
}

/// Runs `n_paths` independent units of work on streams `base.child(i)`,
/// returning results in path order. `workers = None` uses the global pool.
pub fn run_ensemble<T, F>(n_paths: usize, base: RngStream, workers: Option<usize>, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, RngStream) -> Result<T> + Sync + Send,
{
    if n_paths == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let run = || (0..n_paths).into_par_iter().map(|i| work(i, base.child(i as u64))).collect::<Result<Vec<T>>>();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Per-time mean and variance of each coordinate over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<[f64; 5]>,
    /// Unbiased sample variance (0 for a single path).
    pub variance: Vec<[f64; 5]>,
    pub paths: usize,
}

/// Paths simulated concurrently before being folded into the summary.
const SUMMARY_CHUNK: usize = 64;

/// Simulates `paths` trajectories on streams `rng.child(i)` and folds them, in
/// path order, into running moments. The result does not depend on `workers`.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_summary(
    x0: State5,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    t_end: f64,
    dt: f64,
    paths: usize,
    rng: RngStream,
    workers: Option<usize>,
) -> Result<EnsembleSummary> {
    if paths == 0 {
        return Err(Error::EmptyEnsemble);
    }
    check_step(dt)?;
    let steps = step_count(t_end, dt)?;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let mut mean = vec![[0.0; 5]; steps + 1];
    let mut m2 = vec![[0.0; 5]; steps + 1];
    let mut done = 0usize;
    while done < paths {
        let chunk = SUMMARY_CHUNK.min(paths - done);
        let base = rng.child(done as u64);
        let batch = run_ensemble(chunk, base, workers, |_, r| simulate_xhh(x0, spec, signal, t_end, dt, r))?;
        for path in batch {
            done += 1;
            let n = done as f64;
            for (k, x) in path.states.iter().enumerate() {
                let a = x.to_array();
                for j in 0..5 {
                    let delta = a[j] - mean[k][j];
                    mean[k][j] += delta / n;
                    m2[k][j] += delta * (a[j] - mean[k][j]);
                }
            }
        }
    }
    let denom = (paths as f64 - 1.0).max(1.0);
    let variance = m2.iter().map(|row| row.map(|x| if paths > 1 { x / denom } else { 0.0 })).collect();
    Ok(EnsembleSummary { times, mean, variance, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rush_larsen_is_exact_for_frozen_voltage() {
        let (v, x0, t) = (12.0, 0.3, 0.7);
        let (a, b) = rates(RateKind::M, v);
        let exact = a / (a + b) + (x0 - a / (a + b)) * (-(a + b) * t).exp();
        let mut x = x0;
        for _ in 0..70 {
            x = rush_larsen(RateKind::M, v, x, 0.01);
        }
        assert_relative_eq!(x, exact, epsilon = 1e-13);
    }

    #[test]
    fn compact_levels() {
        let ou = InputDiffusionSpec::ou(1.0, 1.0).unwrap();
        let cir = InputDiffusionSpec::cir(1.0, 1.0, 4.0).unwrap();
        let x = State5::probe(State4::probe(2.5, 0.5, 0.5, 0.5), 0.0);
        assert_eq!(compact_level(&x, &ou), Some(3));
        let near_gate = State5::probe(State4::probe(0.0, 0.05, 0.5, 0.5), 0.0);
        assert_eq!(compact_level(&near_gate, &ou), Some(20));
        let near_boundary = State5::probe(State4::probe(0.0, 0.5, 0.5, 0.5), -3.9);
        assert_eq!(compact_level(&near_boundary, &cir), Some(10));
        let outside = State5::probe(State4::probe(0.0, 1.0, 0.5, 0.5), 0.0);
        assert_eq!(compact_level(&outside, &ou), None);
    }

    #[test]
    fn ou_one_step_moments() {
        let spec = InputDiffusionSpec::ou(0.8, 1.3).unwrap();
        let sig = SignalSpec::constant(2.0).unwrap();
        let st = InputStepper::new(&spec, &sig, 0.01).unwrap();
        let (xi, dt): (f64, f64) = (0.5, 0.01);
        let mean = st.step(0.0, xi, 0.0);
        let exact_mean = 2.0 + (xi - 2.0) * (-0.8 * dt).exp();
        assert!((mean - exact_mean).abs() < 1e-12);
        let sd = st.step(0.0, xi, 1.0) - mean;
        let exact_var = 1.3f64.powi(2) * (1.0 - (-2.0 * 0.8 * dt).exp()) / 2.0;
        assert!((sd * sd - exact_var).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cir = InputDiffusionSpec::cir(1.0, 2.0, 3.0).unwrap();
        let sig = SignalSpec::sinusoid(1.0, 10.0).unwrap();
        assert!(matches!(simulate_input(&cir, &sig, 0.0, 1.0, 0.01, RngStream::new(0, 0)), Err(Error::SpecViolation(_))));
        let ou = InputDiffusionSpec::ou(1.0, 1.0).unwrap();
        assert!(matches!(simulate_input(&ou, &sig, 0.0, 1.0, 0.5, RngStream::new(0, 0)), Err(Error::StepOutOfRange { .. })));
        assert!(grid_chain(&ou, &sig, 0.0, 0, 0.01, RngStream::new(0, 0)).is_err());
        assert!(matches!(run_ensemble(0, RngStream::new(0, 0), None, |_, _| Ok(())), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn deterministic_paths() {
        let spec = InputDiffusionSpec::cir(0.5, 1.0, 6.0).unwrap();
        let sig = SignalSpec::sinusoid(1.0, 10.0).unwrap();
        let x0 = State5::probe(State4::on_steady_state_curve(0.0), 1.0);
        let a = simulate_xhh(x0, &spec, &sig, 5.0, 0.01, RngStream::new(3, 9)).unwrap();
        let b = simulate_xhh(x0, &spec, &sig, 5.0, 0.01, RngStream::new(3, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 501);
        let serial = run_ensemble(8, RngStream::new(1, 0), Some(1), |_, r| Ok(simulate_xhh(x0, &spec, &sig, 1.0, 0.01, r)?.states)).unwrap();
        let parallel = run_ensemble(8, RngStream::new(1, 0), Some(4), |_, r| Ok(simulate_xhh(x0, &spec, &sig, 1.0, 0.01, r)?.states)).unwrap();
        assert_eq!(serial, parallel);
        let a = ensemble_summary(x0, &spec, &sig, 1.0, 0.01, 100, RngStream::new(2, 0), Some(1)).unwrap();
        let b = ensemble_summary(x0, &spec, &sig, 1.0, 0.01, 100, RngStream::new(2, 0), Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_matches_direct_moments() {
        let spec = InputDiffusionSpec::ou(1.0, 2.0).unwrap();
        let sig = SignalSpec::constant(1.0).unwrap();
        let x0 = State5::probe(State4::on_steady_state_curve(0.0), 1.0);
        let summary = ensemble_summary(x0, &spec, &sig, 0.5, 0.01, 150, RngStream::new(4, 0), None).unwrap();
        let paths = run_ensemble(150, RngStream::new(4, 0), None, |_, r| simulate_xhh(x0, &spec, &sig, 0.5, 0.01, r)).unwrap();
        let last: Vec<f64> = paths.iter().map(|p| p.states[50].zeta).collect();
        let mean = last.iter().sum::<f64>() / 150.0;
        let var = last.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 149.0;
        assert_relative_eq!(summary.mean[50][4], mean, epsilon = 1e-12);
        assert_relative_eq!(summary.variance[50][4], var, epsilon = 1e-12);
        assert_eq!(summary.times.len(), 51);
    }
}
