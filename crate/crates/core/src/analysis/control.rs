//! Controlled skeleton of (ξHH): replacing `dW` by `ḣ(s) ds` and choosing `ḣ`
//! so that the input coordinate follows `Ĩ_s = ζ₀ + ∫₀ˢ S̃(u) du`. The first
//! four coordinates then solve the deterministic system driven by `S̃`.

use std::cell::RefCell;

use crate::detsys::{check_gates, check_step, hh_rhs, rk4_step, step_count};
use crate::diffusion::{InputDiffusionSpec, State5};
use crate::error::{Error, Result};
use crate::gating::State4;
use crate::signal::SignalSpec;

/// Default step of the controlled integration (ms).
pub const CONTROL_DT: f64 = 1e-3;

/// Grid used to check that `Ĩ` stays inside the state interval.
const ADMISSIBILITY_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub start: State5,
    /// The signal `S` carried by the input diffusion.
    pub driving_signal: SignalSpec,
    /// The signal `S̃` the controlled system should follow.
    pub target_signal: SignalSpec,
    pub spec: InputDiffusionSpec,
    pub horizon: f64,
}

impl ControlProblem {
    pub fn new(
        start: State5,
        driving_signal: SignalSpec,
        target_signal: SignalSpec,
        spec: InputDiffusionSpec,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive (got {horizon})")));
        }
        spec.check_signal(&driving_signal)?;
        start.project().validate()?;
        let problem = Self { start, driving_signal, target_signal, spec, horizon };
        for i in 0..=ADMISSIBILITY_GRID {
            let s = horizon * i as f64 / ADMISSIBILITY_GRID as f64;
            let target = problem.target_integral(s);
            if !problem.spec.contains(target) {
                return Err(Error::Domain(format!("target input Ĩ = {target} leaves the state interval at s = {s}")));
            }
        }
        Ok(problem)
    }

    /// `Ĩ_s = ζ₀ + ∫₀ˢ S̃(u) du`.
    pub fn target_integral(&self, s: f64) -> f64 {
        self.start.zeta + self.target_signal.integral(s)
    }
}

/// `ḣ(s) = [S̃(s) + (Ĩ_s − S(s)) τ + ½ d′(Ĩ_s) d(Ĩ_s)] / (γ q(Ĩ_s) √τ)`.
pub fn control_h_dot(problem: &ControlProblem, s: f64) -> Result<f64> {
    let spec = &problem.spec;
    let target = problem.target_integral(s);
    let scale = spec.d(target);
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("control undefined: γ q(Ĩ) √τ = {scale} at s = {s}")));
    }
    let numerator = problem.target_signal.eval(s)
        + (target - problem.driving_signal.eval(s)) * spec.tau
        + 0.5 * spec.d_prime_d(target);
    Ok(numerator / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<State5>,
    /// `ḣ` at the grid times.
    pub h_dot: Vec<f64>,
}

/// RK4 on the controlled five-dimensional system over `[0, horizon]`.
pub fn integrate_controlled(problem: &ControlProblem, dt: f64) -> Result<ControlledTrajectory> {
    check_step(dt)?;
    let steps = step_count(problem.horizon, dt)?;
    let spec = &problem.spec;
    let failure = RefCell::new(None);
    let rhs = |s: f64, y: &[f64; 5]| -> [f64; 5] {
        let h_dot = control_h_dot(problem, s).unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        });
        let zeta = y[4];
        let dzeta = (problem.driving_signal.eval(s) - zeta) * spec.tau - 0.5 * spec.d_prime_d(zeta)
            + spec.d(zeta) * h_dot;
        // The remaining lines are (HH) with S replaced by dζ/ds.
        let four = hh_rhs(s, &State4::from_array([y[0], y[1], y[2], y[3]]), &SignalSpec::Constant(dzeta));
        [four[0], four[1], four[2], four[3], dzeta]
    };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut h_dot = Vec::with_capacity(steps + 1);
    let mut y = problem.start.to_array();
    times.push(0.0);
    states.push(problem.start);
    h_dot.push(control_h_dot(problem, 0.0)?);
    for i in 0..steps {
        let s = i as f64 * dt;
        y = rk4_step(rhs, s, &y, dt);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let t_next = (i + 1) as f64 * dt;
        let x = State5::from_array(y);
        check_gates(&x.project(), t_next)?;
        times.push(t_next);
        states.push(x);
        h_dot.push(control_h_dot(problem, t_next)?);
    }
    Ok(ControlledTrajectory { times, states, h_dot })
}
