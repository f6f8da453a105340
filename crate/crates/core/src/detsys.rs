//! Deterministic Hodgkin-Huxley dynamics with a periodic input signal.

use crate::error::{Error, Result};
use crate::gating::{current_f, f_infty, f_infty_jet, gating_drift, RateKind, State4};
use crate::signal::SignalSpec;

/// Largest admissible fixed step (ms).
pub const MAX_DT: f64 = 0.01;
/// Default step for orbit work (ms).
pub const ORBIT_DT: f64 = 1e-3;
/// Default transient discarded before measuring a period (ms).
pub const DEFAULT_TRANSIENT: f64 = 60.0;
/// Offset (mV) applied to the equilibrium potential when starting orbit
/// detection; an exact equilibrium is a fixed point of the discrete flow too.
pub const ORBIT_START_OFFSET: f64 = 1e-3;
/// Potential bracket searched for equilibria (mV).
pub const EQUILIBRIUM_BRACKET: (f64, f64) = (-50.0, 50.0);

/// Fixed-step trajectory of the four-dimensional system.
#[derive(Debug, Clone)]
pub struct Trajectory4 {
    pub times: Vec<f64>,
    pub states: Vec<State4>,
    pub signal: SignalSpec,
    pub step: f64,
}

impl Trajectory4 {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Cubic Hermite interpolation using the vector field at the grid
    /// points; accurate to O(dt⁴) between steps.
    pub fn interpolate(&self, t: f64) -> State4 {
        let t0 = self.times[0];
        let last = self.times.len() - 1;
        let pos = ((t - t0) / self.step).clamp(0.0, last as f64);
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return self.states[0];
        }
        let h = self.times[i + 1] - self.times[i];
        let s = ((t - self.times[i]) / h).clamp(0.0, 1.0);
        let y0 = self.states[i].to_array();
        let y1 = self.states[i + 1].to_array();
        let f0 = hh_rhs(self.times[i], &self.states[i], &self.signal);
        let f1 = hh_rhs(self.times[i + 1], &self.states[i + 1], &self.signal);
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k];
        }
        State4::from_array(out)
    }
}

/// Right-hand side `(S(t) − F, G_n, G_m, G_h)`.
pub fn hh_rhs(t: f64, s: &State4, signal: &SignalSpec) -> [f64; 4] {
    [
        signal.eval(t) - current_f(s),
        gating_drift(RateKind::N, s.v, s.n),
        gating_drift(RateKind::M, s.v, s.m),
        gating_drift(RateKind::H, s.v, s.h),
    ]
}

/// One classical Runge-Kutta step.
pub(crate) fn rk4_step<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> [f64; N] {
    let axpy = |a: f64, x: &[f64; N], y: &[f64; N]| -> [f64; N] {
        let mut out = *y;
        for k in 0..N {
            out[k] += a * x[k];
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k1, y));
    let k3 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k2, y));
    let k4 = f(t + dt, &axpy(dt, &k3, y));
    let mut out = *y;
    for k in 0..N {
        out[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    out
}

pub(crate) fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::StepOutOfRange { dt, max: MAX_DT });
    }
    Ok(())
}

pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("horizon {t_end} must be finite and non-negative")));
    }
    Ok((t_end / dt).round() as usize)
}

pub(crate) fn check_gates(s: &State4, t: f64) -> Result<()> {
    for kind in RateKind::ALL {
        let x = s.gate(kind);
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::StateEscape { var: kind.symbol(), value: x, t });
        }
    }
    Ok(())
}

/// Fixed-step RK4 integration of (HH) from `t = 0`.
pub fn integrate_det(s0: State4, signal: &SignalSpec, t_end: f64, dt: f64) -> Result<Trajectory4> {
    check_step(dt)?;
    s0.validate()?;
    let steps = step_count(t_end, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = s0.to_array();
    times.push(0.0);
    states.push(s0);
    let rhs = |t: f64, y: &[f64; 4]| hh_rhs(t, &State4::from_array(*y), signal);
    for i in 0..steps {
        let t = i as f64 * dt;
        y = rk4_step(rhs, t, &y, dt);
        let s = State4::from_array(y);
        let t_next = (i + 1) as f64 * dt;
        check_gates(&s, t_next)?;
        times.push(t_next);
        states.push(s);
    }
    Ok(Trajectory4 { times, states, signal: signal.clone(), step: dt })
}

/// Equilibrium `(v, n∞(v), m∞(v), h∞(v))` of (HH) under `S ≡ c`.
pub fn find_equilibrium(c: f64) -> Result<State4> {
    let (mut lo, mut hi) = EQUILIBRIUM_BRACKET;
    let (f_lo, f_hi) = (f_infty(lo) - c, f_infty(hi) - c);
    if !c.is_finite() || f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NoBracket { c, lo: f_infty(lo), hi: f_infty(hi) });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_infty(mid) - c <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    // Newton polish; bisection already pinned the root to the last ulps
    for _ in 0..3 {
        let jet = f_infty_jet(v, 1);
        let slope = jet.derivative_value(1);
        if slope == 0.0 {
            break;
        }
        let next = v - (jet.value() - c) / slope;
        if !(next.is_finite()) || (next - v).abs() > 1e-6 {
            break;
        }
        if (f_infty(next) - c).abs() <= (f_infty(v) - c).abs() {
            v = next;
        }
    }
    Ok(State4::on_steady_state_curve(v))
}

/// Periodic-orbit diagnostics from a Poincaré section `v = level` (upcrossings).
#[derive(Debug, Clone)]
pub struct OrbitSummary {
    pub period: f64,
    pub level: f64,
    pub section_crossings: Vec<f64>,
    /// Grid states on the last complete loop.
    pub orbit_samples: Trajectory4,
    pub converged: bool,
    /// Sup distance between the last two loops, aligned at their crossings.
    pub superposition_error: f64,
}

/// Tolerance on the loop superposition error for `converged`.
pub const SUPERPOSITION_TOL: f64 = 1e-3;

/// Detects the stable orbit reached from (a numerical approximation to) the
/// equilibrium of the signal's mean level, using the section `v ↑ 0`.
pub fn detect_orbit(signal: &SignalSpec, transient: f64, horizon: f64, dt: f64) -> Result<OrbitSummary> {
    detect_orbit_at_level(signal, 0.0, transient, horizon, dt)
}

pub fn detect_orbit_at_level(
    signal: &SignalSpec,
    level: f64,
    transient: f64,
    horizon: f64,
    dt: f64,
) -> Result<OrbitSummary> {
    if !(transient >= 0.0 && horizon > transient) {
        return Err(Error::Domain(format!(
            "need 0 ≤ transient < horizon (got {transient}, {horizon})"
        )));
    }
    let eq = find_equilibrium(signal.mean())?;
    let start = State4 { v: eq.v + ORBIT_START_OFFSET, ..eq };
    let traj = integrate_det(start, signal, horizon, dt)?;
    summarize_orbit(traj, level, transient)
}

/// Upcrossing times of `v` through `level` at or after `after`, by linear
/// interpolation between grid points.
pub fn upcrossings(traj: &Trajectory4, level: f64, after: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..traj.len().saturating_sub(1) {
        let (a, b) = (traj.states[i].v, traj.states[i + 1].v);
        if a < level && b >= level {
            let t = traj.times[i] + (traj.times[i + 1] - traj.times[i]) * (level - a) / (b - a);
            if t >= after {
                out.push(t);
            }
        }
    }
    out
}

/// Period and loop diagnostics for an already integrated trajectory.
pub fn summarize_orbit(traj: Trajectory4, level: f64, transient: f64) -> Result<OrbitSummary> {
    let crossings = upcrossings(&traj, level, transient);
    let k = crossings.len();
    if k < 5 {
        return Err(Error::NoOscillation { crossings: k });
    }
    let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let period = gaps[gaps.len() - 4..].iter().sum::<f64>() / 4.0;

    let (c0, c1, c2) = (crossings[k - 3], crossings[k - 2], crossings[k - 1]);
    let mut superposition_error: f64 = 0.0;
    let span = (c1 - c0).min(c2 - c1);
    let mut theta = 0.0;
    while theta <= span {
        let a = traj.interpolate(c0 + theta).to_array();
        let b = traj.interpolate(c1 + theta).to_array();
        let d = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        superposition_error = superposition_error.max(d);
        theta += traj.step;
    }

    let first = traj.times.iter().position(|&t| t >= c1).unwrap_or(traj.len());
    let last = traj.times.iter().rposition(|&t| t < c2).unwrap_or(0);
    let orbit_samples = Trajectory4 {
        times: traj.times[first..=last].to_vec(),
        states: traj.states[first..=last].to_vec(),
        signal: traj.signal.clone(),
        step: traj.step,
    };

    Ok(OrbitSummary {
        period,
        level,
        section_crossings: crossings,
        orbit_samples,
        converged: superposition_error < SUPERPOSITION_TOL,
        superposition_error,
    })
}
