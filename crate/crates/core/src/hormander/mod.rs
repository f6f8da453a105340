//! Lie brackets of the five-dimensional system and the determinant that
//! controls their span.
//!
//! The diffusion field is `σ = d(ζ)(e₁ + e₅)` and the drift, written in
//! Stratonovich form, is `b̃`. The bracket chain
//! `V₂ = [∂_t + b̃, σ]`, `V_{k+1} = [σ, V_k]` has the structure
//!
//! ```text
//! V_k = Σ_j c_{k,j}(ζ) W_j(x) + A_k(t, ζ) (e₁ + e₅),
//! W_j = (∂ʲ_v F, −∂ʲ_v G_n, −∂ʲ_v G_m, −∂ʲ_v G_h, 0),
//! ```
//!
//! and one application of `[σ, ·]` maps the coefficients as
//! `c_{k+1,j+1} += d c_{k,j}`, `c_{k+1,j} += d c'_{k,j}`,
//! `A_{k+1} = d ∂_ζ A_k − A_k d'`. The closed form evaluates this recursion
//! on Taylor jets in ζ; the numeric oracle instead differentiates the raw
//! vector fields by central differences.

use nalgebra::{Matrix3, Matrix5};
use rayon::prelude::*;

use crate::detsys::OrbitSummary;
use crate::diffusion::{InputDiffusionSpec, State5};
use crate::error::{Error, Result};
use crate::gating::{
    current_f, current_f_v_jet, g_value_and_v_derivs_with, gating_drift, HodgkinHuxley, Kinetics,
    RateKind, State4,
};
use crate::jet::{Jet, DEFAULT_ORDER};
use crate::signal::SignalSpec;

/// Default threshold on the normalized determinant for membership in 𝒪.
pub const DEFAULT_TOL_D: f64 = 1e-8;

/// Rows `(g', g'', g''')` for n, m, h.
pub fn determinant_rows_with<K: Kinetics + ?Sized>(kinetics: &K, s: &State4) -> [[f64; 3]; 3] {
    RateKind::ALL.map(|kind| {
        let g = g_value_and_v_derivs_with(kinetics, kind, s.v, s.gate(kind), 3, DEFAULT_ORDER)
            .expect("order 3 is within the default jet order");
        [g[1], g[2], g[3]]
    })
}

fn det3(r: &[[f64; 3]; 3]) -> f64 {
    Matrix3::from_fn(|i, j| r[i][j]).determinant()
}

/// `D(v, n, m, h) = det[(g'_x, g''_x, g'''_x)]_{x = n, m, h}`.
pub fn determinant_d(s: &State4) -> f64 {
    determinant_d_with(&HodgkinHuxley, s)
}

pub fn determinant_d_with<K: Kinetics + ?Sized>(kinetics: &K, s: &State4) -> f64 {
    det3(&determinant_rows_with(kinetics, s))
}

/// `D` divided by the product of its row norms; lies in [−1, 1].
pub fn normalized_determinant(s: &State4) -> f64 {
    let rows = determinant_rows_with(&HodgkinHuxley, s);
    let scale: f64 = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).product();
    if scale == 0.0 {
        0.0
    } else {
        det3(&rows) / scale
    }
}

/// `D` along the steady-state curve.
pub fn determinant_on_equilibria(v: f64) -> f64 {
    determinant_d(&State4::on_steady_state_curve(v))
}

/// Grid samples of `D` along the steady-state curve and the zeros found from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumScan {
    pub samples: Vec<(f64, f64)>,
    pub zeros: Vec<f64>,
}

/// Zeros of `v ↦ D(v, n∞(v), m∞(v), h∞(v))` on `[v_lo, v_hi]`: sign changes
/// on a uniform grid, each refined by bisection to rounding level.
pub fn scan_equilibrium_curve(v_lo: f64, v_hi: f64, grid_n: usize) -> Result<Vec<f64>> {
    Ok(equilibrium_scan(v_lo, v_hi, grid_n)?.zeros)
}

/// As [`scan_equilibrium_curve`], keeping the grid samples.
pub fn equilibrium_scan(v_lo: f64, v_hi: f64, grid_n: usize) -> Result<EquilibriumScan> {
    if !(v_lo < v_hi) || !v_lo.is_finite() || !v_hi.is_finite() {
        return Err(Error::Domain(format!("invalid scan range ({v_lo}, {v_hi})")));
    }
    if grid_n < 100 {
        return Err(Error::Domain(format!("grid_n = {grid_n} must be at least 100")));
    }
    let h = (v_hi - v_lo) / grid_n as f64;
    let samples: Vec<(f64, f64)> = (0..=grid_n)
        .into_par_iter()
        .map(|i| {
            let v = if i == grid_n { v_hi } else { v_lo + i as f64 * h };
            (v, determinant_on_equilibria(v))
        })
        .collect();
    let mut zeros = Vec::new();
    for w in samples.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(determinant_on_equilibria, a, b, fa));
        }
    }
    if samples[grid_n].1 == 0.0 {
        zeros.push(v_hi);
    }
    Ok(EquilibriumScan { samples, zeros })
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// `D` along a detected orbit.
#[derive(Debug, Clone)]
pub struct OrbitScan {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
    /// Cyclic index range `[start, end]` from the upcrossing of −2 mV to the
    /// following upcrossing of +5 mV.
    pub segment: Option<(usize, usize)>,
    /// Sign changes of `D` on the orbit outside the segment.
    pub sign_changes_outside: usize,
    pub max_abs_d: f64,
    /// Index of the maximal membrane potential.
    pub v_max_index: usize,
}

/// Lower and upper section levels bounding the negative-D segment (mV).
pub const SEGMENT_LEVELS: (f64, f64) = (-2.0, 5.0);

impl OrbitScan {
    pub fn in_segment(&self, i: usize) -> bool {
        match self.segment {
            None => false,
            Some((s, e)) if s <= e => i >= s && i <= e,
            Some((s, e)) => i >= s || i <= e,
        }
    }
}

fn cyclic_upcrossing(v: &[f64], level: f64, from: usize) -> Option<usize> {
    let n = v.len();
    (0..n).map(|k| (from + k) % n).find(|&i| v[i] < level && v[(i + 1) % n] >= level)
}

/// Evaluates `D` at every orbit sample and locates the segment between the
/// −2 mV and +5 mV upcrossings.
pub fn scan_orbit(orbit: &OrbitSummary) -> Result<OrbitScan> {
    if !orbit.converged {
        return Err(Error::Domain(format!(
            "orbit not converged (superposition error {:e})",
            orbit.superposition_error
        )));
    }
    let samples = &orbit.orbit_samples;
    let d: Vec<f64> = samples.states.par_iter().map(determinant_d).collect();
    let v: Vec<f64> = samples.states.iter().map(|s| s.v).collect();
    let n = v.len();
    let max_abs_d = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let v_max_index = (0..n).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);

    let segment = cyclic_upcrossing(&v, SEGMENT_LEVELS.0, 0).and_then(|i| {
        let start = (i + 1) % n;
        cyclic_upcrossing(&v, SEGMENT_LEVELS.1, start).map(|j| (start, j))
    });

    let mut sign_changes_outside = 0;
    if let Some((s, e)) = segment {
        let mut prev: Option<f64> = None;
        let mut i = (e + 1) % n;
        while i != s {
            if d[i] != 0.0 {
                if let Some(p) = prev {
                    if p * d[i] < 0.0 {
                        sign_changes_outside += 1;
                    }
                }
                prev = Some(d[i]);
            }
            i = (i + 1) % n;
        }
    }

    Ok(OrbitScan {
        times: samples.times.clone(),
        v,
        d,
        segment,
        sign_changes_outside,
        max_abs_d,
        v_max_index,
    })
}

/// Stratonovich drift `b̃(t, x)`.
pub fn stratonovich_drift(t: f64, x: &State5, spec: &InputDiffusionSpec, signal: &SignalSpec) -> [f64; 5] {
    let y = x.project();
    let mean_reversion = (signal.eval(t) - x.zeta) * spec.tau;
    let correction = 0.5 * spec.d_prime_d(x.zeta);
    [
        mean_reversion - current_f(&y) - correction,
        gating_drift(RateKind::N, y.v, y.n),
        gating_drift(RateKind::M, y.v, y.m),
        gating_drift(RateKind::H, y.v, y.h),
        mean_reversion - correction,
    ]
}

/// Diffusion field `σ(x) = d(ζ)(e₁ + e₅)`.
pub fn diffusion_field(x: &State5, spec: &InputDiffusionSpec) -> [f64; 5] {
    let d = spec.d(x.zeta);
    [d, 0.0, 0.0, 0.0, d]
}

/// The bracket chain σ, V₂…V₅ at one point, with the coefficients A₂…A₅ of
/// their `(e₁ + e₅)` parts.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketSet {
    pub t: f64,
    pub x: State5,
    pub sigma: [f64; 5],
    /// `[V₂, V₃, V₄, V₅]`.
    pub v: [[f64; 5]; 4],
    /// `[A₂, A₃, A₄, A₅]`.
    pub a: [f64; 4],
}

impl BracketSet {
    /// `V_k` for `k ∈ 2..=5`.
    pub fn bracket(&self, k: usize) -> &[f64; 5] {
        &self.v[k - 2]
    }

    /// Columns `[σ, V₂, V₃, V₄, V₅]`.
    pub fn columns(&self) -> [[f64; 5]; 5] {
        [self.sigma, self.v[0], self.v[1], self.v[2], self.v[3]]
    }

    pub fn matrix(&self) -> Matrix5<f64> {
        let cols = self.columns();
        Matrix5::from_fn(|i, j| cols[j][i])
    }
}

/// Order of the ζ-jets used in the closed-form recursion; each bracket
/// consumes one derivative and A₂ already uses two.
const ZETA_ORDER: usize = 8;

/// `W_j` for `j = 1..=4` (index 0 unused).
fn w_fields(y: &State4) -> [[f64; 5]; 5] {
    let f = current_f_v_jet(y, 4);
    let mut w = [[0.0; 5]; 5];
    let g: Vec<Vec<f64>> = RateKind::ALL
        .iter()
        .map(|&k| g_value_and_v_derivs_with(&HodgkinHuxley, k, y.v, y.gate(k), 3, DEFAULT_ORDER).unwrap())
        .collect();
    for j in 1..=4 {
        w[j] = [f.derivative_value(j), -g[0][j - 1], -g[1][j - 1], -g[2][j - 1], 0.0];
    }
    w
}

/// Closed-form brackets from the coefficient recursion.
pub fn brackets_closed_form(t: f64, x: &State5, spec: &InputDiffusionSpec, signal: &SignalSpec) -> BracketSet {
    let tau = spec.tau;
    let d = spec.d_jet(x.zeta, ZETA_ORDER);
    let d1 = d.derivative();
    let d2 = d1.derivative();
    let zeta = Jet::variable(x.zeta, ZETA_ORDER);
    // b̃⁵(t, ·) as a function of ζ
    let b5 = zeta.scale(-tau).offset(signal.eval(t) * tau) - (&d1 * &d).scale(0.5);
    let mut a_k = &d1 * &b5 + &d * &(&d1 * &d1 + &d * &d2).scale(0.5).offset(tau);

    let zero = Jet::constant(x.zeta, 0.0, ZETA_ORDER);
    let mut c: Vec<Jet> = vec![zero.clone(); 5];
    c[1] = d.clone();

    let w = w_fields(&x.project());
    let mut v = [[0.0; 5]; 4];
    let mut a = [0.0; 4];
    for k in 0..4 {
        let mut out = [0.0; 5];
        for j in 1..=4 {
            let cj = c[j].value();
            for i in 0..5 {
                out[i] += cj * w[j][i];
            }
        }
        out[0] += a_k.value();
        out[4] += a_k.value();
        v[k] = out;
        a[k] = a_k.value();
        if k == 3 {
            break;
        }
        let mut next = vec![zero.clone(); 5];
        for j in 1..=4 {
            let dc = &d * &c[j].derivative();
            next[j] = &next[j] + &dc;
            if j < 4 {
                next[j + 1] = &next[j + 1] + &(&d * &c[j]);
            }
        }
        c = next;
        a_k = &d * &a_k.derivative() - &a_k * &d1;
    }

    BracketSet { t, x: *x, sigma: diffusion_field(x, spec), v, a }
}

mod oracle;

pub use oracle::{brackets_numeric_oracle, brackets_numeric_oracle_with_step, lie_bracket_numeric, ORACLE_STEP};

/// Local Hörmander diagnostics at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HormanderReport {
    pub d_value: f64,
    pub normalized_d: f64,
    /// Smallest singular value of `[σ V₂ V₃ V₄ V₅]` after [`equilibrate`].
    pub min_singular_value: f64,
    /// `inf_{|η|=1} Σ_V ⟨V, η⟩²` over the chain, i.e. the smallest eigenvalue
    /// of the Gram matrix.
    pub v_l_gram: f64,
    pub in_o: bool,
}

/// Sweeps of alternating row/column equilibration before the final column
/// normalization.
const EQUILIBRATION_SWEEPS: usize = 10;

/// Diagonal row and column scaling (Ruiz iteration) followed by unit-norm
/// columns. Rank is unchanged; the coordinates of a bracket differ by many
/// orders of magnitude, which otherwise dominates the smallest singular value.
pub fn equilibrate(mut m: Matrix5<f64>) -> Matrix5<f64> {
    for _ in 0..EQUILIBRATION_SWEEPS {
        for mut row in m.row_iter_mut() {
            let r = row.amax().sqrt();
            if r > 0.0 {
                row /= r;
            }
        }
        for mut col in m.column_iter_mut() {
            let c = col.amax().sqrt();
            if c > 0.0 {
                col /= c;
            }
        }
    }
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    m
}

fn min_singular(m: Matrix5<f64>) -> f64 {
    m.svd(false, false).singular_values.min().max(0.0)
}

pub fn hormander_report(
    t: f64,
    x: &State5,
    spec: &InputDiffusionSpec,
    signal: &SignalSpec,
    tol_d: f64,
) -> HormanderReport {
    let y = x.project();
    let brackets = brackets_closed_form(t, x, spec, signal);
    let raw = brackets.matrix();
    let normalized = equilibrate(raw);
    let normalized_d = normalized_determinant(&y);
    let sv = min_singular(raw);
    HormanderReport {
        d_value: determinant_d(&y),
        normalized_d,
        min_singular_value: min_singular(normalized),
        v_l_gram: sv * sv,
        in_o: normalized_d.abs() > tol_d,
    }
}
