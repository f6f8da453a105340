//! One adapter per subcommand: read the merged configuration, call the
//! library, and tabulate the result.

use hhlab::analysis::{drifted_equilibrium_pair, laplace_comparison, tube_probabilities, ball_hit_probability, ControlProblem};
use hhlab::detsys::{detect_orbit, find_equilibrium, ORBIT_DT};
use hhlab::diffusion::{InputDiffusionSpec, State5};
use hhlab::hormander::{brackets_closed_form, equilibrium_scan, hormander_report, scan_orbit, DEFAULT_TOL_D};
use hhlab::rng::RngStream;
use hhlab::signal::SignalSpec;
use hhlab::stochsys::{ensemble_summary, simulate_xhh, MC_DT};

use crate::config::{diffusion_spec, parse_point, parse_signal, RunConfig};
use crate::output::{count, num, Csv};
use crate::CliError;

pub const SCAN_RANGE: (f64, f64) = (-15.0, 30.0);
pub const SCAN_GRID: usize = 4500;
pub const ORBIT_LEVEL: f64 = 15.0;
pub const ORBIT_TRANSIENT: f64 = 150.0;
pub const ORBIT_HORIZON: f64 = 250.0;
pub const SIMULATE_SIGNAL: &str = "sinusoid:1:10";
pub const SIMULATE_T_END: f64 = 30.0;
pub const TUBE_DRIVE: &str = "sinusoid:1:10";
pub const TUBE_LEVEL: f64 = 0.1;
pub const TUBE_ZETA: f64 = 0.5;
pub const TUBE_OU: (f64, f64) = (0.5, 0.7);
pub const TUBE_EPSILON: f64 = 1.5;
pub const BALL_LEVEL: f64 = 2.0;
pub const BALL_OU: (f64, f64) = (1.0, 2.0);
pub const LAPLACE_SIGNAL: &str = "sinusoid:0.5:10";
pub const LAPLACE_CIR: (f64, f64, f64) = (1.0, 1.0, 3.0);
pub const LAPLACE_LAMBDAS: [f64; 3] = [0.0, 0.1, 1.0];
pub const DEFAULT_TRIALS: usize = 10_000;
pub const LAPLACE_TRIALS: usize = 100_000;

const STATE_HEADER: [&str; 5] = ["v", "n", "m", "h", "zeta"];

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn diffusion(cfg: &RunConfig, default: (&str, f64, f64)) -> Result<InputDiffusionSpec, CliError> {
    let name = cfg.diffusion.as_deref().unwrap_or(default.0);
    diffusion_spec(name, cfg.tau.unwrap_or(default.1), cfg.gamma.unwrap_or(default.2), cfg.k)
}

fn signal_or(cfg: &RunConfig, default: &str) -> Result<SignalSpec, CliError> {
    parse_signal(cfg.signal.as_deref().unwrap_or(default))
}

fn trials(cfg: &RunConfig, default: usize) -> usize {
    cfg.trials.unwrap_or(default)
}

/// `--point` if given, otherwise the equilibrium for constant input `c` with
/// input value `zeta`.
fn start_point(cfg: &RunConfig, spec: &InputDiffusionSpec, c: f64, zeta: f64) -> Result<State5, CliError> {
    match &cfg.point {
        Some(p) => parse_point(p, spec),
        None => Ok(State5::new(find_equilibrium(c)?, cfg.zeta.unwrap_or(zeta), spec)?),
    }
}

pub fn scan_hormander(cfg: &RunConfig) -> Result<Csv, CliError> {
    let (lo, hi) = (cfg.v_lo.unwrap_or(SCAN_RANGE.0), cfg.v_hi.unwrap_or(SCAN_RANGE.1));
    if !(lo < hi) {
        return Err(CliError::Config(format!("empty scan range ({lo}, {hi})")));
    }
    let scan = equilibrium_scan(lo, hi, cfg.grid.unwrap_or(SCAN_GRID))?;
    let digest = cfg.digest("scan-hormander");
    if let Some(path) = &cfg.scan_out {
        let mut grid = Csv::new("scan-hormander", &digest, None, &[], &["v", "D"]);
        for &(v, d) in &scan.samples {
            grid.row(&[v, d]);
        }
        grid.emit(Some(path))?;
    }
    let mut csv = Csv::new("scan-hormander", &digest, None, &[("zeros", scan.zeros.len().to_string())], &["v"]);
    for v in scan.zeros {
        csv.row(&[v]);
    }
    Ok(csv)
}

pub fn orbit(cfg: &RunConfig) -> Result<Csv, CliError> {
    let signal = match (&cfg.signal, cfg.c) {
        (Some(s), _) => parse_signal(s)?,
        (None, c) => SignalSpec::constant(c.unwrap_or(ORBIT_LEVEL))?,
    };
    let orbit = detect_orbit(
        &signal,
        cfg.transient.unwrap_or(ORBIT_TRANSIENT),
        cfg.t_end.unwrap_or(ORBIT_HORIZON),
        cfg.dt.unwrap_or(ORBIT_DT),
    )?;
    if !orbit.converged {
        return Err(CliError::Domain(format!(
            "orbit not converged: loop superposition error {:e}",
            orbit.superposition_error
        )));
    }
    let scan = scan_orbit(&orbit)?;
    let extra = [("period", orbit.period.to_string()), ("superposition-error", orbit.superposition_error.to_string())];
    let mut csv = Csv::new("orbit", &cfg.digest("orbit"), None, &extra, &["t", "v", "n", "m", "h", "D"]);
    for ((t, y), d) in orbit.orbit_samples.times.iter().zip(&orbit.orbit_samples.states).zip(&scan.d) {
        csv.row(&[*t, y.v, y.n, y.m, y.h, *d]);
    }
    Ok(csv)
}

pub fn simulate(cfg: &RunConfig) -> Result<Csv, CliError> {
    let signal = signal_or(cfg, SIMULATE_SIGNAL)?;
    let spec = diffusion(cfg, ("ou", 1.0, 1.0))?;
    let x0 = start_point(cfg, &spec, signal.mean(), 0.0)?;
    let (t_end, dt) = (cfg.t_end.unwrap_or(SIMULATE_T_END), cfg.dt.unwrap_or(MC_DT));
    let rng = RngStream::new(seed(cfg), 0);
    let digest = cfg.digest("simulate");
    let n = trials(cfg, 1);
    if n == 1 {
        let path = simulate_xhh(x0, &spec, &signal, t_end, dt, rng)?;
        let mut csv = Csv::new("simulate", &digest, Some(seed(cfg)), &[], &["t", "v", "n", "m", "h", "zeta"]);
        for (t, x) in path.times.iter().zip(&path.states) {
            let a = x.to_array();
            csv.row(&[*t, a[0], a[1], a[2], a[3], a[4]]);
        }
        return Ok(csv);
    }
    let summary = ensemble_summary(x0, &spec, &signal, t_end, dt, n, rng, cfg.workers)?;
    let mut header = vec!["t".to_string()];
    for name in STATE_HEADER {
        header.push(format!("mean_{name}"));
        header.push(format!("var_{name}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new("simulate", &digest, Some(seed(cfg)), &[("paths", n.to_string())], &header);
    for ((t, mean), var) in summary.times.iter().zip(&summary.mean).zip(&summary.variance) {
        let mut row = vec![*t];
        for i in 0..5 {
            row.push(mean[i]);
            row.push(var[i]);
        }
        csv.row(&row);
    }
    Ok(csv)
}

pub fn tube(cfg: &RunConfig) -> Result<Csv, CliError> {
    let drive = signal_or(cfg, TUBE_DRIVE)?;
    let target = match (&cfg.target, cfg.c) {
        (Some(s), _) => parse_signal(s)?,
        (None, c) => SignalSpec::constant(c.unwrap_or(TUBE_LEVEL))?,
    };
    let spec = diffusion(cfg, ("ou", TUBE_OU.0, TUBE_OU.1))?;
    let start = start_point(cfg, &spec, target.mean(), TUBE_ZETA)?;
    let horizon = cfg.t_end.unwrap_or(drive.period());
    let problem = ControlProblem::new(start, drive, target, spec, horizon)?;
    let epsilons = cfg.epsilon.clone().unwrap_or_else(|| vec![TUBE_EPSILON]);
    let n = trials(cfg, DEFAULT_TRIALS);
    let results = tube_probabilities(&problem, &epsilons, n, cfg.dt.unwrap_or(MC_DT), RngStream::new(seed(cfg), 0), cfg.workers)?;
    let mut csv = Csv::new("tube", &cfg.digest("tube"), Some(seed(cfg)), &[], &["epsilon", "trials", "hits", "ci_lo", "ci_hi"]);
    for r in results {
        csv.cells(&[num(r.epsilon), count(r.trials), count(r.hits), num(r.wilson_ci.0), num(r.wilson_ci.1)]);
    }
    Ok(csv)
}

pub fn ballhit(cfg: &RunConfig) -> Result<Csv, CliError> {
    let c = cfg.c.unwrap_or(BALL_LEVEL);
    let t = cfg.t_end.unwrap_or(1.0);
    let signal = match &cfg.signal {
        Some(s) => parse_signal(s)?,
        None => SignalSpec::constant(c)?,
    };
    let spec = diffusion(cfg, ("ou", BALL_OU.0, BALL_OU.1))?;
    let (x0, x1) = drifted_equilibrium_pair(c, cfg.zeta.unwrap_or(0.0), t)?;
    let x0 = State5::new(x0.project(), x0.zeta, &spec)?;
    let epsilons = cfg.epsilon.clone().unwrap_or_else(|| vec![1.0]);
    let n = trials(cfg, DEFAULT_TRIALS);
    let dt = cfg.dt.unwrap_or(MC_DT);
    let mut csv = Csv::new("ballhit", &cfg.digest("ballhit"), Some(seed(cfg)), &[], &["epsilon", "trials", "hits", "ci_lo", "ci_hi"]);
    for eps in epsilons {
        let r = ball_hit_probability(x0, x1, eps, t, &spec, &signal, n, dt, RngStream::new(seed(cfg), 0), cfg.workers)?;
        csv.cells(&[num(r.epsilon), count(r.trials), count(r.hits), num(r.wilson_ci.0), num(r.wilson_ci.1)]);
    }
    Ok(csv)
}

pub fn laplace(cfg: &RunConfig) -> Result<Csv, CliError> {
    let signal = signal_or(cfg, LAPLACE_SIGNAL)?;
    let (tau, gamma, k) = LAPLACE_CIR;
    let spec = diffusion_spec(
        cfg.diffusion.as_deref().unwrap_or("cir"),
        cfg.tau.unwrap_or(tau),
        cfg.gamma.unwrap_or(gamma),
        Some(cfg.k.unwrap_or(k)),
    )?;
    let x_tilde = cfg.x_tilde.unwrap_or(spec.shift());
    let lambdas = cfg.lambda.clone().unwrap_or_else(|| LAPLACE_LAMBDAS.to_vec());
    let rows = laplace_comparison(
        x_tilde,
        cfg.t_start.unwrap_or(0.0),
        cfg.t_end.unwrap_or(2.0),
        &lambdas,
        &signal,
        &spec,
        trials(cfg, LAPLACE_TRIALS),
        cfg.dt.unwrap_or(MC_DT),
        RngStream::new(seed(cfg), 0),
        cfg.workers,
    )?;
    let header = ["lambda", "printed", "riccati", "mc", "mc_stderr"];
    let mut csv = Csv::new("laplace", &cfg.digest("laplace"), Some(seed(cfg)), &[], &header);
    for r in rows {
        csv.row(&[r.lambda, r.printed, r.riccati, r.mc, r.mc_stderr]);
    }
    Ok(csv)
}

pub fn equilibrium(cfg: &RunConfig) -> Result<Csv, CliError> {
    let c = cfg.c.ok_or_else(|| CliError::Config("equilibrium needs --c".into()))?;
    let eq = find_equilibrium(c)?;
    let mut csv = Csv::new("equilibrium", &cfg.digest("equilibrium"), None, &[], &["c", "v", "n", "m", "h"]);
    csv.row(&[c, eq.v, eq.n, eq.m, eq.h]);
    Ok(csv)
}

pub fn brackets(cfg: &RunConfig) -> Result<Csv, CliError> {
    let signal = signal_or(cfg, "constant:0")?;
    let spec = diffusion(cfg, ("ou", 1.0, 1.0))?;
    let x = start_point(cfg, &spec, signal.mean(), 0.0)?;
    let t = cfg.time.unwrap_or(0.0);
    let set = brackets_closed_form(t, &x, &spec, &signal);
    let report = hormander_report(t, &x, &spec, &signal, DEFAULT_TOL_D);
    let extra = [
        ("normalized-D", report.normalized_d.to_string()),
        ("min-singular-value", report.min_singular_value.to_string()),
        ("in-O", report.in_o.to_string()),
    ];
    let mut header = vec!["field"];
    header.extend(STATE_HEADER);
    let mut csv = Csv::new("brackets", &cfg.digest("brackets"), None, &extra, &header);
    for (label, col) in ["sigma", "V2", "V3", "V4", "V5"].iter().zip(set.columns()) {
        csv.labeled_row(label, &col);
    }
    Ok(csv)
}
