//! Run configuration: a flat key-value document mirroring the command-line
//! flags. Flags override values read from `--config`.

use std::path::{Path, PathBuf};

use clap::Args;
use hhlab::diffusion::{DiffusionKind, InputDiffusionSpec, State5};
use hhlab::gating::State4;
use hhlab::signal::SignalSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// Input signal: `constant:C`, `sinusoid:A:T` or `table:T:y0,y1,...`.
    #[arg(long)]
    pub signal: Option<String>,
    /// Target signal of the tube probe (same syntax as `--signal`).
    #[arg(long)]
    pub target: Option<String>,
    /// Input diffusion: `ou` or `cir`.
    #[arg(long)]
    pub diffusion: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// CIR shift `K`.
    #[arg(long = "K", allow_negative_numbers = true)]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_start: Option<f64>,
    /// Evaluation time of the bracket dump.
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Destination of the `v,D` grid of `scan-hormander`.
    #[arg(long)]
    pub scan_out: Option<PathBuf>,
    /// Constant input level.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v_hi: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub transient: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Initial input value `ζ`.
    #[arg(long, allow_negative_numbers = true)]
    pub zeta: Option<f64>,
    /// Starting value of the shifted CIR input.
    #[arg(long, allow_negative_numbers = true)]
    pub x_tilde: Option<f64>,
    /// A phase-space point `v,n,m,h,zeta`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `self` with every value set in `flags` replaced.
    pub fn overridden_by(&self, flags: &RunConfig) -> Self {
        let mut base = to_map(self);
        for (key, value) in to_map(flags) {
            if !value.is_null() {
                base.insert(key, value);
            }
        }
        serde_json::from_value(Value::Object(base)).expect("merged config keeps the schema")
    }

    /// SHA-256 of the canonical JSON of everything that affects results
    /// (output paths and worker count excluded).
    pub fn digest(&self, command: &str) -> String {
        let mut map = to_map(self);
        for key in ["out", "scan-out", "workers"] {
            map.insert(key.into(), Value::Null);
        }
        let text = format!("{command}\n{}", Value::Object(map));
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn to_map(cfg: &RunConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg).expect("config serializes") {
        Value::Object(map) => map,
        _ => unreachable!("config is a struct"),
    }
}

pub fn parse_signal(text: &str) -> Result<SignalSpec, CliError> {
    let bad = |why: &str| CliError::Config(format!("signal `{text}`: {why}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
    let parts: Vec<&str> = text.splitn(3, ':').collect();
    let signal = match parts.as_slice() {
        ["constant", c] => SignalSpec::constant(number(c)?),
        ["sinusoid", a, t] => SignalSpec::sinusoid(number(a)?, number(t)?),
        ["table", t, values] => {
            let period = number(t)?;
            let values: Vec<f64> = values.split(',').map(number).collect::<Result<_, _>>()?;
            let n = values.len();
            let knots = (0..n).map(|i| period * i as f64 / n as f64).collect();
            SignalSpec::table(period, knots, values)
        }
        _ => return Err(bad("expected constant:C, sinusoid:A:T or table:T:y0,y1,...")),
    };
    signal.map_err(|e| CliError::Config(format!("signal `{text}`: {e}")))
}

pub fn diffusion_spec(name: &str, tau: f64, gamma: f64, k: Option<f64>) -> Result<InputDiffusionSpec, CliError> {
    let kind = match name {
        "ou" => DiffusionKind::Ou,
        "cir" => DiffusionKind::Cir { k: k.ok_or_else(|| CliError::Config("CIR input needs --K".into()))? },
        other => return Err(CliError::Config(format!("unknown diffusion `{other}` (expected ou or cir)"))),
    };
    Ok(InputDiffusionSpec::new(kind, tau, gamma)?)
}

pub fn parse_point(values: &[f64], spec: &InputDiffusionSpec) -> Result<State5, CliError> {
    let [v, n, m, h, zeta] = values else {
        return Err(CliError::Config(format!("--point needs 5 values v,n,m,h,zeta (got {})", values.len())));
    };
    Ok(State5::new(State4::new(*v, *n, *m, *h)?, *zeta, spec)?)
}
