use std::path::{Path, PathBuf};

use mbolab::estimates::Curve;
use mbolab::normal_form::EvalMode;
use mbolab::{Equation, Sigma};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Datum {
    /// `a cos x + b cos 2x`
    TwoMode { a: f64, b: f64 },
    /// Random real data on `|n| <= band` with `|u(n)| ~ amp <n>^{-2}`, seeded.
    Colored { amp: f64, band: usize, seed: u64 },
}

impl Default for Datum {
    fn default() -> Self {
        Datum::TwoMode { a: 0.5, b: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NfConfig {
    #[serde(rename = "J")]
    pub j: usize,
    pub mode: EvalMode,
    /// Monte-Carlo samples per output mode and batch.
    pub samples: usize,
    pub batches: usize,
    pub n_lattice: usize,
    /// Upper limit of the telescoping window.
    pub t_end: f64,
    /// Frame spacing in trajectory samples.
    pub stride: usize,
    /// Frames used for the Monte-Carlo sup (evenly spaced in the window).
    pub mc_frames: usize,
}

impl Default for NfConfig {
    fn default() -> Self {
        Self {
            j: 1,
            mode: EvalMode::Exact,
            samples: 20000,
            batches: 20,
            n_lattice: 12,
            t_end: 0.0128,
            stride: 1,
            mc_frames: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatesConfig {
    /// An estimate tag or `all`.
    pub id: String,
    pub sizes: Vec<usize>,
    pub trials: usize,
}

impl Default for EstimatesConfig {
    fn default() -> Self {
        Self {
            id: "all".into(),
            sizes: vec![16, 32, 64],
            trials: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountingConfig {
    pub curve: Curve,
    pub rmax: i64,
    pub extra_centers: usize,
    /// Random probes for the large-mu check (hyperbola only, 0 to skip).
    pub probes: usize,
    /// Largest `R = 2^k` of the counting-fact scans (0 to skip).
    pub fact_k_max: u32,
    pub fact_configs: usize,
    /// Bound of the exhaustive emptiness scan (0 to skip).
    pub emptiness_bound: i64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            curve: Curve::Hyperbola,
            rmax: 4096,
            extra_centers: 2,
            probes: 1000,
            fact_k_max: 0,
            fact_configs: 100,
            emptiness_bound: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    /// Sample points checked along the trajectory.
    pub points: usize,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self { points: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinConfig {
    pub horizon: f64,
    pub samples: usize,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            samples: 50,
        }
    }
}

/// Everything a run depends on. Output paths are excluded from the hash, the input path is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_max: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub sigma: Sigma,
    pub equation: Equation,
    pub sample_every: usize,
    pub s: f64,
    pub eta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub seed: u64,
    pub datum: Datum,
    pub nf: NfConfig,
    pub estimates: EstimatesConfig,
    pub counting: CountingConfig,
    pub gauge: GaugeConfig,
    pub twin: TwinConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Trajectory read by gauge-check / nf-expand.
    pub input: Option<PathBuf>,
    /// Trajectory written by simulate.
    pub trajectory: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_max: 64,
            dt: 1e-4,
            t_final: 1.0,
            sigma: Sigma::Minus,
            equation: Equation::MboPrime,
            sample_every: 10,
            s: 0.6,
            eta: 2f64.powi(-10),
            m: 64.0,
            delta: None,
            seed: 0,
            datum: Datum::default(),
            nf: NfConfig::default(),
            estimates: EstimatesConfig::default(),
            counting: CountingConfig::default(),
            gauge: GaugeConfig::default(),
            twin: TwinConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes to JSON")
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON, with output paths cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig {
            input: c.output.input.take(),
            ..OutputConfig::default()
        };
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or((self.s - 0.5) / 4.0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn validate_common(&self) -> Result<(), CliError> {
        if !(self.s > 0.5) {
            return Err(invalid(format!("s = {} must exceed 1/2", self.s)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        if !(self.m > 1.0) {
            return Err(invalid(format!("M = {} must exceed 1", self.m)));
        }
        let d = self.delta();
        if !(d > 0.0 && d < 0.5) {
            return Err(invalid(format!("delta = {d} must lie in (0, 1/2)")));
        }
        Ok(())
    }

    fn validate_solver(&self) -> Result<(), CliError> {
        if self.n_max == 0 {
            return Err(invalid("n_max must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt = {} must be positive", self.dt)));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every must be positive"));
        }
        match &self.datum {
            Datum::TwoMode { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(invalid("datum amplitudes must be finite"));
                }
                if self.n_max < 2 {
                    return Err(invalid("the two-mode datum needs n_max >= 2"));
                }
            }
            Datum::Colored { amp, band, .. } => {
                if !amp.is_finite() || *band == 0 || *band > self.n_max {
                    return Err(invalid("colored datum needs finite amp and 1 <= band <= n_max"));
                }
            }
        }
        Ok(())
    }

    fn validate_horizon(&self, t: f64) -> Result<(), CliError> {
        let steps = (t / self.dt).round();
        if !(t > 0.0) || (steps * self.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(invalid(format!("horizon {t} must be a positive multiple of dt = {}", self.dt)));
        }
        Ok(())
    }

    /// Checks every field the subcommand reads.
    pub fn validate(&self, sub: &str) -> Result<(), CliError> {
        self.validate_common()?;
        match sub {
            "simulate" => {
                self.validate_solver()?;
                self.validate_horizon(self.t_final)?;
            }
            "twin-probe" => {
                self.validate_solver()?;
                self.validate_horizon(self.twin.horizon)?;
                if self.twin.samples == 0 {
                    return Err(invalid("twin.samples must be positive"));
                }
            }
            "gauge-check" => {
                if self.output.input.is_none() {
                    return Err(invalid("gauge-check needs an input trajectory"));
                }
                if self.gauge.points == 0 {
                    return Err(invalid("gauge.points must be positive"));
                }
            }
            "nf-expand" => {
                if self.output.input.is_none() {
                    return Err(invalid("nf-expand needs an input trajectory"));
                }
                let nf = &self.nf;
                if !(1..=3).contains(&nf.j) {
                    return Err(invalid(format!("J = {} must be 1, 2 or 3", nf.j)));
                }
                if nf.j == 3 && nf.mode == EvalMode::Exact {
                    return Err(invalid("J = 3 requires mode = monte_carlo"));
                }
                if nf.n_lattice == 0 || nf.stride == 0 || !(nf.t_end > 0.0) {
                    return Err(invalid("nf.n_lattice, nf.stride and nf.t_end must be positive"));
                }
                if nf.mode == EvalMode::MonteCarlo && (nf.samples == 0 || nf.batches < 2 || nf.mc_frames == 0) {
                    return Err(invalid("Monte-Carlo mode needs samples > 0, batches >= 2, mc_frames > 0"));
                }
            }
            "verify-estimates" => {
                let e = &self.estimates;
                if e.sizes.is_empty() || e.sizes.contains(&0) {
                    return Err(invalid("estimates.sizes must be non-empty and positive"));
                }
                if e.trials == 0 {
                    return Err(invalid("estimates.trials must be positive"));
                }
                if e.id != "all" {
                    e.id.parse::<mbolab::estimates::EstimateId>().map_err(|e| invalid(e.to_string()))?;
                }
            }
            "count-lemma" => {
                let c = &self.counting;
                if c.rmax < 2 || c.rmax > 1 << 12 {
                    return Err(invalid(format!("rmax = {} must lie in [2, 4096]", c.rmax)));
                }
                if c.fact_k_max > 12 || c.emptiness_bound < 0 {
                    return Err(invalid("fact_k_max <= 12 and emptiness_bound >= 0 required"));
                }
                if c.fact_k_max > 0 && c.fact_configs == 0 {
                    return Err(invalid("fact_configs must be positive"));
                }
            }
            _ => return Err(invalid(format!("unknown subcommand {sub}"))),
        }
        Ok(())
    }
}
