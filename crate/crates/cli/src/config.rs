//! Run configuration: a flat TOML or JSON file, every section optional.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fesh_core::{FlowConfig, ModeWindow, ModelSpec, OracleConfig, PotentialSpec};
use serde::{Deserialize, Serialize};

/// Experiment kinds; also the subcommand names.
#[derive(clap::Subcommand, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Single-pair Bogoliubov flow with oracle comparison
    ThreeMode,
    /// Bogoliubov chain over several pairs, occupation bound and gap ledger
    MultiMode,
    /// Auxiliary-to-full staged flow
    Full,
    /// Scalar fixed point over a list of N; CSV of the error against E^Bog
    ScalarSweep,
    /// Invariant battery with a pass/fail matrix
    Verify,
    /// Basis and operator dumps
    Dump,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ThreeMode => "three-mode",
            Experiment::MultiMode => "multi-mode",
            Experiment::Full => "full",
            Experiment::ScalarSweep => "scalar-sweep",
            Experiment::Verify => "verify",
            Experiment::Dump => "dump",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// when present it must agree with the subcommand
    pub experiment: Option<Experiment>,
    pub model: ModelConfig,
    /// number of pairs to flow; defaults to all configured pairs
    pub m: Option<usize>,
    pub oracle: bool,
    pub seed: Option<u64>,
    /// treat analytic-window warnings as failed checks
    pub strict_regime: bool,
    pub flow: FlowConfig,
    pub tolerances: Tolerances,
    pub sweep: SweepConfig,
    pub dump: DumpConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            model: ModelConfig::default(),
            m: None,
            oracle: true,
            seed: None,
            strict_regime: false,
            flow: FlowConfig::default(),
            tolerances: Tolerances::default(),
            sweep: SweepConfig::default(),
            dump: DumpConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d: usize,
    /// torus side L
    pub side: f64,
    /// cube window {−radius..radius}^d
    pub radius: i32,
    pub n: usize,
    pub phi0: f64,
    pub pairs: Vec<PairConfig>,
    pub dim_cap: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 1,
            side: TAU,
            radius: 1,
            n: 8,
            phi0: 50.0,
            pairs: vec![PairConfig {
                mode: vec![1],
                phi: 50.0,
            }],
            dim_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub mode: Vec<i32>,
    pub phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// |z_* − oracle|
    pub agreement: f64,
    /// 1 − overlap
    pub overlap: f64,
    /// ‖(H − z)ψ‖/‖ψ‖
    pub residual: f64,
    pub psd_slack: f64,
    pub oracle_tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let o = OracleConfig::default();
        Tolerances {
            agreement: 1e-9,
            overlap: 1e-8,
            residual: 1e-8,
            psd_slack: 1e-10,
            oracle_tol: o.tol,
            krylov_dim: o.krylov_dim,
            max_restarts: o.max_restarts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub k2: f64,
    pub phi: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n: vec![100, 1000, 10_000],
            k2: 1.0,
            phi: 50.0,
        }
    }
}

pub const OPERATOR_NAMES: [&str; 6] = [
    "h_bog",
    "h_full",
    "h_sharp",
    "kinetic",
    "number_excited",
    "v4",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DumpConfig {
    pub operators: Vec<String>,
}

impl Default for DumpConfig {
    fn default() -> Self {
        DumpConfig {
            operators: vec!["h_bog".into(), "h_full".into()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON config {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("invalid TOML config {}", path.display()))
        }
    }

    pub fn validate(&self, kind: Experiment) -> Result<()> {
        if let Some(e) = self.experiment {
            if e != kind {
                bail!(
                    "config is for experiment `{}` but `{}` was requested",
                    e.name(),
                    kind.name()
                );
            }
        }
        let mdl = &self.model;
        if mdl.n % 2 == 1 {
            bail!("model.n: N must be even (got {})", mdl.n);
        }
        if mdl.n < 2 {
            bail!("model.n: need at least two particles (got {})", mdl.n);
        }
        if let Some(&n) = self.sweep.n.iter().find(|&&n| n % 2 == 1) {
            bail!("sweep.n: N must be even (got {n})");
        }
        if kind == Experiment::ScalarSweep && self.sweep.n.len() < 2 {
            bail!("sweep.n: need at least two particle numbers");
        }
        if mdl.pairs.is_empty() && kind != Experiment::ScalarSweep {
            bail!("model.pairs: at least one interacting pair is required");
        }
        if let Some(m) = self.m {
            if m == 0 || m > mdl.pairs.len() {
                bail!("m: need 1 ≤ m ≤ {} (got {m})", mdl.pairs.len());
            }
        }
        if let Some(bad) = self
            .dump
            .operators
            .iter()
            .find(|o| !OPERATOR_NAMES.contains(&o.as_str()))
        {
            bail!(
                "dump.operators: unknown operator `{bad}` (known: {})",
                OPERATOR_NAMES.join(", ")
            );
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("agreement", t.agreement),
            ("overlap", t.overlap),
            ("residual", t.residual),
            ("psd_slack", t.psd_slack),
            ("oracle_tol", t.oracle_tol),
        ] {
            if !(v > 0.0) {
                bail!("tolerances.{name}: must be positive (got {v})");
            }
        }
        self.flow.validate().context("flow")?;
        // surface window and pair errors at parse time
        self.model_spec().context("model")?;
        Ok(())
    }

    pub fn window(&self) -> Result<ModeWindow> {
        Ok(ModeWindow::cube(
            self.model.d,
            self.model.side,
            self.model.radius,
        )?)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let pot = PotentialSpec {
            phi0: self.model.phi0,
            pairs: self
                .model
                .pairs
                .iter()
                .map(|p| (p.mode.clone(), p.phi))
                .collect(),
        };
        Ok(ModelSpec::new(&self.window()?, self.model.n, &pot)?)
    }

    /// Pairs to flow.
    pub fn pairs_used(&self) -> usize {
        self.m.unwrap_or(self.model.pairs.len())
    }

    pub fn oracle_config(&self) -> OracleConfig {
        let t = &self.tolerances;
        let base = OracleConfig::default();
        OracleConfig {
            tol: t.oracle_tol,
            krylov_dim: t.krylov_dim,
            max_restarts: t.max_restarts,
            seed: self.seed.unwrap_or(base.seed),
            ..base
        }
    }
}
