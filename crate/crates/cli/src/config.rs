//! Flat `key = value` experiment configuration with dotted keys.
//!
//! ```text
//! # default setting, two sources
//! params.mu1 = 0.6
//! params.mu2 = 0.9
//! solver.n = 7
//! sim.seeds = 0..20
//! sweep.gamma_max = 1.0, 1.2, 1.4
//! ```

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use relay_aoi::{SolverConfig, SystemParams, TruncationLevel};
use sha2::{Digest, Sha256};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RELAY_AOI_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Truncation for the deployed exact evaluation of table policies;
    /// `None` picks the policy's own level plus five, `Some(0)` disables it.
    pub deployed_n: Option<u32>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            seeds: (0..20).collect(),
            deployed_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub solver: SolverConfig,
    pub sim: SimConfig,
    pub sweep: Vec<f64>,
    /// Prepended verbatim to every output file name.
    pub output_prefix: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).expect("default parameters are valid"),
            solver: SolverConfig::default(),
            sim: SimConfig::default(),
            sweep: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            output_prefix: default_prefix(),
        }
    }
}

fn default_prefix() -> String {
    match std::env::var(OUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => format!("{}/", dir.trim_end_matches('/')),
        _ => "out/".to_string(),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .with_context(|| format!("{key}: `{value}` is not a number"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| anyhow!("{key}: cannot parse `{s}`")))
        .collect()
}

/// `a..b` (half-open) or a comma-separated list.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = lo.trim().parse().context("sim.seeds: bad range start")?;
        let hi: u64 = hi.trim().parse().context("sim.seeds: bad range end")?;
        return Ok((lo..hi).collect());
    }
    parse_list("sim.seeds", value)
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.apply_assignment(line)
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    /// Applies one `key=value` pair, as given on the command line.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{assignment}`"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        // Parameters are range-checked as a whole in `validate`.
        match key {
            "params.mu1" => self.params.mu1 = parse_f64(key, value)?,
            "params.mu2" => self.params.mu2 = parse_f64(key, value)?,
            "params.p" => self.params.p = parse_f64(key, value)?,
            "params.q" => self.params.q = parse_f64(key, value)?,
            "params.gamma_max" => self.params.gamma_max = parse_f64(key, value)?,
            "solver.n" => {
                let n: u32 = value.parse().with_context(|| format!("{key}: `{value}`"))?;
                self.solver.n = TruncationLevel::new(n)?;
            }
            "solver.epsilon" => self.solver.epsilon = parse_f64(key, value)?,
            "solver.zeta" => self.solver.zeta = parse_f64(key, value)?,
            "solver.lambda_minus" => self.solver.lambda_minus_init = parse_f64(key, value)?,
            "solver.lambda_plus" => self.solver.lambda_plus_init = parse_f64(key, value)?,
            "solver.max_rvi_iters" => {
                self.solver.max_rvi_iters = value.parse().with_context(|| format!("{key}: `{value}`"))?
            }
            "sim.horizon" => {
                self.sim.horizon = value.parse().with_context(|| format!("{key}: `{value}`"))?
            }
            "sim.seeds" => self.sim.seeds = parse_seeds(value)?,
            "sim.deployed_n" => {
                self.sim.deployed_n = if value == "auto" {
                    None
                } else {
                    Some(value.parse().with_context(|| format!("{key}: `{value}`"))?)
                }
            }
            "sweep.gamma_max" => self.sweep = parse_list(key, value)?,
            "output.prefix" => self.output_prefix = value.to_string(),
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        if self.sim.horizon == 0 {
            bail!("sim.horizon must be at least 1");
        }
        for &g in &self.sweep {
            if !(g > 0.0 && g <= 2.0) {
                bail!("sweep.gamma_max value {g} is not in (0, 2]");
            }
        }
        Ok(())
    }

    /// Canonical rendering of every setting that affects results. The
    /// output prefix is left out so runs written to different places share
    /// a hash.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let s = &self.solver;
        let seeds: Vec<String> = self.sim.seeds.iter().map(u64::to_string).collect();
        let sweep: Vec<String> = self.sweep.iter().map(|g| format!("{g:?}")).collect();
        let deployed = match self.sim.deployed_n {
            Some(n) => n.to_string(),
            None => "auto".to_string(),
        };
        let _ = writeln!(out, "params.mu1={:?}", p.mu1);
        let _ = writeln!(out, "params.mu2={:?}", p.mu2);
        let _ = writeln!(out, "params.p={:?}", p.p);
        let _ = writeln!(out, "params.q={:?}", p.q);
        let _ = writeln!(out, "params.gamma_max={:?}", p.gamma_max);
        let _ = writeln!(out, "solver.n={}", s.n);
        let _ = writeln!(out, "solver.epsilon={:?}", s.epsilon);
        let _ = writeln!(out, "solver.zeta={:?}", s.zeta);
        let _ = writeln!(out, "solver.lambda_minus={:?}", s.lambda_minus_init);
        let _ = writeln!(out, "solver.lambda_plus={:?}", s.lambda_plus_init);
        let _ = writeln!(out, "solver.max_rvi_iters={}", s.max_rvi_iters);
        let _ = writeln!(out, "sim.horizon={}", self.sim.horizon);
        let _ = writeln!(out, "sim.seeds={}", seeds.join(","));
        let _ = writeln!(out, "sim.deployed_n={deployed}");
        let _ = writeln!(out, "sweep.gamma_max={}", sweep.join(","));
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.canonical().as_bytes())[..8])
    }

    pub fn output_path(&self, name: &str) -> String {
        format!("{}{name}", self.output_prefix)
    }
}
