//! Experiment configuration: the same structs back the command line and the
//! versioned JSON config files.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Subcommand, ValueEnum};
use furstenberg::Rat;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Exact exponent from `"3/4"`, `"0.75"` or `"1"`.
pub fn parse_rat(text: &str) -> Result<Rat, CliError> {
    let text = text.trim();
    let bad = || CliError::Config(format!("cannot read {text:?} as an exponent"));
    if text.contains('/') {
        return Rat::from_str(text).map_err(|_| bad());
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, text),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: i128 = digits.parse().map_err(|_| bad())?;
    let r = Rat::new(num, 10i128.pow(frac.len() as u32));
    Ok(if neg { -r } else { r })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Cantor,
    Product,
    RandomFrostman,
    CantorTarget,
    Furstenberg,
}

/// Seeded input; outputs depend on these fields only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Args)]
pub struct GeneratorSpec {
    #[arg(long, value_enum, default_value = "furstenberg")]
    pub kind: GeneratorKind,
    /// `δ = 2^-k`.
    #[arg(long, default_value_t = 8)]
    pub k: u32,
    #[arg(long, default_value = "1/2")]
    pub s: String,
    #[arg(long, default_value = "1")]
    pub t: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 1 for interval families, 2 for square families.
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub dim: u8,
}

fn two() -> u8 {
    2
}

impl GeneratorSpec {
    pub fn s(&self) -> Result<Rat, CliError> {
        parse_rat(&self.s)
    }

    pub fn t(&self) -> Result<Rat, CliError> {
        parse_rat(&self.t)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: GeneratorSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    /// Square family in the text format; replaces the generator.
    #[arg(long)]
    #[serde(default)]
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct IncidenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    /// Scale exponents to sweep; defaults to the generator's `k`.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub ks: Vec<u32>,
    /// Number of seeds per scale, starting at the generator's seed.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub seeds: u64,
    /// Budget multiplier `A` in `A·(log₂ 1/δ)²`.
    #[arg(long, default_value_t = 10)]
    #[serde(default = "ten")]
    pub budget: u64,
}

fn one() -> u64 {
    1
}

fn ten() -> u64 {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RefineStage {
    Thick,
    Induction,
    Both,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    /// `Δ = 2^-k_delta`.
    #[arg(long, default_value_t = 4)]
    pub k_delta: u32,
    #[arg(long, value_enum, default_value = "both")]
    pub stage: RefineStage,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct DecomposeArgs {
    /// `Δ = 2^-base_bits`.
    #[arg(long, default_value_t = 2)]
    pub base_bits: u32,
    /// `δ = Δ^m`.
    #[arg(long, default_value_t = 8)]
    pub m: u32,
    #[arg(long, default_value = "1")]
    pub t: String,
    /// Defaults to `t − 1/5`.
    #[arg(long)]
    #[serde(default)]
    pub s: Option<String>,
    #[arg(long, default_value = "1/4")]
    pub eps: String,
    /// `ε_G` for the normal/good/bad classification.
    #[arg(long, default_value = "1/2")]
    pub eps_good: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Square family in the text format; replaces the seeded uniform set.
    #[arg(long)]
    #[serde(default)]
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct UniformizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    /// Increasing levels ending at `k`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    /// Directions `i/n` for `-n ≤ i < n`.
    #[arg(long, default_value_t = 16)]
    pub directions: i64,
    /// Also build the product structure (configurations only); `Δ = 2^-k/2`.
    #[arg(long)]
    #[serde(default)]
    pub product: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, Args)]
pub struct SuiteArgs {
    /// Reduced battery for smoke runs and rerun checks.
    #[arg(long)]
    #[serde(default)]
    pub quick: bool,
    /// Run the battery twice and compare the CSV bytes.
    #[arg(long)]
    #[serde(default)]
    pub verify_rerun: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, Subcommand)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Emit a seeded family or configuration.
    Gen(GenArgs),
    /// Spread and regularity certificates.
    Certify(CertifyArgs),
    /// Incidence counts against the upper and lower bounds.
    Incidence(IncidenceArgs),
    /// Thick-tube refinement and induction on scales.
    Refine(RefineArgs),
    /// Branching function, multiscale decomposition and scale classes.
    Decompose(DecomposeArgs),
    /// Uniform subset along prescribed levels.
    Uniformize(UniformizeArgs),
    /// Projected energies, good directions and the product structure.
    Project(ProjectArgs),
    /// The acceptance battery.
    Suite(SuiteArgs),
}

/// A full run description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(flatten)]
    pub command: Command,
    /// CSV destination; the JSON artifact goes next to it.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!("config version {} is not {CONFIG_VERSION}", cfg.version)));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_parse_exactly() {
        assert_eq!(parse_rat("3/4").unwrap(), Rat::new(3, 4));
        assert_eq!(parse_rat("0.75").unwrap(), Rat::new(3, 4));
        assert_eq!(parse_rat("1").unwrap(), Rat::new(1, 1));
        assert_eq!(parse_rat("-.5").unwrap(), Rat::new(-1, 2));
        assert!(parse_rat("x").is_err());
        assert!(parse_rat(".").is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"version":1,"command":"incidence","kind":"cantor-target","k":10,"s":"1/2","t":"1/2","seed":3,"ks":[8,10]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let Command::Incidence(a) = &cfg.command else { panic!("{cfg:?}") };
        assert_eq!(a.spec.kind, GeneratorKind::CantorTarget);
        assert_eq!((a.seeds, a.budget, a.spec.dim), (1, 10, 2));
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(serde_json::to_value(&again).unwrap(), serde_json::to_value(&cfg).unwrap());
        assert!(ExperimentConfig::from_json(&text.replace("\"version\":1", "\"version\":2")).is_err());
    }
}
