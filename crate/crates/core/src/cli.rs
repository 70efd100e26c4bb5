//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] (flags over an optional JSON
//! file over defaults), validates it, computes, and writes `<command>.json`
//! and/or `<command>.csv` plus `manifest.json` into `--out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::admissible::{
    build_admissible, reference_sqrt, scale, verify_admissible, AdmissibilityReport, AdmissibleFunction,
    BuilderParams, Floor,
};
use crate::combinatorics::{betti_table, index_character, IrrepLabel};
use crate::error::{Error, Result};
use crate::io::manifest::{sha256_hex, WallClock};
use crate::io::{to_canonical_string, to_pretty_string, Cache, Cell, CsvTable, RunManifest};
use crate::model_geometry::{level_set_profile, log_grid, LevelSetProfile, WeightedAction};
use crate::spectral::kernel::{invariance_check, kernel_dims_refined, kodaira_scan, InvarianceReport, KodairaCurve};
use crate::spectral::{GridParams, ModeSpec, Spacing, SpectrumResult, Thresholds};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidWeights(_)
        | Error::InvalidArgument { .. }
        | Error::DomainTooSmall { .. }
        | Error::OracleTooLarge { .. }
        | Error::Serde(_)
        | Error::Manifest(_) => EXIT_VALIDATION,
        Error::TamingViolated { .. }
        | Error::GridTooShort(_)
        | Error::AmbiguousKernel { .. }
        | Error::NonConvergence(_) => EXIT_COMPUTE,
        Error::Io { .. } => EXIT_IO,
    }
}

/// Inclusive integer range written `lo..hi` (or a single `m`); `lo > hi` is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo) as usize + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<i64> {
        (self.lo..=self.hi).collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("bad bound `{x}`: {e}"));
        match s.split_once("..") {
            Some((a, b)) => Ok(Window::new(parse(a)?, parse(b.trim_start_matches('='))?)),
            None => {
                let m = parse(s)?;
                Ok(Window::new(m, m))
            }
        }
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(m) => Ok(Window::new(m, m)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FloorChoice {
    Zero,
    Sqrt,
    Quadratic,
}

impl From<FloorChoice> for Floor {
    fn from(f: FloorChoice) -> Self {
        match f {
            FloorChoice::Zero => Floor::Zero,
            FloorChoice::Sqrt => Floor::Sqrt,
            FloorChoice::Quadratic => Floor::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SpacingChoice {
    Uniform,
    Geometric,
}

impl From<SpacingChoice> for Spacing {
    fn from(s: SpacingChoice) -> Self {
        match s {
            SpacingChoice::Uniform => Spacing::Uniform,
            SpacingChoice::Geometric => Spacing::Geometric,
        }
    }
}

/// Fully resolved parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub m: Window,
    pub k: Window,
    /// `ref-sqrt`, `const`, `built`, a JSON file, optionally prefixed `c*`.
    pub s: String,
    pub s1: String,
    pub s2: String,
    pub floor: FloorChoice,
    pub epsilon: f64,
    pub target: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub samples: usize,
    pub seed: u64,
    pub n: usize,
    pub radius: Option<f64>,
    pub spacing: SpacingChoice,
    pub stretch: f64,
    pub decay: f64,
    pub count: usize,
    pub zero_rel: f64,
    pub gap_rel: f64,
    pub extra_twist: u32,
    pub out: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = GridParams::default();
        let th = Thresholds::default();
        let builder = BuilderParams::default();
        Self {
            weights: vec![1],
            twist: 0,
            m: Window::new(0, 10),
            k: Window::new(0, 20),
            s: "ref-sqrt".into(),
            s1: "ref-sqrt".into(),
            s2: "built".into(),
            floor: FloorChoice::Sqrt,
            epsilon: builder.epsilon,
            target: builder.target,
            t_min: 0.1,
            t_max: 1e8,
            points: 300,
            samples: 16,
            seed: 1,
            n: grid.n,
            radius: None,
            spacing: SpacingChoice::Geometric,
            stretch: grid.stretch,
            decay: grid.decay,
            count: th.count,
            zero_rel: th.zero_rel,
            gap_rel: th.gap_rel,
            extra_twist: 0,
            out: PathBuf::from("out"),
            format: Format::Both,
        }
    }
}

const ACTION_KEYS: &[&str] = &["weights", "twist"];
const PROFILE_KEYS: &[&str] = &["t_min", "t_max", "points", "samples", "seed"];
const BUILDER_KEYS: &[&str] = &["floor", "epsilon", "target"];
const GRID_KEYS: &[&str] = &[
    "n", "radius", "spacing", "stretch", "decay", "count", "zero_rel", "gap_rel",
];

impl RunConfig {
    pub fn action(&self) -> Result<WeightedAction> {
        WeightedAction::new(self.weights.clone(), self.twist)
    }

    pub fn grid(&self) -> GridParams {
        GridParams {
            n: self.n,
            radius: self.radius,
            spacing: self.spacing.into(),
            stretch: self.stretch,
            decay: self.decay,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            count: self.count,
            zero_rel: self.zero_rel,
            gap_rel: self.gap_rel,
        }
    }

    pub fn builder(&self) -> BuilderParams {
        BuilderParams {
            epsilon: self.epsilon,
            target: self.target,
        }
    }

    fn check_window(field: &'static str, w: Window) -> Result<()> {
        if w.len() > 1_000_000 {
            return Err(Error::arg(field, format!("window {w} has more than 10^6 labels")));
        }
        Ok(())
    }

    fn check_profile(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::arg("t_min", format!("need 0 < t_min < t_max, got {} and {}", self.t_min, self.t_max)));
        }
        if self.points < 2 {
            return Err(Error::arg("points", "need at least 2 levels"));
        }
        if self.samples == 0 {
            return Err(Error::arg("samples", "must be positive"));
        }
        if !(self.target > 0.0 && self.target.is_finite()) {
            return Err(Error::arg("target", "must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg("epsilon", "must be positive"));
        }
        Ok(())
    }

    fn check_spectral(&self) -> Result<()> {
        if self.weights.len() != 1 {
            return Err(Error::arg("weights", "spectral commands need exactly one weight"));
        }
        if self.n < 2 {
            return Err(Error::arg("n", "need at least 2 grid points"));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::arg("radius", "must be positive"));
            }
        }
        if !(self.stretch > 0.0 && self.stretch.is_finite()) {
            return Err(Error::arg("stretch", "must be positive"));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::arg("decay", "must be positive"));
        }
        self.thresholds().validate()
    }

    /// Field-level checks for `command`, run before any computation.
    pub fn validate(&self, command: &str) -> Result<()> {
        self.action()?;
        match command {
            "betti" | "index" => Self::check_window("m", self.m),
            "admissible-build" | "admissible-verify" => self.check_profile(),
            "spectrum" | "invariance" => {
                Self::check_window("m", self.m)?;
                self.check_profile()?;
                self.check_spectral()
            }
            "kodaira" => {
                Self::check_window("k", self.k)?;
                if self.m.len() != 1 {
                    return Err(Error::arg("m", "kodaira scans a single label"));
                }
                if self.k.lo < 0 || self.k.hi > i64::from(u32::MAX) {
                    return Err(Error::arg("k", "powers of the line bundle must be nonnegative"));
                }
                self.check_profile()?;
                self.check_spectral()
            }
            _ => Ok(()),
        }
    }

    /// The fields that determine the result of `command`.
    pub fn echo(&self, command: &str) -> Result<Value> {
        let mut keys: Vec<&str> = ACTION_KEYS.to_vec();
        let uses_s = |name: &str| -> bool {
            let field = match name {
                "s" => &self.s,
                "s1" => &self.s1,
                _ => &self.s2,
            };
            field.ends_with("built")
        };
        match command {
            "betti" | "index" => keys.push("m"),
            "admissible-build" => {
                keys.extend(PROFILE_KEYS);
                keys.extend(BUILDER_KEYS);
            }
            "admissible-verify" => {
                keys.extend(PROFILE_KEYS);
                keys.extend(["s", "target"]);
                if uses_s("s") {
                    keys.extend(BUILDER_KEYS);
                }
            }
            "spectrum" | "kodaira" | "invariance" => {
                keys.push("m");
                keys.extend(GRID_KEYS);
                let names: &[&str] = if command == "invariance" { &["s1", "s2"] } else { &["s"] };
                keys.extend(names);
                if names.iter().any(|n| uses_s(n)) {
                    keys.extend(PROFILE_KEYS);
                    keys.extend(BUILDER_KEYS);
                }
                match command {
                    "spectrum" => keys.push("extra_twist"),
                    "kodaira" => keys.push("k"),
                    _ => {}
                }
            }
            _ => {}
        }
        let full = serde_json::to_value(self)?;
        let mut out = serde_json::Map::new();
        for key in keys {
            if let Some(v) = full.get(key) {
                out.insert(key.to_string(), v.clone());
            }
        }
        Ok(Value::Object(out))
    }
}

// ---------------------------------------------------------------- flags

#[derive(Debug, Clone, Args, Serialize, Default)]
struct OutputFlags {
    /// JSON file with default values for any flag.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize, Default)]
struct ActionFlags {
    /// Comma-separated positive weights, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<u32>>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    twist: Option<i64>,
}

#[derive(Debug, Clone, Args, Serialize, Default)]
struct WindowFlag {
    /// Labels `lo..hi` (inclusive) or a single label.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<Window>,
}

#[derive(Debug, Clone, Args, Serialize, Default)]
struct ProfileFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    /// Number of levels (log-spaced).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    /// Random samples per level.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Default)]
struct BuilderFlags {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    floor: Option<FloorChoice>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// Divergence target of the admissibility ratio.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Default)]
struct GridFlags {
    /// Interior radial grid points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Outer radius (chosen from --decay when omitted).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<SpacingChoice>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stretch: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    decay: Option<f64>,
    /// Eigenvalues per degree.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_rel: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_rel: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TableArgs {
    #[command(flatten)]
    #[serde(flatten)]
    action: ActionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowFlag,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    action: ActionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    profile: ProfileFlags,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderFlags,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
struct VerifyArgs {
    /// `ref-sqrt`, `const`, `built` or a JSON file; prefix `c*` scales.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    action: ActionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    profile: ProfileFlags,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderFlags,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Subcommand)]
enum AdmissibleCommand {
    /// Construct an admissible function for the weights' level-set profile.
    Build(BuildArgs),
    /// Check a function against the level-set profile.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct SpectralArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<String>,
    /// Power of the positive line bundle.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    extra_twist: Option<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    action: ActionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowFlag,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridFlags,
    #[command(flatten)]
    #[serde(flatten)]
    profile: ProfileFlags,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderFlags,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
struct InvarianceArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s1: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s2: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    action: ActionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowFlag,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridFlags,
    #[command(flatten)]
    #[serde(flatten)]
    profile: ProfileFlags,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderFlags,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
struct KodairaArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<String>,
    /// Powers of the positive line bundle, `lo..hi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<Window>,
    #[command(flatten)]
    #[serde(flatten)]
    action: ActionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    window: WindowFlag,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridFlags,
    #[command(flatten)]
    #[serde(flatten)]
    profile: ProfileFlags,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderFlags,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Background Betti numbers over a window of labels.
    Betti(TableArgs),
    /// Index character over a window of labels.
    Index(TableArgs),
    /// Build or verify admissible functions.
    #[command(subcommand)]
    Admissible(AdmissibleCommand),
    /// Low spectrum and kernel dimensions of D_s^2 per label (one weight).
    Spectrum(SpectralArgs),
    /// Kernel dimensions under two admissible functions.
    Invariance(InvarianceArgs),
    /// Degree-1 spectral gap along powers of a positive line bundle.
    Kodaira(KodairaArgs),
    /// Recompute a manifest hash and check the files it lists.
    VerifyManifest {
        /// `manifest.json` or the directory holding it.
        path: PathBuf,
    },
}

#[derive(Debug, Parser)]
#[command(name = "bgcoh", version, about = "Background cohomology of weighted circle actions on C^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

// ---------------------------------------------------------------- resolution

fn merge(base: &mut Value, over: Value) {
    if let (Value::Object(b), Value::Object(o)) = (base, over) {
        for (k, v) in o {
            b.insert(k, v);
        }
    }
}

/// Defaults, then the config file, then explicit flags.
fn resolve(flags: &impl Serialize, output: &OutputFlags) -> Result<(RunConfig, BTreeMap<String, String>)> {
    let mut value = Value::Object(serde_json::Map::new());
    let mut inputs = BTreeMap::new();
    if let Some(path) = &output.config {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        inputs.insert(format!("config:{}", path.display()), sha256_hex(&bytes));
        let file: Value = serde_json::from_slice(&bytes)?;
        if !file.is_object() {
            return Err(Error::arg("config", "config file must hold a JSON object"));
        }
        merge(&mut value, file);
    }
    merge(&mut value, serde_json::to_value(flags)?);
    merge(&mut value, serde_json::to_value(output)?);
    let config: RunConfig = serde_json::from_value(value)
        .map_err(|e| Error::arg("config", e.to_string()))?;
    Ok((config, inputs))
}

/// Resolves an `s` selector.
pub fn select_function(
    selector: &str,
    config: &RunConfig,
    inputs: &mut BTreeMap<String, String>,
) -> Result<AdmissibleFunction> {
    if let Some((c, rest)) = selector.split_once('*') {
        let c: f64 = c
            .trim()
            .parse()
            .map_err(|_| Error::arg("s", format!("bad coefficient in `{selector}`")))?;
        return scale(&select_function(rest.trim(), config, inputs)?, c);
    }
    match selector {
        "ref-sqrt" | "sqrt" => Ok(reference_sqrt()),
        "const" => Ok(AdmissibleFunction::constant(1.0)),
        "built" => Ok(build_for(config)?.function),
        path => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            inputs.insert(format!("s:{path}"), sha256_hex(&bytes));
            let text = String::from_utf8(bytes).map_err(|_| Error::arg("s", format!("{path} is not UTF-8")))?;
            AdmissibleFunction::from_json(&text)
        }
    }
}

fn profile_for(config: &RunConfig) -> Result<LevelSetProfile> {
    level_set_profile(
        &config.action()?,
        &log_grid(config.t_min, config.t_max, config.points),
        config.samples,
        config.seed,
    )
}

fn build_for(config: &RunConfig) -> Result<crate::admissible::BuiltAdmissible> {
    build_admissible(&profile_for(config)?, &config.floor.into(), config.builder())
}

// ---------------------------------------------------------------- reports

/// A multiplicity, written as a JSON number when it fits `u64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Count(pub BigUint);

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0.to_u64() {
            Some(v) => s.serialize_u64(v),
            None => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Count(v.into())),
            Raw::Text(s) => s.parse().map(Count).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiRow {
    pub m: i64,
    pub betti: Vec<Count>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiReport {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub window: Window,
    pub rows: Vec<BettiRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub m: i64,
    pub index: i128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub window: Window,
    pub rows: Vec<IndexRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub function: AdmissibleFunction,
    pub u_grid: Vec<f64>,
    pub floor: Vec<f64>,
    /// `s >= floor` and `s' >= floor` at every grid point.
    pub dominates_floor: bool,
    pub report: AdmissibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub s: String,
    pub report: AdmissibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub results: Vec<SpectrumResult>,
}

/// Files produced by one command before the manifest hash is known.
struct Outputs {
    json: Value,
    csv: Vec<(String, CsvTable)>,
    summary: Vec<String>,
}

fn ratio_table(report: &AdmissibilityReport) -> CsvTable {
    let mut t = CsvTable::new(["t", "ratio"]);
    for p in report.ratio_points() {
        t.push(vec![p.t.into(), p.value.into()]);
    }
    t
}

fn verdict(report: &AdmissibilityReport) -> String {
    if report.pass {
        format!("pass (ratio >= {:e} from t = {})", report.target, report.threshold_t.unwrap_or(f64::NAN))
    } else {
        format!(
            "fail at t = {}: {}",
            report.first_offending_t.map_or("-".to_string(), |t| t.to_string()),
            report.reason.clone().unwrap_or_default()
        )
    }
}

fn cmd_betti(config: &RunConfig) -> Result<Outputs> {
    let action = config.action()?;
    let table = betti_table(&action, config.m.lo, config.m.hi)?;
    let rows: Vec<BettiRow> = table
        .entries
        .iter()
        .map(|(m, row)| BettiRow {
            m: m.0,
            betti: row.iter().cloned().map(Count).collect(),
        })
        .collect();
    let mut header = vec!["m".to_string()];
    header.extend((0..=action.dim()).map(|p| format!("beta{p}")));
    let mut csv = CsvTable::new(header);
    for r in &rows {
        let mut cells = vec![Cell::from(r.m)];
        cells.extend(r.betti.iter().map(|b| Cell::Text(b.0.to_string())));
        csv.push(cells);
    }
    let summary = vec![format!("betti: {} labels in {}", rows.len(), config.m)];
    let report = BettiReport {
        weights: config.weights.clone(),
        twist: config.twist,
        window: config.m,
        rows,
    };
    Ok(Outputs {
        json: serde_json::to_value(report)?,
        csv: vec![("betti.csv".into(), csv)],
        summary,
    })
}

fn cmd_index(config: &RunConfig) -> Result<Outputs> {
    let ch = index_character(&config.action()?, config.m.lo, config.m.hi)?;
    let rows: Vec<IndexRow> = ch.entries.iter().map(|(m, &index)| IndexRow { m: m.0, index }).collect();
    let mut csv = CsvTable::new(["m", "index"]);
    for r in &rows {
        csv.push(vec![r.m.into(), r.index.into()]);
    }
    let summary = vec![format!("index: {} labels in {}", rows.len(), config.m)];
    let report = IndexReport {
        weights: config.weights.clone(),
        twist: config.twist,
        window: config.m,
        rows,
    };
    Ok(Outputs {
        json: serde_json::to_value(report)?,
        csv: vec![("index.csv".into(), csv)],
        summary,
    })
}

fn cmd_build(config: &RunConfig) -> Result<Outputs> {
    let built = build_for(config)?;
    let dominates_floor = built.u_grid.iter().zip(&built.floor).all(|(&u, &k)| {
        let j = built.function.eval(u);
        j.s >= k && j.ds >= k
    });
    let mut knots = CsvTable::new(["u", "s", "s_prime", "s_second", "floor"]);
    if let AdmissibleFunction::Grid(g) = &built.function {
        for (knot, floor) in g.knots.iter().zip(&built.floor) {
            knots.push(vec![knot.t.into(), knot.s.into(), knot.s_prime.into(), knot.s_second.into(), (*floor).into()]);
        }
    }
    let summary = vec![
        format!("admissible build: {} knots, {}", built.u_grid.len(), verdict(&built.report)),
        format!("floor dominated: {dominates_floor}"),
    ];
    let report = BuildReport {
        function: built.function,
        u_grid: built.u_grid,
        floor: built.floor,
        dominates_floor,
        report: built.report,
    };
    let csv = vec![
        ("admissible.csv".into(), knots),
        ("admissible_ratio.csv".into(), ratio_table(&report.report)),
    ];
    Ok(Outputs {
        json: serde_json::to_value(report)?,
        csv,
        summary,
    })
}

fn cmd_verify(config: &RunConfig, inputs: &mut BTreeMap<String, String>) -> Result<Outputs> {
    let s = select_function(&config.s, config, inputs)?;
    let report = verify_admissible(&s, &profile_for(config)?, config.target)?;
    let summary = vec![format!("admissible verify {}: {}", config.s, verdict(&report))];
    let csv = vec![("admissible_ratio.csv".into(), ratio_table(&report))];
    Ok(Outputs {
        json: serde_json::to_value(VerifyReport {
            s: config.s.clone(),
            report,
        })?,
        csv,
        summary,
    })
}

fn cmd_spectrum(config: &RunConfig, inputs: &mut BTreeMap<String, String>) -> Result<Outputs> {
    let action = config.action()?;
    let s = select_function(&config.s, config, inputs)?;
    let (grid, th) = (config.grid(), config.thresholds());
    let results = config
        .m
        .values()
        .par_iter()
        .map(|&m| {
            let spec = ModeSpec::new(action.clone(), IrrepLabel(m), s.clone(), config.extra_twist)?;
            kernel_dims_refined(&spec, &grid, &th)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = CsvTable::new(["m", "degree", "rank", "eigenvalue", "residual", "kernel_dim"]);
    let mut summary = Vec::new();
    for r in &results {
        for d in &r.degrees {
            for (i, (v, res)) in d.eigenvalues.iter().zip(&d.residuals).enumerate() {
                csv.push(vec![
                    r.spec.m.into(),
                    u32::from(d.degree).into(),
                    i.into(),
                    (*v).into(),
                    (*res).into(),
                    d.kernel_dim.into(),
                ]);
            }
        }
        summary.push(format!("m = {}: kernel_dims = {:?}", r.spec.m, r.kernel_dims));
    }
    Ok(Outputs {
        json: serde_json::to_value(SpectrumReport { results })?,
        csv: vec![("spectrum.csv".into(), csv)],
        summary,
    })
}

fn cmd_invariance(config: &RunConfig, inputs: &mut BTreeMap<String, String>) -> Result<Outputs> {
    let s1 = select_function(&config.s1, config, inputs)?;
    let s2 = select_function(&config.s2, config, inputs)?;
    let report: InvarianceReport = invariance_check(
        &config.action()?,
        &config.m.values(),
        &s1,
        &s2,
        &config.grid(),
        &config.thresholds(),
    )?;
    let mut csv = CsvTable::new(["m", "dim0_s1", "dim1_s1", "dim0_s2", "dim1_s2", "equal"]);
    for e in &report.entries {
        csv.push(vec![
            e.m.into(),
            e.dims_s1.0.into(),
            e.dims_s1.1.into(),
            e.dims_s2.0.into(),
            e.dims_s2.1.into(),
            e.equal.into(),
        ]);
    }
    let summary = vec![format!(
        "invariance {} vs {} over {}: {}",
        config.s1,
        config.s2,
        config.m,
        if report.all_equal { "all equal" } else { "MISMATCH" }
    )];
    Ok(Outputs {
        json: serde_json::to_value(report)?,
        csv: vec![("invariance.csv".into(), csv)],
        summary,
    })
}

fn cmd_kodaira(config: &RunConfig, inputs: &mut BTreeMap<String, String>) -> Result<Outputs> {
    let s = select_function(&config.s, config, inputs)?;
    let ks: Vec<u32> = config.k.values().into_iter().map(|k| k as u32).collect();
    let curve: KodairaCurve = kodaira_scan(
        &config.action()?,
        config.m.lo,
        &s,
        &ks,
        &config.grid(),
        &config.thresholds(),
    )?;
    let mut csv = CsvTable::new(["k", "gap", "dim0", "expected_dim0"]);
    for p in &curve.points {
        csv.push(vec![p.k.into(), p.gap.into(), p.dim0.into(), p.expected_dim0.into()]);
    }
    let summary = vec![format!(
        "kodaira m = {}: k0 = {}, tail monotone = {}, degree-0 dims match = {}",
        curve.m,
        curve.k0.map_or("none".to_string(), |k| k.to_string()),
        curve.tail_monotone,
        curve.dims_match
    )];
    Ok(Outputs {
        json: serde_json::to_value(curve)?,
        csv: vec![("kodaira.csv".into(), csv)],
        summary,
    })
}

fn provenance(command: &str) -> BTreeMap<String, String> {
    let tags: &[(&str, &str)] = match command {
        "betti" => &[("betti", "exact denumerants by dynamic programming over the weights")],
        "index" => &[("index", "alternating sum of exact background Betti numbers")],
        "admissible-build" => &[
            ("profile", "level-set extrema from simplex vertices and seeded samples"),
            ("builder", "piecewise exponential auxiliary function with exact tail integral"),
            ("verify", "split lower bound of the admissibility ratio on the level grid"),
        ],
        "admissible-verify" => &[
            ("profile", "level-set extrema from simplex vertices and seeded samples"),
            ("verify", "split lower bound of the admissibility ratio on the level grid"),
        ],
        "spectrum" | "invariance" | "kodaira" => &[
            ("operator", "exponentially fitted radial finite differences per isotypic mode"),
            ("eigensolver", "Sturm bisection and inverse iteration, residual certified"),
            ("kernel", "two-threshold zero rule with at most one grid doubling"),
        ],
        _ => &[],
    };
    tags.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Runs `compute` through the cache when `BGCOH_CACHE_DIR` is set.
fn cached<T: Serialize + DeserializeOwned>(
    operation: &str,
    echo: &Value,
    compute: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let Some(cache) = Cache::from_env()? else {
        return compute();
    };
    let key = Cache::key(operation, echo)?;
    if let Some(text) = cache.load(&key)? {
        if let Ok(v) = serde_json::from_str(&text) {
            return Ok(v);
        }
    }
    let value = compute()?;
    cache.store(&key, &to_canonical_string(&value)?)?;
    Ok(value)
}

#[derive(Serialize, Deserialize)]
struct CachedOutputs {
    json: Value,
    csv: Vec<(String, Vec<String>, Vec<Vec<CachedCell>>)>,
    summary: Vec<String>,
}

#[derive(Serialize, Deserialize)]
enum CachedCell {
    I(String),
    F(f64),
    T(String),
    E,
}

impl From<&Outputs> for CachedOutputs {
    fn from(o: &Outputs) -> Self {
        let cell = |c: &Cell| match c {
            Cell::Int(v) => CachedCell::I(v.to_string()),
            // Non-finite floats do not survive JSON; keep their rendering.
            Cell::Float(v) if v.is_nan() => CachedCell::T("nan".into()),
            Cell::Float(v) if v.is_infinite() => CachedCell::T(if *v > 0.0 { "inf" } else { "-inf" }.into()),
            Cell::Float(v) => CachedCell::F(*v),
            Cell::Text(s) => CachedCell::T(s.clone()),
            Cell::Empty => CachedCell::E,
        };
        CachedOutputs {
            json: o.json.clone(),
            csv: o
                .csv
                .iter()
                .map(|(name, t)| (name.clone(), t.header.clone(), t.rows.iter().map(|r| r.iter().map(cell).collect()).collect()))
                .collect(),
            summary: o.summary.clone(),
        }
    }
}

impl From<CachedOutputs> for Outputs {
    fn from(c: CachedOutputs) -> Self {
        let cell = |c: CachedCell| match c {
            CachedCell::I(v) => Cell::Int(v.parse().unwrap_or_default()),
            CachedCell::F(v) => Cell::Float(v),
            CachedCell::T(s) => Cell::Text(s),
            CachedCell::E => Cell::Empty,
        };
        Outputs {
            json: c.json,
            csv: c
                .csv
                .into_iter()
                .map(|(name, header, rows)| {
                    (
                        name,
                        CsvTable {
                            header,
                            rows: rows.into_iter().map(|r| r.into_iter().map(cell).collect()).collect(),
                        },
                    )
                })
                .collect(),
            summary: c.summary,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str, manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    manifest.record_output(name, contents.as_bytes());
    Ok(())
}

/// Envelope of every JSON result file.
#[derive(Serialize)]
struct Envelope<'a> {
    manifest: &'a str,
    command: &'a str,
    data: &'a Value,
}

fn execute(command: &str, flags: &impl Serialize, output: &OutputFlags) -> Result<Vec<String>> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let (config, mut inputs) = resolve(flags, output)?;
    config.validate(command)?;
    let echo = config.echo(command)?;

    let outputs: Outputs = cached(command, &echo, || {
        let mut scratch = BTreeMap::new();
        let o = match command {
            "betti" => cmd_betti(&config),
            "index" => cmd_index(&config),
            "admissible-build" => cmd_build(&config),
            "admissible-verify" => cmd_verify(&config, &mut scratch),
            "spectrum" => cmd_spectrum(&config, &mut scratch),
            "invariance" => cmd_invariance(&config, &mut scratch),
            "kodaira" => cmd_kodaira(&config, &mut scratch),
            other => Err(Error::arg("command", format!("unknown command {other}"))),
        }?;
        Ok(CachedOutputs::from(&o))
    })?
    .into();
    // Files named by the selectors a command reads are inputs, hashed here
    // so that a cache hit records them too.
    let used: Vec<&String> = match command {
        "invariance" => vec![&config.s1, &config.s2],
        "admissible-verify" | "spectrum" | "kodaira" => vec![&config.s],
        _ => vec![],
    };
    for selector in used {
        let path = selector.split_once('*').map_or(selector.as_str(), |(_, p)| p.trim());
        if !["ref-sqrt", "sqrt", "const", "built"].contains(&path) {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            inputs.insert(format!("s:{path}"), sha256_hex(&bytes));
        }
    }

    let mut manifest = RunManifest::new(command, echo, provenance(command), inputs)?;
    let dir = config.out.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    if matches!(config.format, Format::Json | Format::Both) {
        let text = to_pretty_string(&Envelope {
            manifest: &manifest.hash,
            command,
            data: &outputs.json,
        })?;
        write_file(&dir, &format!("{command}.json"), &text, &mut manifest)?;
    }
    if matches!(config.format, Format::Csv | Format::Both) {
        for (name, table) in &outputs.csv {
            let text = table.render(&manifest.hash);
            write_file(&dir, name, &text, &mut manifest)?;
        }
    }
    manifest.wall_clock = Some(WallClock {
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    });
    write_file_raw(&dir.join("manifest.json"), &to_pretty_string(&manifest)?)?;
    let mut lines = outputs.summary;
    lines.push(format!("manifest {} -> {}", manifest.hash, dir.join("manifest.json").display()));
    Ok(lines)
}

fn write_file_raw(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn verify_manifest(path: &Path) -> Result<Vec<String>> {
    let file = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let dir = file.parent().unwrap_or(Path::new("."));
    manifest.verify(dir)?;
    Ok(vec![format!(
        "manifest {} verified ({} files)",
        manifest.hash,
        manifest.outputs.len()
    )])
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Summaries go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Betti(a) => execute("betti", a, &a.output),
        Command::Index(a) => execute("index", a, &a.output),
        Command::Admissible(AdmissibleCommand::Build(a)) => execute("admissible-build", a, &a.output),
        Command::Admissible(AdmissibleCommand::Verify(a)) => execute("admissible-verify", a, &a.output),
        Command::Spectrum(a) => execute("spectrum", a, &a.output),
        Command::Invariance(a) => execute("invariance", a, &a.output),
        Command::Kodaira(a) => execute("kodaira", a, &a.output),
        Command::VerifyManifest { path } => verify_manifest(path),
    };
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> std::process::ExitCode {
    let code = run(std::env::args_os());
    std::process::ExitCode::from(code as u8)
}
