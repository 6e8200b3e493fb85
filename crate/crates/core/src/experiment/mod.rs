//! Configuration-driven experiment runner.
//!
//! An experiment is described by a TOML file:
//!
//! ```toml
//! name = "sigma"
//! kind = "sigma-asymptotics"
//! seed = 0
//! output_dir = "out/sigma"   # optional
//! workers = 0                # 0: one worker per core
//! check = false
//!
//! [params]
//! t = 0.5
//! ns = [32, 64, 128, 256, 512]
//! ```
//!
//! Missing parameters take their defaults. [`run`] writes `manifest.toml`
//! (the fully resolved spec plus a `[provenance]` table, itself a valid spec),
//! the result tables of the kind and, in check mode, `check.csv`.

mod kinds;
mod output;
mod params;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use output::CheckRecord;
pub use params::{
    CauchyParams, ChaosParams, GammaParams, GreenParams, GuessKind, HrwParams, ManufacturedParams, PicardParams,
    ProdParams, SigmaParams, SolveParams, TrivialityParams,
};

use crate::noise::STREAM_RULE_VERSION;
use crate::solver::DEFAULT_BLOWUP_FACTOR;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "SGWAVE_OUTPUT_ROOT";

/// Output root used when neither the spec nor the environment names one.
pub const DEFAULT_OUTPUT_ROOT: &str = "sgwave-out";

/// Process exit codes of the `sgwave` binary.
pub mod exit_code {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const RUNTIME: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(#[from] crate::Error),
    #[error("output error at {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit_code::CONFIG,
            Self::Runtime(_) | Self::Output { .. } => exit_code::RUNTIME,
        }
    }
}

pub type ExperimentResult<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SigmaAsymptotics,
    GreenCheck,
    GammaCheck,
    HrwCheck,
    ProdScan,
    ChaosMoments,
    CauchyRate,
    Solve,
    Picard,
    Triviality,
    ManufacturedConvergence,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::SigmaAsymptotics,
        Kind::GreenCheck,
        Kind::GammaCheck,
        Kind::HrwCheck,
        Kind::ProdScan,
        Kind::ChaosMoments,
        Kind::CauchyRate,
        Kind::Solve,
        Kind::Picard,
        Kind::Triviality,
        Kind::ManufacturedConvergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::SigmaAsymptotics => "sigma-asymptotics",
            Kind::GreenCheck => "green-check",
            Kind::GammaCheck => "gamma-check",
            Kind::HrwCheck => "hrw-check",
            Kind::ProdScan => "prod-scan",
            Kind::ChaosMoments => "chaos-moments",
            Kind::CauchyRate => "cauchy-rate",
            Kind::Solve => "solve",
            Kind::Picard => "picard",
            Kind::Triviality => "triviality",
            Kind::ManufacturedConvergence => "manufactured-convergence",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Kind::SigmaAsymptotics => "σ_N(t) against log N with a slope fit",
            Kind::GreenCheck => "log law of the truncated Green function",
            Kind::GammaCheck => "Monte Carlo covariance of Ψ_N against Γ_N",
            Kind::HrwCheck => "lattice residual Σ 1/(a+|n|²) − π log(1+R²/a) against its bound",
            Kind::ProdScan => "charge-cancellation ratio scan",
            Kind::ChaosMoments => "moments of Θ_N: exact, Monte Carlo, threshold in α, Wick identities",
            Kind::CauchyRate => "decay of the exact difference moments between N and 2N",
            Kind::Solve => "one trajectory of the truncated equation",
            Kind::Picard => "Picard contraction of the Duhamel map and Strichartz pairs",
            Kind::Triviality => "unrenormalized vs linear runs, optionally coupled renormalized runs",
            Kind::ManufacturedConvergence => "time-step order on a manufactured solution",
        }
    }

    /// Experiment component of the noise-stream key.
    pub fn stream_id(self) -> u64 {
        Kind::ALL.iter().position(|k| *k == self).expect("listed") as u64
    }

    fn parse(name: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    SigmaAsymptotics(SigmaParams),
    GreenCheck(GreenParams),
    GammaCheck(GammaParams),
    HrwCheck(HrwParams),
    ProdScan(ProdParams),
    ChaosMoments(ChaosParams),
    CauchyRate(CauchyParams),
    Solve(SolveParams),
    Picard(PicardParams),
    Triviality(TrivialityParams),
    ManufacturedConvergence(ManufacturedParams),
}

impl Params {
    pub fn default_for(kind: Kind) -> Self {
        match kind {
            Kind::SigmaAsymptotics => Params::SigmaAsymptotics(Default::default()),
            Kind::GreenCheck => Params::GreenCheck(Default::default()),
            Kind::GammaCheck => Params::GammaCheck(Default::default()),
            Kind::HrwCheck => Params::HrwCheck(Default::default()),
            Kind::ProdScan => Params::ProdScan(Default::default()),
            Kind::ChaosMoments => Params::ChaosMoments(Default::default()),
            Kind::CauchyRate => Params::CauchyRate(Default::default()),
            Kind::Solve => Params::Solve(Default::default()),
            Kind::Picard => Params::Picard(Default::default()),
            Kind::Triviality => Params::Triviality(Default::default()),
            Kind::ManufacturedConvergence => Params::ManufacturedConvergence(Default::default()),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Params::SigmaAsymptotics(_) => Kind::SigmaAsymptotics,
            Params::GreenCheck(_) => Kind::GreenCheck,
            Params::GammaCheck(_) => Kind::GammaCheck,
            Params::HrwCheck(_) => Kind::HrwCheck,
            Params::ProdScan(_) => Kind::ProdScan,
            Params::ChaosMoments(_) => Kind::ChaosMoments,
            Params::CauchyRate(_) => Kind::CauchyRate,
            Params::Solve(_) => Kind::Solve,
            Params::Picard(_) => Kind::Picard,
            Params::Triviality(_) => Kind::Triviality,
            Params::ManufacturedConvergence(_) => Kind::ManufacturedConvergence,
        }
    }

    fn from_table(kind: Kind, table: toml::Table) -> ExperimentResult<Self> {
        fn de<T: serde::de::DeserializeOwned>(t: toml::Table) -> ExperimentResult<T> {
            t.try_into()
                .map_err(|e: toml::de::Error| ExperimentError::Config(format!("[params]: {}", e.message())))
        }
        Ok(match kind {
            Kind::SigmaAsymptotics => Params::SigmaAsymptotics(de(table)?),
            Kind::GreenCheck => Params::GreenCheck(de(table)?),
            Kind::GammaCheck => Params::GammaCheck(de(table)?),
            Kind::HrwCheck => Params::HrwCheck(de(table)?),
            Kind::ProdScan => Params::ProdScan(de(table)?),
            Kind::ChaosMoments => Params::ChaosMoments(de(table)?),
            Kind::CauchyRate => Params::CauchyRate(de(table)?),
            Kind::Solve => Params::Solve(de(table)?),
            Kind::Picard => Params::Picard(de(table)?),
            Kind::Triviality => Params::Triviality(de(table)?),
            Kind::ManufacturedConvergence => Params::ManufacturedConvergence(de(table)?),
        })
    }

    fn to_table(&self) -> toml::Table {
        let value = match self {
            Params::SigmaAsymptotics(p) => toml::Table::try_from(p),
            Params::GreenCheck(p) => toml::Table::try_from(p),
            Params::GammaCheck(p) => toml::Table::try_from(p),
            Params::HrwCheck(p) => toml::Table::try_from(p),
            Params::ProdScan(p) => toml::Table::try_from(p),
            Params::ChaosMoments(p) => toml::Table::try_from(p),
            Params::CauchyRate(p) => toml::Table::try_from(p),
            Params::Solve(p) => toml::Table::try_from(p),
            Params::Picard(p) => toml::Table::try_from(p),
            Params::Triviality(p) => toml::Table::try_from(p),
            Params::ManufacturedConvergence(p) => toml::Table::try_from(p),
        };
        value.expect("parameter structs serialize to tables")
    }
}

/// A parsed experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    pub workers: usize,
    pub check: bool,
    pub params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    kind: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    workers: usize,
    #[serde(default)]
    check: bool,
    #[serde(default)]
    params: toml::Table,
    // written into manifests; ignored on input
    #[serde(default, rename = "provenance")]
    _provenance: Option<toml::Table>,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, params: Params) -> Self {
        Self {
            name: name.into(),
            seed: 0,
            output_dir: None,
            workers: 0,
            check: false,
            params,
        }
    }

    pub fn kind(&self) -> Kind {
        self.params.kind()
    }

    pub fn parse(text: &str) -> ExperimentResult<Self> {
        let raw: RawSpec =
            toml::from_str(text).map_err(|e| ExperimentError::Config(format!("spec: {}", e.message())))?;
        let kind = Kind::parse(&raw.kind).ok_or_else(|| {
            ExperimentError::Config(format!(
                "unknown kind '{}'; known kinds: {}",
                raw.kind,
                Kind::ALL.map(|k| k.name()).join(", ")
            ))
        })?;
        if raw.name.is_empty() || raw.name.contains(['/', '\\']) {
            return Err(ExperimentError::Config(format!(
                "name must be a non-empty path component, got '{}'",
                raw.name
            )));
        }
        Ok(Self {
            name: raw.name,
            seed: raw.seed,
            output_dir: raw.output_dir,
            workers: raw.workers,
            check: raw.check,
            params: Params::from_table(kind, raw.params)?,
        })
    }

    pub fn load(path: &Path) -> ExperimentResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Output directory: `output_dir` if set, otherwise
    /// `$SGWAVE_OUTPUT_ROOT/<name>` or `sgwave-out/<name>`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(dir) => dir.clone(),
            None => {
                let root = std::env::var_os(OUTPUT_ROOT_VAR)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
                root.join(&self.name)
            }
        }
    }

    /// The spec as TOML with every parameter written out.
    pub fn to_toml(&self) -> String {
        let mut table = self.base_table();
        table.insert("params".into(), toml::Value::Table(self.params.to_table()));
        toml::to_string(&table).expect("spec serializes")
    }

    fn base_table(&self) -> toml::Table {
        let mut t = toml::Table::new();
        t.insert("name".into(), self.name.clone().into());
        t.insert("kind".into(), self.kind().name().into());
        t.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        if let Some(dir) = &self.output_dir {
            t.insert("output_dir".into(), dir.to_string_lossy().into_owned().into());
        }
        t.insert("workers".into(), toml::Value::Integer(self.workers as i64));
        t.insert("check".into(), self.check.into());
        t
    }

    fn manifest(&self, grids: &[usize]) -> String {
        let mut table = self.base_table();
        table.insert("params".into(), toml::Value::Table(self.params.to_table()));
        let mut prov = toml::Table::new();
        prov.insert("crate_version".into(), env!("CARGO_PKG_VERSION").into());
        prov.insert("stream_rule_version".into(), toml::Value::Integer(STREAM_RULE_VERSION as i64));
        prov.insert("stream_experiment_id".into(), toml::Value::Integer(self.kind().stream_id() as i64));
        prov.insert("blowup_factor_default".into(), DEFAULT_BLOWUP_FACTOR.into());
        prov.insert(
            "grid_sizes".into(),
            toml::Value::Array(grids.iter().map(|&m| toml::Value::Integer(m as i64)).collect()),
        );
        table.insert("provenance".into(), toml::Value::Table(prov));
        toml::to_string(&table).expect("manifest serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Diagnostics without running anything: parameter ranges, grid resolution
/// (M ≥ 2N + 2) and the (β, T, α) envelope β²T < 8πα.
pub fn validate(spec: &ExperimentSpec) -> Vec<Finding> {
    let mut findings = params::Findings::default();
    params::validate(&spec.params, &mut findings);
    findings.into_vec()
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output_dir: PathBuf,
    /// Files written, relative to `output_dir`, in write order.
    pub files: Vec<String>,
    pub checks: Vec<CheckRecord>,
    pub warnings: Vec<Finding>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Exit status for the binary: check failures only count in check mode.
    pub fn exit_code(&self, check_mode: bool) -> i32 {
        if check_mode && !self.passed() {
            exit_code::CHECK_FAILED
        } else {
            exit_code::PASS
        }
    }
}

/// Validates and runs `spec`, writing its artifacts. Validation errors abort
/// with [`ExperimentError::Config`]; warnings are logged and returned.
pub fn run(spec: &ExperimentSpec) -> ExperimentResult<Outcome> {
    let findings = validate(spec);
    let errors: Vec<String> = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .map(|f| f.message.clone())
        .collect();
    if !errors.is_empty() {
        return Err(ExperimentError::Config(errors.join("; ")));
    }
    for w in &findings {
        log::warn!("{}: {}", spec.name, w.message);
    }
    let dir = spec.resolved_output_dir();
    let mut out = output::OutputDir::create(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
    let result = pool.install(|| kinds::execute(spec, &mut out))?;
    out.write_text("manifest.toml", &spec.manifest(&result.grids))?;
    if spec.check {
        out.write_rows("check.csv", &result.checks)?;
    }
    Ok(Outcome {
        output_dir: dir,
        files: out.into_files(),
        checks: result.checks,
        warnings: findings,
    })
}

/// `(name, description)` for every kind.
pub fn list_kinds() -> Vec<(&'static str, &'static str)> {
    Kind::ALL.iter().map(|k| (k.name(), k.description())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in Kind::ALL {
            assert_eq!(Kind::parse(k.name()), Some(k));
            let spec = ExperimentSpec::new("x", Params::default_for(k));
            let back = ExperimentSpec::parse(&spec.to_toml()).unwrap();
            assert_eq!(back, spec);
        }
        assert_eq!(list_kinds().len(), 11);
    }

    #[test]
    fn parse_errors_are_config_errors() {
        let bad = [
            "name = \"a\"\nkind = \"nope\"",
            "kind = \"solve\"",
            "name = \"a\"\nkind = \"solve\"\n[params]\nunknown = 1",
            "name = \"a\"\nkind = \"solve\"\nextra = 2",
            "name = \"a/b\"\nkind = \"solve\"",
        ];
        for text in bad {
            let e = ExperimentSpec::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), exit_code::CONFIG, "{text}: {e}");
        }
    }

    #[test]
    fn defaults_fill_missing_params() {
        let spec = ExperimentSpec::parse("name = \"s\"\nkind = \"sigma-asymptotics\"\n[params]\nt = 0.25").unwrap();
        let Params::SigmaAsymptotics(p) = &spec.params else {
            panic!("wrong kind")
        };
        assert_eq!(p.t, 0.25);
        assert_eq!(p.ns, SigmaParams::default().ns);
    }

    #[test]
    fn manifest_is_a_spec() {
        let mut spec = ExperimentSpec::new("m", Params::default_for(Kind::Picard));
        spec.seed = 42;
        spec.output_dir = Some("somewhere".into());
        let back = ExperimentSpec::parse(&spec.manifest(&[144])).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn output_dir_resolution() {
        let mut spec = ExperimentSpec::new("n", Params::default_for(Kind::HrwCheck));
        spec.output_dir = Some("/tmp/explicit".into());
        assert_eq!(spec.resolved_output_dir(), PathBuf::from("/tmp/explicit"));
    }

    #[test]
    fn stream_ids_are_distinct() {
        let mut ids: Vec<u64> = Kind::ALL.iter().map(|k| k.stream_id()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 11);
    }
}
