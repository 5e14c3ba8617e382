//! Experiment configuration: plain-text `key = value` file with sections.
//!
//! ```text
//! [experiment]
//! case = discrete            # discrete | continuous_symmetric | nonsym_flow
//!                            # | weyl_defect | birkhoff
//! d = 2
//! n_list = 16,32,64          # strictly increasing
//! realizations = 32
//! master_seed = 1
//! tol = 1e-10                # solver relative residual
//! output_dir = runs/demo
//! defect_kind = pot          # weyl_defect only: pot | sol
//! a = 1,0,0,1                # nonsym_flow only: row-major d×d, default I
//!
//! [medium]
//! kind = iid_two_phase
//! t_low = 0.5
//! t_high = 2.0
//! p = 0.5
//! contrast = 2.0
//! ```
//!
//! The `[medium]` grammar is the media module's: `kind`, `contrast`, and the
//! kind's own keys (`values`; `axis`/`profile` with `;`-separated layers;
//! `t_low`/`t_high`/`p`; `lo`/`hi`; `radius`; `period`/`table`).

use std::path::PathBuf;

use sha2::{Digest, Sha256};

use perihom_core::config::{find_section, parse_sections, ConfigError, Section};
use perihom_core::homogenize::HomogenizeError;
use perihom_core::lattice::LatticeError;
use perihom_core::media::{MediaError, MediumSpec};
use perihom_core::solvers::SolverError;
use perihom_core::weyl::{DefectKind, WeylError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    Discrete,
    ContinuousSymmetric,
    NonsymFlow,
    WeylDefect,
    Birkhoff,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::Discrete => "discrete",
            CaseTag::ContinuousSymmetric => "continuous_symmetric",
            CaseTag::NonsymFlow => "nonsym_flow",
            CaseTag::WeylDefect => "weyl_defect",
            CaseTag::Birkhoff => "birkhoff",
        }
    }

    fn parse(raw: &str) -> Option<Self> {
        Some(match raw {
            "discrete" => CaseTag::Discrete,
            "continuous_symmetric" => CaseTag::ContinuousSymmetric,
            "nonsym_flow" => CaseTag::NonsymFlow,
            "weyl_defect" => CaseTag::WeylDefect,
            "birkhoff" => CaseTag::Birkhoff,
            _ => return None,
        })
    }
}

#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Io(std::io::Error),
    /// Output directory holds results of a different configuration.
    DigestMismatch { existing: String, current: String },
    /// rows.csv present but unreadable as this configuration's schema.
    CorruptRows(String),
    Compute(String),
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "config error: {e}"),
            HarnessError::Io(e) => write!(f, "io error: {e}"),
            HarnessError::DigestMismatch { existing, current } => write!(
                f,
                "output directory belongs to config {existing}, current config is {current}; \
                 choose a fresh output_dir"
            ),
            HarnessError::CorruptRows(msg) => write!(f, "cannot resume: {msg}"),
            HarnessError::Compute(msg) => write!(f, "compute failure: {msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}

impl From<MediaError> for HarnessError {
    fn from(e: MediaError) -> Self {
        HarnessError::Compute(e.to_string())
    }
}

impl From<LatticeError> for HarnessError {
    fn from(e: LatticeError) -> Self {
        HarnessError::Compute(e.to_string())
    }
}

impl From<HomogenizeError> for HarnessError {
    fn from(e: HomogenizeError) -> Self {
        HarnessError::Compute(e.to_string())
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        HarnessError::Compute(e.to_string())
    }
}

impl From<WeylError> for HarnessError {
    fn from(e: WeylError) -> Self {
        HarnessError::Compute(e.to_string())
    }
}

/// A parsed, validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub case: CaseTag,
    pub d: usize,
    pub n_list: Vec<usize>,
    pub realizations: u64,
    pub master_seed: u64,
    pub tol: f64,
    pub output_dir: PathBuf,
    pub medium: MediumSpec,
    pub defect_kind: DefectKind,
    /// Row-major constant `a` of the non-symmetric operator.
    pub a_matrix: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let sections = parse_sections(text)?;
        let exp = find_section(&sections, "experiment")?;
        let med = find_section(&sections, "medium")?;
        Self::from_sections(exp, med)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    fn from_sections(exp: &Section, med: &Section) -> Result<Self, HarnessError> {
        let case_raw = exp.require("case")?;
        let case = CaseTag::parse(case_raw).ok_or_else(|| ConfigError::BadValue {
            section: "experiment".into(),
            key: "case".into(),
            value: case_raw.into(),
        })?;
        let d: usize = exp.parse("d")?;
        let n_list: Vec<usize> = exp.parse_list("n_list")?;
        if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid("n_list must be non-empty and strictly increasing".into()).into());
        }
        let realizations: u64 = exp.parse_or("realizations", 1)?;
        if realizations < 1 {
            return Err(ConfigError::Invalid("realizations must be ≥ 1".into()).into());
        }
        let master_seed: u64 = exp.parse_or("master_seed", 0)?;
        let tol: f64 = exp.parse_or("tol", 1e-10)?;
        if !(tol > 0.0) {
            return Err(ConfigError::Invalid(format!("tol must be positive, got {tol}")).into());
        }
        let output_dir = PathBuf::from(exp.require("output_dir")?);
        let medium = MediumSpec::from_section(med)?;
        let defect_kind = match exp.get("defect_kind") {
            None | Some("pot") => DefectKind::Potential,
            Some("sol") => DefectKind::Solenoidal,
            Some(other) => {
                return Err(ConfigError::BadValue {
                    section: "experiment".into(),
                    key: "defect_kind".into(),
                    value: other.into(),
                }
                .into())
            }
        };
        let a_matrix = match exp.get("a") {
            None => perihom_core::linalg::identity(d),
            Some(_) => {
                let vals: Vec<f64> = exp.parse_list("a")?;
                if vals.len() != d * d {
                    return Err(ConfigError::Invalid(format!(
                        "key `a` needs {} row-major entries for d = {d}",
                        d * d
                    ))
                    .into());
                }
                vals
            }
        };
        let config = ExperimentConfig {
            case,
            d,
            n_list,
            realizations,
            master_seed,
            tol,
            output_dir,
            medium,
            defect_kind,
            a_matrix,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if !(1..=3).contains(&self.d) {
            return Err(ConfigError::Invalid(format!("d must be 1..=3, got {}", self.d)).into());
        }
        if matches!(self.case, CaseTag::WeylDefect | CaseTag::Birkhoff) {
            if self.d < 2 && matches!(self.case, CaseTag::WeylDefect) {
                return Err(
                    ConfigError::Invalid("weyl_defect requires d ≥ 2".into()).into()
                );
            }
            // the known-type samplers need a finite-range medium that fits the
            // smallest window; fail now rather than mid-sweep
            let min_n = self.n_list[0];
            let grid = perihom_core::lattice::TorusGrid::new(self.d, min_n)?;
            perihom_core::media::sample_known_potential(
                &self.medium,
                perihom_core::media::Seed::new(0),
                grid,
            )?;
        }
        Ok(())
    }

    /// Canonical digest of the semantic configuration; keys the resume state.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "case={};d={};n_list={:?};realizations={};master_seed={};tol={:e};medium={:?};contrast={:e};defect_kind={};a={:?}",
            self.case.as_str(),
            self.d,
            self.n_list,
            self.realizations,
            self.master_seed,
            self.tol,
            self.medium.kind,
            self.medium.contrast,
            self.defect_kind.as_str(),
            self.a_matrix,
        );
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse a standalone medium file (a `[medium]` section, `d` inside it) for
/// the one-shot `tensor` subcommand.
pub fn parse_medium_file(text: &str) -> Result<(MediumSpec, usize), HarnessError> {
    let sections = parse_sections(text)?;
    let med = find_section(&sections, "medium")?;
    let d: usize = med.parse("d")?;
    if !(1..=3).contains(&d) {
        return Err(ConfigError::Invalid(format!("d must be 1..=3, got {d}")).into());
    }
    let spec = MediumSpec::from_section(med)?;
    Ok((spec, d))
}

/// Optional constant `a` (row-major) from a medium file, identity by default.
pub fn parse_a_matrix(text: &str, d: usize) -> Result<Vec<f64>, HarnessError> {
    let sections = parse_sections(text)?;
    let med = find_section(&sections, "medium")?;
    match med.get("a") {
        None => Ok(perihom_core::linalg::identity(d)),
        Some(_) => {
            let vals: Vec<f64> = med.parse_list("a")?;
            if vals.len() != d * d {
                return Err(ConfigError::Invalid(format!(
                    "key `a` needs {} row-major entries for d = {d}",
                    d * d
                ))
                .into());
            }
            Ok(vals)
        }
    }
}
