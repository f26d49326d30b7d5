//! Pipeline driver behind the `lcs3d` binary: configuration, grid and line
//! extraction, surface assembly and verification reports.

pub mod commands;
pub mod config;
pub mod verify;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lcs3d::lines::LineKind;
use serde::{Deserialize, Serialize};

/// Failures, mapped to exit codes 1 (configuration) and 2 (computation).
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Compute(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Compute(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lcs3d::LcsError> for CliError {
    fn from(e: lcs3d::LcsError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

/// A command either finished cleanly or with some planes or checks failed
/// (exit code 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 3,
        }
    }

    pub fn partial_if(failed: bool) -> Self {
        if failed {
            Outcome::Partial
        } else {
            Outcome::Success
        }
    }
}

/// Line family selected on the command line. `shear` covers both shear
/// normals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Strain,
    Stretch,
    Shear,
}

impl Kind {
    pub fn line_kinds(self) -> Vec<LineKind> {
        match self {
            Kind::Strain => vec![LineKind::Strain],
            Kind::Stretch => vec![LineKind::Stretch],
            Kind::Shear => vec![LineKind::ShearPlus, LineKind::ShearMinus],
        }
    }

    pub fn is_elliptic(self) -> bool {
        self == Kind::Shear
    }

    /// Strain and stretch share the hyperbolic grids.
    pub fn stage_name(self) -> &'static str {
        if self.is_elliptic() {
            "elliptic"
        } else {
            "hyperbolic"
        }
    }
}

/// File-system name of a line kind.
pub fn kind_dir(kind: LineKind) -> &'static str {
    match kind {
        LineKind::Strain => "strain",
        LineKind::Stretch => "stretch",
        LineKind::ShearPlus => "shear-plus",
        LineKind::ShearMinus => "shear-minus",
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(
    path: &Path,
    what: &str,
) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Compute(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Compute(format!("malformed {what} {}: {e}", path.display())))
}

/// Path relative to the output directory, with `/` separators for the
/// manifests.
pub(crate) fn rel(parts: &[&str]) -> String {
    parts.join("/")
}

pub(crate) fn resolve(out: &Path, rel: &str) -> PathBuf {
    rel.split('/').fold(out.to_path_buf(), |p, s| p.join(s))
}
