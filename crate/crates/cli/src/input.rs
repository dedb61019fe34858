use std::collections::BTreeMap;
use std::path::Path;

use finsym::expr::{parse, Expr};
use finsym::model::{CoefficientSpec, FinEquation};
use serde::Deserialize;

use crate::commands::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquationFile {
    #[serde(rename = "D")]
    d: CoefficientSpec,
    h: CoefficientSpec,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

pub struct Input {
    pub eq: FinEquation,
    /// Extra parameters such as `sign` or `C`.
    pub params: BTreeMap<String, f64>,
}

pub fn load(path: Option<&Path>) -> Result<Input, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("--eq <file> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let file: EquationFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let eq = FinEquation::new(file.d, file.h).validate()?;
    Ok(Input { eq, params: file.params })
}

pub fn expr(text: &str, what: &str) -> Result<Expr, CliError> {
    parse(text).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

pub fn range(text: &str, what: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("{what} must be `lo,hi` with lo < hi, got `{text}`"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok((lo, hi))
    } else {
        Err(bad())
    }
}
