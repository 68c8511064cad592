//! Machine-readable verification reports.
//!
//! Reports are built so that two runs with identical flags serialize to
//! byte-identical JSON: the config map is ordered, every residual is a
//! plain f64 (shortest round-trip formatting), and the wallclock field is
//! only populated when explicitly requested.

use std::collections::BTreeMap;

use serde::Serialize;

/// Schema version of the JSON report.
pub const REPORT_SCHEMA: u32 = 1;

/// A complex value serialized as a {re, im} pair.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cpx {
    pub re: f64,
    pub im: f64,
}

impl From<num_complex::Complex64> for Cpx {
    fn from(z: num_complex::Complex64) -> Self {
        Cpx { re: z.re, im: z.im }
    }
}

/// One configuration entry; stringly-typed values are avoided so numbers
/// round-trip exactly.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum ConfigValue {
    Int(u64),
    Float(f64),
    Str(String),
}

impl From<u64> for ConfigValue {
    fn from(v: u64) -> Self {
        ConfigValue::Int(v)
    }
}
impl From<usize> for ConfigValue {
    fn from(v: usize) -> Self {
        ConfigValue::Int(v as u64)
    }
}
impl From<f64> for ConfigValue {
    fn from(v: f64) -> Self {
        ConfigValue::Float(v)
    }
}
impl From<&str> for ConfigValue {
    fn from(v: &str) -> Self {
        ConfigValue::Str(v.to_string())
    }
}

/// One verified condition.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub check_id: String,
    pub space: String,
    pub samples: usize,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(
        check_id: impl Into<String>,
        space: impl Into<String>,
        samples: usize,
        max_abs_residual: f64,
        tolerance: f64,
    ) -> Self {
        Check {
            check_id: check_id.into(),
            space: space.into(),
            samples,
            max_abs_residual,
            tolerance,
            pass: max_abs_residual < tolerance,
        }
    }
}

/// Suite report: config echoes every flag, seed, node count and step that
/// influences a number, so a run is reproducible from the report alone.
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub config: BTreeMap<String, ConfigValue>,
    pub checks: Vec<Check>,
    pub resample_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wallclock_ms: Option<u64>,
}

impl Report {
    pub fn new(suite: impl Into<String>) -> Self {
        Report {
            schema: REPORT_SCHEMA,
            suite: suite.into(),
            config: BTreeMap::new(),
            checks: Vec::new(),
            resample_count: 0,
            wallclock_ms: None,
        }
    }

    pub fn set_config(&mut self, key: impl Into<String>, value: impl Into<ConfigValue>) {
        self.config.insert(key.into(), value.into());
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_tracks_tolerance() {
        let c = Check::new("E1", "Y", 10, 1e-9, 1e-8);
        assert!(c.pass);
        let c = Check::new("E1", "Y", 10, 1e-8, 1e-8);
        assert!(!c.pass);
    }

    #[test]
    fn wallclock_omitted_by_default() {
        let r = Report::new("demo");
        let s = serde_json::to_string(&r).unwrap();
        assert!(!s.contains("wallclock"));
    }

    #[test]
    fn config_is_ordered() {
        let mut r = Report::new("demo");
        r.set_config("zeta", 1u64);
        r.set_config("alpha", 2u64);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
