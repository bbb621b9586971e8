//! Serializable certificate reports shared by the checkers.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::symcore::SymMat;

/// Version of the JSON and CSV layouts written by the tools.
pub const SCHEMA_VERSION: u32 = 1;

/// Worst sample seen by a checker. `value` is the checked quantity at that
/// sample, `margin` its cone margin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub matrix: SymMat,
    pub value: f64,
    pub margin: f64,
}

/// One row of a binned table: samples with key in [lo, hi).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinRow {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    pub worst_witness: Option<Witness>,
    pub fitted_constants: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bins: Vec<BinRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl ConditionReport {
    pub fn new(condition: &str, seed: u64) -> Self {
        ConditionReport {
            condition: condition.to_string(),
            pass: false,
            samples: 0,
            seed,
            worst_witness: None,
            fitted_constants: BTreeMap::new(),
            bins: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.fitted_constants.insert(name.to_string(), value);
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.fitted_constants.get(name).copied()
    }

    pub fn flag(&mut self, flag: &str) {
        self.flags.push(flag.to_string());
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
