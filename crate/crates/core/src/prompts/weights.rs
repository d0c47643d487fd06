use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PromptError, Result};
use crate::corpus::DocType;

/// Smallest weight any document type may carry.
pub const MIN_WEIGHT: f64 = 0.1;

/// Validated per-type weights: each at least [`MIN_WEIGHT`], summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMap([f64; 5]);

impl WeightMap {
    pub fn uniform() -> Self {
        WeightMap([0.2; 5])
    }

    pub fn get(&self, t: DocType) -> f64 {
        self.0[t.ordinal()]
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }
}

/// Floor weights below 0.1 and spread the remaining mass proportionally over the rest.
pub fn validate_weights(raw: &BTreeMap<DocType, f64>) -> Result<WeightMap> {
    let mut w = [0.0; 5];
    for t in DocType::ALL {
        let v = *raw
            .get(&t)
            .ok_or_else(|| PromptError::ContractViolation(format!("missing weight for {t}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(PromptError::ContractViolation(format!("invalid weight {v} for {t}")));
        }
        w[t.ordinal()] = v;
    }

    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return Ok(WeightMap::uniform());
    }
    let base: [f64; 5] = w.map(|x| x / total);

    let mut floored = [false; 5];
    loop {
        let free_mass = 1.0 - MIN_WEIGHT * floored.iter().filter(|f| **f).count() as f64;
        let free_sum: f64 = (0..5).filter(|&i| !floored[i]).map(|i| base[i]).sum();
        let mut changed = false;
        for i in 0..5 {
            if floored[i] {
                w[i] = MIN_WEIGHT;
            } else {
                w[i] = if free_sum > 0.0 { free_mass * base[i] / free_sum } else { 0.0 };
                if w[i] < MIN_WEIGHT {
                    floored[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let sum: f64 = w.iter().sum();
    Ok(WeightMap(w.map(|x| x / sum)))
}
