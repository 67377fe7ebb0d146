//! JSON chain-description documents.
//!
//! ```json
//! {
//!   "name": "leg",
//!   "compliance_units": "si",
//!   "compliance_matrices": { "foot": [[...6...], ...6 rows...] },
//!   "elements": [
//!     { "kind": "rigid", "factors": [{ "axis": "Tx", "value": 0.1 }] },
//!     { "kind": "rigid", "matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]] },
//!     { "kind": "actuated", "axis": "Tx", "value": 0.0 },
//!     { "kind": "spring1", "axis": "Tx", "k": 1.0e7 },
//!     { "kind": "spring6", "compliance": "foot", "scale": 1.0 },
//!     { "kind": "spring6", "stiffness": [[...6...], ...] },
//!     { "kind": "passive", "axis": "Ry" }
//!   ]
//! }
//! ```
//!
//! `index` may be given on `passive`, `spring1` and `spring6` (first θ of the
//! six); omitted indices are assigned in element order. Matrices are
//! row-major. Inline `stiffness` blocks are always SI. Named compliance
//! matrices are SI (m/N, rad/(N·m), 1/N couplings) unless
//! `compliance_units` is `"mm"`, in which case they are read as mm/N,
//! rad/(N·mm) and 1/N and converted. Unknown fields are rejected.

use std::collections::BTreeMap;

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use super::{ChainElement, ChainModel, SpringBlock};
use crate::error::{Error, Result};
use crate::se3::{Axis, Transform};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplianceUnits {
    #[default]
    Si,
    Mm,
}

impl ComplianceUnits {
    fn is_si(&self) -> bool {
        *self == ComplianceUnits::Si
    }

    /// Converts a compliance matrix in these units to SI.
    pub fn to_si(self, c: &Matrix6<f64>) -> Matrix6<f64> {
        match self {
            ComplianceUnits::Si => *c,
            ComplianceUnits::Mm => Matrix6::from_fn(|i, j| {
                let scale = match (i < 3, j < 3) {
                    (true, true) => 1e-3,
                    (false, false) => 1e3,
                    _ => 1.0,
                };
                c[(i, j)] * scale
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub name: String,
    #[serde(default, skip_serializing_if = "ComplianceUnits::is_si")]
    pub compliance_units: ComplianceUnits,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub compliance_matrices: BTreeMap<String, [[f64; 6]; 6]>,
    pub elements: Vec<ElementSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub axis: Axis,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ElementSpec {
    Rigid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<[[f64; 4]; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        factors: Option<Vec<FactorSpec>>,
    },
    Passive {
        axis: Axis,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    Actuated {
        axis: Axis,
        value: f64,
    },
    Spring1 {
        axis: Axis,
        k: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    Spring6 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        compliance: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stiffness: Option<[[f64; 6]; 6]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
}

impl ElementSpec {
    pub fn rigid_factors(factors: &[(Axis, f64)]) -> Self {
        ElementSpec::Rigid {
            matrix: None,
            factors: Some(
                factors
                    .iter()
                    .map(|(axis, value)| FactorSpec {
                        axis: *axis,
                        value: *value,
                    })
                    .collect(),
            ),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ElementSpec::Rigid { .. } => "rigid",
            ElementSpec::Passive { .. } => "passive",
            ElementSpec::Actuated { .. } => "actuated",
            ElementSpec::Spring1 { .. } => "spring1",
            ElementSpec::Spring6 { .. } => "spring6",
        }
    }
}

fn matrix6(rows: &[[f64; 6]; 6]) -> Matrix6<f64> {
    Matrix6::from_fn(|i, j| rows[i][j])
}

impl ChainDocument {
    /// Parses JSON text. Syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse(
                format!("document (line {}, column {})", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Compliance matrices converted to SI stiffness blocks.
    fn blocks(&self) -> Result<BTreeMap<&str, SpringBlock>> {
        let mut out = BTreeMap::new();
        for (name, rows) in &self.compliance_matrices {
            let c = self.compliance_units.to_si(&matrix6(rows));
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::parse(format!("compliance matrix `{name}`"), "non-finite entry"));
            }
            let block = SpringBlock::from_compliance(c)
                .map_err(|e| Error::parse(format!("compliance matrix `{name}`"), e.to_string()))?;
            out.insert(name.as_str(), block);
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<ChainModel> {
        let blocks = self.blocks()?;
        let mut next_q = 0;
        let mut next_theta = 0;
        let mut elements = Vec::with_capacity(self.elements.len());
        for (i, spec) in self.elements.iter().enumerate() {
            let label = || format!("element #{i} ({})", spec.kind());
            let element = match spec {
                ElementSpec::Rigid { matrix, factors } => {
                    let t = match (matrix, factors) {
                        (Some(m), None) => {
                            Transform::from_row_major(m).map_err(|e| Error::parse(label(), e.to_string()))?
                        }
                        (None, Some(fs)) => {
                            let mut t = Transform::identity();
                            for f in fs {
                                t = t * Transform::elementary(f.axis, f.value)
                                    .map_err(|e| Error::parse(label(), e.to_string()))?;
                            }
                            t
                        }
                        _ => return Err(Error::parse(label(), "expected exactly one of `matrix` or `factors`")),
                    };
                    ChainElement::Rigid(t)
                }
                ElementSpec::Passive { axis, index } => {
                    let idx = index.unwrap_or(next_q);
                    next_q += 1;
                    ChainElement::Passive { axis: *axis, index: idx }
                }
                ElementSpec::Actuated { axis, value } => {
                    if !value.is_finite() {
                        return Err(Error::parse(label(), "non-finite actuator value"));
                    }
                    ChainElement::Actuated {
                        axis: *axis,
                        value: *value,
                    }
                }
                ElementSpec::Spring1 { axis, k, index } => {
                    let idx = index.unwrap_or(next_theta);
                    next_theta += 1;
                    ChainElement::Spring1 {
                        axis: *axis,
                        index: idx,
                        stiffness: *k,
                    }
                }
                ElementSpec::Spring6 {
                    compliance,
                    stiffness,
                    scale,
                    index,
                } => {
                    let block = match (compliance, stiffness) {
                        (Some(name), None) => blocks
                            .get(name.as_str())
                            .cloned()
                            .ok_or_else(|| Error::parse(label(), format!("unknown compliance matrix `{name}`")))?,
                        (None, Some(rows)) => SpringBlock::from_stiffness(matrix6(rows))
                            .map_err(|e| Error::parse(label(), e.to_string()))?,
                        _ => {
                            return Err(Error::parse(label(), "expected exactly one of `compliance` or `stiffness`"))
                        }
                    };
                    let block = match scale {
                        Some(s) => block.scaled(*s).map_err(|e| Error::parse(label(), e.to_string()))?,
                        None => block,
                    };
                    let start = index.unwrap_or(next_theta);
                    next_theta += 6;
                    ChainElement::Spring6 { start, block }
                }
            };
            elements.push(element);
        }
        ChainModel::new(self.name.clone(), elements)
    }
}

/// Parses a chain description and builds the model.
pub fn parse_chain(text: &str) -> Result<ChainModel> {
    ChainDocument::from_json(text)?.build()
}
