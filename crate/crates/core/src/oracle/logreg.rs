use serde::{Deserialize, Serialize};

use super::{DecisionTrace, Domain, OracleError, PartialDecision};

/// Bias-free linear classifier: class 1 iff `w . x > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LogRegDoc", into = "LogRegDoc")]
pub struct LogRegModel {
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogRegDoc {
    weights: Vec<f64>,
}

impl TryFrom<LogRegDoc> for LogRegModel {
    type Error = OracleError;

    fn try_from(doc: LogRegDoc) -> Result<Self, Self::Error> {
        LogRegModel::new(doc.weights)
    }
}

impl From<LogRegModel> for LogRegDoc {
    fn from(m: LogRegModel) -> Self {
        LogRegDoc { weights: m.weights }
    }
}

impl LogRegModel {
    pub fn new(weights: Vec<f64>) -> Result<Self, OracleError> {
        if weights.is_empty() {
            return Err(OracleError::InvalidModel("weight vector is empty".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(OracleError::InvalidModel(format!("weight[{i}] = {w} is not finite")));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn input_dim(&self) -> usize {
        self.weights.len()
    }
}

pub fn classify_logreg(model: &LogRegModel, x: &[f64]) -> Result<DecisionTrace, OracleError> {
    if x.len() != model.weights.len() {
        return Err(OracleError::DimensionMismatch {
            expected: model.weights.len(),
            found: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(OracleError::NonFinite { index, value });
    }
    let mut cumulative = 0.0;
    let decisions = model
        .weights
        .iter()
        .zip(x)
        .enumerate()
        .map(|(index, (w, xi))| {
            let product = w * xi;
            cumulative += product;
            PartialDecision::Product {
                index,
                product,
                cumulative,
            }
        })
        .collect();
    Ok(DecisionTrace {
        domain: Domain::LogReg,
        decisions,
        // Zero falls through to the "otherwise" branch.
        final_class: u8::from(cumulative > 0.0),
    })
}
