use serde::{Deserialize, Serialize};

use super::{DecisionTreeModel, Domain, LogRegModel, MortgagePolicy, OracleError};

pub const SPEC_SCHEMA_VERSION: u32 = 1;

/// A fully parameterized classifier from one of the three families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain")]
pub enum ClassifierSpec {
    #[serde(rename = "logreg")]
    LogReg(LogRegModel),
    #[serde(rename = "tree")]
    Tree(DecisionTreeModel),
    #[serde(rename = "nl_tree")]
    NlTree(MortgagePolicy),
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    schema_version: u32,
    #[serde(flatten)]
    spec: ClassifierSpec,
}

impl ClassifierSpec {
    pub fn domain(&self) -> Domain {
        match self {
            ClassifierSpec::LogReg(_) => Domain::LogReg,
            ClassifierSpec::Tree(_) => Domain::Tree,
            ClassifierSpec::NlTree(_) => Domain::NlTree,
        }
    }

    /// Serialized form with the mandatory `schema_version` field.
    pub fn to_json(&self) -> String {
        let file = SpecFile {
            schema_version: SPEC_SCHEMA_VERSION,
            spec: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| OracleError::SpecFormat(e.to_string()))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SPEC_SCHEMA_VERSION) => {}
            Some(v) => return Err(OracleError::SpecFormat(format!("unsupported schema_version {v}"))),
            None => return Err(OracleError::SpecFormat("missing schema_version".into())),
        }
        let file: SpecFile =
            serde_json::from_value(value).map_err(|e| OracleError::SpecFormat(e.to_string()))?;
        Ok(file.spec)
    }

    /// Bit-encoded specs report the longest possible decision path.
    pub fn max_path_len(&self) -> usize {
        match self {
            ClassifierSpec::LogReg(m) => m.input_dim(),
            ClassifierSpec::Tree(m) => m.depth(),
            ClassifierSpec::NlTree(p) => p.max_depth(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_version_is_mandatory() {
        let spec = ClassifierSpec::LogReg(LogRegModel::new(vec![1.0, -2.5]).unwrap());
        let json = spec.to_json();
        assert!(json.contains("\"schema_version\": 1"));
        assert!(json.contains("\"domain\": \"logreg\""));
        assert_eq!(ClassifierSpec::from_json(&json).unwrap(), spec);
        let without = json.replace("\"schema_version\": 1,", "");
        assert!(ClassifierSpec::from_json(&without).is_err());
    }

    #[test]
    fn policy_spec_round_trips() {
        let spec = ClassifierSpec::NlTree(MortgagePolicy::reference());
        assert_eq!(ClassifierSpec::from_json(&spec.to_json()).unwrap(), spec);
    }
}
