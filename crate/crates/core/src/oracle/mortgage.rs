//! Mortgage review policy over loan records.
//!
//! The policy is data: a binary tree of `field > threshold` splits, each with
//! a sentence template for either branch. Categorical fields (debt-to-income
//! band, age bracket) compare through a per-policy table mapping each band to
//! its numeric upper bound.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{DecisionTrace, Domain, OracleError, PartialDecision};
use crate::codec::numeral::format_numeral;

pub const DTI_BANDS: [&str; 19] = [
    "<20%", "20%-<30%", "30%-<36%", "36", "37", "38", "39", "40", "41", "42", "43", "44", "45",
    "46", "47", "48", "49", "50%-60%", ">60%",
];

pub const AGE_BRACKETS: [&str; 7] = ["<25", "25-34", "35-44", "45-54", "55-64", "65-74", ">74"];

/// Comparison phrases a sentence may use for a true `>` predicate.
pub const TRUE_PHRASES: [&str; 1] = ["higher than"];
/// Comparison phrases a sentence may use for a false `>` predicate.
pub const FALSE_PHRASES: [&str; 2] = ["lower or equal to", "lower than"];

pub const THRESHOLD_PLACEHOLDER: &str = "{threshold}";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoanField {
    LoanAmount,
    LoanToValueRatio,
    DebtToIncomeRatio,
    ApplicantAge,
    LoanTerm,
    Income,
    PropertyValue,
    TotalLoanCosts,
}

impl LoanField {
    pub const ALL: [LoanField; 8] = [
        LoanField::LoanAmount,
        LoanField::LoanToValueRatio,
        LoanField::DebtToIncomeRatio,
        LoanField::ApplicantAge,
        LoanField::LoanTerm,
        LoanField::Income,
        LoanField::PropertyValue,
        LoanField::TotalLoanCosts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LoanField::LoanAmount => "loan_amount",
            LoanField::LoanToValueRatio => "loan_to_value_ratio",
            LoanField::DebtToIncomeRatio => "debt_to_income_ratio",
            LoanField::ApplicantAge => "applicant_age",
            LoanField::LoanTerm => "loan_term",
            LoanField::Income => "income",
            LoanField::PropertyValue => "property_value",
            LoanField::TotalLoanCosts => "total_loan_costs",
        }
    }

    /// Label used in the question text.
    pub fn label(self) -> &'static str {
        match self {
            LoanField::LoanAmount => "Loan amount",
            LoanField::LoanToValueRatio => "Loan-to-value ratio",
            LoanField::DebtToIncomeRatio => "Debt-to-income ratio",
            LoanField::ApplicantAge => "Applicant's age",
            LoanField::LoanTerm => "Loan term",
            LoanField::Income => "Income",
            LoanField::PropertyValue => "Property value",
            LoanField::TotalLoanCosts => "Total loan costs",
        }
    }

    pub fn is_monetary(self) -> bool {
        matches!(
            self,
            LoanField::LoanAmount
                | LoanField::Income
                | LoanField::PropertyValue
                | LoanField::TotalLoanCosts
        )
    }
}

impl fmt::Display for LoanField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! vocab_newtype {
    ($name:ident, $vocab:ident, $field:literal) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(label: &str) -> Result<Self, OracleError> {
                if $vocab.contains(&label) {
                    Ok(Self(label.to_string()))
                } else {
                    Err(OracleError::Vocabulary {
                        field: $field,
                        value: label.to_string(),
                    })
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = OracleError;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                Self::new(&s)
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

vocab_newtype!(DtiBand, DTI_BANDS, "debt_to_income_ratio");
vocab_newtype!(AgeBracket, AGE_BRACKETS, "applicant_age");

/// One mortgage application. Monetary fields are USD, the loan-to-value
/// ratio is a percentage, and the loan term is in months.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoanRecord {
    pub loan_amount: f64,
    pub loan_to_value_ratio: f64,
    pub debt_to_income_ratio: DtiBand,
    pub applicant_age: AgeBracket,
    pub loan_term: f64,
    pub income: f64,
    pub property_value: f64,
    pub total_loan_costs: f64,
}

impl LoanRecord {
    pub fn validate(&self) -> Result<(), OracleError> {
        for field in LoanField::ALL.into_iter().filter(|f| f.is_monetary()) {
            let v = self.numeric_field(field).unwrap_or(0.0);
            if !v.is_finite() || v < 0.0 {
                return Err(OracleError::InvalidRecord(format!("{field} = {v} must be a non-negative amount")));
            }
        }
        let ltv = self.loan_to_value_ratio;
        if !(0.0..=250.0).contains(&ltv) {
            return Err(OracleError::InvalidRecord(format!("loan_to_value_ratio = {ltv} outside [0, 250]")));
        }
        if !(self.loan_term.is_finite() && self.loan_term > 0.0) {
            return Err(OracleError::InvalidRecord(format!("loan_term = {} must be positive", self.loan_term)));
        }
        Ok(())
    }

    /// Value of a numeric field; `None` for the categorical ones.
    pub fn numeric_field(&self, field: LoanField) -> Option<f64> {
        match field {
            LoanField::LoanAmount => Some(self.loan_amount),
            LoanField::LoanToValueRatio => Some(self.loan_to_value_ratio),
            LoanField::LoanTerm => Some(self.loan_term),
            LoanField::Income => Some(self.income),
            LoanField::PropertyValue => Some(self.property_value),
            LoanField::TotalLoanCosts => Some(self.total_loan_costs),
            LoanField::DebtToIncomeRatio | LoanField::ApplicantAge => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MortgageClass {
    Issued,
    NotIssued,
}

impl MortgageClass {
    pub fn bit(self) -> u8 {
        match self {
            MortgageClass::Issued => 1,
            MortgageClass::NotIssued => 0,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 1 {
            MortgageClass::Issued
        } else {
            MortgageClass::NotIssued
        }
    }
}

/// Numeric stand-ins for categorical bands: each band maps to its upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandValues {
    pub debt_to_income_ratio: BTreeMap<String, f64>,
    pub applicant_age: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySplit {
    pub field: LoanField,
    pub threshold: f64,
    pub unit: String,
    /// Sentence for a true `field > threshold`; contains `{threshold}`.
    pub when_true: String,
    /// Sentence for a false `field > threshold`; contains `{threshold}`.
    pub when_false: String,
    pub if_true: PolicyNode,
    pub if_false: PolicyNode,
}

impl PolicySplit {
    pub fn predicate_text(&self) -> String {
        format!("{} > {}", self.field, format_numeral(self.threshold))
    }

    pub fn sentence(&self, truth: bool) -> String {
        let template = if truth { &self.when_true } else { &self.when_false };
        template.replace(THRESHOLD_PLACEHOLDER, &format_numeral(self.threshold))
    }

    pub fn evaluate(&self, policy: &MortgagePolicy, record: &LoanRecord) -> Result<bool, OracleError> {
        Ok(policy.field_value(record, self.field)? > self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyNode {
    Split(Box<PolicySplit>),
    Leaf { class: MortgageClass },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyDoc", into = "PolicyDoc")]
pub struct MortgagePolicy {
    name: String,
    version: u32,
    band_values: BandValues,
    root: PolicyNode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDoc {
    name: String,
    version: u32,
    band_values: BandValues,
    root: PolicyNode,
}

impl TryFrom<PolicyDoc> for MortgagePolicy {
    type Error = OracleError;

    fn try_from(d: PolicyDoc) -> Result<Self, Self::Error> {
        MortgagePolicy::new(d.name, d.version, d.band_values, d.root)
    }
}

impl From<MortgagePolicy> for PolicyDoc {
    fn from(p: MortgagePolicy) -> Self {
        PolicyDoc {
            name: p.name,
            version: p.version,
            band_values: p.band_values,
            root: p.root,
        }
    }
}

const REFERENCE_POLICY: &str = include_str!("../../data/reference_policy.json");

impl MortgagePolicy {
    pub fn new(
        name: String,
        version: u32,
        band_values: BandValues,
        root: PolicyNode,
    ) -> Result<Self, OracleError> {
        let invalid = |m: String| Err(OracleError::InvalidModel(m));
        for band in DTI_BANDS {
            if !band_values.debt_to_income_ratio.contains_key(band) {
                return invalid(format!("no value for debt-to-income band {band:?}"));
            }
        }
        for bracket in AGE_BRACKETS {
            if !band_values.applicant_age.contains_key(bracket) {
                return invalid(format!("no value for age bracket {bracket:?}"));
            }
        }
        let mut classes = (false, false);
        validate_node(&root, &mut classes)?;
        if !(classes.0 && classes.1) {
            return invalid("both classes must be reachable".into());
        }
        Ok(Self {
            name,
            version,
            band_values,
            root,
        })
    }

    /// The shipped review policy.
    pub fn reference() -> MortgagePolicy {
        static POLICY: OnceLock<MortgagePolicy> = OnceLock::new();
        POLICY
            .get_or_init(|| {
                serde_json::from_str(REFERENCE_POLICY).expect("bundled reference policy is valid")
            })
            .clone()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn root(&self) -> &PolicyNode {
        &self.root
    }

    pub fn band_values(&self) -> &BandValues {
        &self.band_values
    }

    /// Length of the longest root-to-leaf path.
    pub fn max_depth(&self) -> usize {
        fn go(n: &PolicyNode) -> usize {
            match n {
                PolicyNode::Leaf { .. } => 0,
                PolicyNode::Split(s) => 1 + go(&s.if_true).max(go(&s.if_false)),
            }
        }
        go(&self.root)
    }

    pub fn field_value(&self, record: &LoanRecord, field: LoanField) -> Result<f64, OracleError> {
        let lookup = |table: &BTreeMap<String, f64>, label: &str, name: &'static str| {
            table.get(label).copied().ok_or_else(|| OracleError::Vocabulary {
                field: name,
                value: label.to_string(),
            })
        };
        match field {
            LoanField::DebtToIncomeRatio => lookup(
                &self.band_values.debt_to_income_ratio,
                record.debt_to_income_ratio.as_str(),
                "debt_to_income_ratio",
            ),
            LoanField::ApplicantAge => lookup(
                &self.band_values.applicant_age,
                record.applicant_age.as_str(),
                "applicant_age",
            ),
            other => Ok(record.numeric_field(other).expect("numeric field")),
        }
    }

    /// Walks from the root; `decide(position, split)` returns the truth to
    /// record at each visited split, and that truth picks the branch.
    pub fn steer<E>(
        &self,
        mut decide: impl FnMut(usize, &PolicySplit) -> Result<bool, E>,
    ) -> Result<DecisionTrace, E> {
        let mut node = &self.root;
        let mut decisions = Vec::new();
        loop {
            match node {
                PolicyNode::Leaf { class } => {
                    return Ok(DecisionTrace {
                        domain: Domain::NlTree,
                        decisions,
                        final_class: class.bit(),
                    })
                }
                PolicyNode::Split(split) => {
                    let truth = decide(decisions.len(), split)?;
                    decisions.push(PartialDecision::Rule {
                        field: split.field,
                        predicate: split.predicate_text(),
                        truth,
                        sentence: split.sentence(truth),
                    });
                    node = if truth { &split.if_true } else { &split.if_false };
                }
            }
        }
    }
}

fn validate_node(node: &PolicyNode, classes: &mut (bool, bool)) -> Result<(), OracleError> {
    match node {
        PolicyNode::Leaf { class } => {
            match class {
                MortgageClass::Issued => classes.0 = true,
                MortgageClass::NotIssued => classes.1 = true,
            }
            Ok(())
        }
        PolicyNode::Split(s) => {
            let invalid = |m: String| Err(OracleError::InvalidModel(m));
            if !s.threshold.is_finite() {
                return invalid(format!("{} threshold is not finite", s.field));
            }
            for template in [&s.when_true, &s.when_false] {
                if template.matches(THRESHOLD_PLACEHOLDER).count() != 1 {
                    return invalid(format!("template {template:?} must contain {THRESHOLD_PLACEHOLDER} once"));
                }
            }
            let t = read_sentence(&s.sentence(true));
            let f = read_sentence(&s.sentence(false));
            match (t, f) {
                (Some(t), Some(f)) if t.truth && !f.truth && t.label == f.label => {}
                _ => {
                    return invalid(format!(
                        "templates for {} must render the same subject and threshold with a true and a false comparison phrase",
                        s.field
                    ))
                }
            }
            validate_node(&s.if_true, classes)?;
            validate_node(&s.if_false, classes)
        }
    }
}

/// A decision sentence read back: the sentence with its comparison phrase
/// removed (`label`) and the truth that phrase expresses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceReading {
    pub label: String,
    pub truth: bool,
}

fn sentence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let phrases: Vec<String> = TRUE_PHRASES
            .iter()
            .chain(FALSE_PHRASES.iter())
            .map(|p| regex::escape(p))
            .collect();
        Regex::new(&format!(r"^(The [^.]+?) is ({}) ([^ ].*)\.$", phrases.join("|")))
            .expect("static regex")
    })
}

/// Reads `The <subject> is <phrase> <object>.`; `None` if off-grammar.
pub fn read_sentence(sentence: &str) -> Option<SentenceReading> {
    let caps = sentence_re().captures(sentence)?;
    let phrase = caps.get(2)?.as_str();
    Some(SentenceReading {
        label: format!("{} is _ {}", &caps[1], &caps[3]),
        truth: TRUE_PHRASES.contains(&phrase),
    })
}

pub fn classify_mortgage(policy: &MortgagePolicy, record: &LoanRecord) -> Result<DecisionTrace, OracleError> {
    record.validate()?;
    policy.field_value(record, LoanField::DebtToIncomeRatio)?;
    policy.field_value(record, LoanField::ApplicantAge)?;
    policy.steer(|_, split| split.evaluate(policy, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_record() -> LoanRecord {
        LoanRecord {
            loan_amount: 115000.0,
            loan_to_value_ratio: 92.266,
            debt_to_income_ratio: DtiBand::new("<20%").unwrap(),
            applicant_age: AgeBracket::new("25-34").unwrap(),
            loan_term: 120.0,
            income: 83000.0,
            property_value: 475000.0,
            total_loan_costs: 0.0,
        }
    }

    #[test]
    fn reference_policy_loads() {
        let p = MortgagePolicy::reference();
        assert!(p.max_depth() >= 4);
    }

    #[test]
    fn table1_record_is_issued_via_four_decisions() {
        let p = MortgagePolicy::reference();
        let t = classify_mortgage(&p, &table1_record()).unwrap();
        assert_eq!(t.truths(), Some(vec![true, false, false, false]));
        assert_eq!(t.final_class, 1);
        let preds: Vec<_> = t
            .decisions
            .iter()
            .map(|d| match d {
                PartialDecision::Rule { predicate, .. } => predicate.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(
            preds,
            [
                "loan_to_value_ratio > 79",
                "income > 110000",
                "applicant_age > 34",
                "debt_to_income_ratio > 40"
            ]
        );
    }

    #[test]
    fn single_node_boundary_goes_false() {
        let split = PolicySplit {
            field: LoanField::Income,
            threshold: 50000.0,
            unit: "USD".into(),
            when_true: "The income is higher than ${threshold}.".into(),
            when_false: "The income is lower or equal to ${threshold}.".into(),
            if_true: PolicyNode::Leaf { class: MortgageClass::Issued },
            if_false: PolicyNode::Leaf { class: MortgageClass::NotIssued },
        };
        let ref_policy = MortgagePolicy::reference();
        let p = MortgagePolicy::new(
            "stump".into(),
            1,
            ref_policy.band_values().clone(),
            PolicyNode::Split(Box::new(split)),
        )
        .unwrap();
        let mut r = table1_record();
        r.income = 50000.0;
        let t = classify_mortgage(&p, &r).unwrap();
        assert_eq!(t.truths(), Some(vec![false]));
        assert_eq!(t.final_class, 0);
    }

    #[test]
    fn unknown_band_rejected() {
        assert!(DtiBand::new("35%").is_err());
        assert!(AgeBracket::new("8888").is_err());
        let json = serde_json::to_string(&table1_record()).unwrap().replace("25-34", "99");
        assert!(serde_json::from_str::<LoanRecord>(&json).is_err());
    }

    #[test]
    fn invalid_record_rejected() {
        let p = MortgagePolicy::reference();
        let mut r = table1_record();
        r.loan_to_value_ratio = 300.0;
        assert!(classify_mortgage(&p, &r).is_err());
        let mut r = table1_record();
        r.income = -1.0;
        assert!(classify_mortgage(&p, &r).is_err());
        let mut r = table1_record();
        r.loan_term = 0.0;
        assert!(classify_mortgage(&p, &r).is_err());
    }

    #[test]
    fn templates_must_oppose() {
        let mut doc: serde_json::Value =
            serde_json::from_str(REFERENCE_POLICY).unwrap();
        doc["root"]["when_false"] = doc["root"]["when_true"].clone();
        assert!(serde_json::from_value::<MortgagePolicy>(doc).is_err());
    }

    #[test]
    fn sentence_reading() {
        let r = read_sentence("The income is lower than $110000.").unwrap();
        assert!(!r.truth);
        assert_eq!(r.label, "The income is _ $110000");
        let r = read_sentence("The applicant's age is higher than 34 years.").unwrap();
        assert!(r.truth);
        assert!(read_sentence("The income is about $110000.").is_none());
        assert!(read_sentence("the income is higher than 5.").is_none());
    }
}
