#![allow(dead_code)]

use std::path::PathBuf;

use ccot::codec::numeral::{format_numeral, parse_numeral};
use ccot::codec::{parse, ParsedDecision, SequenceKind};
use ccot::oracle::{
    AgeBracket, ClassifierInput, ClassifierSpec, DecisionTrace, DecisionTreeModel, Domain, DtiBand, LoanRecord,
    LogRegModel, MortgagePolicy, PartialDecision, TreeNode,
};
use ccot::protocol::{BackendTranscript, Branch, RunMode};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Golden {
    pub question: String,
    pub reasoning: String,
    pub answer: String,
    pub explanation: String,
}

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path)
}

pub fn golden(domain: Domain) -> Golden {
    let path = fixture(&format!("golden/{}.json", domain.as_str()));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("golden fixture")
}

const LOGREG_X: [f64; 8] = [-0.4408, 0.7812, -0.3482, 0.9094, 0.869, -0.0214, -0.0555, -0.8395];
const LOGREG_PRODUCTS: [f64; 8] = [-1.2465, -2.9536, -2.3885, 7.2595, -4.5762, 0.2138, -0.5065, 6.8913];

/// Weights that reproduce the displayed products for the logistic-regression
/// example input.
pub fn logreg_spec() -> ClassifierSpec {
    let w = LOGREG_PRODUCTS.iter().zip(LOGREG_X).map(|(p, x)| p / x).collect();
    ClassifierSpec::LogReg(LogRegModel::new(w).unwrap())
}

/// Depth-7 tree over two features whose path for `[0.923, 0.252]` runs
/// through the nodes of the decision-tree example.
pub fn tree_spec() -> ClassifierSpec {
    let depth = 7;
    let internal = (1 << depth) - 1;
    let mut nodes: Vec<TreeNode> = (0..internal)
        .map(|i: usize| {
            let level = (usize::BITS - (i + 1).leading_zeros() - 1) as usize;
            TreeNode {
                feature: level % 2,
                threshold: 0.5,
                sign: 1,
            }
        })
        .collect();
    let path = [
        (0, 0.3562, -1),
        (2, 0.6825, 1),
        (6, 0.5613, -1),
        (14, 0.2597, -1),
        (29, 0.8087, 1),
        (59, 0.0709, 1),
        (119, 0.8676, -1),
    ];
    for (idx, threshold, sign) in path {
        nodes[idx].threshold = threshold;
        nodes[idx].sign = sign;
    }
    let leaves = (0..=internal).map(|j| (j % 2) as u8 ^ 1).collect::<Vec<u8>>();
    let mut leaves = leaves;
    leaves[240 - internal] = 0;
    ClassifierSpec::Tree(DecisionTreeModel::new(depth, 2, nodes, leaves).unwrap())
}

pub fn loan_record() -> LoanRecord {
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

pub fn golden_case(domain: Domain) -> (ClassifierSpec, ClassifierInput) {
    match domain {
        Domain::LogReg => (logreg_spec(), ClassifierInput::Vector(LOGREG_X.to_vec())),
        Domain::Tree => (tree_spec(), ClassifierInput::Vector(vec![0.923, 0.252])),
        Domain::NlTree => (
            ClassifierSpec::NlTree(MortgagePolicy::reference()),
            ClassifierInput::Loan(loan_record()),
        ),
    }
}

/// Direct dot product: per-index products, running sums, and `sum > 0`.
pub fn brute_logreg(weights: &[f64], x: &[f64]) -> (Vec<(f64, f64)>, u8) {
    let mut steps = Vec::new();
    let mut y = 0.0;
    for i in 0..weights.len() {
        let p = weights[i] * x[i];
        y += p;
        steps.push((p, y));
    }
    (steps, u8::from(y > 0.0))
}

/// Enumerates every root-to-leaf path and returns the one whose conditions
/// all hold, as `(truths, class)`.
pub fn brute_tree(model: &DecisionTreeModel, x: &[f64]) -> (Vec<bool>, u8) {
    let depth = model.depth();
    let internal = model.nodes().len();
    let mut hits = Vec::new();
    for leaf in 0..=internal {
        // Bit k of the leaf index (from the top) says which way level k went.
        let mut idx = 0usize;
        let mut truths = Vec::with_capacity(depth);
        let mut ok = true;
        for level in 0..depth {
            let go_right = (leaf >> (depth - 1 - level)) & 1 == 1;
            let node = model.nodes()[idx];
            let v = x[node.feature];
            let holds = if node.sign < 0 { v < node.threshold } else { v > node.threshold };
            if holds == go_right {
                ok = false;
                break;
            }
            truths.push(holds);
            idx = 2 * idx + 1 + usize::from(go_right);
        }
        if ok {
            hits.push((truths, model.leaves()[leaf]));
        }
    }
    assert_eq!(hits.len(), 1, "exactly one leaf must be reachable");
    hits.pop().unwrap()
}

/// What the parser should recover for `trace` rendered as `kind`.
pub fn expected_decisions(trace: &DecisionTrace, kind: SequenceKind) -> Option<Vec<ParsedDecision>> {
    let shown = |v: f64| parse_numeral(&format_numeral(v)).unwrap();
    match kind {
        SequenceKind::Answer => None,
        _ => Some(
            trace
                .decisions
                .iter()
                .map(|d| match d {
                    PartialDecision::Product { product, cumulative, .. } => ParsedDecision::Step {
                        product: shown(*product),
                        cumulative: shown(*cumulative),
                    },
                    PartialDecision::Comparison { predicate, truth } => ParsedDecision::Bit {
                        truth: *truth,
                        label: (kind == SequenceKind::Explanation).then(|| predicate.clone()),
                    },
                    PartialDecision::Rule { truth, sentence, .. } => ParsedDecision::Bit {
                        truth: *truth,
                        label: (kind == SequenceKind::Explanation)
                            .then(|| ccot::oracle::read_sentence(sentence).unwrap().label),
                    },
                })
                .collect(),
        ),
    }
}

pub fn transcript(id: &str, domain: Domain, reasoning: Option<&str>, answer: &str, explanation: &str) -> BackendTranscript {
    BackendTranscript {
        input_id: id.to_string(),
        domain,
        mode: if reasoning.is_some() { RunMode::TwoStep } else { RunMode::Direct },
        question: String::new(),
        reasoning: reasoning.map(|r| Branch::from_text(r.to_string(), domain, SequenceKind::Reasoning)),
        answer: Branch::from_text(answer.to_string(), domain, SequenceKind::Answer),
        explanation: Branch::from_text(explanation.to_string(), domain, SequenceKind::Explanation),
        perturbation: None,
        elapsed_ms: None,
    }
}

pub fn parses_back(text: &str, trace: &DecisionTrace, kind: SequenceKind) -> Result<(), String> {
    let out = parse(text, trace.domain, kind);
    if out.final_class != Some(trace.final_class) {
        return Err(format!("{kind} {text:?}: class {:?} != {}", out.final_class, trace.final_class));
    }
    if !out.complete {
        return Err(format!("{kind} {text:?}: incomplete parse"));
    }
    let want = expected_decisions(trace, kind);
    if kind != SequenceKind::Answer && out.decisions != want {
        return Err(format!("{kind} {text:?}: decisions {:?} != {:?}", out.decisions, want));
    }
    Ok(())
}
