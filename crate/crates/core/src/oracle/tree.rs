use serde::{Deserialize, Serialize};

use super::{DecisionTrace, Domain, OracleError, PartialDecision};
use crate::codec::numeral::{format_numeral, parse_numeral};

/// Deepest tree the harness will build or load (2^20 leaves).
pub const MAX_TREE_DEPTH: usize = 20;

/// Internal node: compares `x[feature]` against `threshold`; `sign = -1`
/// turns the comparison into `x < t`, `sign = +1` into `x > t`. A true
/// comparison descends left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: usize,
    pub threshold: f64,
    pub sign: i8,
}

impl TreeNode {
    pub fn holds(&self, x: &[f64]) -> bool {
        let value = x[self.feature];
        if self.sign < 0 {
            value < self.threshold
        } else {
            value > self.threshold
        }
    }

    pub fn predicate_text(&self, x: &[f64]) -> String {
        let op = if self.sign < 0 { '<' } else { '>' };
        format!(
            "{} {op} {}",
            format_numeral(x[self.feature]),
            format_numeral(self.threshold)
        )
    }
}

/// Complete binary decision tree stored in heap order: node `i` has children
/// `2i + 1` (left) and `2i + 2` (right); leaf `j` sits below the last level of
/// internal nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc", into = "TreeDoc")]
pub struct DecisionTreeModel {
    depth: usize,
    input_dim: usize,
    nodes: Vec<TreeNode>,
    leaves: Vec<u8>,
}

impl DecisionTreeModel {
    pub fn new(
        depth: usize,
        input_dim: usize,
        nodes: Vec<TreeNode>,
        leaves: Vec<u8>,
    ) -> Result<Self, OracleError> {
        let invalid = |msg: String| Err(OracleError::InvalidModel(msg));
        if depth == 0 || depth > MAX_TREE_DEPTH {
            return invalid(format!("depth {depth} outside 1..={MAX_TREE_DEPTH}"));
        }
        if input_dim == 0 {
            return invalid("input_dim must be positive".into());
        }
        if depth > 1 && input_dim < 2 {
            return invalid("consecutive nodes need two distinct features".into());
        }
        let internal = (1usize << depth) - 1;
        if nodes.len() != internal || leaves.len() != internal + 1 {
            return invalid(format!(
                "depth {depth} needs {internal} nodes and {} leaves, got {} and {}",
                internal + 1,
                nodes.len(),
                leaves.len()
            ));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.feature >= input_dim {
                return invalid(format!("node {i} feature {} >= {input_dim}", n.feature));
            }
            if !(n.threshold > 0.0 && n.threshold < 1.0) {
                return invalid(format!("node {i} threshold {} outside (0, 1)", n.threshold));
            }
            if n.sign != 1 && n.sign != -1 {
                return invalid(format!("node {i} sign {} is not -1 or 1", n.sign));
            }
            if i > 0 && nodes[(i - 1) / 2].feature == n.feature {
                return invalid(format!("node {i} repeats its parent's feature"));
            }
        }
        if let Some(j) = leaves.iter().position(|&c| c > 1) {
            return invalid(format!("leaf {j} class {} is not 0 or 1", leaves[j]));
        }
        Ok(Self {
            depth,
            input_dim,
            nodes,
            leaves,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[u8] {
        &self.leaves
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), OracleError> {
        if x.len() != self.input_dim {
            return Err(OracleError::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !value.is_finite() {
                return Err(OracleError::NonFinite { index, value });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(OracleError::OutOfRange { index, value });
            }
        }
        Ok(())
    }

    /// Walks root to leaf. At each visited node `decide(position, holds)`
    /// returns the truth to record; that recorded truth picks the branch.
    /// Classification passes `holds` through unchanged.
    pub fn steer<E: From<OracleError>>(
        &self,
        x: &[f64],
        mut decide: impl FnMut(usize, bool) -> Result<bool, E>,
    ) -> Result<DecisionTrace, E> {
        self.check_input(x)?;
        let mut idx = 0;
        let mut decisions = Vec::with_capacity(self.depth);
        for position in 0..self.depth {
            let node = &self.nodes[idx];
            let truth = decide(position, node.holds(x))?;
            decisions.push(PartialDecision::Comparison {
                predicate: node.predicate_text(x),
                truth,
            });
            idx = 2 * idx + if truth { 1 } else { 2 };
        }
        let leaf = idx - self.nodes.len();
        Ok(DecisionTrace {
            domain: Domain::Tree,
            decisions,
            final_class: self.leaves[leaf],
        })
    }
}

pub fn classify_tree(model: &DecisionTreeModel, x: &[f64]) -> Result<DecisionTrace, OracleError> {
    model.steer::<OracleError>(x, |_, holds| Ok(holds))
}

/// Evaluates a rendered predicate such as `0.923 < 0.3562`.
pub fn eval_predicate_text(text: &str) -> Option<bool> {
    let mut parts = text.split(' ');
    let lhs = parse_numeral(parts.next()?)?;
    let op = parts.next()?;
    let rhs = parse_numeral(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    match op {
        "<" => Some(lhs < rhs),
        ">" => Some(lhs > rhs),
        _ => None,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    depth: usize,
    input_dim: usize,
    root: NodeDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeDoc {
    Split {
        feature: usize,
        threshold: f64,
        sign: i8,
        left: Box<NodeDoc>,
        right: Box<NodeDoc>,
    },
    Leaf {
        class: u8,
    },
}

impl TryFrom<TreeDoc> for DecisionTreeModel {
    type Error = OracleError;

    fn try_from(doc: TreeDoc) -> Result<Self, Self::Error> {
        if doc.depth == 0 || doc.depth > MAX_TREE_DEPTH {
            return Err(OracleError::InvalidModel(format!("depth {} out of range", doc.depth)));
        }
        let internal = (1usize << doc.depth) - 1;
        let mut nodes = vec![None; internal];
        let mut leaves = vec![None; internal + 1];
        fill(&doc.root, 0, 0, doc.depth, &mut nodes, &mut leaves)?;
        let nodes = nodes.into_iter().collect::<Option<Vec<_>>>();
        let leaves = leaves.into_iter().collect::<Option<Vec<_>>>();
        match (nodes, leaves) {
            (Some(n), Some(l)) => DecisionTreeModel::new(doc.depth, doc.input_dim, n, l),
            _ => Err(OracleError::InvalidModel("tree is not complete".into())),
        }
    }
}

fn fill(
    node: &NodeDoc,
    idx: usize,
    level: usize,
    depth: usize,
    nodes: &mut [Option<TreeNode>],
    leaves: &mut [Option<u8>],
) -> Result<(), OracleError> {
    match node {
        NodeDoc::Split {
            feature,
            threshold,
            sign,
            left,
            right,
        } if level < depth => {
            nodes[idx] = Some(TreeNode {
                feature: *feature,
                threshold: *threshold,
                sign: *sign,
            });
            fill(left, 2 * idx + 1, level + 1, depth, nodes, leaves)?;
            fill(right, 2 * idx + 2, level + 1, depth, nodes, leaves)
        }
        NodeDoc::Leaf { class } if level == depth => {
            leaves[idx - nodes.len()] = Some(*class);
            Ok(())
        }
        _ => Err(OracleError::InvalidModel(format!(
            "tree is not complete at level {level} (declared depth {depth})"
        ))),
    }
}

impl From<DecisionTreeModel> for TreeDoc {
    fn from(m: DecisionTreeModel) -> Self {
        fn build(m: &DecisionTreeModel, idx: usize) -> NodeDoc {
            if idx >= m.nodes.len() {
                return NodeDoc::Leaf {
                    class: m.leaves[idx - m.nodes.len()],
                };
            }
            let n = m.nodes[idx];
            NodeDoc::Split {
                feature: n.feature,
                threshold: n.threshold,
                sign: n.sign,
                left: Box::new(build(m, 2 * idx + 1)),
                right: Box::new(build(m, 2 * idx + 2)),
            }
        }
        TreeDoc {
            depth: m.depth,
            input_dim: m.input_dim,
            root: build(&m, 0),
        }
    }
}
