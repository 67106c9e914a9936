use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DatagenError, DatasetConfig};
use crate::oracle::{
    AgeBracket, ClassifierInput, ClassifierSpec, DecisionTreeModel, DtiBand, LogRegModel, LoanRecord, MortgagePolicy,
    TreeNode, AGE_BRACKETS, DTI_BANDS,
};
use crate::seed::{rng_for, stream};
use crate::Domain;

const LOAN_TERMS: [f64; 4] = [120.0, 180.0, 240.0, 360.0];

/// Draws a classifier for `config.domain`. The mortgage policy is fixed.
pub fn gen_classifier(config: &DatasetConfig, seed: u64) -> Result<ClassifierSpec, DatagenError> {
    config.validate()?;
    let mut rng = rng_for(seed, &[stream::CLASSIFIER]);
    Ok(match config.domain {
        Domain::LogReg => {
            let weights = (0..config.input_dim()).map(|_| rng.gen_range(-10.0..=10.0)).collect();
            ClassifierSpec::LogReg(LogRegModel::new(weights)?)
        }
        Domain::Tree => ClassifierSpec::Tree(gen_tree(&mut rng, config.depth, config.input_dim())?),
        Domain::NlTree => ClassifierSpec::NlTree(MortgagePolicy::reference()),
    })
}

/// A complete tree with thresholds on a 1e-4 grid strictly inside (0, 1),
/// fair signs and leaves, and each feature drawn from those unlike the
/// parent's.
pub fn gen_tree(rng: &mut ChaCha8Rng, depth: usize, input_dim: usize) -> Result<DecisionTreeModel, DatagenError> {
    let internal = (1usize << depth) - 1;
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(internal);
    for i in 0..internal {
        let feature = if i == 0 {
            rng.gen_range(0..input_dim)
        } else {
            let parent = nodes[(i - 1) / 2].feature;
            let f = rng.gen_range(0..input_dim - 1);
            if f >= parent {
                f + 1
            } else {
                f
            }
        };
        let threshold = f64::from(rng.gen_range(1..=9999u32)) / 10000.0;
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        nodes.push(TreeNode {
            feature,
            threshold,
            sign,
        });
    }
    let leaves = (0..=internal).map(|_| u8::from(rng.gen_bool(0.5))).collect();
    Ok(DecisionTreeModel::new(depth, input_dim, nodes, leaves)?)
}

/// Draws one input for `spec` from `rng`. Vector coordinates lie on a 1e-4
/// grid so the question text carries them exactly.
pub fn gen_input(spec: &ClassifierSpec, rng: &mut ChaCha8Rng) -> ClassifierInput {
    match spec {
        ClassifierSpec::LogReg(m) => ClassifierInput::Vector(
            (0..m.input_dim())
                .map(|_| f64::from(rng.gen_range(-10000..=10000i32)) / 10000.0)
                .collect(),
        ),
        ClassifierSpec::Tree(m) => ClassifierInput::Vector(
            (0..m.input_dim())
                .map(|_| f64::from(rng.gen_range(0..=10000u32)) / 10000.0)
                .collect(),
        ),
        ClassifierSpec::NlTree(_) => ClassifierInput::Loan(gen_loan(rng)),
    }
}

/// A synthetic loan record; see the README for the sampling ranges.
pub fn gen_loan(rng: &mut ChaCha8Rng) -> LoanRecord {
    let thousands = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| f64::from(rng.gen_range(lo..=hi)) * 1000.0;
    let loan_amount = 5000.0 + 10.0 * thousands(rng, 1, 99);
    let loan_to_value_ratio = f64::from(rng.gen_range(20_000..=110_000u32)) / 1000.0;
    let debt_to_income_ratio = DtiBand::new(DTI_BANDS.choose(rng).expect("non-empty")).expect("vocabulary");
    let applicant_age = AgeBracket::new(AGE_BRACKETS.choose(rng).expect("non-empty")).expect("vocabulary");
    let loan_term = *LOAN_TERMS.choose(rng).expect("non-empty");
    let income = thousands(rng, 10, 300);
    let property_value = 5000.0 + 10.0 * thousands(rng, 2, 150);
    let total_loan_costs = if rng.gen_bool(0.2) {
        0.0
    } else {
        f64::from(rng.gen_range(0..=1_500_000u32)) / 100.0
    };
    LoanRecord {
        loan_amount,
        loan_to_value_ratio,
        debt_to_income_ratio,
        applicant_age,
        loan_term,
        income,
        property_value,
        total_loan_costs,
    }
}

/// Ingested loan records, drawn without replacement in a seeded order.
#[derive(Clone, Debug)]
pub struct RecordPool {
    order: Vec<usize>,
    records: Vec<LoanRecord>,
    next: usize,
}

impl RecordPool {
    pub fn new(records: Vec<LoanRecord>, seed: u64) -> Result<Self, DatagenError> {
        if records.is_empty() {
            return Err(DatagenError::Pool("the ingested pool is empty".into()));
        }
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rng_for(seed, &[stream::POOL]));
        Ok(Self {
            order,
            records,
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.next
    }

    pub fn draw(&mut self) -> Result<LoanRecord, DatagenError> {
        let i = *self.order.get(self.next).ok_or_else(|| {
            DatagenError::Pool(format!("exhausted after {} draws", self.records.len()))
        })?;
        self.next += 1;
        Ok(self.records[i].clone())
    }
}
