//! Reads the bundled HMDA sample and classifies each kept record with the
//! reference mortgage policy.

use std::collections::BTreeMap;
use std::path::Path;

use ccot::codec::{encode, SequenceKind};
use ccot::datagen::ingest_hmda;
use ccot::oracle::{classify, ClassifierInput, ClassifierSpec, LoanField, MortgagePolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hmda_sample.csv");
    let columns: BTreeMap<LoanField, String> = LoanField::ALL
        .iter()
        .map(|f| {
            let name = match f {
                LoanField::LoanToValueRatio => "combined_loan_to_value_ratio",
                other => other.as_str(),
            };
            (*f, name.to_string())
        })
        .collect();
    let report = ingest_hmda(&path, &columns, 1000.0)?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    let spec = ClassifierSpec::NlTree(MortgagePolicy::reference());
    for record in report.records {
        let trace = classify(&spec, &ClassifierInput::Loan(record))?;
        println!(
            "{:<28} {}",
            encode(&trace, SequenceKind::Answer)?,
            encode(&trace, SequenceKind::Reasoning)?
        );
    }
    Ok(())
}
