//! Classifies one input per domain and prints the three oracle texts.

use ccot::codec::question::render_question;
use ccot::codec::{encode, SequenceKind};
use ccot::datagen::{gen_classifier, gen_input, DatasetConfig};
use ccot::oracle::{classify, AgeBracket, ClassifierInput, DtiBand, LoanRecord};
use ccot::seed::rng_for;
use ccot::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for domain in Domain::ALL {
        let config = DatasetConfig::new(domain);
        let spec = gen_classifier(&config, 1)?;
        let input = match domain {
            Domain::NlTree => ClassifierInput::Loan(LoanRecord {
                loan_amount: 115000.0,
                loan_to_value_ratio: 92.266,
                debt_to_income_ratio: DtiBand::new("<20%")?,
                applicant_age: AgeBracket::new("25-34")?,
                loan_term: 120.0,
                income: 83000.0,
                property_value: 475000.0,
                total_loan_costs: 0.0,
            }),
            _ => gen_input(&spec, &mut rng_for(1, &[42])),
        };
        let trace = classify(&spec, &input)?;
        println!("== {domain}");
        println!("{}", render_question(&input));
        for kind in SequenceKind::ALL {
            println!("-- {kind}\n{}", encode(&trace, kind)?);
        }
        println!();
    }
    Ok(())
}
