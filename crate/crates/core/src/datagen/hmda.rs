use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::DatagenError;
use crate::oracle::{AgeBracket, DtiBand, LoanField, LoanRecord};

/// Result of reading an HMDA-style CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IngestReport {
    pub records: Vec<LoanRecord>,
    /// Rows dropped for a missing or invalid mapped field.
    pub dropped: usize,
    pub warnings: Vec<String>,
}

/// Reads loan records from `path`. `column_map` names the source column of
/// every loan field; `income_scale` multiplies the income column.
pub fn ingest_hmda(
    path: &Path,
    column_map: &BTreeMap<LoanField, String>,
    income_scale: f64,
) -> Result<IngestReport, DatagenError> {
    let read_err = |message: String| DatagenError::Read {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| read_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| read_err(e.to_string()))?.clone();

    let mut columns = BTreeMap::new();
    let mut absent = Vec::new();
    for field in LoanField::ALL {
        let Some(name) = column_map.get(&field) else {
            absent.push(format!("{field} (unmapped)"));
            continue;
        };
        match headers.iter().position(|h| h.trim() == name) {
            Some(i) => {
                columns.insert(field, i);
            }
            None => absent.push(format!("{name:?} for {field}")),
        }
    }
    if !absent.is_empty() {
        return Err(DatagenError::MissingColumns(absent.join(", ")));
    }

    let mut records = Vec::new();
    let mut dropped = 0;
    let mut warnings = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let parsed = row
            .map_err(|e| e.to_string())
            .and_then(|row| record_from_row(&row, &columns, income_scale));
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => {
                dropped += 1;
                if warnings.len() < 20 {
                    warnings.push(format!("row {} dropped: {e}", i + 2));
                }
            }
        }
    }
    if records.is_empty() {
        warnings.push(format!("{} yielded no usable records", path.display()));
    }
    Ok(IngestReport {
        records,
        dropped,
        warnings,
    })
}

fn record_from_row(
    row: &csv::StringRecord,
    columns: &BTreeMap<LoanField, usize>,
    income_scale: f64,
) -> Result<LoanRecord, String> {
    let cell = |f: LoanField| -> Result<&str, String> {
        row.get(columns[&f])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("{f} is missing"))
    };
    let num = |f: LoanField| -> Result<f64, String> {
        let s = cell(f)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{f} = {s:?} is not a number"))
    };
    let record = LoanRecord {
        loan_amount: num(LoanField::LoanAmount)?,
        loan_to_value_ratio: num(LoanField::LoanToValueRatio)?,
        debt_to_income_ratio: DtiBand::new(cell(LoanField::DebtToIncomeRatio)?).map_err(|e| e.to_string())?,
        applicant_age: AgeBracket::new(cell(LoanField::ApplicantAge)?).map_err(|e| e.to_string())?,
        loan_term: num(LoanField::LoanTerm)?,
        income: num(LoanField::Income)? * income_scale,
        property_value: num(LoanField::PropertyValue)?,
        total_loan_costs: num(LoanField::TotalLoanCosts)?,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}
