//! Accuracy, reduction and F-measure of a batch of interviews.
//!
//! For respondent `i`: `AR_i = Σ K·I / Σ I` (1 when nothing was predicted),
//! `RR_i = Σ I / n`, and `F_i = (β²+1)·AR·RR / (β²·AR + RR)` (0 when both
//! vanish). Aggregates are means; spreads are population standard deviations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::MetricsError;
use crate::session::SessionResult;

pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespondentScore {
    pub ar: f64,
    pub rr: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub beta: f64,
    /// `K`: 1 where the final value equals the true value.
    pub correctness: Vec<Vec<u8>>,
    pub per_respondent: Vec<RespondentScore>,
    pub aar: f64,
    pub sar: f64,
    pub arr: f64,
    pub srr: f64,
    pub af: f64,
    pub sf: f64,
}

/// Per-respondent F-measure.
pub fn f_beta(ar: f64, rr: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * ar + rr;
    if denom == 0.0 {
        0.0
    } else {
        (b2 + 1.0) * ar * rr / denom
    }
}

fn mean_and_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count();
    if count == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / count as f64;
    (mean, var.sqrt())
}

fn check_shapes(results: &[SessionResult], truth: &Dataset, beta: f64) -> Result<(), MetricsError> {
    if beta.is_nan() || beta <= 0.0 || beta.is_infinite() {
        return Err(MetricsError::InvalidBeta(beta));
    }
    if results.len() != truth.n_rows() {
        return Err(MetricsError::RowCount {
            results: results.len(),
            truth: truth.n_rows(),
        });
    }
    let n = truth.n_attributes();
    for (row, r) in results.iter().enumerate() {
        for found in [r.final_values.len(), r.indicators.len(), r.confidences.len()] {
            if found != n {
                return Err(MetricsError::Width { row, expected: n, found });
            }
        }
    }
    Ok(())
}

pub fn evaluate(results: &[SessionResult], truth: &Dataset, beta: f64) -> Result<EvaluationReport, MetricsError> {
    evaluate_counted(results, truth, beta).map(|(report, _)| report)
}

/// [`evaluate`] that also returns how many cells the correctness pass read.
pub fn evaluate_counted(
    results: &[SessionResult],
    truth: &Dataset,
    beta: f64,
) -> Result<(EvaluationReport, u64), MetricsError> {
    check_shapes(results, truth, beta)?;
    let n = truth.n_attributes();
    let mut cell_visits = 0u64;

    let mut correctness = Vec::with_capacity(results.len());
    for (i, result) in results.iter().enumerate() {
        let mut k_row = Vec::with_capacity(n);
        for j in 0..n {
            cell_visits += 1;
            k_row.push(u8::from(result.final_values[j] == truth.value(i, j)));
        }
        correctness.push(k_row);
    }

    let mut per_respondent = Vec::with_capacity(results.len());
    for (result, k_row) in results.iter().zip(&correctness) {
        let mut hits = 0usize;
        let mut predicted = 0usize;
        for (&k, &ind) in k_row.iter().zip(&result.indicators) {
            if ind {
                predicted += 1;
                hits += usize::from(k);
            }
        }
        let ar = if predicted == 0 { 1.0 } else { hits as f64 / predicted as f64 };
        let rr = predicted as f64 / n as f64;
        per_respondent.push(RespondentScore {
            ar,
            rr,
            f: f_beta(ar, rr, beta),
        });
    }

    let (aar, sar) = mean_and_sd(per_respondent.iter().map(|s| s.ar));
    let (arr, srr) = mean_and_sd(per_respondent.iter().map(|s| s.rr));
    let (af, sf) = mean_and_sd(per_respondent.iter().map(|s| s.f));
    Ok((
        EvaluationReport {
            beta,
            correctness,
            per_respondent,
            aar,
            sar,
            arr,
            srr,
            af,
            sf,
        },
        cell_visits,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub id: usize,
    pub ar: f64,
    pub rr: f64,
    pub f: f64,
}

/// One row per respondent, 1-based ids, for plotting or CSV export.
pub fn per_respondent_series(report: &EvaluationReport) -> Vec<SeriesRow> {
    report
        .per_respondent
        .iter()
        .enumerate()
        .map(|(i, s)| SeriesRow {
            id: i + 1,
            ar: s.ar,
            rr: s.rr,
            f: s.f,
        })
        .collect()
}

pub fn write_series_csv<W: Write>(report: &EvaluationReport, writer: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    for row in per_respondent_series(report) {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example_test;

    fn result(final_values: Vec<usize>, indicators: Vec<u8>) -> SessionResult {
        let n = final_values.len();
        SessionResult {
            final_values,
            indicators: indicators.into_iter().map(|i| i == 1).collect(),
            confidences: vec![1.0; n],
            visit_order: (1..=n).collect(),
            corrections: vec![],
        }
    }

    fn example_results() -> Vec<SessionResult> {
        vec![
            result(vec![0, 1, 0, 1, 1], vec![1, 0, 1, 1, 1]),
            result(vec![1, 0, 1, 1, 0], vec![1, 0, 1, 0, 1]),
        ]
    }

    #[test]
    fn worked_example_scores() {
        let (report, visits) = evaluate_counted(&example_results(), &worked_example_test(), 0.5).unwrap();
        assert_eq!(visits, 10);
        assert_eq!(report.correctness[0], vec![0, 1, 1, 1, 0]);
        assert_eq!(report.correctness[1], vec![1, 1, 1, 1, 1]);
        let s = &report.per_respondent;
        assert!((s[0].ar - 0.5).abs() < 1e-12 && (s[1].ar - 1.0).abs() < 1e-12);
        assert!((s[0].rr - 0.8).abs() < 1e-12 && (s[1].rr - 0.6).abs() < 1e-12);
        assert!((report.aar - 0.75).abs() < 1e-12);
        assert!((report.arr - 0.70).abs() < 1e-12);
        // F = 0.5/0.925 and 0.75/0.85
        let af = (0.5 / 0.925 + 0.75 / 0.85) / 2.0;
        assert!((report.af - af).abs() < 1e-12);
        assert!((report.af - 0.7114).abs() < 5e-5);
        assert!((report.sar - 0.25).abs() < 1e-12);
        assert!((report.srr - 0.1).abs() < 1e-12);
    }

    #[test]
    fn nothing_predicted_limits() {
        let truth = worked_example_test();
        let results: Vec<_> = truth
            .rows()
            .map(|r| result(r.to_vec(), vec![0; 5]))
            .collect();
        let report = evaluate(&results, &truth, 0.5).unwrap();
        assert_eq!((report.aar, report.arr, report.af), (1.0, 0.0, 0.0));
        assert_eq!((report.sar, report.srr, report.sf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_respondent_has_zero_spread() {
        let truth = worked_example_test().select_rows(&[0]);
        let report = evaluate(&example_results()[..1], &truth, 0.5).unwrap();
        assert_eq!(report.aar, report.per_respondent[0].ar);
        assert_eq!(report.af, report.per_respondent[0].f);
        assert_eq!((report.sar, report.srr, report.sf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_batch_gives_empty_series() {
        let truth = worked_example_test().select_rows(&[]);
        let report = evaluate(&[], &truth, 0.5).unwrap();
        assert!(per_respondent_series(&report).is_empty());
    }

    #[test]
    fn series_rows_align_with_respondents() {
        let report = evaluate(&example_results(), &worked_example_test(), 0.5).unwrap();
        let series = per_respondent_series(&report);
        assert_eq!(series.len(), 2);
        assert_eq!(series[1].id, 2);
        assert_eq!(series[1].rr, report.per_respondent[1].rr);
        let mut buf = Vec::new();
        write_series_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,ar,rr,f\n1,0.5,0.8,"));
    }

    #[test]
    fn bad_inputs_rejected() {
        let truth = worked_example_test();
        assert_eq!(
            evaluate(&example_results(), &truth, 0.0),
            Err(MetricsError::InvalidBeta(0.0))
        );
        assert!(matches!(
            evaluate(&example_results()[..1], &truth, 0.5),
            Err(MetricsError::RowCount { results: 1, truth: 2 })
        ));
        let mut short = example_results();
        short[1].indicators.pop();
        assert!(matches!(
            evaluate(&short, &truth, 0.5),
            Err(MetricsError::Width { row: 1, .. })
        ));
    }

    #[test]
    fn f_beta_properties() {
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
        assert!((f_beta(0.7, 0.7, 0.5) - 0.7).abs() < 1e-12);
        assert!(f_beta(0.9, 0.2, 2.0) <= 0.9);
    }
}
