//! Influence-based split criterion.
//!
//! For a conditioning attribute `A` and a target `B` over a (filtered)
//! sub-dataset, the influence of `A` on `B` is the marginal-weighted expected
//! purity `Σ_v P(A=v) · Σ_w P(B=w | A=v)²`. The total influence of `A` sums
//! those pair influences over the other candidates (squared or as-is,
//! depending on [`AggregationMode`]), and the split attribute is the argmax.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::InfluenceError;

/// A view of some rows of a dataset: the sub-dataset reached by fixing the
/// values along a tree path.
#[derive(Debug, Clone)]
pub struct DataSlice<'a> {
    dataset: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> DataSlice<'a> {
    pub fn full(dataset: &'a Dataset) -> Self {
        Self {
            dataset,
            rows: (0..dataset.n_rows()).collect(),
        }
    }

    pub fn from_rows(dataset: &'a Dataset, rows: Vec<usize>) -> Self {
        Self { dataset, rows }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows of this slice where `attribute == value`.
    pub fn filter(&self, attribute: usize, value: usize) -> DataSlice<'a> {
        let rows = self
            .rows
            .iter()
            .copied()
            .filter(|&r| self.dataset.value(r, attribute) == value)
            .collect();
        DataSlice {
            dataset: self.dataset,
            rows,
        }
    }

    /// Per-value row counts of one attribute.
    pub fn value_counts(&self, attribute: usize) -> Vec<usize> {
        let mut counts = vec![0; self.dataset.domain_size(attribute)];
        for &r in &self.rows {
            counts[self.dataset.value(r, attribute)] += 1;
        }
        counts
    }

    /// Joint counts `[a_value][b_value]`, flattened row-major.
    fn contingency(&self, a: usize, b: usize) -> Vec<usize> {
        let nb = self.dataset.domain_size(b);
        let mut counts = vec![0; self.dataset.domain_size(a) * nb];
        for &r in &self.rows {
            counts[self.dataset.value(r, a) * nb + self.dataset.value(r, b)] += 1;
        }
        counts
    }
}

/// Distribution of one attribute's values among the rows of a slice that
/// satisfy some condition. `support_count == 0` marks an empty condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    pub target_attribute: usize,
    pub probabilities: Vec<f64>,
    pub support_count: usize,
}

impl ConditionalDistribution {
    pub fn from_counts(target_attribute: usize, counts: &[usize]) -> Self {
        let support: usize = counts.iter().sum();
        let probabilities = if support == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / support as f64).collect()
        };
        Self {
            target_attribute,
            probabilities,
            support_count: support,
        }
    }

    pub fn empty(target_attribute: usize, domain_size: usize) -> Self {
        Self::from_counts(target_attribute, &vec![0; domain_size])
    }

    pub fn has_support(&self) -> bool {
        self.support_count > 0
    }

    /// Most likely value and its probability; lowest value index on ties.
    /// `None` without support.
    pub fn mode(&self) -> Option<(usize, f64)> {
        if !self.has_support() {
            return None;
        }
        let mut best = (0, self.probabilities[0]);
        for (v, &p) in self.probabilities.iter().enumerate().skip(1) {
            if p > best.1 {
                best = (v, p);
            }
        }
        Some(best)
    }
}

/// How pair influences are combined into an attribute's total influence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    /// Sum of squared pair influences.
    #[default]
    Squared,
    /// Plain sum of pair influences.
    Linear,
}

impl AggregationMode {
    fn combine(self, pair_influence: f64) -> f64 {
        match self {
            AggregationMode::Squared => pair_influence * pair_influence,
            AggregationMode::Linear => pair_influence,
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared" => Ok(Self::Squared),
            "linear" => Ok(Self::Linear),
            other => Err(format!("unknown aggregation mode `{other}` (expected squared|linear)")),
        }
    }
}

impl std::fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AggregationMode::Squared => "squared",
            AggregationMode::Linear => "linear",
        })
    }
}

/// Loop counters matching the split search's nested loops: one
/// `pair_evals` tick per ordered attribute pair, and `N_a · N_b` innermost
/// probability evaluations per pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub innermost_prob_evals: u64,
    pub pair_evals: u64,
}

impl OpCounter {
    pub fn merge(&mut self, other: OpCounter) {
        self.innermost_prob_evals += other.innermost_prob_evals;
        self.pair_evals += other.pair_evals;
    }
}

/// `Σ_{a≠b} N_a · N_b` over the given domain sizes.
pub fn expected_innermost_evals(domain_sizes: &[usize]) -> u64 {
    let total: u64 = domain_sizes.iter().map(|&n| n as u64).sum();
    let squares: u64 = domain_sizes.iter().map(|&n| (n as u64) * (n as u64)).sum();
    total * total - squares
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub attribute: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    /// Total influence per candidate, in candidate order.
    pub per_attribute: Vec<AttributeScore>,
    pub best: usize,
    pub aggregation_mode: AggregationMode,
}

impl InfluenceTable {
    pub fn score(&self, attribute: usize) -> Option<f64> {
        self.per_attribute
            .iter()
            .find(|s| s.attribute == attribute)
            .map(|s| s.score)
    }

    /// Candidates other than `best`, by descending score then index.
    pub fn ranked_remaining(&self) -> Vec<usize> {
        let mut rest: Vec<AttributeScore> = self
            .per_attribute
            .iter()
            .copied()
            .filter(|s| s.attribute != self.best)
            .collect();
        rest.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.attribute.cmp(&b.attribute))
        });
        rest.into_iter().map(|s| s.attribute).collect()
    }
}

/// Winner of a split search plus the per-branch distributions over every
/// other candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub table: InfluenceTable,
    /// Indexed by the winner's value; keyed by remaining candidate.
    pub branch_predictions: Vec<BTreeMap<usize, ConditionalDistribution>>,
}

impl Split {
    pub fn best(&self) -> usize {
        self.table.best
    }
}

pub fn conditional_confidence(
    slice: &DataSlice<'_>,
    cond_attr: usize,
    cond_value: usize,
    target_attr: usize,
) -> Result<ConditionalDistribution, InfluenceError> {
    if cond_attr == target_attr {
        return Err(InfluenceError::SameAttribute(cond_attr));
    }
    let ds = slice.dataset();
    let mut counts = vec![0; ds.domain_size(target_attr)];
    for &r in slice.rows() {
        if ds.value(r, cond_attr) == cond_value {
            counts[ds.value(r, target_attr)] += 1;
        }
    }
    Ok(ConditionalDistribution::from_counts(target_attr, &counts))
}

/// `Σ_w p_w²`, the purity of a distribution.
pub fn value_influence(dist: &ConditionalDistribution) -> Result<f64, InfluenceError> {
    if !dist.has_support() {
        return Err(InfluenceError::EmptySupport(dist.target_attribute));
    }
    Ok(dist.probabilities.iter().map(|p| p * p).sum())
}

/// Pair influence from a flattened contingency table with `nb` target
/// columns. Conditioning values without rows contribute nothing.
fn pair_influence_from_counts(counts: &[usize], nb: usize, total: usize) -> f64 {
    counts
        .chunks_exact(nb)
        .filter_map(|row| {
            let n_v: usize = row.iter().sum();
            (n_v > 0).then(|| {
                let purity: f64 = row
                    .iter()
                    .map(|&c| {
                        let p = c as f64 / n_v as f64;
                        p * p
                    })
                    .sum();
                n_v as f64 / total as f64 * purity
            })
        })
        .sum()
}

pub fn attribute_pair_influence(
    slice: &DataSlice<'_>,
    cond_attr: usize,
    target_attr: usize,
) -> Result<f64, InfluenceError> {
    if cond_attr == target_attr {
        return Err(InfluenceError::SameAttribute(cond_attr));
    }
    if slice.is_empty() {
        return Err(InfluenceError::EmptySlice);
    }
    let counts = slice.contingency(cond_attr, target_attr);
    Ok(pair_influence_from_counts(
        &counts,
        slice.dataset().domain_size(target_attr),
        slice.len(),
    ))
}

pub fn attribute_total_influence(
    slice: &DataSlice<'_>,
    cond_attr: usize,
    candidates: &[usize],
    mode: AggregationMode,
) -> Result<f64, InfluenceError> {
    if candidates.is_empty() {
        return Err(InfluenceError::NoCandidates);
    }
    if candidates.contains(&cond_attr) {
        return Err(InfluenceError::ConditionInCandidates(cond_attr));
    }
    if slice.is_empty() {
        return Err(InfluenceError::EmptySlice);
    }
    candidates.iter().try_fold(0.0, |acc, &target| {
        Ok(acc + mode.combine(attribute_pair_influence(slice, cond_attr, target)?))
    })
}

/// Picks the candidate with the largest total influence on the others
/// (lowest index on ties) and collects, for each of its values, the
/// conditional distribution of every remaining candidate.
pub fn best_split(
    slice: &DataSlice<'_>,
    candidates: &[usize],
    mode: AggregationMode,
    counter: &mut OpCounter,
) -> Result<Split, InfluenceError> {
    if candidates.is_empty() {
        return Err(InfluenceError::NoCandidates);
    }
    if slice.is_empty() {
        return Err(InfluenceError::EmptySlice);
    }
    let ds = slice.dataset();
    if let [only] = candidates {
        return Ok(Split {
            table: InfluenceTable {
                per_attribute: vec![AttributeScore {
                    attribute: *only,
                    score: 0.0,
                }],
                best: *only,
                aggregation_mode: mode,
            },
            branch_predictions: vec![BTreeMap::new(); ds.domain_size(*only)],
        });
    }

    let mut per_attribute = Vec::with_capacity(candidates.len());
    for &cond in candidates {
        let mut total = 0.0;
        for &target in candidates.iter().filter(|&&t| t != cond) {
            let nb = ds.domain_size(target);
            let counts = slice.contingency(cond, target);
            total += mode.combine(pair_influence_from_counts(&counts, nb, slice.len()));
            counter.pair_evals += 1;
            counter.innermost_prob_evals += (ds.domain_size(cond) * nb) as u64;
        }
        per_attribute.push(AttributeScore {
            attribute: cond,
            score: total,
        });
    }

    let mut best = per_attribute[0];
    for s in &per_attribute[1..] {
        if s.score > best.score || (s.score == best.score && s.attribute < best.attribute) {
            best = *s;
        }
    }

    let branch_predictions = (0..ds.domain_size(best.attribute))
        .map(|v| {
            let branch = slice.filter(best.attribute, v);
            candidates
                .iter()
                .filter(|&&t| t != best.attribute)
                .map(|&t| (t, ConditionalDistribution::from_counts(t, &branch.value_counts(t))))
                .collect()
        })
        .collect();

    Ok(Split {
        table: InfluenceTable {
            per_attribute,
            best: best.attribute,
            aggregation_mode: mode,
        },
        branch_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example_train;

    const TOL: f64 = 1e-12;

    #[test]
    fn income_given_education_zero() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds);
        let d = conditional_confidence(&slice, 0, 0, 1).unwrap();
        assert_eq!(d.probabilities, vec![0.0, 1.0, 0.0]);
        assert_eq!(d.support_count, 1);
        assert_eq!(value_influence(&d).unwrap(), 1.0);
    }

    #[test]
    fn income_given_education_one() {
        let ds = worked_example_train();
        let d = conditional_confidence(&DataSlice::full(&ds), 0, 1, 1).unwrap();
        assert!((d.probabilities[0] - 2.0 / 3.0).abs() < TOL);
        assert!((value_influence(&d).unwrap() - 5.0 / 9.0).abs() < TOL);
    }

    #[test]
    fn absent_condition_value_has_empty_support() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds).filter(1, 1); // single row U1
        let d = conditional_confidence(&slice, 0, 1, 2).unwrap();
        assert!(!d.has_support());
        assert_eq!(d.mode(), None);
        assert!(matches!(value_influence(&d), Err(InfluenceError::EmptySupport(2))));
    }

    #[test]
    fn single_row_slice_is_degenerate() {
        let ds = worked_example_train();
        let slice = DataSlice::from_rows(&ds, vec![1]);
        let d = conditional_confidence(&slice, 1, 2, 4).unwrap();
        assert_eq!(d.probabilities, vec![0.0, 1.0]);
        assert_eq!(d.mode(), Some((1, 1.0)));
    }

    #[test]
    fn same_attribute_rejected() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds);
        assert_eq!(
            conditional_confidence(&slice, 2, 0, 2),
            Err(InfluenceError::SameAttribute(2))
        );
        assert_eq!(
            attribute_pair_influence(&slice, 2, 2),
            Err(InfluenceError::SameAttribute(2))
        );
    }

    #[test]
    fn uniform_over_four_values() {
        let d = ConditionalDistribution::from_counts(0, &[3, 3, 3, 3]);
        assert!((value_influence(&d).unwrap() - 0.25).abs() < TOL);
    }

    #[test]
    fn pair_influences_of_education() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds);
        for target in 1..5 {
            let inf = attribute_pair_influence(&slice, 0, target).unwrap();
            assert!((inf - 2.0 / 3.0).abs() < TOL, "target {target}: {inf}");
        }
    }

    #[test]
    fn constant_condition_reduces_to_single_branch() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds).filter(1, 0); // U3, U4: Education fixed at 1
        let inf = attribute_pair_influence(&slice, 0, 3).unwrap();
        let d = conditional_confidence(&slice, 0, 1, 3).unwrap();
        assert!((inf - value_influence(&d).unwrap()).abs() < TOL);
    }

    #[test]
    fn empty_slice_rejected() {
        let ds = worked_example_train();
        let slice = DataSlice::from_rows(&ds, vec![]);
        assert_eq!(attribute_pair_influence(&slice, 0, 1), Err(InfluenceError::EmptySlice));
        assert_eq!(
            attribute_total_influence(&slice, 0, &[1], AggregationMode::Linear),
            Err(InfluenceError::EmptySlice)
        );
    }

    #[test]
    fn linear_totals_match_worked_example() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds);
        let expected = [8.0 / 3.0, 7.0 / 2.0, 11.0 / 4.0, 5.0 / 2.0, 5.0 / 2.0];
        for (a, want) in expected.iter().enumerate() {
            let others: Vec<usize> = (0..5).filter(|&j| j != a).collect();
            let got = attribute_total_influence(&slice, a, &others, AggregationMode::Linear).unwrap();
            assert!((got - want).abs() < TOL, "attribute {a}: {got} vs {want}");
        }
    }

    #[test]
    fn squared_total_of_income() {
        let ds = worked_example_train();
        let got = attribute_total_influence(&DataSlice::full(&ds), 1, &[0, 2, 3, 4], AggregationMode::Squared)
            .unwrap();
        assert!((got - 3.125).abs() < TOL);
    }

    #[test]
    fn total_influence_rejects_bad_candidates() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds);
        assert_eq!(
            attribute_total_influence(&slice, 0, &[], AggregationMode::Linear),
            Err(InfluenceError::NoCandidates)
        );
        assert_eq!(
            attribute_total_influence(&slice, 0, &[0, 1], AggregationMode::Linear),
            Err(InfluenceError::ConditionInCandidates(0))
        );
    }

    #[test]
    fn best_split_picks_income_in_both_modes() {
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds);
        for mode in [AggregationMode::Linear, AggregationMode::Squared] {
            let mut counter = OpCounter::default();
            let split = best_split(&slice, &[0, 1, 2, 3, 4], mode, &mut counter).unwrap();
            assert_eq!(split.best(), 1);
            assert_eq!(counter.innermost_prob_evals, 96);
            assert_eq!(counter.pair_evals, 20);
            assert_eq!(split.branch_predictions.len(), 3);
            // Income = 0 → rows U3, U4
            let work = &split.branch_predictions[0][&3];
            assert_eq!(work.probabilities, vec![0.5, 0.5]);
            assert_eq!(work.support_count, 2);
        }
    }

    #[test]
    fn singleton_candidate_returned_directly() {
        let ds = worked_example_train();
        let mut counter = OpCounter::default();
        let split = best_split(&DataSlice::full(&ds), &[0], AggregationMode::Linear, &mut counter).unwrap();
        assert_eq!(split.best(), 0);
        assert!(split.branch_predictions.iter().all(BTreeMap::is_empty));
        assert_eq!(counter, OpCounter::default());
    }

    #[test]
    fn ties_break_to_lowest_index() {
        // Work and Communication tie at 3 on the Income = 0 sub-dataset.
        let ds = worked_example_train();
        let slice = DataSlice::full(&ds).filter(1, 0);
        let split = best_split(&slice, &[0, 2, 3, 4], AggregationMode::Linear, &mut OpCounter::default()).unwrap();
        assert_eq!(split.table.score(3), split.table.score(4));
        assert_eq!(split.best(), 3);
        assert_eq!(split.table.ranked_remaining(), vec![4, 0, 2]);
    }

    #[test]
    fn expected_eval_formula() {
        assert_eq!(expected_innermost_evals(&[2, 3, 2, 2, 2]), 96);
        assert_eq!(expected_innermost_evals(&[4]), 0);
    }
}
