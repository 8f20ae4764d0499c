//! Comparison baseline: one gain-ratio classification tree per attribute.
//!
//! Tree `t` predicts attribute `t` from all the others (multiway nominal
//! splits, no pruning). During an assessment, attributes are asked in a fixed
//! order; any unresolved attribute whose tree reaches a leaf using only known
//! values is filled in from that leaf instead of being asked.

use serde::{Deserialize, Serialize};

use crate::dataset::{schema_fingerprint, Dataset, SchemaDigest};
use crate::error::{ModelError, SessionError};
use crate::session::SessionResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassTree {
    Leaf {
        class: usize,
        support: usize,
    },
    Split {
        feature: usize,
        /// One subtree per feature value.
        children: Vec<ClassTree>,
        majority: usize,
        support: usize,
    },
}

impl ClassTree {
    /// Follows known feature values to a leaf. `None` when the path needs a
    /// value that is not known yet (or is outside the tree's domain).
    pub fn decide(&self, known: &[Option<usize>]) -> Option<usize> {
        let mut node = self;
        loop {
            match node {
                ClassTree::Leaf { class, .. } => return Some(*class),
                ClassTree::Split { feature, children, .. } => {
                    node = children.get(known.get(*feature).copied().flatten()?)?;
                }
            }
        }
    }

    /// Prediction with every feature known.
    pub fn classify(&self, row: &[usize]) -> Option<usize> {
        let known: Vec<Option<usize>> = row.iter().copied().map(Some).collect();
        self.decide(&known)
    }

    pub fn features_on_paths(&self) -> Vec<Vec<usize>> {
        fn walk(node: &ClassTree, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match node {
                ClassTree::Leaf { .. } => out.push(prefix.clone()),
                ClassTree::Split { feature, children, .. } => {
                    prefix.push(*feature);
                    for c in children {
                        walk(c, prefix, out);
                    }
                    prefix.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }
}

fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

fn class_counts(ds: &Dataset, rows: &[usize], target: usize) -> Vec<usize> {
    let mut counts = vec![0; ds.domain_size(target)];
    for &r in rows {
        counts[ds.value(r, target)] += 1;
    }
    counts
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Gain ratio of splitting `rows` on `feature` when predicting `target`.
/// `None` when the feature takes a single value on these rows.
pub fn gain_ratio(ds: &Dataset, rows: &[usize], feature: usize, target: usize) -> Option<f64> {
    let nt = ds.domain_size(target);
    let mut joint = vec![0usize; ds.domain_size(feature) * nt];
    for &r in rows {
        joint[ds.value(r, feature) * nt + ds.value(r, target)] += 1;
    }
    let sizes: Vec<usize> = joint.chunks_exact(nt).map(|c| c.iter().sum()).collect();
    let split_info = entropy(&sizes);
    if split_info <= 0.0 {
        return None;
    }
    let total = rows.len() as f64;
    let conditional: f64 = joint
        .chunks_exact(nt)
        .zip(&sizes)
        .filter(|(_, &s)| s > 0)
        .map(|(c, &s)| s as f64 / total * entropy(c))
        .sum();
    let gain = entropy(&class_counts(ds, rows, target)) - conditional;
    Some(gain / split_info)
}

fn grow(ds: &Dataset, rows: &[usize], target: usize, features: &[usize]) -> ClassTree {
    let counts = class_counts(ds, rows, target);
    let majority = majority(&counts);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let mut best: Option<(usize, f64)> = None;
    if !pure {
        for &f in features {
            if let Some(gr) = gain_ratio(ds, rows, f, target) {
                if best.is_none_or(|(_, b)| gr > b) {
                    best = Some((f, gr));
                }
            }
        }
    }
    let Some((feature, _)) = best else {
        return ClassTree::Leaf {
            class: majority,
            support: rows.len(),
        };
    };
    let rest: Vec<usize> = features.iter().copied().filter(|&f| f != feature).collect();
    let children = (0..ds.domain_size(feature))
        .map(|v| {
            let sub: Vec<usize> = rows.iter().copied().filter(|&r| ds.value(r, feature) == v).collect();
            if sub.is_empty() {
                ClassTree::Leaf {
                    class: majority,
                    support: 0,
                }
            } else {
                grow(ds, &sub, target, &rest)
            }
        })
        .collect();
    ClassTree::Split {
        feature,
        children,
        majority,
        support: rows.len(),
    }
}

/// Grows the tree for one target attribute over all other attributes.
pub fn build_tree(ds: &Dataset, target: usize) -> ClassTree {
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let features: Vec<usize> = (0..ds.n_attributes()).filter(|&f| f != target).collect();
    grow(ds, &rows, target, &features)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineForest {
    pub trees: Vec<ClassTree>,
    pub schema_digest: SchemaDigest,
}

impl BaselineForest {
    pub fn build(ds: &Dataset) -> Result<Self, ModelError> {
        let n = ds.n_attributes();
        if n < 2 {
            return Err(ModelError::TooFewAttributes(n));
        }
        if ds.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        Ok(Self {
            trees: (0..n).map(|t| build_tree(ds, t)).collect(),
            schema_digest: schema_fingerprint(ds),
        })
    }

    pub fn n_attributes(&self) -> usize {
        self.trees.len()
    }

    /// Asks attributes in `ask_order`. The first is always asked; before
    /// every later question, each unresolved attribute whose tree is
    /// decidable from the values known so far (answers and earlier
    /// predictions) is predicted with confidence 1.
    pub fn simulate_assessment(&self, answers: &[usize], ask_order: &[usize]) -> Result<SessionResult, SessionError> {
        let n = self.n_attributes();
        if answers.len() != n {
            return Err(SessionError::RowLength {
                expected: n,
                found: answers.len(),
            });
        }
        let mut seen = vec![false; n];
        for &a in ask_order {
            if a >= n || std::mem::replace(&mut seen[a], true) {
                return Err(SessionError::UnknownAttribute(a));
            }
        }
        if ask_order.len() != n {
            return Err(SessionError::RowLength {
                expected: n,
                found: ask_order.len(),
            });
        }

        let mut known: Vec<Option<usize>> = vec![None; n];
        let mut indicators = vec![false; n];
        let mut visit_order = Vec::with_capacity(n);
        for (step, &next) in ask_order.iter().enumerate() {
            if step > 0 {
                loop {
                    let mut changed = false;
                    for a in 0..n {
                        if known[a].is_none() {
                            if let Some(v) = self.trees[a].decide(&known) {
                                known[a] = Some(v);
                                indicators[a] = true;
                                visit_order.push(a + 1);
                                changed = true;
                            }
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
            if known[next].is_none() {
                known[next] = Some(answers[next]);
                visit_order.push(next + 1);
            }
        }
        Ok(SessionResult {
            final_values: known.into_iter().map(|v| v.expect("every attribute asked or predicted")).collect(),
            indicators,
            confidences: vec![1.0; n],
            visit_order,
            corrections: Vec::new(),
        })
    }

    /// Schema order, the default ask order.
    pub fn default_order(&self) -> Vec<usize> {
        (0..self.n_attributes()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{worked_example_test, worked_example_train};

    #[test]
    fn communication_tree_replays_training_rows() {
        let ds = worked_example_train();
        let tree = build_tree(&ds, 4);
        for row in ds.rows() {
            assert_eq!(tree.classify(row), Some(row[4]));
        }
    }

    #[test]
    fn constant_target_gives_single_leaf() {
        let ds = Dataset::from_indices(&["a", "b"], &[2, 2], vec![vec![0, 1], vec![1, 1]]).unwrap();
        assert_eq!(build_tree(&ds, 1), ClassTree::Leaf { class: 1, support: 2 });
    }

    #[test]
    fn two_attribute_trees_have_one_split_at_most() {
        let ds = Dataset::from_indices(&["a", "b"], &[2, 3], vec![vec![0, 1], vec![1, 2], vec![1, 0]]).unwrap();
        let forest = BaselineForest::build(&ds).unwrap();
        for (t, tree) in forest.trees.iter().enumerate() {
            for path in tree.features_on_paths() {
                assert!(path.len() <= 1);
                assert!(!path.contains(&t));
            }
        }
    }

    #[test]
    fn trees_never_test_their_target() {
        let forest = BaselineForest::build(&worked_example_train()).unwrap();
        assert_eq!(forest.trees.len(), 5);
        for (t, tree) in forest.trees.iter().enumerate() {
            for path in tree.features_on_paths() {
                assert!(!path.contains(&t));
                let mut dedup = path.clone();
                dedup.sort();
                dedup.dedup();
                assert_eq!(dedup.len(), path.len());
            }
        }
    }

    #[test]
    fn root_split_maximizes_gain_ratio() {
        let ds = worked_example_train();
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        for target in 0..5 {
            if let ClassTree::Split { feature, .. } = build_tree(&ds, target) {
                let chosen = gain_ratio(&ds, &rows, feature, target).unwrap();
                for f in (0..5).filter(|&f| f != target) {
                    if let Some(gr) = gain_ratio(&ds, &rows, f, target) {
                        assert!(chosen >= gr);
                    }
                }
            }
        }
    }

    #[test]
    fn example_row_two_trace() {
        let ds = worked_example_train();
        let forest = BaselineForest::build(&ds).unwrap();
        let test = worked_example_test();
        let r = forest.simulate_assessment(test.row(1), &forest.default_order()).unwrap();
        assert_eq!(r.final_values.len(), 5);
        assert!(!r.indicators[0]);
        for (j, (&ind, &v)) in r.indicators.iter().zip(&r.final_values).enumerate() {
            if !ind {
                assert_eq!(v, test.value(1, j));
            }
        }
        let mut order = r.visit_order.clone();
        order.sort();
        assert_eq!(order, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_leaf_forest_predicts_all_but_first() {
        let ds = Dataset::from_indices(&["a", "b", "c"], &[2, 2, 2], vec![vec![1, 0, 1], vec![1, 0, 1]]).unwrap();
        let forest = BaselineForest::build(&ds).unwrap();
        let r = forest.simulate_assessment(&[0, 1, 0], &[0, 1, 2]).unwrap();
        assert_eq!(r.indicators, vec![false, true, true]);
        assert_eq!(r.final_values, vec![0, 0, 1]);
    }

    #[test]
    fn undecidable_forest_asks_everything() {
        // each tree only knows value 0 of its feature; the respondent answers 1
        let tree = |feature| ClassTree::Split {
            feature,
            children: vec![ClassTree::Leaf { class: 0, support: 1 }],
            majority: 0,
            support: 1,
        };
        let forest = BaselineForest {
            trees: vec![tree(1), tree(2), tree(0)],
            schema_digest: SchemaDigest(String::new()),
        };
        let r = forest.simulate_assessment(&[1, 1, 1], &[0, 1, 2]).unwrap();
        assert_eq!(r.indicators, vec![false, false, false]);
        assert_eq!(r.final_values, vec![1, 1, 1]);
    }

    #[test]
    fn unseen_value_is_undecidable() {
        let tree = ClassTree::Split {
            feature: 0,
            children: vec![ClassTree::Leaf { class: 1, support: 1 }],
            majority: 1,
            support: 1,
        };
        assert_eq!(tree.decide(&[Some(3), None]), None);
        assert_eq!(tree.decide(&[Some(0), None]), Some(1));
    }

    #[test]
    fn bad_order_rejected() {
        let forest = BaselineForest::build(&worked_example_train()).unwrap();
        let row = worked_example_test().row(0).to_vec();
        assert!(forest.simulate_assessment(&row, &[0, 0, 1, 2, 3]).is_err());
        assert!(forest.simulate_assessment(&row, &[0, 1]).is_err());
    }
}
