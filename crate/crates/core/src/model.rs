//! The questionnaire tree and its builder.
//!
//! Each node asks one attribute. A branch per value of that attribute either
//! leads to a child subtree, together with the distributions of every
//! not-yet-asked attribute on the branch's sub-dataset, or, when the
//! sub-dataset is too thin, to a fallback order in which the remaining
//! attributes are simply asked.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{schema_digest, schema_fingerprint, validate_schema, AttributeSchema, Dataset, SchemaDigest};
use crate::error::ModelError;
use crate::influence::{best_split, AggregationMode, ConditionalDistribution, DataSlice, OpCounter};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub aggregation_mode: AggregationMode,
    /// Branches with fewer training rows than this get a fallback order
    /// instead of a subtree. Empty branches always do.
    pub min_support: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            aggregation_mode: AggregationMode::Squared,
            min_support: 1,
        }
    }
}

impl BuildConfig {
    pub fn linear() -> Self {
        Self {
            aggregation_mode: AggregationMode::Linear,
            ..Self::default()
        }
    }
}

/// JSON object keys are strings; inside a tagged enum serde cannot coerce
/// them back to integers on its own.
mod index_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Serialize, S: Serializer>(map: &BTreeMap<usize, T>, s: S) -> Result<S::Ok, S::Error> {
        map.serialize(s)
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, T>, D::Error> {
        BTreeMap::<String, T>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("expected a value index key, found {k:?}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Branch {
    Child {
        child: Box<FpqmNode>,
        /// Distribution of each remaining attribute on this branch's rows.
        #[serde(with = "index_keys")]
        predictions: BTreeMap<usize, ConditionalDistribution>,
        support: usize,
    },
    Fallback {
        fallback_order: Vec<usize>,
        support: usize,
    },
}

impl Branch {
    pub fn support(&self) -> usize {
        match self {
            Branch::Child { support, .. } | Branch::Fallback { support, .. } => *support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpqmNode {
    pub attribute: usize,
    /// Keyed by value index. Empty for a leaf.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", with = "index_keys")]
    pub branches: BTreeMap<usize, Branch>,
}

impl FpqmNode {
    pub fn leaf(attribute: usize) -> Self {
        Self {
            attribute,
            branches: BTreeMap::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branch(&self, value: usize) -> Option<&Branch> {
        self.branches.get(&value)
    }

    fn count_nodes(&self) -> usize {
        1 + self
            .branches
            .values()
            .map(|b| match b {
                Branch::Child { child, .. } => child.count_nodes(),
                Branch::Fallback { .. } => 0,
            })
            .sum::<usize>()
    }

    fn collect_paths(&self, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        prefix.push(self.attribute);
        if self.is_leaf() {
            out.push(prefix.clone());
        }
        for branch in self.branches.values() {
            match branch {
                Branch::Child { child, .. } => child.collect_paths(prefix, out),
                Branch::Fallback { fallback_order, .. } => {
                    let mut path = prefix.clone();
                    path.extend_from_slice(fallback_order);
                    out.push(path);
                }
            }
        }
        prefix.pop();
    }
}

/// A trained questionnaire model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FpqmModel {
    schema: Vec<AttributeSchema>,
    schema_digest: SchemaDigest,
    config: BuildConfig,
    root: FpqmNode,
    rule_count: usize,
    depth: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    schema_digest: SchemaDigest,
    schema: Vec<AttributeSchema>,
    config: BuildConfig,
    root: FpqmNode,
}

struct Builder {
    config: BuildConfig,
    counter: OpCounter,
    nodes: usize,
    node_budget: Option<usize>,
}

impl Builder {
    fn node(&mut self, slice: &DataSlice<'_>, remaining: &[usize]) -> Result<FpqmNode, ModelError> {
        self.nodes += 1;
        if let Some(budget) = self.node_budget {
            if self.nodes > budget {
                return Err(ModelError::NodeBudgetExceeded(budget));
            }
        }
        if let [last] = remaining {
            return Ok(FpqmNode::leaf(*last));
        }
        let split = best_split(slice, remaining, self.config.aggregation_mode, &mut self.counter)?;
        let chosen = split.best();
        let rest: Vec<usize> = remaining.iter().copied().filter(|&a| a != chosen).collect();
        let min_support = self.config.min_support.max(1);
        let mut branches = BTreeMap::new();
        for (value, predictions) in split.branch_predictions.into_iter().enumerate() {
            let sub = slice.filter(chosen, value);
            let branch = if sub.len() < min_support {
                Branch::Fallback {
                    fallback_order: split.table.ranked_remaining(),
                    support: sub.len(),
                }
            } else {
                Branch::Child {
                    child: Box::new(self.node(&sub, &rest)?),
                    predictions,
                    support: sub.len(),
                }
            };
            branches.insert(value, branch);
        }
        Ok(FpqmNode {
            attribute: chosen,
            branches,
        })
    }
}

/// Statistics gathered while building a model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub split_ops: OpCounter,
    pub nodes: usize,
}

impl FpqmModel {
    pub fn build(ds: &Dataset, config: BuildConfig) -> Result<Self, ModelError> {
        Self::build_with_stats(ds, config, None).map(|(m, _)| m)
    }

    /// Builds while counting split-search work; fails once more than
    /// `node_budget` nodes have been created.
    pub fn build_with_stats(
        ds: &Dataset,
        config: BuildConfig,
        node_budget: Option<usize>,
    ) -> Result<(Self, BuildStats), ModelError> {
        let n = ds.n_attributes();
        if n < 2 {
            return Err(ModelError::TooFewAttributes(n));
        }
        if ds.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let mut builder = Builder {
            config,
            counter: OpCounter::default(),
            nodes: 0,
            node_budget,
        };
        let all: Vec<usize> = (0..n).collect();
        let root = builder.node(&DataSlice::full(ds), &all)?;
        let model = Self::assemble(ds.schema().to_vec(), schema_fingerprint(ds), config, root);
        let stats = BuildStats {
            split_ops: builder.counter,
            nodes: builder.nodes,
        };
        Ok((model, stats))
    }

    fn assemble(schema: Vec<AttributeSchema>, digest: SchemaDigest, config: BuildConfig, root: FpqmNode) -> Self {
        let rule_count = root.count_nodes();
        let mut paths = Vec::new();
        root.collect_paths(&mut Vec::new(), &mut paths);
        let depth = paths.iter().map(Vec::len).max().unwrap_or(0);
        Self {
            schema,
            schema_digest: digest,
            config,
            root,
            rule_count,
            depth,
        }
    }

    pub fn root(&self) -> &FpqmNode {
        &self.root
    }

    pub fn schema(&self) -> &[AttributeSchema] {
        &self.schema
    }

    pub fn n_attributes(&self) -> usize {
        self.schema.len()
    }

    pub fn domain_size(&self, attribute: usize) -> usize {
        self.schema[attribute].size()
    }

    pub fn config(&self) -> BuildConfig {
        self.config
    }

    pub fn schema_digest(&self) -> &SchemaDigest {
        &self.schema_digest
    }

    /// Number of nodes; each node carries one ask-or-predict rule.
    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Attribute sequence of every root-to-leaf path, fallback orders
    /// appended where a path ends in one.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.root.collect_paths(&mut Vec::new(), &mut out);
        out
    }

    /// Every distribution stored at a child branch.
    pub fn distributions(&self) -> Vec<&ConditionalDistribution> {
        fn walk<'a>(node: &'a FpqmNode, out: &mut Vec<&'a ConditionalDistribution>) {
            for branch in node.branches.values() {
                if let Branch::Child { child, predictions, .. } = branch {
                    out.extend(predictions.values());
                    walk(child, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn check_dataset(&self, ds: &Dataset) -> Result<(), ModelError> {
        let digest = schema_fingerprint(ds);
        if digest != self.schema_digest {
            return Err(ModelError::DigestMismatch {
                model: self.schema_digest.0.clone(),
                dataset: digest.0,
            });
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, shortest round-trip float rendering.
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            schema_digest: self.schema_digest.clone(),
            schema: self.schema.clone(),
            config: self.config,
            root: self.root.clone(),
        };
        let value = serde_json::to_value(&doc).expect("model document is always representable");
        let mut text = serde_json::to_string_pretty(&value).expect("JSON values always render");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let parse_err = |e: serde_json::Error| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        let raw: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        let version = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| ModelError::Invalid("missing `version`".into()))?;
        if version != u64::from(MODEL_FORMAT_VERSION) {
            return Err(ModelError::Version {
                found: version as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let doc: ModelDocument = serde_json::from_str(text).map_err(parse_err)?;
        validate_schema(&doc.schema).map_err(|e| ModelError::Invalid(e.to_string()))?;
        let actual = schema_digest(&doc.schema);
        if actual != doc.schema_digest {
            return Err(ModelError::DigestMismatch {
                model: doc.schema_digest.0,
                dataset: actual.0,
            });
        }
        let model = Self::assemble(doc.schema, doc.schema_digest, doc.config, doc.root);
        model.validate()?;
        Ok(model)
    }

    /// Parses a model and checks it was trained on `ds`'s schema.
    pub fn from_json_for(text: &str, ds: &Dataset) -> Result<Self, ModelError> {
        let model = Self::from_json(text)?;
        model.check_dataset(ds)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_attributes();
        fn walk(node: &FpqmNode, schema: &[AttributeSchema]) -> Result<(), ModelError> {
            let attr = schema
                .get(node.attribute)
                .ok_or_else(|| ModelError::Invalid(format!("unknown attribute {}", node.attribute)))?;
            for (&value, branch) in &node.branches {
                if value >= attr.size() {
                    return Err(ModelError::Invalid(format!(
                        "branch value {value} outside the domain of `{}`",
                        attr.name
                    )));
                }
                if let Branch::Child { child, predictions, .. } = branch {
                    for (&target, dist) in predictions {
                        if target >= schema.len() || dist.probabilities.len() != schema[target].size() {
                            return Err(ModelError::Invalid(format!(
                                "prediction table for attribute {target} has the wrong shape"
                            )));
                        }
                    }
                    walk(child, schema)?;
                }
            }
            Ok(())
        }
        walk(&self.root, &self.schema)?;
        for path in self.paths() {
            let mut seen = vec![false; n];
            for &a in &path {
                if a >= n || std::mem::replace(&mut seen[a], true) {
                    return Err(ModelError::Invalid(format!("path {path:?} repeats or leaves the schema")));
                }
            }
            if path.len() != n {
                return Err(ModelError::Invalid(format!("path {path:?} does not cover all attributes")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example_train;

    fn example_model() -> FpqmModel {
        FpqmModel::build(&worked_example_train(), BuildConfig::linear()).unwrap()
    }

    #[test]
    fn root_is_income_with_three_branches() {
        let m = example_model();
        assert_eq!(m.root().attribute, 1);
        assert_eq!(m.root().branches.len(), 3);
        assert_eq!(m.depth(), 5);
    }

    #[test]
    fn income_zero_branch_uses_two_rows() {
        let m = example_model();
        match m.root().branch(0).unwrap() {
            Branch::Child { child, predictions, support } => {
                assert_eq!(*support, 2);
                assert_eq!(child.attribute, 3);
                assert_eq!(predictions[&0].probabilities, vec![0.0, 1.0]);
                assert_eq!(predictions[&3].probabilities, vec![0.5, 0.5]);
            }
            other => panic!("expected a child, got {other:?}"),
        }
    }

    #[test]
    fn smallest_model_has_depth_two() {
        let ds = Dataset::from_indices(&["a", "b"], &[2, 2], vec![vec![0, 1], vec![1, 1]]).unwrap();
        let m = FpqmModel::build(&ds, BuildConfig::default()).unwrap();
        assert_eq!(m.depth(), 2);
        assert_eq!(m.rule_count(), 3);
        for branch in m.root().branches.values() {
            match branch {
                Branch::Child { child, .. } => assert!(child.is_leaf()),
                Branch::Fallback { .. } => panic!("both values are supported"),
            }
        }
    }

    #[test]
    fn rejects_tiny_inputs() {
        let one = Dataset::from_indices(&["a"], &[2], vec![vec![0]]).unwrap();
        assert!(matches!(
            FpqmModel::build(&one, BuildConfig::default()),
            Err(ModelError::TooFewAttributes(1))
        ));
        let empty = Dataset::from_indices(&["a", "b"], &[2, 2], vec![]).unwrap();
        assert!(matches!(
            FpqmModel::build(&empty, BuildConfig::default()),
            Err(ModelError::EmptyDataset)
        ));
    }

    #[test]
    fn unsupported_branches_fall_back() {
        let m = example_model();
        // Income = 1 holds only U1, so its child has an empty Education = 1 branch.
        let Branch::Child { child, .. } = m.root().branch(1).unwrap() else {
            panic!("Income = 1 has one training row");
        };
        assert_eq!(child.attribute, 0);
        match child.branch(1).unwrap() {
            Branch::Fallback { fallback_order, support } => {
                assert_eq!(*support, 0);
                let mut sorted = fallback_order.clone();
                sorted.sort();
                assert_eq!(sorted, vec![2, 3, 4]);
            }
            other => panic!("expected fallback, got {other:?}"),
        }
    }

    #[test]
    fn min_support_prunes_thin_branches() {
        let cfg = BuildConfig {
            aggregation_mode: AggregationMode::Linear,
            min_support: 2,
        };
        let m = FpqmModel::build(&worked_example_train(), cfg).unwrap();
        assert!(matches!(m.root().branch(1), Some(Branch::Fallback { support: 1, .. })));
        assert!(matches!(m.root().branch(0), Some(Branch::Child { .. })));
    }

    #[test]
    fn every_path_is_a_permutation() {
        let m = example_model();
        for path in m.paths() {
            let mut sorted = path.clone();
            sorted.sort();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4], "path {path:?}");
        }
    }

    #[test]
    fn example_rule_count() {
        // Income = 0: Work, then Education → Social → Communication under each
        // Work value (7). Income = 1 and Income = 2: single-row chains of four.
        assert_eq!(example_model().rule_count(), 1 + 7 + 4 + 4);
    }

    #[test]
    fn round_trip_and_canonical_bytes() {
        let m = example_model();
        let text = m.to_json();
        assert_eq!(text, m.to_json());
        let back = FpqmModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn truncated_document_reports_position() {
        let text = example_model().to_json();
        let cut = &text[..text.len() / 2];
        match FpqmModel::from_json(cut) {
            Err(ModelError::Parse { line, .. }) => assert!(line > 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let text = example_model().to_json().replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(
            FpqmModel::from_json(&text),
            Err(ModelError::Version { found: 9, .. })
        ));
    }

    #[test]
    fn digest_mismatch_against_dataset() {
        let text = example_model().to_json();
        let other = Dataset::from_indices(&["a", "b"], &[2, 2], vec![vec![0, 0]]).unwrap();
        assert!(matches!(
            FpqmModel::from_json_for(&text, &other),
            Err(ModelError::DigestMismatch { .. })
        ));
        assert!(FpqmModel::from_json_for(&text, &worked_example_train()).is_ok());
    }

    #[test]
    fn node_budget_enforced() {
        let err = FpqmModel::build_with_stats(&worked_example_train(), BuildConfig::linear(), Some(3)).unwrap_err();
        assert!(matches!(err, ModelError::NodeBudgetExceeded(3)));
    }
}
