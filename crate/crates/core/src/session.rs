//! Live interviews against a trained model.
//!
//! The root attribute is always asked. After each answer the session walks
//! down the branch of the value just fixed: the next node's attribute is
//! predicted when the most likely value on that branch reaches the
//! threshold, and asked otherwise. Predicted values steer the descent
//! exactly like answered ones, whether or not they later prove right.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SessionError;
use crate::model::{Branch, FpqmModel, FpqmNode};

/// What the interviewer should do next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepOutcome {
    Ask {
        attribute: usize,
    },
    Predicted {
        attribute: usize,
        value: usize,
        confidence: f64,
    },
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub attribute: usize,
    pub predicted: usize,
    pub corrected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    Confirmed,
    Corrected(usize),
}

/// Outcome of one completed interview. Vectors are indexed by attribute;
/// `visit_order` holds 1-based attribute numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub final_values: Vec<usize>,
    pub indicators: Vec<bool>,
    pub confidences: Vec<f64>,
    pub visit_order: Vec<usize>,
    #[serde(default)]
    pub corrections: Vec<Correction>,
}

impl SessionResult {
    pub fn n_attributes(&self) -> usize {
        self.final_values.len()
    }

    pub fn predicted_count(&self) -> usize {
        self.indicators.iter().filter(|&&i| i).count()
    }

    pub fn record_verification(&mut self, attribute: usize, outcome: Verification) -> Result<(), SessionError> {
        match self.indicators.get(attribute) {
            None => return Err(SessionError::UnknownAttribute(attribute)),
            Some(false) => return Err(SessionError::NotPredicted(attribute)),
            Some(true) => {}
        }
        if let Verification::Corrected(value) = outcome {
            let predicted = self.final_values[attribute];
            if value != predicted {
                self.corrections.push(Correction {
                    attribute,
                    predicted,
                    corrected: value,
                });
                self.final_values[attribute] = value;
            }
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<(), SessionError> {
    if sigma.is_nan() || sigma < 0.0 {
        Err(SessionError::InvalidSigma)
    } else {
        Ok(())
    }
}

fn node_at<'m>(root: &'m FpqmNode, path: &[usize]) -> &'m FpqmNode {
    let mut node = root;
    for value in path {
        match node.branch(*value) {
            Some(Branch::Child { child, .. }) => node = child,
            _ => unreachable!("session paths only follow child branches"),
        }
    }
    node
}

#[derive(Debug, Clone, PartialEq)]
enum Cursor {
    /// Value path from the root to the node whose attribute is pending.
    Node(Vec<usize>),
    /// Remaining attributes of a fallback branch; the front is pending.
    Fallback(VecDeque<usize>),
    Finished,
}

/// One respondent's interview. Single owner; drive it with
/// [`Session::submit_answer`] until [`StepOutcome::Finished`].
#[derive(Debug, Clone)]
pub struct Session {
    model: Arc<FpqmModel>,
    sigma: f64,
    cursor: Cursor,
    asked_first: bool,
    final_values: Vec<Option<usize>>,
    indicators: Vec<Option<bool>>,
    confidences: Vec<Option<f64>>,
    visit_order: Vec<usize>,
    rejected_confidences: BTreeMap<usize, f64>,
    corrections: Vec<Correction>,
    node_visits: u64,
}

impl Session {
    /// Opens a session; the first step is always the root question.
    /// Thresholds above 1 are allowed and mean "never predict".
    pub fn start(model: Arc<FpqmModel>, sigma: f64) -> Result<(Self, StepOutcome), SessionError> {
        check_sigma(sigma)?;
        let n = model.n_attributes();
        let root = model.root().attribute;
        let session = Self {
            model,
            sigma,
            cursor: Cursor::Node(Vec::new()),
            asked_first: false,
            final_values: vec![None; n],
            indicators: vec![None; n],
            confidences: vec![None; n],
            visit_order: Vec::with_capacity(n),
            rejected_confidences: BTreeMap::new(),
            corrections: Vec::new(),
            node_visits: 0,
        };
        Ok((session, StepOutcome::Ask { attribute: root }))
    }

    pub fn model(&self) -> &Arc<FpqmModel> {
        &self.model
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn asked_first(&self) -> bool {
        self.asked_first
    }

    pub fn is_finished(&self) -> bool {
        self.cursor == Cursor::Finished
    }

    /// Attribute awaiting an answer, if any.
    pub fn pending(&self) -> Option<usize> {
        match &self.cursor {
            Cursor::Node(path) => Some(node_at(self.model.root(), path).attribute),
            Cursor::Fallback(queue) => queue.front().copied(),
            Cursor::Finished => None,
        }
    }

    pub fn final_values(&self) -> &[Option<usize>] {
        &self.final_values
    }

    pub fn indicators(&self) -> &[Option<bool>] {
        &self.indicators
    }

    pub fn confidences(&self) -> &[Option<f64>] {
        &self.confidences
    }

    pub fn visit_order(&self) -> &[usize] {
        &self.visit_order
    }

    /// Best confidence of attributes that were asked because it fell short.
    pub fn rejected_confidences(&self) -> &BTreeMap<usize, f64> {
        &self.rejected_confidences
    }

    pub fn corrections(&self) -> &[Correction] {
        &self.corrections
    }

    /// Attributes resolved so far, asked or predicted.
    pub fn node_visits(&self) -> u64 {
        self.node_visits
    }

    fn resolve(&mut self, attribute: usize, value: usize, predicted: bool, confidence: f64) {
        self.final_values[attribute] = Some(value);
        self.indicators[attribute] = Some(predicted);
        self.confidences[attribute] = Some(confidence);
        self.visit_order.push(attribute + 1);
        self.node_visits += 1;
    }

    /// Records the answer to the pending question and returns the burst of
    /// predictions that follows, ending in the next question or `Finished`.
    /// On error the session is unchanged.
    pub fn submit_answer(&mut self, attribute: usize, value: usize) -> Result<Vec<StepOutcome>, SessionError> {
        let expected = self.pending().ok_or(SessionError::Finished)?;
        if attribute != expected {
            return Err(SessionError::NotPending {
                expected,
                got: attribute,
            });
        }
        if value >= self.model.domain_size(attribute) {
            return Err(SessionError::OutOfDomain { attribute, value });
        }
        self.resolve(attribute, value, false, 1.0);
        self.asked_first = true;

        let mut steps = Vec::new();
        match std::mem::replace(&mut self.cursor, Cursor::Finished) {
            Cursor::Node(path) => self.descend(path, value, &mut steps),
            Cursor::Fallback(mut queue) => {
                queue.pop_front();
                self.enter_fallback(queue, &mut steps);
            }
            Cursor::Finished => unreachable!("pending() returned an attribute"),
        }
        Ok(steps)
    }

    fn enter_fallback(&mut self, queue: VecDeque<usize>, steps: &mut Vec<StepOutcome>) {
        match queue.front() {
            Some(&next) => {
                steps.push(StepOutcome::Ask { attribute: next });
                self.cursor = Cursor::Fallback(queue);
            }
            None => {
                steps.push(StepOutcome::Finished);
                self.cursor = Cursor::Finished;
            }
        }
    }

    fn descend(&mut self, mut path: Vec<usize>, mut value: usize, steps: &mut Vec<StepOutcome>) {
        let model = Arc::clone(&self.model);
        let mut node = node_at(model.root(), &path);
        loop {
            if node.is_leaf() {
                steps.push(StepOutcome::Finished);
                self.cursor = Cursor::Finished;
                return;
            }
            let (child, predictions) = match node.branch(value) {
                Some(Branch::Child { child, predictions, .. }) => (child, predictions),
                Some(Branch::Fallback { fallback_order, .. }) => {
                    let queue = fallback_order
                        .iter()
                        .copied()
                        .filter(|&a| self.final_values[a].is_none())
                        .collect();
                    self.enter_fallback(queue, steps);
                    return;
                }
                None => {
                    let queue = (0..self.final_values.len())
                        .filter(|&a| self.final_values[a].is_none())
                        .collect();
                    self.enter_fallback(queue, steps);
                    return;
                }
            };
            path.push(value);
            node = child;
            let target = child.attribute;
            let best = predictions.get(&target).and_then(|d| d.mode());
            match best {
                Some((predicted, confidence)) if confidence >= self.sigma => {
                    self.resolve(target, predicted, true, confidence);
                    steps.push(StepOutcome::Predicted {
                        attribute: target,
                        value: predicted,
                        confidence,
                    });
                    value = predicted;
                }
                other => {
                    self.rejected_confidences
                        .insert(target, other.map_or(0.0, |(_, c)| c));
                    steps.push(StepOutcome::Ask { attribute: target });
                    self.cursor = Cursor::Node(path);
                    return;
                }
            }
        }
    }

    /// Confirms or corrects a predicted attribute. Later steps are not
    /// replayed.
    pub fn record_verification(&mut self, attribute: usize, outcome: Verification) -> Result<(), SessionError> {
        match self.indicators.get(attribute) {
            None => return Err(SessionError::UnknownAttribute(attribute)),
            Some(Some(true)) => {}
            Some(_) => return Err(SessionError::NotPredicted(attribute)),
        }
        if let Verification::Corrected(value) = outcome {
            if value >= self.model.domain_size(attribute) {
                return Err(SessionError::OutOfDomain { attribute, value });
            }
            let predicted = self.final_values[attribute].expect("predicted attributes have values");
            if value != predicted {
                self.corrections.push(Correction {
                    attribute,
                    predicted,
                    corrected: value,
                });
                self.final_values[attribute] = Some(value);
            }
        }
        Ok(())
    }

    /// The completed record, once every attribute is resolved.
    pub fn result(&self) -> Option<SessionResult> {
        if !self.is_finished() {
            return None;
        }
        Some(SessionResult {
            final_values: self.final_values.iter().map(|v| v.expect("finished")).collect(),
            indicators: self.indicators.iter().map(|v| v.expect("finished")).collect(),
            confidences: self.confidences.iter().map(|v| v.expect("finished")).collect(),
            visit_order: self.visit_order.clone(),
            corrections: self.corrections.clone(),
        })
    }
}

struct BatchState<'a> {
    answers: &'a [usize],
    sigma: f64,
    final_values: Vec<Option<usize>>,
    indicators: Vec<bool>,
    confidences: Vec<f64>,
    visit_order: Vec<usize>,
    visits: u64,
}

impl BatchState<'_> {
    fn ask(&mut self, attribute: usize) {
        self.final_values[attribute] = Some(self.answers[attribute]);
        self.indicators[attribute] = false;
        self.confidences[attribute] = 1.0;
        self.visit_order.push(attribute + 1);
        self.visits += 1;
    }

    fn predict(&mut self, attribute: usize, value: usize, confidence: f64) {
        self.final_values[attribute] = Some(value);
        self.indicators[attribute] = true;
        self.confidences[attribute] = confidence;
        self.visit_order.push(attribute + 1);
        self.visits += 1;
    }

    /// `node`'s own attribute is already resolved.
    fn walk(&mut self, node: &FpqmNode) {
        if node.is_leaf() {
            return;
        }
        let value = self.final_values[node.attribute].expect("node attribute resolved before descent");
        match node.branch(value) {
            Some(Branch::Child { child, predictions, .. }) => {
                match predictions.get(&child.attribute).and_then(|d| d.mode()) {
                    Some((v, c)) if c >= self.sigma => self.predict(child.attribute, v, c),
                    _ => self.ask(child.attribute),
                }
                self.walk(child);
            }
            Some(Branch::Fallback { fallback_order, .. }) => {
                for &a in fallback_order {
                    if self.final_values[a].is_none() {
                        self.ask(a);
                    }
                }
            }
            None => {
                for a in 0..self.final_values.len() {
                    if self.final_values[a].is_none() {
                        self.ask(a);
                    }
                }
            }
        }
    }
}

/// Runs a whole interview for one known answer row, answering each question
/// from `answers`. Wrong predictions are kept and steer the descent.
pub fn run_batch(model: &FpqmModel, answers: &[usize], sigma: f64) -> Result<SessionResult, SessionError> {
    run_batch_with_visits(model, answers, sigma).map(|(r, _)| r)
}

/// [`run_batch`] plus the number of attributes visited on the way.
pub fn run_batch_with_visits(
    model: &FpqmModel,
    answers: &[usize],
    sigma: f64,
) -> Result<(SessionResult, u64), SessionError> {
    check_sigma(sigma)?;
    let n = model.n_attributes();
    if answers.len() != n {
        return Err(SessionError::RowLength {
            expected: n,
            found: answers.len(),
        });
    }
    for (attribute, &value) in answers.iter().enumerate() {
        if value >= model.domain_size(attribute) {
            return Err(SessionError::OutOfDomain { attribute, value });
        }
    }
    let mut state = BatchState {
        answers,
        sigma,
        final_values: vec![None; n],
        indicators: vec![false; n],
        confidences: vec![1.0; n],
        visit_order: Vec::with_capacity(n),
        visits: 0,
    };
    state.ask(model.root().attribute);
    state.walk(model.root());
    let result = SessionResult {
        final_values: state.final_values.into_iter().map(|v| v.expect("every attribute visited")).collect(),
        indicators: state.indicators,
        confidences: state.confidences,
        visit_order: state.visit_order,
        corrections: Vec::new(),
    };
    Ok((result, state.visits))
}

/// Drives a [`Session`] with `answers`, the way an interviewer would.
pub fn run_stepwise(model: Arc<FpqmModel>, answers: &[usize], sigma: f64) -> Result<SessionResult, SessionError> {
    if answers.len() != model.n_attributes() {
        return Err(SessionError::RowLength {
            expected: model.n_attributes(),
            found: answers.len(),
        });
    }
    let (mut session, first) = Session::start(model, sigma)?;
    let mut next = first;
    loop {
        match next {
            StepOutcome::Ask { attribute } => {
                let steps = session.submit_answer(attribute, answers[attribute])?;
                next = steps.last().cloned().expect("a burst always ends in Ask or Finished");
            }
            StepOutcome::Finished => break,
            StepOutcome::Predicted { .. } => unreachable!("bursts end in Ask or Finished"),
        }
    }
    Ok(session.result().expect("session reached Finished"))
}
