//! Beliefs over hidden states and the count-based transition model.
//!
//! The model keeps Dirichlet pseudo-counts `alpha(s, a, s')` plus a uniform
//! per-cell prior. Rows are stored sparsely; the prior is applied implicitly,
//! so every query costs `O(nonzeros)` rather than `O(|S|)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::acno::{ControlAction, StateId};

/// Default per-cell Dirichlet prior.
pub const DEFAULT_PRIOR: f64 = 1e-3;

/// Simplex drift below this is renormalized; above it is a bug.
pub const SIMPLEX_RENORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("belief must contain at least one state")]
    Empty,
    #[error("belief entry {index} is invalid: {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("belief sums to {0}, too far from 1 to renormalize")]
    SimplexDrift(f64),
    #[error("state {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("snapshot parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Probability vector over hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    /// Accepts any vector within [`SIMPLEX_RENORM_TOL`] of the simplex and
    /// renormalizes it.
    pub fn new(probs: Vec<f64>) -> Result<Self, BeliefError> {
        if probs.is_empty() {
            return Err(BeliefError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(BeliefError::InvalidEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() >= SIMPLEX_RENORM_TOL {
            return Err(BeliefError::SimplexDrift(sum));
        }
        let mut probs = probs;
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(Self { probs })
    }

    /// Validates like [`Belief::new`] but keeps the entries bit for bit.
    pub(crate) fn restore(probs: Vec<f64>) -> Result<Self, BeliefError> {
        Self::new(probs.clone())?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform belief over zero states");
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn one_hot(state: StateId, n: usize) -> Result<Self, BeliefError> {
        collapse(state, n)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, s: StateId) -> f64 {
        self.probs[s.0]
    }

    /// Nonzero entries as `(state, mass)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    /// Most likely state, lowest index on ties.
    pub fn argmax(&self) -> StateId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        StateId(best)
    }

    /// `Some(s)` when all mass sits on one state.
    pub fn as_one_hot(&self) -> Option<StateId> {
        let mut found = None;
        for (i, p) in self.support() {
            if found.is_some() || p < 1.0 - 1e-12 {
                return None;
            }
            found = Some(StateId(i));
        }
        found
    }

    /// Expectation of a per-state quantity.
    pub fn expect(&self, values: impl Fn(usize) -> f64) -> f64 {
        self.support().map(|(s, p)| p * values(s)).sum()
    }
}

/// One-hot belief at the observed state.
pub fn collapse(s_obs: StateId, n: usize) -> Result<Belief, BeliefError> {
    if s_obs.0 >= n {
        return Err(BeliefError::StateOutOfRange { state: s_obs.0, num_states: n });
    }
    let mut probs = vec![0.0; n];
    probs[s_obs.0] = 1.0;
    Ok(Belief { probs })
}

/// Dirichlet transition counts with an implicit uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    num_states: usize,
    num_actions: usize,
    prior: f64,
    /// Row `s * num_actions + a`, entries sorted by next state.
    rows: Vec<Vec<(usize, f64)>>,
    totals: Vec<f64>,
    frozen: bool,
}

impl TransitionModel {
    pub fn new(num_states: usize, num_actions: usize, prior: f64) -> Self {
        assert!(prior >= 0.0 && prior.is_finite(), "prior pseudocount must be nonnegative");
        Self {
            num_states,
            num_actions,
            prior,
            rows: vec![Vec::new(); num_states * num_actions],
            totals: vec![0.0; num_states * num_actions],
            frozen: false,
        }
    }

    /// A model fixed to a known kernel `kernel[s][a][s']`. Recording
    /// transitions into it is a no-op.
    pub fn known(kernel: &[Vec<Vec<f64>>]) -> Self {
        let num_states = kernel.len();
        let num_actions = kernel.first().map_or(0, Vec::len);
        let mut model = Self::new(num_states, num_actions, 0.0);
        for (s, per_action) in kernel.iter().enumerate() {
            for (a, row) in per_action.iter().enumerate() {
                for (next, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        model.add_count(s, a, next, p);
                    }
                }
            }
        }
        model.frozen = true;
        model
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    fn row_index(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    fn add_count(&mut self, s: usize, a: usize, next: usize, mass: f64) {
        let idx = self.row_index(s, a);
        let row = &mut self.rows[idx];
        match row.binary_search_by_key(&next, |&(k, _)| k) {
            Ok(pos) => row[pos].1 += mass,
            Err(pos) => row.insert(pos, (next, mass)),
        }
        self.totals[idx] += mass;
    }

    /// Raw count `alpha(s, a, s')`, excluding the prior.
    pub fn count(&self, s: StateId, a: ControlAction, next: StateId) -> f64 {
        let row = &self.rows[self.row_index(s.0, a.0)];
        row.binary_search_by_key(&next.0, |&(k, _)| k)
            .map_or(0.0, |pos| row[pos].1)
    }

    /// Observed counts in row `(s, a)` excluding the prior.
    pub fn row_total(&self, s: StateId, a: ControlAction) -> f64 {
        self.totals[self.row_index(s.0, a.0)]
    }

    /// Sum of all observed counts.
    pub fn total_mass(&self) -> f64 {
        self.totals.iter().sum()
    }

    /// Nonzero observed entries of row `(s, a)`.
    pub fn row_entries(&self, s: StateId, a: ControlAction) -> &[(usize, f64)] {
        &self.rows[self.row_index(s.0, a.0)]
    }

    fn denominator(&self, idx: usize) -> f64 {
        self.totals[idx] + self.prior * self.num_states as f64
    }

    /// `P(. | s, a)`, uniform when the row (with prior) has no mass.
    pub fn transition_probs(&self, s: StateId, a: ControlAction) -> Vec<f64> {
        let n = self.num_states;
        let idx = self.row_index(s.0, a.0);
        let den = self.denominator(idx);
        if den <= 0.0 {
            return vec![1.0 / n as f64; n];
        }
        let mut probs = vec![self.prior / den; n];
        for &(next, mass) in &self.rows[idx] {
            probs[next] += mass / den;
        }
        probs
    }

    /// `sum_{s'} P(s'|s,a) values[s']`. `values_sum` must equal `sum(values)`.
    pub fn expect_next(&self, s: usize, a: usize, values: &[f64], values_sum: f64) -> f64 {
        let idx = self.row_index(s, a);
        let den = self.denominator(idx);
        if den <= 0.0 {
            return values_sum / self.num_states as f64;
        }
        let observed: f64 = self.rows[idx].iter().map(|&(next, m)| m * values[next]).sum();
        (observed + self.prior * values_sum) / den
    }

    /// Belief-weighted count update for a transition whose endpoint `s_obs`
    /// was observed. Adds total mass 1: `alpha(s, a, s_obs) += b_prev(s)`.
    pub fn record_transition(&mut self, b_prev: &Belief, a: ControlAction, s_obs: StateId) {
        if self.frozen {
            return;
        }
        for (s, p) in b_prev.support() {
            self.add_count(s, a.0, s_obs.0, p);
        }
    }

    /// Indicator update for a transition with both endpoints known.
    pub fn record_indicator(&mut self, s: StateId, a: ControlAction, s_obs: StateId) {
        if !self.frozen {
            self.add_count(s.0, a.0, s_obs.0, 1.0);
        }
    }

    /// One row per `(s, a)`: `s a total next:count ...`.
    pub fn write_snapshot(&self, out: &mut String) {
        let _ = write!(out, "model {} {} {:?}", self.num_states, self.num_actions, self.prior);
        out.push_str(if self.frozen { " frozen\n" } else { "\n" });
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let idx = self.row_index(s, a);
                let _ = write!(out, "{} {} {:?}", s, a, self.totals[idx]);
                for &(next, mass) in &self.rows[idx] {
                    let _ = write!(out, " {}:{:?}", next, mass);
                }
                out.push('\n');
            }
        }
    }

    /// Inverse of [`write_snapshot`](Self::write_snapshot). Consumes lines from
    /// the iterator; `line_no` tracks position for error messages.
    pub fn parse_snapshot<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
    ) -> Result<Self, BeliefError> {
        let (line, header) = lines.next().ok_or(BeliefError::Parse { line: 0, reason: "missing model header".into() })?;
        let parse_err = |line: usize, reason: &str| BeliefError::Parse { line, reason: reason.to_string() };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let frozen = fields.get(4) == Some(&"frozen");
        if !(fields.len() == 4 || (fields.len() == 5 && frozen)) || fields[0] != "model" {
            return Err(parse_err(line, "expected `model <states> <actions> <prior> [frozen]`"));
        }
        let num_states: usize = fields[1].parse().map_err(|_| parse_err(line, "bad state count"))?;
        let num_actions: usize = fields[2].parse().map_err(|_| parse_err(line, "bad action count"))?;
        let prior: f64 = fields[3].parse().map_err(|_| parse_err(line, "bad prior"))?;
        if !(prior >= 0.0 && prior.is_finite()) {
            return Err(parse_err(line, "bad prior"));
        }
        let mut model = Self::new(num_states, num_actions, prior);
        for s in 0..num_states {
            for a in 0..num_actions {
                let (line, text) = lines.next().ok_or(parse_err(line, "truncated model rows"))?;
                let mut parts = text.split_whitespace();
                let rs: usize = parts.next().and_then(|t| t.parse().ok()).ok_or(parse_err(line, "bad row state"))?;
                let ra: usize = parts.next().and_then(|t| t.parse().ok()).ok_or(parse_err(line, "bad row action"))?;
                if rs != s || ra != a {
                    return Err(parse_err(line, "rows out of order"));
                }
                let total: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or(parse_err(line, "bad row total"))?;
                for entry in parts {
                    let (next, mass) = entry.split_once(':').ok_or(parse_err(line, "bad entry"))?;
                    let next: usize = next.parse().map_err(|_| parse_err(line, "bad next state"))?;
                    let mass: f64 = mass.parse().map_err(|_| parse_err(line, "bad count"))?;
                    if next >= num_states || !(mass >= 0.0) {
                        return Err(parse_err(line, "entry out of range"));
                    }
                    model.add_count(s, a, next, mass);
                }
                // Keep the stored total bit-exact; summation order may differ.
                let idx = model.row_index(s, a);
                if (model.totals[idx] - total).abs() > 1e-9 * total.max(1.0) {
                    return Err(parse_err(line, "row total disagrees with entries"));
                }
                model.totals[idx] = total;
            }
        }
        model.frozen = frozen;
        Ok(model)
    }
}

/// Predictive belief update `b'(s') = sum_s b(s) P(s'|s,a)`.
pub fn predict(b: &Belief, a: ControlAction, model: &TransitionModel) -> Result<Belief, BeliefError> {
    let n = model.num_states;
    if b.len() != n {
        return Err(BeliefError::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut out = vec![0.0; n];
    let mut spread = 0.0;
    for (s, p) in b.support() {
        let idx = model.row_index(s, a.0);
        let den = model.denominator(idx);
        if den <= 0.0 {
            spread += p / n as f64;
            continue;
        }
        spread += p * model.prior / den;
        for &(next, mass) in &model.rows[idx] {
            out[next] += p * mass / den;
        }
    }
    if spread > 0.0 {
        out.iter_mut().for_each(|x| *x += spread);
    }
    Belief::new(out)
}

/// Belief-weighted visit mass per `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounter {
    num_actions: usize,
    visits: Vec<f64>,
}

impl VisitCounter {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self { num_actions, visits: vec![0.0; num_states * num_actions] }
    }

    pub fn record(&mut self, b: &Belief, a: ControlAction) {
        for (s, p) in b.support() {
            self.visits[s * self.num_actions + a.0] += p;
        }
    }

    pub fn get(&self, s: StateId, a: ControlAction) -> f64 {
        self.visits[s.0 * self.num_actions + a.0]
    }

    pub fn set(&mut self, s: StateId, a: ControlAction, mass: f64) {
        self.visits[s.0 * self.num_actions + a.0] = mass;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.visits
    }
}
