//! Versioned plain-text agent checkpoint.
//!
//! ```text
//! atm-agent-snapshot v1
//! spec <states> <actions> <cost> <discount> <initial-state>
//! begin-config
//! <AtmConfig as TOML>
//! end-config
//! values <states> <actions>
//! <s> <a> <q>                  (replicated)
//! <s> <a> <mu> <var>           (kalman)
//! model <states> <actions> <prior>
//! <s> <a> <row-total> <s'>:<count> ...
//! visits
//! <s> <a> <mass>
//! rewards
//! <s> <a> <mean> <mass> <done-mass>
//! belief <p_0> ... <p_{n-1}>
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a write/parse cycle
//! is lossless.

use std::fmt::Write as _;

use super::{AgentError, AtmAgent, AtmConfig, Learner, LearnerKind, RewardTable};
use crate::acno::{ControlAction, EnvSpec, StateId};
use crate::belief::{Belief, TransitionModel, VisitCounter};

pub const SNAPSHOT_HEADER: &str = "atm-agent-snapshot v1";

struct Lines<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { items: text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(), pos: 0 }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str), AgentError> {
        let item = self.items.get(self.pos).copied();
        self.pos += 1;
        item.ok_or(AgentError::Snapshot { line: 0, reason: "unexpected end of snapshot".into() })
    }

    fn expect(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>), AgentError> {
        let (line, text) = self.next_line()?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.first() != Some(&keyword) {
            return Err(err(line, &format!("expected `{keyword}`")));
        }
        Ok((line, fields[1..].to_vec()))
    }

    fn parse_model(&mut self) -> Result<TransitionModel, AgentError> {
        let mut rest = self.items[self.pos.min(self.items.len())..].iter().copied();
        let model = TransitionModel::parse_snapshot(&mut rest).map_err(|e| err(0, &e.to_string()))?;
        self.pos = self.items.len() - rest.len();
        Ok(model)
    }
}

fn err(line: usize, reason: &str) -> AgentError {
    AgentError::Snapshot { line, reason: reason.to_string() }
}

fn num<T: std::str::FromStr>(line: usize, field: Option<&&str>, what: &str) -> Result<T, AgentError> {
    field.and_then(|t| t.parse().ok()).ok_or_else(|| err(line, &format!("bad {what}")))
}

impl AtmAgent {
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let (n, m) = (self.spec.num_states, self.spec.num_actions);
        let _ = writeln!(out, "{SNAPSHOT_HEADER}");
        let _ = writeln!(
            out,
            "spec {} {} {:?} {:?} {}",
            n, m, self.spec.measurement_cost, self.spec.discount, self.spec.initial_state.0
        );
        out.push_str("begin-config\n");
        out.push_str(&toml::to_string(&self.cfg).expect("config serializes"));
        out.push_str("end-config\n");
        let _ = writeln!(out, "values {n} {m}");
        for s in 0..n {
            for a in 0..m {
                match &self.learner {
                    Learner::Replicated(q) => {
                        let _ = writeln!(out, "{s} {a} {:?}", q.get(s, a));
                    }
                    Learner::Kalman(g) => {
                        let _ = writeln!(out, "{s} {a} {:?} {:?}", g.mean(s, a), g.variance(s, a));
                    }
                }
            }
        }
        self.model.write_snapshot(&mut out);
        out.push_str("visits\n");
        for s in 0..n {
            for a in 0..m {
                let _ = writeln!(out, "{s} {a} {:?}", self.visits.get(StateId(s), ControlAction(a)));
            }
        }
        out.push_str("rewards\n");
        for s in 0..n {
            for a in 0..m {
                let _ = writeln!(
                    out,
                    "{s} {a} {:?} {:?} {:?}",
                    self.rewards.mean(s, a),
                    self.rewards.mass(s, a),
                    self.rewards.done_mass(s, a)
                );
            }
        }
        out.push_str("belief");
        for p in self.belief.probs() {
            let _ = write!(out, " {p:?}");
        }
        out.push_str("\nend\n");
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, AgentError> {
        let mut lines = Lines::new(text);
        let (line, header) = lines.next_line()?;
        if header.trim() != SNAPSHOT_HEADER {
            return Err(err(line, "unsupported snapshot header"));
        }
        let (line, f) = lines.expect("spec")?;
        let spec = EnvSpec {
            num_states: num(line, f.first(), "state count")?,
            num_actions: num(line, f.get(1), "action count")?,
            measurement_cost: num(line, f.get(2), "cost")?,
            discount: num(line, f.get(3), "discount")?,
            initial_state: StateId(num(line, f.get(4), "initial state")?),
        };
        spec.validate().map_err(|e| err(line, &e.to_string()))?;
        let (n, m) = (spec.num_states, spec.num_actions);

        lines.expect("begin-config")?;
        let mut toml_text = String::new();
        loop {
            let (line, text) = lines.next_line()?;
            if text.trim() == "end-config" {
                break;
            }
            if text.starts_with("values") {
                return Err(err(line, "missing end-config"));
            }
            toml_text.push_str(text);
            toml_text.push('\n');
        }
        let cfg: AtmConfig = toml::from_str(&toml_text).map_err(|e| err(line, &format!("config: {e}")))?;
        let mut agent = AtmAgent::new(spec, cfg)?;

        let (line, f) = lines.expect("values")?;
        if num::<usize>(line, f.first(), "state count")? != n || num::<usize>(line, f.get(1), "action count")? != m {
            return Err(err(line, "value table dimensions disagree with spec"));
        }
        for s in 0..n {
            for a in 0..m {
                let (line, text) = lines.next_line()?;
                let f: Vec<&str> = text.split_whitespace().collect();
                if num::<usize>(line, f.first(), "state")? != s || num::<usize>(line, f.get(1), "action")? != a {
                    return Err(err(line, "value rows out of order"));
                }
                match &mut agent.learner {
                    Learner::Replicated(q) => q.set(s, a, num(line, f.get(2), "q value")?),
                    Learner::Kalman(g) => {
                        let var: f64 = num(line, f.get(3), "variance")?;
                        if !(var > 0.0) {
                            return Err(err(line, "variance must be positive"));
                        }
                        g.set(s, a, num(line, f.get(2), "mean")?, var);
                    }
                }
            }
        }

        let model = lines.parse_model()?;
        if model.num_states() != n || model.num_actions() != m {
            return Err(err(0, "model dimensions disagree with spec"));
        }
        agent.model = model;

        lines.expect("visits")?;
        let mut visits = VisitCounter::new(n, m);
        for s in 0..n {
            for a in 0..m {
                let (line, text) = lines.next_line()?;
                let f: Vec<&str> = text.split_whitespace().collect();
                visits.set(StateId(s), ControlAction(a), num(line, f.get(2), "visit mass")?);
            }
        }
        agent.visits = visits;

        lines.expect("rewards")?;
        let mut rewards = RewardTable::new(n, m);
        for s in 0..n {
            for a in 0..m {
                let (line, text) = lines.next_line()?;
                let f: Vec<&str> = text.split_whitespace().collect();
                rewards.set(
                    s,
                    a,
                    num(line, f.get(2), "reward mean")?,
                    num(line, f.get(3), "reward mass")?,
                    num(line, f.get(4), "done mass")?,
                );
            }
        }
        agent.rewards = rewards;

        let (line, f) = lines.expect("belief")?;
        let probs = f
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| err(line, "bad belief entry")))
            .collect::<Result<Vec<_>, _>>()?;
        if probs.len() != n {
            return Err(err(line, "belief length disagrees with spec"));
        }
        agent.belief = Belief::restore(probs)?;
        lines.expect("end")?;
        Ok(agent)
    }
}

/// Learner kind recorded in a snapshot, without parsing the rest.
pub fn snapshot_learner(text: &str) -> Option<LearnerKind> {
    let start = text.find("begin-config\n")? + "begin-config\n".len();
    let end = text.find("end-config")?;
    let cfg: AtmConfig = toml::from_str(&text[start..end]).ok()?;
    Some(cfg.learner)
}
