//! The alternating offers protocol: histories, validation, observation and
//! the session engine.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{NegotiationDomain, OfferId, OfferSpace};
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Propose,
    Accept,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Propose => "propose",
            ActionKind::Accept => "accept",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegotiationAction {
    pub agent: usize,
    pub kind: ActionKind,
    pub offer: OfferId,
    pub time: f64,
}

impl NegotiationAction {
    pub fn propose(agent: usize, offer: OfferId, time: f64) -> Self {
        NegotiationAction {
            agent,
            kind: ActionKind::Propose,
            offer,
            time,
        }
    }

    pub fn accept(agent: usize, offer: OfferId, time: f64) -> Self {
        NegotiationAction {
            agent,
            kind: ActionKind::Accept,
            offer,
            time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoryEntry {
    Action(NegotiationAction),
    Delay(f64),
}

/// Alternating list of actions and the delays that follow them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NegotiationHistory {
    pub entries: Vec<HistoryEntry>,
}

impl NegotiationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_action(&mut self, action: NegotiationAction) {
        self.entries.push(HistoryEntry::Action(action));
    }

    pub fn push_delay(&mut self, delay: f64) {
        self.entries.push(HistoryEntry::Delay(delay));
    }

    /// Builds a well-formed history from (action, delay) steps.
    pub fn from_steps(steps: impl IntoIterator<Item = (NegotiationAction, f64)>) -> Self {
        let mut h = Self::new();
        for (a, d) in steps {
            h.push_action(a);
            h.push_delay(d);
        }
        h
    }

    /// Each action paired with the delay following it, if any.
    ///
    /// Assumes the entries alternate; use `validate_history` first on
    /// untrusted input.
    pub fn steps(&self) -> Vec<(NegotiationAction, Option<f64>)> {
        let mut out = Vec::with_capacity(self.entries.len() / 2 + 1);
        let mut it = self.entries.iter().peekable();
        while let Some(e) = it.next() {
            if let HistoryEntry::Action(a) = e {
                let delay = match it.peek() {
                    Some(HistoryEntry::Delay(d)) => {
                        let d = *d;
                        it.next();
                        Some(d)
                    }
                    _ => None,
                };
                out.push((*a, delay));
            }
        }
        out
    }

    pub fn actions(&self) -> impl Iterator<Item = &NegotiationAction> {
        self.entries.iter().filter_map(|e| match e {
            HistoryEntry::Action(a) => Some(a),
            HistoryEntry::Delay(_) => None,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.actions().count()
    }

    pub fn last_action(&self) -> Option<&NegotiationAction> {
        self.entries.iter().rev().find_map(|e| match e {
            HistoryEntry::Action(a) => Some(a),
            HistoryEntry::Delay(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationRule {
    /// Entries do not alternate action/delay, or a time or delay is invalid.
    Structure,
    /// Offer id outside the offer space.
    InvalidOffer,
    Alternation,
    Timing,
    AcceptNotLast,
    AcceptMismatch,
    Deadline,
    RoundCap,
}

impl ViolationRule {
    /// Rule number as listed in the protocol definition ("1a", "3", ...).
    pub fn code(self) -> &'static str {
        match self {
            ViolationRule::Structure => "structure",
            ViolationRule::InvalidOffer => "offer",
            ViolationRule::Alternation => "1a",
            ViolationRule::Timing => "1b",
            ViolationRule::AcceptNotLast => "2",
            ViolationRule::AcceptMismatch => "3",
            ViolationRule::Deadline => "4",
            ViolationRule::RoundCap => "5",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: ViolationRule,
    /// Index of the offending action (0-based, counting actions only).
    pub action_index: usize,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rule {} violated at action {}: {}",
            self.rule.code(),
            self.action_index,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Uniform {
            low: 0.001,
            high: 0.01,
        }
    }
}

impl DelayModel {
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            DelayModel::Constant { value } => value > 0.0 && value.is_finite(),
            DelayModel::Uniform { low, high } => low > 0.0 && low <= high && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "delay model {self:?} must produce finite positive delays"
            )))
        }
    }
}

pub fn sample_delay<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R) -> f64 {
    match *model {
        DelayModel::Constant { value } => value,
        DelayModel::Uniform { low, high } if low == high => low,
        DelayModel::Uniform { low, high } => rng.random_range(low..=high),
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Deadline in seconds; `null` in JSON means no deadline.
    #[serde(with = "infinite_as_null")]
    pub deadline: f64,
    /// Maximum number of actions; `None` means unbounded.
    pub max_rounds: Option<u64>,
    pub delay: DelayModel,
    pub starting_agent: usize,
    pub seed: u64,
    /// Simulated time an agent spends before each action.
    pub think_time: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            deadline: 10.0,
            max_rounds: None,
            delay: DelayModel::default(),
            starting_agent: 1,
            seed: 0,
            think_time: 0.01,
        }
    }
}

impl SessionConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.deadline > 0.0) {
            return Err(Error::Config(format!(
                "deadline {} must be positive",
                self.deadline
            )));
        }
        if self.max_rounds == Some(0) {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if self.starting_agent != 1 && self.starting_agent != 2 {
            return Err(Error::Config("starting_agent must be 1 or 2".into()));
        }
        if !(self.think_time > 0.0 && self.think_time.is_finite()) {
            return Err(Error::Config(
                "think_time must be finite and positive".into(),
            ));
        }
        self.delay.check()
    }
}

/// Checks the protocol rules and reports the first violation found.
pub fn validate_history(
    history: &NegotiationHistory,
    config: &SessionConfig,
    space: &OfferSpace,
) -> std::result::Result<(), Violation> {
    let violation = |rule, action_index, detail: String| {
        Err(Violation {
            rule,
            action_index,
            detail,
        })
    };

    for (i, e) in history.entries.iter().enumerate() {
        let should_be_action = i % 2 == 0;
        match (e, should_be_action) {
            (HistoryEntry::Action(a), true) => {
                if !(a.time >= 0.0 && a.time.is_finite()) {
                    return violation(
                        ViolationRule::Structure,
                        i / 2,
                        format!("bad time {}", a.time),
                    );
                }
                if a.agent != 1 && a.agent != 2 {
                    return violation(
                        ViolationRule::Structure,
                        i / 2,
                        format!("bad agent {}", a.agent),
                    );
                }
                if a.offer >= space.size() {
                    return violation(
                        ViolationRule::InvalidOffer,
                        i / 2,
                        format!("offer id {}", a.offer),
                    );
                }
            }
            (HistoryEntry::Delay(d), false) => {
                if !(*d > 0.0 && d.is_finite()) {
                    return violation(ViolationRule::Structure, i / 2, format!("bad delay {d}"));
                }
            }
            _ => {
                return violation(
                    ViolationRule::Structure,
                    i / 2,
                    "entries must alternate action, delay".into(),
                )
            }
        }
    }

    let steps = history.steps();
    let last = steps.len().saturating_sub(1);
    for (j, &(a, _)) in steps.iter().enumerate() {
        if j > 0 {
            let (prev, prev_delay) = steps[j - 1];
            if prev.agent == a.agent {
                return violation(
                    ViolationRule::Alternation,
                    j,
                    format!("agent {} acts twice", a.agent),
                );
            }
            let arrival = prev.time + prev_delay.expect("non-final steps carry a delay");
            if !(arrival < a.time) {
                return violation(
                    ViolationRule::Timing,
                    j,
                    format!(
                        "previous action arrives at {arrival}, this one is sent at {}",
                        a.time
                    ),
                );
            }
        }
        if a.kind == ActionKind::Accept {
            if j != last {
                return violation(
                    ViolationRule::AcceptNotLast,
                    j,
                    "accept is not the last action".into(),
                );
            }
            match j.checked_sub(1).map(|p| steps[p].0) {
                Some(p) if p.kind == ActionKind::Propose && p.offer == a.offer => {}
                _ => {
                    return violation(
                        ViolationRule::AcceptMismatch,
                        j,
                        "accepted offer differs from the preceding proposal".into(),
                    )
                }
            }
        }
        if a.time > config.deadline {
            return violation(
                ViolationRule::Deadline,
                j,
                format!("time {} exceeds deadline", a.time),
            );
        }
        if let Some(mu) = config.max_rounds {
            if j as u64 >= mu {
                return violation(
                    ViolationRule::RoundCap,
                    j,
                    format!("more than {mu} actions"),
                );
            }
        }
    }
    Ok(())
}

/// The history as seen by `viewer`: opponent actions carry their arrival
/// time, own actions their send time.
pub fn observed_view(history: &NegotiationHistory, viewer: usize) -> Vec<NegotiationAction> {
    history
        .steps()
        .into_iter()
        .map(|(a, delay)| {
            if a.agent == viewer {
                a
            } else {
                NegotiationAction {
                    time: a.time + delay.unwrap_or(0.0),
                    ..a
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Agreement,
    Failure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Agreement => "agreement",
            Status::Failure => "failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: Status,
    pub accepted_offer: Option<OfferId>,
    pub agreement_time: Option<f64>,
    pub payoffs: [f64; 2],
    /// Agent that broke the protocol, if any.
    pub violator: Option<usize>,
}

impl Outcome {
    pub fn failure(domain: &NegotiationDomain) -> Self {
        Outcome {
            status: Status::Failure,
            accepted_offer: None,
            agreement_time: None,
            payoffs: [domain.reservation(1), domain.reservation(2)],
            violator: None,
        }
    }

    pub fn agreement(domain: &NegotiationDomain, offer: OfferId, time: f64) -> Self {
        let pay = |agent| domain.utility(agent, offer) * domain.discount(agent).powf(time);
        Outcome {
            status: Status::Agreement,
            accepted_offer: Some(offer),
            agreement_time: Some(time),
            payoffs: [pay(1), pay(2)],
            violator: None,
        }
    }

    pub fn is_agreement(&self) -> bool {
        self.status == Status::Agreement
    }
}

/// Scores a terminal history. Agreement payoffs are discounted by the send
/// time of the accept.
pub fn outcome_of(
    history: &NegotiationHistory,
    domain: &NegotiationDomain,
    config: &SessionConfig,
) -> Result<Outcome> {
    let steps = history.steps();
    let Some(&(last, delay)) = steps.last() else {
        return if config.think_time > config.deadline {
            Ok(Outcome::failure(domain))
        } else {
            Err(Error::NonTerminal)
        };
    };
    let Some(delay) = delay else {
        return Err(Error::NonTerminal);
    };
    let arrival = last.time + delay;
    let capped = config.max_rounds.is_some_and(|mu| steps.len() as u64 >= mu);
    let terminal = last.kind == ActionKind::Accept
        || capped
        || arrival >= config.deadline
        || arrival + config.think_time > config.deadline;
    if !terminal {
        return Err(Error::NonTerminal);
    }
    if last.kind == ActionKind::Accept && arrival < config.deadline {
        Ok(Outcome::agreement(domain, last.offer, last.time))
    } else {
        Ok(Outcome::failure(domain))
    }
}

/// Insertion-ordered set of offers.
#[derive(Debug, Clone, Default)]
pub struct OfferSet {
    order: Vec<OfferId>,
    members: HashSet<OfferId>,
}

impl OfferSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the offer was not yet present.
    pub fn insert(&mut self, id: OfferId) -> bool {
        let fresh = self.members.insert(id);
        if fresh {
            self.order.push(id);
        }
        fresh
    }

    pub fn contains(&self, id: OfferId) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Members in order of first insertion.
    pub fn iter(&self) -> impl Iterator<Item = OfferId> + '_ {
        self.order.iter().copied()
    }

    pub fn as_slice(&self) -> &[OfferId] {
        &self.order
    }
}

impl FromIterator<OfferId> for OfferSet {
    fn from_iter<I: IntoIterator<Item = OfferId>>(iter: I) -> Self {
        let mut s = OfferSet::new();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

/// Everything an agent may look at when it is its turn.
#[derive(Debug, Clone, Copy)]
pub struct StrategyContext<'a> {
    pub domain: &'a NegotiationDomain,
    /// 1 or 2.
    pub agent: usize,
    /// Time stamp the agent's action will carry.
    pub now: f64,
    pub deadline: f64,
    pub observed: &'a [NegotiationAction],
    pub last_received: Option<OfferId>,
    pub proposed: &'a OfferSet,
    pub received: &'a OfferSet,
}

impl<'a> StrategyContext<'a> {
    pub fn space(&self) -> &'a OfferSpace {
        self.domain.space()
    }

    pub fn utility(&self, id: OfferId) -> f64 {
        self.domain.utility(self.agent, id)
    }

    pub fn utilities(&self) -> &'a [f64] {
        self.domain.table(self.agent)
    }

    pub fn reservation(&self) -> f64 {
        self.domain.reservation(self.agent)
    }

    /// `now / deadline`, or 0 without a deadline.
    pub fn relative_time(&self) -> f64 {
        if self.deadline.is_finite() {
            (self.now / self.deadline).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    Accept,
    Propose(OfferId),
}

/// A negotiating agent. Implementations are single-session and stateful.
pub trait Negotiator: Send {
    fn respond(&mut self, ctx: &StrategyContext<'_>) -> Response;
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub history: NegotiationHistory,
    pub outcome: Outcome,
}

impl SessionResult {
    pub fn rounds(&self) -> usize {
        self.history.num_actions()
    }
}

#[derive(Default)]
struct AgentView {
    observed: Vec<NegotiationAction>,
    last_received: Option<OfferId>,
    proposed: OfferSet,
    received: OfferSet,
}

/// Runs one session of the alternating offers protocol.
///
/// An agent is only invoked if its action can still be sent before the
/// deadline; otherwise the session ends in failure at that point. A
/// malformed response (offer outside the space, or accepting when there is
/// nothing to accept) ends the session in failure with the violator flagged
/// and the action left out of the history.
pub fn run_session(
    domain: &NegotiationDomain,
    agent1: &mut dyn Negotiator,
    agent2: &mut dyn Negotiator,
    config: &SessionConfig,
) -> Result<SessionResult> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, &[0x_de1a_u64]));
    let mut history = NegotiationHistory::new();
    let mut views = [AgentView::default(), AgentView::default()];
    let mut now = 0.0;
    let mut turn = config.starting_agent;
    let mut actions: u64 = 0;

    let outcome = loop {
        let t = now + config.think_time;
        if t > config.deadline {
            break Outcome::failure(domain);
        }
        let me = turn - 1;
        let response = {
            let view = &views[me];
            let ctx = StrategyContext {
                domain,
                agent: turn,
                now: t,
                deadline: config.deadline,
                observed: &view.observed,
                last_received: view.last_received,
                proposed: &view.proposed,
                received: &view.received,
            };
            if turn == 1 {
                agent1.respond(&ctx)
            } else {
                agent2.respond(&ctx)
            }
        };
        let action = match response {
            Response::Propose(id) if id < domain.size() => NegotiationAction::propose(turn, id, t),
            Response::Accept => match history.last_action() {
                Some(prev) if prev.kind == ActionKind::Propose => {
                    NegotiationAction::accept(turn, prev.offer, t)
                }
                _ => {
                    break Outcome {
                        violator: Some(turn),
                        ..Outcome::failure(domain)
                    }
                }
            },
            Response::Propose(_) => {
                break Outcome {
                    violator: Some(turn),
                    ..Outcome::failure(domain)
                }
            }
        };
        let delay = sample_delay(&config.delay, &mut rng);
        history.push_action(action);
        history.push_delay(delay);
        actions += 1;
        let arrival = t + delay;

        let other = 1 - me;
        views[me].observed.push(action);
        views[other].observed.push(NegotiationAction {
            time: arrival,
            ..action
        });
        if action.kind == ActionKind::Propose {
            views[me].proposed.insert(action.offer);
            views[other].received.insert(action.offer);
            views[other].last_received = Some(action.offer);
        } else {
            break if arrival < config.deadline {
                Outcome::agreement(domain, action.offer, t)
            } else {
                Outcome::failure(domain)
            };
        }
        if config.max_rounds.is_some_and(|mu| actions >= mu) || arrival >= config.deadline {
            break Outcome::failure(domain);
        }
        now = arrival;
        turn = 3 - turn;
    };
    Ok(SessionResult { history, outcome })
}

/// Writes the history as `agent,kind,offer_key,t,epsilon` lines.
pub fn write_history_csv<W: Write>(
    history: &NegotiationHistory,
    space: &OfferSpace,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "kind", "offer_key", "t", "epsilon"])?;
    for (a, delay) in history.steps() {
        w.write_record([
            a.agent.to_string(),
            a.kind.as_str().to_string(),
            space.key(a.offer),
            a.time.to_string(),
            delay.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv<R: Read>(input: R, space: &OfferSpace) -> Result<NegotiationHistory> {
    let mut r = csv::Reader::from_reader(input);
    let mut history = NegotiationHistory::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Config(format!("history line {}: bad {what}", line + 2));
        if rec.len() != 5 {
            return Err(bad("field count"));
        }
        let agent = rec[0].trim().parse::<usize>().map_err(|_| bad("agent"))?;
        let kind = match rec[1].trim() {
            "propose" => ActionKind::Propose,
            "accept" => ActionKind::Accept,
            _ => return Err(bad("kind")),
        };
        let offer = space.parse_key(&rec[2])?;
        let time = rec[3].trim().parse::<f64>().map_err(|_| bad("time"))?;
        history.push_action(NegotiationAction {
            agent,
            kind,
            offer,
            time,
        });
        let eps = rec[4].trim();
        if !eps.is_empty() {
            history.push_delay(eps.parse::<f64>().map_err(|_| bad("epsilon"))?);
        }
    }
    Ok(history)
}
