//! Offer spaces, utility functions and domain-level analytics.
//!
//! Offers are identified internally by a dense id: the position of the
//! offer in lexicographic order of its option indices (first issue most
//! significant). Lowest id therefore means lexicographically first, which is
//! the tie-break used by every argmax/argmin in the crate.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type OfferId = usize;

/// Utilities of one offer for agent 1 and agent 2.
pub type UtilityVector = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub name: String,
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ordered: bool,
}

impl Issue {
    pub fn new(name: impl Into<String>, options: Vec<String>, ordered: bool) -> Result<Self> {
        let issue = Issue {
            name: name.into(),
            options,
            ordered,
        };
        issue.check()?;
        Ok(issue)
    }

    /// An issue whose options are labelled `0..n`.
    pub fn numbered(name: impl Into<String>, n: usize) -> Result<Self> {
        Self::new(name, (0..n).map(|i| i.to_string()).collect(), true)
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.options.is_empty() {
            return Err(Error::InvalidDomain(format!(
                "issue '{}' has no options",
                self.name
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for o in &self.options {
            if !seen.insert(o) {
                return Err(Error::InvalidDomain(format!(
                    "issue '{}' repeats option '{}'",
                    self.name, o
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Offer {
    pub choices: Vec<usize>,
}

impl Offer {
    pub fn new(choices: Vec<usize>) -> Self {
        Offer { choices }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfferSpace {
    issues: Vec<Issue>,
    strides: Vec<usize>,
    size: usize,
}

impl OfferSpace {
    pub fn new(issues: Vec<Issue>) -> Result<Self> {
        if issues.is_empty() {
            return Err(Error::InvalidDomain(
                "offer space needs at least one issue".into(),
            ));
        }
        for issue in &issues {
            issue.check()?;
        }
        let mut strides = vec![1; issues.len()];
        let mut size: usize = 1;
        for j in (0..issues.len()).rev() {
            strides[j] = size;
            size = size
                .checked_mul(issues[j].len())
                .ok_or_else(|| Error::TooLarge("offer space size overflows".into()))?;
        }
        Ok(OfferSpace {
            issues,
            strides,
            size,
        })
    }

    pub fn issues(&self) -> &[Issue] {
        &self.issues
    }

    pub fn num_issues(&self) -> usize {
        self.issues.len()
    }

    pub fn issue_sizes(&self) -> Vec<usize> {
        self.issues.iter().map(Issue::len).collect()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn id_of(&self, offer: &Offer) -> Result<OfferId> {
        if offer.choices.len() != self.issues.len() {
            return Err(Error::InvalidOffer(format!(
                "offer has {} choices, space has {} issues",
                offer.choices.len(),
                self.issues.len()
            )));
        }
        let mut id = 0;
        for (j, &c) in offer.choices.iter().enumerate() {
            if c >= self.issues[j].len() {
                return Err(Error::InvalidOffer(format!(
                    "option {} out of range for issue '{}' ({} options)",
                    c,
                    self.issues[j].name,
                    self.issues[j].len()
                )));
            }
            id += c * self.strides[j];
        }
        Ok(id)
    }

    pub fn offer(&self, id: OfferId) -> Offer {
        Offer {
            choices: self.choices(id).collect(),
        }
    }

    /// Option index chosen for issue `issue` by offer `id`.
    pub fn choice(&self, id: OfferId, issue: usize) -> usize {
        (id / self.strides[issue]) % self.issues[issue].len()
    }

    pub fn choices(&self, id: OfferId) -> impl Iterator<Item = usize> + '_ {
        (0..self.issues.len()).map(move |j| self.choice(id, j))
    }

    /// Offer key used in files: option indices joined by '/'.
    pub fn key(&self, id: OfferId) -> String {
        self.choices(id)
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn parse_key(&self, key: &str) -> Result<OfferId> {
        let choices = key
            .split('/')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidOffer(format!("bad offer key '{key}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.id_of(&Offer::new(choices))
    }

    /// Human readable option labels of an offer.
    pub fn describe(&self, id: OfferId) -> String {
        self.choices(id)
            .enumerate()
            .map(|(j, c)| self.issues[j].options[c].as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn offer_space_size(space: &OfferSpace) -> usize {
    space.size()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearUtility {
    pub weights: Vec<f64>,
    pub evaluations: Vec<Vec<f64>>,
}

impl LinearUtility {
    pub fn new(weights: Vec<f64>, evaluations: Vec<Vec<f64>>) -> Result<Self> {
        let u = LinearUtility {
            weights,
            evaluations,
        };
        u.check_weights()?;
        Ok(u)
    }

    /// Skips the sum-to-one check; used for opponent hypotheses whose
    /// weights are drawn independently per issue.
    pub fn unchecked(weights: Vec<f64>, evaluations: Vec<Vec<f64>>) -> Self {
        LinearUtility {
            weights,
            evaluations,
        }
    }

    fn check_weights(&self) -> Result<()> {
        if self.weights.len() != self.evaluations.len() {
            return Err(Error::InvalidDomain(
                "weights and evaluations differ in length".into(),
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDomain(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDomain(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    fn check_space(&self, space: &OfferSpace) -> Result<()> {
        if self.evaluations.len() != space.num_issues() {
            return Err(Error::InvalidDomain(
                "utility issue count does not match space".into(),
            ));
        }
        for (j, ev) in self.evaluations.iter().enumerate() {
            if ev.len() != space.issues()[j].len() {
                return Err(Error::InvalidDomain(format!(
                    "issue {j}: {} evaluations for {} options",
                    ev.len(),
                    space.issues()[j].len()
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, choices: impl Iterator<Item = usize>) -> f64 {
        choices
            .zip(self.weights.iter().zip(&self.evaluations))
            .map(|(c, (w, ev))| w * ev[c])
            .sum()
    }

    /// Every evaluation in [0,1] with at least one 0 and one 1 per issue.
    pub fn is_normalized(&self) -> bool {
        self.evaluations.iter().all(|ev| {
            ev.iter().all(|v| (0.0..=1.0).contains(v)) && ev.contains(&0.0) && ev.contains(&1.0)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularUtility {
    /// Value per offer id.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    Linear(LinearUtility),
    Tabular(TabularUtility),
}

impl Utility {
    pub fn value(&self, space: &OfferSpace, id: OfferId) -> f64 {
        match self {
            Utility::Linear(l) => l.value(space.choices(id)),
            Utility::Tabular(t) => t.values[id],
        }
    }

    pub fn table(&self, space: &OfferSpace) -> Vec<f64> {
        (0..space.size()).map(|id| self.value(space, id)).collect()
    }

    fn check_space(&self, space: &OfferSpace) -> Result<()> {
        match self {
            Utility::Linear(l) => l.check_space(space),
            Utility::Tabular(t) if t.values.len() != space.size() => {
                Err(Error::InvalidDomain(format!(
                    "table has {} values for {} offers",
                    t.values.len(),
                    space.size()
                )))
            }
            Utility::Tabular(_) => Ok(()),
        }
    }
}

/// Rescales a utility to [0,1] over the space: (u - min) / (max - min).
///
/// The result is tabular so that the minimum is exactly 0 and the maximum
/// exactly 1.
pub fn normalize_utility(utility: &Utility, space: &OfferSpace) -> Result<Utility> {
    let table = utility.table(space);
    let (lo, hi) = min_max(&table);
    if hi <= lo {
        return Err(Error::DegenerateUtility(lo));
    }
    let values = table.iter().map(|u| (u - lo) / (hi - lo)).collect();
    Ok(Utility::Tabular(TabularUtility { values }))
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentProfile {
    pub utility: Utility,
    pub reservation_value: f64,
    pub discount_factor: f64,
}

impl AgentProfile {
    pub fn new(utility: Utility, reservation_value: f64, discount_factor: f64) -> Self {
        AgentProfile {
            utility,
            reservation_value,
            discount_factor,
        }
    }
}

/// Two-agent negotiation domain. Utility values are cached per offer id.
#[derive(Debug, Clone)]
pub struct NegotiationDomain {
    space: Arc<OfferSpace>,
    agents: [AgentProfile; 2],
    tables: [Arc<[f64]>; 2],
}

impl NegotiationDomain {
    pub fn new(space: OfferSpace, agent1: AgentProfile, agent2: AgentProfile) -> Result<Self> {
        for a in [&agent1, &agent2] {
            a.utility.check_space(&space)?;
            if !(a.discount_factor > 0.0 && a.discount_factor <= 1.0) {
                return Err(Error::InvalidDomain(format!(
                    "discount factor {} not in (0,1]",
                    a.discount_factor
                )));
            }
            if a.reservation_value.is_nan() {
                return Err(Error::InvalidDomain("reservation value is NaN".into()));
            }
        }
        let tables = [
            Arc::from(agent1.utility.table(&space)),
            Arc::from(agent2.utility.table(&space)),
        ];
        Ok(NegotiationDomain {
            space: Arc::new(space),
            agents: [agent1, agent2],
            tables,
        })
    }

    pub fn space(&self) -> &OfferSpace {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<OfferSpace> {
        Arc::clone(&self.space)
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    /// `agent` is 1 or 2.
    pub fn agent(&self, agent: usize) -> &AgentProfile {
        &self.agents[agent - 1]
    }

    /// Cached utility table of `agent` (1 or 2), indexed by offer id.
    pub fn table(&self, agent: usize) -> &Arc<[f64]> {
        &self.tables[agent - 1]
    }

    pub fn utility(&self, agent: usize, id: OfferId) -> f64 {
        self.tables[agent - 1][id]
    }

    pub fn vector(&self, id: OfferId) -> UtilityVector {
        [self.tables[0][id], self.tables[1][id]]
    }

    pub fn reservation(&self, agent: usize) -> f64 {
        self.agents[agent - 1].reservation_value
    }

    pub fn discount(&self, agent: usize) -> f64 {
        self.agents[agent - 1].discount_factor
    }

    pub fn with_reservations(&self, r1: f64, r2: f64) -> Self {
        let mut d = self.clone();
        d.agents[0].reservation_value = r1;
        d.agents[1].reservation_value = r2;
        d
    }

    pub fn with_discounts(&self, d1: f64, d2: f64) -> Result<Self> {
        let [a1, a2] = self.agents.clone();
        NegotiationDomain::new(
            (*self.space).clone(),
            AgentProfile {
                discount_factor: d1,
                ..a1
            },
            AgentProfile {
                discount_factor: d2,
                ..a2
            },
        )
    }

    /// Both utilities have minimum 0 and maximum 1 (within 1e-9).
    pub fn is_normalized(&self) -> bool {
        self.tables.iter().all(|t| {
            let (lo, hi) = min_max(t);
            lo.abs() <= 1e-9 && (hi - 1.0).abs() <= 1e-9
        })
    }
}

pub fn evaluate_utility(domain: &NegotiationDomain, agent: usize, offer: &Offer) -> Result<f64> {
    check_agent(agent)?;
    let id = domain.space().id_of(offer)?;
    Ok(domain.utility(agent, id))
}

pub fn discounted_utility(
    domain: &NegotiationDomain,
    agent: usize,
    offer: &Offer,
    time: f64,
) -> Result<f64> {
    if !(time >= 0.0) {
        return Err(Error::Range(format!("time {time} is negative")));
    }
    let u = evaluate_utility(domain, agent, offer)?;
    Ok(u * domain.discount(agent).powf(time))
}

fn check_agent(agent: usize) -> Result<()> {
    if agent == 1 || agent == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("agent index {agent} must be 1 or 2")))
    }
}

/// `a` dominates `b`: weakly better for both agents, strictly for one.
pub fn vector_dominates(a: UtilityVector, b: UtilityVector) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

pub fn dominates(domain: &NegotiationDomain, a: OfferId, b: OfferId) -> bool {
    vector_dominates(domain.vector(a), domain.vector(b))
}

/// Ids of all Pareto-optimal offers, ascending.
pub fn pareto_set(domain: &NegotiationDomain) -> Vec<OfferId> {
    let vectors: Vec<UtilityVector> = (0..domain.size()).map(|id| domain.vector(id)).collect();
    pareto_indices(&vectors)
}

/// Indices of the non-dominated vectors, ascending.
///
/// Sort by first utility descending; within a block of equal first utility
/// only the block maximum of the second utility can survive, and it survives
/// iff it beats every second utility seen in earlier blocks.
pub fn pareto_indices(vectors: &[UtilityVector]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| {
        vectors[b][0]
            .total_cmp(&vectors[a][0])
            .then(vectors[b][1].total_cmp(&vectors[a][1]))
    });
    let mut best_second = f64::NEG_INFINITY;
    let mut out = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let first = vectors[order[i]][0];
        let block_max = vectors[order[i]][1];
        let mut k = i;
        while k < order.len() && vectors[order[k]][0] == first {
            if vectors[order[k]][1] == block_max && block_max > best_second {
                out.push(order[k]);
            }
            k += 1;
        }
        best_second = best_second.max(block_max);
        i = k;
    }
    out.sort_unstable();
    out
}

pub fn individually_rational(domain: &NegotiationDomain, id: OfferId) -> bool {
    domain.utility(1, id) > domain.reservation(1) && domain.utility(2, id) > domain.reservation(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OppositionMeasure {
    Euclidean,
    MinUtility,
    KalaiEuclidean,
}

impl OppositionMeasure {
    pub const ALL: [OppositionMeasure; 3] = [
        OppositionMeasure::Euclidean,
        OppositionMeasure::MinUtility,
        OppositionMeasure::KalaiEuclidean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OppositionMeasure::Euclidean => "euclidean",
            OppositionMeasure::MinUtility => "min_utility",
            OppositionMeasure::KalaiEuclidean => "kalai_euclidean",
        }
    }
}

fn distance_to_utopia(v: UtilityVector) -> f64 {
    ((1.0 - v[0]).powi(2) + (1.0 - v[1]).powi(2)).sqrt()
}

pub fn opposition(domain: &NegotiationDomain, measure: OppositionMeasure) -> Result<f64> {
    if !domain.is_normalized() {
        return Err(Error::Precondition(
            "opposition requires normalized utilities".into(),
        ));
    }
    let n = domain.size();
    Ok(match measure {
        OppositionMeasure::Euclidean => (0..n)
            .map(|id| distance_to_utopia(domain.vector(id)))
            .fold(f64::INFINITY, f64::min),
        OppositionMeasure::MinUtility => (0..n)
            .map(|id| {
                let v = domain.vector(id);
                1.0 - v[0].min(v[1])
            })
            .fold(f64::INFINITY, f64::min),
        OppositionMeasure::KalaiEuclidean => {
            let pareto = pareto_set(domain);
            let best = pareto
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let (va, vb) = (domain.vector(a), domain.vector(b));
                    (va[0] - va[1])
                        .abs()
                        .total_cmp(&(vb[0] - vb[1]).abs())
                        .then((vb[0] + vb[1]).total_cmp(&(va[0] + va[1])))
                        .then(a.cmp(&b))
                })
                .expect("finite domains have a non-empty Pareto set");
            distance_to_utopia(domain.vector(best))
        }
    })
}

/// Single-issue domain where agent 1 gets k/(n-1) and agent 2 the rest.
pub fn generate_split_the_pie(num_offers: usize) -> Result<NegotiationDomain> {
    if num_offers < 2 {
        return Err(Error::Precondition(
            "split-the-pie needs at least 2 offers".into(),
        ));
    }
    let issue = Issue::numbered("share", num_offers)?;
    let space = OfferSpace::new(vec![issue])?;
    let denom = (num_offers - 1) as f64;
    let ev1: Vec<f64> = (0..num_offers).map(|k| k as f64 / denom).collect();
    let ev2: Vec<f64> = ev1.iter().map(|u| 1.0 - u).collect();
    NegotiationDomain::new(
        space,
        AgentProfile::new(
            Utility::Linear(LinearUtility::new(vec![1.0], vec![ev1])?),
            0.0,
            1.0,
        ),
        AgentProfile::new(
            Utility::Linear(LinearUtility::new(vec![1.0], vec![ev2])?),
            0.0,
            1.0,
        ),
    )
}

/// Random domain with two normalized linear utilities.
///
/// `opposition_hint` in [0,1] blends agent 2's evaluations between a copy of
/// agent 1's (0), independent noise (0.5) and the mirror image `1 - v` (1).
pub fn generate_random_linear_domain(
    num_issues: usize,
    options_per_issue: usize,
    seed: u64,
    opposition_hint: f64,
) -> Result<NegotiationDomain> {
    generate_random_linear_domain_sizes(&vec![options_per_issue; num_issues], seed, opposition_hint)
}

pub fn generate_random_linear_domain_sizes(
    sizes: &[usize],
    seed: u64,
    opposition_hint: f64,
) -> Result<NegotiationDomain> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Precondition(
            "issue count and sizes must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&opposition_hint) {
        return Err(Error::Range(format!(
            "opposition hint {opposition_hint} not in [0,1]"
        )));
    }
    let h = opposition_hint;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let issues = sizes
        .iter()
        .enumerate()
        .map(|(j, &k)| Issue::numbered(format!("issue{}", j + 1), k))
        .collect::<Result<Vec<_>>>()?;
    let space = OfferSpace::new(issues)?;

    let mut ev1 = Vec::with_capacity(sizes.len());
    let mut ev2 = Vec::with_capacity(sizes.len());
    let noise_scale = 1.0 - (1.0 - 2.0 * h).abs();
    for &k in sizes {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let v1 = rescale_unit(&raw);
        let v2_raw: Vec<f64> = v1
            .iter()
            .map(|&v| (1.0 - h) * v + h * (1.0 - v) + noise_scale * rng.random::<f64>())
            .collect();
        let v2 = if h == 0.0 {
            v1.clone()
        } else {
            rescale_unit(&v2_raw)
        };
        ev1.push(v1);
        ev2.push(v2);
    }
    let w1 = random_weights(&mut rng, sizes.len());
    let w_other = random_weights(&mut rng, sizes.len());
    let w2 = if h == 0.0 {
        w1.clone()
    } else {
        let mixed: Vec<f64> = w1
            .iter()
            .zip(&w_other)
            .map(|(a, b)| (1.0 - h) * a + h * b)
            .collect();
        normalize_weights(&mixed)
    };
    NegotiationDomain::new(
        space,
        AgentProfile::new(Utility::Linear(LinearUtility::new(w1, ev1)?), 0.0, 1.0),
        AgentProfile::new(Utility::Linear(LinearUtility::new(w2, ev2)?), 0.0, 1.0),
    )
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * rng.random::<f64>()).collect();
    normalize_weights(&raw)
}

fn normalize_weights(raw: &[f64]) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

/// Maps values affinely onto [0,1]; a constant vector becomes all ones.
fn rescale_unit(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(values);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![1.0; values.len()]
    }
}
