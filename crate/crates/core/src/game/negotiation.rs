use crate::domain::{individually_rational, pareto_set, NegotiationDomain, OfferId, UtilityVector};
use crate::error::Result;
use crate::protocol::{run_session, DelayModel, SessionConfig};
use crate::strategy::{AcceptanceRule, AspirationFunction, BidMode, BoaAgent, TimeBased};

/// Tolerance on the agreed utility vector.
pub const AGREEMENT_TOLERANCE: f64 = 1e-12;
/// Largest gain a deviation may achieve before counting as improving.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

/// One agent replacing its target and curvature while the other keeps the
/// equilibrium strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub agent: usize,
    pub target: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationResult {
    pub deviation: Deviation,
    pub payoff: f64,
    pub baseline: f64,
}

impl DeviationResult {
    pub fn improves(&self) -> bool {
        self.payoff > self.baseline + IMPROVEMENT_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeReport {
    pub target: OfferId,
    /// Reason the check could not run, if any.
    pub precondition_failure: Option<String>,
    pub agreement: Option<UtilityVector>,
    pub baseline_ok: bool,
    pub deviations: Vec<DeviationResult>,
}

impl NeReport {
    pub fn passed(&self) -> bool {
        self.precondition_failure.is_none()
            && self.baseline_ok
            && self.deviations.iter().all(|d| !d.improves())
    }
}

/// Session settings for the check: no round cap, constant delays and a
/// deadline long enough for both agents to act after the target time.
pub fn ne_check_config() -> SessionConfig {
    SessionConfig {
        deadline: 5.0,
        max_rounds: None,
        delay: DelayModel::Constant { value: 0.01 },
        starting_agent: 1,
        seed: 0,
        think_time: 0.01,
    }
}

/// Five target offsets crossed with four curvatures for `agent`, targets
/// clipped to `[reservation, 0.999]`.
pub fn default_deviation_grid(
    domain: &NegotiationDomain,
    target: OfferId,
    agent: usize,
) -> Vec<Deviation> {
    let base = domain.utility(agent, target);
    let r = domain.reservation(agent);
    let mut out = Vec::with_capacity(20);
    for offset in [-0.3, -0.1, 0.05, 0.15, 0.4] {
        for gamma in [0.1, 0.5, 1.0, 2.0] {
            let t = (base + offset).clamp(r, 0.999);
            out.push(Deviation {
                agent,
                target: t,
                gamma,
            });
        }
    }
    out
}

const EQUILIBRIUM_GAMMA: f64 = 0.2;
const TARGET_FRACTION: f64 = 0.95;

fn time_based(
    domain: &NegotiationDomain,
    agent: usize,
    target: f64,
    gamma: f64,
    deadline: f64,
) -> Result<BoaAgent> {
    let alpha = domain
        .table(agent)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let target_time = deadline.is_finite().then(|| TARGET_FRACTION * deadline);
    let aspiration =
        AspirationFunction::new(alpha, target.min(alpha), gamma, deadline, target_time)?;
    Ok(BoaAgent::new(
        Box::new(TimeBased {
            aspiration,
            mode: BidMode::MinOwn,
        }),
        None,
        AcceptanceRule::asp(),
        false,
    ))
}

fn play(
    domain: &NegotiationDomain,
    targets: [f64; 2],
    gammas: [f64; 2],
    config: &SessionConfig,
) -> Result<(Option<UtilityVector>, [f64; 2])> {
    let mut a1 = time_based(domain, 1, targets[0], gammas[0], config.deadline)?;
    let mut a2 = time_based(domain, 2, targets[1], gammas[1], config.deadline)?;
    let result = run_session(domain, &mut a1, &mut a2, config)?;
    let agreed = result.outcome.accepted_offer.map(|id| domain.vector(id));
    Ok((agreed, result.outcome.payoffs))
}

/// Runs the pair of time-based strategies that should agree on `target`
/// and checks that no listed unilateral deviation pays off. This samples
/// deviations; it cannot prove the absence of a profitable one.
pub fn negotiation_ne_check(
    domain: &NegotiationDomain,
    target: OfferId,
    deviations: &[Deviation],
    config: &SessionConfig,
) -> Result<NeReport> {
    let mut report = NeReport {
        target,
        precondition_failure: None,
        agreement: None,
        baseline_ok: false,
        deviations: Vec::new(),
    };
    let fail = |mut r: NeReport, why: String| {
        r.precondition_failure = Some(why);
        Ok(r)
    };
    if target >= domain.size() {
        return fail(report, format!("offer {target} is not in the domain"));
    }
    if !pareto_set(domain).contains(&target) {
        return fail(report, format!("offer {target} is not Pareto-optimal"));
    }
    if !individually_rational(domain, target) {
        return fail(
            report,
            format!("offer {target} is not individually rational"),
        );
    }
    if domain.discount(1) != 1.0 || domain.discount(2) != 1.0 {
        return fail(report, "the check assumes undiscounted utilities".into());
    }
    if !config.deadline.is_finite() {
        return fail(report, "the check needs a finite deadline".into());
    }
    if let Some(cap) = config.max_rounds {
        if cap < 2 * domain.size() as u64 + 2 {
            return fail(report, format!("round cap {cap} is below 2|offers|+2"));
        }
    }

    let goal = domain.vector(target);
    let (agreed, baseline) = play(domain, goal, [EQUILIBRIUM_GAMMA; 2], config)?;
    report.agreement = agreed;
    report.baseline_ok = agreed.is_some_and(|v| {
        (v[0] - goal[0]).abs() <= AGREEMENT_TOLERANCE
            && (v[1] - goal[1]).abs() <= AGREEMENT_TOLERANCE
    });

    for &d in deviations {
        let k = d.agent - 1;
        let mut targets = goal;
        let mut gammas = [EQUILIBRIUM_GAMMA; 2];
        targets[k] = d.target;
        gammas[k] = d.gamma;
        let (_, payoffs) = play(domain, targets, gammas, config)?;
        report.deviations.push(DeviationResult {
            deviation: d,
            payoff: payoffs[k],
            baseline: baseline[k],
        });
    }
    Ok(report)
}
