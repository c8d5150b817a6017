use super::{
    argmax_by, aspiration_value, select_bid_timebased, AspirationFunction, Bid, BidMode,
    BiddingStrategy,
};
use crate::domain::OfferId;
use crate::model::{optimal_target, GpPredictor, OpponentModel};
use crate::protocol::{ActionKind, StrategyContext};

/// Target level: the estimated best achievable utility plus a safety
/// margin, but never below `minimum_target`.
pub fn adaptive_target(estimated_optimal: f64, safety: f64, minimum_target: f64) -> f64 {
    (estimated_optimal + safety).max(minimum_target)
}

/// Best offer for us among those the opponent would still accept, judging
/// by its estimated utility and estimated final demand. The flag is true
/// when no offer meets the demand and the offer best for the opponent is
/// returned instead.
pub fn estimate_optimal_offer(
    own: &[f64],
    opponent_estimate: &[f64],
    opponent_target: f64,
) -> (OfferId, bool) {
    let feasible = (0..own.len()).filter(|&id| opponent_estimate[id] >= opponent_target);
    match argmax_by(feasible, |id| own[id]) {
        Some(id) => (id, false),
        None => (
            argmax_by(0..own.len(), |id| opponent_estimate[id]).expect("non-empty space"),
            true,
        ),
    }
}

/// Least-squares line through `(time, value)` points evaluated at
/// `horizon`. One point gives that point's value; none gives `None`.
pub fn extrapolate_target(points: &[(f64, f64)], horizon: f64) -> Option<f64> {
    let n = points.len() as f64;
    match points.len() {
        0 => None,
        1 => Some(points[0].1),
        _ => {
            let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
            let mv = points.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
            if sxx == 0.0 {
                return Some(mv);
            }
            let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
            Some(mv + sxy / sxx * (horizon - mt))
        }
    }
}

pub enum TargetEstimator {
    /// Extrapolate the opponent's concessions in its estimated utility.
    Model,
    /// Predict the utility the opponent will offer us at the deadline.
    Gp(GpPredictor),
}

/// Time-based bidding whose target is re-estimated every turn.
pub struct Adaptive {
    pub alpha: f64,
    pub gamma: f64,
    pub minimum_target: f64,
    /// Safety margin at time 0; it shrinks linearly to 0 at the deadline.
    pub safety: f64,
    /// Fraction of the deadline at which the target is reached.
    pub target_fraction: f64,
    pub mode: BidMode,
    pub estimator: TargetEstimator,
    /// Utility grid for the GP target search.
    pub grid: Vec<f64>,
    pub last_target: Option<f64>,
}

impl Adaptive {
    fn estimated_optimum(
        &mut self,
        ctx: &StrategyContext<'_>,
        model: Option<&dyn OpponentModel>,
    ) -> f64 {
        let horizon = if ctx.deadline.is_finite() {
            ctx.deadline
        } else {
            ctx.now
        };
        let received = ctx
            .observed
            .iter()
            .filter(|a| a.agent != ctx.agent && a.kind == ActionKind::Propose);
        match (&mut self.estimator, model) {
            (TargetEstimator::Gp(gp), _) => {
                let obs: Vec<(f64, f64)> =
                    received.map(|a| (a.time, ctx.utility(a.offer))).collect();
                match gp.fit(&obs) {
                    Ok(()) => optimal_target(gp, horizon, &self.grid).unwrap_or(self.alpha),
                    Err(_) => self.alpha,
                }
            }
            (TargetEstimator::Model, Some(m)) => {
                let est = m.estimates();
                let pts: Vec<(f64, f64)> = received.map(|a| (a.time, est[a.offer])).collect();
                let opp_target = extrapolate_target(&pts, horizon).unwrap_or(f64::NEG_INFINITY);
                ctx.utility(estimate_optimal_offer(ctx.utilities(), est, opp_target).0)
            }
            (TargetEstimator::Model, None) => self.alpha,
        }
    }
}

impl BiddingStrategy for Adaptive {
    fn bid(&mut self, ctx: &StrategyContext<'_>, model: Option<&dyn OpponentModel>) -> Bid {
        let rel = ctx.relative_time();
        let optimum = self.estimated_optimum(ctx, model);
        let safety = self.safety * (1.0 - rel);
        let target = adaptive_target(optimum, safety, self.minimum_target).min(self.alpha);
        self.last_target = Some(target);
        let target_time = ctx
            .deadline
            .is_finite()
            .then(|| self.target_fraction * ctx.deadline);
        let f = AspirationFunction::new(self.alpha, target, self.gamma, ctx.deadline, target_time)
            .expect("parameters validated at construction");
        let asp = aspiration_value(&f, ctx.now.min(ctx.deadline)).expect("time within session");
        let offer = select_bid_timebased(
            ctx.utilities(),
            model.map(|m| m.estimates()),
            ctx.proposed,
            asp,
            self.mode,
        );
        Bid {
            offer,
            aspiration: Some(asp),
        }
    }
}
