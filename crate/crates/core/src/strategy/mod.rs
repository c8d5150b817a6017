//! Negotiation strategies built from a bidding strategy, an optional
//! opponent model and an acceptance rule.

mod acceptance;
mod adaptive;
mod aspiration;
mod micro;
mod random;
mod spec;
mod tft;
mod timebased;

pub use acceptance::{decide_accept, AcceptanceKind, AcceptanceRule};
pub use adaptive::{
    adaptive_target, estimate_optimal_offer, extrapolate_target, Adaptive, TargetEstimator,
};
pub use aspiration::{aspiration_value, AspirationFunction};
pub use micro::{micro_decide, Micro, MicroState};
pub use random::RandomBidder;
pub use spec::{parse_call, parse_model, SpecCall, SpecValue, StrategyKind, StrategySpec};
pub use tft::{tft_concession_gain, tft_select_bid, ConcessionMeasure, Selector, Tft, TftConfig};
pub use timebased::{select_bid_timebased, BidMode, TimeBased};

use crate::domain::OfferId;
use crate::model::OpponentModel;
use crate::protocol::{ActionKind, Negotiator, Response, StrategyContext};

/// Offer chosen by a bidding strategy, with the aspiration level it was
/// chosen under, if the strategy has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub offer: OfferId,
    pub aspiration: Option<f64>,
}

pub trait BiddingStrategy: Send {
    fn bid(&mut self, ctx: &StrategyContext<'_>, model: Option<&dyn OpponentModel>) -> Bid;
}

/// Lowest id among the maximizers of `score` over `ids`.
pub(crate) fn argmax_by<I, F>(ids: I, score: F) -> Option<OfferId>
where
    I: IntoIterator<Item = OfferId>,
    F: Fn(OfferId) -> f64,
{
    let mut best: Option<(OfferId, f64)> = None;
    for id in ids {
        let s = score(id);
        match best {
            Some((bid, bs)) if s < bs || (s == bs && id > bid) => {}
            _ => best = Some((id, s)),
        }
    }
    best.map(|(id, _)| id)
}

/// Own-utility maximal offer among the ones already proposed, or the
/// overall maximum if nothing has been proposed yet.
pub(crate) fn best_repeat(ctx: &StrategyContext<'_>) -> OfferId {
    argmax_by(ctx.proposed.iter(), |id| ctx.utility(id))
        .or_else(|| argmax_by(0..ctx.domain.size(), |id| ctx.utility(id)))
        .expect("offer spaces are non-empty")
}

/// Replaces `chosen` by the best offer the opponent proposed that we have
/// not proposed ourselves, when that offer is at least as good for us.
pub fn repropose_filter(ctx: &StrategyContext<'_>, chosen: OfferId) -> OfferId {
    let candidate = argmax_by(
        ctx.received.iter().filter(|&id| !ctx.proposed.contains(id)),
        |id| ctx.utility(id),
    );
    match candidate {
        Some(rep) if ctx.utility(rep) >= ctx.utility(chosen) => rep,
        _ => chosen,
    }
}

/// Agent assembled from the three components.
pub struct BoaAgent {
    bidding: Box<dyn BiddingStrategy>,
    model: Option<Box<dyn OpponentModel>>,
    acceptance: AcceptanceRule,
    repropose: bool,
    seen: usize,
}

impl BoaAgent {
    pub fn new(
        bidding: Box<dyn BiddingStrategy>,
        model: Option<Box<dyn OpponentModel>>,
        acceptance: AcceptanceRule,
        repropose: bool,
    ) -> Self {
        BoaAgent {
            bidding,
            model,
            acceptance,
            repropose,
            seen: 0,
        }
    }

    pub fn model(&self) -> Option<&dyn OpponentModel> {
        self.model.as_deref()
    }
}

impl Negotiator for BoaAgent {
    fn respond(&mut self, ctx: &StrategyContext<'_>) -> Response {
        if let Some(model) = self.model.as_mut() {
            for a in &ctx.observed[self.seen..] {
                if a.agent != ctx.agent && a.kind == ActionKind::Propose {
                    model.observe(a.offer, a.time);
                }
            }
        }
        self.seen = ctx.observed.len();

        let mut bid = self.bidding.bid(ctx, self.model.as_deref());
        if self.repropose {
            bid.offer = repropose_filter(ctx, bid.offer);
        }
        if let Some(rec) = ctx.last_received {
            let min_proposed = ctx
                .proposed
                .iter()
                .map(|id| ctx.utility(id))
                .reduce(f64::min);
            let accept = decide_accept(
                &self.acceptance,
                ctx.utility(rec),
                Some(ctx.utility(bid.offer)),
                bid.aspiration,
                min_proposed,
            )
            // the only missing input at run time is "nothing proposed yet" for AC_low
            .unwrap_or(false);
            if accept {
                return Response::Accept;
            }
        }
        Response::Propose(bid.offer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_split_the_pie;
    use crate::protocol::OfferSet;

    fn ctx<'a>(
        d: &'a crate::domain::NegotiationDomain,
        proposed: &'a OfferSet,
        received: &'a OfferSet,
    ) -> StrategyContext<'a> {
        StrategyContext {
            domain: d,
            agent: 1,
            now: 0.5,
            deadline: 1.0,
            observed: &[],
            last_received: received.as_slice().last().copied(),
            proposed,
            received,
        }
    }

    #[test]
    fn repropose_trace() {
        // ids 0..=10 give agent 1 utility id/10
        let d = generate_split_the_pie(11).unwrap();
        let proposed: OfferSet = [10, 9, 8].into_iter().collect();
        let received: OfferSet = [4, 6, 2].into_iter().collect();
        let c = ctx(&d, &proposed, &received);
        assert_eq!(repropose_filter(&c, 5), 6);
        assert_eq!(repropose_filter(&c, 6), 6);
        assert_eq!(repropose_filter(&c, 7), 7);
    }

    #[test]
    fn repropose_needs_unproposed_received_offer() {
        let d = generate_split_the_pie(11).unwrap();
        let proposed: OfferSet = [10, 6].into_iter().collect();
        let received: OfferSet = [6].into_iter().collect();
        assert_eq!(repropose_filter(&ctx(&d, &proposed, &received), 3), 3);
    }

    #[test]
    fn repropose_tie_prefers_received() {
        let d = generate_split_the_pie(11)
            .unwrap()
            .with_reservations(0.0, 0.0);
        let proposed: OfferSet = [10].into_iter().collect();
        let received: OfferSet = [5].into_iter().collect();
        assert_eq!(repropose_filter(&ctx(&d, &proposed, &received), 5), 5);
    }

    #[test]
    fn argmax_ties_lowest_id() {
        assert_eq!(argmax_by([3, 1, 2], |_| 1.0), Some(1));
        assert_eq!(argmax_by([3, 1, 2], |id| id as f64), Some(3));
        assert_eq!(argmax_by(std::iter::empty(), |_| 0.0), None);
    }
}
