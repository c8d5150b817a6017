use super::{argmax_by, aspiration_value, AspirationFunction, Bid, BiddingStrategy};
use crate::domain::OfferId;
use crate::model::OpponentModel;
use crate::protocol::{OfferSet, StrategyContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidMode {
    /// Among acceptable offers, the one the opponent likes most.
    MaxOpponent,
    /// Among acceptable offers, the one we like least.
    MinOwn,
}

impl BidMode {
    pub fn name(self) -> &'static str {
        match self {
            BidMode::MaxOpponent => "max_opponent",
            BidMode::MinOwn => "min_own",
        }
    }
}

/// Picks a new offer worth at least `asp` to us.
///
/// Without opponent estimates `MaxOpponent` treats every candidate alike
/// and returns the lowest id. When no unproposed offer qualifies, the best
/// offer proposed so far is repeated.
pub fn select_bid_timebased(
    own: &[f64],
    estimates: Option<&[f64]>,
    proposed: &OfferSet,
    asp: f64,
    mode: BidMode,
) -> OfferId {
    let candidates = (0..own.len()).filter(|&id| own[id] >= asp && !proposed.contains(id));
    let pick = match mode {
        BidMode::MaxOpponent => argmax_by(candidates, |id| estimates.map_or(0.0, |e| e[id])),
        BidMode::MinOwn => argmax_by(candidates, |id| -own[id]),
    };
    pick.unwrap_or_else(|| {
        argmax_by(proposed.iter(), |id| own[id])
            .or_else(|| argmax_by(0..own.len(), |id| own[id]))
            .expect("offer spaces are non-empty")
    })
}

pub struct TimeBased {
    pub aspiration: AspirationFunction,
    pub mode: BidMode,
}

impl BiddingStrategy for TimeBased {
    fn bid(&mut self, ctx: &StrategyContext<'_>, model: Option<&dyn OpponentModel>) -> Bid {
        let t = ctx.now.min(self.aspiration.deadline);
        let asp = aspiration_value(&self.aspiration, t)
            .expect("engine never invokes agents past the deadline");
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_split_the_pie;

    #[test]
    fn max_opponent_picks_best_for_them() {
        let own = [0.85, 0.9, 0.5];
        let est = [0.2, 0.1, 0.9];
        assert_eq!(
            select_bid_timebased(
                &own,
                Some(&est),
                &OfferSet::new(),
                0.8,
                BidMode::MaxOpponent
            ),
            0
        );
    }

    #[test]
    fn min_own_on_split_the_pie() {
        let d = generate_split_the_pie(11).unwrap();
        let id = select_bid_timebased(d.table(1), None, &OfferSet::new(), 0.62, BidMode::MinOwn);
        assert!((d.utility(1, id) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn exhausted_candidates_repeat_best_proposal() {
        let own = [0.95, 0.9, 0.5];
        let proposed: OfferSet = [1, 0].into_iter().collect();
        assert_eq!(
            select_bid_timebased(&own, None, &proposed, 0.8, BidMode::MinOwn),
            0
        );
        // nothing proposed and nothing qualifies: the overall maximum
        assert_eq!(
            select_bid_timebased(&own, None, &OfferSet::new(), 2.0, BidMode::MinOwn),
            0
        );
    }
}
