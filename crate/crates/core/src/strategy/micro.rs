use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{decide_accept, AcceptanceRule, Bid, BiddingStrategy};
use crate::domain::OfferId;
use crate::model::OpponentModel;
use crate::protocol::{Response, StrategyContext};

/// Offers in decreasing order of own utility, ties by lowest id.
#[derive(Debug, Clone)]
pub struct MicroState {
    pub sorted: Vec<OfferId>,
}

impl MicroState {
    pub fn new(own: &[f64]) -> Self {
        let mut sorted: Vec<OfferId> = (0..own.len()).collect();
        sorted.sort_by(|&a, &b| own[b].total_cmp(&own[a]).then(a.cmp(&b)));
        MicroState { sorted }
    }

    /// Bid given `m` distinct proposals made and `n` distinct offers
    /// received. The aspiration is the utility of the least preferred offer
    /// we are prepared to propose.
    pub fn bid<R: Rng + ?Sized>(
        &self,
        own: &[f64],
        reservation: f64,
        m: usize,
        n: usize,
        rng: &mut R,
    ) -> Bid {
        let ready = m <= n && m < self.sorted.len() && own[self.sorted[m]] > reservation;
        if ready {
            let offer = self.sorted[m];
            return Bid {
                offer,
                aspiration: Some(own[offer]),
            };
        }
        if m == 0 {
            // even the best offer is not above the reservation value
            let offer = self.sorted[0];
            return Bid {
                offer,
                aspiration: Some(own[offer]),
            };
        }
        let m = m.min(self.sorted.len());
        let offer = self.sorted[rng.random_range(0..m)];
        Bid {
            offer,
            aspiration: Some(own[self.sorted[m - 1]]),
        }
    }
}

/// One full MiCRO turn: concede one step when the opponent has shown at
/// least as many distinct offers as we have, otherwise repeat one of our
/// earlier offers at random; accept anything at least as good as the worst
/// offer we are willing to propose.
pub fn micro_decide<R: Rng + ?Sized>(
    state: &MicroState,
    ctx: &StrategyContext<'_>,
    rng: &mut R,
) -> Response {
    let own = ctx.utilities();
    let bid = state.bid(
        own,
        ctx.reservation(),
        ctx.proposed.len(),
        ctx.received.len(),
        rng,
    );
    if let Some(rec) = ctx.last_received {
        if decide_accept(&AcceptanceRule::asp(), own[rec], None, bid.aspiration, None)
            .unwrap_or(false)
        {
            return Response::Accept;
        }
    }
    Response::Propose(bid.offer)
}

pub struct Micro {
    state: Option<MicroState>,
    rng: ChaCha8Rng,
}

impl Micro {
    pub fn new(seed: u64) -> Self {
        Micro {
            state: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl BiddingStrategy for Micro {
    fn bid(&mut self, ctx: &StrategyContext<'_>, _model: Option<&dyn OpponentModel>) -> Bid {
        let state = self
            .state
            .get_or_insert_with(|| MicroState::new(ctx.utilities()));
        state.bid(
            ctx.utilities(),
            ctx.reservation(),
            ctx.proposed.len(),
            ctx.received.len(),
            &mut self.rng,
        )
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
    fn sorted_desc_with_lowest_id_ties() {
        let s = MicroState::new(&[0.5, 0.9, 0.5, 1.0]);
        assert_eq!(s.sorted, vec![3, 1, 0, 2]);
    }

    #[test]
    fn first_turn_proposes_best() {
        let d = generate_split_the_pie(11).unwrap();
        let none = OfferSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            micro_decide(
                &MicroState::new(d.table(1)),
                &ctx(&d, &none, &none),
                &mut rng
            ),
            Response::Propose(10)
        );
    }

    #[test]
    fn not_ready_repeats_an_earlier_offer() {
        let d = generate_split_the_pie(11).unwrap();
        let s = MicroState::new(d.table(1));
        let proposed: OfferSet = [10, 9].into_iter().collect();
        let received: OfferSet = [0].into_iter().collect();
        let mut seen = [false; 2];
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match micro_decide(&s, &ctx(&d, &proposed, &received), &mut rng) {
                Response::Propose(id) => seen[10 - id] = true,
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn ready_accepts_offer_above_next_concession() {
        // utilities 1.0, 0.9, ..., so offers[4] is worth 0.6
        let d = generate_split_the_pie(11).unwrap();
        let s = MicroState::new(d.table(1));
        let proposed: OfferSet = [10, 9, 8, 7].into_iter().collect();
        let mut received: OfferSet = [0, 1, 2, 3].into_iter().collect();
        received.insert(6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = ctx(&d, &proposed, &received);
        assert_eq!(micro_decide(&s, &c, &mut rng), Response::Accept);
        let mut received: OfferSet = [0, 1, 2, 3].into_iter().collect();
        received.insert(5);
        assert_eq!(
            micro_decide(&s, &ctx(&d, &proposed, &received), &mut rng),
            Response::Propose(6)
        );
    }

    #[test]
    fn never_concedes_to_reservation() {
        let d = generate_split_the_pie(11)
            .unwrap()
            .with_reservations(0.75, 0.0);
        let s = MicroState::new(d.table(1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // 0.8 is the last offer above 0.75
        let bid = s.bid(d.table(1), 0.75, 3, 10, &mut rng);
        assert!(d.utility(1, bid.offer) > 0.75);
        assert_eq!(bid.aspiration, Some(0.8));
    }
}
