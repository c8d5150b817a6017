use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_by, Bid, BiddingStrategy};
use crate::domain::OfferId;
use crate::model::OpponentModel;
use crate::protocol::StrategyContext;

/// Baseline that proposes uniformly random offers above its reservation
/// value and uses a fixed acceptance threshold as its aspiration.
pub struct RandomBidder {
    pub threshold: f64,
    rng: ChaCha8Rng,
    acceptable: Option<Vec<OfferId>>,
}

impl RandomBidder {
    pub fn new(threshold: f64, seed: u64) -> Self {
        RandomBidder {
            threshold,
            rng: ChaCha8Rng::seed_from_u64(seed),
            acceptable: None,
        }
    }
}

impl BiddingStrategy for RandomBidder {
    fn bid(&mut self, ctx: &StrategyContext<'_>, _model: Option<&dyn OpponentModel>) -> Bid {
        let r = ctx.reservation();
        let own = ctx.utilities();
        let acceptable = self
            .acceptable
            .get_or_insert_with(|| (0..own.len()).filter(|&id| own[id] > r).collect());
        let offer = if acceptable.is_empty() {
            argmax_by(0..own.len(), |id| own[id]).expect("non-empty space")
        } else {
            acceptable[self.rng.random_range(0..acceptable.len())]
        };
        Bid {
            offer,
            aspiration: Some(self.threshold),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_split_the_pie;
    use crate::protocol::OfferSet;

    fn draws(seed: u64, r: f64) -> Vec<OfferId> {
        let d = generate_split_the_pie(21)
            .unwrap()
            .with_reservations(r, 0.0);
        let none = OfferSet::new();
        let ctx = StrategyContext {
            domain: &d,
            agent: 1,
            now: 0.0,
            deadline: 1.0,
            observed: &[],
            last_received: None,
            proposed: &none,
            received: &none,
        };
        let mut b = RandomBidder::new(0.9, seed);
        (0..100).map(|_| b.bid(&ctx, None).offer).collect()
    }

    #[test]
    fn seeded_and_above_reservation() {
        assert_eq!(draws(3, 0.5), draws(3, 0.5));
        assert_ne!(draws(3, 0.5), draws(4, 0.5));
        // ids above 10 are worth more than 0.5
        assert!(draws(3, 0.5).iter().all(|&id| id > 10));
    }

    #[test]
    fn nothing_acceptable_proposes_best() {
        assert!(draws(0, 1.0).iter().all(|&id| id == 20));
    }
}
