use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::OpponentModel;
use crate::domain::{NegotiationDomain, OfferId};
use crate::error::{Error, Result};

/// Knows the opponent's true utility, blurred by fixed Gaussian noise.
/// Useful as an upper bound on what a learned model can achieve.
pub struct DummyModel {
    estimates: Vec<f64>,
}

impl DummyModel {
    pub fn new(domain: &NegotiationDomain, opponent: usize, noise: f64, seed: u64) -> Result<Self> {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!(
                "noise {noise} must be finite and >= 0"
            )));
        }
        let truth = domain.table(opponent);
        let estimates = if noise == 0.0 {
            truth.to_vec()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, noise).expect("noise checked");
            truth.iter().map(|u| u + normal.sample(&mut rng)).collect()
        };
        Ok(DummyModel { estimates })
    }
}

impl OpponentModel for DummyModel {
    fn observe(&mut self, _offer: OfferId, _time: f64) {}

    fn estimates(&self) -> &[f64] {
        &self.estimates
    }
}
