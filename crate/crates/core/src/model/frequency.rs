use std::sync::Arc;

use super::OpponentModel;
use crate::domain::{OfferId, OfferSpace};

/// Option counts over the opponent's proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyState {
    pub counts: Vec<Vec<u64>>,
    pub num_received: u64,
}

impl FrequencyState {
    pub fn new(space: &OfferSpace) -> Self {
        FrequencyState {
            counts: space
                .issue_sizes()
                .into_iter()
                .map(|k| vec![0; k])
                .collect(),
            num_received: 0,
        }
    }

    pub fn update(&mut self, space: &OfferSpace, offer: OfferId) {
        for (j, c) in space.choices(offer).enumerate() {
            self.counts[j][c] += 1;
        }
        self.num_received += 1;
    }

    /// Raw issue weights: the count of the most frequent option divided by
    /// the number of proposals received.
    pub fn raw_weights(&self) -> Vec<f64> {
        if self.num_received == 0 {
            return vec![1.0 / self.counts.len() as f64; self.counts.len()];
        }
        let n = self.num_received as f64;
        self.counts
            .iter()
            .map(|c| *c.iter().max().unwrap_or(&0) as f64 / n)
            .collect()
    }

    /// Estimated (weights, evaluations). Weights sum to one; evaluations
    /// are relative option frequencies.
    pub fn estimates(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let raw = self.raw_weights();
        let sum: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / sum).collect();
        let evaluations = self
            .counts
            .iter()
            .map(|c| {
                if self.num_received == 0 {
                    vec![1.0 / c.len() as f64; c.len()]
                } else {
                    c.iter()
                        .map(|&x| x as f64 / self.num_received as f64)
                        .collect()
                }
            })
            .collect();
        (weights, evaluations)
    }
}

pub struct FrequencyModel {
    space: Arc<OfferSpace>,
    state: FrequencyState,
    estimates: Vec<f64>,
}

impl FrequencyModel {
    pub fn new(space: Arc<OfferSpace>) -> Self {
        let state = FrequencyState::new(&space);
        let mut m = FrequencyModel {
            space,
            state,
            estimates: Vec::new(),
        };
        m.refresh();
        m
    }

    pub fn state(&self) -> &FrequencyState {
        &self.state
    }

    fn refresh(&mut self) {
        let (w, ev) = self.state.estimates();
        let space = &self.space;
        self.estimates = (0..space.size())
            .map(|id| {
                space
                    .choices(id)
                    .enumerate()
                    .map(|(j, c)| w[j] * ev[j][c])
                    .sum()
            })
            .collect();
    }
}

impl OpponentModel for FrequencyModel {
    fn observe(&mut self, offer: OfferId, _time: f64) {
        self.state.update(&self.space, offer);
        self.refresh();
    }

    fn estimates(&self) -> &[f64] {
        &self.estimates
    }
}
