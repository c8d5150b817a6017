//! Opponent models: estimates of the opponent's utility function learned
//! from the proposals it makes, plus a Gaussian-process predictor of the
//! opponent's future concessions.

mod bayes;
mod dummy;
mod frequency;
mod gp;
mod scalable;
mod triangular;

pub use bayes::{
    bayes_expected_utility, bayes_update, BayesModel, BayesPosterior, HypothesisSet, MAX_HYPOTHESES,
};
pub use dummy::DummyModel;
pub use frequency::{FrequencyModel, FrequencyState};
pub use gp::{acceptance_probability, optimal_target, GpPredictor, Matern32};
pub use scalable::{scalable_expected_utility, scalable_update, ScalableModel, ScalablePosterior};
pub use triangular::{triangular_eval, TriangularEvaluator};

use statrs::distribution::{Continuous, Normal};

use crate::domain::{NegotiationDomain, OfferId};
use crate::error::{Error, Result};

/// Learns the opponent's utility from the proposals it sends.
pub trait OpponentModel: Send {
    /// Incorporates a proposal received at `time`.
    fn observe(&mut self, offer: OfferId, time: f64);

    /// Estimated opponent utility of every offer, indexed by offer id.
    fn estimates(&self) -> &[f64];
}

/// Parameters for the concession model the Bayesian learners assume: the
/// opponent proposes offers worth about `1 - c * t / T` to itself, with
/// Gaussian spread `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcessionPrior {
    pub c: f64,
    pub sigma: f64,
    pub deadline: f64,
}

impl ConcessionPrior {
    pub fn new(c: f64, sigma: f64, deadline: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !c.is_finite() {
            return Err(Error::Config(format!(
                "need finite c and sigma > 0, got c={c} sigma={sigma}"
            )));
        }
        if !(deadline > 0.0) {
            return Err(Error::Config("deadline must be positive".into()));
        }
        Ok(ConcessionPrior { c, sigma, deadline })
    }

    /// Utility the opponent is expected to demand at `time`.
    pub fn expected_level(&self, time: f64) -> f64 {
        let rel = if self.deadline.is_finite() {
            time / self.deadline
        } else {
            0.0
        };
        1.0 - self.c * rel
    }

    /// Gaussian density of `utility` around the expected level, used
    /// directly as an unnormalized likelihood.
    pub fn likelihood_fn(&self, time: f64) -> impl Fn(f64) -> f64 {
        let normal =
            Normal::new(self.expected_level(time), self.sigma).expect("sigma checked positive");
        move |u| normal.pdf(u)
    }
}

/// Below this total mass a posterior is considered to have underflowed.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Multiplies `probs` by `likelihood` elementwise and renormalizes.
///
/// Returns `false` when the product underflowed and `probs` was reset to
/// uniform instead.
pub(crate) fn reweight(probs: &mut [f64], likelihood: impl Fn(usize) -> f64) -> bool {
    for (i, p) in probs.iter_mut().enumerate() {
        *p *= likelihood(i);
    }
    let total: f64 = probs.iter().sum();
    if !(total > UNDERFLOW_FLOOR) || !total.is_finite() {
        let u = 1.0 / probs.len() as f64;
        probs.iter_mut().for_each(|p| *p = u);
        return false;
    }
    probs.iter_mut().for_each(|p| *p /= total);
    true
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Bayes {
        c: f64,
        sigma: f64,
        weight_grid: Vec<f64>,
    },
    ScalableBayes {
        c: f64,
        sigma: f64,
        weight_grid: Vec<f64>,
    },
    Frequency,
    Gp {
        length_scale: Option<f64>,
        window: Option<f64>,
        variance: f64,
        noise: f64,
    },
    Dummy {
        noise: f64,
    },
}

pub fn default_weight_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Bayes { .. } => "bayes",
            ModelSpec::ScalableBayes { .. } => "scalable_bayes",
            ModelSpec::Frequency => "frequency",
            ModelSpec::Gp { .. } => "gp",
            ModelSpec::Dummy { .. } => "dummy",
        }
    }

    /// Builds a utility model for `agent`'s opponent. The GP predictor is
    /// not a utility model and is rejected here.
    pub fn build(
        &self,
        domain: &NegotiationDomain,
        agent: usize,
        deadline: f64,
        seed: u64,
    ) -> Result<Box<dyn OpponentModel>> {
        Ok(match self {
            ModelSpec::Bayes {
                c,
                sigma,
                weight_grid,
            } => {
                let set = HypothesisSet::grid(domain.space(), weight_grid)?;
                Box::new(BayesModel::new(
                    domain.space_arc(),
                    set,
                    ConcessionPrior::new(*c, *sigma, deadline)?,
                ))
            }
            ModelSpec::ScalableBayes {
                c,
                sigma,
                weight_grid,
            } => Box::new(ScalableModel::new(
                domain.space_arc(),
                weight_grid.clone(),
                ConcessionPrior::new(*c, *sigma, deadline)?,
            )?),
            ModelSpec::Frequency => Box::new(FrequencyModel::new(domain.space_arc())),
            ModelSpec::Dummy { noise } => {
                Box::new(DummyModel::new(domain, 3 - agent, *noise, seed)?)
            }
            ModelSpec::Gp { .. } => {
                return Err(Error::Config(
                    "gp predicts concessions, it is not a utility model".into(),
                ))
            }
        })
    }
}
