use std::sync::Arc;

use super::{reweight, uniform, ConcessionPrior, OpponentModel, TriangularEvaluator};
use crate::domain::{LinearUtility, OfferId, OfferSpace};
use crate::error::{Error, Result};

/// Largest hypothesis set the full Bayesian learner accepts.
pub const MAX_HYPOTHESES: usize = 100_000;

#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub hypotheses: Vec<LinearUtility>,
    pub priors: Vec<f64>,
}

impl HypothesisSet {
    /// Uniform prior over the given hypotheses.
    pub fn new(hypotheses: Vec<LinearUtility>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::Config("hypothesis set is empty".into()));
        }
        let priors = uniform(hypotheses.len());
        Ok(HypothesisSet { hypotheses, priors })
    }

    /// Every combination of one weight from `weight_grid` and one
    /// triangular evaluator per issue. Weights are not renormalized.
    pub fn grid(space: &OfferSpace, weight_grid: &[f64]) -> Result<Self> {
        if weight_grid.is_empty() {
            return Err(Error::Config("weight grid is empty".into()));
        }
        let sizes = space.issue_sizes();
        let mut count: usize = 1;
        for &k in &sizes {
            count = count
                .checked_mul(k * weight_grid.len())
                .filter(|&c| c <= MAX_HYPOTHESES)
                .ok_or_else(|| {
                    Error::TooLarge(format!(
                        "more than {MAX_HYPOTHESES} hypotheses; use scalable_bayes for this domain"
                    ))
                })?;
        }
        // per issue: (weight, evaluator table) choices
        let per_issue: Vec<Vec<(f64, Vec<f64>)>> = sizes
            .iter()
            .map(|&k| {
                let tables: Vec<Vec<f64>> = (1..=k)
                    .map(|n| {
                        TriangularEvaluator {
                            issue_size: k,
                            peak: n,
                        }
                        .table()
                    })
                    .collect();
                weight_grid
                    .iter()
                    .flat_map(|&w| tables.iter().map(move |t| (w, t.clone())))
                    .collect()
            })
            .collect();
        let mut hypotheses = Vec::with_capacity(count);
        let mut idx = vec![0usize; sizes.len()];
        loop {
            let (weights, evaluations) = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| per_issue[j][i].clone())
                .unzip();
            hypotheses.push(LinearUtility::unchecked(weights, evaluations));
            // odometer, last issue fastest
            let mut j = sizes.len();
            loop {
                if j == 0 {
                    return HypothesisSet::new(hypotheses);
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < per_issue[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn utility(&self, h: usize, space: &OfferSpace, offer: OfferId) -> f64 {
        self.hypotheses[h].value(space.choices(offer))
    }
}

#[derive(Debug, Clone)]
pub struct BayesPosterior {
    pub probs: Vec<f64>,
    pub prior: ConcessionPrior,
    /// Number of updates where every likelihood underflowed.
    pub resets: usize,
}

impl BayesPosterior {
    pub fn new(set: &HypothesisSet, prior: ConcessionPrior) -> Self {
        BayesPosterior {
            probs: set.priors.clone(),
            prior,
            resets: 0,
        }
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// One Bayesian update after receiving `offer` at `time`.
pub fn bayes_update(
    posterior: &mut BayesPosterior,
    set: &HypothesisSet,
    space: &OfferSpace,
    offer: OfferId,
    time: f64,
) {
    let lik = posterior.prior.likelihood_fn(time);
    if !reweight(&mut posterior.probs, |h| lik(set.utility(h, space, offer))) {
        posterior.resets += 1;
    }
}

pub fn bayes_expected_utility(
    posterior: &BayesPosterior,
    set: &HypothesisSet,
    space: &OfferSpace,
    offer: OfferId,
) -> f64 {
    posterior
        .probs
        .iter()
        .enumerate()
        .map(|(h, p)| p * set.utility(h, space, offer))
        .sum()
}

/// Full Bayesian learner over an explicit hypothesis set.
pub struct BayesModel {
    space: Arc<OfferSpace>,
    set: HypothesisSet,
    posterior: BayesPosterior,
    estimates: Vec<f64>,
}

impl BayesModel {
    pub fn new(space: Arc<OfferSpace>, set: HypothesisSet, prior: ConcessionPrior) -> Self {
        let posterior = BayesPosterior::new(&set, prior);
        let mut m = BayesModel {
            space,
            set,
            posterior,
            estimates: Vec::new(),
        };
        m.refresh();
        m
    }

    pub fn posterior(&self) -> &BayesPosterior {
        &self.posterior
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.set
    }

    /// Recomputes the estimate table by aggregating the posterior per
    /// issue option, which avoids a hypotheses-times-offers loop.
    fn refresh(&mut self) {
        let sizes = self.space.issue_sizes();
        let mut per_option: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![0.0; k]).collect();
        for (h, &p) in self.set.hypotheses.iter().zip(&self.posterior.probs) {
            if p == 0.0 {
                continue;
            }
            for (j, acc) in per_option.iter_mut().enumerate() {
                let w = p * h.weights[j];
                for (a, v) in acc.iter_mut().zip(&h.evaluations[j]) {
                    *a += w * v;
                }
            }
        }
        let space = &self.space;
        self.estimates = (0..space.size())
            .map(|id| {
                space
                    .choices(id)
                    .enumerate()
                    .map(|(j, c)| per_option[j][c])
                    .sum()
            })
            .collect();
    }
}

impl OpponentModel for BayesModel {
    fn observe(&mut self, offer: OfferId, time: f64) {
        bayes_update(&mut self.posterior, &self.set, &self.space, offer, time);
        self.refresh();
    }

    fn estimates(&self) -> &[f64] {
        &self.estimates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Issue;

    fn one_issue(k: usize) -> OfferSpace {
        OfferSpace::new(vec![Issue::numbered("x", k).unwrap()]).unwrap()
    }

    fn fixed(values: &[f64]) -> HypothesisSet {
        // one hypothesis per entry: a single-issue utility that maps option 0 to the value
        HypothesisSet::new(
            values
                .iter()
                .map(|&v| LinearUtility::unchecked(vec![1.0], vec![vec![v, 0.0]]))
                .collect(),
        )
        .unwrap()
    }

    fn density(x: f64, mean: f64, sd: f64) -> f64 {
        (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn three_hypothesis_hand_case() {
        let space = one_issue(2);
        let set = fixed(&[0.5, 0.6, 0.9]);
        let mut post = BayesPosterior::new(&set, ConcessionPrior::new(1.0, 0.1, 1.0).unwrap());
        bayes_update(&mut post, &set, &space, 0, 0.5);
        let d: Vec<f64> = [0.5, 0.6, 0.9]
            .iter()
            .map(|&u| density(u, 0.5, 0.1))
            .collect();
        let z: f64 = d.iter().sum();
        for (p, di) in post.probs.iter().zip(&d) {
            assert!((p - di / z).abs() < 1e-12);
        }
        assert_eq!(post.argmax(), 0);
    }

    #[test]
    fn equal_likelihoods_leave_posterior_unchanged() {
        let space = one_issue(2);
        let set = fixed(&[0.3, 0.3]);
        let mut post = BayesPosterior::new(&set, ConcessionPrior::new(1.0, 0.15, 1.0).unwrap());
        post.probs = vec![0.2, 0.8];
        bayes_update(&mut post, &set, &space, 0, 0.4);
        assert!((post.probs[0] - 0.2).abs() < 1e-15 && (post.probs[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn underflow_resets_to_uniform() {
        let space = one_issue(2);
        let set = fixed(&[0.0, 0.0]);
        let mut post = BayesPosterior::new(&set, ConcessionPrior::new(1.0, 0.001, 1.0).unwrap());
        bayes_update(&mut post, &set, &space, 0, 0.0);
        assert_eq!(post.probs, vec![0.5, 0.5]);
        assert_eq!(post.resets, 1);
    }

    #[test]
    fn expected_utility_is_weighted_mean() {
        let space = one_issue(2);
        let set = fixed(&[0.2, 0.8]);
        let mut post = BayesPosterior::new(&set, ConcessionPrior::new(1.0, 0.15, 1.0).unwrap());
        assert!((bayes_expected_utility(&post, &set, &space, 0) - 0.5).abs() < 1e-15);
        post.probs = vec![0.0, 1.0];
        assert_eq!(bayes_expected_utility(&post, &set, &space, 0), 0.8);
    }

    #[test]
    fn grid_size_and_limit() {
        let space = OfferSpace::new(vec![
            Issue::numbered("a", 3).unwrap(),
            Issue::numbered("b", 2).unwrap(),
        ])
        .unwrap();
        let set = HypothesisSet::grid(&space, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(set.len(), 9 * 6);
        let big = OfferSpace::new(
            (0..3)
                .map(|j| Issue::numbered(format!("i{j}"), 10).unwrap())
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            HypothesisSet::grid(&big, &super::super::default_weight_grid()),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn model_estimates_match_direct_sum() {
        let space = Arc::new(
            OfferSpace::new(vec![
                Issue::numbered("a", 3).unwrap(),
                Issue::numbered("b", 4).unwrap(),
            ])
            .unwrap(),
        );
        let set = HypothesisSet::grid(&space, &[0.0, 0.5, 1.0]).unwrap();
        let mut m = BayesModel::new(
            space.clone(),
            set,
            ConcessionPrior::new(1.0, 0.2, 1.0).unwrap(),
        );
        for (i, &o) in [11usize, 7, 3].iter().enumerate() {
            m.observe(o, 0.1 * i as f64);
        }
        let total: f64 = m.posterior().probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for id in 0..space.size() {
            let direct = bayes_expected_utility(m.posterior(), m.hypotheses(), &space, id);
            assert!((m.estimates()[id] - direct).abs() < 1e-12);
        }
    }
}
