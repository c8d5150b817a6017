use std::sync::Arc;

use super::{reweight, uniform, ConcessionPrior, OpponentModel, TriangularEvaluator};
use crate::domain::{OfferId, OfferSpace};
use crate::error::{Error, Result};

/// Independent per-issue posteriors over weights and evaluators.
#[derive(Debug, Clone)]
pub struct ScalablePosterior {
    pub weight_hyps: Vec<Vec<f64>>,
    pub weight_probs: Vec<Vec<f64>>,
    /// Per issue, per hypothesis: evaluation of each option.
    pub eval_hyps: Vec<Vec<Vec<f64>>>,
    pub eval_probs: Vec<Vec<f64>>,
    pub prior: ConcessionPrior,
    pub resets: usize,
}

impl ScalablePosterior {
    /// Uniform priors over `weight_grid` and the triangular evaluators of
    /// every issue.
    pub fn new(space: &OfferSpace, weight_grid: &[f64], prior: ConcessionPrior) -> Result<Self> {
        if weight_grid.is_empty() {
            return Err(Error::Config("weight grid is empty".into()));
        }
        let eval_hyps: Vec<Vec<Vec<f64>>> = space
            .issue_sizes()
            .into_iter()
            .map(|k| {
                (1..=k)
                    .map(|n| {
                        TriangularEvaluator {
                            issue_size: k,
                            peak: n,
                        }
                        .table()
                    })
                    .collect()
            })
            .collect();
        Self::from_hypotheses(
            vec![weight_grid.to_vec(); space.num_issues()],
            eval_hyps,
            prior,
        )
    }

    pub fn from_hypotheses(
        weight_hyps: Vec<Vec<f64>>,
        eval_hyps: Vec<Vec<Vec<f64>>>,
        prior: ConcessionPrior,
    ) -> Result<Self> {
        if weight_hyps.len() != eval_hyps.len()
            || weight_hyps.is_empty()
            || weight_hyps.iter().any(Vec::is_empty)
            || eval_hyps.iter().any(Vec::is_empty)
        {
            return Err(Error::Config(
                "every issue needs weight and evaluator hypotheses".into(),
            ));
        }
        let weight_probs = weight_hyps.iter().map(|h| uniform(h.len())).collect();
        let eval_probs = eval_hyps.iter().map(|h| uniform(h.len())).collect();
        Ok(ScalablePosterior {
            weight_hyps,
            weight_probs,
            eval_hyps,
            eval_probs,
            prior,
            resets: 0,
        })
    }

    pub fn expected_weight(&self, issue: usize) -> f64 {
        self.weight_hyps[issue]
            .iter()
            .zip(&self.weight_probs[issue])
            .map(|(w, p)| w * p)
            .sum()
    }

    pub fn expected_eval(&self, issue: usize, option: usize) -> f64 {
        self.eval_hyps[issue]
            .iter()
            .zip(&self.eval_probs[issue])
            .map(|(v, p)| v[option] * p)
            .sum()
    }
}

/// Sum over issues of expected weight times expected evaluation.
pub fn scalable_expected_utility(
    state: &ScalablePosterior,
    space: &OfferSpace,
    offer: OfferId,
) -> f64 {
    space
        .choices(offer)
        .enumerate()
        .map(|(j, c)| state.expected_weight(j) * state.expected_eval(j, c))
        .sum()
}

/// Updates every per-issue posterior after receiving `offer` at `time`.
///
/// Each hypothesis is scored by the utility obtained when it replaces the
/// expectation for its own issue while all other issues keep their
/// expectations. All scores use the expectations from before the update.
pub fn scalable_update(
    state: &mut ScalablePosterior,
    space: &OfferSpace,
    offer: OfferId,
    time: f64,
) {
    let lik = state.prior.likelihood_fn(time);
    let choices: Vec<usize> = space.choices(offer).collect();
    let ew: Vec<f64> = (0..choices.len())
        .map(|j| state.expected_weight(j))
        .collect();
    let ev: Vec<f64> = choices
        .iter()
        .enumerate()
        .map(|(j, &c)| state.expected_eval(j, c))
        .collect();
    let total: f64 = ew.iter().zip(&ev).map(|(w, v)| w * v).sum();

    for (j, &c) in choices.iter().enumerate() {
        let rest = total - ew[j] * ev[j];
        let weights = &state.weight_hyps[j];
        if !reweight(&mut state.weight_probs[j], |h| {
            lik(rest + weights[h] * ev[j])
        }) {
            state.resets += 1;
        }
        let evals = &state.eval_hyps[j];
        if !reweight(
            &mut state.eval_probs[j],
            |h| lik(rest + ew[j] * evals[h][c]),
        ) {
            state.resets += 1;
        }
    }
}

pub struct ScalableModel {
    space: Arc<OfferSpace>,
    state: ScalablePosterior,
    estimates: Vec<f64>,
}

impl ScalableModel {
    pub fn new(
        space: Arc<OfferSpace>,
        weight_grid: Vec<f64>,
        prior: ConcessionPrior,
    ) -> Result<Self> {
        let state = ScalablePosterior::new(&space, &weight_grid, prior)?;
        let mut m = ScalableModel {
            space,
            state,
            estimates: Vec::new(),
        };
        m.refresh();
        Ok(m)
    }

    pub fn state(&self) -> &ScalablePosterior {
        &self.state
    }

    fn refresh(&mut self) {
        let s = &self.state;
        let per_option: Vec<Vec<f64>> = (0..self.space.num_issues())
            .map(|j| {
                let w = s.expected_weight(j);
                (0..self.space.issues()[j].len())
                    .map(|c| w * s.expected_eval(j, c))
                    .collect()
            })
            .collect();
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

impl OpponentModel for ScalableModel {
    fn observe(&mut self, offer: OfferId, time: f64) {
        scalable_update(&mut self.state, &self.space, offer, time);
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

    fn density(x: f64, mean: f64, sd: f64) -> f64 {
        (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn normalized(v: &[f64]) -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    }

    #[test]
    fn expected_utility_example() {
        let space = OfferSpace::new(vec![
            Issue::numbered("a", 2).unwrap(),
            Issue::numbered("b", 2).unwrap(),
        ])
        .unwrap();
        let prior = ConcessionPrior::new(1.0, 0.15, 1.0).unwrap();
        let s = ScalablePosterior::from_hypotheses(
            vec![vec![0.5], vec![0.5]],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            prior,
        )
        .unwrap();
        // offer (0,0): 0.5*1 + 0.5*0
        assert_eq!(scalable_expected_utility(&s, &space, 0), 0.5);
    }

    /// Two issues, two weight and two evaluator hypotheses each, worked
    /// through by hand.
    #[test]
    fn two_issue_hand_trace() {
        let space = OfferSpace::new(vec![
            Issue::numbered("a", 2).unwrap(),
            Issue::numbered("b", 2).unwrap(),
        ])
        .unwrap();
        let prior = ConcessionPrior::new(1.0, 0.2, 1.0).unwrap();
        let mut s = ScalablePosterior::from_hypotheses(
            vec![vec![0.2, 0.8], vec![0.4, 1.0]],
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1.0, 0.5], vec![0.25, 1.0]],
            ],
            prior,
        )
        .unwrap();
        // offer (0,1) received at t = 0.25: expected level 0.75
        let offer = space.id_of(&crate::domain::Offer::new(vec![0, 1])).unwrap();
        scalable_update(&mut s, &space, offer, 0.25);

        // before: E[w] = (0.5, 0.7); E[v]^a(0) = 0.5; E[v]^b(1) = 0.75
        let (ew_a, ew_b, ev_a, ev_b) = (0.5, 0.7, 0.5, 0.75);
        let rest_a = ew_b * ev_b;
        let rest_b = ew_a * ev_a;
        let wa = normalized(&[
            density(rest_a + 0.2 * ev_a, 0.75, 0.2),
            density(rest_a + 0.8 * ev_a, 0.75, 0.2),
        ]);
        let va = normalized(&[
            density(rest_a + ew_a * 1.0, 0.75, 0.2),
            density(rest_a + ew_a * 0.0, 0.75, 0.2),
        ]);
        let wb = normalized(&[
            density(rest_b + 0.4 * ev_b, 0.75, 0.2),
            density(rest_b + 1.0 * ev_b, 0.75, 0.2),
        ]);
        let vb = normalized(&[
            density(rest_b + ew_b * 0.5, 0.75, 0.2),
            density(rest_b + ew_b * 1.0, 0.75, 0.2),
        ]);
        for (got, want) in [
            (&s.weight_probs[0], &wa),
            (&s.eval_probs[0], &va),
            (&s.weight_probs[1], &wb),
            (&s.eval_probs[1], &vb),
        ] {
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn identical_evaluators_unchanged() {
        let space = OfferSpace::new(vec![Issue::numbered("a", 2).unwrap()]).unwrap();
        let prior = ConcessionPrior::new(1.0, 0.15, 1.0).unwrap();
        let mut s = ScalablePosterior::from_hypotheses(
            vec![vec![0.3, 0.9]],
            vec![vec![vec![0.6, 0.1], vec![0.6, 0.9]]],
            prior,
        )
        .unwrap();
        scalable_update(&mut s, &space, 0, 0.3);
        assert!((s.eval_probs[0][0] - 0.5).abs() < 1e-15);
        assert!((s.weight_probs[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_estimates_bounded() {
        let space = Arc::new(
            OfferSpace::new(vec![
                Issue::numbered("a", 4).unwrap(),
                Issue::numbered("b", 3).unwrap(),
            ])
            .unwrap(),
        );
        let mut m = ScalableModel::new(
            space.clone(),
            super::super::default_weight_grid(),
            ConcessionPrior::new(1.0, 0.15, 1.0).unwrap(),
        )
        .unwrap();
        for (i, o) in [0usize, 5, 9, 2].into_iter().enumerate() {
            m.observe(o, 0.2 * i as f64);
        }
        let cap: f64 = (0..2).map(|j| m.state().expected_weight(j)).sum();
        for id in 0..space.size() {
            let e = m.estimates()[id];
            assert!(e >= 0.0 && e <= cap + 1e-12);
            assert!((e - scalable_expected_utility(m.state(), &space, id)).abs() < 1e-12);
        }
    }
}
