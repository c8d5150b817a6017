//! Gaussian-process prediction of the utility the opponent will offer us.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Matérn kernel with smoothness 3/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matern32 {
    pub length_scale: f64,
    pub variance: f64,
}

impl Matern32 {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let r = 3f64.sqrt() * (a - b).abs() / self.length_scale;
        self.variance * (1.0 + r) * (-r).exp()
    }
}

struct Fitted {
    times: Vec<f64>,
    mean: f64,
    chol: Cholesky<f64, Dyn>,
    /// (K + noise I)^-1 (z - mean)
    weights: DVector<f64>,
}

pub struct GpPredictor {
    pub kernel: Matern32,
    pub noise: f64,
    /// Width of the time windows; only the best offer per window is kept.
    pub window: f64,
    observations: Vec<(f64, f64)>,
    fitted: Option<Fitted>,
}

impl GpPredictor {
    pub const EMPTY_PRIOR_MEAN: f64 = 0.5;

    pub fn new(kernel: Matern32, noise: f64, window: f64) -> Result<Self> {
        if !(kernel.length_scale > 0.0 && kernel.length_scale.is_finite())
            || !(kernel.variance > 0.0)
        {
            return Err(Error::Config(
                "kernel length scale and variance must be positive".into(),
            ));
        }
        if !(noise >= 0.0) || !(window > 0.0) {
            return Err(Error::Config("noise must be >= 0 and window > 0".into()));
        }
        Ok(GpPredictor {
            kernel,
            noise,
            window,
            observations: Vec::new(),
            fitted: None,
        })
    }

    /// Replaces all observations `(t, z)` and refits.
    pub fn fit(&mut self, observations: &[(f64, f64)]) -> Result<()> {
        self.observations = observations.to_vec();
        self.refit()
    }

    pub fn observe(&mut self, t: f64, z: f64) -> Result<()> {
        self.observations.push((t, z));
        self.refit()
    }

    /// Observations reduced to the highest `z` in each time window, sorted
    /// by time.
    pub fn windowed(&self) -> Vec<(f64, f64)> {
        let mut best: Vec<(i64, f64, f64)> = Vec::new();
        let mut sorted = self.observations.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, z) in sorted {
            let w = if self.window.is_finite() {
                (t / self.window).floor() as i64
            } else {
                0
            };
            match best.last_mut() {
                Some(last) if last.0 == w => {
                    if z > last.2 {
                        *last = (w, t, z);
                    }
                }
                _ => best.push((w, t, z)),
            }
        }
        best.into_iter().map(|(_, t, z)| (t, z)).collect()
    }

    fn refit(&mut self) -> Result<()> {
        let pts = self.windowed();
        if pts.is_empty() {
            self.fitted = None;
            return Ok(());
        }
        let n = pts.len();
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            self.kernel.eval(pts[i].0, pts[j].0) + if i == j { self.noise } else { 0.0 }
        });
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::Numerical("GP covariance is not positive definite".into()))?;
        let resid = DVector::from_iterator(n, pts.iter().map(|p| p.1 - mean));
        let weights = chol.solve(&resid);
        self.fitted = Some(Fitted {
            times: pts.iter().map(|p| p.0).collect(),
            mean,
            chol,
            weights,
        });
        Ok(())
    }

    pub fn prior_mean(&self) -> f64 {
        self.fitted
            .as_ref()
            .map_or(Self::EMPTY_PRIOR_MEAN, |f| f.mean)
    }

    /// Predictive mean and standard deviation at `t`.
    pub fn predict(&self, t: f64) -> (f64, f64) {
        let Some(f) = &self.fitted else {
            return (Self::EMPTY_PRIOR_MEAN, self.kernel.variance.sqrt());
        };
        let kstar = DVector::from_iterator(
            f.times.len(),
            f.times.iter().map(|&ti| self.kernel.eval(t, ti)),
        );
        let mean = f.mean + kstar.dot(&f.weights);
        let v = f
            .chol
            .l()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a positive diagonal");
        let prior_var = self.kernel.eval(t, t);
        let var = prior_var - v.dot(&v);
        // differences within a few ulps of the prior variance are roundoff
        let var = if var <= 4.0 * f64::EPSILON * prior_var {
            0.0
        } else {
            var
        };
        (mean, var.sqrt())
    }
}

/// Probability that the opponent offers us at least `z` at `t`: the upper
/// Gaussian tail of the prediction. With zero spread this is a step that
/// takes 1/2 at the mean.
pub fn acceptance_probability(gp: &GpPredictor, z: f64, t: f64) -> f64 {
    let (mean, std) = gp.predict(t);
    tail(z, mean, std)
}

fn tail(z: f64, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return match z.total_cmp(&mean) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        };
    }
    0.5 * erfc((z - mean) / (std * std::f64::consts::SQRT_2))
}

/// Grid value maximizing `target * P_acc(target)`; ties go to the larger
/// target.
pub fn optimal_target(gp: &GpPredictor, t: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("candidate grid is empty".into()));
    }
    let (mean, std) = gp.predict(t);
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &b in grid {
        let score = b * tail(b, mean, std);
        if score > best.1 || (score == best.1 && b > best.0) {
            best = (b, score);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(noise: f64) -> GpPredictor {
        GpPredictor::new(
            Matern32 {
                length_scale: 0.2,
                variance: 0.04,
            },
            noise,
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn empty_predictor_returns_prior() {
        let g = gp(1e-8);
        assert_eq!(g.predict(0.3), (0.5, 0.2));
    }

    #[test]
    fn single_noiseless_observation_interpolates() {
        let mut g = gp(0.0);
        g.fit(&[(0.3, 0.8)]).unwrap();
        let (m, s) = g.predict(0.3);
        assert!((m - 0.8).abs() < 1e-12);
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn windowing_keeps_best_per_window() {
        let mut g = gp(1e-8);
        g.fit(&[(0.01, 0.5), (0.02, 0.7), (0.03, 0.6), (0.07, 0.4)])
            .unwrap();
        assert_eq!(g.windowed(), vec![(0.02, 0.7), (0.07, 0.4)]);
        assert!((g.prior_mean() - 0.55).abs() < 1e-15);
    }

    #[test]
    fn single_window_collapses_duplicate_times() {
        let mut g = GpPredictor::new(
            Matern32 {
                length_scale: 0.2,
                variance: 0.04,
            },
            0.0,
            f64::INFINITY,
        )
        .unwrap();
        // a single window keeps one point, so this stays well posed
        assert!(g.fit(&[(0.1, 0.5), (0.1, 0.6)]).is_ok());
    }

    #[test]
    fn acceptance_probability_shape() {
        let mut g = gp(1e-8);
        g.fit(&[(0.1, 0.6), (0.3, 0.55), (0.5, 0.5)]).unwrap();
        let (m, s) = g.predict(0.9);
        assert!((acceptance_probability(&g, m, 0.9) - 0.5).abs() < 1e-12);
        assert!(acceptance_probability(&g, m - 10.0 * s, 0.9) >= 1.0 - 1e-15);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let p = acceptance_probability(&g, i as f64 / 99.0, 0.9);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn zero_spread_is_a_step() {
        assert_eq!(tail(0.4, 0.5, 0.0), 1.0);
        assert_eq!(tail(0.5, 0.5, 0.0), 0.5);
        assert_eq!(tail(0.6, 0.5, 0.0), 0.0);
    }

    #[test]
    fn optimal_target_grid() {
        let mut g = gp(0.0);
        g.fit(&[(0.5, 2.0)]).unwrap();
        // std 0 at t = 0.5 and mean 2: every grid point below the mean has P = 1
        assert_eq!(optimal_target(&g, 0.5, &[0.2, 0.9, 0.5]).unwrap(), 0.9);
        assert_eq!(optimal_target(&g, 0.5, &[0.3]).unwrap(), 0.3);
        assert!(optimal_target(&g, 0.5, &[]).is_err());
    }

    #[test]
    fn optimal_target_matches_exhaustive_scan() {
        // predictor with mean 0.5 and std 0.1 everywhere: no data, custom kernel
        let g = GpPredictor::new(
            Matern32 {
                length_scale: 1.0,
                variance: 0.01,
            },
            0.0,
            1.0,
        )
        .unwrap();
        let grid: Vec<f64> = (0..13).map(|i| 0.3 + 0.05 * i as f64).collect();
        let score = |b: f64| b * 0.5 * erfc((b - 0.5) / (0.1 * std::f64::consts::SQRT_2));
        let mut want = grid[0];
        for &b in &grid {
            if score(b) >= score(want) {
                want = b;
            }
        }
        assert_eq!(optimal_target(&g, 0.7, &grid).unwrap(), want);
    }

    #[test]
    fn observation_does_not_raise_variance_at_its_time() {
        let mut g = gp(0.0);
        g.fit(&[(0.12, 0.7), (0.31, 0.6)]).unwrap();
        let before = g.predict(0.52).1;
        g.observe(0.52, 0.55).unwrap();
        assert!(g.predict(0.52).1 <= before);
    }
}
