use crate::error::{Error, Result};

/// Time-decreasing utility threshold.
///
/// Starts at `alpha`, reaches `target` at `target_time` (the deadline if
/// unset) and stays there. `gamma` controls the curvature: small values
/// concede late (hardheaded), large values concede early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspirationFunction {
    pub alpha: f64,
    pub target: f64,
    pub gamma: f64,
    pub deadline: f64,
    pub target_time: Option<f64>,
}

impl AspirationFunction {
    pub fn new(
        alpha: f64,
        target: f64,
        gamma: f64,
        deadline: f64,
        target_time: Option<f64>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(alpha >= target) || !alpha.is_finite() || !target.is_finite() {
            return Err(Error::Config(format!(
                "need alpha >= target, got alpha={alpha} target={target}"
            )));
        }
        if !(deadline > 0.0) {
            return Err(Error::Config("deadline must be positive".into()));
        }
        if let Some(tp) = target_time {
            if !(tp > 0.0 && tp <= deadline) {
                return Err(Error::Config(format!(
                    "target time {tp} not in (0, {deadline}]"
                )));
            }
        }
        Ok(AspirationFunction {
            alpha,
            target,
            gamma,
            deadline,
            target_time,
        })
    }

    fn concession_end(&self) -> f64 {
        self.target_time.unwrap_or(self.deadline)
    }
}

/// Aspiration level at time `t`.
pub fn aspiration_value(f: &AspirationFunction, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= f.deadline) {
        return Err(Error::Range(format!(
            "time {t} outside [0, {}]",
            f.deadline
        )));
    }
    let end = f.concession_end();
    if t >= end {
        return Ok(f.target);
    }
    // fraction of the concession period already used; 0 when there is no deadline
    let done = if end.is_finite() { t / end } else { 0.0 };
    let span = f.alpha - f.target;
    let drop = if f.gamma == 1.0 {
        done
    } else {
        // (gamma^(1-done) - gamma) / (1 - gamma), exactly 0 at done = 0 and
        // accurate near gamma = 1
        let ln_g = (f.gamma - 1.0).ln_1p();
        (done * ln_g).exp_m1() * ((1.0 - done) * ln_g).exp() / (f.gamma - 1.0)
    };
    Ok(f.alpha - span * drop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        let f = AspirationFunction::new(0.9, 0.3, 0.2, 10.0, None).unwrap();
        assert_eq!(aspiration_value(&f, 0.0).unwrap(), 0.9);
        assert_eq!(aspiration_value(&f, 10.0).unwrap(), 0.3);
        let g = AspirationFunction::new(0.9, 0.3, 3.0, 10.0, Some(8.0)).unwrap();
        assert_eq!(aspiration_value(&g, 8.0).unwrap(), 0.3);
        assert_eq!(aspiration_value(&g, 9.5).unwrap(), 0.3);
    }

    #[test]
    fn linear_when_gamma_is_one() {
        let f = AspirationFunction::new(1.0, 0.0, 1.0, 1.0, None).unwrap();
        assert_eq!(aspiration_value(&f, 0.25).unwrap(), 0.75);
    }

    #[test]
    fn out_of_range_time() {
        let f = AspirationFunction::new(1.0, 0.0, 0.5, 1.0, None).unwrap();
        assert!(matches!(aspiration_value(&f, 1.5), Err(Error::Range(_))));
        assert!(matches!(aspiration_value(&f, -0.1), Err(Error::Range(_))));
    }

    #[test]
    fn invalid_parameters() {
        assert!(AspirationFunction::new(0.5, 0.6, 0.2, 1.0, None).is_err());
        assert!(AspirationFunction::new(1.0, 0.6, 0.0, 1.0, None).is_err());
        assert!(AspirationFunction::new(1.0, 0.6, 0.2, 1.0, Some(2.0)).is_err());
    }

    #[test]
    fn no_deadline_keeps_alpha() {
        let f = AspirationFunction::new(0.8, 0.1, 0.2, f64::INFINITY, None).unwrap();
        assert_eq!(aspiration_value(&f, 1e6).unwrap(), 0.8);
    }

    #[test]
    fn hardheaded_and_conceder_shapes() {
        let hard = AspirationFunction::new(1.0, 0.0, 0.1, 1.0, None).unwrap();
        let soft = AspirationFunction::new(1.0, 0.0, 10.0, 1.0, None).unwrap();
        assert!(aspiration_value(&hard, 0.5).unwrap() > 0.5);
        assert!(aspiration_value(&soft, 0.5).unwrap() < 0.5);
    }

    proptest! {
        #[test]
        fn non_increasing(alpha in 0.0f64..1.0, drop in 0.0f64..1.0, gamma in 0.01f64..20.0, tp in 0.1f64..1.0) {
            let f = AspirationFunction::new(alpha, alpha - drop, gamma, 1.0, Some(tp)).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..=200 {
                let a = aspiration_value(&f, i as f64 / 200.0).unwrap();
                prop_assert!(a <= prev + 1e-12);
                prop_assert!(a >= f.target - 1e-12 && a <= f.alpha + 1e-12);
                prev = a;
            }
        }
    }
}
