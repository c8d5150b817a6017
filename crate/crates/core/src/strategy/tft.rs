use super::{argmax_by, best_repeat, Bid, BiddingStrategy};
use crate::domain::{min_max, OfferId};
use crate::error::{Error, Result};
use crate::model::OpponentModel;
use crate::protocol::{OfferSet, StrategyContext};

/// How concessions are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcessionMeasure {
    /// In our own utility.
    Own,
    /// In the opponent's estimated utility.
    Opponent,
    /// Number of distinct offers.
    Count,
    /// In our own utility, relative to the distance to an ideal offer that
    /// maximizes estimated social welfare.
    Relative,
}

impl ConcessionMeasure {
    pub fn name(self) -> &'static str {
        match self {
            ConcessionMeasure::Own => "own",
            ConcessionMeasure::Opponent => "opp",
            ConcessionMeasure::Count => "count",
            ConcessionMeasure::Relative => "relative",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(
            self,
            ConcessionMeasure::Opponent | ConcessionMeasure::Relative
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Best offer for us among those conceding enough.
    OwnMax,
    /// Best offer for the opponent among those conceding enough but not
    /// too much.
    OpponentMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TftConfig {
    pub measure_self: ConcessionMeasure,
    pub measure_opp: ConcessionMeasure,
    pub e_min: f64,
    pub e_max: Option<f64>,
    pub selector: Selector,
}

impl Default for TftConfig {
    fn default() -> Self {
        TftConfig {
            measure_self: ConcessionMeasure::Own,
            measure_opp: ConcessionMeasure::Own,
            e_min: 0.0,
            e_max: None,
            selector: Selector::OwnMax,
        }
    }
}

impl TftConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.e_min >= 0.0) {
            return Err(Error::Config(format!(
                "emin must be >= 0, got {}",
                self.e_min
            )));
        }
        if let Some(e_max) = self.e_max {
            if !(e_max > self.e_min) {
                return Err(Error::Config(format!(
                    "emax {e_max} must exceed emin {}",
                    self.e_min
                )));
            }
        }
        Ok(())
    }

    pub fn needs_model(&self) -> bool {
        self.measure_self.needs_model()
            || self.measure_opp.needs_model()
            || self.selector == Selector::OpponentMax
    }
}

/// Precomputed extremes for evaluating concession gains.
struct Gauge<'a> {
    own: &'a [f64],
    opp: Option<&'a [f64]>,
    own_range: (f64, f64),
    opp_range: (f64, f64),
    ideal_own: Option<f64>,
}

impl<'a> Gauge<'a> {
    fn new(cfg: &TftConfig, own: &'a [f64], opp: Option<&'a [f64]>) -> Result<Self> {
        if (cfg.measure_self.needs_model() || cfg.measure_opp.needs_model()) && opp.is_none() {
            return Err(Error::Config(
                "this concession measure needs an opponent model".into(),
            ));
        }
        let own_range = min_max(own);
        let opp_range = opp.map_or((0.0, 0.0), min_max);
        let ideal_own = opp.map(|e| {
            let ideal = argmax_by(0..own.len(), |id| own[id] + e[id]).expect("non-empty space");
            own[ideal]
        });
        let g = Gauge {
            own,
            opp,
            own_range,
            opp_range,
            ideal_own,
        };
        if cfg.measure_self == ConcessionMeasure::Relative && g.relative_spans().0 == 0.0
            || cfg.measure_opp == ConcessionMeasure::Relative && g.relative_spans().1 == 0.0
        {
            return Err(Error::Config(
                "ideal offer coincides with an extreme of our utility".into(),
            ));
        }
        Ok(g)
    }

    fn relative_spans(&self) -> (f64, f64) {
        let ideal = self.ideal_own.unwrap_or(f64::NAN);
        (self.own_range.1 - ideal, ideal - self.own_range.0)
    }

    fn own_step(&self, measure: ConcessionMeasure, id: OfferId) -> f64 {
        let hi = self.own_range.1;
        match measure {
            ConcessionMeasure::Own => hi - self.own[id],
            ConcessionMeasure::Opponent => self.opp.expect("checked")[id] - self.opp_range.0,
            ConcessionMeasure::Relative => (hi - self.own[id]) / self.relative_spans().0,
            ConcessionMeasure::Count => unreachable!("count is not a per-offer measure"),
        }
    }

    fn opp_step(&self, measure: ConcessionMeasure, id: OfferId) -> f64 {
        match measure {
            ConcessionMeasure::Own => self.own[id] - self.own_range.0,
            ConcessionMeasure::Opponent => self.opp_range.1 - self.opp.expect("checked")[id],
            ConcessionMeasure::Relative => {
                (self.own[id] - self.own_range.0) / self.relative_spans().1
            }
            ConcessionMeasure::Count => unreachable!("count is not a per-offer measure"),
        }
    }

    fn own_concession(&self, measure: ConcessionMeasure, pro: &OfferSet) -> f64 {
        match measure {
            ConcessionMeasure::Count => pro.len() as f64,
            m => pro
                .iter()
                .map(|id| self.own_step(m, id))
                .fold(0.0, f64::max),
        }
    }

    fn opp_concession(&self, measure: ConcessionMeasure, rec: &OfferSet) -> f64 {
        match measure {
            ConcessionMeasure::Count => rec.len() as f64,
            m => rec
                .iter()
                .map(|id| self.opp_step(m, id))
                .fold(0.0, f64::max),
        }
    }

    /// Our concession after adding `id` to `pro`, given the concession of
    /// `pro` alone.
    fn own_concession_with(
        &self,
        measure: ConcessionMeasure,
        pro: &OfferSet,
        base: f64,
        id: OfferId,
    ) -> f64 {
        match measure {
            ConcessionMeasure::Count => base + if pro.contains(id) { 0.0 } else { 1.0 },
            m => base.max(self.own_step(m, id)),
        }
    }
}

/// Our concession after proposing `candidate` minus the opponent's
/// concession so far. Concessions over an empty set are 0.
pub fn tft_concession_gain(
    cfg: &TftConfig,
    own: &[f64],
    opponent_estimate: Option<&[f64]>,
    pro: &OfferSet,
    rec: &OfferSet,
    candidate: OfferId,
) -> Result<f64> {
    let g = Gauge::new(cfg, own, opponent_estimate)?;
    let base = g.own_concession(cfg.measure_self, pro);
    Ok(
        g.own_concession_with(cfg.measure_self, pro, base, candidate)
            - g.opp_concession(cfg.measure_opp, rec),
    )
}

/// Next offer under the configured selector; repeats our best earlier
/// proposal when no offer qualifies.
pub fn tft_select_bid(
    cfg: &TftConfig,
    own: &[f64],
    reservation: f64,
    opponent_estimate: Option<&[f64]>,
    pro: &OfferSet,
    rec: &OfferSet,
) -> Result<OfferId> {
    if cfg.selector == Selector::OpponentMax && opponent_estimate.is_none() {
        return Err(Error::Config(
            "opponent_max selection needs an opponent model".into(),
        ));
    }
    let g = Gauge::new(cfg, own, opponent_estimate)?;
    let base = g.own_concession(cfg.measure_self, pro);
    let theirs = g.opp_concession(cfg.measure_opp, rec);
    let upper = cfg.e_max.unwrap_or(f64::INFINITY);
    let gain = |id| g.own_concession_with(cfg.measure_self, pro, base, id) - theirs;
    let candidates = (0..own.len()).filter(|&id| own[id] > reservation);
    let pick = match cfg.selector {
        Selector::OwnMax => argmax_by(candidates.filter(|&id| gain(id) > cfg.e_min), |id| own[id]),
        Selector::OpponentMax => {
            let est = opponent_estimate.expect("checked above");
            argmax_by(
                candidates.filter(|&id| gain(id) > cfg.e_min && gain(id) < upper),
                |id| est[id],
            )
        }
    };
    Ok(pick.unwrap_or_else(|| {
        argmax_by(pro.iter(), |id| own[id])
            .or_else(|| argmax_by(0..own.len(), |id| own[id]))
            .expect("non-empty space")
    }))
}

pub struct Tft {
    pub config: TftConfig,
}

impl BiddingStrategy for Tft {
    fn bid(&mut self, ctx: &StrategyContext<'_>, model: Option<&dyn OpponentModel>) -> Bid {
        let est = model.map(|m| m.estimates());
        let offer = tft_select_bid(
            &self.config,
            ctx.utilities(),
            ctx.reservation(),
            est,
            ctx.proposed,
            ctx.received,
        )
        .unwrap_or_else(|_| best_repeat(ctx));
        Bid {
            offer,
            aspiration: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_split_the_pie;

    fn pie() -> (Vec<f64>, Vec<f64>) {
        let d = generate_split_the_pie(101).unwrap();
        (d.table(1).to_vec(), d.table(2).to_vec())
    }

    /// Offer id whose own utility on split-the-pie(101) is `u`.
    fn at(u: f64) -> OfferId {
        (u * 100.0).round() as usize
    }

    #[test]
    fn own_measure_example() {
        let (own, _) = pie();
        let pro: OfferSet = [at(1.0), at(0.8), at(0.7)].into_iter().collect();
        let rec: OfferSet = [at(0.1), at(0.3)].into_iter().collect();
        let g =
            tft_concession_gain(&TftConfig::default(), &own, None, &pro, &rec, at(0.65)).unwrap();
        assert!((g - 0.05).abs() < 1e-12);
    }

    #[test]
    fn nothing_proposed_max_offer_gains_nothing() {
        let (own, _) = pie();
        let g = tft_concession_gain(
            &TftConfig::default(),
            &own,
            None,
            &OfferSet::new(),
            &OfferSet::new(),
            at(1.0),
        )
        .unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn count_measure() {
        let (own, _) = pie();
        let cfg = TftConfig {
            measure_self: ConcessionMeasure::Count,
            measure_opp: ConcessionMeasure::Count,
            ..Default::default()
        };
        let pro: OfferSet = [100, 99].into_iter().collect();
        let rec: OfferSet = [3].into_iter().collect();
        assert_eq!(
            tft_concession_gain(&cfg, &own, None, &pro, &rec, 98).unwrap(),
            2.0
        );
        assert_eq!(
            tft_concession_gain(&cfg, &own, None, &pro, &rec, 99).unwrap(),
            1.0
        );
    }

    #[test]
    fn mirrors_opponent_concession() {
        let (own, _) = pie();
        let pro: OfferSet = [at(1.0)].into_iter().collect();
        let rec: OfferSet = [at(0.1)].into_iter().collect();
        // strictly more than 0.1 conceded: the 0.89 offer
        let id = tft_select_bid(&TftConfig::default(), &own, 0.0, None, &pro, &rec).unwrap();
        assert_eq!(id, at(0.89));
        // with a minimum gain the reply concedes exactly to 0.9
        let cfg = TftConfig {
            e_min: -1e-9,
            ..Default::default()
        };
        assert_eq!(
            tft_select_bid(&cfg, &own, 0.0, None, &pro, &rec).unwrap(),
            at(0.9)
        );
    }

    #[test]
    fn zero_gain_excluded_and_fallback_repeats() {
        let own = vec![1.0, 0.6, 0.5, 0.0];
        let pro: OfferSet = [0].into_iter().collect();
        let rec: OfferSet = [2].into_iter().collect();
        // the opponent conceded 0.5; offer 2 would match it exactly (gain 0)
        // and offer 3 is not above the reservation value, so repeat offer 0
        assert_eq!(
            tft_select_bid(&TftConfig::default(), &own, 0.0, None, &pro, &rec).unwrap(),
            0
        );
    }

    #[test]
    fn opponent_measures_need_a_model() {
        let (own, opp) = pie();
        let cfg = TftConfig {
            measure_opp: ConcessionMeasure::Opponent,
            ..Default::default()
        };
        let none = OfferSet::new();
        assert!(tft_concession_gain(&cfg, &own, None, &none, &none, 0)
            .unwrap_err()
            .is_config());
        assert!(tft_concession_gain(&cfg, &own, Some(&opp), &none, &none, 0).is_ok());
    }

    #[test]
    fn relative_measure_degenerate_ideal() {
        let own = vec![1.0, 0.0];
        let opp = vec![1.0, 0.0];
        let cfg = TftConfig {
            measure_self: ConcessionMeasure::Relative,
            ..Default::default()
        };
        let none = OfferSet::new();
        assert!(tft_concession_gain(&cfg, &own, Some(&opp), &none, &none, 0).is_err());
    }

    #[test]
    fn relative_measure_scales_by_ideal() {
        let (own, opp) = pie();
        let cfg = TftConfig {
            measure_self: ConcessionMeasure::Relative,
            measure_opp: ConcessionMeasure::Relative,
            ..Default::default()
        };
        // every offer has welfare 1, so the ideal is the lowest id: own utility 0
        // which is degenerate for the opponent side
        let none = OfferSet::new();
        assert!(tft_concession_gain(&cfg, &own, Some(&opp), &none, &none, 50).is_err());
        let bumped: Vec<f64> = opp
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 50 { v + 0.1 } else { *v })
            .collect();
        let g = tft_concession_gain(&cfg, &own, Some(&bumped), &none, &none, at(0.75)).unwrap();
        assert!((g - 0.5).abs() < 1e-12);
    }

    #[test]
    fn opponent_max_respects_bounds() {
        let (own, opp) = pie();
        let cfg = TftConfig {
            selector: Selector::OpponentMax,
            e_max: Some(0.05),
            ..Default::default()
        };
        let pro: OfferSet = [at(1.0)].into_iter().collect();
        let rec: OfferSet = [at(0.1)].into_iter().collect();
        let id = tft_select_bid(&cfg, &own, 0.0, Some(&opp), &pro, &rec).unwrap();
        // gain in (0, 0.05): own utility in (0.85, 0.9); best for opponent is 0.86
        assert_eq!(id, at(0.86));
    }
}
