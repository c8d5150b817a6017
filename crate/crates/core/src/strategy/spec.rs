//! Text specs for strategies, such as
//! `timebased(beta=0.5,gamma=0.2,accept=ac_asp)` or `repropose:micro()`.

use std::fmt;

use super::{
    AcceptanceKind, AcceptanceRule, Adaptive, AspirationFunction, BidMode, BiddingStrategy,
    BoaAgent, ConcessionMeasure, Micro, RandomBidder, Selector, TargetEstimator, Tft, TftConfig,
    TimeBased,
};
use crate::domain::{min_max, NegotiationDomain};
use crate::error::{Error, Result};
use crate::model::{default_weight_grid, GpPredictor, Matern32, ModelSpec};
use crate::protocol::Negotiator;
use crate::seed::mix;

#[derive(Debug, Clone, PartialEq)]
pub enum SpecValue {
    Number(f64),
    Ident(String),
    Call(SpecCall),
}

impl fmt::Display for SpecValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecValue::Number(x) => write!(f, "{x}"),
            SpecValue::Ident(s) => f.write_str(s),
            SpecValue::Call(c) => write!(f, "{c}"),
        }
    }
}

/// `name(key=value,...)`. A bare identifier parses as a call without
/// arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecCall {
    pub name: String,
    pub args: Vec<(String, SpecValue)>,
}

impl fmt::Display for SpecCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..]
                .chars()
                .next()
                .map_or(0, char::len_utf8);
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn err(&self, what: &str) -> Error {
        let rest = &self.src[self.pos..];
        let token: String = rest
            .chars()
            .take_while(|c| !matches!(c, ',' | ')' | '(' | '='))
            .collect();
        let token = if token.is_empty() {
            rest.chars().take(1).collect()
        } else {
            token
        };
        if token.is_empty() {
            Error::Config(format!(
                "in spec `{}`: expected {what} at end of input",
                self.src
            ))
        } else {
            Error::Config(format!(
                "in spec `{}`: expected {what} at `{token}`",
                self.src
            ))
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("`{c}`")))
        }
    }

    fn word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+')))
            .unwrap_or(rest.len());
        if len == 0 {
            return None;
        }
        self.pos += len;
        Some(&rest[..len])
    }

    fn ident(&mut self) -> Result<&'a str> {
        let start = self.pos;
        match self.word() {
            Some(w) if w.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') => Ok(w),
            _ => {
                self.pos = start;
                Err(self.err("a name"))
            }
        }
    }

    fn call(&mut self) -> Result<SpecCall> {
        let name = self.ident()?.to_string();
        let mut args = Vec::new();
        if self.peek() != Some('(') {
            return Ok(SpecCall { name, args });
        }
        self.pos += 1;
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(SpecCall { name, args });
        }
        loop {
            let key = self.ident()?.to_string();
            self.expect('=')?;
            args.push((key, self.value()?));
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(SpecCall { name, args });
                }
                _ => return Err(self.err("`,` or `)`")),
            }
        }
    }

    fn value(&mut self) -> Result<SpecValue> {
        let start = self.pos;
        let Some(w) = self.word() else {
            return Err(self.err("a value"));
        };
        if let Ok(x) = w.parse::<f64>() {
            return Ok(SpecValue::Number(x));
        }
        self.pos = start;
        let call = self.call()?;
        if call.args.is_empty() && !self.src[start..self.pos].contains('(') {
            Ok(SpecValue::Ident(call.name))
        } else {
            Ok(SpecValue::Call(call))
        }
    }
}

pub fn parse_call(text: &str) -> Result<SpecCall> {
    let mut p = Parser { src: text, pos: 0 };
    let call = p.call()?;
    if p.peek().is_some() {
        return Err(p.err("end of spec"));
    }
    Ok(call)
}

/// Typed view over a call's arguments that remembers which keys were used.
struct Args<'a> {
    call: &'a SpecCall,
    used: Vec<bool>,
}

impl<'a> Args<'a> {
    fn new(call: &'a SpecCall) -> Self {
        Args {
            call,
            used: vec![false; call.args.len()],
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a SpecValue> {
        let i = self.call.args.iter().position(|(k, _)| k == key)?;
        self.used[i] = true;
        Some(&self.call.args[i].1)
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(SpecValue::Number(x)) => Ok(Some(*x)),
            Some(other) => Err(Error::Config(format!(
                "`{key}` in {} must be a number, got `{other}`",
                self.call.name
            ))),
        }
    }

    fn ident(&mut self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(SpecValue::Ident(s)) => Ok(Some(s)),
            Some(other) => Err(Error::Config(format!(
                "`{key}` in {} must be a name, got `{other}`",
                self.call.name
            ))),
        }
    }

    fn call(&mut self, key: &str) -> Option<SpecCall> {
        match self.get(key)? {
            SpecValue::Call(c) => Some(c.clone()),
            SpecValue::Ident(s) => Some(SpecCall {
                name: s.clone(),
                args: Vec::new(),
            }),
            SpecValue::Number(x) => Some(SpecCall {
                name: x.to_string(),
                args: Vec::new(),
            }),
        }
    }

    fn finish(self) -> Result<()> {
        match self.used.iter().position(|u| !u) {
            Some(i) => Err(Error::Config(format!(
                "unknown key `{}` in {}",
                self.call.args[i].0, self.call.name
            ))),
            None => Ok(()),
        }
    }
}

fn unknown(what: &str, token: &str) -> Error {
    Error::Config(format!("unknown {what} `{token}`"))
}

fn parse_accept(call: &SpecCall) -> Result<AcceptanceRule> {
    let kind = match call.name.as_str() {
        "ac_next" | "ac_next_param" => AcceptanceKind::Next,
        "ac_asp" | "ac_asp_param" => AcceptanceKind::Asp,
        "ac_low" | "ac_low_param" => AcceptanceKind::Low,
        other => return Err(unknown("acceptance rule", other)),
    };
    let mut args = Args::new(call);
    let a = args.number("a")?.unwrap_or(1.0);
    let b = args.number("b")?.unwrap_or(0.0);
    args.finish()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Config(format!(
            "acceptance parameters must be finite in `{call}`"
        )));
    }
    Ok(AcceptanceRule { kind, a, b })
}

fn weight_grid(steps: Option<f64>) -> Result<Vec<f64>> {
    match steps {
        None => Ok(default_weight_grid()),
        Some(s) if s >= 1.0 && s.fract() == 0.0 && s <= 1000.0 => {
            let n = s as usize;
            Ok((0..=n).map(|i| i as f64 / n as f64).collect())
        }
        Some(s) => Err(Error::Config(format!(
            "steps must be a whole number in 1..=1000, got {s}"
        ))),
    }
}

pub fn parse_model(call: &SpecCall) -> Result<ModelSpec> {
    let mut args = Args::new(call);
    let spec = match call.name.as_str() {
        "bayes" | "scalable_bayes" => {
            let c = args.number("c")?.unwrap_or(1.0);
            let sigma = args.number("sigma")?.unwrap_or(0.15);
            let weight_grid = weight_grid(args.number("steps")?)?;
            if call.name == "bayes" {
                ModelSpec::Bayes {
                    c,
                    sigma,
                    weight_grid,
                }
            } else {
                ModelSpec::ScalableBayes {
                    c,
                    sigma,
                    weight_grid,
                }
            }
        }
        "frequency" => ModelSpec::Frequency,
        "gp" => ModelSpec::Gp {
            length_scale: args.number("lengthscale")?,
            window: args.number("window")?,
            variance: args.number("variance")?.unwrap_or(0.04),
            noise: args.number("noise")?.unwrap_or(1e-8),
        },
        "dummy" => ModelSpec::Dummy {
            noise: args.number("noise")?.unwrap_or(0.0),
        },
        other => return Err(unknown("opponent model", other)),
    };
    args.finish()?;
    Ok(spec)
}

fn parse_mode(s: Option<&str>, default: BidMode) -> Result<BidMode> {
    match s {
        None => Ok(default),
        Some("max_opponent") => Ok(BidMode::MaxOpponent),
        Some("min_own") => Ok(BidMode::MinOwn),
        Some(other) => Err(unknown("bidding mode", other)),
    }
}

fn parse_measure(s: Option<&str>) -> Result<ConcessionMeasure> {
    match s {
        None | Some("own") => Ok(ConcessionMeasure::Own),
        Some("opp") | Some("opponent") => Ok(ConcessionMeasure::Opponent),
        Some("count") => Ok(ConcessionMeasure::Count),
        Some("relative") => Ok(ConcessionMeasure::Relative),
        Some(other) => Err(unknown("concession measure", other)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind {
    TimeBased {
        alpha: Option<f64>,
        beta: Option<f64>,
        gamma: f64,
        /// Fraction of the deadline at which the target is reached.
        target_fraction: f64,
        mode: BidMode,
        model: Option<ModelSpec>,
        accept: AcceptanceRule,
    },
    Adaptive {
        alpha: Option<f64>,
        beta_min: Option<f64>,
        gamma: f64,
        safety: f64,
        target_fraction: f64,
        mode: BidMode,
        model: ModelSpec,
        accept: AcceptanceRule,
    },
    Tft {
        config: TftConfig,
        model: Option<ModelSpec>,
        accept: AcceptanceRule,
    },
    Micro,
    Random {
        threshold: f64,
    },
}

/// A parsed strategy spec. `text` is the original string and serves as the
/// strategy's name in tournament output.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub repropose: bool,
    pub text: String,
}

impl StrategySpec {
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let (repropose, body) = match trimmed.strip_prefix("repropose:") {
            Some(rest) => (true, rest),
            None => (false, trimmed),
        };
        let call = parse_call(body)?;
        let mut args = Args::new(&call);
        let accept = |args: &mut Args<'_>, default: AcceptanceRule| -> Result<AcceptanceRule> {
            args.call("accept")
                .map_or(Ok(default), |c| parse_accept(&c))
        };
        let target_fraction = |args: &mut Args<'_>| -> Result<f64> {
            let f = args.number("tprime")?.unwrap_or(0.95);
            if f > 0.0 && f <= 1.0 {
                Ok(f)
            } else {
                Err(Error::Config(format!("tprime must lie in (0, 1], got {f}")))
            }
        };
        let kind = match call.name.as_str() {
            "timebased" => StrategyKind::TimeBased {
                alpha: args.number("alpha")?,
                beta: args.number("beta")?,
                gamma: args.number("gamma")?.unwrap_or(0.2),
                target_fraction: target_fraction(&mut args)?,
                mode: parse_mode(args.ident("mode")?, BidMode::MinOwn)?,
                model: args.call("model").map(|c| parse_model(&c)).transpose()?,
                accept: accept(&mut args, AcceptanceRule::asp())?,
            },
            "adaptive" => StrategyKind::Adaptive {
                alpha: args.number("alpha")?,
                beta_min: args.number("beta_min")?,
                gamma: args.number("gamma")?.unwrap_or(0.2),
                safety: args.number("safety")?.unwrap_or(0.1),
                target_fraction: target_fraction(&mut args)?,
                mode: parse_mode(args.ident("mode")?, BidMode::MaxOpponent)?,
                model: args
                    .call("model")
                    .map_or(Ok(ModelSpec::Frequency), |c| parse_model(&c))?,
                accept: accept(&mut args, AcceptanceRule::asp())?,
            },
            "tft" => {
                let config = TftConfig {
                    measure_self: parse_measure(args.ident("measure_self")?)?,
                    measure_opp: parse_measure(args.ident("measure_opp")?)?,
                    e_min: args.number("emin")?.unwrap_or(0.0),
                    e_max: args.number("emax")?,
                    selector: match args.ident("selector")? {
                        None | Some("own_max") => Selector::OwnMax,
                        Some("opponent_max") | Some("opp_max") => Selector::OpponentMax,
                        Some(other) => return Err(unknown("selector", other)),
                    },
                };
                config.check()?;
                let accept = accept(&mut args, AcceptanceRule::next())?;
                if accept.kind == AcceptanceKind::Asp {
                    return Err(Error::Config(
                        "tft has no aspiration level; use ac_next or ac_low".into(),
                    ));
                }
                StrategyKind::Tft {
                    config,
                    model: args.call("model").map(|c| parse_model(&c)).transpose()?,
                    accept,
                }
            }
            "micro" => StrategyKind::Micro,
            "random" => StrategyKind::Random {
                threshold: args.number("threshold")?.unwrap_or(0.9),
            },
            other => return Err(unknown("strategy", other)),
        };
        args.finish()?;
        let spec = StrategySpec {
            kind,
            repropose,
            text: trimmed.to_string(),
        };
        spec.check_static()?;
        Ok(spec)
    }

    /// Checks that do not depend on the domain.
    fn check_static(&self) -> Result<()> {
        let gp_misuse = |m: &Option<ModelSpec>| matches!(m, Some(ModelSpec::Gp { .. }));
        match &self.kind {
            StrategyKind::TimeBased { gamma, model, .. } => {
                if !(*gamma > 0.0) {
                    return Err(Error::Config(format!(
                        "gamma must be positive, got {gamma}"
                    )));
                }
                if gp_misuse(model) {
                    return Err(Error::Config("gp is only available to adaptive".into()));
                }
            }
            StrategyKind::Adaptive { gamma, safety, .. } => {
                if !(*gamma > 0.0) || !(*safety >= 0.0) {
                    return Err(Error::Config(
                        "adaptive needs gamma > 0 and safety >= 0".into(),
                    ));
                }
            }
            StrategyKind::Tft { model, .. } if gp_misuse(model) => {
                return Err(Error::Config("gp is only available to adaptive".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Instantiates a fresh negotiator for `agent` (1 or 2).
    pub fn build(
        &self,
        domain: &NegotiationDomain,
        agent: usize,
        deadline: f64,
        seed: u64,
    ) -> Result<Box<dyn Negotiator>> {
        let own = domain.table(agent);
        let r = domain.reservation(agent);
        let u_max = min_max(own).1;
        let default_beta = r + 0.1 * (u_max - r);
        let model_seed = mix(seed, &[agent as u64, 1]);
        let strategy_seed = mix(seed, &[agent as u64, 2]);
        let target_time = |fraction: f64| deadline.is_finite().then(|| fraction * deadline);

        let (bidding, model, accept): (
            Box<dyn BiddingStrategy>,
            Option<ModelSpec>,
            AcceptanceRule,
        ) = match &self.kind {
            StrategyKind::TimeBased {
                alpha,
                beta,
                gamma,
                target_fraction,
                mode,
                model,
                accept,
            } => {
                let alpha = alpha.unwrap_or(u_max);
                let beta = beta.unwrap_or(default_beta).max(r);
                let aspiration = AspirationFunction::new(
                    alpha,
                    beta,
                    *gamma,
                    deadline,
                    target_time(*target_fraction),
                )?;
                let model = match (mode, model) {
                    (BidMode::MaxOpponent, None) => Some(ModelSpec::Frequency),
                    (_, m) => m.clone(),
                };
                (
                    Box::new(TimeBased {
                        aspiration,
                        mode: *mode,
                    }),
                    model,
                    *accept,
                )
            }
            StrategyKind::Adaptive {
                alpha,
                beta_min,
                gamma,
                safety,
                target_fraction,
                mode,
                model,
                accept,
            } => {
                let alpha = alpha.unwrap_or(u_max);
                let minimum_target = beta_min.unwrap_or(default_beta).max(r);
                if minimum_target > alpha {
                    return Err(Error::Config(format!(
                        "beta_min {minimum_target} exceeds alpha {alpha}"
                    )));
                }
                let (estimator, utility_model) = match model {
                    ModelSpec::Gp {
                        length_scale,
                        window,
                        variance,
                        noise,
                    } => {
                        if !deadline.is_finite() && (length_scale.is_none() || window.is_none()) {
                            return Err(Error::Config(
                                "gp needs explicit lengthscale and window without a deadline"
                                    .into(),
                            ));
                        }
                        let kernel = Matern32 {
                            length_scale: length_scale.unwrap_or(0.2 * deadline),
                            variance: *variance,
                        };
                        let gp =
                            GpPredictor::new(kernel, *noise, window.unwrap_or(deadline / 20.0))?;
                        (TargetEstimator::Gp(gp), ModelSpec::Frequency)
                    }
                    m => (TargetEstimator::Model, m.clone()),
                };
                let bidder = Adaptive {
                    alpha,
                    gamma: *gamma,
                    minimum_target,
                    safety: *safety,
                    target_fraction: *target_fraction,
                    mode: *mode,
                    estimator,
                    grid: (0..=100).map(|i| i as f64 / 100.0).collect(),
                    last_target: None,
                };
                (Box::new(bidder), Some(utility_model), *accept)
            }
            StrategyKind::Tft {
                config,
                model,
                accept,
            } => {
                let model = match model {
                    None if config.needs_model() => Some(ModelSpec::Frequency),
                    m => m.clone(),
                };
                (Box::new(Tft { config: *config }), model, *accept)
            }
            StrategyKind::Micro => (
                Box::new(Micro::new(strategy_seed)),
                None,
                AcceptanceRule::asp(),
            ),
            StrategyKind::Random { threshold } => (
                Box::new(RandomBidder::new(*threshold, strategy_seed)),
                None,
                AcceptanceRule::asp(),
            ),
        };
        let model = model
            .map(|m| m.build(domain, agent, deadline, model_seed))
            .transpose()?;
        Ok(Box::new(BoaAgent::new(
            bidding,
            model,
            accept,
            self.repropose,
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_split_the_pie;

    #[test]
    fn parses_nested_calls() {
        let c = parse_call("timebased(alpha=1, beta=0.5,accept=ac_next(a=1.02,b=0),mode=min_own)")
            .unwrap();
        assert_eq!(c.name, "timebased");
        assert_eq!(c.args[0], ("alpha".into(), SpecValue::Number(1.0)));
        assert_eq!(
            c.args[3],
            ("mode".into(), SpecValue::Ident("min_own".into()))
        );
        match &c.args[2].1 {
            SpecValue::Call(inner) => assert_eq!(inner.args.len(), 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_call("micro").unwrap().args.len(), 0);
    }

    #[test]
    fn parse_errors_name_the_token() {
        for (text, token) in [
            ("timebased(beta=0.5,", "end of input"),
            ("timebased(beta=0.5 gamma=1)", "gamma"),
            ("timebased(beta=0.5))", ")"),
        ] {
            let msg = parse_call(text).unwrap_err().to_string();
            assert!(msg.contains(token), "{msg}");
        }
        let msg = StrategySpec::parse("timebased(bogus=1)")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("bogus"), "{msg}");
        let msg = StrategySpec::parse("timebased(accept=ac_whatever)")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("ac_whatever"), "{msg}");
        assert!(StrategySpec::parse("nope()").unwrap_err().is_config());
    }

    #[test]
    fn documented_examples_parse() {
        for text in [
            "timebased(alpha=1,beta=0.5,gamma=0.2,mode=min_own,accept=ac_asp)",
            "micro()",
            "tft(measure_self=own,measure_opp=own,emin=0,selector=own_max)",
            "adaptive(beta_min=0.5,model=scalable_bayes)",
            "random(threshold=0.9)",
            "repropose:timebased()",
            "adaptive(model=gp(lengthscale=2,window=0.5))",
            "timebased(mode=max_opponent,model=bayes(c=1,sigma=0.15,steps=4),accept=ac_next_param(a=1.02,b=0))",
        ] {
            let spec = StrategySpec::parse(text).unwrap_or_else(|e| panic!("{text}: {e}"));
            let d = generate_split_the_pie(11).unwrap();
            spec.build(&d, 1, 10.0, 7).unwrap_or_else(|e| panic!("{text}: {e}"));
        }
        assert!(StrategySpec::parse("repropose:micro()").unwrap().repropose);
    }

    #[test]
    fn defaults() {
        match StrategySpec::parse("timebased()").unwrap().kind {
            StrategyKind::TimeBased {
                alpha,
                beta,
                gamma,
                target_fraction,
                mode,
                accept,
                ..
            } => {
                assert_eq!(
                    (alpha, beta, gamma, target_fraction),
                    (None, None, 0.2, 0.95)
                );
                assert_eq!(mode, BidMode::MinOwn);
                assert_eq!(accept, AcceptanceRule::asp());
            }
            other => panic!("{other:?}"),
        }
        match StrategySpec::parse("tft()").unwrap().kind {
            StrategyKind::Tft { config, accept, .. } => {
                assert_eq!(config, TftConfig::default());
                assert_eq!(accept, AcceptanceRule::next());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_errors() {
        assert!(StrategySpec::parse("tft(accept=ac_asp)")
            .unwrap_err()
            .is_config());
        assert!(StrategySpec::parse("tft(emin=0.5,emax=0.1)").is_err());
        assert!(StrategySpec::parse("timebased(gamma=0)").is_err());
        assert!(StrategySpec::parse("timebased(model=gp())").is_err());
        assert!(StrategySpec::parse("timebased(beta=x)").is_err());
        let d = generate_split_the_pie(11).unwrap();
        let gp = StrategySpec::parse("adaptive(model=gp())").unwrap();
        assert!(gp
            .build(&d, 1, f64::INFINITY, 0)
            .err()
            .is_some_and(|e| e.is_config()));
        let bad = StrategySpec::parse("timebased(alpha=0.3,beta=0.5)").unwrap();
        assert!(bad.build(&d, 1, 10.0, 0).is_err());
    }
}
