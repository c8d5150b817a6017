use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceKind {
    /// Accept if the received offer is at least as good as our next bid.
    Next,
    /// Accept if the received offer meets the current aspiration level.
    Asp,
    /// Accept if the received offer beats the worst offer we proposed.
    Low,
}

/// Acceptance condition `a * u(received) + b  (>= or >)  reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceRule {
    pub kind: AcceptanceKind,
    pub a: f64,
    pub b: f64,
}

impl AcceptanceRule {
    pub fn new(kind: AcceptanceKind) -> Self {
        AcceptanceRule {
            kind,
            a: 1.0,
            b: 0.0,
        }
    }

    pub fn next() -> Self {
        Self::new(AcceptanceKind::Next)
    }

    pub fn asp() -> Self {
        Self::new(AcceptanceKind::Asp)
    }

    pub fn low() -> Self {
        Self::new(AcceptanceKind::Low)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AcceptanceKind::Next => "ac_next",
            AcceptanceKind::Asp => "ac_asp",
            AcceptanceKind::Low => "ac_low",
        }
    }
}

/// Applies `rule`. `u_next`, `asp_now` and `min_proposed` are only needed
/// by the rule that uses them.
pub fn decide_accept(
    rule: &AcceptanceRule,
    u_received: f64,
    u_next: Option<f64>,
    asp_now: Option<f64>,
    min_proposed: Option<f64>,
) -> Result<bool> {
    let lhs = rule.a * u_received + rule.b;
    let missing = |what: &str| Error::Config(format!("{} needs {what}", rule.name()));
    Ok(match rule.kind {
        AcceptanceKind::Next => lhs >= u_next.ok_or_else(|| missing("the next bid"))?,
        AcceptanceKind::Asp => lhs >= asp_now.ok_or_else(|| missing("an aspiration level"))?,
        AcceptanceKind::Low => lhs > min_proposed.ok_or_else(|| missing("a previous proposal"))?,
    })
}
