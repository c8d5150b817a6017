use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-player game in strategic form. Row `i`, column `j` holds the
/// payoffs when player 1 plays action `i` and player 2 plays action `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNormalForm", into = "RawNormalForm")]
pub struct NormalFormGame {
    labels: [Vec<String>; 2],
    payoffs: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct RawNormalForm {
    actions: [Vec<String>; 2],
    payoffs: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<RawNormalForm> for NormalFormGame {
    type Error = Error;
    fn try_from(raw: RawNormalForm) -> Result<Self> {
        NormalFormGame::new(raw.actions[0].clone(), raw.actions[1].clone(), raw.payoffs)
    }
}

impl From<NormalFormGame> for RawNormalForm {
    fn from(g: NormalFormGame) -> Self {
        RawNormalForm {
            actions: g.labels,
            payoffs: g.payoffs,
        }
    }
}

impl NormalFormGame {
    pub fn new(
        row_actions: Vec<String>,
        col_actions: Vec<String>,
        payoffs: Vec<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        if row_actions.is_empty() || col_actions.is_empty() {
            return Err(Error::Config(
                "each player needs at least one action".into(),
            ));
        }
        if payoffs.len() != row_actions.len()
            || payoffs.iter().any(|r| r.len() != col_actions.len())
        {
            return Err(Error::Config(format!(
                "payoff matrix must be {}x{}",
                row_actions.len(),
                col_actions.len()
            )));
        }
        if payoffs.iter().flatten().flatten().any(|u| !u.is_finite()) {
            return Err(Error::Config("payoffs must be finite".into()));
        }
        Ok(NormalFormGame {
            labels: [row_actions, col_actions],
            payoffs,
        })
    }

    /// Convenience constructor from string slices.
    pub fn from_table(rows: &[&str], cols: &[&str], payoffs: &[&[[f64; 2]]]) -> Result<Self> {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self::new(
            owned(rows),
            owned(cols),
            payoffs.iter().map(|r| r.to_vec()).collect(),
        )
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.labels[player - 1].len()
    }

    pub fn labels(&self, player: usize) -> &[String] {
        &self.labels[player - 1]
    }

    pub fn label(&self, player: usize, action: usize) -> &str {
        &self.labels[player - 1][action]
    }

    pub fn payoff(&self, row: usize, col: usize) -> [f64; 2] {
        self.payoffs[row][col]
    }

    /// Utility of `player` when `own` is their action and `other` the
    /// opponent's.
    fn utility_from(&self, player: usize, own: usize, other: usize) -> f64 {
        match player {
            1 => self.payoffs[own][other][0],
            _ => self.payoffs[other][own][1],
        }
    }
}

/// Probability vectors over each player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

const PROBABILITY_TOLERANCE: f64 = 1e-9;

impl MixedProfile {
    pub fn new(game: &NormalFormGame, row: Vec<f64>, col: Vec<f64>) -> Result<Self> {
        for (player, v) in [(1, &row), (2, &col)] {
            if v.len() != game.num_actions(player) {
                return Err(Error::Config(format!(
                    "player {player} needs {} probabilities",
                    game.num_actions(player)
                )));
            }
            if v.iter().any(|p| !(*p >= 0.0))
                || (v.iter().sum::<f64>() - 1.0).abs() > PROBABILITY_TOLERANCE
            {
                return Err(Error::Config(format!(
                    "player {player}'s probabilities must be >= 0 and sum to 1"
                )));
            }
        }
        Ok(MixedProfile { row, col })
    }

    pub fn pure(game: &NormalFormGame, row: usize, col: usize) -> Self {
        let point = |n, i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
        MixedProfile {
            row: point(game.num_actions(1), row),
            col: point(game.num_actions(2), col),
        }
    }

    fn of(&self, player: usize) -> &[f64] {
        if player == 1 {
            &self.row
        } else {
            &self.col
        }
    }
}

/// Actions of `responder` that maximize its payoff against the opponent's
/// fixed action.
pub fn best_responses(
    game: &NormalFormGame,
    responder: usize,
    opponent_action: usize,
) -> Result<Vec<usize>> {
    if !(responder == 1 || responder == 2) {
        return Err(Error::Range(format!(
            "player must be 1 or 2, got {responder}"
        )));
    }
    if opponent_action >= game.num_actions(3 - responder) {
        return Err(Error::Range(format!(
            "no action {opponent_action} for player {}",
            3 - responder
        )));
    }
    let u: Vec<f64> = (0..game.num_actions(responder))
        .map(|a| game.utility_from(responder, a, opponent_action))
        .collect();
    let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..u.len()).filter(|&a| u[a] == best).collect())
}

/// All pure action pairs in which each action is a best response to the
/// other, in row-major order.
pub fn pure_nash_equilibria(game: &NormalFormGame) -> Vec<(usize, usize)> {
    let br2: Vec<Vec<usize>> = (0..game.num_actions(1))
        .map(|a| best_responses(game, 2, a).expect("valid"))
        .collect();
    let br1: Vec<Vec<usize>> = (0..game.num_actions(2))
        .map(|b| best_responses(game, 1, b).expect("valid"))
        .collect();
    let mut out = Vec::new();
    for a in 0..game.num_actions(1) {
        for b in 0..game.num_actions(2) {
            if br1[b].contains(&a) && br2[a].contains(&b) {
                out.push((a, b));
            }
        }
    }
    out
}

pub fn expected_utility(game: &NormalFormGame, profile: &MixedProfile, player: usize) -> f64 {
    let k = player - 1;
    let mut total = 0.0;
    for (a, pa) in profile.row.iter().enumerate() {
        for (b, pb) in profile.col.iter().enumerate() {
            total += pa * pb * game.payoffs[a][b][k];
        }
    }
    total
}

/// Expected utility of `player` playing pure `action` against the
/// opponent's mixed strategy in `profile`.
fn deviation_utility(
    game: &NormalFormGame,
    profile: &MixedProfile,
    player: usize,
    action: usize,
) -> f64 {
    profile
        .of(3 - player)
        .iter()
        .enumerate()
        .map(|(b, pb)| pb * game.utility_from(player, action, b))
        .sum()
}

/// No pure unilateral deviation gains more than `tolerance`; pure
/// deviations suffice because expected utility is linear in each player's
/// own probabilities.
pub fn is_nash_equilibrium(game: &NormalFormGame, profile: &MixedProfile, tolerance: f64) -> bool {
    [1, 2].into_iter().all(|player| {
        let current = expected_utility(game, profile, player);
        (0..game.num_actions(player))
            .all(|a| deviation_utility(game, profile, player, a) <= current + tolerance)
    })
}

/// Square game in which swapping the players' roles leaves payoffs
/// unchanged, with actions identified by index.
pub fn is_symmetric(game: &NormalFormGame) -> bool {
    let n = game.num_actions(1);
    n == game.num_actions(2)
        && (0..n).all(|a| (0..n).all(|b| game.payoffs[a][b][0] == game.payoffs[b][a][1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSelection {
    /// Strategy both players use, or `None` if no supplied equilibrium was
    /// symmetric.
    pub strategy: Option<Vec<f64>>,
    pub value: Option<f64>,
    /// Number of symmetric equilibria attaining the best value.
    pub ties: usize,
}

/// Among the supplied equilibria with identical strategies for both
/// players, the one with the highest payoff. Ties go to the first listed.
pub fn select_symmetric_equilibrium(
    game: &NormalFormGame,
    equilibria: &[MixedProfile],
) -> Result<SymmetricSelection> {
    if !is_symmetric(game) {
        return Err(Error::Precondition("game is not symmetric".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut ties = 0;
    for (i, p) in equilibria.iter().enumerate() {
        let same = p.row.len() == p.col.len()
            && p.row
                .iter()
                .zip(&p.col)
                .all(|(a, b)| (a - b).abs() <= PROBABILITY_TOLERANCE);
        if !same {
            continue;
        }
        let v = expected_utility(game, p, 1);
        match best {
            Some((_, bv)) if v < bv => {}
            Some((_, bv)) if v == bv => ties += 1,
            _ => {
                best = Some((i, v));
                ties = 1;
            }
        }
    }
    Ok(SymmetricSelection {
        strategy: best.map(|(i, _)| equilibria[i].row.clone()),
        value: best.map(|(_, v)| v),
        ties,
    })
}

/// Payoff tables used in examples and tests.
pub mod classic {
    use super::NormalFormGame;

    pub fn prisoners_dilemma() -> NormalFormGame {
        NormalFormGame::from_table(
            &["deny", "confess"],
            &["deny", "confess"],
            &[&[[8.0, 8.0], [0.0, 10.0]], &[[10.0, 0.0], [2.0, 2.0]]],
        )
        .expect("valid table")
    }

    pub fn battle_of_the_sexes() -> NormalFormGame {
        NormalFormGame::from_table(
            &["football", "ballet"],
            &["football", "ballet"],
            &[&[[2.0, 1.0], [0.0, 0.0]], &[[0.0, 0.0], [1.0, 2.0]]],
        )
        .expect("valid table")
    }

    /// Win 2, draw 1, lose 0.
    pub fn paper_scissors_rock() -> NormalFormGame {
        NormalFormGame::from_table(
            &["paper", "scissors", "rock"],
            &["paper", "scissors", "rock"],
            &[
                &[[1.0, 1.0], [0.0, 2.0], [2.0, 0.0]],
                &[[2.0, 0.0], [1.0, 1.0], [0.0, 2.0]],
                &[[0.0, 2.0], [2.0, 0.0], [1.0, 1.0]],
            ],
        )
        .expect("valid table")
    }
}
