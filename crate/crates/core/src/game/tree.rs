use serde::{Deserialize, Serialize};

use super::normal::NormalFormGame;
use crate::error::{Error, Result};

/// Node of a finite two-player game tree with perfect information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameNode {
    Leaf { payoff: [f64; 2] },
    Decision { player: usize, children: Vec<Edge> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub action: String,
    pub node: GameNode,
}

/// Decision node in preorder, with its owner and branch count.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionInfo {
    pub player: usize,
    pub path: Vec<String>,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameNode", into = "GameNode")]
pub struct TurnTakingGame {
    root: GameNode,
    decisions: Vec<DecisionInfo>,
}

impl TryFrom<GameNode> for TurnTakingGame {
    type Error = Error;
    fn try_from(root: GameNode) -> Result<Self> {
        TurnTakingGame::new(root)
    }
}

impl From<TurnTakingGame> for GameNode {
    fn from(g: TurnTakingGame) -> Self {
        g.root
    }
}

fn collect(node: &GameNode, path: &mut Vec<String>, out: &mut Vec<DecisionInfo>) -> Result<()> {
    match node {
        GameNode::Leaf { payoff } => {
            if payoff.iter().any(|u| !u.is_finite()) {
                return Err(Error::Config(format!("non-finite payoff after {path:?}")));
            }
        }
        GameNode::Decision { player, children } => {
            if !(*player == 1 || *player == 2) {
                return Err(Error::Config(format!(
                    "player must be 1 or 2, got {player}"
                )));
            }
            if children.is_empty() {
                return Err(Error::Config(format!(
                    "decision node after {path:?} has no actions"
                )));
            }
            out.push(DecisionInfo {
                player: *player,
                path: path.clone(),
                actions: children.iter().map(|e| e.action.clone()).collect(),
            });
            for e in children {
                path.push(e.action.clone());
                collect(&e.node, path, out)?;
                path.pop();
            }
        }
    }
    Ok(())
}

impl TurnTakingGame {
    pub fn new(root: GameNode) -> Result<Self> {
        let mut decisions = Vec::new();
        collect(&root, &mut Vec::new(), &mut decisions)?;
        Ok(TurnTakingGame { root, decisions })
    }

    pub fn root(&self) -> &GameNode {
        &self.root
    }

    /// Decision nodes in preorder; a strategy profile indexes into this.
    pub fn decisions(&self) -> &[DecisionInfo] {
        &self.decisions
    }

    /// Plays out the game under `choices` (one child index per decision
    /// node in preorder).
    pub fn play(&self, choices: &[usize]) -> [f64; 2] {
        let mut node = &self.root;
        let mut id = 0;
        loop {
            match node {
                GameNode::Leaf { payoff } => return *payoff,
                GameNode::Decision { children, .. } => {
                    let pick = choices[id];
                    // skip the preorder ids of the subtrees before `pick`
                    id += 1 + children[..pick]
                        .iter()
                        .map(|e| count_decisions(&e.node))
                        .sum::<usize>();
                    node = &children[pick].node;
                }
            }
        }
    }
}

fn count_decisions(node: &GameNode) -> usize {
    match node {
        GameNode::Leaf { .. } => 0,
        GameNode::Decision { children, .. } => {
            1 + children
                .iter()
                .map(|e| count_decisions(&e.node))
                .sum::<usize>()
        }
    }
}

/// Child index chosen at every decision node, in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PureStrategyProfile {
    pub choices: Vec<usize>,
}

impl PureStrategyProfile {
    /// `player`'s part of the profile as (decision index, child index).
    pub fn for_player(&self, game: &TurnTakingGame, player: usize) -> Vec<(usize, usize)> {
        game.decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.player == player)
            .map(|(i, _)| (i, self.choices[i]))
            .collect()
    }

    /// `player`'s actions concatenated in preorder, e.g. `df`.
    pub fn label(&self, game: &TurnTakingGame, player: usize) -> String {
        strategy_label(game, player, &self.choices)
    }
}

fn strategy_label(game: &TurnTakingGame, player: usize, choices: &[usize]) -> String {
    let parts: Vec<&str> = game
        .decisions
        .iter()
        .enumerate()
        .filter(|(_, d)| d.player == player)
        .map(|(i, d)| d.actions[choices[i]].as_str())
        .collect();
    if parts.iter().all(|p| p.chars().count() == 1) {
        parts.concat()
    } else {
        parts.join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgamePerfect {
    pub profile: PureStrategyProfile,
    pub payoff: [f64; 2],
    /// Number of decision nodes where several children tied for the best
    /// continuation; the first was taken.
    pub ties: usize,
}

/// Solves the tree from the leaves up. Ties go to the first child.
pub fn backward_induction(game: &TurnTakingGame) -> SubgamePerfect {
    fn solve(node: &GameNode, choices: &mut Vec<usize>, ties: &mut usize) -> [f64; 2] {
        match node {
            GameNode::Leaf { payoff } => *payoff,
            GameNode::Decision { player, children } => {
                let slot = choices.len();
                choices.push(0);
                let k = player - 1;
                let mut best: Option<(usize, [f64; 2])> = None;
                let mut tied = false;
                for (i, e) in children.iter().enumerate() {
                    let v = solve(&e.node, choices, ties);
                    match best {
                        Some((_, b)) if v[k] < b[k] => {}
                        Some((_, b)) if v[k] == b[k] => tied = true,
                        _ => {
                            best = Some((i, v));
                            tied = false;
                        }
                    }
                }
                let (pick, value) = best.expect("decision nodes have children");
                *ties += tied as usize;
                choices[slot] = pick;
                value
            }
        }
    }
    let mut choices = Vec::with_capacity(game.decisions.len());
    let mut ties = 0;
    let payoff = solve(&game.root, &mut choices, &mut ties);
    SubgamePerfect {
        profile: PureStrategyProfile { choices },
        payoff,
        ties,
    }
}

pub const MAX_STRATEGIES: usize = 10_000;

/// Strategic form of `game`: each player's actions are their pure
/// strategies, enumerated with the last decision node varying fastest.
/// Also returns, per player, the child choices behind each strategy.
pub fn induced_normal_form(
    game: &TurnTakingGame,
) -> Result<(NormalFormGame, [Vec<Vec<(usize, usize)>>; 2])> {
    let mut per_player: [Vec<Vec<(usize, usize)>>; 2] = [Vec::new(), Vec::new()];
    for player in [1, 2] {
        let nodes: Vec<usize> = (0..game.decisions.len())
            .filter(|&i| game.decisions[i].player == player)
            .collect();
        let mut count: usize = 1;
        for &i in &nodes {
            count = count
                .checked_mul(game.decisions[i].actions.len())
                .filter(|&c| c <= MAX_STRATEGIES)
                .ok_or_else(|| {
                    Error::TooLarge(format!(
                        "player {player} has more than {MAX_STRATEGIES} strategies"
                    ))
                })?;
        }
        let strategies = &mut per_player[player - 1];
        let mut current = vec![0usize; nodes.len()];
        for _ in 0..count {
            strategies.push(nodes.iter().zip(&current).map(|(&n, &c)| (n, c)).collect());
            for pos in (0..nodes.len()).rev() {
                current[pos] += 1;
                if current[pos] < game.decisions[nodes[pos]].actions.len() {
                    break;
                }
                current[pos] = 0;
            }
        }
    }
    let mut labels: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut choices = vec![0usize; game.decisions.len()];
    for p in 0..2 {
        for s in &per_player[p] {
            for &(n, c) in s {
                choices[n] = c;
            }
            labels[p].push(strategy_label(game, p + 1, &choices));
        }
    }
    let mut payoffs = Vec::with_capacity(per_player[0].len());
    for s1 in &per_player[0] {
        let mut row = Vec::with_capacity(per_player[1].len());
        for s2 in &per_player[1] {
            for &(n, c) in s1.iter().chain(s2) {
                choices[n] = c;
            }
            row.push(game.play(&choices));
        }
        payoffs.push(row);
    }
    let [l1, l2] = labels;
    Ok((NormalFormGame::new(l1, l2, payoffs)?, per_player))
}

/// The two-stage tree in which player 2 can threaten a mutually bad
/// outcome after `a`.
pub fn non_credible_threat() -> TurnTakingGame {
    let leaf = |x: f64, y: f64| GameNode::Leaf { payoff: [x, y] };
    let edge = |a: &str, node| Edge {
        action: a.into(),
        node,
    };
    let p2 = |l: &str, x, r: &str, y| GameNode::Decision {
        player: 2,
        children: vec![edge(l, x), edge(r, y)],
    };
    TurnTakingGame::new(GameNode::Decision {
        player: 1,
        children: vec![
            edge("a", p2("c", leaf(0.0, 0.0), "d", leaf(30.0, 5.0))),
            edge("b", p2("e", leaf(5.0, 5.0), "f", leaf(5.0, 30.0))),
        ],
    })
    .expect("valid tree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::normal::{is_nash_equilibrium, pure_nash_equilibria, MixedProfile};
    use proptest::prelude::*;

    #[test]
    fn threat_game_spe() {
        let g = non_credible_threat();
        let spe = backward_induction(&g);
        assert_eq!(spe.payoff, [30.0, 5.0]);
        assert_eq!(spe.profile.label(&g, 1), "a");
        assert_eq!(spe.profile.label(&g, 2), "df");
        assert_eq!(spe.ties, 0);
    }

    #[test]
    fn threat_game_strategic_form() {
        let g = non_credible_threat();
        let (nf, _) = induced_normal_form(&g).unwrap();
        assert_eq!(nf.labels(1), ["a", "b"]);
        assert_eq!(nf.labels(2), ["ce", "cf", "de", "df"]);
        assert_eq!(nf.payoff(0, 2), [30.0, 5.0]);
        assert_eq!(nf.payoff(1, 1), [5.0, 30.0]);
        let ne: Vec<(String, String)> = pure_nash_equilibria(&nf)
            .into_iter()
            .map(|(a, b)| (nf.label(1, a).to_string(), nf.label(2, b).to_string()))
            .collect();
        let expect = [("a", "de"), ("a", "df"), ("b", "cf")];
        assert_eq!(ne.len(), 3);
        for (a, b) in expect {
            assert!(ne.contains(&(a.to_string(), b.to_string())));
        }
    }

    #[test]
    fn single_decision_and_ties() {
        let leaf = |x: f64| GameNode::Leaf { payoff: [x, 0.0] };
        let edge = |a: &str, node| Edge {
            action: a.into(),
            node,
        };
        let g = TurnTakingGame::new(GameNode::Decision {
            player: 1,
            children: vec![
                edge("x", leaf(1.0)),
                edge("y", leaf(3.0)),
                edge("z", leaf(3.0)),
            ],
        })
        .unwrap();
        let spe = backward_induction(&g);
        assert_eq!(spe.profile.choices, vec![1]);
        assert_eq!(spe.ties, 1);
        let (nf, _) = induced_normal_form(&g).unwrap();
        assert_eq!(nf.num_actions(2), 1);
    }

    #[test]
    fn json_round_trip() {
        let g = non_credible_threat();
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<TurnTakingGame>(&text).unwrap(), g);
        assert!(serde_json::from_str::<TurnTakingGame>(r#"{"player":3,"children":[]}"#).is_err());
    }

    #[test]
    fn strategy_explosion_is_rejected() {
        // player 2 moves at 14 binary nodes: 2^14 strategies
        let leaf = GameNode::Leaf { payoff: [0.0, 0.0] };
        let mut node = leaf.clone();
        for _ in 0..14 {
            node = GameNode::Decision {
                player: 2,
                children: vec![
                    Edge {
                        action: "l".into(),
                        node,
                    },
                    Edge {
                        action: "r".into(),
                        node: leaf.clone(),
                    },
                ],
            };
        }
        let g = TurnTakingGame::new(node).unwrap();
        assert!(matches!(induced_normal_form(&g), Err(Error::TooLarge(_))));
    }

    fn tree(depth: u32) -> BoxedStrategy<GameNode> {
        let leaf = [0i8..5, 0i8..5].prop_map(|[a, b]| GameNode::Leaf {
            payoff: [a as f64, b as f64],
        });
        if depth == 0 {
            return leaf.boxed();
        }
        prop_oneof![
            1 => leaf,
            3 => (1usize..=2, proptest::collection::vec(tree(depth - 1), 1..3)).prop_map(|(player, kids)| {
                GameNode::Decision {
                    player,
                    children: kids
                        .into_iter()
                        .enumerate()
                        .map(|(i, node)| Edge { action: format!("m{i}"), node })
                        .collect(),
                }
            }),
        ]
        .boxed()
    }

    proptest! {
        #[test]
        fn spe_is_equilibrium_of_strategic_form(root in tree(3)) {
            let g = TurnTakingGame::new(root).unwrap();
            let spe = backward_induction(&g);
            prop_assert_eq!(g.play(&spe.profile.choices), spe.payoff);
            let (nf, strategies) = induced_normal_form(&g).unwrap();
            let own = |p: usize| spe.profile.for_player(&g, p);
            let row = strategies[0].iter().position(|s| *s == own(1)).unwrap();
            let col = strategies[1].iter().position(|s| *s == own(2)).unwrap();
            prop_assert!(pure_nash_equilibria(&nf).contains(&(row, col)));
            prop_assert!(is_nash_equilibrium(&nf, &MixedProfile::pure(&nf, row, col), 0.0));
        }
    }
}
