//! Normal-form and game-tree analysis, and an empirical check that a pair
//! of time-based negotiation strategies forms an equilibrium.

mod negotiation;
mod normal;
mod tree;

pub use negotiation::{
    default_deviation_grid, ne_check_config, negotiation_ne_check, Deviation, DeviationResult,
    NeReport, AGREEMENT_TOLERANCE, IMPROVEMENT_TOLERANCE,
};
pub use normal::{
    best_responses, classic, expected_utility, is_nash_equilibrium, is_symmetric,
    pure_nash_equilibria, select_symmetric_equilibrium, MixedProfile, NormalFormGame,
    SymmetricSelection,
};
pub use tree::{
    backward_induction, induced_normal_form, non_credible_threat, DecisionInfo, Edge, GameNode,
    PureStrategyProfile, SubgamePerfect, TurnTakingGame, MAX_STRATEGIES,
};

use serde::{Deserialize, Serialize};

/// Contents of a game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameFile {
    NormalForm(NormalFormGame),
    TurnTaking { root: TurnTakingGame },
}
