//! Additive rule ensembles learned by gradient boosting.
//!
//! A model is `f(x) = b0 + sum_i b_i q_i(x)` where every `q_i` is a
//! conjunction of threshold propositions on single features. Rules are added
//! one at a time by a beam-search / branch-and-bound base learner that
//! maximizes one of four objectives ([`ObjectiveKind`]); rule weights are fit
//! stagewise, in closed form, or by a fully corrective refit of all weights.
//!
//! ```
//! use rulecraft::{boost, io, BoostConfig, ObjectiveKind, WeightUpdate};
//!
//! let ds = io::gen_synthetic("fig2", &Default::default(), 0).unwrap();
//! let mut cfg = BoostConfig::new(ObjectiveKind::Ogb, WeightUpdate::Corrective);
//! cfg.max_rules = Some(2);
//! cfg.offset = rulecraft::OffsetMode::Zero;
//! let run = boost(&ds, &cfg).unwrap();
//! assert_eq!(run.final_ensemble().len(), 2);
//! ```

pub mod basis;
pub mod boosting;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod losses;
pub mod objectives;
pub mod oracle;
pub mod query;
pub mod search;
pub mod weights;

pub use basis::{Extension, OrthoBasis};
pub use boosting::{
    boost, coverage_compare, cv_risk_table, cv_select_lambda, sweep_tradeoff, BoostConfig, BoostRun, BoostState,
    CoveragePair, LambdaChoice, OffsetMode, RoundLog, StopReason, TradeoffPoint, WeightUpdate, LAMBDA_GRID,
};
pub use data::{Dataset, Task};
pub use ensemble::{Rule, RuleEnsemble};
pub use error::{Error, Result};
pub use losses::LossKind;
pub use objectives::{objective_value, projection_error, Objective, ObjectiveKind, DEFAULT_EPSILON};
pub use query::{evaluate_query, BoundQuery, Proposition, Query, Selection, Sign};
pub use search::{find_best_query, prefix_argmax, prefix_values, SearchConfig, SearchNode, SearchOutcome};
