//! Annealed polymer measures: exact enumeration, path MCMC, survival
//! estimators, the three-phase lower-bound strategy and a joint
//! path/environment Gibbs sampler.

pub mod enumerate;
pub mod gibbs;
pub mod mcmc;
pub mod strategy;
pub mod survival;
mod weight;

pub use gibbs::{GibbsConfig, GibbsInit, GibbsSampler, GibbsStats};
pub use strategy::{
    nearest_in_ball, strategy_lower_bound, StrategyBound, StrategyBranch, StrategyComponents, StrategyConfig,
};
pub use enumerate::{exact_distribution, for_each_path, ExactDistribution, Leaf, Variant};
pub use mcmc::{McmcConfig, McmcStats, McmcVariant, PathMcmc, TailCut};
pub use survival::{annealed_survival_estimate, SurvivalMethod};
pub use weight::PolymerWeight;
