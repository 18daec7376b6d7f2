//! Joint optimization of EV charging-station placement and battery-constrained
//! routing.
//!
//! The inner problem routes a single vehicle through every location for a
//! fixed station configuration by annealing a QUBO with a soft battery term.
//! The outer problem searches station configurations with a Bayesian
//! quadratic surrogate and Thompson sampling.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the aliases below
//! fix it to `f64`.

pub mod anneal;
pub mod bocs;
pub mod error;
pub mod evaluator;
pub mod harness;
pub mod instance;
pub mod penalty;
pub mod qubo;
pub mod route;
pub mod scalar;
pub mod tour_anneal;

pub use bocs::{
    acquire, featurize, fit_posterior_sample, posterior_mean, run_bocs, run_random_search, run_search, Acquisition,
    BocsParams, Prior, SampleSet, SearchHistory, SearchRecord, Strategy, SurrogateModel,
};
pub use anneal::{anneal, enumerate, solve_exhaustive, solve_sa, Annealable, BetaFinal, SaSchedule, SolveResult};
pub use error::{Error, Result};
pub use evaluator::{
    constraint_penalty, decode_tour, encode_tour, evaluate_config, evaluate_tour, simulate_battery,
    travel_cost, BatteryStep, BatteryTrace, ConstraintFamily, DecodeError, EvalParams, Evaluation, RouteSolver,
    StationConfig, Tour,
};
pub use harness::{
    export, run_experiment, run_method, run_random_baseline, summarize_dir, EmitFlags, ExperimentConfig, ExperimentReport,
    InstanceSource, Summary,
};
pub use instance::{generate_instance, load_instance, save_instance, BatteryParams, GenParams, Location, ProblemInstance};
pub use penalty::{PenaltyModel, PenaltyModelBuilder};
pub use qubo::{CompiledQubo, QuboModel};
pub use route::{
    build_battery_qubo, build_total_qubo, build_tsp_qubo, flatten, total_penalty_model, unflatten,
    ChargePoint, PenaltyWeights, RouteOptions,
};
pub use scalar::Scalar;
pub use tour_anneal::{anneal_tours, typical_move_delta};

pub type Instance = ProblemInstance<f64>;
pub type Qubo = QuboModel<f64>;
pub type Penalty = PenaltyModel<f64>;
pub type Weights = PenaltyWeights<f64>;
pub type Schedule = SaSchedule<f64>;
pub type Battery = BatteryParams<f64>;
pub type Eval = Evaluation<f64>;
pub type Params = BocsParams<f64>;
pub type History = SearchHistory<f64>;
pub type Surrogate = SurrogateModel<f64>;
