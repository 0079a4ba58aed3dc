//! Monte-Carlo orchestration of paired CF/MC trials and the three case
//! studies (subcarrier count, tx/rx split, antenna distribution).

mod cdf;
mod config;
mod studies;
mod trial;

pub use cdf::{exceed_fraction, EmpiricalCdf};
pub use config::{ExperimentConfig, Layout, Study};
pub use studies::{
    case_a_points, case_b_points, case_c_points, custom_point, run_case_study_a, run_case_study_b,
    run_case_study_c, run_points, run_study, study_points, StudyResult, CASE_C_CF_ANTENNAS,
    CASE_C_MC_NODES,
};
pub use trial::{
    entity_params, evaluate_cf, evaluate_mc, run_trial, stream_rng, trial_cf_deployment, trial_entities,
    Architecture, LinkPhysics, Purpose, SnrSample, SweepPoint, TrialOutcome,
};
