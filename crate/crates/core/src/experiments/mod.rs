//! Campaign orchestration, statistics and persistence.

pub mod config;
pub mod exit;
pub mod locus;
pub mod metastable;
pub mod models_check;
pub mod probe;
pub mod records;
pub mod stats;
pub mod theory_summary;

pub use config::{CampaignConfig, DomainSpec, HalfSpace, HorizonPolicy, ScalesSpec, System, SystemSpec};
pub use exit::{run_exit_campaign, run_exit_campaign_on, EpsilonSummary, ExitCampaign, ExitSummary};
pub use records::{read_records, write_records, ExitRecord};
pub use stats::{chi_square, geometric_chi_square, ks_statistic, ks_test, ChiSquareResult, KsResult};
pub use theory_summary::{theory_summary, TheoryAtEpsilon, TheorySummary};
pub use locus::{run_locus_campaign, LocusSummary};
pub use metastable::{run_metastability, MetastableSummary};
pub use models_check::{run_models_check, ModelsCheckSummary};
pub use probe::{run_probe, ProbeSummary};
