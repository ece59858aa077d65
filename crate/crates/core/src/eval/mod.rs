//! Desk-scale evaluation: seeded pass-rate ablations, context-window API
//! capacity, API-selection accuracy and the usual classification/regression
//! metrics.

mod ablation;
mod capacity;
mod metrics;
mod output;
mod selection;

pub use ablation::{run_ablation, run_ablation_pair, AblationMode, AblationScenario, PassRateResult};
pub use capacity::{average_tokens, capacity_for_corpus, estimate_api_capacity};
pub use metrics::{accuracy, mse};
pub use output::{ablation_csv, ablation_markdown, selection_csv, selection_markdown};
pub use selection::{
    build_selection_prompt, nested_buckets, parse_choice, run_selection_accuracy, synthetic_selection_fixture,
    ApiSpec, BucketResult, SelectionTrial, DEFAULT_BUCKET_INSTRUCTIONS,
};
