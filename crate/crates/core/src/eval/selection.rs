use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{ChatMessage, ModelBackend};

/// New instructions per block of ten APIs in the bundled synthetic fixture.
pub const DEFAULT_BUCKET_INSTRUCTIONS: [usize; 10] = [74, 89, 105, 84, 94, 79, 89, 70, 122, 74];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub name: String,
    pub annotation_text: String,
    /// Size of the smallest bucket this API belongs to.
    pub bucket: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTrial {
    pub instruction: String,
    pub correct_api: String,
    #[serde(default)]
    pub chosen_api: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketResult {
    pub n_apis: usize,
    pub total: usize,
    pub correct: usize,
    /// Replies from which no API name could be read; counted as incorrect.
    pub no_choice: usize,
    /// `correct / total`, absent for a bucket without trials.
    pub accuracy: Option<f64>,
    pub trials: Vec<SelectionTrial>,
}

/// Splits an ordered API list into nested prefixes of `step`, `2*step`, ...
pub fn nested_buckets(apis: &[ApiSpec], step: usize) -> Vec<Vec<ApiSpec>> {
    if step == 0 {
        return Vec::new();
    }
    (1..=apis.len().div_ceil(step)).map(|k| apis[..(k * step).min(apis.len())].to_vec()).collect()
}

pub fn build_selection_prompt(apis: &[ApiSpec], instruction: &str) -> Vec<ChatMessage> {
    let mut listing = String::new();
    for api in apis {
        listing.push_str(&format!("- {}: {}\n", api.name, api.annotation_text.trim()));
    }
    vec![
        ChatMessage::system(
            "You route data-analysis requests to library functions. Reply with the name of exactly one function from the list and nothing else.",
        ),
        ChatMessage::user(format!("Available functions:\n{listing}\nRequest: {instruction}\nFunction name:")),
    ]
}

/// Reads the chosen API from a reply: the first identifier-like token that
/// names an API in the set.
pub fn parse_choice(reply: &str, apis: &[ApiSpec]) -> Option<String> {
    let names: HashSet<&str> = apis.iter().map(|a| a.name.as_str()).collect();
    reply
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.'))
        .map(|t| t.trim_end_matches('.'))
        .find(|t| names.contains(t))
        .map(str::to_string)
}

/// Asks the backend to pick an API for every trial whose answer lies in
/// each bucket. Buckets are evaluated independently, so with nested buckets
/// a trial is asked once per bucket that contains its answer.
pub fn run_selection_accuracy(
    api_buckets: &[Vec<ApiSpec>],
    trials: &[SelectionTrial],
    backend: &dyn ModelBackend,
) -> Result<Vec<BucketResult>> {
    for t in trials {
        if !api_buckets.iter().any(|b| b.iter().any(|a| a.name == t.correct_api)) {
            return Err(Error::Precondition(format!("trial answer {} is in no bucket", t.correct_api)));
        }
    }
    let mut out = Vec::with_capacity(api_buckets.len());
    for bucket in api_buckets {
        let names: HashSet<&str> = bucket.iter().map(|a| a.name.as_str()).collect();
        let mut result = BucketResult { n_apis: bucket.len(), total: 0, correct: 0, no_choice: 0, accuracy: None, trials: Vec::new() };
        for trial in trials.iter().filter(|t| names.contains(t.correct_api.as_str())) {
            let reply = backend.complete(&build_selection_prompt(bucket, &trial.instruction))?;
            let chosen = parse_choice(&reply, bucket);
            result.total += 1;
            match &chosen {
                Some(c) if *c == trial.correct_api => result.correct += 1,
                Some(_) => {}
                None => result.no_choice += 1,
            }
            result.trials.push(SelectionTrial { chosen_api: chosen, ..trial.clone() });
        }
        if result.total > 0 {
            result.accuracy = Some(result.correct as f64 / result.total as f64);
        }
        out.push(result);
    }
    Ok(out)
}

const VERBS: [&str; 8] = ["compute", "plot", "fit", "filter", "summarize", "normalize", "encode", "impute"];
const OBJECTS: [&str; 8] = ["columns", "rows", "outliers", "a histogram", "a regression", "clusters", "categories", "missing values"];

/// Synthetic APIs and trials. Block `i` holds `apis_per_block` APIs and
/// `new_per_block[i]` trials whose answer is drawn from that block.
pub fn synthetic_selection_fixture(
    new_per_block: &[usize],
    apis_per_block: usize,
    seed: u64,
) -> (Vec<ApiSpec>, Vec<SelectionTrial>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut apis = Vec::new();
    let mut trials = Vec::new();
    for (block, &count) in new_per_block.iter().enumerate() {
        let start = apis.len();
        for j in 0..apis_per_block {
            let idx = start + j;
            let verb = VERBS[rng.gen_range(0..VERBS.len())];
            let object = OBJECTS[rng.gen_range(0..OBJECTS.len())];
            apis.push(ApiSpec {
                name: format!("api_{idx:03}"),
                annotation_text: format!("{verb} {object} (variant {idx}); args: data, columns=None, **options"),
                bucket: (block + 1) * apis_per_block,
            });
        }
        if apis_per_block == 0 {
            continue;
        }
        for k in 0..count {
            let api = &apis[start + rng.gen_range(0..apis_per_block)];
            trials.push(SelectionTrial {
                instruction: format!("Please {} for the dataset (request {block}-{k})", api.annotation_text.split(" (").next().unwrap_or("")),
                correct_api: api.name.clone(),
                chosen_api: None,
            });
        }
    }
    (apis, trials)
}
