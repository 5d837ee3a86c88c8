use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::lock_and_describe;
use super::{generate_dataset, run_attack_with_truth, train_models, AttackResult, DatasetParams, Models, TrainParams, Truth};
use crate::derive_seed;
use crate::error::Result;
use crate::learners::Scalar;
use crate::lock::{random_key, HeuristicKind, InsertionHeuristic};
use crate::netlist::Netlist;
use crate::rewrite::{RewriteRule, DEFAULT_MAX_PASSES};

/// Harness settings: the harness locks and re-synthesises the original
/// itself, so it knows the truth for the victim's key-gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Key size of the victim.
    pub key_bits: usize,
    pub heuristic: HeuristicKind,
    pub seed: u64,
    /// Re-locking rounds used to manufacture training data.
    pub instances: usize,
    /// Key size per re-locking round; `None` reuses `key_bits`.
    pub instance_key_bits: Option<usize>,
    pub max_passes: usize,
    pub train: TrainParams,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            key_bits: 16,
            heuristic: HeuristicKind::Rnd,
            seed: 0,
            instances: 3,
            instance_key_bits: None,
            max_passes: DEFAULT_MAX_PASSES,
            train: TrainParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Evaluation<T> {
    pub key_bits: usize,
    pub heuristic: HeuristicKind,
    pub victim: Netlist,
    pub victim_key: Vec<bool>,
    pub truth: BTreeMap<String, Truth>,
    pub dataset_levels: [usize; 3],
    pub models: Models<T>,
    pub boosted: Vec<AttackResult>,
    pub unboosted: Vec<AttackResult>,
}

/// Lock `original`, re-synthesise it into a victim, then attack the victim
/// with and without boosting.
pub fn evaluate<T: Scalar>(original: &Netlist, params: &EvalParams, rules: &[RewriteRule]) -> Result<Evaluation<T>> {
    let victim_seed = derive_seed(params.seed, 0);
    let key = random_key(params.key_bits, victim_seed);
    let h = InsertionHeuristic::new(params.heuristic, derive_seed(victim_seed, 1));
    let (records, victim) = lock_and_describe(original, &key, &h, rules, params.max_passes, 0)?;
    let truth: BTreeMap<String, Truth> = records
        .into_iter()
        .map(|r| {
            let t = Truth {
                snapshot: r.truth,
                level: r.level,
                key_bit: r.key_bit,
            };
            (r.anchor, t)
        })
        .collect();

    let dataset = generate_dataset(
        &victim,
        &DatasetParams {
            instances: params.instances,
            key_bits: params.instance_key_bits.unwrap_or(params.key_bits),
            heuristic: params.heuristic,
            seed: derive_seed(params.seed, 1),
            max_passes: params.max_passes,
        },
        rules,
    )?;
    let models = train_models::<T>(&dataset, &params.train)?;
    let boosted = run_attack_with_truth(&victim, &models, true, Some(&truth))?;
    let unboosted = run_attack_with_truth(&victim, &models, false, Some(&truth))?;
    Ok(Evaluation {
        key_bits: params.key_bits,
        heuristic: params.heuristic,
        victim,
        victim_key: key,
        truth,
        dataset_levels: dataset.level_counts(),
        models,
        boosted,
        unboosted,
    })
}
