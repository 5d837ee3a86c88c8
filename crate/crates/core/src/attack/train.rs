use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::learners::{
    forest_train, network_train, Ensemble, Forest, ForestParams, LabelCatalog, NetworkParams,
    Scalar, NO_CHANGE,
};
use crate::locality::{encode, MAX_SIZE, SIZES};

pub const MODEL_SCHEMA: &str = "netlock-models/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub forest: ForestParams,
    pub network: NetworkParams,
    /// Locality size the boost decision is taken at.
    pub boost_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            forest: ForestParams::default(),
            network: NetworkParams::default(),
            boost_size: MAX_SIZE,
        }
    }
}

/// Change predictors per size, the reconstruction ensemble and its catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Models<T> {
    pub schema: String,
    pub params: TrainParams,
    pub forests: BTreeMap<usize, Forest<T>>,
    pub ensemble: Ensemble<T>,
    /// Fewer than two distinct reconstruction labels were seen.
    pub degenerate: bool,
    pub training_records: usize,
}

impl<T: Scalar> Models<T> {
    /// The forest the boost decision uses.
    pub fn boost_forest(&self) -> Result<&Forest<T>> {
        self.forests
            .get(&self.params.boost_size)
            .ok_or(Error::LocalitySize(self.params.boost_size))
    }

    pub fn catalog(&self) -> &LabelCatalog {
        &self.ensemble.catalog
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Models<T> = serde_json::from_str(text)?;
        if m.schema != MODEL_SCHEMA {
            return Err(Error::Invalid(format!(
                "unsupported model schema `{}`",
                m.schema
            )));
        }
        Ok(m)
    }
}

/// Reconstruction label of every record: [`NO_CHANGE`] for unchanged ones,
/// the catalog label of the truth snapshot otherwise.
pub fn reconstruction_labels(d: &Dataset, catalog: &LabelCatalog) -> Vec<usize> {
    d.records
        .iter()
        .map(|r| {
            if r.changed {
                catalog.label_of(&r.truth).expect("catalog built from these records")
            } else {
                NO_CHANGE
            }
        })
        .collect()
}

/// Fit the change predictors and the per-size reconstruction networks.
pub fn train_models<T: Scalar>(d: &Dataset, params: &TrainParams) -> Result<Models<T>> {
    if d.is_empty() {
        return Err(Error::EmptyData);
    }
    if !SIZES.contains(&params.boost_size) {
        return Err(Error::LocalitySize(params.boost_size));
    }
    let catalog = LabelCatalog::build(d.records.iter().filter(|r| r.changed).map(|r| &r.truth));
    let labels = reconstruction_labels(d, &catalog);
    let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();

    let sizes: Vec<usize> = SIZES.collect();
    let forests = sizes
        .par_iter()
        .map(|&size| {
            let rows = d
                .records
                .iter()
                .map(|r| Ok((encode::<T>(r.locality(size)?), r.changed)))
                .collect::<Result<Vec<_>>>()?;
            let p = ForestParams {
                seed: derive_seed(params.forest.seed, size as u64),
                ..params.forest.clone()
            };
            Ok((size, forest_train(&rows, &p)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let members = sizes
        .par_iter()
        .map(|&size| {
            let rows = d
                .records
                .iter()
                .zip(&labels)
                .map(|(r, &y)| Ok((encode::<T>(r.locality(size)?), y)))
                .collect::<Result<Vec<_>>>()?;
            let p = NetworkParams {
                seed: derive_seed(params.network.seed, size as u64),
                ..params.network.clone()
            };
            Ok((size, network_train(&rows, catalog.len(), &p)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Models {
        schema: MODEL_SCHEMA.to_string(),
        params: params.clone(),
        forests,
        ensemble: Ensemble { members, catalog },
        degenerate: distinct.len() < 2,
        training_records: d.len(),
    })
}
