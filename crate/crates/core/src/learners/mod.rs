//! Supervised models used by the attack: a random forest for change
//! prediction and per-size feed-forward networks combined by summed
//! confidences for reconstruction.

mod ensemble;
mod forest;
mod network;
mod scalar;

pub use ensemble::{combine, ensemble_predict, Ensemble, LabelCatalog, NO_CHANGE};
pub use forest::{forest_train, DecisionTree, Forest, ForestParams, Node};
pub use network::{argmax, gradient_check, network_train, Layer, Network, NetworkParams};
pub use scalar::Scalar;

use crate::error::{Error, Result};

/// Common row length, or an error for empty or ragged data.
fn check_rows<'a, T: 'a>(rows: impl Iterator<Item = &'a [T]>) -> Result<usize> {
    let mut len = None;
    for r in rows {
        match len {
            None => len = Some(r.len()),
            Some(l) if l != r.len() => {
                return Err(Error::FeatureLength {
                    expected: l,
                    got: r.len(),
                })
            }
            _ => {}
        }
    }
    len.ok_or(Error::EmptyData)
}
