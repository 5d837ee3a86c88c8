//! Locking, re-synthesis emulation and learned structural recovery for
//! gate-level netlists.

pub mod attack;
pub mod circuits;
pub mod error;
pub mod learners;
pub mod netlist;
pub mod locality;
pub mod lock;
pub mod metrics;
pub mod rewrite;
pub mod sim;

pub use error::{Error, Result};
pub use netlist::{Gate, GateType, Netlist};

pub type ForestModel = learners::Forest<f64>;
pub type NetworkModel = learners::Network<f64>;
pub type EnsembleModel = learners::Ensemble<f64>;
pub type AttackModels = attack::Models<f64>;
pub type AttackEvaluation = attack::Evaluation<f64>;

/// Independent seed for sub-stream `stream` of `master` (splitmix64 finaliser).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
