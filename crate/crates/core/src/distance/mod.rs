//! Encrypted pairwise model distances: packing, lazily relinearized
//! squared differences, rotation-tree slot sums and the unfold planner.

mod hoist;
mod matrix;
mod pack;

pub use hoist::{plan_unfold, slot_reduce, unfold_cost, HoistPlan};
pub use matrix::{
    build_distance_matrix, encrypted_pairwise_distance, pair_index, pairs, reduction_width, DistanceConfig,
    EncryptedDistanceMatrix, MatrixMode,
};
pub use pack::{chunk_count, decrypt_packed, pack_and_encrypt, PackedWeights, WeightVector};
