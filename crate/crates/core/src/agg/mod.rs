//! Byzantine-robust selection rules and the masked encrypted-sorting
//! exchange between the server and the key-generation center.

mod mask;
mod rules;

pub use mask::{
    aggregation_depth, build_mask, build_mask_secret, decrypt_mask, mask_rows, masked_aggregate, masked_sort_round, KgcRecord,
    SelectionMask,
};
pub use rules::{
    krum_scores, krum_select, median_from_totals, median_select, multi_krum_select, plaintext_aggregate, select,
    select_by_totals, DecryptedDistances, DistanceTable, Rule, RuleConfig, ScoreMode, SelectionResult,
};
