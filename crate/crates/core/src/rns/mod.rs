//! Residue-number-system polynomial layer: prime chains, negacyclic NTTs,
//! digit decomposition with basis extension, and sampling.

mod basis;
mod extend;
mod ntt;
mod poly;
mod sample;

pub use basis::{max_modulus_bits, RnsBasis, Security};
pub use extend::{decompose_digits, digit_count, mod_down, mod_up, rns_decompose, rns_recombine, RnsDigit};
pub use ntt::NttTable;
pub(crate) use ntt::eval_automorphism_permutation;
pub use poly::{BasisSlice, Domain, PolyRns};
pub use sample::{cbd_coeffs, sample, sample_seeded, ternary_coeffs, Distribution, ERROR_DISTRIBUTION};
