//! Approximate homomorphic encryption over `Z[X]/(X^N + 1)` in RNS form.

mod cipher;
mod encoding;
mod eval;
mod keys;
mod params;

pub use cipher::{decrypt, decrypt_triple, encrypt, encrypt_symmetric, Ciphertext, TernaryCiphertext};
pub use encoding::{Encoder, Plaintext};
pub use eval::{Evaluator, OpCount, RaisedDigits};
pub use keys::{power_of_two_steps, EvaluationKey, GaloisKeys, KeyKind, KeySet, PublicKey, SecretKey};
pub use params::{KeySwitchParams, ParamSpec, Params};
