//! Host constants for the unfold planner: hoisting time `T_H`,
//! decomposition time `T_D` and ciphertext size `M_c`.

use std::path::Path;
use std::time::Instant;

use lancelot_core::ckks::{encrypt, Evaluator, KeySet, ParamSpec, Params};
use lancelot_core::distance::{plan_unfold, HoistPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::median;

/// Runs per measured quantity.
pub const RUNS: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: ParamSpec,
    pub runs: usize,
    /// Seconds per hoisted rotation: key inner product, ModDown and the
    /// tree addition, from already raised digits.
    pub t_hoist: f64,
    /// Seconds per decomposition and ModUp.
    pub t_decompose: f64,
    /// Bytes of one distance ciphertext.
    pub m_cipher: u64,
}

impl Calibration {
    pub fn plan(&self, budget: u64, width: usize) -> Result<HoistPlan> {
        Ok(plan_unfold(self.t_hoist, self.t_decompose, self.m_cipher, budget, width)?)
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

/// Measures on a ciphertext at the level distances come out at.
pub fn measure(spec: ParamSpec, runs: usize, seed: u64) -> Result<Calibration> {
    let params = Params::new(spec)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = KeySet::generate(&params, &[1], &mut rng)?;
    let eval = Evaluator::new(&params);
    let values: Vec<f64> = (0..params.slot_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fresh = encrypt(&params, &keys.public, &params.encode(&values)?, &mut rng)?;
    let ct = eval.drop_to_level(&fresh, params.max_level().saturating_sub(1))?;
    let mut t_d = Vec::with_capacity(runs);
    let mut t_h = Vec::with_capacity(runs);
    for _ in 0..runs.max(1) {
        let (raised, dt) = time(|| eval.raise(ct.parts().1));
        let raised = raised?;
        t_d.push(dt);
        let (sum, ht) = time(|| eval.rotate_hoisted(&ct, &raised, 1, &keys.galois).and_then(|r| eval.add(&ct, &r)));
        sum?;
        t_h.push(ht);
    }
    Ok(Calibration {
        params: spec,
        runs: runs.max(1),
        t_hoist: median(&t_h),
        t_decompose: median(&t_d),
        m_cipher: ct.size_bytes() as u64,
    })
}

fn read_cache(path: &Path) -> Result<Vec<Calibration>> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Stores `cal`, replacing any entry for the same parameter set.
pub fn store(path: &Path, cal: Calibration) -> Result<()> {
    let mut all = read_cache(path)?;
    all.retain(|c| c.params != cal.params);
    all.push(cal);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(&all).map_err(|e| Error::Encode(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The cached constants for `spec`, measuring and caching them first when
/// absent.
pub fn load_or_measure(path: &Path, spec: ParamSpec) -> Result<Calibration> {
    if let Some(c) = read_cache(path)?.into_iter().find(|c| c.params == spec) {
        return Ok(c);
    }
    let cal = measure(spec, RUNS, 0)?;
    store(path, cal)?;
    Ok(cal)
}
