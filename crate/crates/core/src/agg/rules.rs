use alloc::vec;
use alloc::vec::Vec;

use crate::distance::{pair_index, WeightVector};
use crate::error::{Error, Result};

/// Symmetric matrix of squared distances with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceTable {
    n: usize,
    d: Vec<f64>,
}

impl DistanceTable {
    /// Builds the table from upper-triangular entries in row-major order.
    /// Small negative values from approximate decryption are clamped to 0.
    pub fn from_pairs(n: usize, pairs: &[f64]) -> Result<Self> {
        if pairs.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Shape("pair count does not match client count"));
        }
        if pairs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = pairs[pair_index(n, i, j)].max(0.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Ok(DistanceTable { n, d })
    }

    /// Plaintext squared Euclidean distances between models.
    pub fn from_weights(models: &[WeightVector]) -> Result<Self> {
        let n = models.len();
        if models.iter().any(|m| m.len() != models[0].len()) {
            return Err(Error::Shape("models differ in length"));
        }
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push(models[i].squared_distance(&models[j]));
            }
        }
        Self::from_pairs(n, &pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// `Σ_j d(i, j)` per client.
    pub fn totals(&self) -> Vec<f64> {
        self.d.chunks(self.n.max(1)).map(|row| row.iter().sum()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DistanceTable { n: self.n, d: self.d.iter().map(|v| v * factor).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Rule {
    Krum,
    MultiKrum,
    Median,
    /// Plain averaging of every client: the undefended baseline.
    Mean,
}

/// How the key holder ranks clients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScoreMode {
    /// Krum scores over the `n - c - 2` nearest neighbours.
    Neighbours,
    /// Rank by total distance to all clients.
    SumDis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleConfig {
    pub rule: Rule,
    /// Assumed number of compromised clients.
    pub c: usize,
    /// Multi-Krum selection size.
    pub l: usize,
    pub score: ScoreMode,
}

impl RuleConfig {
    pub fn new(rule: Rule, c: usize, l: usize) -> Self {
        RuleConfig { rule, c, l, score: ScoreMode::Neighbours }
    }

    /// Number of clients the rule selects among `n`.
    pub fn selection_size(&self, n: usize) -> usize {
        match self.rule {
            Rule::Krum | Rule::Median => 1,
            Rule::MultiKrum => self.l,
            Rule::Mean => n,
        }
    }

    /// Whether the aggregate is a mean over several selected clients.
    pub fn averages(&self, n: usize) -> bool {
        self.selection_size(n) > 1
    }

    /// Round-level checks: the Krum validity bound `c < (n - 2) / 2` and
    /// each rule's own precondition.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::Rule("at least three clients are required"));
        }
        if 2 * self.c + 2 >= n {
            return Err(Error::Rule("compromised count must satisfy c < (n - 2) / 2"));
        }
        match self.rule {
            Rule::MultiKrum => check_multi_krum(n, self.c, self.l),
            Rule::Krum => check_krum(n, self.c),
            Rule::Median | Rule::Mean => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionResult {
    pub rule: Rule,
    /// Selected clients, in selection order.
    pub selected: Vec<usize>,
}

impl SelectionResult {
    pub fn l(&self) -> usize {
        self.selected.len()
    }
}

fn check_krum(n: usize, c: usize) -> Result<()> {
    if n < c + 3 {
        return Err(Error::Rule("Krum needs n >= c + 3"));
    }
    Ok(())
}

fn check_multi_krum(n: usize, c: usize, l: usize) -> Result<()> {
    if l == 0 || l > n || n - l <= 2 * c + 2 {
        return Err(Error::Rule("Multi-Krum needs n - l > 2c + 2"));
    }
    Ok(())
}

/// Index of the minimum, first one on ties.
fn argmin(values: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, v) in values {
        if v < best.1 || best.0 == usize::MAX {
            best = (i, v);
        }
    }
    best.0
}

/// Krum scores of the clients in `alive`, each over its
/// `|alive| - c - 2` nearest neighbours within `alive`.
fn scores_within(t: &DistanceTable, c: usize, alive: &[usize]) -> Vec<f64> {
    let m = alive.len() - c - 2;
    let mut row = Vec::with_capacity(alive.len());
    alive
        .iter()
        .map(|&i| {
            row.clear();
            row.extend(alive.iter().filter(|&&j| j != i).map(|&j| t.get(i, j)));
            row.sort_unstable_by(f64::total_cmp);
            row[..m].iter().sum()
        })
        .collect()
}

pub fn krum_scores(t: &DistanceTable, c: usize) -> Result<Vec<f64>> {
    check_krum(t.n, c)?;
    let all: Vec<usize> = (0..t.n).collect();
    Ok(scores_within(t, c, &all))
}

pub fn krum_select(t: &DistanceTable, c: usize) -> Result<SelectionResult> {
    let s = krum_scores(t, c)?;
    Ok(SelectionResult { rule: Rule::Krum, selected: vec![argmin(s.into_iter().enumerate())] })
}

/// Repeated Krum: pick the best-scoring client, remove it, rescore the rest.
pub fn multi_krum_select(t: &DistanceTable, c: usize, l: usize) -> Result<SelectionResult> {
    check_multi_krum(t.n, c, l)?;
    let mut alive: Vec<usize> = (0..t.n).collect();
    let mut selected = Vec::with_capacity(l);
    while selected.len() < l {
        let s = scores_within(t, c, &alive);
        let pos = argmin(s.into_iter().enumerate());
        selected.push(alive.remove(pos));
    }
    Ok(SelectionResult { rule: Rule::MultiKrum, selected })
}

/// Clients ordered by ascending total, ties by index.
fn rank_by_totals(totals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(a.cmp(&b)));
    order
}

/// The client at 1-based rank `(n + 1) / 2` (odd `n`) or `n / 2` (even `n`)
/// by total distance.
pub fn median_from_totals(totals: &[f64]) -> Result<SelectionResult> {
    let n = totals.len();
    if n == 0 {
        return Err(Error::Rule("no clients"));
    }
    let rank = if n % 2 == 0 { n / 2 } else { n.div_ceil(2) };
    Ok(SelectionResult { rule: Rule::Median, selected: vec![rank_by_totals(totals)[rank - 1]] })
}

pub fn median_select(t: &DistanceTable) -> Result<SelectionResult> {
    median_from_totals(&t.totals())
}

fn mean_select(n: usize) -> SelectionResult {
    SelectionResult { rule: Rule::Mean, selected: (0..n).collect() }
}

/// Selection from per-client totals alone.
pub fn select_by_totals(totals: &[f64], cfg: &RuleConfig) -> Result<SelectionResult> {
    let n = totals.len();
    match cfg.rule {
        Rule::Krum => {
            check_krum(n, cfg.c)?;
            Ok(SelectionResult { rule: Rule::Krum, selected: vec![rank_by_totals(totals)[0]] })
        }
        Rule::MultiKrum => {
            check_multi_krum(n, cfg.c, cfg.l)?;
            let mut order = rank_by_totals(totals);
            order.truncate(cfg.l);
            Ok(SelectionResult { rule: Rule::MultiKrum, selected: order })
        }
        Rule::Median => median_from_totals(totals),
        Rule::Mean => Ok(mean_select(n)),
    }
}

/// Decrypted distance information available to the key holder.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DecryptedDistances {
    Pairwise(DistanceTable),
    Totals(Vec<f64>),
}

impl DecryptedDistances {
    pub fn n(&self) -> usize {
        match self {
            DecryptedDistances::Pairwise(t) => t.n(),
            DecryptedDistances::Totals(v) => v.len(),
        }
    }
}

/// Applies the configured rule.
pub fn select(d: &DecryptedDistances, cfg: &RuleConfig) -> Result<SelectionResult> {
    match (d, cfg.score) {
        (DecryptedDistances::Totals(totals), _) => select_by_totals(totals, cfg),
        (DecryptedDistances::Pairwise(t), ScoreMode::SumDis) => select_by_totals(&t.totals(), cfg),
        (DecryptedDistances::Pairwise(t), ScoreMode::Neighbours) => match cfg.rule {
            Rule::Krum => krum_select(t, cfg.c),
            Rule::MultiKrum => multi_krum_select(t, cfg.c, cfg.l),
            Rule::Median => median_select(t),
            Rule::Mean => Ok(mean_select(t.n())),
        },
    }
}

/// The aggregate a plaintext server would compute for `sel`.
pub fn plaintext_aggregate(models: &[WeightVector], sel: &SelectionResult) -> Result<WeightVector> {
    let first = sel.selected.first().ok_or(Error::Rule("empty selection"))?;
    let len = models[*first].len();
    let mut acc = vec![0.0; len];
    for &i in &sel.selected {
        for (a, w) in acc.iter_mut().zip(models[i].as_slice()) {
            *a += w;
        }
    }
    let inv = 1.0 / sel.selected.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    WeightVector::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Krum score as the total distance minus the `c + 1` largest ones.
    fn oracle_scores(t: &DistanceTable, c: usize, alive: &[usize]) -> Vec<f64> {
        alive
            .iter()
            .map(|&i| {
                let mut ds: Vec<f64> = alive.iter().filter(|&&j| j != i).map(|&j| t.get(i, j)).collect();
                ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
                ds[c + 1..].iter().sum()
            })
            .collect()
    }

    fn oracle_argmin(s: &[f64]) -> usize {
        (0..s.len()).find(|&i| s.iter().all(|&v| s[i] <= v)).unwrap()
    }

    fn oracle_multi_krum(t: &DistanceTable, c: usize, l: usize) -> Vec<usize> {
        let mut alive: Vec<usize> = (0..t.n()).collect();
        let mut out = Vec::new();
        for _ in 0..l {
            let pos = oracle_argmin(&oracle_scores(t, c, &alive));
            out.push(alive.remove(pos));
        }
        out
    }

    fn oracle_median(t: &DistanceTable) -> usize {
        let totals = t.totals();
        let n = totals.len();
        let rank = if n % 2 == 1 { (n + 1) / 2 } else { n / 2 };
        (0..n)
            .find(|&i| {
                (0..n).filter(|&j| totals[j] < totals[i] || (totals[j] == totals[i] && j < i)).count() == rank - 1
            })
            .unwrap()
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize) -> DistanceTable {
        let pairs: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random_range(0.0..100.0)).collect();
        DistanceTable::from_pairs(n, &pairs).unwrap()
    }

    #[test]
    fn identical_clients_select_first() {
        let t = DistanceTable::from_pairs(5, &[0.0; 10]).unwrap();
        assert_eq!(krum_select(&t, 1).unwrap().selected, vec![0]);
        assert_eq!(median_select(&t).unwrap().selected, vec![2]);
    }

    #[test]
    fn krum_line_example() {
        // clients at 0, 0.1, 0.2, 10 on a line
        let t = DistanceTable::from_pairs(4, &[0.01, 0.04, 100.0, 0.01, 98.01, 96.04]).unwrap();
        let s = krum_scores(&t, 1).unwrap();
        assert_eq!(s, vec![0.01, 0.01, 0.01, 96.04]);
        assert_eq!(krum_select(&t, 1).unwrap().selected, vec![0]);
    }

    #[test]
    fn krum_needs_enough_clients() {
        let t = DistanceTable::from_pairs(3, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(krum_select(&t, 1), Err(Error::Rule(_))));
        assert!(krum_select(&t, 0).is_ok());
    }

    #[test]
    fn krum_matches_oracle_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.random_range(3..16);
            let c = rng.random_range(0..=n - 3);
            let t = random_table(&mut rng, n);
            let want = oracle_argmin(&oracle_scores(&t, c, &(0..n).collect::<Vec<_>>()));
            assert_eq!(krum_select(&t, c).unwrap().selected, vec![want]);
        }
    }

    #[test]
    fn multi_krum_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = random_table(&mut rng, 10);
            assert_eq!(multi_krum_select(&t, 1, 5).unwrap().selected, oracle_multi_krum(&t, 1, 5));
            assert_eq!(multi_krum_select(&t, 1, 1).unwrap().selected, krum_select(&t, 1).unwrap().selected);
        }
    }

    #[test]
    fn multi_krum_constraint_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_table(&mut rng, 8);
        assert!(matches!(multi_krum_select(&t, 2, 2), Err(Error::Rule(_))));
        assert!(multi_krum_select(&t, 2, 1).is_ok());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_from_totals(&[4.0]).unwrap().selected, vec![0]);
        assert_eq!(median_from_totals(&[10.0, 5.0, 13.0, 7.0, 30.0]).unwrap().selected, vec![0]);
        // even n takes rank n/2
        assert_eq!(median_from_totals(&[4.0, 1.0, 3.0, 2.0]).unwrap().selected, vec![3]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(2..12);
            let t = random_table(&mut rng, n);
            assert_eq!(median_select(&t).unwrap().selected, vec![oracle_median(&t)]);
        }
    }

    #[test]
    fn round_level_validation() {
        assert!(RuleConfig::new(Rule::Krum, 1, 1).validate(10).is_ok());
        // c >= (n - 2) / 2
        assert!(RuleConfig::new(Rule::Krum, 4, 1).validate(10).is_err());
        assert!(RuleConfig::new(Rule::Krum, 1, 1).validate(4).is_err());
        assert!(RuleConfig::new(Rule::MultiKrum, 1, 5).validate(10).is_ok());
        assert!(RuleConfig::new(Rule::MultiKrum, 1, 6).validate(10).is_err());
    }

    #[test]
    fn sumdis_mode_ranks_by_totals() {
        let t = DistanceTable::from_pairs(5, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        let totals = t.totals();
        let cfg = RuleConfig { score: ScoreMode::SumDis, ..RuleConfig::new(Rule::Krum, 0, 1) };
        let best = (0..5).min_by(|&a, &b| totals[a].total_cmp(&totals[b])).unwrap();
        assert_eq!(select(&DecryptedDistances::Pairwise(t.clone()), &cfg).unwrap().selected, vec![best]);
        assert_eq!(select(&DecryptedDistances::Totals(totals), &cfg).unwrap().selected, vec![best]);
    }

    #[test]
    fn plaintext_mean_of_selection() {
        let models: Vec<WeightVector> =
            [0.0, 2.0, 4.0].iter().map(|&v| WeightVector::new(vec![v; 3]).unwrap()).collect();
        let sel = SelectionResult { rule: Rule::MultiKrum, selected: vec![0, 1, 2] };
        assert_eq!(plaintext_aggregate(&models, &sel).unwrap().as_slice(), &[2.0; 3]);
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant(
            pairs in proptest::collection::vec(0.0f64..50.0, 45),
            factor in 0.01f64..100.0,
        ) {
            let t = DistanceTable::from_pairs(10, &pairs).unwrap();
            let s = t.scaled(factor);
            prop_assert_eq!(krum_select(&t, 2).unwrap(), krum_select(&s, 2).unwrap());
            prop_assert_eq!(multi_krum_select(&t, 1, 4).unwrap(), multi_krum_select(&s, 1, 4).unwrap());
            prop_assert_eq!(median_select(&t).unwrap(), median_select(&s).unwrap());
        }

        #[test]
        fn multi_krum_selects_distinct_clients(pairs in proptest::collection::vec(0.0f64..50.0, 45), l in 1usize..6) {
            let sel = multi_krum_select(&DistanceTable::from_pairs(10, &pairs).unwrap(), 1, l).unwrap();
            let mut s = sel.selected.clone();
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(s.len(), l);
            prop_assert!(s.iter().all(|&i| i < 10));
        }
    }
}
