use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Row-major samples with one target each. For classification the target
/// is the class index stored as a float; `classes == 0` marks regression.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    classes: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, classes: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || features.len() != dim * targets.len() {
            return Err(Error::Shape("feature matrix does not match the target count"));
        }
        if classes > 0 && targets.iter().any(|&t| t < 0.0 || t >= classes as f64 || libm::trunc(t) != t) {
            return Err(Error::Shape("class label out of range"));
        }
        Ok(Dataset { dim, classes, features, targets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.targets[i] as usize
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        let targets = idx.iter().map(|&i| self.targets[i]).collect();
        Dataset { dim: self.dim, classes: self.classes, features, targets }
    }

    /// Same features with every class label passed through `f`.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> Self {
        let targets = self.targets.iter().map(|&t| f(t as usize) as f64).collect();
        Dataset { targets, ..self.clone() }
    }
}

/// Isotropic Gaussian classes around random centres.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureSpec {
    pub dim: usize,
    pub classes: usize,
    /// Distance of every class centre from the origin.
    pub separation: f64,
    pub noise: f64,
}

impl MixtureSpec {
    /// Two classes at `±separation` along a random direction.
    pub fn two_gaussians(dim: usize) -> Self {
        MixtureSpec { dim, classes: 2, separation: 2.0, noise: 1.0 }
    }

    /// Random class centres; two classes are placed antipodally.
    pub fn centres<R: RngCore>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let unit = |rng: &mut R| {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            v.into_iter().map(|x| x * self.separation / norm).collect::<Vec<f64>>()
        };
        if self.classes == 2 {
            let u = unit(rng);
            let neg = u.iter().map(|x| -x).collect();
            alloc::vec![u, neg]
        } else {
            (0..self.classes).map(|_| unit(rng)).collect()
        }
    }

    /// `count` samples with uniformly drawn classes around `centres`.
    pub fn sample<R: RngCore>(&self, centres: &[Vec<f64>], count: usize, rng: &mut R) -> Dataset {
        let noise = Normal::new(0.0, self.noise).expect("finite noise");
        let mut features = Vec::with_capacity(count * self.dim);
        let mut targets = Vec::with_capacity(count);
        for _ in 0..count {
            let k = rng.random_range(0..self.classes);
            features.extend(centres[k].iter().map(|&m| m + noise.sample(rng)));
            targets.push(k as f64);
        }
        Dataset { dim: self.dim, classes: self.classes, features, targets }
    }
}

/// Client dataset sizes summing to `total`, proportional to log-normal
/// weights with shape `sigma`, each at least `min`.
pub fn quantity_skew<R: RngCore>(total: usize, clients: usize, sigma: f64, min: usize, rng: &mut R) -> Result<Vec<usize>> {
    if clients == 0 || total < clients * min {
        return Err(Error::Parameter("not enough samples for the requested partition"));
    }
    let dist = LogNormal::new(0.0, sigma).map_err(|_| Error::Parameter("invalid skew"))?;
    let weights: Vec<f64> = (0..clients).map(|_| dist.sample(rng)).collect();
    let sum: f64 = weights.iter().sum();
    let spare = total - clients * min;
    let mut sizes: Vec<usize> = weights.iter().map(|w| min + (w / sum * spare as f64) as usize).collect();
    let mut left = total - sizes.iter().sum::<usize>();
    let mut i = 0;
    while left > 0 {
        sizes[i % clients] += 1;
        left -= 1;
        i += 1;
    }
    Ok(sizes)
}

/// Shuffles `data` and splits it into consecutive parts of the given sizes.
pub fn partition<R: RngCore>(data: &Dataset, sizes: &[usize], rng: &mut R) -> Result<Vec<Dataset>> {
    if sizes.iter().sum::<usize>() != data.len() {
        return Err(Error::Shape("partition sizes do not cover the dataset"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    let mut start = 0;
    Ok(sizes
        .iter()
        .map(|&s| {
            let part = data.subset(&idx[start..start + s]);
            start += s;
            part
        })
        .collect())
}

/// Client shards plus a held-out validation set.
#[derive(Clone, Debug, PartialEq)]
pub struct FederatedData {
    pub clients: Vec<Dataset>,
    pub validation: Dataset,
}

impl FederatedData {
    /// Gaussian-mixture task split over `clients` with quantity skew.
    pub fn synthetic<R: RngCore>(
        spec: &MixtureSpec,
        clients: usize,
        per_client: usize,
        validation: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let centres = spec.centres(rng);
        let train = spec.sample(&centres, clients * per_client, rng);
        let sizes = quantity_skew(train.len(), clients, 0.5, per_client / 4 + 1, rng)?;
        let parts = partition(&train, &sizes, rng)?;
        Ok(FederatedData { clients: parts, validation: spec.sample(&centres, validation, rng) })
    }
}
