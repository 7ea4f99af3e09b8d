//! Synthetic error populations with exactly known oracle quantities, and
//! synthetic classification datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::losses::{oracle_stats, Label, OracleStats, Posterior, PredictionMatrix, SquareMatrix};

/// One mixture component: within it, hypothesis `h` errs independently
/// with probability `error_rates[h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponent {
    pub weight: f64,
    pub error_rates: Vec<f64>,
}

/// Binary task whose hypotheses make errors according to a mixture of
/// independent-error components. The label is uniform on {0, 1}; a
/// hypothesis that errs predicts the other label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPopulation {
    pub components: Vec<ErrorComponent>,
}

impl ErrorPopulation {
    pub fn new(components: Vec<ErrorComponent>) -> Result<Self> {
        let m = components.first().map_or(0, |c| c.error_rates.len());
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some(c) = components.iter().find(|c| c.error_rates.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: c.error_rates.len(),
            });
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "component weights must form a distribution".into(),
            ));
        }
        if components
            .iter()
            .flat_map(|c| &c.error_rates)
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidParameter("error rates must lie in [0,1]".into()));
        }
        Ok(Self { components })
    }

    /// Disjoint error regions of mass `1/m`; hypothesis `h` errs exactly on
    /// region `h`.
    pub fn disjoint(m: usize) -> Self {
        let components = (0..m)
            .map(|h| ErrorComponent {
                weight: 1.0 / m as f64,
                error_rates: (0..m).map(|g| if g == h { 1.0 } else { 0.0 }).collect(),
            })
            .collect();
        Self { components }
    }

    pub fn independent(m: usize, risk: f64) -> Self {
        Self {
            components: vec![ErrorComponent {
                weight: 1.0,
                error_rates: vec![risk; m],
            }],
        }
    }

    pub fn identical(m: usize, risk: f64) -> Self {
        Self {
            components: vec![
                ErrorComponent {
                    weight: risk,
                    error_rates: vec![1.0; m],
                },
                ErrorComponent {
                    weight: 1.0 - risk,
                    error_rates: vec![0.0; m],
                },
            ],
        }
    }

    pub fn n_hypotheses(&self) -> usize {
        self.components[0].error_rates.len()
    }

    pub fn oracle(&self) -> Result<OracleStats> {
        let m = self.n_hypotheses();
        let mut risks = vec![0.0; m];
        let mut tandem = SquareMatrix::zeros(m);
        for c in &self.components {
            for h in 0..m {
                risks[h] += c.weight * c.error_rates[h];
                for g in 0..m {
                    let joint = if h == g {
                        c.error_rates[h]
                    } else {
                        c.error_rates[h] * c.error_rates[g]
                    };
                    tandem.set(h, g, tandem.get(h, g) + c.weight * joint);
                }
            }
        }
        oracle_stats(risks.iter().map(|r| r.clamp(0.0, 1.0)).collect(), tandem)
    }

    /// Exact risk of the weighted majority vote. With the label uniform and
    /// ties going to class 0, a tie errs with probability 1/2.
    pub fn mv_risk(&self, posterior: &Posterior) -> Result<f64> {
        let m = self.n_hypotheses();
        if posterior.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: posterior.len(),
            });
        }
        if m > 24 {
            return Err(Error::InvalidParameter(format!(
                "exact MV risk enumerates 2^{m} patterns"
            )));
        }
        let mut risk = 0.0;
        for c in &self.components {
            for pattern in 0u32..(1 << m) {
                let mut prob = c.weight;
                let mut wrong = 0.0;
                for h in 0..m {
                    let p = c.error_rates[h];
                    if pattern >> h & 1 == 1 {
                        prob *= p;
                        wrong += posterior.rho[h];
                    } else {
                        prob *= 1.0 - p;
                    }
                }
                if prob == 0.0 {
                    continue;
                }
                let right = 1.0 - wrong;
                if wrong > right {
                    risk += prob;
                } else if wrong == right {
                    risk += 0.5 * prob;
                }
            }
        }
        Ok(risk)
    }

    /// Draws `n` labeled samples as a prediction matrix.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PredictionMatrix> {
        let m = self.n_hypotheses();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![Vec::with_capacity(n); m];
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u: f64 = rng.gen();
            let mut k = 0;
            while k + 1 < self.components.len() && u >= self.components[k].weight {
                u -= self.components[k].weight;
                k += 1;
            }
            let y: Label = rng.gen_range(0..2);
            labels.push(y);
            for (h, row) in rows.iter_mut().enumerate() {
                let err = rng.gen::<f64>() < self.components[k].error_rates[h];
                row.push(if err { 1 - y } else { y });
            }
        }
        PredictionMatrix::new(rows, Some(labels), 2)
    }
}

/// Synthetic classification problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Gaussian class clouds with means spaced `separation` apart along
    /// random directions, plus a fraction of flipped labels.
    Blobs {
        classes: usize,
        dim: usize,
        separation: f64,
        label_noise: f64,
    },
    /// Label is the parity of the signs of the first two coordinates;
    /// remaining coordinates are noise.
    Xor { dim: usize, label_noise: f64 },
}

pub fn generate_dataset(spec: &DatasetSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let (classes, dim, noise) = match *spec {
        DatasetSpec::Blobs {
            classes,
            dim,
            label_noise,
            ..
        } => (classes, dim, label_noise),
        DatasetSpec::Xor { dim, label_noise } => (2, dim, label_noise),
    };
    if classes < 2 || dim == 0 || !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidParameter(format!(
            "need classes >= 2, dim >= 1 and noise in [0,1], got {classes}, {dim}, {noise}"
        )));
    }
    if matches!(spec, DatasetSpec::Xor { .. }) && dim < 2 {
        return Err(Error::InvalidParameter("xor needs dim >= 2".into()));
    }
    let means: Vec<Vec<f64>> = match *spec {
        DatasetSpec::Blobs { separation, .. } => (0..classes)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x * separation / (2.0 * norm)).collect()
            })
            .collect(),
        DatasetSpec::Xor { .. } => Vec::new(),
    };
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut y = match spec {
            DatasetSpec::Blobs { .. } => {
                // Round-robin keeps every class populated.
                let y = i % classes;
                data.extend(means[y].iter().map(|mu| mu + normal(&mut rng)));
                y
            }
            DatasetSpec::Xor { .. } => {
                let x: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
                let y = usize::from((x[0] > 0.0) != (x[1] > 0.0));
                data.extend(x);
                y
            }
        };
        if rng.gen::<f64>() < noise {
            y = (y + rng.gen_range(1..classes)) % classes;
        }
        labels.push(y);
    }
    let names = (0..classes).map(|k| k.to_string()).collect();
    Dataset::new(FeatureMatrix::new(n, dim, data)?, labels, names)
}
