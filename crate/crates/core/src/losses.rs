//! Prediction matrices and the first- and second-order loss statistics
//! (Gibbs loss, tandem loss, disagreement) the bounds are built from.

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::forest::{predict_tree, Ensemble};

/// Class labels inside prediction matrices.
pub type Label = u16;

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Weight distribution `rho` over hypotheses together with its prior `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub rho: Vec<f64>,
    pub pi: Vec<f64>,
}

const SIMPLEX_TOLERANCE: f64 = 1e-10;

fn check_distribution(name: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidPosterior(format!("{name} is empty")));
    }
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidPosterior(format!(
            "{name} has negative or non-finite entries"
        )));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InvalidPosterior(format!("{name} sums to {s}")));
    }
    Ok(())
}

impl Posterior {
    pub fn new(rho: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        if rho.len() != pi.len() {
            return Err(Error::DimensionMismatch {
                expected: pi.len(),
                found: rho.len(),
            });
        }
        check_distribution("rho", &rho)?;
        check_distribution("pi", &pi)?;
        if rho.iter().zip(&pi).any(|(&r, &p)| r > 0.0 && p <= 0.0) {
            return Err(Error::InvalidPosterior("rho puts mass where pi is zero".into()));
        }
        Ok(Self { rho, pi })
    }

    pub fn uniform(m: usize) -> Self {
        let w = vec![1.0 / m as f64; m];
        Self { rho: w.clone(), pi: w }
    }

    /// `rho` against a uniform prior.
    pub fn with_uniform_prior(rho: Vec<f64>) -> Result<Self> {
        let m = rho.len();
        Self::new(rho, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// KL(rho || pi) in nats.
    pub fn kl(&self) -> f64 {
        kl_divergence(&self.rho, &self.pi)
    }
}

pub fn kl_divergence(rho: &[f64], pi: &[f64]) -> f64 {
    rho.iter()
        .zip(pi)
        .filter(|(&r, _)| r > 0.0)
        .map(|(&r, &p)| r * (r / p).ln())
        .sum::<f64>()
        .max(0.0)
}

/// `M x N` matrix of predicted labels, one row per hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    n_hyp: usize,
    n_samples: usize,
    preds: Vec<Label>,
    pub labels: Option<Vec<Label>>,
    pub n_classes: usize,
}

impl PredictionMatrix {
    pub fn new(rows: Vec<Vec<Label>>, labels: Option<Vec<Label>>, n_classes: usize) -> Result<Self> {
        let n_hyp = rows.len();
        let n_samples = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != n_samples) {
            return Err(Error::DimensionMismatch {
                expected: n_samples,
                found: r.len(),
            });
        }
        if let Some(y) = &labels {
            if y.len() != n_samples {
                return Err(Error::DimensionMismatch {
                    expected: n_samples,
                    found: y.len(),
                });
            }
        }
        let out_of_range = rows
            .iter()
            .flatten()
            .chain(labels.iter().flatten())
            .find(|&&v| v as usize >= n_classes);
        if let Some(&v) = out_of_range {
            return Err(Error::LabelOutOfRange {
                label: v as usize,
                n_classes,
            });
        }
        Ok(Self {
            n_hyp,
            n_samples,
            preds: rows.concat(),
            labels,
            n_classes,
        })
    }

    pub fn n_hypotheses(&self) -> usize {
        self.n_hyp
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn row(&self, h: usize) -> &[Label] {
        &self.preds[h * self.n_samples..(h + 1) * self.n_samples]
    }

    pub fn get(&self, h: usize, i: usize) -> Label {
        self.preds[h * self.n_samples + i]
    }

    fn labels_or_err(&self) -> Result<&[Label]> {
        self.labels.as_deref().ok_or(Error::MissingLabels)
    }
}

/// Predictions of every tree on every row of `x`.
pub fn prediction_matrix(ensemble: &Ensemble, x: &FeatureMatrix, labels: Option<&[usize]>) -> Result<PredictionMatrix> {
    if x.cols() != ensemble.n_features {
        return Err(Error::DimensionMismatch {
            expected: ensemble.n_features,
            found: x.cols(),
        });
    }
    let predict = |tree| -> Result<Vec<Label>> { Ok(predict_tree(tree, x)?.into_iter().map(|p| p as Label).collect()) };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<Label>> = {
        use rayon::prelude::*;
        ensemble.trees.par_iter().map(predict).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<Label>> = ensemble.trees.iter().map(predict).collect::<Result<_>>()?;
    let labels = labels.map(|y| y.iter().map(|&v| v as Label).collect());
    PredictionMatrix::new(rows, labels, ensemble.n_classes)
}

/// Weighted majority vote; ties go to the lowest class index.
pub fn mv_predict(pm: &PredictionMatrix, posterior: &Posterior) -> Result<Vec<usize>> {
    if posterior.len() != pm.n_hypotheses() {
        return Err(Error::DimensionMismatch {
            expected: pm.n_hypotheses(),
            found: posterior.len(),
        });
    }
    let mut votes = vec![0.0f64; pm.n_classes];
    let mut out = Vec::with_capacity(pm.n_samples());
    for i in 0..pm.n_samples() {
        votes.iter_mut().for_each(|v| *v = 0.0);
        for (h, &w) in posterior.rho.iter().enumerate() {
            votes[pm.get(h, i) as usize] += w;
        }
        let mut best = 0;
        for k in 1..votes.len() {
            if votes[k] > votes[best] {
                best = k;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// 0-1 loss of the weighted majority vote.
pub fn mv_loss(pm: &PredictionMatrix, posterior: &Posterior) -> Result<f64> {
    let labels = pm.labels_or_err()?;
    let preds = mv_predict(pm, posterior)?;
    if preds.is_empty() {
        return Ok(0.0);
    }
    let errors = preds.iter().zip(labels).filter(|(&p, &y)| p != y as usize).count();
    Ok(errors as f64 / preds.len() as f64)
}

/// Where the disagreement matrix was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisagreementSource {
    /// Pairwise out-of-bag overlaps of the labeled sample.
    OobOverlap,
    /// All columns of a separate unlabeled pool.
    Unlabeled,
}

/// Empirical loss statistics of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    /// Gibbs loss of each hypothesis on its validation set.
    pub gibbs: Vec<f64>,
    /// Tandem losses on pairwise validation overlaps.
    pub tandem: SquareMatrix,
    pub disagreement: SquareMatrix,
    pub n_min_first: usize,
    pub n_min_pair: usize,
    pub m_min: usize,
    pub n_classes: usize,
    pub disagreement_source: DisagreementSource,
}

impl LossStats {
    pub fn n_hypotheses(&self) -> usize {
        self.gibbs.len()
    }

    pub fn is_binary(&self) -> bool {
        self.n_classes == 2
    }
}

/// Packed bit vector over samples.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        let mut words = vec![0u64; n.div_ceil(64)];
        for i in 0..n {
            if f(i) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Bits(words)
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn and_count(&self, other: &Bits) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn and3_count(&self, b: &Bits, c: &Bits) -> usize {
        self.0
            .iter()
            .zip(&b.0)
            .zip(&c.0)
            .map(|((x, y), z)| (x & y & z).count_ones() as usize)
            .sum()
    }
}

/// Per-class indicator bitsets of each hypothesis' predictions.
fn class_bits(pm: &PredictionMatrix) -> Vec<Vec<Bits>> {
    (0..pm.n_hypotheses())
        .map(|h| {
            let row = pm.row(h);
            (0..pm.n_classes)
                .map(|k| Bits::from_fn(pm.n_samples(), |i| row[i] as usize == k))
                .collect()
        })
        .collect()
}

/// Disagreement count of `h` and `g` restricted to `within` (of size `size`).
fn disagreements(classes: &[Vec<Bits>], h: usize, g: usize, within: &Bits, size: usize) -> usize {
    let agree: usize = classes[h]
        .iter()
        .zip(&classes[g])
        .map(|(a, b)| a.and3_count(b, within))
        .sum();
    size - agree
}

fn for_each_row<T: Send>(m: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..m).map(f).collect()
    }
}

/// Computes Gibbs, tandem and disagreement statistics.
///
/// `masks[h][i]` marks sample `i` as part of the validation set `S_h`.
/// Tandem losses use `S_h ∩ S_g`. Disagreements use the same overlaps unless
/// an unlabeled prediction matrix is given, in which case all of its columns
/// are used and the masks are ignored for them.
pub fn compute_loss_stats(
    pm: &PredictionMatrix,
    masks: &[Vec<bool>],
    unlabeled: Option<&PredictionMatrix>,
) -> Result<LossStats> {
    let labels = pm.labels_or_err()?;
    let m = pm.n_hypotheses();
    let n = pm.n_samples();
    if masks.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: masks.len(),
        });
    }
    if let Some(bad) = masks.iter().find(|mask| mask.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    if let Some(u) = unlabeled {
        if u.n_hypotheses() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: u.n_hypotheses(),
            });
        }
        if u.n_samples() == 0 {
            return Err(Error::InvalidParameter("unlabeled pool is empty".into()));
        }
    }

    let oob: Vec<Bits> = masks.iter().map(|mask| Bits::from_fn(n, |i| mask[i])).collect();
    let errs: Vec<Bits> = (0..m)
        .map(|h| {
            let row = pm.row(h);
            Bits::from_fn(n, |i| row[i] != labels[i])
        })
        .collect();
    let sizes: Vec<usize> = oob.iter().map(Bits::count).collect();
    if let Some(h) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyOob { tree: h });
    }
    let gibbs: Vec<f64> = (0..m)
        .map(|h| errs[h].and_count(&oob[h]) as f64 / sizes[h] as f64)
        .collect();

    let classes = class_bits(pm);
    let unlabeled_classes = unlabeled.map(class_bits);
    let all_unlabeled = unlabeled.map(|u| Bits::from_fn(u.n_samples(), |_| true));

    // Row h holds (tandem, disagreement, overlap size) for g <= h.
    let rows = for_each_row(m, |h| {
        (0..=h)
            .map(|g| {
                let both = oob[h].and(&oob[g]);
                let size = both.count();
                if size == 0 {
                    return Err(Error::EmptyOverlap { first: g, second: h });
                }
                let tandem = errs[h].and3_count(&errs[g], &both) as f64 / size as f64;
                let dis = if g == h {
                    0.0
                } else if let (Some(uc), Some(all)) = (&unlabeled_classes, &all_unlabeled) {
                    let mu = unlabeled.map_or(0, PredictionMatrix::n_samples);
                    disagreements(uc, h, g, all, mu) as f64 / mu as f64
                } else {
                    disagreements(&classes, h, g, &both, size) as f64 / size as f64
                };
                Ok((tandem, dis, size))
            })
            .collect::<Result<Vec<_>>>()
    });

    let mut tandem = SquareMatrix::zeros(m);
    let mut disagreement = SquareMatrix::zeros(m);
    let mut n_min_pair = usize::MAX;
    for (h, row) in rows.into_iter().enumerate() {
        for (g, (t, d, size)) in row?.into_iter().enumerate() {
            tandem.set(h, g, t);
            tandem.set(g, h, t);
            disagreement.set(h, g, d);
            disagreement.set(g, h, d);
            n_min_pair = n_min_pair.min(size);
        }
    }
    let n_min_first = *sizes.iter().min().expect("at least one hypothesis");
    let (m_min, source) = match unlabeled {
        Some(u) => (u.n_samples(), DisagreementSource::Unlabeled),
        None => (n_min_pair, DisagreementSource::OobOverlap),
    };
    Ok(LossStats {
        gibbs,
        tandem,
        disagreement,
        n_min_first,
        n_min_pair,
        m_min,
        n_classes: pm.n_classes,
        disagreement_source: source,
    })
}

/// `E_rho[values]`.
pub fn aggregate_first(values: &[f64], posterior: &Posterior) -> Result<f64> {
    if values.len() != posterior.len() {
        return Err(Error::DimensionMismatch {
            expected: posterior.len(),
            found: values.len(),
        });
    }
    Ok(values.iter().zip(&posterior.rho).map(|(v, r)| v * r).sum())
}

/// `rho^T A rho`.
pub fn aggregate_pair(matrix: &SquareMatrix, posterior: &Posterior) -> Result<f64> {
    bilinear(matrix, &posterior.rho)
}

pub(crate) fn bilinear(matrix: &SquareMatrix, rho: &[f64]) -> Result<f64> {
    if matrix.dim != rho.len() {
        return Err(Error::DimensionMismatch {
            expected: rho.len(),
            found: matrix.dim,
        });
    }
    Ok(matrix.mul_vec(rho).iter().zip(rho).map(|(a, r)| a * r).sum())
}

/// Exact population quantities: per-hypothesis risks and pairwise tandem
/// losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleStats {
    pub risks: Vec<f64>,
    pub tandem: SquareMatrix,
}

const ORACLE_TOLERANCE: f64 = 1e-12;

/// Wraps true risks and tandem losses after checking
/// `0 <= L(h,g) <= min(L(h), L(g))`, symmetry and `L(h,h) = L(h)`.
pub fn oracle_stats(risks: Vec<f64>, tandem: SquareMatrix) -> Result<OracleStats> {
    let m = risks.len();
    if tandem.dim != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: tandem.dim,
        });
    }
    if let Some(r) = risks.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InconsistentOracle(format!("risk {r} outside [0,1]")));
    }
    for h in 0..m {
        for g in 0..m {
            let t = tandem.get(h, g);
            if (t - tandem.get(g, h)).abs() > ORACLE_TOLERANCE {
                return Err(Error::InconsistentOracle(format!("tandem ({h},{g}) is not symmetric")));
            }
            if t < -ORACLE_TOLERANCE || t > risks[h].min(risks[g]) + ORACLE_TOLERANCE {
                return Err(Error::InconsistentOracle(format!(
                    "tandem ({h},{g}) = {t} outside [0, min(L({h}), L({g}))]"
                )));
            }
        }
        if (tandem.get(h, h) - risks[h]).abs() > ORACLE_TOLERANCE {
            return Err(Error::InconsistentOracle(format!(
                "tandem ({h},{h}) differs from L({h})"
            )));
        }
    }
    Ok(OracleStats { risks, tandem })
}

impl OracleStats {
    /// Disagreements implied in binary classification:
    /// `D(h,g) = L(h) + L(g) - 2 L(h,g)`.
    pub fn binary_disagreement(&self) -> SquareMatrix {
        let m = self.risks.len();
        let mut d = SquareMatrix::zeros(m);
        for h in 0..m {
            for g in 0..m {
                if h != g {
                    d.set(h, g, self.risks[h] + self.risks[g] - 2.0 * self.tandem.get(h, g));
                }
            }
        }
        d
    }

    /// Hypotheses with disjoint error regions of mass `1/m` each.
    pub fn disjoint_errors(m: usize) -> Self {
        let mut t = SquareMatrix::zeros(m);
        for h in 0..m {
            t.set(h, h, 1.0 / m as f64);
        }
        Self {
            risks: vec![1.0 / m as f64; m],
            tandem: t,
        }
    }

    /// `m` hypotheses with independent errors at a common rate.
    pub fn independent_errors(m: usize, risk: f64) -> Self {
        let mut t = SquareMatrix::zeros(m);
        for h in 0..m {
            for g in 0..m {
                t.set(h, g, if h == g { risk } else { risk * risk });
            }
        }
        Self {
            risks: vec![risk; m],
            tandem: t,
        }
    }

    /// `m` copies of one hypothesis.
    pub fn identical(m: usize, risk: f64) -> Self {
        Self {
            risks: vec![risk; m],
            tandem: SquareMatrix {
                dim: m,
                data: vec![risk; m * m],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pm(rows: &[&[Label]], labels: Option<&[Label]>, c: usize) -> PredictionMatrix {
        PredictionMatrix::new(
            rows.iter().map(|r| r.to_vec()).collect(),
            labels.map(<[Label]>::to_vec),
            c,
        )
        .unwrap()
    }

    fn post(rho: &[f64]) -> Posterior {
        Posterior::with_uniform_prior(rho.to_vec()).unwrap()
    }

    #[test]
    fn mv_single_row() {
        let p = pm(&[&[2, 0, 1]], None, 3);
        assert_eq!(mv_predict(&p, &Posterior::uniform(1)).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn mv_weighted_votes_and_ties() {
        let p = pm(&[&[1], &[2], &[2]], None, 3);
        assert_eq!(mv_predict(&p, &post(&[0.5, 0.3, 0.2])).unwrap(), vec![1]);
        let p = pm(&[&[0], &[1], &[2]], None, 3);
        assert_eq!(mv_predict(&p, &post(&[0.6, 0.2, 0.2])).unwrap(), vec![0]);
        assert!(mv_predict(&p, &Posterior::uniform(2)).is_err());
    }

    #[test]
    fn mv_loss_examples() {
        let p = pm(&[&[0, 1, 1]], Some(&[0, 1, 1]), 2);
        assert_eq!(mv_loss(&p, &Posterior::uniform(1)).unwrap(), 0.0);
        let p = pm(&[&[0, 0, 0, 0], &[0, 0, 0, 0]], Some(&[0, 1, 0, 1]), 2);
        assert_eq!(mv_loss(&p, &Posterior::uniform(2)).unwrap(), 0.5);
        // Columns: (0,0,1) -> 0, (1,1,0) -> 1, (0,1,1) -> 1, (1,0,0) -> 0.
        // Labels 0,0,1,1 -> errors on samples 2 and 4.
        let p = pm(&[&[0, 1, 0, 1], &[0, 1, 1, 0], &[1, 0, 1, 0]], Some(&[0, 0, 1, 1]), 2);
        assert_eq!(mv_loss(&p, &Posterior::uniform(3)).unwrap(), 0.5);
        let unlabeled = pm(&[&[0]], None, 2);
        assert!(matches!(
            mv_loss(&unlabeled, &Posterior::uniform(1)),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn mv_loss_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = rng.gen_range(1..6);
            let n = rng.gen_range(1..20);
            let rows: Vec<Vec<Label>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..3)).collect()).collect();
            let labels: Vec<Label> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let p = PredictionMatrix::new(rows, Some(labels), 3).unwrap();
            // Dyadic weights keep the rescaled sums exact.
            let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(1..8) as f64).collect();
            let total: f64 = raw.iter().sum();
            let a = post(&raw.iter().map(|w| w / total).collect::<Vec<_>>());
            let scaled: Vec<f64> = raw.iter().map(|w| w * 4.0).collect();
            let s: f64 = scaled.iter().sum();
            let b = post(&scaled.iter().map(|w| w / s).collect::<Vec<_>>());
            assert_eq!(mv_loss(&p, &a).unwrap(), mv_loss(&p, &b).unwrap());
        }
    }

    #[test]
    fn tandem_on_single_overlap() {
        let p = pm(&[&[1, 0, 0], &[1, 1, 1]], Some(&[0, 0, 0]), 2);
        let masks = vec![vec![true, true, false], vec![true, false, true]];
        let s = compute_loss_stats(&p, &masks, None).unwrap();
        assert_eq!(s.tandem.get(0, 1), 1.0);
        assert_eq!(s.n_min_pair, 1);
        assert_eq!(s.n_min_first, 2);
        assert_eq!(s.gibbs, vec![0.5, 1.0]);
    }

    #[test]
    fn complementary_errors_full_overlap() {
        // h1 errs on X1, h2 errs on X2.
        let p = pm(&[&[1, 0], &[0, 1]], Some(&[0, 0]), 2);
        let masks = vec![vec![true, true]; 2];
        let s = compute_loss_stats(&p, &masks, None).unwrap();
        assert_eq!(s.gibbs, vec![0.5, 0.5]);
        assert_eq!(s.tandem.get(0, 1), 0.0);
        assert_eq!(s.disagreement.get(0, 1), 1.0);
        assert_eq!(s.disagreement.get(0, 0), 0.0);
        assert_eq!(s.tandem.get(1, 1), 0.5);
    }

    #[test]
    fn empty_sets_are_reported() {
        let p = pm(&[&[0, 0], &[0, 0]], Some(&[0, 1]), 2);
        let err = compute_loss_stats(&p, &[vec![true, false], vec![false, true]], None).unwrap_err();
        assert!(matches!(err, Error::EmptyOverlap { first: 0, second: 1 }));
        assert!(err.to_string().contains("reduced bagging"));
        let err = compute_loss_stats(&p, &[vec![true, false], vec![false, false]], None).unwrap_err();
        assert!(matches!(err, Error::EmptyOob { tree: 1 }));
    }

    #[test]
    fn unlabeled_pool_replaces_overlap_disagreement() {
        let p = pm(&[&[0, 1], &[0, 1]], Some(&[0, 1]), 2);
        let u = pm(&[&[0, 0, 1, 1], &[0, 1, 1, 0]], None, 2);
        let s = compute_loss_stats(&p, &[vec![true, true], vec![true, false]], Some(&u)).unwrap();
        assert_eq!(s.disagreement.get(0, 1), 0.5);
        assert_eq!(s.m_min, 4);
        assert_eq!(s.disagreement_source, DisagreementSource::Unlabeled);
    }

    #[test]
    fn aggregates() {
        let a = SquareMatrix {
            dim: 3,
            data: vec![0.3; 9],
        };
        assert_abs_diff_eq!(
            aggregate_pair(&a, &Posterior::uniform(3)).unwrap(),
            0.3,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            aggregate_first(&[0.3; 3], &Posterior::uniform(3)).unwrap(),
            0.3,
            epsilon = 1e-15
        );
        let t = SquareMatrix::from_rows(&[vec![0.2, 0.1, 0.0], vec![0.1, 0.4, 0.2], vec![0.0, 0.2, 0.3]]).unwrap();
        let point = post(&[0.0, 1.0, 0.0]);
        assert_eq!(aggregate_pair(&t, &point).unwrap(), 0.4);
        assert_eq!(aggregate_first(&[0.2, 0.4, 0.3], &point).unwrap(), 0.4);
        assert!(aggregate_pair(&t, &Posterior::uniform(2)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut a = SquareMatrix::zeros(3);
            for i in 0..3 {
                for j in 0..=i {
                    let v = rng.gen::<f64>();
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
            let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            let rho: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let mut brute = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    brute += rho[i] * rho[j] * a.get(i, j);
                }
            }
            assert_abs_diff_eq!(aggregate_pair(&a, &post(&rho)).unwrap(), brute, epsilon = 1e-14);
        }
    }

    #[test]
    fn posterior_validation() {
        assert!(Posterior::new(vec![0.5, 0.6], vec![0.5, 0.5]).is_err());
        assert!(Posterior::new(vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(Posterior::new(vec![-0.1, 1.1], vec![0.5, 0.5]).is_err());
        let p = Posterior::new(vec![1.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(p.kl(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(Posterior::uniform(4).kl(), 0.0);
    }

    #[test]
    fn oracle_regimes() {
        let rho = Posterior::uniform(4);
        let best = OracleStats::disjoint_errors(4);
        assert_eq!(aggregate_first(&best.risks, &rho).unwrap(), 0.25);
        assert_eq!(aggregate_pair(&best.tandem, &rho).unwrap(), 1.0 / 16.0);

        let ind = OracleStats::independent_errors(10, 0.3);
        let t = aggregate_pair(&ind.tandem, &Posterior::uniform(10)).unwrap();
        assert_abs_diff_eq!(t, 0.09 + 0.1 * 0.21, epsilon = 1e-15);

        let same = OracleStats::identical(5, 0.3);
        let rho = post(&[0.1, 0.2, 0.3, 0.25, 0.15]);
        assert_abs_diff_eq!(aggregate_pair(&same.tandem, &rho).unwrap(), 0.3, epsilon = 1e-15);

        for s in [best, ind, same] {
            assert!(oracle_stats(s.risks.clone(), s.tandem.clone()).is_ok());
        }
    }

    #[test]
    fn oracle_rejects_inconsistent_inputs() {
        let t = SquareMatrix::from_rows(&[vec![0.2, 0.3], vec![0.3, 0.4]]).unwrap();
        assert!(oracle_stats(vec![0.2, 0.4], t).is_err());
        let t = SquareMatrix::from_rows(&[vec![0.2, 0.1], vec![0.0, 0.4]]).unwrap();
        assert!(oracle_stats(vec![0.2, 0.4], t).is_err());
        let t = SquareMatrix::from_rows(&[vec![0.1, 0.1], vec![0.1, 0.4]]).unwrap();
        assert!(oracle_stats(vec![0.2, 0.4], t).is_err());
    }
}
