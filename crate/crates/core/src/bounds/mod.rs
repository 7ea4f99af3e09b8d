//! Oracle and empirical majority-vote bounds: first order (FO), tandem
//! (TND), disagreement (DIS), C-tandem (CTD) and the C1/C2 forms of the
//! C-bound.
//!
//! Empirical bounds plug PAC-Bayes-kl (or the PAC-Bayes-λ relaxation) into
//! the oracle bounds. All logarithms are natural. Values above 1 are
//! reported as computed and flagged, never clamped.

pub mod kl;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use kl::{kl_bernoulli, kl_inv_lower, kl_inv_upper};

use crate::error::{Error, Result};
use crate::losses::{aggregate_first, aggregate_pair, LossStats, OracleStats, Posterior};
use crate::optimize::{optimal_gamma, optimal_lambda};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "FO")]
    Fo,
    #[serde(rename = "TND")]
    Tnd,
    #[serde(rename = "DIS")]
    Dis,
    #[serde(rename = "CTD")]
    Ctd,
    #[serde(rename = "C1")]
    C1,
    #[serde(rename = "C2")]
    C2,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::Fo,
        BoundKind::C1,
        BoundKind::C2,
        BoundKind::Ctd,
        BoundKind::Tnd,
        BoundKind::Dis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Fo => "FO",
            BoundKind::Tnd => "TND",
            BoundKind::Dis => "DIS",
            BoundKind::Ctd => "CTD",
            BoundKind::C1 => "C1",
            BoundKind::C2 => "C2",
        }
    }

    pub fn binary_only(self) -> bool {
        matches!(self, BoundKind::Dis | BoundKind::C1 | BoundKind::C2)
    }

    /// Number of estimated quantities sharing the confidence budget.
    pub fn delta_split(self) -> u32 {
        match self {
            BoundKind::Fo | BoundKind::Tnd => 1,
            BoundKind::Dis | BoundKind::Ctd | BoundKind::C1 => 2,
            BoundKind::C2 => 3,
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FO" => Ok(BoundKind::Fo),
            "TND" => Ok(BoundKind::Tnd),
            "DIS" => Ok(BoundKind::Dis),
            "CTD" => Ok(BoundKind::Ctd),
            "C1" => Ok(BoundKind::C1),
            "C2" => Ok(BoundKind::C2),
            other => Err(Error::InvalidParameter(format!("unknown bound `{other}`"))),
        }
    }
}

/// How the empirical quantities are turned into confidence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Form {
    /// PAC-Bayes-kl inversion.
    #[default]
    Kl,
    /// PAC-Bayes-λ relaxation; `None` picks the closed-form optimum.
    Lambda { lambda: Option<f64>, gamma: Option<f64> },
}

impl Form {
    pub fn lambda(lambda: f64) -> Self {
        Form::Lambda {
            lambda: Some(lambda),
            gamma: None,
        }
    }

    pub fn optimal_lambda() -> Self {
        Form::Lambda {
            lambda: None,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    Kl,
    Lambda,
    Oracle,
}

/// A single computed bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub bound: BoundKind,
    pub form: FormName,
    pub value: f64,
    pub exceeds_one: bool,
    /// Preconditions failed (e.g. Gibbs upper bound >= 1/2 for CTD); `value`
    /// is then 1.
    pub vacuous: bool,
    pub delta_split: u32,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
}

impl BoundEntry {
    fn new(bound: BoundKind, form: FormName, value: f64) -> Self {
        Self {
            bound,
            form,
            value,
            exceeds_one: value > 1.0,
            vacuous: false,
            delta_split: bound.delta_split(),
            lambda: None,
            gamma: None,
        }
    }

    fn vacuous(bound: BoundKind, form: FormName) -> Self {
        Self {
            vacuous: true,
            ..Self::new(bound, form, 1.0)
        }
    }

    /// Table rendering: values above 1 (or vacuous) show as `>1`.
    pub fn display(&self) -> String {
        if self.exceeds_one || self.vacuous {
            ">1".to_string()
        } else {
            format!("{:.4}", self.value)
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")))
    }
}

fn check_count(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must lie in (0,2), got {lambda}"
        )))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")))
    }
}

/// `KL-weight * KL + ln(split * 2 sqrt(n) / delta)`: the numerator of the
/// PAC-Bayes complexity term when `delta` is shared by `split` estimates.
pub fn complexity_numerator(kl_weight: f64, kl_rho_pi: f64, n: usize, delta: f64, split: u32) -> f64 {
    kl_weight * kl_rho_pi + (2.0 * split as f64 * (n as f64).sqrt() / delta).ln()
}

/// PAC-Bayes-λ upper bound `loss/(1-λ/2) + numerator/(λ(1-λ/2)n)`.
pub fn lambda_upper(loss: f64, numerator: f64, n: usize, lambda: f64) -> f64 {
    let half = 1.0 - lambda / 2.0;
    loss / half + numerator / (lambda * half * n as f64)
}

/// PAC-Bayes-λ lower bound `(1-γ/2) loss - numerator/(γ m)`.
pub fn gamma_lower(loss: f64, numerator: f64, m: usize, gamma: f64) -> f64 {
    (1.0 - gamma / 2.0) * loss - numerator / (gamma * m as f64)
}

fn resolve_lambda(lambda: Option<f64>, loss: f64, numerator: f64, n: usize) -> Result<f64> {
    let lambda = lambda.unwrap_or_else(|| optimal_lambda(loss, n, numerator));
    check_lambda(lambda)?;
    Ok(lambda)
}

/// First-order bound `2 E_rho[L]` with `E_rho[L]` bounded from the Gibbs
/// loss on `n = n_min_first` samples.
pub fn fo_bound(gibbs_hat: f64, kl_rho_pi: f64, n: usize, delta: f64, form: Form) -> Result<BoundEntry> {
    check_delta(delta)?;
    check_count("n", n)?;
    let num = complexity_numerator(1.0, kl_rho_pi, n, delta, 1);
    match form {
        Form::Kl => Ok(BoundEntry::new(
            BoundKind::Fo,
            FormName::Kl,
            2.0 * kl_inv_upper(gibbs_hat, num / n as f64),
        )),
        Form::Lambda { lambda, .. } => {
            let lambda = resolve_lambda(lambda, gibbs_hat, num, n)?;
            let mut e = BoundEntry::new(
                BoundKind::Fo,
                FormName::Lambda,
                2.0 * lambda_upper(gibbs_hat, num, n, lambda),
            );
            e.lambda = Some(lambda);
            Ok(e)
        }
    }
}

/// Tandem bound `4 E_rho2[L(h,h')]`; the complexity carries `2 KL` and
/// `n = n_min_pair`.
pub fn tnd_bound(tandem_hat: f64, kl_rho_pi: f64, n: usize, delta: f64, form: Form) -> Result<BoundEntry> {
    check_delta(delta)?;
    check_count("n", n)?;
    let num = complexity_numerator(2.0, kl_rho_pi, n, delta, 1);
    match form {
        Form::Kl => Ok(BoundEntry::new(
            BoundKind::Tnd,
            FormName::Kl,
            4.0 * kl_inv_upper(tandem_hat, num / n as f64),
        )),
        Form::Lambda { lambda, .. } => {
            let lambda = resolve_lambda(lambda, tandem_hat, num, n)?;
            let mut e = BoundEntry::new(
                BoundKind::Tnd,
                FormName::Lambda,
                4.0 * lambda_upper(tandem_hat, num, n, lambda),
            );
            e.lambda = Some(lambda);
            Ok(e)
        }
    }
}

/// Disagreement bound `4 E_rho[L] - 2 E_rho2[D]` (binary only) with the
/// confidence budget split in half between the two estimates. Floored at 0.
pub fn dis_bound(
    gibbs_hat: f64,
    dis_hat: f64,
    kl_rho_pi: f64,
    n: usize,
    m: usize,
    delta: f64,
    form: Form,
) -> Result<BoundEntry> {
    check_delta(delta)?;
    check_count("n", n)?;
    check_count("m", m)?;
    let num_first = complexity_numerator(1.0, kl_rho_pi, n, delta, 2);
    let num_dis = complexity_numerator(2.0, kl_rho_pi, m, delta, 2);
    match form {
        Form::Kl => {
            let upper = kl_inv_upper(gibbs_hat, num_first / n as f64);
            let lower = kl_inv_lower(dis_hat, num_dis / m as f64);
            Ok(BoundEntry::new(
                BoundKind::Dis,
                FormName::Kl,
                (4.0 * upper - 2.0 * lower).max(0.0),
            ))
        }
        Form::Lambda { lambda, gamma } => {
            let lambda = resolve_lambda(lambda, gibbs_hat, num_first, n)?;
            let gamma = match gamma {
                Some(g) => Some(g),
                None if dis_hat > 0.0 => Some(optimal_gamma(dis_hat, m, kl_rho_pi, delta)),
                // With no observed disagreement the lower bound is best
                // at gamma -> inf, where it vanishes.
                None => None,
            };
            let lower = match gamma {
                Some(g) => {
                    check_gamma(g)?;
                    gamma_lower(dis_hat, num_dis, m, g)
                }
                None => 0.0,
            };
            let value = 4.0 * lambda_upper(gibbs_hat, num_first, n, lambda) - 2.0 * lower;
            let mut e = BoundEntry::new(BoundKind::Dis, FormName::Lambda, value.max(0.0));
            e.lambda = Some(lambda);
            e.gamma = gamma;
            Ok(e)
        }
    }
}

/// C-tandem bound `(T - L^2) / (T - L + 1/4)` with kl plug-ins at `delta/2`
/// each: the lower Gibbs bound in the numerator, the upper Gibbs and upper
/// tandem bounds elsewhere. Vacuous when the Gibbs upper bound reaches 1/2
/// or the denominator is not positive.
pub fn ctd_bound(
    gibbs_hat: f64,
    tandem_hat: f64,
    kl_rho_pi: f64,
    n_first: usize,
    n_pair: usize,
    delta: f64,
) -> Result<BoundEntry> {
    check_delta(delta)?;
    check_count("n_first", n_first)?;
    check_count("n_pair", n_pair)?;
    let eps_first = complexity_numerator(1.0, kl_rho_pi, n_first, delta, 2) / n_first as f64;
    let eps_pair = complexity_numerator(2.0, kl_rho_pi, n_pair, delta, 2) / n_pair as f64;
    let lu = kl_inv_upper(gibbs_hat, eps_first);
    let ll = kl_inv_lower(gibbs_hat, eps_first);
    let tu = kl_inv_upper(tandem_hat, eps_pair);
    let denom = tu - lu + 0.25;
    if lu >= 0.5 || denom <= 0.0 {
        return Ok(BoundEntry::vacuous(BoundKind::Ctd, FormName::Kl));
    }
    let value = ((tu - ll * ll) / denom).max(0.0);
    Ok(BoundEntry::new(BoundKind::Ctd, FormName::Kl, value))
}

/// C1 form `1 - (1 - 2 UB(L))^2 / (1 - 2 LB(D))`, binary only, `delta/2`
/// per estimate.
pub fn c1_bound(
    gibbs_hat: f64,
    dis_hat: f64,
    kl_rho_pi: f64,
    n_first: usize,
    m: usize,
    delta: f64,
) -> Result<BoundEntry> {
    check_delta(delta)?;
    check_count("n_first", n_first)?;
    check_count("m", m)?;
    let upper = kl_inv_upper(
        gibbs_hat,
        complexity_numerator(1.0, kl_rho_pi, n_first, delta, 2) / n_first as f64,
    );
    let lower = kl_inv_lower(dis_hat, complexity_numerator(2.0, kl_rho_pi, m, delta, 2) / m as f64);
    let denom = 1.0 - 2.0 * lower;
    if denom <= 0.0 {
        return Ok(BoundEntry::vacuous(BoundKind::C1, FormName::Kl));
    }
    let margin = (1.0 - 2.0 * upper).max(0.0);
    Ok(BoundEntry::new(
        BoundKind::C1,
        FormName::Kl,
        1.0 - margin * margin / denom,
    ))
}

/// C2 form `1 - (1 - (2 UB(T) + UB(D)))^2 / (1 - 2 LB(D))`, binary only,
/// `delta/3` per estimate.
pub fn c2_bound(
    tandem_hat: f64,
    dis_hat: f64,
    kl_rho_pi: f64,
    n_pair: usize,
    m: usize,
    delta: f64,
) -> Result<BoundEntry> {
    check_delta(delta)?;
    check_count("n_pair", n_pair)?;
    check_count("m", m)?;
    let t_upper = kl_inv_upper(
        tandem_hat,
        complexity_numerator(2.0, kl_rho_pi, n_pair, delta, 3) / n_pair as f64,
    );
    let eps_dis = complexity_numerator(2.0, kl_rho_pi, m, delta, 3) / m as f64;
    let d_upper = kl_inv_upper(dis_hat, eps_dis);
    let d_lower = kl_inv_lower(dis_hat, eps_dis);
    let denom = 1.0 - 2.0 * d_lower;
    if denom <= 0.0 {
        return Ok(BoundEntry::vacuous(BoundKind::C2, FormName::Kl));
    }
    let margin = (1.0 - (2.0 * t_upper + d_upper)).max(0.0);
    Ok(BoundEntry::new(
        BoundKind::C2,
        FormName::Kl,
        1.0 - margin * margin / denom,
    ))
}

/// Aggregated statistics a report was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gibbs: f64,
    pub tandem: f64,
    pub disagreement: f64,
    pub kl_rho_pi: f64,
    pub n_min_first: usize,
    pub n_min_pair: usize,
    pub m_min: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn get(&self, kind: BoundKind) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.bound == kind)
    }

    pub fn value(&self, kind: BoundKind) -> Option<f64> {
        self.get(kind).map(|e| e.value)
    }
}

/// Aggregates `stats` under `posterior` and evaluates the requested bounds.
/// CTD, C1 and C2 always use the kl form.
pub fn empirical_bounds(
    stats: &LossStats,
    posterior: &Posterior,
    delta: f64,
    kinds: &[BoundKind],
    form: Form,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if let Some(k) = kinds.iter().find(|k| k.binary_only()) {
        if !stats.is_binary() {
            return Err(Error::RequiresBinary(k.name()));
        }
    }
    let inputs = BoundInputs {
        gibbs: aggregate_first(&stats.gibbs, posterior)?,
        tandem: aggregate_pair(&stats.tandem, posterior)?,
        disagreement: aggregate_pair(&stats.disagreement, posterior)?,
        kl_rho_pi: posterior.kl(),
        n_min_first: stats.n_min_first,
        n_min_pair: stats.n_min_pair,
        m_min: stats.m_min,
        delta,
    };
    let i = &inputs;
    let entries = kinds
        .iter()
        .map(|&kind| match kind {
            BoundKind::Fo => fo_bound(i.gibbs, i.kl_rho_pi, i.n_min_first, delta, form),
            BoundKind::Tnd => tnd_bound(i.tandem, i.kl_rho_pi, i.n_min_pair, delta, form),
            BoundKind::Dis => dis_bound(
                i.gibbs,
                i.disagreement,
                i.kl_rho_pi,
                i.n_min_first,
                i.m_min,
                delta,
                form,
            ),
            BoundKind::Ctd => ctd_bound(i.gibbs, i.tandem, i.kl_rho_pi, i.n_min_first, i.n_min_pair, delta),
            BoundKind::C1 => c1_bound(i.gibbs, i.disagreement, i.kl_rho_pi, i.n_min_first, i.m_min, delta),
            BoundKind::C2 => c2_bound(i.tandem, i.disagreement, i.kl_rho_pi, i.n_min_pair, i.m_min, delta),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport { inputs, entries })
}

/// Oracle values of all six bounds. DIS, C1 and C2 use the binary identity
/// `D(h,h') = L(h) + L(h') - 2 L(h,h')` and are only meaningful for binary
/// tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBounds {
    pub gibbs: f64,
    pub tandem: f64,
    pub disagreement: f64,
    pub fo: f64,
    pub tnd: f64,
    pub dis: f64,
    pub ctd: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn oracle_bounds(stats: &OracleStats, posterior: &Posterior) -> Result<OracleBounds> {
    let g = aggregate_first(&stats.risks, posterior)?;
    let t = aggregate_pair(&stats.tandem, posterior)?;
    let d = aggregate_pair(&stats.binary_disagreement(), posterior)?;
    Ok(oracle_bounds_from(g, t, d))
}

/// Oracle bounds from aggregated `E_rho[L]`, `E_rho2[L(h,h')]` and
/// `E_rho2[D(h,h')]`.
pub fn oracle_bounds_from(gibbs: f64, tandem: f64, disagreement: f64) -> OracleBounds {
    let (g, t, d) = (gibbs, tandem, disagreement);
    let ctd = if g < 0.5 { (t - g * g) / (t - g + 0.25) } else { 1.0 };
    let c_form = |margin: f64| {
        let denom = 1.0 - 2.0 * d;
        if g >= 0.5 || denom <= 0.0 {
            1.0
        } else {
            1.0 - margin * margin / denom
        }
    };
    OracleBounds {
        gibbs: g,
        tandem: t,
        disagreement: d,
        fo: 2.0 * g,
        tnd: 4.0 * t,
        dis: 4.0 * g - 2.0 * d,
        ctd,
        c1: c_form(1.0 - 2.0 * g),
        c2: c_form(1.0 - (2.0 * t + d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fo_composes_kl_inverse() {
        let e = fo_bound(0.2, 0.0, 100, 0.05, Form::Kl).unwrap();
        assert_abs_diff_eq!(e.value, 2.0 * kl_inv_upper(0.2, 400f64.ln() / 100.0), epsilon = 1e-15);
        // ln(2 sqrt(100) / 0.05) = ln 400.
        assert_abs_diff_eq!(
            complexity_numerator(1.0, 0.0, 100, 0.05, 1),
            400f64.ln(),
            epsilon = 1e-13
        );
        let big = fo_bound(0.0, 0.0, 100_000_000, 0.05, Form::Kl).unwrap();
        assert!(big.value < 1e-6);
        assert!(fo_bound(0.2, 0.0, 100, 0.05, Form::lambda(2.0)).is_err());
        assert!(fo_bound(0.2, 0.0, 100, 1.0, Form::Kl).is_err());
        assert!(fo_bound(0.2, 0.0, 0, 0.05, Form::Kl).is_err());
    }

    #[test]
    fn tnd_closed_form_at_zero_loss() {
        let (n, delta) = (500usize, 0.05);
        let e = tnd_bound(0.0, 0.0, n, delta, Form::Kl).unwrap();
        let expected = 4.0 * (1.0 - (delta / (2.0 * (n as f64).sqrt())).powf(1.0 / n as f64));
        assert_abs_diff_eq!(e.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn tnd_uses_doubled_kl() {
        let kl = 0.7;
        let t = tnd_bound(0.1, kl, 300, 0.05, Form::Kl).unwrap();
        let eps = (2.0 * kl + (2.0 * 300f64.sqrt() / 0.05).ln()) / 300.0;
        assert_abs_diff_eq!(t.value, 4.0 * kl_inv_upper(0.1, eps), epsilon = 1e-15);
    }

    #[test]
    fn tnd_lambda_example() {
        let e = tnd_bound(0.1, 0.0, 1000, 0.05, Form::optimal_lambda()).unwrap();
        let lambda = e.lambda.unwrap();
        assert_abs_diff_eq!(lambda, 0.3132, epsilon = 1e-4);
        assert_abs_diff_eq!(e.value, 0.582, epsilon = 1e-3);
        // Grid over lambda cannot do better.
        let num = complexity_numerator(2.0, 0.0, 1000, 0.05, 1);
        let best_grid = (1..100_000)
            .map(|k| 4.0 * lambda_upper(0.1, num, 1000, 2.0 * k as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(e.value <= best_grid + 1e-12);
    }

    #[test]
    fn dis_without_disagreement_is_first_order_style() {
        let e = dis_bound(0.1, 0.0, 0.0, 400, 400, 0.05, Form::Kl).unwrap();
        let fo = fo_bound(0.1, 0.0, 400, 0.025, Form::Kl).unwrap();
        assert_abs_diff_eq!(e.value, 2.0 * fo.value, epsilon = 1e-15);
        let huge = dis_bound(0.1, 0.3, 0.0, 400, 1 << 40, 0.05, Form::Kl).unwrap();
        let first = 4.0 * kl_inv_upper(0.1, complexity_numerator(1.0, 0.0, 400, 0.05, 2) / 400.0);
        assert_abs_diff_eq!(huge.value, first - 0.6, epsilon = 1e-4);
        assert!(dis_bound(
            0.1,
            0.3,
            0.0,
            400,
            400,
            0.05,
            Form::Lambda {
                lambda: Some(0.5),
                gamma: Some(0.0)
            }
        )
        .is_err());
    }

    #[test]
    fn dis_floors_at_zero() {
        let e = dis_bound(0.0, 0.5, 0.0, 1 << 30, 1 << 30, 0.05, Form::Kl).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn lambda_form_dominates_kl_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let loss = rng.gen_range(0.0..0.6);
            let kl = rng.gen_range(0.0..3.0);
            let n = rng.gen_range(20..5000);
            let lambda = rng.gen_range(0.01..1.99);
            for form in [Form::lambda(lambda), Form::optimal_lambda()] {
                let fk = fo_bound(loss, kl, n, 0.05, Form::Kl).unwrap().value;
                let fl = fo_bound(loss, kl, n, 0.05, form).unwrap().value;
                assert!(fl >= fk - 1e-12, "FO {fl} < {fk}");
                let tk = tnd_bound(loss, kl, n, 0.05, Form::Kl).unwrap().value;
                let tl = tnd_bound(loss, kl, n, 0.05, form).unwrap().value;
                assert!(tl >= tk - 1e-12, "TND {tl} < {tk}");
            }
            let dis = rng.gen_range(0.0..0.5);
            let m = rng.gen_range(20..5000);
            let gamma = rng.gen_range(0.01..4.0);
            let dk = dis_bound(loss, dis, kl, n, m, 0.05, Form::Kl).unwrap().value;
            let dl = dis_bound(
                loss,
                dis,
                kl,
                n,
                m,
                0.05,
                Form::Lambda {
                    lambda: Some(lambda),
                    gamma: Some(gamma),
                },
            )
            .unwrap()
            .value;
            assert!(dl >= dk - 1e-12, "DIS {dl} < {dk}");
        }
    }

    #[test]
    fn oracle_regime_values() {
        let b = oracle_bounds(&OracleStats::disjoint_errors(4), &Posterior::uniform(4)).unwrap();
        assert_eq!((b.fo, b.tnd, b.ctd), (0.5, 0.25, 0.0));

        let b = oracle_bounds(&OracleStats::independent_errors(10, 0.3), &Posterior::uniform(10)).unwrap();
        assert_abs_diff_eq!(b.fo, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(b.tnd, 0.444, epsilon = 1e-12);

        let b = oracle_bounds(&OracleStats::identical(6, 0.3), &Posterior::uniform(6)).unwrap();
        assert_abs_diff_eq!(b.tnd, 2.0 * b.fo, epsilon = 1e-15);
        assert_abs_diff_eq!(b.ctd, 0.84, epsilon = 1e-12);
    }

    #[test]
    fn oracle_c_forms() {
        // dis = 0, gibbs = 0.25 gives C1 = 0.75.
        let b = oracle_bounds_from(0.25, 0.25, 0.0);
        assert_abs_diff_eq!(b.c1, 0.75, epsilon = 1e-15);
        assert_eq!(oracle_bounds_from(0.5, 0.3, 0.1).c1, 1.0);
    }

    #[test]
    fn empirical_c1_vacuous_when_gibbs_large() {
        let e = c1_bound(0.6, 0.1, 0.0, 1000, 1000, 0.05).unwrap();
        assert_eq!(e.value, 1.0);
        let e = ctd_bound(0.6, 0.3, 0.0, 1000, 1000, 0.05).unwrap();
        assert!(e.vacuous);
        assert_eq!(e.display(), ">1");
    }

    #[test]
    fn ctd_is_an_upper_bound_on_its_plug_in() {
        // Worst-case composition dominates the plug-in formula.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let g = rng.gen_range(0.01..0.3);
            let t = rng.gen_range(g * g..g);
            let e = ctd_bound(g, t, 0.0, 2000, 800, 0.05).unwrap();
            if !e.vacuous {
                let plug = (t - g * g) / (t - g + 0.25);
                assert!(e.value >= plug - 1e-12);
            }
        }
    }

    #[test]
    fn report_rejects_binary_bounds_on_multiclass() {
        use crate::losses::{DisagreementSource, SquareMatrix};
        let stats = LossStats {
            gibbs: vec![0.1, 0.2],
            tandem: SquareMatrix::from_rows(&[vec![0.1, 0.05], vec![0.05, 0.2]]).unwrap(),
            disagreement: SquareMatrix::from_rows(&[vec![0.0, 0.2], vec![0.2, 0.0]]).unwrap(),
            n_min_first: 100,
            n_min_pair: 50,
            m_min: 50,
            n_classes: 3,
            disagreement_source: DisagreementSource::OobOverlap,
        };
        let p = Posterior::uniform(2);
        assert!(matches!(
            empirical_bounds(&stats, &p, 0.05, &[BoundKind::C1], Form::Kl),
            Err(Error::RequiresBinary("C1"))
        ));
        let r = empirical_bounds(
            &stats,
            &p,
            0.05,
            &[BoundKind::Fo, BoundKind::Tnd, BoundKind::Ctd],
            Form::Kl,
        )
        .unwrap();
        assert_eq!(r.entries.len(), 3);
        assert_abs_diff_eq!(r.inputs.gibbs, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(r.inputs.tandem, 0.1, epsilon = 1e-15);
    }
}
