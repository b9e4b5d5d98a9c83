//! Normal-Inverse-Gamma evidential regression math: uncertainty
//! decomposition, the marginal negative log-likelihood, the regularized
//! training loss with a pairwise ranking term, and Student-t prediction
//! intervals.
//!
//! The NIG places a prior over a Gaussian's mean and variance:
//! `sigma^2 ~ InvGamma(alpha, beta)`, `mu ~ N(gamma, sigma^2 / nu)`,
//! `y ~ N(mu, sigma^2)`. Marginalizing gives a Student-t with `2 alpha`
//! degrees of freedom, location `gamma`, and scale
//! `sqrt(beta (1 + nu) / (nu alpha))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{NodeId, Tape};
use crate::scalar::Scalar;
use crate::special::{ln_gamma, student_t_quantile};

#[derive(Debug, Error)]
pub enum EvidentialError {
    #[error("invalid NIG parameters: {0}")]
    InvalidParams(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// NIG parameter quadruple for one target metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams<T> {
    /// Predicted mean, in target units.
    pub gamma: T,
    /// Evidential support; `> 0`.
    pub nu: T,
    /// Inverse-gamma shape; `> 1`.
    pub alpha: T,
    /// Inverse-gamma rate; `> 0`.
    pub beta: T,
}

impl<T: Scalar> NigParams<T> {
    pub fn new(gamma: T, nu: T, alpha: T, beta: T) -> Self {
        Self { gamma, nu, alpha, beta }
    }

    pub fn validate(&self) -> Result<(), EvidentialError> {
        let all_finite = self.gamma.is_finite()
            && self.nu.is_finite()
            && self.alpha.is_finite()
            && self.beta.is_finite();
        if !all_finite {
            return Err(EvidentialError::Numeric("non-finite NIG parameters".into()));
        }
        if !(self.nu > T::zero()) {
            return Err(EvidentialError::InvalidParams("nu must be > 0".into()));
        }
        if !(self.alpha > T::one()) {
            return Err(EvidentialError::InvalidParams("alpha must be > 1".into()));
        }
        if !(self.beta > T::zero()) {
            return Err(EvidentialError::InvalidParams("beta must be > 0".into()));
        }
        Ok(())
    }

    /// Scale of the Student-t marginal.
    pub fn t_scale(&self) -> T {
        (self.beta * (T::one() + self.nu) / (self.nu * self.alpha)).sqrt()
    }

    /// Multiply both uncertainty components by `tau^2` (temperature
    /// scaling); mean and hence all point metrics are untouched.
    pub fn scaled(&self, tau: T) -> Self {
        Self { beta: self.beta * tau * tau, ..*self }
    }
}

/// Mean plus decomposed predictive variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport<T> {
    pub mean: T,
    pub aleatoric: T,
    pub epistemic: T,
    pub total: T,
}

/// Decompose predictive uncertainty: aleatoric `beta / (alpha - 1)`,
/// epistemic `beta / (nu (alpha - 1))`, total their sum.
pub fn decompose<T: Scalar>(p: &NigParams<T>) -> Result<UncertaintyReport<T>, EvidentialError> {
    p.validate()?;
    let aleatoric = p.beta / (p.alpha - T::one());
    let epistemic = p.beta / (p.nu * (p.alpha - T::one()));
    Ok(UncertaintyReport { mean: p.gamma, aleatoric, epistemic, total: aleatoric + epistemic })
}

/// Negative log marginal likelihood of observing `y` under the NIG
/// predictive distribution. With `Omega = 2 beta (1 + nu)`:
///
/// `NLL = 1/2 ln(pi/nu) - alpha ln(Omega)
///        + (alpha + 1/2) ln(nu (y - gamma)^2 + Omega)
///        + ln Gamma(alpha) - ln Gamma(alpha + 1/2)`
pub fn nig_nll<T: Scalar>(y: T, p: &NigParams<T>) -> Result<T, EvidentialError> {
    p.validate()?;
    if !y.is_finite() {
        return Err(EvidentialError::Numeric("observation is not finite".into()));
    }
    let half = T::c(0.5);
    let pi = T::c(std::f64::consts::PI);
    let omega = T::c(2.0) * p.beta * (T::one() + p.nu);
    let resid = y - p.gamma;
    let nll = half * (pi / p.nu).ln() - p.alpha * omega.ln()
        + (p.alpha + half) * (p.nu * resid * resid + omega).ln()
        + ln_gamma(p.alpha)
        - ln_gamma(p.alpha + half);
    if !nll.is_finite() {
        return Err(EvidentialError::Numeric("non-finite NLL".into()));
    }
    Ok(nll)
}

/// Evidence-weighted one-sample penalty `|y - gamma| (2 nu + alpha)`.
pub fn evidence_penalty<T: Scalar>(y: T, p: &NigParams<T>) -> T {
    (y - p.gamma).abs() * (T::c(2.0) * p.nu + p.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig<T> {
    /// Evidence regularizer weight.
    pub lambda: T,
    /// Ranking-loss weight.
    pub rho_rank: T,
    /// Margin for the pairwise ranking hinge, in target units.
    pub margin: T,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        Self { lambda: T::c(0.01), rho_rank: T::c(0.1), margin: T::c(0.1) }
    }
}

/// Maximum ranking pairs drawn per batch.
pub const MAX_RANKING_PAIRS: usize = 32;

/// One training sample: observed targets and predicted NIG parameters per
/// metric, plus the stratum key used for ranking-pair selection.
#[derive(Debug, Clone)]
pub struct EvidentialSample<T> {
    pub targets: Vec<T>,
    pub nig: Vec<NigParams<T>>,
    pub stratum: u64,
}

/// A ranking pair on the makespan metric: predicted means and targets of
/// two comparable samples.
#[derive(Debug, Clone, Copy)]
pub struct RankPair<T> {
    pub gamma_i: T,
    pub gamma_j: T,
    pub y_i: T,
    pub y_j: T,
}

/// Deterministic pair selection: within-stratum ordered pairs in batch
/// order, capped at [`MAX_RANKING_PAIRS`]. Returns index pairs.
pub fn ranking_pair_indices<T>(batch: &[EvidentialSample<T>]) -> Vec<(usize, usize)> {
    let mut by_stratum: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for (i, s) in batch.iter().enumerate() {
        by_stratum.entry(s.stratum).or_default().push(i);
    }
    let mut pairs = Vec::new();
    'outer: for members in by_stratum.values() {
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                pairs.push((members[a], members[b]));
                if pairs.len() >= MAX_RANKING_PAIRS {
                    break 'outer;
                }
            }
        }
    }
    pairs
}

/// Margin-based pairwise ranking loss:
/// `mean over pairs of max(0, margin - sign(y_j - y_i) (gamma_j - gamma_i))`.
/// Pairs with equal targets are skipped.
pub fn ranking_loss<T: Scalar>(pairs: &[RankPair<T>], margin: T) -> T {
    let mut acc = T::zero();
    let mut n = 0usize;
    for p in pairs {
        if p.y_i == p.y_j {
            continue;
        }
        let sign = if p.y_j > p.y_i { T::one() } else { -T::one() };
        let hinge = (margin - sign * (p.gamma_j - p.gamma_i)).max(T::zero());
        acc += hinge;
        n += 1;
    }
    if n == 0 {
        T::zero()
    } else {
        acc / T::c(n as f64)
    }
}

/// Regularized evidential batch loss: mean over samples and metrics
/// (sample-major reduction) of `NLL + lambda |y - gamma| (2 nu + alpha)`,
/// plus `rho_rank` times the makespan ranking loss.
pub fn evidential_loss<T: Scalar>(
    batch: &[EvidentialSample<T>],
    cfg: &LossConfig<T>,
) -> Result<T, EvidentialError> {
    if batch.is_empty() {
        return Err(EvidentialError::EmptyBatch);
    }
    let metrics = batch[0].nig.len();
    let mut acc = T::zero();
    for s in batch {
        for k in 0..metrics {
            let p = &s.nig[k];
            let y = s.targets[k];
            acc += nig_nll(y, p)? + cfg.lambda * evidence_penalty(y, p);
        }
    }
    let mean = acc / T::c((batch.len() * metrics) as f64);
    let pairs: Vec<RankPair<T>> = ranking_pair_indices(batch)
        .into_iter()
        .map(|(i, j)| RankPair {
            gamma_i: batch[i].nig[0].gamma,
            gamma_j: batch[j].nig[0].gamma,
            y_i: batch[i].targets[0],
            y_j: batch[j].targets[0],
        })
        .collect();
    Ok(mean + cfg.rho_rank * ranking_loss(&pairs, cfg.margin))
}

/// Central prediction interval of the Student-t marginal at coverage
/// `level` in (0, 1); symmetric about `gamma`.
pub fn prediction_interval<T: Scalar>(
    p: &NigParams<T>,
    level: T,
) -> Result<(T, T), EvidentialError> {
    p.validate()?;
    if !(level > T::zero() && level < T::one()) {
        return Err(EvidentialError::InvalidArgument("interval level must be in (0,1)".into()));
    }
    let half = T::c(0.5);
    let q = student_t_quantile(half + half * level, T::c(2.0) * p.alpha);
    let half_width = q * p.t_scale();
    Ok((p.gamma - half_width, p.gamma + half_width))
}

/// NIG parameters as tape nodes, for differentiable losses.
#[derive(Debug, Clone, Copy)]
pub struct NigNodes {
    pub gamma: NodeId,
    pub nu: NodeId,
    pub alpha: NodeId,
    pub beta: NodeId,
}

/// Tape mirror of [`nig_nll`]; identical value, differentiable wrt the
/// four parameter nodes.
pub fn nig_nll_on_tape<T: Scalar>(tape: &mut Tape<T>, y: T, p: &NigNodes) -> NodeId {
    let half = T::c(0.5);
    let two = T::c(2.0);
    let pi = T::c(std::f64::consts::PI);

    let one_plus_nu = tape.add_const(p.nu, T::one());
    let beta_1nu = tape.mul(p.beta, one_plus_nu);
    let omega = tape.scale_const(beta_1nu, two);

    let yv = tape.scalar(y);
    let resid = tape.sub(yv, p.gamma);
    let resid2 = tape.mul(resid, resid);
    let nu_r2 = tape.mul(p.nu, resid2);
    let inner = tape.add(nu_r2, omega);

    let ln_nu = tape.ln(p.nu);
    let t1 = tape.scale_const(ln_nu, -half); // 1/2 ln(pi/nu) = 1/2 ln pi - 1/2 ln nu
    let t1 = tape.add_const(t1, half * pi.ln());

    let ln_omega = tape.ln(omega);
    let t2 = tape.mul(p.alpha, ln_omega);

    let ln_inner = tape.ln(inner);
    let a_half = tape.add_const(p.alpha, half);
    let t3 = tape.mul(a_half, ln_inner);

    let lg_a = tape.ln_gamma(p.alpha);
    let lg_ah = tape.ln_gamma(a_half);

    let s = tape.sub(t1, t2);
    let s = tape.add(s, t3);
    let s = tape.add(s, lg_a);
    tape.sub(s, lg_ah)
}

/// Tape mirror of [`evidence_penalty`].
pub fn evidence_penalty_on_tape<T: Scalar>(tape: &mut Tape<T>, y: T, p: &NigNodes) -> NodeId {
    let yv = tape.scalar(y);
    let resid = tape.sub(yv, p.gamma);
    let abs = tape.abs(resid);
    let two_nu = tape.scale_const(p.nu, T::c(2.0));
    let evidence = tape.add(two_nu, p.alpha);
    tape.mul(abs, evidence)
}

/// Tape mirror of [`ranking_loss`] over pre-selected pairs of mean nodes.
pub fn ranking_loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    pairs: &[(NodeId, NodeId, T, T)],
    margin: T,
) -> NodeId {
    let mut terms = Vec::new();
    for &(gi, gj, yi, yj) in pairs {
        if yi == yj {
            continue;
        }
        let sign = if yj > yi { T::one() } else { -T::one() };
        let diff = tape.sub(gj, gi);
        let signed = tape.scale_const(diff, -sign);
        let shifted = tape.add_const(signed, margin);
        terms.push(tape.relu(shifted));
    }
    if terms.is_empty() {
        tape.scalar(T::zero())
    } else {
        let total = tape.sum_vecs(&terms);
        tape.scale_const(total, T::one() / T::c(terms.len() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_hand_values() {
        let r = decompose(&NigParams::<f64>::new(5.0, 2.0, 3.0, 4.0)).unwrap();
        assert_eq!(r.mean, 5.0);
        assert_eq!(r.aleatoric, 2.0);
        assert_eq!(r.epistemic, 1.0);
        assert_eq!(r.total, 3.0);

        let r = decompose(&NigParams::<f64>::new(0.0, 1.0, 2.0, 1.0)).unwrap();
        assert_eq!(r.aleatoric, 1.0);
        assert_eq!(r.epistemic, 1.0);
    }

    #[test]
    fn epistemic_vanishes_with_infinite_evidence() {
        let r = decompose(&NigParams::<f64>::new(0.0, 1e9, 3.0, 4.0)).unwrap();
        assert!(r.epistemic < 1e-8 * r.aleatoric);
    }

    #[test]
    fn invalid_alpha_is_rejected() {
        let err = decompose(&NigParams::new(0.0, 1.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, EvidentialError::InvalidParams(_)));
    }

    #[test]
    fn nll_is_symmetric_and_minimized_at_gamma() {
        let p = NigParams::<f64>::new(2.0, 1.5, 2.5, 0.8);
        for c in [0.1, 0.7, 3.0] {
            let plus = nig_nll(p.gamma + c, &p).unwrap();
            let minus = nig_nll(p.gamma - c, &p).unwrap();
            assert!((plus - minus).abs() < 1e-12);
            assert!(plus > nig_nll(p.gamma, &p).unwrap());
        }
    }

    #[test]
    fn hand_computed_nll_value() {
        // Omega = 4: NLL = 1/2 ln(pi) + 1/2 ln(4) + ln Gamma(2) - ln Gamma(2.5)
        let p = NigParams::new(0.0, 1.0, 2.0, 1.0);
        let expected = 0.5 * std::f64::consts::PI.ln() + 0.5 * 4.0f64.ln() - ln_gamma(2.5f64);
        assert!((nig_nll(0.0, &p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ranking_loss_hand_cases() {
        let margin = 0.5f64;
        // Separated by at least the margin: no loss.
        let p = RankPair { gamma_i: 0.0, gamma_j: 0.5, y_i: 1.0, y_j: 2.0 };
        assert_eq!(ranking_loss(&[p], margin), 0.0);
        // Equal predictions: hinge sits at the margin.
        let p = RankPair { gamma_i: 1.0, gamma_j: 1.0, y_i: 1.0, y_j: 2.0 };
        assert_eq!(ranking_loss(&[p], margin), margin);
        // Reversed by gap g: margin + g.
        let g = 0.3;
        let p = RankPair { gamma_i: 1.0, gamma_j: 1.0 - g, y_i: 1.0, y_j: 2.0 };
        assert!((ranking_loss(&[p], margin) - (margin + g)).abs() < 1e-12);
        // Tied targets are skipped.
        let p = RankPair { gamma_i: 0.0, gamma_j: 9.0, y_i: 1.0, y_j: 1.0 };
        assert_eq!(ranking_loss(&[p], margin), 0.0);
    }

    #[test]
    fn loss_degenerates_to_mean_nll() {
        let batch: Vec<EvidentialSample<f64>> = (0..3)
            .map(|i| EvidentialSample {
                targets: vec![i as f64, 1.0],
                nig: vec![NigParams::new(0.5, 1.0, 2.0, 1.0), NigParams::new(1.0, 2.0, 3.0, 0.5)],
                stratum: 0,
            })
            .collect();
        let cfg = LossConfig { lambda: 0.0, rho_rank: 0.0, margin: 0.1 };
        let loss = evidential_loss(&batch, &cfg).unwrap();
        let mut acc = 0.0;
        for s in &batch {
            for k in 0..2 {
                acc += nig_nll(s.targets[k], &s.nig[k]).unwrap();
            }
        }
        assert!((loss - acc / 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_kills_the_penalty() {
        let p = NigParams::<f64>::new(1.25, 2.0, 3.0, 4.0);
        assert_eq!(evidence_penalty(1.25, &p), 0.0);
    }

    #[test]
    fn single_sample_loss_is_nll_plus_penalty() {
        let p = NigParams::new(0.0, 1.0, 2.0, 1.0);
        let y = 0.7f64;
        let cfg = LossConfig { lambda: 0.01, rho_rank: 0.1, margin: 0.1 };
        let batch = vec![EvidentialSample { targets: vec![y], nig: vec![p], stratum: 0 }];
        let loss = evidential_loss(&batch, &cfg).unwrap();
        let expected = nig_nll(y, &p).unwrap() + 0.01 * evidence_penalty(y, &p);
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let cfg = LossConfig::<f64>::default();
        assert!(matches!(evidential_loss(&[], &cfg), Err(EvidentialError::EmptyBatch)));
    }

    #[test]
    fn interval_is_symmetric_and_shrinks_with_level() {
        let p = NigParams::<f64>::new(3.0, 1.0, 30.0, 29.0);
        let (lo, hi) = prediction_interval(&p, 0.95).unwrap();
        assert!((hi - p.gamma - (p.gamma - lo)).abs() < 1e-10);
        let (lo2, hi2) = prediction_interval(&p, 1e-6).unwrap();
        assert!(hi2 - lo2 < 1e-4 * (hi - lo));
        assert!(prediction_interval(&p, 1.0).is_err());
        assert!(prediction_interval(&p, 0.0).is_err());
    }

    #[test]
    fn tape_nll_matches_plain_nll() {
        let p = NigParams::<f64>::new(0.4, 1.3, 2.2, 0.9);
        let y = -0.3;
        let mut tape = Tape::new();
        let nodes = NigNodes {
            gamma: tape.scalar(p.gamma),
            nu: tape.scalar(p.nu),
            alpha: tape.scalar(p.alpha),
            beta: tape.scalar(p.beta),
        };
        let nll = nig_nll_on_tape(&mut tape, y, &nodes);
        assert!((tape.scalar_value(nll) - nig_nll(y, &p).unwrap()).abs() < 1e-12);
        let pen = evidence_penalty_on_tape(&mut tape, y, &nodes);
        assert!((tape.scalar_value(pen) - evidence_penalty(y, &p)).abs() < 1e-12);
    }

    #[test]
    fn tape_nll_gradient_matches_finite_differences() {
        let theta = [0.4f64, 1.3, 2.2, 0.9];
        let y = -0.3;
        let eval = |t: &[f64]| nig_nll(y, &NigParams::new(t[0], t[1], t[2], t[3])).unwrap();
        let mut tape = Tape::new();
        let nodes = NigNodes {
            gamma: tape.scalar(theta[0]),
            nu: tape.scalar(theta[1]),
            alpha: tape.scalar(theta[2]),
            beta: tape.scalar(theta[3]),
        };
        let nll = nig_nll_on_tape(&mut tape, y, &nodes);
        let grads = tape.backward(nll);
        let analytic =
            [grads.get(nodes.gamma)[0], grads.get(nodes.nu)[0], grads.get(nodes.alpha)[0], grads.get(nodes.beta)[0]];
        for k in 0..4 {
            let h = 1e-6 * theta[k].abs().max(1.0);
            let mut plus = theta;
            plus[k] += h;
            let mut minus = theta;
            minus[k] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let denom = analytic[k].abs().max(fd.abs()).max(1e-8);
            assert!((analytic[k] - fd).abs() / denom < 1e-4, "param {k}");
        }
    }
}
