//! Fréchet bounds, the Fréchet-compatibility loss and the answering,
//! question-type, connective and joint losses, with analytic gradients and a
//! central finite-difference checker.
//!
//! `p` always denotes the probability of the affirmative answer; negating a
//! question maps `p` to `1 - p`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolform::Formula;

/// Floor applied inside every logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

/// Denominator floor used by [`grad_check`] when both gradients are tiny.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("probability {0} is outside [0, 1]")]
    Domain(f64),
    #[error("formula is not in negation normal form")]
    Shape,
    #[error("formula needs {expected} atom probabilities, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("class index {index} out of range for {len} logits")]
    Index { index: usize, len: usize },
    #[error("finite-difference step must be positive, got {0}")]
    Step(f64),
}

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self, LossError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(LossError::Domain(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = LossError;
    fn try_from(p: f64) -> Result<Self, LossError> {
        Probability::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Lower/upper Fréchet bounds and their midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetBounds {
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
}

impl FrechetBounds {
    fn new(lower: f64, upper: f64) -> Self {
        FrechetBounds {
            lower,
            upper,
            mean: 0.5 * (lower + upper),
        }
    }

    fn point(p: f64) -> Self {
        FrechetBounds {
            lower: p,
            upper: p,
            mean: p,
        }
    }

    /// `1(mean > 0.5)`; a mean of exactly 0.5 gives 0.
    pub fn indicator(&self) -> f64 {
        if self.mean > 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

pub fn frechet_and(p1: f64, p2: f64) -> Result<FrechetBounds, LossError> {
    let (p1, p2) = (Probability::new(p1)?.get(), Probability::new(p2)?.get());
    Ok(FrechetBounds::new((p1 + p2 - 1.0).max(0.0), p1.min(p2)))
}

pub fn frechet_or(p1: f64, p2: f64) -> Result<FrechetBounds, LossError> {
    let (p1, p2) = (Probability::new(p1)?.get(), Probability::new(p2)?.get());
    Ok(FrechetBounds::new(p1.max(p2), (p1 + p2).min(1.0)))
}

/// Bounds for an NNF formula given one probability per atom.
///
/// Negated atoms contribute `1 - p`. Each AND/OR node combines the means of
/// its children, so chains of more than two operands fold to the left.
pub fn frechet_for_formula(f: &Formula, atom_probs: &[f64]) -> Result<FrechetBounds, LossError> {
    if !f.is_nnf() {
        return Err(LossError::Shape);
    }
    let n = f.atom_count();
    if atom_probs.len() != n {
        return Err(LossError::Arity {
            expected: n,
            actual: atom_probs.len(),
        });
    }
    for &p in atom_probs {
        Probability::new(p)?;
    }
    fn go(f: &Formula, probs: &[f64]) -> Result<FrechetBounds, LossError> {
        match f {
            Formula::Atom(i) => Ok(FrechetBounds::point(probs[*i])),
            Formula::Not(inner) => match **inner {
                Formula::Atom(i) => Ok(FrechetBounds::point(1.0 - probs[i])),
                _ => Err(LossError::Shape),
            },
            Formula::And(l, r) => frechet_and(go(l, probs)?.mean, go(r, probs)?.mean),
            Formula::Or(l, r) => frechet_or(go(l, probs)?.mean, go(r, probs)?.mean),
        }
    }
    go(f, atom_probs)
}

/// `(p_a - 1(mean > 0.5))^2`.
pub fn fc_loss(p_a: f64, bounds: &FrechetBounds) -> f64 {
    let d = p_a - bounds.indicator();
    d * d
}

/// Derivative of [`fc_loss`] with respect to `p_a`.
pub fn fc_loss_grad(p_a: f64, bounds: &FrechetBounds) -> f64 {
    2.0 * (p_a - bounds.indicator())
}

/// Weights of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

impl LossWeights {
    pub fn new(alpha1: f64, alpha2: f64, beta: f64) -> Result<Self, LossError> {
        let w = LossWeights { alpha1, alpha2, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 || self.beta < 0.0 {
            return Err(LossError::Config("loss weights must be non-negative".into()));
        }
        if self.alpha1 + self.alpha2 > 1.0 {
            return Err(LossError::Config(format!(
                "alpha1 + alpha2 = {} exceeds 1",
                self.alpha1 + self.alpha2
            )));
        }
        Ok(())
    }

    /// Partial derivatives with respect to `(l_ans, l_type, l_conn, l_fc)`.
    pub fn gradient(&self) -> [f64; 4] {
        [1.0 - self.alpha1 - self.alpha2, self.alpha1, self.alpha2, self.beta]
    }
}

/// `(1 - a1 - a2) l_ans + a1 l_type + a2 l_conn + beta l_fc`.
pub fn joint_loss(
    l_ans: f64,
    l_type: f64,
    l_conn: f64,
    l_fc: f64,
    w: &LossWeights,
) -> Result<f64, LossError> {
    w.validate()?;
    Ok((1.0 - w.alpha1 - w.alpha2) * l_ans + w.alpha1 * l_type + w.alpha2 * l_conn + w.beta * l_fc)
}

/// Outputs of an answering head over an answer vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerHead {
    /// Answer probabilities.
    pub yhat: Vec<f64>,
    /// Three 0/1 masks that partition the vocabulary.
    pub type_masks: [Vec<f64>; 3],
    /// Question-type probabilities.
    pub p_type: [f64; 3],
    pub z_type: [f64; 3],
    /// Connective logits in the order AND, OR, NOT, none.
    pub z_conn: [f64; 4],
}

impl AnswerHead {
    pub fn vocab_len(&self) -> usize {
        self.yhat.len()
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let v = self.yhat.len();
        for (i, m) in self.type_masks.iter().enumerate() {
            if m.len() != v {
                return Err(LossError::Config(format!(
                    "mask {i} has length {}, vocabulary has {v}",
                    m.len()
                )));
            }
            if m.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(LossError::Config(format!("mask {i} is not 0/1 valued")));
            }
        }
        for j in 0..v {
            let covered: f64 = self.type_masks.iter().map(|m| m[j]).sum();
            if covered != 1.0 {
                return Err(LossError::Config(format!(
                    "answer index {j} is covered by {covered} type masks"
                )));
            }
        }
        Ok(())
    }

    /// `sum_i yhat * M_i * P_i`.
    pub fn masked_prediction(&self) -> Vec<f64> {
        (0..self.yhat.len())
            .map(|j| {
                self.type_masks
                    .iter()
                    .zip(self.p_type)
                    .map(|(m, p)| self.yhat[j] * m[j] * p)
                    .sum()
            })
            .collect()
    }
}

fn clamped_ln(x: f64) -> f64 {
    x.max(LOG_CLAMP).ln()
}

/// Summed binary cross-entropy with clamped logarithms.
pub fn bce(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(&s, &y)| -(y * clamped_ln(s) + (1.0 - y) * clamped_ln(1.0 - s)))
        .sum()
}

fn bce_grad(s: f64, y: f64) -> f64 {
    let pos = if s > LOG_CLAMP { -y / s } else { 0.0 };
    let neg = if 1.0 - s > LOG_CLAMP { (1.0 - y) / (1.0 - s) } else { 0.0 };
    pos + neg
}

/// Binary cross-entropy between the type-masked prediction and `y_ans`.
pub fn answering_loss(head: &AnswerHead, y_ans: &[f64]) -> Result<f64, LossError> {
    head.validate()?;
    if y_ans.len() != head.vocab_len() {
        return Err(LossError::Config(format!(
            "target has length {}, vocabulary has {}",
            y_ans.len(),
            head.vocab_len()
        )));
    }
    Ok(bce(&head.masked_prediction(), y_ans))
}

/// Gradient of [`answering_loss`] with respect to `yhat` and `p_type`.
pub fn answering_loss_grad(head: &AnswerHead, y_ans: &[f64]) -> Result<(Vec<f64>, [f64; 3]), LossError> {
    head.validate()?;
    let s = head.masked_prediction();
    let ds: Vec<f64> = s.iter().zip(y_ans).map(|(&s, &y)| bce_grad(s, y)).collect();
    let d_yhat = (0..s.len())
        .map(|j| {
            let scale: f64 = head.type_masks.iter().zip(head.p_type).map(|(m, p)| m[j] * p).sum();
            ds[j] * scale
        })
        .collect();
    let mut d_p = [0.0; 3];
    for (i, m) in head.type_masks.iter().enumerate() {
        d_p[i] = (0..s.len()).map(|j| ds[j] * head.yhat[j] * m[j]).sum();
    }
    Ok((d_yhat, d_p))
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of `softmax(z_type)` at `y_type`.
pub fn type_loss(z_type: &[f64], y_type: usize) -> Result<f64, LossError> {
    if y_type >= z_type.len() {
        return Err(LossError::Index {
            index: y_type,
            len: z_type.len(),
        });
    }
    // log-sum-exp form avoids the clamp for confident logits
    let max = z_type.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z_type.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    Ok(lse - z_type[y_type])
}

pub fn type_loss_grad(z_type: &[f64], y_type: usize) -> Result<Vec<f64>, LossError> {
    if y_type >= z_type.len() {
        return Err(LossError::Index {
            index: y_type,
            len: z_type.len(),
        });
    }
    let mut g = softmax(z_type);
    g[y_type] -= 1.0;
    Ok(g)
}

/// Multi-label sigmoid binary cross-entropy over the connective logits.
pub fn conn_loss(z_conn: &[f64], y_conn: &[f64]) -> Result<f64, LossError> {
    if z_conn.len() != y_conn.len() {
        return Err(LossError::Config(format!(
            "{} connective logits but {} labels",
            z_conn.len(),
            y_conn.len()
        )));
    }
    let probs: Vec<f64> = z_conn.iter().map(|&z| sigmoid(z)).collect();
    Ok(bce(&probs, y_conn))
}

pub fn conn_loss_grad(z_conn: &[f64], y_conn: &[f64]) -> Vec<f64> {
    z_conn.iter().zip(y_conn).map(|(&z, &y)| sigmoid(z) - y).collect()
}

/// Compares an analytic gradient against central finite differences and
/// returns the largest relative error over all coordinates.
///
/// The relative error of a coordinate is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn grad_check<F, G>(f: F, grad: G, point: &[f64], step: f64) -> Result<f64, LossError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(LossError::Step(step));
    }
    let analytic = grad(point);
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        x[i] = point[i] + step;
        let up = f(&x);
        x[i] = point[i] - step;
        let down = f(&x);
        x[i] = point[i];
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolform::parse_label;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn assert_bounds(b: FrechetBounds, lower: f64, upper: f64, mean: f64) {
        assert!(
            close(b.lower, lower) && close(b.upper, upper) && close(b.mean, mean),
            "{b:?} != ({lower}, {upper}, {mean})"
        );
    }

    #[test]
    fn frechet_and_examples() {
        assert_bounds(frechet_and(1.0, 0.0).unwrap(), 0.0, 0.0, 0.0);
        assert_bounds(frechet_and(0.7, 0.6).unwrap(), 0.3, 0.6, 0.45);
        assert_bounds(frechet_and(0.5, 0.5).unwrap(), 0.0, 0.5, 0.25);
    }

    #[test]
    fn frechet_or_examples() {
        assert_bounds(frechet_or(0.0, 0.0).unwrap(), 0.0, 0.0, 0.0);
        assert_bounds(frechet_or(0.7, 0.6).unwrap(), 0.7, 1.0, 0.85);
        assert_bounds(frechet_or(1.0, 0.3).unwrap(), 1.0, 1.0, 1.0);
    }

    #[test]
    fn frechet_rejects_out_of_range() {
        assert_eq!(frechet_and(1.2, 0.5), Err(LossError::Domain(1.2)));
        assert_eq!(frechet_or(0.5, -0.1), Err(LossError::Domain(-0.1)));
    }

    #[test]
    fn formula_bounds() {
        let not_q1 = parse_label("NOT Q1").unwrap().0;
        assert_bounds(frechet_for_formula(&not_q1, &[0.2]).unwrap(), 0.8, 0.8, 0.8);

        let f = parse_label("Q1 AND NOT Q2").unwrap().0;
        assert_eq!(frechet_for_formula(&f, &[1.0, 0.0]).unwrap().mean, 1.0);

        // hand fold: OR(0.6, 0.5) = [0.6, 1.0] mean 0.8; AND(0.8, 0.9) = [0.7, 0.8] mean 0.75
        let g = parse_label("Q1 OR Q2 AND Q3").unwrap().0;
        assert_bounds(frechet_for_formula(&g, &[0.6, 0.5, 0.9]).unwrap(), 0.7, 0.8, 0.75);
    }

    #[test]
    fn formula_bounds_need_nnf() {
        let f = parse_label("NOT (Q1 AND Q2)").unwrap().0;
        assert_eq!(frechet_for_formula(&f, &[0.5, 0.5]), Err(LossError::Shape));
    }

    #[test]
    fn fc_loss_examples() {
        let b = |mean: f64| FrechetBounds { lower: mean, upper: mean, mean };
        assert_eq!(fc_loss(1.0, &b(0.85)), 0.0);
        assert!(close(fc_loss(0.9, &b(0.45)), 0.81));
        // strict inequality: a tie at 0.5 gives indicator 0
        assert!(close(fc_loss(0.2, &b(0.5)), 0.04));
    }

    #[test]
    fn joint_loss_examples() {
        let zero = LossWeights::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(joint_loss(0.7, 3.0, 4.0, 5.0, &zero).unwrap(), 0.7);
        let w = LossWeights::new(0.25, 0.25, 0.5).unwrap();
        assert!(close(joint_loss(1.0, 1.0, 1.0, 1.0, &w).unwrap(), 1.5));
        assert!(LossWeights::new(0.6, 0.5, 0.0).is_err());
        let bad = LossWeights { alpha1: 0.7, alpha2: 0.7, beta: 0.0 };
        assert!(matches!(joint_loss(1.0, 1.0, 1.0, 1.0, &bad), Err(LossError::Config(_))));
    }

    fn head_4() -> AnswerHead {
        // vocabulary: yes, no, two, red; types: yes/no, number, other
        AnswerHead {
            yhat: vec![0.6, 0.2, 0.15, 0.05],
            type_masks: [
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
            p_type: [0.7, 0.2, 0.1],
            z_type: [0.0; 3],
            z_conn: [0.0; 4],
        }
    }

    #[test]
    fn answering_loss_examples() {
        let mut h = head_4();
        h.yhat = vec![1.0, 0.0, 0.0, 0.0];
        h.p_type = [1.0, 0.0, 0.0];
        let y = [1.0, 0.0, 0.0, 0.0];
        assert!(answering_loss(&h, &y).unwrap() < 1e-9);

        h.p_type = [0.0, 1.0, 0.0];
        assert!(answering_loss(&h, &y).unwrap() > 20.0);
    }

    #[test]
    fn answering_loss_matches_scalar_oracle() {
        let h = head_4();
        let y = [1.0, 0.0, 0.0, 0.0];
        // masked prediction by hand: 0.42, 0.14, 0.03, 0.005
        let s: [f64; 4] = [0.6 * 0.7, 0.2 * 0.7, 0.15 * 0.2, 0.05 * 0.1];
        let oracle: f64 = -(0.42f64.ln())
            - (1.0 - s[1]).ln()
            - (1.0 - s[2]).ln()
            - (1.0 - s[3]).ln();
        assert!((answering_loss(&h, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn answering_loss_rejects_bad_masks() {
        let mut h = head_4();
        h.type_masks[1][0] = 1.0;
        assert!(matches!(answering_loss(&h, &[0.0; 4]), Err(LossError::Config(_))));
        let mut h = head_4();
        h.type_masks[2][3] = 0.0;
        assert!(matches!(answering_loss(&h, &[0.0; 4]), Err(LossError::Config(_))));
    }

    #[test]
    fn type_loss_examples() {
        assert!(type_loss(&[10.0, -10.0, -10.0], 0).unwrap() < 1e-8);
        assert!((type_loss(&[0.0, 0.0, 0.0], 1).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(
            type_loss(&[0.0, 0.0, 0.0], 3),
            Err(LossError::Index { index: 3, len: 3 })
        );
    }

    #[test]
    fn conn_loss_examples() {
        assert!(conn_loss(&[20.0, -20.0, -20.0, -20.0], &[1.0, 0.0, 0.0, 0.0]).unwrap() < 1e-8);
        let l = conn_loss(&[0.0; 4], &[1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((l - 4.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn grad_check_rejects_bad_step() {
        let f = |x: &[f64]| x[0];
        let g = |_: &[f64]| vec![1.0];
        assert_eq!(grad_check(f, g, &[0.0], 0.0), Err(LossError::Step(0.0)));
        assert!(grad_check(f, g, &[0.0], -1e-3).is_err());
    }

    #[test]
    fn grad_check_fc_loss() {
        let bounds = frechet_or(0.7, 0.6).unwrap();
        let err = grad_check(
            |x| fc_loss(x[0], &bounds),
            |x| vec![fc_loss_grad(x[0], &bounds)],
            &[0.9],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn grad_check_joint_loss() {
        let w = LossWeights::new(0.2, 0.3, 0.7).unwrap();
        let err = grad_check(
            |x| joint_loss(x[0], x[1], x[2], x[3], &w).unwrap(),
            |_| w.gradient().to_vec(),
            &[0.4, 1.3, 0.8, 0.05],
            1e-3,
        )
        .unwrap();
        assert!(err <= 1e-9, "{err}");
    }
}
