//! Surrogate losses for linear multiclass predictors.
//!
//! A predictor is a `K x d` matrix `W`; row `k` scores action `k` through
//! `<W^k, x>`. The margin of label `y` is `m(W, y) = <W^y, x> - max_{k != y} <W^k, x>`.
//! All argmax computations break ties towards the lowest index.
//!
//! Three losses can drive the learner:
//!
//! * base-K logistic: `-log_K softmax_y(Wx)`, smoothness `|x|^2 / ln K`;
//! * smooth hinge: `s(m(W, y))` with `s(m) = 1 - 2m` for `m <= 0`,
//!   `(1 - m)^2` on `(0, 1)` and `0` above, smoothness `4 |x|^2`;
//! * gated hinge: `max{1 - m(W, y), 0}` unless `y` is the argmax and its margin
//!   reaches `kappa`, in which case it is zero. Its gradient obeys
//!   `|g|^2 <= 4 |x|^2 l`, i.e. smoothness `2 |x|^2` in the `2 L l` form.
//!
//! The plain multiclass hinge `max{1 - m(W, y), 0}` is also available for the
//! baselines and as the convex comparator for the gated hinge.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Absolute slack used by the regularity checks.
pub const REGULARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Logistic,
    SmoothHinge,
    Hinge,
    /// Standard multiclass hinge without the argmax gate.
    PlainHinge,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Logistic => "logistic",
            LossKind::SmoothHinge => "smooth-hinge",
            LossKind::Hinge => "hinge",
            LossKind::PlainHinge => "plain-hinge",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "logistic" | "log" => Ok(LossKind::Logistic),
            "smooth-hinge" | "smh" => Ok(LossKind::SmoothHinge),
            "hinge" => Ok(LossKind::Hinge),
            "plain-hinge" => Ok(LossKind::PlainHinge),
            _ => Err(Error::UnknownLoss(s.to_string())),
        }
    }
}

/// A surrogate loss together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateLoss {
    pub kind: LossKind,
    /// Margin gate of the hinge loss, in `[0, 1]`. Ignored by other kinds.
    pub kappa: f64,
}

impl SurrogateLoss {
    pub const DEFAULT_KAPPA: f64 = 0.5;

    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            kappa: Self::DEFAULT_KAPPA,
        }
    }

    pub fn hinge(kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidParameter(format!(
                "kappa must lie in [0, 1], got {kappa}"
            )));
        }
        Ok(Self {
            kind: LossKind::Hinge,
            kappa,
        })
    }

    pub fn logistic() -> Self {
        Self::new(LossKind::Logistic)
    }

    pub fn smooth_hinge() -> Self {
        Self::new(LossKind::SmoothHinge)
    }

    pub fn plain_hinge() -> Self {
        Self::new(LossKind::PlainHinge)
    }

    /// Convex loss used to score a fixed comparator. The gated hinge depends
    /// on the learner's own iterate, so comparators are scored with the plain
    /// hinge, which dominates it.
    pub fn comparator(self) -> Self {
        match self.kind {
            LossKind::Hinge => Self::plain_hinge(),
            _ => self,
        }
    }

    /// Smoothness constant `L(x)` in `|grad l|^2 <= 2 L(x) l`.
    pub fn smoothness(&self, x: ArrayView1<f64>, n_actions: usize) -> f64 {
        self.smoothness_for_norm(x.dot(&x), n_actions)
    }

    /// `L(x)` as a function of `|x|^2`.
    pub fn smoothness_for_norm(&self, sq: f64, n_actions: usize) -> f64 {
        match self.kind {
            LossKind::Logistic => sq / (n_actions as f64).ln(),
            LossKind::SmoothHinge => 4.0 * sq,
            LossKind::Hinge | LossKind::PlainHinge => 2.0 * sq,
        }
    }

    /// Loss of label `y`.
    pub fn value(&self, w: ArrayView2<f64>, x: ArrayView1<f64>, y: usize) -> Result<f64> {
        let scores = scores(w, x)?;
        check_label(y, scores.len())?;
        Ok(self.value_from_scores(&scores, y))
    }

    /// Gradient (a subgradient for the hinge losses) with respect to `W`.
    pub fn gradient(&self, w: ArrayView2<f64>, x: ArrayView1<f64>, y: usize) -> Result<Array2<f64>> {
        let scores = scores(w, x)?;
        check_label(y, scores.len())?;
        let mut grad = Array2::zeros(w.raw_dim());
        self.accumulate_gradient(&scores, x, y, 1.0, &mut grad);
        Ok(grad)
    }

    /// Gap map: the loss of the argmax label, clamped to `[0, 1]`.
    pub fn gap(&self, w: ArrayView2<f64>, x: ArrayView1<f64>) -> Result<f64> {
        let scores = scores(w, x)?;
        Ok(self.gap_from_scores(&scores))
    }

    pub fn gap_from_scores(&self, scores: &Array1<f64>) -> f64 {
        self.value_from_scores(scores, argmax(scores))
            .clamp(0.0, 1.0)
    }

    /// Loss of label `y` given precomputed scores `Wx`.
    pub fn value_from_scores(&self, scores: &Array1<f64>, y: usize) -> f64 {
        let k = scores.len();
        match self.kind {
            LossKind::Logistic => {
                let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
                (lse - scores[y]) / (k as f64).ln()
            }
            LossKind::SmoothHinge => smooth_hinge(Margins::of(scores, y).margin),
            LossKind::Hinge => {
                let m = Margins::of(scores, y);
                if m.y_star == y && m.star_margin >= self.kappa {
                    0.0
                } else {
                    (1.0 - m.margin).max(0.0)
                }
            }
            LossKind::PlainHinge => (1.0 - Margins::of(scores, y).margin).max(0.0),
        }
    }

    /// Adds `scale * grad l(W; x, y)` into `out`.
    pub fn accumulate_gradient(
        &self,
        scores: &Array1<f64>,
        x: ArrayView1<f64>,
        y: usize,
        scale: f64,
        out: &mut Array2<f64>,
    ) {
        let k = scores.len();
        match self.kind {
            LossKind::Logistic => {
                let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                let base = scale / (k as f64).ln();
                for (row, e) in exps.iter().enumerate() {
                    let coef = base * (e / total - if row == y { 1.0 } else { 0.0 });
                    out.row_mut(row).scaled_add(coef, &x);
                }
            }
            LossKind::SmoothHinge => {
                let m = Margins::of(scores, y);
                let slope = smooth_hinge_slope(m.margin);
                if slope != 0.0 {
                    out.row_mut(y).scaled_add(scale * slope, &x);
                    out.row_mut(m.runner_up).scaled_add(-scale * slope, &x);
                }
            }
            LossKind::Hinge | LossKind::PlainHinge => {
                let m = Margins::of(scores, y);
                let gated = self.kind == LossKind::Hinge
                    && m.y_star == y
                    && m.star_margin >= self.kappa;
                if !gated && 1.0 - m.margin > 0.0 {
                    out.row_mut(y).scaled_add(-scale, &x);
                    out.row_mut(m.runner_up).scaled_add(scale, &x);
                }
            }
        }
    }
}

impl fmt::Display for SurrogateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())
    }
}

/// `s(m) = 1 - 2m` for `m <= 0`, `(1 - m)^2` on `(0, 1)`, `0` for `m >= 1`.
pub fn smooth_hinge(m: f64) -> f64 {
    if m <= 0.0 {
        1.0 - 2.0 * m
    } else if m < 1.0 {
        (1.0 - m) * (1.0 - m)
    } else {
        0.0
    }
}

pub fn smooth_hinge_slope(m: f64) -> f64 {
    if m <= 0.0 {
        -2.0
    } else if m < 1.0 {
        -2.0 * (1.0 - m)
    } else {
        0.0
    }
}

/// Class scores `Wx`.
pub fn scores(w: ArrayView2<f64>, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    if w.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: w.ncols(),
            got: x.len(),
        });
    }
    if w.nrows() < 2 {
        return Err(Error::InvalidParameter(
            "a multiclass predictor needs at least 2 rows".into(),
        ));
    }
    Ok(w.dot(&x))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_label(y: usize, k: usize) -> Result<()> {
    if y >= k {
        Err(Error::ActionOutOfRange {
            action: y,
            n_actions: k,
        })
    } else {
        Ok(())
    }
}

/// Margin quantities of one label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    /// `m(W, y)`.
    pub margin: f64,
    /// Highest-scoring action other than `y`.
    pub runner_up: usize,
    /// Argmax of the scores.
    pub y_star: usize,
    /// `m(W, y_star)`, the largest margin over all labels.
    pub star_margin: f64,
}

impl Margins {
    pub fn of(scores: &Array1<f64>, y: usize) -> Self {
        let runner_up = best_excluding(scores, y);
        let y_star = argmax(scores);
        let star_runner = best_excluding(scores, y_star);
        Self {
            margin: scores[y] - scores[runner_up],
            runner_up,
            y_star,
            star_margin: scores[y_star] - scores[star_runner],
        }
    }
}

fn best_excluding(scores: &Array1<f64>, skip: usize) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in scores.iter().enumerate() {
        if i == skip {
            continue;
        }
        match best {
            Some(b) if v <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best.expect("at least two actions")
}

/// Outcome of [`check_regularity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityReport {
    pub samples: usize,
    /// Fraction of samples with `(K-1)/K l(y) + 1/K l(y*) < 1`.
    pub eq2_violation_rate: f64,
    /// Fraction of samples with `|grad l|^2 > 2 L(x) l` at either `y` or `y*`.
    pub eq3_violation_rate: f64,
    /// Largest observed `|grad l|^2 / (2 L(x) l)`.
    pub max_eq3_ratio: f64,
}

/// Monte-Carlo audit of the wrong-plus-right condition and the self-bounding
/// gradient condition on Gaussian `(W, x)` with a uniformly drawn wrong label.
pub fn check_regularity<R: Rng + ?Sized>(
    loss: &SurrogateLoss,
    k: usize,
    d: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<RegularityReport> {
    if k < 2 || d == 0 || n_samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "regularity check needs K >= 2, d >= 1, samples >= 1 (got {k}, {d}, {n_samples})"
        )));
    }
    let mut eq2 = 0usize;
    let mut eq3 = 0usize;
    let mut max_ratio = 0.0f64;
    let mut grad = Array2::zeros((k, d));
    for _ in 0..n_samples {
        let w = Array2::from_shape_fn((k, d), |_| rng.sample::<f64, _>(StandardNormal));
        let x = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
        let s = w.dot(&x);
        let y_star = argmax(&s);
        let mut y = rng.random_range(0..k - 1);
        if y >= y_star {
            y += 1;
        }
        let wrong = loss.value_from_scores(&s, y);
        let right = loss.value_from_scores(&s, y_star);
        let kf = k as f64;
        if (kf - 1.0) / kf * wrong + right / kf < 1.0 - REGULARITY_TOL {
            eq2 += 1;
        }

        let lip = loss.smoothness(x.view(), k);
        let mut violated = false;
        for label in [y, y_star] {
            grad.fill(0.0);
            loss.accumulate_gradient(&s, x.view(), label, 1.0, &mut grad);
            let g2 = grad.iter().map(|g| g * g).sum::<f64>();
            let value = loss.value_from_scores(&s, label);
            let bound = 2.0 * lip * value;
            if g2 > bound + REGULARITY_TOL {
                violated = true;
            }
            if bound > 0.0 {
                max_ratio = max_ratio.max(g2 / bound);
            }
        }
        if violated {
            eq3 += 1;
        }
    }
    Ok(RegularityReport {
        samples: n_samples,
        eq2_violation_rate: eq2 as f64 / n_samples as f64,
        eq3_violation_rate: eq3 as f64 / n_samples as f64,
        max_eq3_ratio: max_ratio,
    })
}
