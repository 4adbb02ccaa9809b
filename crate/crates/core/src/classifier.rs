//! One-hidden-layer MLP with dropout before the output layer.
//!
//! `x → ReLU(W1·x + b1) → dropout → W2·h + b2 → softmax`. Training is plain
//! minibatch gradient descent on mean cross-entropy, always from a fresh
//! initialization.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::FeatureMatrix;
use crate::{seed, Error, Result, SampleId};

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;
pub const FINE_TUNING_LEARNING_RATE: f64 = 2e-5;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_MC_PASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub classes: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for `classes` classes: 10 epochs, or 5 for binary problems.
    pub fn for_classes(classes: usize, seed: u64) -> Self {
        TrainConfig {
            classes,
            hidden: DEFAULT_HIDDEN,
            epochs: if classes == 2 { 5 } else { 10 },
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            dropout_rate: DEFAULT_DROPOUT,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("hidden width and batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParameter(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Network weights. Matrices are row-major: `w1` is hidden × input,
/// `w2` is classes × hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl ClassifierParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if input == 0 {
            return Err(Error::InvalidParameter("input dimension must be >= 1".into()));
        }
        let (h, k) = (config.hidden, config.classes);
        let mut rng = seed::rng(seed::derive(config.seed, seed::purpose::INITIAL));
        let mut glorot = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect()
        };
        let w1 = glorot(input, h);
        let w2 = glorot(h, k);
        Ok(ClassifierParams {
            input,
            hidden: h,
            classes: k,
            w1,
            b1: vec![0.0; h],
            w2,
            b2: vec![0.0; k],
            dropout_rate: config.dropout_rate,
            seed: config.seed,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All weights in the order w1, b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch { expected: self.parameter_count(), got: v.len() });
        }
        let mut rest = v;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: &FeatureMatrix) -> Result<()> {
        if x.d() != self.input {
            return Err(Error::DimensionMismatch { expected: self.input, got: x.d() });
        }
        Ok(())
    }
}

/// Row-stochastic class probabilities, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    ids: Vec<SampleId>,
    classes: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn new(ids: Vec<SampleId>, classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes == 0 || data.len() != ids.len() * classes {
            return Err(Error::DimensionMismatch { expected: ids.len() * classes, got: data.len() });
        }
        for (r, row) in data.chunks(classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!("row {r} is not a probability vector")));
            }
        }
        Ok(ProbMatrix { ids, classes, data })
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.classes)
    }

    /// Most probable class per row; ties go to the lower index.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows()
            .map(|r| r.iter().enumerate().fold(0, |best, (c, &p)| if p > r[best] { c } else { best }))
            .collect()
    }
}

struct Forward {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

fn softmax_into(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// `mask` holds the already-scaled keep factors (0 or 1/(1−rate)) per hidden unit.
fn forward(p: &ClassifierParams, x: &[f64], mask: Option<&[f64]>) -> Forward {
    let (d, h, k) = (p.input, p.hidden, p.classes);
    let mut pre = p.b1.clone();
    for j in 0..h {
        let w = &p.w1[j * d..(j + 1) * d];
        pre[j] += w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    let mut hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
    if let Some(m) = mask {
        hidden.iter_mut().zip(m).for_each(|(v, s)| *v *= s);
    }
    let mut probs = p.b2.clone();
    for c in 0..k {
        let w = &p.w2[c * h..(c + 1) * h];
        probs[c] += w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
    }
    softmax_into(&mut probs);
    Forward { pre, hidden, probs }
}

fn dropout_mask(rate: f64, width: usize, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..width).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

/// Mean cross-entropy over `rows` and its gradient in [`ClassifierParams::flatten`]
/// order. `masks`, when given, holds one dropout mask per row.
pub fn loss_and_gradient(
    p: &ClassifierParams,
    x: &FeatureMatrix,
    y: &[usize],
    rows: &[usize],
    masks: Option<&[Vec<f64>]>,
) -> (f64, Vec<f64>) {
    let (d, h, k) = (p.input, p.hidden, p.classes);
    let mut grad = vec![0.0; p.parameter_count()];
    let (gw1, rest) = grad.split_at_mut(h * d);
    let (gb1, rest) = rest.split_at_mut(h);
    let (gw2, gb2) = rest.split_at_mut(k * h);
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut dh = vec![0.0; h];
    for (b, &r) in rows.iter().enumerate() {
        let mask = masks.map(|m| m[b].as_slice());
        let f = forward(p, x.row(r), mask);
        loss -= f.probs[y[r]].max(f64::MIN_POSITIVE).ln();
        dh.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..k {
            let dl = (f.probs[c] - if c == y[r] { 1.0 } else { 0.0 }) * scale;
            gb2[c] += dl;
            let w = &p.w2[c * h..(c + 1) * h];
            for j in 0..h {
                gw2[c * h + j] += dl * f.hidden[j];
                dh[j] += dl * w[j];
            }
        }
        let xr = x.row(r);
        for j in 0..h {
            if f.pre[j] <= 0.0 {
                continue;
            }
            let g = dh[j] * mask.map_or(1.0, |m| m[j]);
            gb1[j] += g;
            for (gw, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(xr) {
                *gw += g * xi;
            }
        }
    }
    (loss * scale, grad)
}

fn check_labels(x: &FeatureMatrix, y: &[usize], classes: usize) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch { expected: x.n(), got: y.len() });
    }
    if let Some(i) = y.iter().position(|&c| c >= classes) {
        return Err(Error::LabelOutOfRange { id: x.ids()[i], label: y[i] as i64, classes });
    }
    Ok(())
}

/// Fresh model trained on `(x, y)`; also returns the mean minibatch loss of
/// every epoch.
pub fn train_with_history(
    x: &FeatureMatrix,
    y: &[usize],
    config: &TrainConfig,
) -> Result<(ClassifierParams, Vec<f64>)> {
    config.validate()?;
    check_labels(x, y, config.classes)?;
    let mut p = ClassifierParams::init(x.d(), config)?;
    let mut rng = seed::rng(seed::derive(config.seed, seed::purpose::TRAIN));
    let mut order: Vec<usize> = (0..x.n()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let masks: Option<Vec<Vec<f64>>> = (config.dropout_rate > 0.0)
                .then(|| batch.iter().map(|_| dropout_mask(config.dropout_rate, p.hidden, &mut rng)).collect());
            let (loss, grad) = loss_and_gradient(&p, x, y, batch, masks.as_deref());
            total += loss * batch.len() as f64;
            let mut flat = p.flatten();
            flat.iter_mut().zip(&grad).for_each(|(w, g)| *w -= config.learning_rate * g);
            p.set_flat(&flat)?;
        }
        history.push(total / x.n() as f64);
    }
    Ok((p, history))
}

pub fn train(x: &FeatureMatrix, y: &[usize], config: &TrainConfig) -> Result<ClassifierParams> {
    train_with_history(x, y, config).map(|(p, _)| p)
}

/// Softmax outputs. With `dropout_active` and a positive rate, every row gets
/// an independent mask drawn from `seed`.
pub fn predict_proba(
    p: &ClassifierParams,
    x: &FeatureMatrix,
    dropout_active: bool,
    seed: u64,
) -> Result<ProbMatrix> {
    p.check_input(x)?;
    let mut rng = crate::seed::rng(seed);
    let stochastic = dropout_active && p.dropout_rate > 0.0;
    let mut data = Vec::with_capacity(x.n() * p.classes);
    for i in 0..x.n() {
        let mask = stochastic.then(|| dropout_mask(p.dropout_rate, p.hidden, &mut rng));
        data.extend(forward(p, x.row(i), mask.as_deref()).probs);
    }
    Ok(ProbMatrix { ids: x.ids().to_vec(), classes: p.classes, data })
}

/// The `passes` individual dropout-active predictions behind [`mc_predict`].
pub fn mc_samples(p: &ClassifierParams, x: &FeatureMatrix, passes: usize, seed: u64) -> Result<Vec<ProbMatrix>> {
    if passes == 0 {
        return Err(Error::InvalidParameter("mc passes must be >= 1".into()));
    }
    (0..passes).map(|t| predict_proba(p, x, true, crate::seed::derive(seed, t as u64))).collect()
}

/// Mean of `passes` dropout-active predictions.
pub fn mc_predict(p: &ClassifierParams, x: &FeatureMatrix, passes: usize, seed: u64) -> Result<ProbMatrix> {
    if passes == 0 {
        return Err(Error::InvalidParameter("mc passes must be >= 1".into()));
    }
    if p.dropout_rate == 0.0 {
        // every pass is the same deterministic pass; averaging would only add rounding
        return predict_proba(p, x, false, seed);
    }
    let samples = mc_samples(p, x, passes, seed)?;
    let mut data = vec![0.0; x.n() * p.classes];
    for s in &samples {
        data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
    }
    data.iter_mut().for_each(|v| *v /= passes as f64);
    Ok(ProbMatrix { ids: x.ids().to_vec(), classes: p.classes, data })
}

/// Labels the model assigns to `x` without dropout.
pub fn predict(p: &ClassifierParams, x: &FeatureMatrix) -> Result<Vec<usize>> {
    Ok(predict_proba(p, x, false, 0)?.argmax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = crate::seed::rng(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let center = if c == 0 { -2.0 } else { 2.0 };
            rows.push(vec![center + noise.sample(&mut rng), center + noise.sample(&mut rng)]);
            y.push(c);
        }
        (FeatureMatrix::with_sequential_ids(Matrix::from_rows(&rows).unwrap()).unwrap(), y)
    }

    fn config(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, ..TrainConfig::for_classes(2, 11) }
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let (x, y) = blobs(100, 1);
        let p = train(&x, &y, &config(50)).unwrap();
        assert_eq!(predict(&p, &x).unwrap(), y);
    }

    #[test]
    fn training_is_deterministic_and_resets() {
        let (x, y) = blobs(40, 2);
        let a = train(&x, &y, &config(5)).unwrap();
        let b = train(&x, &y, &config(5)).unwrap();
        assert_eq!(a, b);
        let untrained = train(&x, &y, &config(0)).unwrap();
        assert_eq!(untrained, ClassifierParams::init(2, &config(0)).unwrap());
    }

    #[test]
    fn rejects_bad_labels_and_dimensions() {
        let (x, mut y) = blobs(10, 3);
        y[4] = 2;
        assert!(matches!(train(&x, &y, &config(1)), Err(Error::LabelOutOfRange { label: 2, .. })));
        let p = ClassifierParams::init(3, &config(1)).unwrap();
        assert!(matches!(predict_proba(&p, &x, false, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = blobs(10, 4);
        let cfg = TrainConfig { hidden: 8, ..config(0) };
        let p = ClassifierParams::init(2, &cfg).unwrap();
        let rows: Vec<usize> = (0..10).collect();
        let (_, grad) = loss_and_gradient(&p, &x, &y, &rows, None);
        let flat = p.flatten();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut q = p.clone();
            let mut v = flat.clone();
            v[i] += h;
            q.set_flat(&v).unwrap();
            let up = loss_and_gradient(&q, &x, &y, &rows, None).0;
            v[i] -= 2.0 * h;
            q.set_flat(&v).unwrap();
            let down = loss_and_gradient(&q, &x, &y, &rows, None).0;
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
            assert!(err < 1e-4, "param {i}: {numeric} vs {}", grad[i]);
        }
    }

    #[test]
    fn rows_are_distributions() {
        let (x, _) = blobs(30, 5);
        let p = ClassifierParams::init(2, &TrainConfig::for_classes(4, 3)).unwrap();
        for active in [false, true] {
            let probs = predict_proba(&p, &x, active, 9).unwrap();
            for r in probs.rows() {
                assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_dropout_mc_is_deterministic_pass() {
        let (x, _) = blobs(20, 6);
        let cfg = TrainConfig { dropout_rate: 0.0, ..config(0) };
        let p = ClassifierParams::init(2, &cfg).unwrap();
        let det = predict_proba(&p, &x, false, 0).unwrap();
        assert_eq!(predict_proba(&p, &x, true, 4).unwrap(), det);
        assert_eq!(mc_predict(&p, &x, 10, 4).unwrap(), det);
    }

    #[test]
    fn single_pass_mc_equals_one_dropout_pass() {
        let (x, _) = blobs(20, 7);
        let p = ClassifierParams::init(2, &config(0)).unwrap();
        let one = mc_predict(&p, &x, 1, 8).unwrap();
        assert_eq!(one, predict_proba(&p, &x, true, crate::seed::derive(8, 0)).unwrap());
    }

    #[test]
    fn mc_passes_vary() {
        let (x, _) = blobs(20, 8);
        let p = ClassifierParams::init(2, &TrainConfig::for_classes(4, 5)).unwrap();
        let samples = mc_samples(&p, &x, 10, 1).unwrap();
        let mean = mc_predict(&p, &x, 10, 1).unwrap();
        let mut max_var: f64 = 0.0;
        for i in 0..x.n() {
            assert!((mean.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-6);
            for c in 0..4 {
                let m = mean.row(i)[c];
                let var = samples.iter().map(|s| (s.row(i)[c] - m).powi(2)).sum::<f64>() / 10.0;
                max_var = max_var.max(var);
            }
        }
        assert!(max_var > 0.0);
    }

    #[test]
    fn loss_decreases_with_small_steps() {
        let (x, y) = blobs(20, 9);
        let cfg = TrainConfig { epochs: 20, learning_rate: 1e-3, dropout_rate: 0.0, ..config(0) };
        let (_, history) = train_with_history(&x, &y, &cfg).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0], "{history:?}");
        }
    }

    #[test]
    fn params_round_trip_through_json() {
        let p = ClassifierParams::init(3, &config(0)).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ClassifierParams>(&s).unwrap(), p);
    }
}
