//! Linear SVM training by full-batch subgradient descent on the
//! L2-regularized hinge loss, with the regularization strength chosen by
//! stratified k-fold cross-validation.
//!
//! Features are standardized with statistics from the training data. The
//! bias is handled by augmenting every example with a constant 1 and is
//! regularized together with the weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Confusion, EvalMetrics, FeatureVector, Label, VadError, VadModel, DEFAULT_RMS_THRESHOLD,
    DEFAULT_SEGMENT_SPEECH_FRACTION, FEATURE_LEN,
};

const AUG: usize = FEATURE_LEN + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid(pub Vec<f64>);

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid(vec![0.01, 0.1, 1.0, 10.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub grid: HyperGrid,
    pub folds: usize,
    pub seed: u64,
    pub epochs: usize,
    pub rms_threshold: f64,
    pub segment_speech_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grid: HyperGrid::default(),
            folds: 10,
            seed: 0,
            epochs: 200,
            rms_threshold: DEFAULT_RMS_THRESHOLD,
            segment_speech_fraction: DEFAULT_SEGMENT_SPEECH_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub lambda: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: VadModel,
    pub lambda: f64,
    pub cv: Vec<CvScore>,
    pub training_metrics: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; FEATURE_LEN],
    pub std: [f64; FEATURE_LEN],
}

impl Standardizer {
    /// Population mean and standard deviation per coefficient. A constant
    /// coefficient gets unit scale.
    pub fn fit<'a, I>(features: I) -> Self
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut n = 0usize;
        let mut sum = [0.0; FEATURE_LEN];
        let mut sq = [0.0; FEATURE_LEN];
        for f in features {
            n += 1;
            for i in 0..FEATURE_LEN {
                sum[i] += f.0[i];
                sq[i] += f.0[i] * f.0[i];
            }
        }
        let mut mean = [0.0; FEATURE_LEN];
        let mut std = [1.0; FEATURE_LEN];
        if n > 0 {
            for i in 0..FEATURE_LEN {
                mean[i] = sum[i] / n as f64;
                let var = (sq[i] / n as f64 - mean[i] * mean[i]).max(0.0);
                let s = var.sqrt();
                if s > 1e-12 {
                    std[i] = s;
                }
            }
        }
        Standardizer { mean, std }
    }

    fn apply(&self, f: &FeatureVector) -> [f64; AUG] {
        let mut out = [1.0; AUG];
        for i in 0..FEATURE_LEN {
            out[i] = (f.0[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

fn dot(a: &[f64; AUG], b: &[f64; AUG]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `lambda/2 |w|^2 + mean(max(0, 1 - y w.x))` over augmented
/// examples. Returns the average of the second half of the iterates.
pub fn fit_hinge(xs: &[[f64; AUG]], ys: &[f64], lambda: f64, epochs: usize) -> [f64; AUG] {
    assert_eq!(xs.len(), ys.len());
    assert!(lambda > 0.0 && epochs > 0);
    let n = xs.len() as f64;
    let radius = 1.0 / lambda.sqrt();
    let mut w = [0.0; AUG];
    let mut avg = [0.0; AUG];
    let mut averaged = 0usize;
    let burn_in = epochs / 2;
    for t in 1..=epochs {
        let mut g = [0.0; AUG];
        for (x, &y) in xs.iter().zip(ys) {
            if y * dot(&w, x) < 1.0 {
                for j in 0..AUG {
                    g[j] -= y * x[j];
                }
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for j in 0..AUG {
            w[j] -= eta * (lambda * w[j] + g[j] / n);
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            for v in w.iter_mut() {
                *v *= radius / norm;
            }
        }
        if t > burn_in {
            averaged += 1;
            for j in 0..AUG {
                avg[j] += (w[j] - avg[j]) / averaged as f64;
            }
        }
    }
    avg
}

fn fit_model(examples: &[(FeatureVector, Label)], lambda: f64, cfg: &TrainConfig) -> VadModel {
    let scaler = Standardizer::fit(examples.iter().map(|(f, _)| f));
    let xs: Vec<[f64; AUG]> = examples.iter().map(|(f, _)| scaler.apply(f)).collect();
    let ys: Vec<f64> = examples.iter().map(|(_, l)| l.sign()).collect();
    let w = fit_hinge(&xs, &ys, lambda, cfg.epochs);
    let mut weights = [0.0; FEATURE_LEN];
    weights.copy_from_slice(&w[..FEATURE_LEN]);
    VadModel {
        weights,
        bias: w[FEATURE_LEN],
        feat_mean: scaler.mean,
        feat_std: scaler.std,
        rms_threshold: cfg.rms_threshold,
        segment_speech_fraction: cfg.segment_speech_fraction,
    }
}

/// Fold index per example; each class is shuffled with the seed and dealt
/// round-robin so every fold keeps the class ratio.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    for class in [Label::Speech, Label::NonSpeech] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

fn accuracy(model: &VadModel, examples: &[(FeatureVector, Label)]) -> f64 {
    let correct = examples.iter().filter(|(f, l)| model.classify_frame(f) == *l).count();
    correct as f64 / examples.len() as f64
}

/// Trains a speech/non-speech model. Cross-validation picks the
/// regularization strength with the best mean fold accuracy (first grid
/// entry wins ties); the final model is refit on all examples.
pub fn train(labeled: &[(FeatureVector, Label)], cfg: &TrainConfig) -> Result<TrainReport, VadError> {
    if cfg.folds < 2 {
        return Err(VadError::Training(format!("need at least 2 folds, got {}", cfg.folds)));
    }
    if cfg.grid.0.is_empty() || cfg.grid.0.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(VadError::Training("regularization grid must be nonempty and positive".into()));
    }
    if cfg.epochs == 0 {
        return Err(VadError::Training("epochs must be positive".into()));
    }
    let speech = labeled.iter().filter(|(_, l)| *l == Label::Speech).count();
    let noise = labeled.len() - speech;
    if speech == 0 || noise == 0 {
        return Err(VadError::Training("training data must contain both classes".into()));
    }
    if speech < cfg.folds || noise < cfg.folds {
        return Err(VadError::Training(format!(
            "need at least {} examples per class, got {speech} speech / {noise} non-speech",
            cfg.folds
        )));
    }

    let labels: Vec<Label> = labeled.iter().map(|(_, l)| *l).collect();
    let assignment = stratified_folds(&labels, cfg.folds, cfg.seed);

    let mut cv = Vec::with_capacity(cfg.grid.0.len());
    for &lambda in &cfg.grid.0 {
        let mut total = 0.0;
        for fold in 0..cfg.folds {
            let (held, kept): (Vec<_>, Vec<_>) = labeled
                .iter()
                .zip(&assignment)
                .partition(|(_, &a)| a == fold);
            let kept: Vec<_> = kept.into_iter().map(|(e, _)| *e).collect();
            let held: Vec<_> = held.into_iter().map(|(e, _)| *e).collect();
            let model = fit_model(&kept, lambda, cfg);
            total += accuracy(&model, &held);
        }
        cv.push(CvScore {
            lambda,
            mean_accuracy: total / cfg.folds as f64,
        });
    }
    let best = cv
        .iter()
        .fold(&cv[0], |best, s| if s.mean_accuracy > best.mean_accuracy { s } else { best });
    let lambda = best.lambda;
    let model = fit_model(labeled, lambda, cfg);
    let training_metrics =
        EvalMetrics::from_confusion(&Confusion::from_pairs(labeled.iter().map(|(f, l)| (*l, model.classify_frame(f)))))?;
    Ok(TrainReport {
        model,
        lambda,
        cv,
        training_metrics,
    })
}

/// Stratified split into (train, test) with `test_fraction` of each class
/// held out.
pub fn stratified_split<T: Clone>(
    items: &[(T, Label)],
    test_fraction: f64,
    seed: u64,
) -> (Vec<(T, Label)>, Vec<(T, Label)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Speech, Label::NonSpeech] {
        let mut idx: Vec<usize> = (0..items.len()).filter(|&i| items[i].1 == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        for (k, i) in idx.into_iter().enumerate() {
            if k < n_test {
                test.push(items[i].clone());
            } else {
                train.push(items[i].clone());
            }
        }
    }
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn clusters(n_per_class: usize, seed: u64) -> Vec<(FeatureVector, Label)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut out = Vec::new();
        for (centre, label) in [(3.0, Label::Speech), (-3.0, Label::NonSpeech)] {
            for _ in 0..n_per_class {
                let mut f = [0.0; FEATURE_LEN];
                for (i, v) in f.iter_mut().enumerate() {
                    *v = noise.sample(&mut rng) + if i == 0 { centre } else { 0.0 };
                }
                out.push((FeatureVector(f), label));
            }
        }
        out
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 100,
            ..Default::default()
        }
    }

    #[test]
    fn separable_clusters_train_perfectly() {
        let data = clusters(100, 1);
        let report = train(&data, &quick()).unwrap();
        assert_eq!(report.training_metrics.accuracy, 1.0);
        assert_eq!(report.cv.len(), 4);
    }

    #[test]
    fn separable_clusters_generalize() {
        let data = clusters(200, 2);
        let (tr, te) = stratified_split(&data, 0.3, 9);
        assert_eq!(te.len(), 120);
        let report = train(&tr, &quick()).unwrap();
        let m = super::super::evaluate(&report.model, &te).unwrap();
        assert!(m.accuracy >= 0.99, "{m:?}");
    }

    #[test]
    fn duplicating_points_keeps_decision_function() {
        let data = clusters(60, 3);
        let doubled: Vec<_> = data.iter().flat_map(|e| [*e, *e]).collect();
        let cfg = TrainConfig {
            grid: HyperGrid(vec![0.1]),
            ..quick()
        };
        let a = train(&data, &cfg).unwrap().model;
        let b = train(&doubled, &cfg).unwrap().model;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let probe = FeatureVector(std::array::from_fn(|_| rng.gen_range(-5.0..5.0)));
            assert!((a.score(&probe) - b.score(&probe)).abs() < 1e-9);
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = clusters(50, 5);
        let a = train(&data, &quick()).unwrap();
        let b = train(&data, &quick()).unwrap();
        for (x, y) in a.model.weights.iter().zip(b.model.weights.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.model.bias.to_bits(), b.model.bias.to_bits());
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<_> = clusters(30, 6).into_iter().filter(|(_, l)| *l == Label::Speech).collect();
        assert!(matches!(train(&data, &quick()), Err(VadError::Training(_))));
    }

    #[test]
    fn too_few_per_class_is_rejected() {
        let mut data = clusters(30, 7);
        data.retain(|(_, l)| *l == Label::Speech);
        data.extend(clusters(5, 8).into_iter().filter(|(_, l)| *l == Label::NonSpeech));
        assert!(matches!(train(&data, &quick()), Err(VadError::Training(_))));
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<Label> = (0..100)
            .map(|i| if i < 30 { Label::Speech } else { Label::NonSpeech })
            .collect();
        let a = stratified_folds(&labels, 10, 1);
        for fold in 0..10 {
            let s = (0..100).filter(|&i| a[i] == fold && labels[i] == Label::Speech).count();
            let n = (0..100).filter(|&i| a[i] == fold && labels[i] == Label::NonSpeech).count();
            assert_eq!((s, n), (3, 7));
        }
    }
}
