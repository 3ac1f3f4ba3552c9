//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use stgnn::data::{synthesize, EmbeddedExample, Label, Split, SynthMode, SynthSpec};
use stgnn::train::{evaluate, TrainConfig, Trainer};
use stgnn::{ModelConfig, Rng, Tensor};

/// Textbook O(s²) DFT of a real signal.
pub fn naive_dft(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = x.len();
    let mut re = vec![0.0; s];
    let mut im = vec![0.0; s];
    for k in 0..s {
        for (n, &v) in x.iter().enumerate() {
            let ang = -2.0 * PI * (k * n % s) as f64 / s as f64;
            re[k] += v * ang.cos();
            im[k] += v * ang.sin();
        }
    }
    (re, im)
}

pub fn matmul(a: &[f64], b: &[f64], n: usize, m: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i * p + j] += a[i * m + k] * b[k * p + j];
            }
        }
    }
    out
}

/// Row-stochastic matrix with strictly positive entries.
pub fn random_attention(h: usize, rng: &mut Rng) -> Tensor {
    let logits: Vec<f64> = (0..h * h).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
    let mut data = Vec::with_capacity(h * h);
    for row in logits.chunks(h) {
        let m = row.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        data.extend(e.iter().map(|v| v / z));
    }
    Tensor::new(vec![h, h], data).unwrap()
}

/// Dense normalized Laplacian built from scratch.
pub fn direct_laplacian(w: &Tensor) -> Vec<f64> {
    let h = w.shape()[0];
    let s: Vec<f64> = (0..h * h).map(|i| 0.5 * (w.data()[i] + w.data()[(i % h) * h + i / h])).collect();
    let d: Vec<f64> = s.chunks(h).map(|r| r.iter().sum()).collect();
    let mut l = vec![0.0; h * h];
    for i in 0..h {
        for j in 0..h {
            let norm = if d[i] > 0.0 && d[j] > 0.0 { s[i * h + j] / (d[i] * d[j]).sqrt() } else { 0.0 };
            l[i * h + j] = if i == j { 1.0 } else { 0.0 } - norm;
        }
    }
    l
}

/// `[T_0(L̃), …, T_{k-1}(L̃)]` by repeated dense multiplication, `L̃ = L - I`.
pub fn direct_chebyshev(l: &[f64], h: usize, k: usize) -> Vec<Vec<f64>> {
    let eye: Vec<f64> = (0..h * h).map(|i| if i / h == i % h { 1.0 } else { 0.0 }).collect();
    let lt: Vec<f64> = l.iter().zip(&eye).map(|(a, e)| a - e).collect();
    let mut terms = vec![eye.clone()];
    if k > 1 {
        terms.push(lt.clone());
    }
    while terms.len() < k {
        let n = terms.len();
        let prod = matmul(&lt, &terms[n - 1], h, h, h);
        terms.push(prod.iter().zip(&terms[n - 2]).map(|(p, q)| 2.0 * p - q).collect());
    }
    terms
}

/// Scalar Chebyshev polynomial `T_n(x)`.
pub fn cheb_scalar(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        (a, b) = (b, 2.0 * x * b - a);
    }
    b
}

/// Test examples in sentence groups with ≥2 aspects and ≥2 labels, by
/// explicit group-by over sorted keys.
pub fn brute_hard_ids(examples: &[EmbeddedExample]) -> Vec<String> {
    let mut groups: BTreeMap<&str, Vec<&EmbeddedExample>> = BTreeMap::new();
    for e in examples.iter().filter(|e| e.split == Split::Test) {
        groups.entry(&e.sentence_key).or_default().push(e);
    }
    let mut hard: Vec<&str> = Vec::new();
    for members in groups.values() {
        let mut labels: Vec<Label> = members.iter().map(|e| e.label).collect();
        labels.sort_by_key(|l| l.index());
        labels.dedup();
        if members.len() >= 2 && labels.len() >= 2 {
            hard.extend(members.iter().map(|e| e.id.as_str()));
        }
    }
    let mut ids: Vec<String> = hard.into_iter().map(str::to_owned).collect();
    ids.sort();
    ids
}

/// Accuracy and macro-F1 from an explicit confusion matrix.
pub fn confusion_metrics(pred: &[usize], gold: &[usize]) -> (f64, f64) {
    let mut cm = [[0usize; 3]; 3];
    for (&p, &g) in pred.iter().zip(gold) {
        cm[g][p] += 1;
    }
    let correct: usize = (0..3).map(|c| cm[c][c]).sum();
    let mut f1 = 0.0;
    for c in 0..3 {
        let tp = cm[c][c] as f64;
        let fp = (0..3).filter(|&g| g != c).map(|g| cm[g][c]).sum::<usize>() as f64;
        let fne = (0..3).filter(|&p| p != c).map(|p| cm[c][p]).sum::<usize>() as f64;
        if tp > 0.0 {
            let prec = tp / (tp + fp);
            let rec = tp / (tp + fne);
            f1 += 2.0 * prec * rec / (prec + rec);
        }
    }
    (correct as f64 / pred.len() as f64, f1 / 3.0)
}

pub fn separable(n: usize, h: usize, seed: u64) -> Vec<EmbeddedExample> {
    synthesize(&SynthSpec {
        n,
        hidden_dim: h,
        mode: SynthMode::Separable,
        seed,
        test_fraction: 0.0,
    })
    .unwrap()
    .examples
}

pub struct OverfitResult {
    pub epochs: usize,
    pub train_accuracy: f64,
    pub losses: Vec<f64>,
}

/// Trains on `examples` until every one is classified correctly or
/// `max_epochs` pass.
pub fn overfit(examples: &[EmbeddedExample], model: &ModelConfig, lr: f64, max_epochs: usize, seed: u64) -> OverfitResult {
    let refs: Vec<&EmbeddedExample> = examples.iter().collect();
    let cfg = TrainConfig {
        lr,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, &cfg, seed).unwrap();
    let mut losses = Vec::new();
    let mut acc = 0.0;
    for epoch in 1..=max_epochs {
        losses.push(trainer.epoch(&refs).unwrap());
        acc = evaluate(&trainer.model, &refs, cfg.batch_size).unwrap().accuracy;
        if acc == 1.0 {
            return OverfitResult {
                epochs: epoch,
                train_accuracy: acc,
                losses,
            };
        }
    }
    OverfitResult {
        epochs: max_epochs,
        train_accuracy: acc,
        losses,
    }
}

pub fn overfit_config(h: usize, max_seq_len: usize) -> ModelConfig {
    ModelConfig {
        hidden_dim: h,
        max_seq_len,
        ..ModelConfig::default()
    }
}
