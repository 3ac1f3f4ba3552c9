mod common;

use common::*;
use stgnn::data::{synthesize, EmbeddedExample, Split, SynthMode, SynthSpec};
use stgnn::tensor::Tape;
use stgnn::train::{best_epoch, fit_two_pass, fit_two_pass_jobs, metrics, Adam, TrainConfig, Trainer};
use stgnn::{Error, Rng, Tensor};

#[test]
fn metrics_worked_example() {
    let m = metrics(&[0, 0, 0], &[0, 1, 2]).unwrap();
    assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
    // class 0: precision 1/3, recall 1 → F1 0.5; classes 1 and 2 score 0
    assert!((m.macro_f1 - 0.5 / 3.0).abs() < 1e-15);
    let perfect = metrics(&[2, 1, 0, 1], &[2, 1, 0, 1]).unwrap();
    assert_eq!((perfect.accuracy, perfect.macro_f1), (1.0, 1.0));
    assert!(matches!(metrics(&[], &[]), Err(Error::Contract { .. })));
}

#[test]
fn metrics_ignore_pair_order() {
    let mut rng = Rng::new(3);
    let mut pairs: Vec<(usize, usize)> = (0..40).map(|_| (rng.below(3), rng.below(3))).collect();
    let split = |p: &[(usize, usize)]| -> (Vec<usize>, Vec<usize>) { p.iter().copied().unzip() };
    let (p, l) = split(&pairs);
    let before = metrics(&p, &l).unwrap();
    rng.shuffle(&mut pairs);
    let (p, l) = split(&pairs);
    let after = metrics(&p, &l).unwrap();
    assert!((before.accuracy - after.accuracy).abs() < 1e-15);
    assert!((before.macro_f1 - after.macro_f1).abs() < 1e-15);
}

#[test]
fn metrics_agree_with_confusion_oracle() {
    let mut rng = Rng::new(4);
    for _ in 0..200 {
        let n = 1 + rng.below(30);
        let p: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let l: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let m = metrics(&p, &l).unwrap();
        let (acc, f1) = confusion_metrics(&p, &l);
        assert!((m.accuracy - acc).abs() < 1e-12 && (m.macro_f1 - f1).abs() < 1e-12);
    }
}

#[test]
fn adam_first_step_moves_by_lr_against_gradient() {
    let mut params = vec![Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()];
    let mut adam = Adam::new(0.01, 0.9, 0.999, 1e-8, &params);
    adam.step(&mut params, &[vec![4.0, -0.001, 0.0]]);
    let d: Vec<f64> = params[0].data().iter().zip([1.0, -2.0, 0.5]).map(|(a, b)| a - b).collect();
    assert!((d[0] + 0.01).abs() < 1e-8);
    assert!((d[1] - 0.01).abs() < 1e-6);
    assert_eq!(d[2], 0.0);
}

#[test]
fn flat_curve_picks_first_epoch() {
    assert_eq!(best_epoch(&[0.4; 6]), 1);
    assert_eq!(best_epoch(&[0.2, 0.6, 0.6, 0.1]), 2);
}

fn synth(n: usize, h: usize, seed: u64, test_fraction: f64) -> (Vec<EmbeddedExample>, Vec<EmbeddedExample>) {
    let ds = synthesize(&SynthSpec {
        n,
        hidden_dim: h,
        mode: SynthMode::Separable,
        seed,
        test_fraction,
    })
    .unwrap();
    ds.examples.into_iter().partition(|e| e.split == Split::Train)
}

#[test]
fn loss_falls_for_first_ten_epochs() {
    let ex = separable(32, 8, 5);
    let refs: Vec<&EmbeddedExample> = ex.iter().collect();
    let cfg = TrainConfig {
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&overfit_config(8, 8), &cfg, 5).unwrap();
    let losses: Vec<f64> = (0..10).map(|_| trainer.epoch(&refs).unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn heavy_l2_shrinks_parameters() {
    let ex = separable(16, 4, 6);
    let refs: Vec<&EmbeddedExample> = ex.iter().collect();
    let cfg = TrainConfig {
        lr: 2e-2,
        l2_weight: 1e3,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&overfit_config(4, 8), &cfg, 1).unwrap();
    let norm = |t: &Trainer| t.model.params().values().iter().map(|p| p.norm().powi(2)).sum::<f64>().sqrt();
    let mut norms = vec![norm(&trainer)];
    for _ in 0..30 {
        trainer.epoch(&refs).unwrap();
        norms.push(norm(&trainer));
    }
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    assert!(norms[30] < 0.1 * norms[0], "{norms:?}");
}

#[test]
fn l2_term_adds_to_loss_exactly() {
    let mut tape = Tape::new();
    let logits = tape.constant(Tensor::zeros(&[2, 3]));
    let theta = tape.param(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
    let l = stgnn::train::loss(&mut tape, logits, &[0, 1], &[theta], 2e-7).unwrap();
    assert!((tape.value(l).item() - (3f64.ln() + 1e-6)).abs() < 1e-15);
}

#[test]
fn two_pass_is_deterministic_and_thread_count_free() {
    let (train, test) = synth(40, 6, 2, 0.25);
    let train: Vec<&EmbeddedExample> = train.iter().collect();
    let test: Vec<&EmbeddedExample> = test.iter().collect();
    let model = overfit_config(6, 8);
    let cfg = TrainConfig {
        lr: 1e-3,
        max_epochs: 4,
        num_runs: 3,
        seed_base: 10,
        ..TrainConfig::default()
    };
    let a = fit_two_pass(&train, &test, &model, &cfg).unwrap();
    let b = fit_two_pass(&train, &test, &model, &cfg).unwrap();
    let c = fit_two_pass_jobs(&train, &test, &model, &cfg, 3).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    assert_eq!(a.report, c.report);
    assert_eq!(a.report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
    for r in &a.report.runs {
        assert_eq!(r.chosen_epoch, best_epoch(&r.validation_accuracy));
        assert_eq!(r.final_epoch_losses.len(), r.chosen_epoch);
        // pass 2 starts from the pass-1 initialization
        let fresh = stgnn::Stgnn::new(model.clone(), r.seed).unwrap();
        assert_eq!(fresh.params().len(), a.models[0].params().len());
    }
}

#[test]
fn single_run_aggregate_is_that_run() {
    let (train, test) = synth(30, 4, 3, 0.3);
    let train: Vec<&EmbeddedExample> = train.iter().collect();
    let test: Vec<&EmbeddedExample> = test.iter().collect();
    let cfg = TrainConfig {
        max_epochs: 2,
        num_runs: 1,
        ..TrainConfig::default()
    };
    let out = fit_two_pass(&train, &test, &overfit_config(4, 8), &cfg).unwrap();
    let run = &out.report.runs[0];
    assert_eq!(out.report.aggregate.test_accuracy, run.test.accuracy);
    assert_eq!(out.report.aggregate.test_macro_f1, run.test.macro_f1);
    assert!(out.report.to_table().contains("STGNN-GRU"));
}

#[test]
fn empty_heldout_split_is_a_config_error() {
    let (train, test) = synth(12, 4, 3, 0.3);
    let train: Vec<&EmbeddedExample> = train.iter().take(3).collect();
    let test: Vec<&EmbeddedExample> = test.iter().collect();
    let cfg = TrainConfig {
        max_epochs: 1,
        num_runs: 1,
        ..TrainConfig::default()
    };
    // round(3 × 0.15) = 0 examples held out
    let err = fit_two_pass(&train, &test, &overfit_config(4, 8), &cfg).err().unwrap();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn separable_data_is_classified_perfectly() {
    let (train, test) = synth(400, 32, 7, 0.25);
    let train: Vec<&EmbeddedExample> = train.iter().collect();
    let test: Vec<&EmbeddedExample> = test.iter().collect();
    let cfg = TrainConfig {
        lr: 1e-3,
        max_epochs: 15,
        num_runs: 1,
        ..TrainConfig::default()
    };
    let out = fit_two_pass(&train, &test, &overfit_config(32, 8), &cfg).unwrap();
    let run = &out.report.runs[0];
    assert_eq!(run.test.accuracy, 1.0, "validation curve {:?}", run.validation_accuracy);
}
