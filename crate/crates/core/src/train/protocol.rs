//! Epoch training, evaluation, and the two-pass held-out protocol.

use log::{debug, info};
use rayon::prelude::*;

use super::adam::Adam;
use super::config::{ExperimentConfig, TrainConfig};
use super::loss::loss;
use super::metrics::{metrics, Metrics};
use super::report::{Aggregate, RunReport, TrainReport};
use crate::data::{hard_slice, heldout_split, make_batches, EmbeddedExample};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Stgnn};
use crate::rng::Rng;
use crate::tensor::Tape;

const SPLIT_STREAM: u64 = 0x5b11;
const BATCH_STREAM: u64 = 0xba7c;
const DROPOUT_STREAM: u64 = 0xd209;

/// Per-run mutable training state.
pub struct Trainer {
    pub model: Stgnn,
    optimizer: Adam,
    batch_rng: Rng,
    dropout_rng: Rng,
    cfg: TrainConfig,
}

impl Trainer {
    /// Model and random streams fully determined by `seed`.
    pub fn new(model_cfg: &ModelConfig, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        let model = Stgnn::new(model_cfg.clone(), seed)?;
        let optimizer = Adam::from_config(cfg, model.params().values());
        let root = Rng::new(seed);
        Ok(Trainer {
            model,
            optimizer,
            batch_rng: root.fork(BATCH_STREAM),
            dropout_rng: root.fork(DROPOUT_STREAM),
            cfg: cfg.clone(),
        })
    }

    /// One shuffled pass over `examples`; returns the example-weighted mean loss.
    pub fn epoch(&mut self, examples: &[&EmbeddedExample]) -> Result<f64> {
        let batches = make_batches(examples, self.cfg.batch_size, Some(&mut self.batch_rng));
        let mut total = 0.0;
        for batch in &batches {
            let mut tape = Tape::new();
            let bound = self.model.params().bind(&mut tape);
            let x = tape.constant(batch.inputs.clone());
            let out = self.model.forward(&mut tape, &bound, x, &batch.lengths, Some(&mut self.dropout_rng))?;
            let l = loss(&mut tape, out.logits, &batch.labels, bound.vars(), self.cfg.l2_weight)?;
            tape.backward(l)?;
            let grads: Vec<Vec<f64>> = bound
                .vars()
                .iter()
                .zip(self.model.params().values())
                .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.numel()], <[f64]>::to_vec))
                .collect();
            self.optimizer.step(self.model.params_mut().values_mut(), &grads);
            total += tape.value(l).item() * batch.len() as f64;
        }
        Ok(total / examples.len() as f64)
    }
}

/// Predicted classes in input order, batched without shuffling.
pub fn predict(model: &Stgnn, examples: &[&EmbeddedExample], batch_size: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(examples.len());
    for batch in make_batches(examples, batch_size, None) {
        out.extend(model.predict(&batch.inputs, &batch.lengths)?);
    }
    Ok(out)
}

pub fn evaluate(model: &Stgnn, examples: &[&EmbeddedExample], batch_size: usize) -> Result<Metrics> {
    let preds = predict(model, examples, batch_size)?;
    let labels: Vec<usize> = examples.iter().map(|e| e.label.index()).collect();
    metrics(&preds, &labels)
}

/// First epoch (1-based) with the highest value.
pub fn best_epoch(curve: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in curve.iter().enumerate() {
        if v > curve[best] {
            best = i;
        }
    }
    best + 1
}

/// Result of one seed: the report row and the pass-2 model.
pub struct RunOutcome {
    pub report: RunReport,
    pub model: Stgnn,
}

pub struct TwoPassOutcome {
    pub report: TrainReport,
    pub models: Vec<Stgnn>,
}

fn run_once(
    train: &[&EmbeddedExample],
    test: &[&EmbeddedExample],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let mut split_rng = Rng::new(seed).fork(SPLIT_STREAM);
    let (kept, held) = heldout_split(train.len(), cfg.heldout_fraction, &mut split_rng);
    if held.is_empty() || kept.is_empty() {
        return Err(Error::Config(format!(
            "held-out fraction {} of {} training examples leaves an empty split",
            cfg.heldout_fraction,
            train.len()
        )));
    }
    let kept: Vec<&EmbeddedExample> = kept.iter().map(|&i| train[i]).collect();
    let held: Vec<&EmbeddedExample> = held.iter().map(|&i| train[i]).collect();

    let mut pass1 = Trainer::new(model_cfg, cfg, seed)?;
    let mut epoch_losses = Vec::with_capacity(cfg.max_epochs);
    let mut validation_accuracy = Vec::with_capacity(cfg.max_epochs);
    for epoch in 1..=cfg.max_epochs {
        let l = pass1.epoch(&kept)?;
        let acc = evaluate(&pass1.model, &held, cfg.batch_size)?.accuracy;
        debug!("seed {seed} pass 1 epoch {epoch}: loss {l:.6} val acc {acc:.4}");
        epoch_losses.push(l);
        validation_accuracy.push(acc);
    }
    let chosen_epoch = best_epoch(&validation_accuracy);

    let mut pass2 = Trainer::new(model_cfg, cfg, seed)?;
    let mut final_losses = Vec::with_capacity(chosen_epoch);
    for _ in 0..chosen_epoch {
        final_losses.push(pass2.epoch(train)?);
    }
    let test_metrics = evaluate(&pass2.model, test, cfg.batch_size)?;
    let hard = hard_slice(test.iter().copied());
    let hard_metrics = if hard.is_empty() {
        None
    } else {
        Some(evaluate(&pass2.model, &hard, cfg.batch_size)?)
    };
    info!(
        "seed {seed}: chosen epoch {chosen_epoch}, test acc {:.4} f1 {:.4}",
        test_metrics.accuracy, test_metrics.macro_f1
    );
    Ok(RunOutcome {
        report: RunReport {
            seed,
            epoch_losses,
            validation_accuracy,
            chosen_epoch,
            final_epoch_losses: final_losses,
            test: test_metrics,
            hard: hard_metrics,
            hard_count: hard.len(),
        },
        model: pass2.model,
    })
}

/// Select the epoch on a held-out split, retrain on all training data for
/// exactly that many epochs, and evaluate; repeated for `num_runs` seeds.
pub fn fit_two_pass(
    train: &[&EmbeddedExample],
    test: &[&EmbeddedExample],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TwoPassOutcome> {
    fit_two_pass_jobs(train, test, model_cfg, cfg, 1)
}

/// [`fit_two_pass`] with up to `jobs` seeds trained concurrently. Results do
/// not depend on `jobs`.
pub fn fit_two_pass_jobs(
    train: &[&EmbeddedExample],
    test: &[&EmbeddedExample],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<TwoPassOutcome> {
    model_cfg.validate()?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let seeds: Vec<u64> = (0..cfg.num_runs as u64).map(|i| cfg.seed_base + i).collect();
    let run = |&seed: &u64| run_once(train, test, model_cfg, cfg, seed);
    let outcomes: Vec<RunOutcome> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(run).collect::<Result<_>>())?
    } else {
        seeds.iter().map(run).collect::<Result<_>>()?
    };
    let (runs, models): (Vec<RunReport>, Vec<Stgnn>) = outcomes.into_iter().map(|o| (o.report, o.model)).unzip();
    let aggregate = Aggregate::from_runs(&runs);
    Ok(TwoPassOutcome {
        report: TrainReport {
            config: ExperimentConfig {
                dataset: None,
                model: model_cfg.clone(),
                train: cfg.clone(),
            },
            runs,
            aggregate,
        },
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_epoch_prefers_lowest_on_ties() {
        assert_eq!(best_epoch(&[0.5, 0.5, 0.5]), 1);
        assert_eq!(best_epoch(&[0.1, 0.7, 0.3, 0.7]), 2);
        assert_eq!(best_epoch(&[0.9]), 1);
    }
}
