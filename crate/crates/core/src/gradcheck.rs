//! Central finite-difference checks of reverse-mode gradients.
//!
//! Each check reduces an operation's output to a scalar through a fixed
//! random projection, then compares the tape gradient of every input with
//! `(f(x + ε) - f(x - ε)) / 2ε`. The error for an input is
//! `‖analytic - numeric‖ / (‖analytic‖ + ‖numeric‖)`, and an op passes when
//! the worst input stays below the tolerance.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::recurrent::{self, CellKind, GateVars};
use crate::model::{Bound, ModelConfig, Stgnn};
use crate::rng::Rng;
use crate::spectral::{chebyshev_gft_var, chebyshev_terms};
use crate::tensor::{Tape, Tensor, Var};

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Below this combined norm both gradients count as zero.
const ZERO_NORM: f64 = 1e-10;

/// Every op name the suite knows, in run order.
pub const OPS: &[&str] = &[
    "matmul",
    "softmax",
    "add",
    "sub",
    "mul",
    "scale",
    "sigmoid",
    "tanh",
    "leaky_relu",
    "conv1d",
    "glu",
    "gru_cell",
    "lstm_cell",
    "attention",
    "build_laplacian",
    "chebyshev_gft",
    "dft",
    "idft",
    "cross_entropy",
    "forward",
];

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub epsilon: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Scales the analytic gradient of the named op so the suite must flag it.
    pub inject_fault: Option<String>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            epsilon: EPSILON,
            tolerance: TOLERANCE,
            seed: 0,
            inject_fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpCheck {
    pub op: String,
    pub max_rel_err: f64,
    pub passed: bool,
    pub inputs_checked: usize,
    pub seconds: f64,
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic) + norm(numeric);
    if scale < ZERO_NORM {
        0.0
    } else {
        norm(&diff) / scale
    }
}

type OpFn<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var> + 'a;

fn projected(tape: &mut Tape, f: &OpFn, inputs: &[Var], weights: &Tensor) -> Result<Var> {
    let out = f(tape, inputs)?;
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

fn scalar_value(f: &OpFn, inputs: &[Tensor], weights: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let l = projected(&mut tape, f, &vars, weights)?;
    Ok(tape.value(l).item())
}

/// Analytic and numeric gradients of `Σ w ⊙ f(inputs)` for each input.
pub fn gradients(
    f: &OpFn,
    inputs: &[Tensor],
    epsilon: f64,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut probe = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| probe.constant(t.clone())).collect();
    let out = f(&mut probe, &vars)?;
    let mut rng = Rng::new(seed).fork(0x9c);
    let weights = Tensor::from_fn(probe.shape(out), |_| rng.uniform_in(-1.0, 1.0));

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let l = projected(&mut tape, f, &vars, &weights)?;
    tape.backward(l)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).map_or_else(|| vec![0.0; t.numel()], <[f64]>::to_vec))
        .collect();

    let mut numeric = Vec::with_capacity(inputs.len());
    let mut work = inputs.to_vec();
    for k in 0..inputs.len() {
        let mut g = vec![0.0; inputs[k].numel()];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + epsilon;
            let plus = scalar_value(f, &work, &weights)?;
            work[k].data_mut()[i] = orig - epsilon;
            let minus = scalar_value(f, &work, &weights)?;
            work[k].data_mut()[i] = orig;
            *gi = (plus - minus) / (2.0 * epsilon);
        }
        numeric.push(g);
    }
    Ok((analytic, numeric))
}

/// Runs one finite-difference check.
pub fn check_op(name: &str, f: &OpFn, inputs: &[Tensor], opts: &CheckOptions) -> Result<OpCheck> {
    let start = Instant::now();
    let (mut analytic, numeric) = gradients(f, inputs, opts.epsilon, opts.seed)?;
    if opts.inject_fault.as_deref() == Some(name) {
        analytic.iter_mut().flatten().for_each(|g| *g *= 1.01);
    }
    let max_rel_err = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max);
    Ok(OpCheck {
        op: name.to_owned(),
        max_rel_err,
        passed: max_rel_err < opts.tolerance,
        inputs_checked: inputs.len(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform_in(lo, hi))
}

/// Values bounded away from the leaky-ReLU kink.
fn off_kink(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.uniform_in(0.1, 2.0);
        if rng.uniform() < 0.5 {
            -m
        } else {
            m
        }
    })
}

fn row_stochastic(h: usize, rng: &mut Rng) -> Tensor {
    let mut t = uniform(&[h, h], 0.1, 1.0, rng);
    for row in t.data_mut().chunks_mut(h) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    t
}

/// Toy configuration for the end-to-end check: b=2, s=6, h=8, k=3.
pub fn forward_check_config() -> ModelConfig {
    ModelConfig {
        hidden_dim: 8,
        max_seq_len: 6,
        cheb_order: 3,
        ..ModelConfig::default()
    }
}

fn cell_check(kind: CellKind, rng: &mut Rng) -> (Box<OpFn<'static>>, Vec<Tensor>) {
    let (b, input, hidden) = (2, 3, 4);
    let gates = match kind {
        CellKind::Gru => 3,
        CellKind::Lstm => 4,
    };
    let mut inputs = vec![uniform(&[b, input], -1.0, 1.0, rng), uniform(&[b, hidden], -1.0, 1.0, rng)];
    if kind == CellKind::Lstm {
        inputs.push(uniform(&[b, hidden], -1.0, 1.0, rng));
    }
    for _ in 0..gates {
        inputs.push(uniform(&[input, hidden], -0.8, 0.8, rng));
        inputs.push(uniform(&[hidden, hidden], -0.8, 0.8, rng));
        inputs.push(uniform(&[hidden], -0.5, 0.5, rng));
    }
    let f = move |t: &mut Tape, v: &[Var]| -> Result<Var> {
        let offset = if kind == CellKind::Lstm { 3 } else { 2 };
        let gv: Vec<GateVars> = v[offset..]
            .chunks(3)
            .map(|c| GateVars {
                w_in: c[0],
                w_hid: c[1],
                bias: c[2],
            })
            .collect();
        let state = recurrent::CellState {
            h: v[1],
            c: (kind == CellKind::Lstm).then(|| v[2]),
        };
        let next = recurrent::step(t, kind, &gv, v[0], state)?;
        match next.c {
            Some(c) => t.concat(&[next.h, c], 1),
            None => Ok(next.h),
        }
    };
    (Box::new(f), inputs)
}

/// Function and inputs for one named op.
pub fn case(name: &str, seed: u64) -> Result<(Box<OpFn<'static>>, Vec<Tensor>)> {
    let mut rng = Rng::new(seed).fork(name.bytes().fold(0u64, |a, b| a.wrapping_mul(31).wrapping_add(b.into())));
    let pair = |rng: &mut Rng| vec![uniform(&[3, 4], -1.0, 1.0, rng), uniform(&[3, 4], -1.0, 1.0, rng)];
    let boxed = |f: Box<OpFn<'static>>, inputs: Vec<Tensor>| Ok((f, inputs));
    match name {
        "matmul" => boxed(
            Box::new(|t, v| {
                let shared = t.matmul(v[0], v[1])?;
                let batched = t.matmul(v[0], v[2])?;
                t.add(shared, batched)
            }),
            vec![
                uniform(&[2, 3, 4], -1.0, 1.0, &mut rng),
                uniform(&[4, 5], -1.0, 1.0, &mut rng),
                uniform(&[2, 4, 5], -1.0, 1.0, &mut rng),
            ],
        ),
        "softmax" => boxed(
            Box::new(|t, v| {
                let a = t.softmax(v[0], 1)?;
                let b = t.softmax(v[0], 0)?;
                t.mul(a, b)
            }),
            vec![uniform(&[3, 5], -2.0, 2.0, &mut rng)],
        ),
        "add" => boxed(Box::new(|t, v| t.add(v[0], v[1])), pair(&mut rng)),
        "sub" => boxed(Box::new(|t, v| t.sub(v[0], v[1])), pair(&mut rng)),
        "mul" => boxed(Box::new(|t, v| t.mul(v[0], v[1])), pair(&mut rng)),
        "scale" => boxed(Box::new(|t, v| Ok(t.scale(v[0], -1.7))), vec![uniform(&[4], -1.0, 1.0, &mut rng)]),
        "sigmoid" => boxed(Box::new(|t, v| Ok(t.sigmoid(v[0]))), vec![uniform(&[3, 4], -3.0, 3.0, &mut rng)]),
        "tanh" => boxed(Box::new(|t, v| Ok(t.tanh(v[0]))), vec![uniform(&[3, 4], -2.0, 2.0, &mut rng)]),
        "leaky_relu" => boxed(Box::new(|t, v| Ok(t.leaky_relu(v[0], 0.01))), vec![off_kink(&[3, 4], &mut rng)]),
        "conv1d" => boxed(
            Box::new(|t, v| {
                let per_channel = t.conv1d(v[0], v[1])?;
                let shared = t.conv1d(v[0], v[2])?;
                let mixing = t.conv1d(v[0], v[3])?;
                let sum = t.add(per_channel, shared)?;
                t.add(sum, mixing)
            }),
            vec![
                uniform(&[2, 3, 7], -1.0, 1.0, &mut rng),
                uniform(&[3, 3], -1.0, 1.0, &mut rng),
                uniform(&[3], -1.0, 1.0, &mut rng),
                uniform(&[3, 3, 3], -1.0, 1.0, &mut rng),
            ],
        ),
        "glu" => boxed(Box::new(|t, v| Ok(t.glu(v[0]))), vec![uniform(&[3, 4], -3.0, 3.0, &mut rng)]),
        "gru_cell" => Ok(cell_check(CellKind::Gru, &mut rng)),
        "lstm_cell" => Ok(cell_check(CellKind::Lstm, &mut rng)),
        "attention" => {
            let h = 4;
            boxed(
                Box::new(move |t, v| {
                    let q = t.matmul(v[0], v[1])?;
                    let k = t.matmul(v[0], v[2])?;
                    let kt = t.transpose(k)?;
                    let logits = t.matmul(q, kt)?;
                    let logits = t.scale(logits, 1.0 / (h as f64).sqrt());
                    let shared = t.mean_axis(logits, 0)?;
                    t.softmax(shared, 1)
                }),
                vec![
                    uniform(&[2, h, h], -1.0, 1.0, &mut rng),
                    uniform(&[h, h], -1.0, 1.0, &mut rng),
                    uniform(&[h, h], -1.0, 1.0, &mut rng),
                ],
            )
        }
        "build_laplacian" => boxed(
            Box::new(|t, v| t.normalized_laplacian(v[0])),
            vec![row_stochastic(5, &mut rng)],
        ),
        "chebyshev_gft" => boxed(
            Box::new(|t, v| {
                let lap = t.normalized_laplacian(v[0])?;
                let terms = chebyshev_terms(t, lap, 3)?;
                chebyshev_gft_var(t, &terms, v[1])
            }),
            vec![row_stochastic(5, &mut rng), uniform(&[2, 3, 5], -1.0, 1.0, &mut rng)],
        ),
        "dft" => boxed(
            Box::new(|t, v| {
                let re = t.dft_re(v[0]);
                let im = t.dft_im(v[0]);
                t.concat(&[re, im], 1)
            }),
            vec![uniform(&[2, 7], -1.0, 1.0, &mut rng)],
        ),
        "idft" => boxed(
            Box::new(|t, v| t.idft_real(v[0], v[1])),
            vec![uniform(&[2, 6], -1.0, 1.0, &mut rng), uniform(&[2, 6], -1.0, 1.0, &mut rng)],
        ),
        "cross_entropy" => boxed(
            Box::new(|t, v| t.cross_entropy(v[0], &[0, 2, 1, 2])),
            vec![uniform(&[4, 3], -2.0, 2.0, &mut rng)],
        ),
        "forward" => {
            let cfg = forward_check_config();
            let model = Stgnn::new(cfg.clone(), seed)?;
            let x = uniform(&[2, 6, cfg.hidden_dim], -1.0, 1.0, &mut rng);
            let mut inputs = model.params().values().to_vec();
            inputs.push(x);
            let f = move |t: &mut Tape, v: &[Var]| -> Result<Var> {
                let (params, x) = v.split_at(v.len() - 1);
                let bound = Bound::from_vars(params.to_vec());
                Ok(model.forward(t, &bound, x[0], &[6, 4], None)?.logits)
            };
            boxed(Box::new(f), inputs)
        }
        other => Err(Error::Config(format!(
            "unknown gradcheck op {other:?}; known ops: {}",
            OPS.join(", ")
        ))),
    }
}

/// Runs the named ops (all of [`OPS`] when `ops` is `None`).
pub fn run_suite(ops: Option<&[String]>, opts: &CheckOptions) -> Result<Vec<OpCheck>> {
    let names: Vec<String> = match ops {
        Some(list) => list.to_vec(),
        None => OPS.iter().map(|s| s.to_string()).collect(),
    };
    names
        .iter()
        .map(|name| {
            let (f, inputs) = case(name, opts.seed)?;
            check_op(name, f.as_ref(), &inputs, opts)
        })
        .collect()
}
