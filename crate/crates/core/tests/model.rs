mod common;

use common::naive_dft;
use stgnn::model::{checkpoint, DecoderKind, EncoderKind, ModelConfig, Pooling, Stgnn};
use stgnn::spectral::chebyshev_terms;
use stgnn::{Error, Rng, Tape, Tensor};

fn config(h: usize, max_seq_len: usize) -> ModelConfig {
    ModelConfig {
        hidden_dim: h,
        max_seq_len,
        ..ModelConfig::default()
    }
}

fn random_input(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(shape, |_| rng.uniform_in(-1.0, 1.0))
}

fn zero_params(model: &mut Stgnn) {
    model.params_mut().values_mut().iter_mut().for_each(|p| p.data_mut().fill(0.0));
}

fn set_param(model: &mut Stgnn, name: &str, value: Tensor) {
    let slot = model.params_mut().by_name_mut(name).unwrap_or_else(|| panic!("no parameter {name}"));
    assert_eq!(slot.shape(), value.shape(), "{name}");
    *slot = value;
}

#[test]
fn encoder_emits_square_states_for_any_length() {
    for kind in [EncoderKind::Gru, EncoderKind::Lstm, EncoderKind::Bilstm] {
        let model = Stgnn::new(ModelConfig { encoder: kind, ..config(5, 9) }, 1).unwrap();
        for s in [1, 4, 9] {
            let mut tape = Tape::new();
            let bound = model.params().bind(&mut tape);
            let x = tape.constant(random_input(&[2, s, 5], s as u64));
            let enc = model.encode_latent(&mut tape, &bound, x).unwrap();
            assert_eq!(tape.shape(enc), &[2, 5, 5], "{kind} s={s}");
        }
    }
}

#[test]
fn zero_encoder_gives_zero_states() {
    for kind in [EncoderKind::Gru, EncoderKind::Lstm] {
        let mut model = Stgnn::new(ModelConfig { encoder: kind, ..config(4, 6) }, 2).unwrap();
        zero_params(&mut model);
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let x = tape.constant(random_input(&[3, 6, 4], 3));
        let enc = model.encode_latent(&mut tape, &bound, x).unwrap();
        assert!(tape.value(enc).data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn gru_and_lstm_encoders_differ() {
    let x = random_input(&[1, 5, 4], 4);
    let run = |kind| {
        let model = Stgnn::new(ModelConfig { encoder: kind, ..config(4, 5) }, 9).unwrap();
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let xv = tape.constant(x.clone());
        let enc = model.encode_latent(&mut tape, &bound, xv).unwrap();
        tape.value(enc).clone()
    };
    assert!(run(EncoderKind::Gru).max_abs_diff(&run(EncoderKind::Lstm)) > 1e-3);
}

#[test]
fn sequence_longer_than_encoder_width_is_rejected() {
    let model = Stgnn::new(config(4, 5), 0).unwrap();
    let err = model.logits(&random_input(&[1, 6, 4], 0), &[6]).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn zero_query_and_key_give_uniform_graph() {
    let h = 5;
    let mut model = Stgnn::new(config(h, 4), 3).unwrap();
    set_param(&mut model, "attention.w_q", Tensor::zeros(&[h, h]));
    set_param(&mut model, "attention.w_k", Tensor::zeros(&[h, h]));
    let g = model.latent_graph(&random_input(&[2, 4, h], 1)).unwrap();
    assert!(g.adjacency.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
}

#[test]
fn two_channel_attention_by_hand() {
    // Encoder states E = [[1, 0], [0, 2]], W_Q = I, W_K = [[1, 1], [0, 1]].
    // Q = E, K = [[1, 1], [0, 2]], QKᵀ = [[1, 0], [2, 4]], scaled by 1/√2.
    let mut model = Stgnn::new(config(2, 3), 0).unwrap();
    set_param(&mut model, "attention.w_q", Tensor::eye(2));
    set_param(&mut model, "attention.w_k", Tensor::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap());
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let e = tape.constant(Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 2.0]).unwrap());
    let adj = model.attention_adjacency(&mut tape, &bound, e).unwrap();
    let r = 2f64.sqrt();
    let row = |a: f64, b: f64| {
        let (ea, eb) = ((a / r).exp(), (b / r).exp());
        [ea / (ea + eb), eb / (ea + eb)]
    };
    let expect: Vec<f64> = row(1.0, 0.0).into_iter().chain(row(2.0, 4.0)).collect();
    for (a, b) in tape.value(adj).data().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn attention_rows_are_distributions() {
    let model = Stgnn::new(config(8, 7), 5).unwrap();
    let g = model.latent_graph(&random_input(&[3, 7, 8], 2)).unwrap();
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let x = tape.constant(random_input(&[3, 7, 8], 2));
    let enc = model.encode_latent(&mut tape, &bound, x).unwrap();
    let adj = model.attention_adjacency(&mut tape, &bound, enc).unwrap();
    for row in tape.value(adj).data().chunks(8) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
    }
    assert_eq!(g.nodes(), 8);
}

fn block_output(model: &Stgnn, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let xv = tape.constant(x.clone());
    let h = x.shape()[2];
    let lap = tape.constant(model.latent_graph(x).unwrap().laplacian);
    let terms = chebyshev_terms(&mut tape, lap, model.config().cheb_order).unwrap();
    assert_eq!(h, model.config().hidden_dim);
    let out = model.blocks()[0].forward(&mut tape, &bound, xv, &terms).unwrap();
    tape.value(out).clone()
}

#[test]
fn spectral_block_preserves_shape() {
    let mut rng = Rng::new(11);
    for trial in 0..12 {
        let (b, s, h, k) = (1 + rng.below(3), 1 + rng.below(9), 1 + rng.below(8), 1 + rng.below(4));
        let model = Stgnn::new(ModelConfig { cheb_order: k, ..config(h, s) }, trial).unwrap();
        let out = block_output(&model, &random_input(&[b, s, h], trial));
        assert_eq!(out.shape(), &[b, s, h], "b={b} s={s} h={h} k={k}");
    }
}

#[test]
fn zero_block_outputs_zero() {
    let mut model = Stgnn::new(config(4, 6), 1).unwrap();
    zero_params(&mut model);
    let out = block_output(&model, &random_input(&[2, 6, 4], 5));
    assert!(out.data().iter().all(|&v| v == 0.0));
}

/// Same-padded channel-mixing convolution over the frequency axis, GLU,
/// and real inverse DFT, written out directly.
fn graph_free_block(x: &Tensor, k_re: &Tensor, k_im: &Tensor) -> Tensor {
    let (b, s, h) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let taps = k_re.shape()[2];
    let half = taps / 2;
    let glu = |v: f64| v / (1.0 + (-v).exp());
    let mut out = Tensor::zeros(&[b, s, h]);
    for bi in 0..b {
        let spectra: Vec<(Vec<f64>, Vec<f64>)> =
            (0..h).map(|c| naive_dft(&(0..s).map(|t| x.get(&[bi, t, c])).collect::<Vec<_>>())).collect();
        for o in 0..h {
            let mut mr = vec![0.0; s];
            let mut mi = vec![0.0; s];
            for f in 0..s {
                let (mut ar, mut ai) = (0.0, 0.0);
                for i in 0..h {
                    for j in 0..taps {
                        let src = f as isize + j as isize - half as isize;
                        if (0..s as isize).contains(&src) {
                            ar += k_re.get(&[o, i, j]) * spectra[i].0[src as usize];
                            ai += k_im.get(&[o, i, j]) * spectra[i].1[src as usize];
                        }
                    }
                }
                mr[f] = glu(ar);
                mi[f] = glu(ai);
            }
            for t in 0..s {
                let mut acc = 0.0;
                for f in 0..s {
                    let ang = 2.0 * std::f64::consts::PI * (f * t) as f64 / s as f64;
                    acc += mr[f] * ang.cos() - mi[f] * ang.sin();
                }
                out.set(&[bi, t, o], acc / s as f64);
            }
        }
    }
    out
}

#[test]
fn order_one_block_matches_graph_free_oracle() {
    let h = 4;
    let mut model = Stgnn::new(ModelConfig { cheb_order: 1, ..config(h, 7) }, 8).unwrap();
    set_param(&mut model, "block0.igft.w", Tensor::eye(h));
    let k_re = model.params().by_name("block0.conv_re").unwrap().clone();
    let k_im = model.params().by_name("block0.conv_im").unwrap().clone();
    let x = random_input(&[2, 7, h], 12);
    let got = block_output(&model, &x);
    let expect = graph_free_block(&x, &k_re, &k_im);
    assert!(got.max_abs_diff(&expect) < 1e-12, "{}", got.max_abs_diff(&expect));
}

#[test]
fn residual_adds_input() {
    let x = random_input(&[1, 5, 3], 1);
    let plain = Stgnn::new(config(3, 5), 4).unwrap();
    let res = Stgnn::new(ModelConfig { residual: true, ..config(3, 5) }, 4).unwrap();
    let diff = Tensor::from_fn(&[1, 5, 3], |i| block_output(&res, &x).data()[i] - block_output(&plain, &x).data()[i]);
    assert!(diff.max_abs_diff(&x) < 1e-14);
}

#[test]
fn zero_output_layer_gives_uniform_prediction() {
    let mut model = Stgnn::new(config(4, 6), 2).unwrap();
    set_param(&mut model, "decoder.fc2.out.w", Tensor::zeros(&[4, 3]));
    let logits = model.logits(&random_input(&[2, 6, 4], 3), &[6, 4]).unwrap();
    assert!(logits.data().iter().all(|&v| v == 0.0));
}

#[test]
fn fc_decoder_reads_only_first_position() {
    let model = Stgnn::new(config(4, 6), 2).unwrap();
    let x = random_input(&[1, 6, 4], 7);
    let mut shuffled = x.clone();
    for c in 0..4 {
        let (a, b) = (x.get(&[0, 2, c]), x.get(&[0, 5, c]));
        shuffled.set(&[0, 2, c], b);
        shuffled.set(&[0, 5, c], a);
    }
    let decode = |input: &Tensor| {
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let v = tape.constant(input.clone());
        let out = model.decode(&mut tape, &bound, v, &[6], None).unwrap();
        tape.value(out).clone()
    };
    assert_eq!(decode(&x), decode(&shuffled));
}

#[test]
fn recurrent_decoders_use_last_valid_state() {
    for kind in [DecoderKind::GruFc, DecoderKind::LstmFc] {
        let model = Stgnn::new(ModelConfig { decoder: kind, ..config(3, 6) }, 2).unwrap();
        let x = random_input(&[1, 6, 3], 8);
        let mut tail = x.clone();
        for c in 0..3 {
            tail.set(&[0, 5, c], 9.0);
        }
        let decode = |input: &Tensor, len: usize| {
            let mut tape = Tape::new();
            let bound = model.params().bind(&mut tape);
            let v = tape.constant(input.clone());
            let out = model.decode(&mut tape, &bound, v, &[len], None).unwrap();
            tape.value(out).clone()
        };
        assert_eq!(decode(&x, 5), decode(&tail, 5), "{kind}");
        assert_ne!(decode(&x, 6), decode(&tail, 6), "{kind}");
    }
}

#[test]
fn single_example_gives_one_row() {
    for decoder in [DecoderKind::Fc, DecoderKind::GruFc, DecoderKind::LstmFc] {
        for pooling in [Pooling::First, Pooling::Mean] {
            let cfg = ModelConfig { decoder, pooling, ..config(4, 8) };
            let model = Stgnn::new(cfg, 1).unwrap();
            for s in [1, 3, 8] {
                let logits = model.logits(&random_input(&[1, s, 4], 2), &[s]).unwrap();
                assert_eq!(logits.shape(), &[1, 3]);
            }
        }
    }
}

#[test]
fn empty_batch_is_a_contract_error() {
    let model = Stgnn::new(config(4, 6), 1).unwrap();
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let x = tape.constant(Tensor::zeros(&[1, 6, 4]));
    assert!(matches!(model.forward(&mut tape, &bound, x, &[], None), Err(Error::Contract { .. })));
}

#[test]
fn duplicated_example_gives_identical_rows() {
    let model = Stgnn::new(config(6, 5), 3).unwrap();
    let one = random_input(&[1, 5, 6], 4);
    let two = Tensor::new(vec![2, 5, 6], [one.data(), one.data()].concat()).unwrap();
    let logits = model.logits(&two, &[5, 5]).unwrap();
    assert_eq!(logits.data()[..3], logits.data()[3..]);
}

#[test]
fn zero_parameter_model_is_input_constant() {
    let mut model = Stgnn::new(config(5, 6), 3).unwrap();
    zero_params(&mut model);
    let a = model.logits(&random_input(&[2, 6, 5], 1), &[6, 3]).unwrap();
    let b = model.logits(&random_input(&[2, 6, 5], 2), &[4, 6]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn same_seed_same_model() {
    let a = Stgnn::new(config(6, 5), 42).unwrap();
    let b = Stgnn::new(config(6, 5), 42).unwrap();
    let c = Stgnn::new(config(6, 5), 43).unwrap();
    assert_eq!(a.params(), b.params());
    assert_ne!(a.params(), c.params());
}

#[test]
fn checkpoint_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.stgc");
    let model = Stgnn::new(ModelConfig { encoder: EncoderKind::Bilstm, ..config(4, 6) }, 5).unwrap();
    checkpoint::save(&path, &model, &serde_json::json!({"note": "x"})).unwrap();
    let (back, meta) = checkpoint::load(&path).unwrap();
    assert_eq!(meta["note"], "x");
    let x = random_input(&[2, 6, 4], 9);
    assert_eq!(model.logits(&x, &[6, 2]).unwrap(), back.logits(&x, &[6, 2]).unwrap());
}
