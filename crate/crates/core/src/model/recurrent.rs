//! GRU and LSTM cells recorded on the tape.

use super::params::{Bound, ParamId, ParamStore};
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Gru,
    Lstm,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }
}

#[derive(Clone, Debug)]
struct Gate {
    w_in: ParamId,
    w_hid: ParamId,
    bias: ParamId,
}

/// Tape handles of one gate: input weights `[in, hid]`, recurrent weights
/// `[hid, hid]`, and bias `[hid]`.
#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    pub w_in: Var,
    pub w_hid: Var,
    pub bias: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct CellState {
    pub h: Var,
    pub c: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct RecurrentCell {
    kind: CellKind,
    input_dim: usize,
    hidden_dim: usize,
    gates: Vec<Gate>,
}

impl RecurrentCell {
    /// Gate order: GRU `r, z, n`; LSTM `i, f, g, o`.
    pub fn new(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        prefix: &str,
        store: &mut ParamStore,
        rng: &mut Rng,
    ) -> Self {
        let names: &[&str] = match kind {
            CellKind::Gru => &["r", "z", "n"],
            CellKind::Lstm => &["i", "f", "g", "o"],
        };
        let limit = 1.0 / (hidden_dim as f64).sqrt();
        let gates = names
            .iter()
            .map(|g| Gate {
                w_in: store.uniform(format!("{prefix}.w_i{g}"), &[input_dim, hidden_dim], limit, rng),
                w_hid: store.uniform(format!("{prefix}.w_h{g}"), &[hidden_dim, hidden_dim], limit, rng),
                bias: store.zeros(format!("{prefix}.b_{g}"), &[hidden_dim]),
            })
            .collect();
        RecurrentCell {
            kind,
            input_dim,
            hidden_dim,
            gates,
        }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn gate_vars(&self, bound: &Bound) -> Vec<GateVars> {
        self.gates
            .iter()
            .map(|g| GateVars {
                w_in: bound[g.w_in],
                w_hid: bound[g.w_hid],
                bias: bound[g.bias],
            })
            .collect()
    }

    pub fn zero_state(&self, tape: &mut Tape, batch: usize) -> CellState {
        zero_state(tape, self.kind, batch, self.hidden_dim)
    }

    /// Runs over `inputs` (each `[b, input_dim]`), returning every hidden
    /// state in input order. With `reverse` the scan starts at the end.
    pub fn scan(&self, tape: &mut Tape, bound: &Bound, inputs: &[Var], reverse: bool) -> Result<Vec<Var>> {
        let gates = self.gate_vars(bound);
        let batch = tape.shape(inputs[0])[0];
        let mut state = self.zero_state(tape, batch);
        let mut outs = vec![state.h; inputs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..inputs.len()).rev())
        } else {
            Box::new(0..inputs.len())
        };
        for t in order {
            state = step(tape, self.kind, &gates, inputs[t], state)?;
            outs[t] = state.h;
        }
        Ok(outs)
    }
}

pub fn zero_state(tape: &mut Tape, kind: CellKind, batch: usize, hidden: usize) -> CellState {
    let h = tape.constant(Tensor::zeros(&[batch, hidden]));
    let c = (kind == CellKind::Lstm).then(|| tape.constant(Tensor::zeros(&[batch, hidden])));
    CellState { h, c }
}

fn preact(tape: &mut Tape, g: &GateVars, x: Var, h: Var) -> Result<Var> {
    let xi = tape.matmul(x, g.w_in)?;
    let hh = tape.matmul(h, g.w_hid)?;
    let s = tape.add(xi, hh)?;
    tape.add_bias(s, g.bias)
}

/// One recurrence step. `gates` must hold 3 (GRU) or 4 (LSTM) entries.
pub fn step(tape: &mut Tape, kind: CellKind, gates: &[GateVars], x: Var, state: CellState) -> Result<CellState> {
    debug_assert_eq!(gates.len(), kind.gates());
    match kind {
        CellKind::Gru => {
            let r = preact(tape, &gates[0], x, state.h)?;
            let r = tape.sigmoid(r);
            let z = preact(tape, &gates[1], x, state.h)?;
            let z = tape.sigmoid(z);
            // n = tanh(x·W_in + b_n + r ⊙ (h·W_hn))
            let xn = tape.matmul(x, gates[2].w_in)?;
            let xn = tape.add_bias(xn, gates[2].bias)?;
            let hn = tape.matmul(state.h, gates[2].w_hid)?;
            let gated = tape.mul(r, hn)?;
            let n = tape.add(xn, gated)?;
            let n = tape.tanh(n);
            // h' = (1 - z) ⊙ n + z ⊙ h = n + z ⊙ (h - n)
            let diff = tape.sub(state.h, n)?;
            let zd = tape.mul(z, diff)?;
            Ok(CellState {
                h: tape.add(n, zd)?,
                c: None,
            })
        }
        CellKind::Lstm => {
            let c_prev = state.c.expect("LSTM state carries a cell");
            let i = preact(tape, &gates[0], x, state.h)?;
            let i = tape.sigmoid(i);
            let f = preact(tape, &gates[1], x, state.h)?;
            let f = tape.sigmoid(f);
            let g = preact(tape, &gates[2], x, state.h)?;
            let g = tape.tanh(g);
            let o = preact(tape, &gates[3], x, state.h)?;
            let o = tape.sigmoid(o);
            let keep = tape.mul(f, c_prev)?;
            let write = tape.mul(i, g)?;
            let c = tape.add(keep, write)?;
            let tc = tape.tanh(c);
            Ok(CellState {
                h: tape.mul(o, tc)?,
                c: Some(c),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_keep_zero_state() {
        for kind in [CellKind::Gru, CellKind::Lstm] {
            let mut store = ParamStore::new();
            let cell = RecurrentCell::new(kind, 3, 4, "c", &mut store, &mut Rng::new(1));
            store.values_mut().iter_mut().for_each(|v| v.data_mut().fill(0.0));
            let mut tape = Tape::new();
            let bound = store.bind(&mut tape);
            let xs: Vec<Var> = (0..5).map(|_| tape.constant(Tensor::full(&[2, 3], 0.7))).collect();
            let hs = cell.scan(&mut tape, &bound, &xs, false).unwrap();
            for h in hs {
                assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn gru_matches_hand_computed_step() {
        // Scalar GRU with every weight 0.5 and zero bias, from h = 0:
        // r = z = σ(0.5x), n = tanh(0.5x), h' = (1 - z)·n.
        let mut store = ParamStore::new();
        let cell = RecurrentCell::new(CellKind::Gru, 1, 1, "g", &mut store, &mut Rng::new(0));
        for (name, v) in store.names().to_vec().iter().zip(store.values_mut()) {
            let fill = if name.contains(".b_") { 0.0 } else { 0.5 };
            v.data_mut().fill(fill);
        }
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let x = tape.constant(Tensor::full(&[1, 1], 2.0));
        let h = cell.scan(&mut tape, &bound, &[x], false).unwrap()[0];
        let z = 1.0 / (1.0 + (-1.0f64).exp());
        let expect = (1.0 - z) * 1.0f64.tanh();
        assert!((tape.value(h).item() - expect).abs() < 1e-15);
    }
}
