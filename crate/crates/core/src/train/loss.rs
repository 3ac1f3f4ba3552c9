use crate::error::Result;
use crate::tensor::{Tape, Var};

/// Mean cross-entropy plus `l2_weight · Σ‖θ‖²` over `params`.
pub fn loss(tape: &mut Tape, logits: Var, labels: &[usize], params: &[Var], l2_weight: f64) -> Result<Var> {
    let ce = tape.cross_entropy(logits, labels)?;
    if l2_weight == 0.0 || params.is_empty() {
        return Ok(ce);
    }
    let penalty = l2_penalty(tape, params)?;
    let penalty = tape.scale(penalty, l2_weight);
    tape.add(ce, penalty)
}

/// `Σ‖θ‖²` over `params`.
pub fn l2_penalty(tape: &mut Tape, params: &[Var]) -> Result<Var> {
    let mut total: Option<Var> = None;
    for &p in params {
        let sq = tape.mul(p, p)?;
        let s = tape.sum(sq);
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
    }
    Ok(total.expect("nonempty params"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::tensor::Tensor;

    #[test]
    fn uniform_logits_cost_ln3() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[4, 3]));
        let l = loss(&mut tape, z, &[0, 1, 2, 1], &[], 0.0).unwrap();
        assert!((tape.value(l).item() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_logits_cost_approaches_zero() {
        let mut prev = f64::INFINITY;
        for scale in [1.0, 10.0, 100.0] {
            let mut tape = Tape::new();
            let z = tape.constant(Tensor::from_rows(&[vec![scale, 0.0, 0.0], vec![0.0, 0.0, scale]]).unwrap());
            let lv = loss(&mut tape, z, &[0, 2], &[], 0.0).unwrap();
            let l = tape.value(lv).item();
            assert!(l < prev);
            prev = l;
        }
        assert!(prev < 1e-40);
    }

    #[test]
    fn l2_penalty_on_toy_params() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[1, 3]));
        let theta = tape.param(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let l = loss(&mut tape, z, &[0], &[theta], 2e-7).unwrap();
        let penalty = tape.value(l).item() - 3f64.ln();
        assert!((penalty - 1e-6).abs() < 1e-15);
        tape.backward(l).unwrap();
        // d/dθ of 2e-7·Σθ² is 4e-7·θ.
        let g = tape.grad(theta).unwrap();
        assert!((g[0] - 4e-7).abs() < 1e-18 && (g[1] - 8e-7).abs() < 1e-18);
    }

    #[test]
    fn label_out_of_range() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[1, 3]));
        assert!(matches!(loss(&mut tape, z, &[3], &[], 0.0), Err(Error::Contract { .. })));
    }
}
