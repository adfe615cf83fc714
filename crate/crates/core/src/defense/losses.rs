//! The three defense losses on the tape, plus plain-value helpers.
//!
//! - adversarial: the softmax probability of a suspect sample's stored
//!   label; minimizing it unlearns the backdoor mapping.
//! - natural: cross-entropy of the masked logits.
//! - smooth: L2 distance between masked and unmasked logits; gradients flow
//!   through both branches.

use crate::error::Result;
use crate::tensor::{Tape, TensorId};

/// `softmax(logits[row])[label]` on the tape.
pub fn loss_adv(tape: &mut Tape, logits: TensorId, row: usize, label: usize) -> Result<TensorId> {
    tape.softmax_prob(logits, row, label)
}

/// `CE(masked, y) + lambda * ||masked - unmasked||_2` on the tape.
pub fn loss_clean(
    tape: &mut Tape,
    masked_logits: TensorId,
    unmasked_logits: TensorId,
    pairs: &[(usize, usize)],
    lambda: f64,
) -> Result<TensorId> {
    let ce = tape.softmax_cross_entropy(masked_logits, pairs)?;
    if lambda == 0.0 {
        return Ok(ce);
    }
    let diff = tape.sub(masked_logits, unmasked_logits)?;
    let smooth = tape.l2_norm(diff);
    let weighted = tape.scale(smooth, lambda);
    tape.add(ce, weighted)
}

/// Plain-value adversarial loss for logging.
pub fn loss_adv_value(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps[label] / sum
}

/// Plain-value clean loss for logging.
pub fn loss_clean_value(masked: &[f64], unmasked: &[f64], label: usize, lambda: f64) -> f64 {
    let m = masked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = masked.iter().map(|&x| (x - m).exp()).sum::<f64>().ln() + m;
    let ce = lse - masked[label];
    let l2: f64 = masked
        .iter()
        .zip(unmasked)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    ce + lambda * l2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adv_loss_trivials() {
        // uniform logits, 2 classes -> 0.5
        assert!((loss_adv_value(&[0.3, 0.3], 0) - 0.5).abs() < 1e-12);
        // saturated on y -> ~1
        assert!(loss_adv_value(&[100.0, 0.0], 0) > 0.999);
    }

    #[test]
    fn one_adversarial_step_reduces_probability() {
        // frozen toy: logits = w (2 params), loss = p(w)[0]; one descent
        // step must lower p[0].
        use crate::tensor::Param;
        let mut w = Param::new("w", vec![1, 2], vec![0.2, -0.1]);
        let before = loss_adv_value(&w.values, 0);
        let mut tape = Tape::new();
        let wid = tape.param(0, &w);
        let l = loss_adv(&mut tape, wid, 0, 0).unwrap();
        tape.backward(l).unwrap();
        let mut params = vec![w.clone()];
        tape.harvest_grads(&mut params);
        for i in 0..2 {
            w.values[i] = params[0].values[i] - 0.1 * params[0].grad[i];
        }
        let after = loss_adv_value(&w.values, 0);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn clean_loss_reduces_to_ce_under_equal_logits_or_zero_lambda() {
        let mut tape = Tape::new();
        let a = tape.input(vec![0.4, -0.4], vec![1, 2]);
        let b = tape.input(vec![0.4, -0.4], vec![1, 2]);
        let l = loss_clean(&mut tape, a, b, &[(0, 1)], 5.0).unwrap();
        let ce = tape.softmax_cross_entropy(a, &[(0, 1)]).unwrap();
        assert!((tape.scalar(l) - tape.scalar(ce)).abs() < 1e-12);

        let mut tape2 = Tape::new();
        let a2 = tape2.input(vec![0.4, -0.4], vec![1, 2]);
        let b2 = tape2.input(vec![9.0, -9.0], vec![1, 2]);
        let l0 = loss_clean(&mut tape2, a2, b2, &[(0, 1)], 0.0).unwrap();
        let ce2 = tape2.softmax_cross_entropy(a2, &[(0, 1)]).unwrap();
        assert_eq!(tape2.scalar(l0), tape2.scalar(ce2));
    }

    #[test]
    fn clean_loss_value_matches_tape() {
        let masked = [0.7, -0.2, 0.1];
        let unmasked = [0.5, 0.3, -0.1];
        let mut tape = Tape::new();
        let a = tape.input(masked.to_vec(), vec![1, 3]);
        let b = tape.input(unmasked.to_vec(), vec![1, 3]);
        let l = loss_clean(&mut tape, a, b, &[(0, 2)], 5.0).unwrap();
        let direct = loss_clean_value(&masked, &unmasked, 2, 5.0);
        assert!((tape.scalar(l) - direct).abs() < 1e-12);
    }
}
