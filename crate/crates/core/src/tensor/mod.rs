//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! The engine is a Wengert tape: forward operations evaluate eagerly and
//! record themselves on a [`Tape`]; [`Tape::backward`] replays the tape in
//! reverse, summing gradients at fan-out. One tape serves one
//! forward/backward pass — build a fresh tape per sample, harvest gradients
//! into [`Param`] buffers, and let the optimizer consume them.
//!
//! Everything is 64-bit; shapes are row-major `Vec<usize>`.

mod adam;
mod gradcheck;
mod tape;

pub use adam::{clip_grad_norm, AdamState};
pub use gradcheck::{finite_difference_check, FdReport};
pub use tape::{Op, Tape, Tensor, TensorId};

/// Guard used wherever a denominator could degenerate (norms, degrees).
pub const EPS: f64 = 1e-12;

/// A named trainable tensor with a persistent gradient accumulator.
///
/// Gradients accumulate across [`Tape::harvest_grads`] calls until an
/// optimizer step zeroes them.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "param shape/value length mismatch"
        );
        let n = values.len();
        Param {
            name: name.into(),
            shape,
            values,
            grad: vec![0.0; n],
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Param::new(name, shape, vec![0.0; n])
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Cosine similarity of two equal-length vectors.
///
/// Returns 0 when either norm falls below [`EPS`]: a zero vector carries no
/// evidence of similarity.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let nu = nu.sqrt();
    let nv = nv.sqrt();
    if nu < EPS || nv < EPS {
        return 0.0;
    }
    dot / (nu * nv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_self_similarity() {
        assert!((cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_orthogonal() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn cosine_zero_vector_convention() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in proptest::collection::vec(-10.0f64..10.0, 4),
            v in proptest::collection::vec(-10.0f64..10.0, 4),
            s in 0.1f64..100.0,
        ) {
            let c1 = cosine_similarity(&u, &v);
            let c2 = cosine_similarity(&v, &u);
            prop_assert!((c1 - c2).abs() < 1e-12);
            let us: Vec<f64> = u.iter().map(|x| x * s).collect();
            let c3 = cosine_similarity(&us, &v);
            prop_assert!((c1 - c3).abs() < 1e-9);
            prop_assert!(c1.abs() <= 1.0 + 1e-12);
        }
    }
}
