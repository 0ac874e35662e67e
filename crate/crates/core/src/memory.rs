//! Prototype memory placed between encoder and decoder.
//!
//! A query `z` addresses the bank `Ω [slots, dim]` through a softmax over
//! cosine similarities; the retrieved latent is the weighted sum of the
//! prototypes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::ops;
use crate::tensor::{Tape, Tensor, Var};

/// Rows with a smaller norm are re-drawn after an optimizer step.
pub const MIN_ROW_NORM: f64 = 1e-8;
pub const DEFAULT_SPARSITY_WEIGHT: f64 = 0.0002;

/// Cosine-softmax addressing weights `[batch, slots]`. With `shrink`, entries
/// below `1/slots` are zeroed and each row renormalized.
pub fn address(tape: &mut Tape, z: Var, omega: Var, shrink: bool) -> Result<Var> {
    let zn = ops::row_normalize(tape, z)?;
    let on = ops::row_normalize(tape, omega)?;
    let cos = ops::matmul_nt(tape, zn, on)?;
    let w = ops::softmax_rows(tape, cos)?;
    if shrink {
        let slots = tape.shape(omega)[0];
        return ops::hard_shrink_renorm(tape, w, 1.0 / slots as f64);
    }
    Ok(w)
}

/// `ẑ = w · Ω`, one convex combination of prototypes per row.
pub fn retrieve(tape: &mut Tape, w: Var, omega: Var) -> Result<Var> {
    ops::matmul(tape, w, omega)
}

/// Mean row entropy of the addressing weights.
pub fn sparsity_loss(tape: &mut Tape, w: Var) -> Result<Var> {
    let e = ops::row_entropy(tape, w)?;
    Ok(ops::mean(tape, e))
}

/// Draws a bank with i.i.d. `U(−1/√dim, 1/√dim)` entries.
pub fn init_bank<R: Rng + ?Sized>(slots: usize, dim: usize, rng: &mut R) -> Tensor {
    let b = 1.0 / (dim as f64).sqrt();
    let mut t = Tensor::uniform(vec![slots, dim], -b, b, rng);
    repair_rows(&mut t, rng);
    t
}

/// Re-draws every row whose norm fell below [`MIN_ROW_NORM`]. Returns the
/// number of rows replaced.
pub fn repair_rows<R: Rng + ?Sized>(omega: &mut Tensor, rng: &mut R) -> usize {
    let dim = omega.shape()[1];
    let b = 1.0 / (dim as f64).sqrt();
    let mut replaced = 0;
    for row in omega.data_mut().chunks_mut(dim) {
        while row.iter().map(|v| v * v).sum::<f64>().sqrt() < MIN_ROW_NORM {
            row.iter_mut().for_each(|v| *v = rng.gen_range(-b..b));
            replaced += 1;
        }
    }
    replaced
}

/// Non-differentiable view of a bank for inspection and tests.
#[derive(Clone, Debug)]
pub struct MemoryBank {
    omega: Tensor,
    shrink: bool,
}

impl MemoryBank {
    pub fn new(omega: Tensor, shrink: bool) -> Result<Self> {
        if omega.rank() != 2 {
            return Err(Error::Rank { op: "memory", expected: 2, found: omega.shape().to_vec() });
        }
        Ok(MemoryBank { omega, shrink })
    }

    pub fn slots(&self) -> usize {
        self.omega.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.omega.shape()[1]
    }

    pub fn omega(&self) -> &Tensor {
        &self.omega
    }

    /// Addressing weights of a single query.
    pub fn weights(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let zv = tape.constant_from(vec![1, z.len()], z.to_vec())?;
        let o = tape.constant(self.omega.clone());
        let w = address(&mut tape, zv, o, self.shrink)?;
        Ok(tape.value(w).to_vec())
    }

    pub fn retrieve(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let wv = tape.constant_from(vec![1, w.len()], w.to_vec())?;
        let o = tape.constant(self.omega.clone());
        let z = retrieve(&mut tape, wv, o)?;
        Ok(tape.value(z).to_vec())
    }
}
