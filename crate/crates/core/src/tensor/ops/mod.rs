//! Differentiable operations recorded on a [`Tape`].
//!
//! Layout conventions: sequences are `[batch, channels, length]`, dense
//! activations are `[batch, features]`, and all buffers are row-major.

mod conv;
mod linalg;
mod loss;
mod norm;

pub use conv::{bias_add, conv1d, conv1d_transpose, conv_out_len, conv_transpose_out_len};
pub use linalg::{linear, matmul, matmul_nt, row_normalize, softmax_rows};
pub use loss::{hard_shrink_renorm, masked_cross_entropy, row_entropy, row_l2_norm, row_sum_squares};
pub use norm::{batch_norm_eval, batch_norm_train, BatchStats};

use super::{Tape, Var};
use crate::error::{Error, Result};

fn same_shape(tape: &Tape, op: &'static str, a: Var, b: Var) -> Result<()> {
    let (sa, sb) = (tape.shape(a), tape.shape(b));
    if sa != sb {
        let axis = sa.iter().zip(sb).position(|(x, y)| x != y);
        return Err(match axis {
            Some(i) => {
                Error::Dimension { op, axis: AXES.get(i).copied().unwrap_or("inner"), expected: sa[i], found: sb[i] }
            }
            None => Error::Rank { op, expected: sa.len(), found: sb.to_vec() },
        });
    }
    Ok(())
}

const AXES: [&str; 3] = ["batch", "channels", "length"];

pub(crate) fn expect_rank(tape: &Tape, op: &'static str, v: Var, rank: usize) -> Result<()> {
    if tape.shape(v).len() != rank {
        return Err(Error::Rank { op, expected: rank, found: tape.shape(v).to_vec() });
    }
    Ok(())
}

fn zip_map(tape: &mut Tape, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> (Vec<usize>, Vec<f64>) {
    let out = tape.value(a).iter().zip(tape.value(b)).map(|(&x, &y)| f(x, y)).collect();
    (tape.shape(a).to_vec(), out)
}

pub fn add(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    same_shape(tape, "add", a, b)?;
    let (shape, out) = zip_map(tape, a, b, |x, y| x + y);
    Ok(tape.push_op("add", shape, out, &[a, b], Box::new(|_, g| vec![Some(g.to_vec()), Some(g.to_vec())])))
}

pub fn sub(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    same_shape(tape, "sub", a, b)?;
    let (shape, out) = zip_map(tape, a, b, |x, y| x - y);
    Ok(tape.push_op(
        "sub",
        shape,
        out,
        &[a, b],
        Box::new(|_, g| vec![Some(g.to_vec()), Some(g.iter().map(|v| -v).collect())]),
    ))
}

pub fn mul(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    same_shape(tape, "mul", a, b)?;
    let (shape, out) = zip_map(tape, a, b, |x, y| x * y);
    Ok(tape.push_op(
        "mul",
        shape,
        out,
        &[a, b],
        Box::new(move |t, g| {
            let (va, vb) = (t.value(a), t.value(b));
            let ga = g.iter().zip(vb).map(|(g, y)| g * y).collect();
            let gb = g.iter().zip(va).map(|(g, x)| g * x).collect();
            vec![Some(ga), Some(gb)]
        }),
    ))
}

pub fn scale(tape: &mut Tape, a: Var, c: f64) -> Var {
    let out = tape.value(a).iter().map(|x| x * c).collect();
    let shape = tape.shape(a).to_vec();
    tape.push_op("scale", shape, out, &[a], Box::new(move |_, g| vec![Some(g.iter().map(|v| v * c).collect())]))
}

pub fn sum(tape: &mut Tape, a: Var) -> Var {
    let n = tape.value(a).len();
    let s = tape.value(a).iter().sum();
    tape.push_op("sum", vec![], vec![s], &[a], Box::new(move |_, g| vec![Some(vec![g[0]; n])]))
}

pub fn mean(tape: &mut Tape, a: Var) -> Var {
    let n = tape.value(a).len();
    let s = sum(tape, a);
    scale(tape, s, 1.0 / n as f64)
}

pub fn reshape(tape: &mut Tape, a: Var, shape: Vec<usize>) -> Result<Var> {
    let n = tape.value(a).len();
    if shape.iter().product::<usize>() != n {
        return Err(Error::Dimension { op: "reshape", axis: "numel", expected: n, found: shape.iter().product() });
    }
    let data = tape.value(a).to_vec();
    Ok(tape.push_op("reshape", shape, data, &[a], Box::new(|_, g| vec![Some(g.to_vec())])))
}

/// `x` where `x ≥ 0`, else `slope · x`. The derivative at 0 is taken as 1.
pub fn leaky_relu(tape: &mut Tape, a: Var, slope: f64) -> Result<Var> {
    if !(0.0..1.0).contains(&slope) {
        return Err(Error::invalid(format!("leaky_relu slope {slope} outside [0, 1)")));
    }
    let out = tape.value(a).iter().map(|&x| if x >= 0.0 { x } else { slope * x }).collect();
    let shape = tape.shape(a).to_vec();
    Ok(tape.push_op(
        "leaky_relu",
        shape,
        out,
        &[a],
        Box::new(move |t, g| {
            let gx = t.value(a).iter().zip(g).map(|(&x, &g)| if x >= 0.0 { g } else { slope * g }).collect();
            vec![Some(gx)]
        }),
    ))
}

pub fn tanh(tape: &mut Tape, a: Var) -> Var {
    let out: Vec<f64> = tape.value(a).iter().map(|x| x.tanh()).collect();
    let saved = out.clone();
    let shape = tape.shape(a).to_vec();
    tape.push_op(
        "tanh",
        shape,
        out,
        &[a],
        Box::new(move |_, g| vec![Some(g.iter().zip(&saved).map(|(g, y)| g * (1.0 - y * y)).collect())]),
    )
}

pub(crate) fn sigmoid_f(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus_f(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(tape: &mut Tape, a: Var) -> Var {
    let out: Vec<f64> = tape.value(a).iter().map(|&x| sigmoid_f(x)).collect();
    let saved = out.clone();
    let shape = tape.shape(a).to_vec();
    tape.push_op(
        "sigmoid",
        shape,
        out,
        &[a],
        Box::new(move |_, g| vec![Some(g.iter().zip(&saved).map(|(g, s)| g * s * (1.0 - s)).collect())]),
    )
}

/// `ln(1 + eˣ)`, evaluated without overflow.
pub fn softplus(tape: &mut Tape, a: Var) -> Var {
    let out = tape.value(a).iter().map(|&x| softplus_f(x)).collect();
    let shape = tape.shape(a).to_vec();
    tape.push_op(
        "softplus",
        shape,
        out,
        &[a],
        Box::new(move |t, g| vec![Some(t.value(a).iter().zip(g).map(|(&x, g)| g * sigmoid_f(x)).collect())]),
    )
}
