use super::expect_rank;
use crate::error::{Error, Result};
use crate::tensor::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::{Tape, Var};

fn dims2(tape: &Tape, op: &'static str, v: Var) -> Result<(usize, usize)> {
    expect_rank(tape, op, v, 2)?;
    Ok((tape.shape(v)[0], tape.shape(v)[1]))
}

/// `input [batch, in] · weightᵀ + bias`, with `weight [out, in]` and `bias [out]`.
pub fn linear(tape: &mut Tape, input: Var, weight: Var, bias: Var) -> Result<Var> {
    let (b, n_in) = dims2(tape, "linear", input)?;
    let (n_out, w_in) = dims2(tape, "linear", weight)?;
    if w_in != n_in {
        return Err(Error::Dimension { op: "linear", axis: "in_features", expected: w_in, found: n_in });
    }
    if tape.value(bias).len() != n_out {
        return Err(Error::Dimension {
            op: "linear",
            axis: "out_features",
            expected: n_out,
            found: tape.value(bias).len(),
        });
    }
    let mut out = vec![0.0; b * n_out];
    gemm_nt(b, n_in, n_out, tape.value(input), tape.value(weight), &mut out, false);
    let bv = tape.value(bias);
    for row in out.chunks_mut(n_out) {
        row.iter_mut().zip(bv).for_each(|(o, b)| *o += b);
    }
    Ok(tape.push_op(
        "linear",
        vec![b, n_out],
        out,
        &[input, weight, bias],
        Box::new(move |t, g| {
            let gx = t.requires_grad(input).then(|| {
                let mut gx = vec![0.0; b * n_in];
                gemm_nn(b, n_out, n_in, g, t.value(weight), &mut gx, false);
                gx
            });
            let gw = t.requires_grad(weight).then(|| {
                let mut gw = vec![0.0; n_out * n_in];
                gemm_tn(n_out, b, n_in, g, t.value(input), &mut gw, false);
                gw
            });
            let gb = t.requires_grad(bias).then(|| {
                let mut gb = vec![0.0; n_out];
                for row in g.chunks(n_out) {
                    gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                gb
            });
            vec![gx, gw, gb]
        }),
    ))
}

/// `a [m, k] · b [k, n]`.
pub fn matmul(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (m, k) = dims2(tape, "matmul", a)?;
    let (kb, n) = dims2(tape, "matmul", b)?;
    if kb != k {
        return Err(Error::Dimension { op: "matmul", axis: "inner", expected: k, found: kb });
    }
    let mut out = vec![0.0; m * n];
    gemm_nn(m, k, n, tape.value(a), tape.value(b), &mut out, false);
    Ok(tape.push_op(
        "matmul",
        vec![m, n],
        out,
        &[a, b],
        Box::new(move |t, g| {
            let ga = t.requires_grad(a).then(|| {
                let mut ga = vec![0.0; m * k];
                gemm_nt(m, n, k, g, t.value(b), &mut ga, false);
                ga
            });
            let gb = t.requires_grad(b).then(|| {
                let mut gb = vec![0.0; k * n];
                gemm_tn(k, m, n, t.value(a), g, &mut gb, false);
                gb
            });
            vec![ga, gb]
        }),
    ))
}

/// `a [m, k] · b [n, k]ᵀ`.
pub fn matmul_nt(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (m, k) = dims2(tape, "matmul_nt", a)?;
    let (n, kb) = dims2(tape, "matmul_nt", b)?;
    if kb != k {
        return Err(Error::Dimension { op: "matmul_nt", axis: "inner", expected: k, found: kb });
    }
    let mut out = vec![0.0; m * n];
    gemm_nt(m, k, n, tape.value(a), tape.value(b), &mut out, false);
    Ok(tape.push_op(
        "matmul_nt",
        vec![m, n],
        out,
        &[a, b],
        Box::new(move |t, g| {
            let ga = t.requires_grad(a).then(|| {
                let mut ga = vec![0.0; m * k];
                gemm_nn(m, n, k, g, t.value(b), &mut ga, false);
                ga
            });
            let gb = t.requires_grad(b).then(|| {
                let mut gb = vec![0.0; n * k];
                gemm_tn(n, m, k, g, t.value(a), &mut gb, false);
                gb
            });
            vec![ga, gb]
        }),
    ))
}

/// Scales every row of `[rows, dim]` to unit Euclidean norm. A zero row is
/// an error: its direction is undefined.
pub fn row_normalize(tape: &mut Tape, x: Var) -> Result<Var> {
    let (rows, dim) = dims2(tape, "row_normalize", x)?;
    let xv = tape.value(x);
    let norms: Vec<f64> = xv.chunks(dim).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| n < 1e-12) {
        return Err(Error::invalid(format!("row_normalize: row {i} is the zero vector")));
    }
    let out: Vec<f64> = xv.chunks(dim).zip(&norms).flat_map(|(r, n)| r.iter().map(move |v| v / n)).collect();
    let y = out.clone();
    Ok(tape.push_op(
        "row_normalize",
        vec![rows, dim],
        out,
        &[x],
        Box::new(move |_, g| {
            let mut gx = vec![0.0; rows * dim];
            for r in 0..rows {
                let (yr, gr) = (&y[r * dim..(r + 1) * dim], &g[r * dim..(r + 1) * dim]);
                let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for i in 0..dim {
                    gx[r * dim + i] = (gr[i] - yr[i] * dot) / norms[r];
                }
            }
            vec![Some(gx)]
        }),
    ))
}

/// Numerically stable softmax along the last axis of `[rows, n]`.
pub fn softmax_rows(tape: &mut Tape, x: Var) -> Result<Var> {
    let (rows, n) = dims2(tape, "softmax_rows", x)?;
    let mut out = tape.value(x).to_vec();
    for row in out.chunks_mut(n) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    let y = out.clone();
    Ok(tape.push_op(
        "softmax_rows",
        vec![rows, n],
        out,
        &[x],
        Box::new(move |_, g| {
            let mut gx = vec![0.0; rows * n];
            for r in 0..rows {
                let (yr, gr) = (&y[r * n..(r + 1) * n], &g[r * n..(r + 1) * n]);
                let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    gx[r * n + i] = yr[i] * (gr[i] - dot);
                }
            }
            vec![Some(gx)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn linear_identity_and_scalar_case() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap());
        let mut eye = vec![0.0; 9];
        (0..3).for_each(|i| eye[i * 4] = 1.0);
        let w = tape.constant(Tensor::new(vec![3, 3], eye).unwrap());
        let b = tape.constant(Tensor::zeros(vec![3]));
        let y = linear(&mut tape, x, w, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let x1 = tape.constant(Tensor::new(vec![1, 1], vec![5.0]).unwrap());
        let w1 = tape.constant(Tensor::new(vec![1, 1], vec![3.0]).unwrap());
        let b1 = tape.constant(Tensor::new(vec![1], vec![2.0]).unwrap());
        let y1 = linear(&mut tape, x1, w1, b1).unwrap();
        assert_eq!(tape.value(y1), &[17.0]);
    }

    #[test]
    fn linear_rejects_inner_mismatch() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(vec![2, 3]));
        let w = tape.constant(Tensor::zeros(vec![4, 2]));
        let b = tape.constant(Tensor::zeros(vec![4]));
        assert!(matches!(linear(&mut tape, x, w, b), Err(Error::Dimension { axis: "in_features", .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 3], vec![1000.0, 0.0, -5.0, 0.1, 0.2, 0.3]).unwrap());
        let y = softmax_rows(&mut tape, x).unwrap();
        for row in tape.value(y).chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_row_cannot_be_normalized() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(row_normalize(&mut tape, x).is_err());
    }
}
