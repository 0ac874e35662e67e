// 1-D convolution (cross-correlation, no kernel flip) and its adjoint,
// both lowered to im2col + GEMM.

use super::expect_rank;
use crate::error::{Error, Result};
use crate::tensor::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::{Tape, Var};

/// Output length of a strided, zero-padded convolution.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || kernel > len + 2 * padding {
        return None;
    }
    Some((len + 2 * padding - kernel) / stride + 1)
}

/// Output length of a transposed convolution.
pub fn conv_transpose_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || len == 0 {
        return None;
    }
    ((len - 1) * stride + kernel).checked_sub(2 * padding).filter(|&n| n > 0)
}

// col[(c*k + kk) * positions + t] = src[c, t*stride + kk - padding]
#[allow(clippy::too_many_arguments)]
fn im2col(
    src: &[f64],
    channels: usize,
    len: usize,
    k: usize,
    stride: usize,
    padding: usize,
    positions: usize,
    col: &mut [f64],
) {
    for c in 0..channels {
        let row_src = &src[c * len..(c + 1) * len];
        for kk in 0..k {
            let row = &mut col[(c * k + kk) * positions..(c * k + kk + 1) * positions];
            for (t, slot) in row.iter_mut().enumerate() {
                let pos = (t * stride + kk) as isize - padding as isize;
                *slot = if pos >= 0 && (pos as usize) < len { row_src[pos as usize] } else { 0.0 };
            }
        }
    }
}

// Adjoint of `im2col`: scatter-add columns back into `dst`.
#[allow(clippy::too_many_arguments)]
fn col2im(
    col: &[f64],
    channels: usize,
    len: usize,
    k: usize,
    stride: usize,
    padding: usize,
    positions: usize,
    dst: &mut [f64],
) {
    for c in 0..channels {
        let row_dst = &mut dst[c * len..(c + 1) * len];
        for kk in 0..k {
            let row = &col[(c * k + kk) * positions..(c * k + kk + 1) * positions];
            for (t, &v) in row.iter().enumerate() {
                let pos = (t * stride + kk) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < len {
                    row_dst[pos as usize] += v;
                }
            }
        }
    }
}

/// `input [batch, c_in, len]` ⋆ `kernel [c_out, c_in, k]` → `[batch, c_out, len_out]`.
pub fn conv1d(tape: &mut Tape, input: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
    expect_rank(tape, "conv1d", input, 3)?;
    expect_rank(tape, "conv1d", kernel, 3)?;
    let (b, c_in, len) = (tape.shape(input)[0], tape.shape(input)[1], tape.shape(input)[2]);
    let (c_out, kc, k) = (tape.shape(kernel)[0], tape.shape(kernel)[1], tape.shape(kernel)[2]);
    if kc != c_in {
        return Err(Error::Dimension { op: "conv1d", axis: "channels", expected: kc, found: c_in });
    }
    if stride == 0 {
        return Err(Error::invalid("conv1d stride must be >= 1"));
    }
    let len_out = conv_out_len(len, k, stride, padding).ok_or(Error::Dimension {
        op: "conv1d",
        axis: "length",
        expected: k,
        found: len + 2 * padding,
    })?;

    let ck = c_in * k;
    let mut cols = vec![0.0; b * ck * len_out];
    let mut out = vec![0.0; b * c_out * len_out];
    {
        let x = tape.value(input);
        let w = tape.value(kernel);
        for bi in 0..b {
            let col = &mut cols[bi * ck * len_out..(bi + 1) * ck * len_out];
            im2col(&x[bi * c_in * len..(bi + 1) * c_in * len], c_in, len, k, stride, padding, len_out, col);
            gemm_nn(c_out, ck, len_out, w, col, &mut out[bi * c_out * len_out..(bi + 1) * c_out * len_out], false);
        }
    }

    Ok(tape.push_op(
        "conv1d",
        vec![b, c_out, len_out],
        out,
        &[input, kernel],
        Box::new(move |t, g| {
            let w = t.value(kernel);
            let gx = t.requires_grad(input).then(|| {
                let mut gx = vec![0.0; b * c_in * len];
                let mut dcol = vec![0.0; ck * len_out];
                for bi in 0..b {
                    let gb = &g[bi * c_out * len_out..(bi + 1) * c_out * len_out];
                    gemm_tn(ck, c_out, len_out, w, gb, &mut dcol, false);
                    col2im(
                        &dcol,
                        c_in,
                        len,
                        k,
                        stride,
                        padding,
                        len_out,
                        &mut gx[bi * c_in * len..(bi + 1) * c_in * len],
                    );
                }
                gx
            });
            let gw = t.requires_grad(kernel).then(|| {
                let mut gw = vec![0.0; c_out * ck];
                for bi in 0..b {
                    let gb = &g[bi * c_out * len_out..(bi + 1) * c_out * len_out];
                    let col = &cols[bi * ck * len_out..(bi + 1) * ck * len_out];
                    gemm_nt(c_out, len_out, ck, gb, col, &mut gw, true);
                }
                gw
            });
            vec![gx, gw]
        }),
    ))
}

/// Transposed convolution: the adjoint of [`conv1d`] in its input.
/// `input [batch, c_in, len]`, `kernel [c_in, c_out, k]` → `[batch, c_out, (len-1)·stride − 2·padding + k]`.
pub fn conv1d_transpose(tape: &mut Tape, input: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
    expect_rank(tape, "conv1d_transpose", input, 3)?;
    expect_rank(tape, "conv1d_transpose", kernel, 3)?;
    let (b, c_in, len) = (tape.shape(input)[0], tape.shape(input)[1], tape.shape(input)[2]);
    let (kc, c_out, k) = (tape.shape(kernel)[0], tape.shape(kernel)[1], tape.shape(kernel)[2]);
    if kc != c_in {
        return Err(Error::Dimension { op: "conv1d_transpose", axis: "channels", expected: kc, found: c_in });
    }
    if stride == 0 {
        return Err(Error::invalid("conv1d_transpose stride must be >= 1"));
    }
    let len_out = conv_transpose_out_len(len, k, stride, padding).ok_or(Error::Dimension {
        op: "conv1d_transpose",
        axis: "length",
        expected: 2 * padding + 1,
        found: (len.max(1) - 1) * stride + k,
    })?;

    let ck = c_out * k;
    let mut out = vec![0.0; b * c_out * len_out];
    {
        let x = tape.value(input);
        let w = tape.value(kernel);
        let mut col = vec![0.0; ck * len];
        for bi in 0..b {
            gemm_tn(ck, c_in, len, w, &x[bi * c_in * len..(bi + 1) * c_in * len], &mut col, false);
            col2im(
                &col,
                c_out,
                len_out,
                k,
                stride,
                padding,
                len,
                &mut out[bi * c_out * len_out..(bi + 1) * c_out * len_out],
            );
        }
    }

    Ok(tape.push_op(
        "conv1d_transpose",
        vec![b, c_out, len_out],
        out,
        &[input, kernel],
        Box::new(move |t, g| {
            let x = t.value(input);
            let w = t.value(kernel);
            let mut gx = t.requires_grad(input).then(|| vec![0.0; b * c_in * len]);
            let mut gw = t.requires_grad(kernel).then(|| vec![0.0; c_in * ck]);
            let mut dcol = vec![0.0; ck * len];
            for bi in 0..b {
                im2col(
                    &g[bi * c_out * len_out..(bi + 1) * c_out * len_out],
                    c_out,
                    len_out,
                    k,
                    stride,
                    padding,
                    len,
                    &mut dcol,
                );
                if let Some(gx) = gx.as_mut() {
                    gemm_nn(c_in, ck, len, w, &dcol, &mut gx[bi * c_in * len..(bi + 1) * c_in * len], false);
                }
                if let Some(gw) = gw.as_mut() {
                    gemm_nt(c_in, len, ck, &x[bi * c_in * len..(bi + 1) * c_in * len], &dcol, gw, true);
                }
            }
            vec![gx, gw]
        }),
    ))
}

/// Adds a per-channel bias to `[batch, channels, len]` or `[batch, channels]`.
pub fn bias_add(tape: &mut Tape, input: Var, bias: Var) -> Result<Var> {
    let shape = tape.shape(input).to_vec();
    if shape.len() != 2 && shape.len() != 3 {
        return Err(Error::Rank { op: "bias_add", expected: 3, found: shape });
    }
    let (b, c) = (shape[0], shape[1]);
    let len = shape.get(2).copied().unwrap_or(1);
    if tape.value(bias).len() != c {
        return Err(Error::Dimension { op: "bias_add", axis: "channels", expected: c, found: tape.value(bias).len() });
    }
    let mut out = tape.value(input).to_vec();
    {
        let bv = tape.value(bias);
        for bi in 0..b {
            for ci in 0..c {
                out[(bi * c + ci) * len..(bi * c + ci + 1) * len].iter_mut().for_each(|v| *v += bv[ci]);
            }
        }
    }
    Ok(tape.push_op(
        "bias_add",
        shape,
        out,
        &[input, bias],
        Box::new(move |_, g| {
            let mut gb = vec![0.0; c];
            for bi in 0..b {
                for (ci, slot) in gb.iter_mut().enumerate() {
                    *slot += g[(bi * c + ci) * len..(bi * c + ci + 1) * len].iter().sum::<f64>();
                }
            }
            vec![Some(g.to_vec()), Some(gb)]
        }),
    ))
}
