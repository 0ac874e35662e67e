// Per-channel batch normalization over `[batch, channels, len]` (or `[batch, channels]`).

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// Batch statistics observed by a training-mode forward pass. `var` is the
/// biased (population) variance used for normalization.
#[derive(Clone, Debug)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

fn dims(tape: &Tape, op: &'static str, x: Var) -> Result<(usize, usize, usize)> {
    let s = tape.shape(x);
    match s.len() {
        2 => Ok((s[0], s[1], 1)),
        3 => Ok((s[0], s[1], s[2])),
        _ => Err(Error::Rank { op, expected: 3, found: s.to_vec() }),
    }
}

fn check_affine(tape: &Tape, op: &'static str, c: usize, gamma: Var, beta: Var) -> Result<()> {
    for v in [gamma, beta] {
        if tape.value(v).len() != c {
            return Err(Error::Dimension { op, axis: "channels", expected: c, found: tape.value(v).len() });
        }
    }
    Ok(())
}

/// Normalizes each channel with the statistics of the current batch, then
/// applies `gamma · x̂ + beta`.
pub fn batch_norm_train(tape: &mut Tape, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BatchStats)> {
    let (b, c, len) = dims(tape, "batch_norm", x)?;
    if b < 2 {
        return Err(Error::invalid("batch_norm in training mode needs a batch of at least 2"));
    }
    check_affine(tape, "batch_norm", c, gamma, beta)?;
    let n = (b * len) as f64;
    let xv = tape.value(x);
    let (gv, bv) = (tape.value(gamma), tape.value(beta));

    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for bi in 0..b {
        for ci in 0..c {
            mean[ci] += xv[(bi * c + ci) * len..(bi * c + ci + 1) * len].iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for bi in 0..b {
        for ci in 0..c {
            var[ci] +=
                xv[(bi * c + ci) * len..(bi * c + ci + 1) * len].iter().map(|v| (v - mean[ci]).powi(2)).sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let mut xhat = vec![0.0; xv.len()];
    let mut out = vec![0.0; xv.len()];
    for bi in 0..b {
        for ci in 0..c {
            let r = (bi * c + ci) * len..(bi * c + ci + 1) * len;
            for i in r {
                xhat[i] = (xv[i] - mean[ci]) * inv_std[ci];
                out[i] = gv[ci] * xhat[i] + bv[ci];
            }
        }
    }

    let shape = tape.shape(x).to_vec();
    let stats = BatchStats { mean, var, count: b * len };
    let var_out = tape.push_op(
        "batch_norm",
        shape,
        out,
        &[x, gamma, beta],
        Box::new(move |t, g| {
            let gv = t.value(gamma);
            let mut sum_g = vec![0.0; c];
            let mut sum_gx = vec![0.0; c];
            for bi in 0..b {
                for ci in 0..c {
                    for i in (bi * c + ci) * len..(bi * c + ci + 1) * len {
                        sum_g[ci] += g[i];
                        sum_gx[ci] += g[i] * xhat[i];
                    }
                }
            }
            let gx = t.requires_grad(x).then(|| {
                let mut gx = vec![0.0; g.len()];
                for bi in 0..b {
                    for ci in 0..c {
                        let k = gv[ci] * inv_std[ci] / n;
                        for i in (bi * c + ci) * len..(bi * c + ci + 1) * len {
                            gx[i] = k * (n * g[i] - sum_g[ci] - xhat[i] * sum_gx[ci]);
                        }
                    }
                }
                gx
            });
            vec![gx, Some(sum_gx), Some(sum_g)]
        }),
    );
    Ok((var_out, stats))
}

/// Normalizes with fixed (running) statistics: an affine map per channel.
pub fn batch_norm_eval(
    tape: &mut Tape,
    x: Var,
    gamma: Var,
    beta: Var,
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Result<Var> {
    let (b, c, len) = dims(tape, "batch_norm_eval", x)?;
    check_affine(tape, "batch_norm_eval", c, gamma, beta)?;
    if mean.len() != c || var.len() != c {
        return Err(Error::Dimension { op: "batch_norm_eval", axis: "channels", expected: c, found: mean.len() });
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mean = mean.to_vec();
    let xv = tape.value(x);
    let (gv, bv) = (tape.value(gamma), tape.value(beta));
    let mut out = vec![0.0; xv.len()];
    for bi in 0..b {
        for ci in 0..c {
            for i in (bi * c + ci) * len..(bi * c + ci + 1) * len {
                out[i] = gv[ci] * (xv[i] - mean[ci]) * inv_std[ci] + bv[ci];
            }
        }
    }
    let shape = tape.shape(x).to_vec();
    Ok(tape.push_op(
        "batch_norm_eval",
        shape,
        out,
        &[x, gamma, beta],
        Box::new(move |t, g| {
            let (xv, gv) = (t.value(x), t.value(gamma));
            let mut gx = vec![0.0; g.len()];
            let mut ggamma = vec![0.0; c];
            let mut gbeta = vec![0.0; c];
            for bi in 0..b {
                for ci in 0..c {
                    for i in (bi * c + ci) * len..(bi * c + ci + 1) * len {
                        gx[i] = g[i] * gv[ci] * inv_std[ci];
                        ggamma[ci] += g[i] * (xv[i] - mean[ci]) * inv_std[ci];
                        gbeta[ci] += g[i];
                    }
                }
            }
            vec![Some(gx), Some(ggamma), Some(gbeta)]
        }),
    ))
}
