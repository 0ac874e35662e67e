// Row-wise reductions and loss primitives. "Row" means the leading (batch)
// axis; everything after it is flattened.

use super::expect_rank;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

const ENTROPY_FLOOR: f64 = 1e-12;

fn rows_of(tape: &Tape, op: &'static str, x: Var) -> Result<(usize, usize)> {
    let s = tape.shape(x);
    if s.is_empty() || s[0] == 0 {
        return Err(Error::Rank { op, expected: 2, found: s.to_vec() });
    }
    Ok((s[0], tape.value(x).len() / s[0]))
}

/// `‖x_r‖²` per row → `[rows]`.
pub fn row_sum_squares(tape: &mut Tape, x: Var) -> Result<Var> {
    let (rows, dim) = rows_of(tape, "row_sum_squares", x)?;
    let out = tape.value(x).chunks(dim).map(|r| r.iter().map(|v| v * v).sum()).collect();
    Ok(tape.push_op(
        "row_sum_squares",
        vec![rows],
        out,
        &[x],
        Box::new(move |t, g| {
            let gx = t.value(x).chunks(dim).zip(g).flat_map(|(r, &g)| r.iter().map(move |v| 2.0 * g * v)).collect();
            vec![Some(gx)]
        }),
    ))
}

/// `‖x_r‖` per row → `[rows]`. The subgradient at a zero row is taken as 0.
pub fn row_l2_norm(tape: &mut Tape, x: Var) -> Result<Var> {
    let (rows, dim) = rows_of(tape, "row_l2_norm", x)?;
    let norms: Vec<f64> = tape.value(x).chunks(dim).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let saved = norms.clone();
    Ok(tape.push_op(
        "row_l2_norm",
        vec![rows],
        norms,
        &[x],
        Box::new(move |t, g| {
            let gx = t
                .value(x)
                .chunks(dim)
                .zip(g)
                .zip(&saved)
                .flat_map(|((r, &g), &n)| r.iter().map(move |v| if n > 0.0 { g * v / n } else { 0.0 }))
                .collect();
            vec![Some(gx)]
        }),
    ))
}

/// Shannon entropy `−Σ wᵢ ln max(wᵢ, 1e−12)` of each row of `[rows, n]` → `[rows]`.
pub fn row_entropy(tape: &mut Tape, w: Var) -> Result<Var> {
    expect_rank(tape, "row_entropy", w, 2)?;
    let n = tape.shape(w)[1];
    let rows = tape.shape(w)[0];
    let out = tape.value(w).chunks(n).map(|r| -r.iter().map(|&p| p * p.max(ENTROPY_FLOOR).ln()).sum::<f64>()).collect();
    Ok(tape.push_op(
        "row_entropy",
        vec![rows],
        out,
        &[w],
        Box::new(move |t, g| {
            let gw = t
                .value(w)
                .chunks(n)
                .zip(g)
                .flat_map(|(r, &g)| {
                    r.iter()
                        .map(move |&p| if p >= ENTROPY_FLOOR { -g * (p.ln() + 1.0) } else { -g * ENTROPY_FLOOR.ln() })
                })
                .collect();
            vec![Some(gw)]
        }),
    ))
}

/// Zeroes entries below `threshold` in each row and renormalizes the
/// survivors to sum to one. Rows of a simplex always keep their maximum
/// when `threshold ≤ 1/n`.
pub fn hard_shrink_renorm(tape: &mut Tape, w: Var, threshold: f64) -> Result<Var> {
    expect_rank(tape, "hard_shrink_renorm", w, 2)?;
    let (rows, n) = (tape.shape(w)[0], tape.shape(w)[1]);
    let mut out = vec![0.0; rows * n];
    let mut sums = vec![0.0; rows];
    for (r, row) in tape.value(w).chunks(n).enumerate() {
        let s: f64 = row.iter().filter(|&&p| p >= threshold).sum();
        if s <= 0.0 {
            return Err(Error::invalid(format!("hard_shrink_renorm: row {r} has no entry >= {threshold}")));
        }
        sums[r] = s;
        for (i, &p) in row.iter().enumerate() {
            if p >= threshold {
                out[r * n + i] = p / s;
            }
        }
    }
    let y = out.clone();
    Ok(tape.push_op(
        "hard_shrink_renorm",
        vec![rows, n],
        out,
        &[w],
        Box::new(move |_, g| {
            let mut gw = vec![0.0; rows * n];
            for r in 0..rows {
                let (yr, gr) = (&y[r * n..(r + 1) * n], &g[r * n..(r + 1) * n]);
                let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    if yr[i] > 0.0 {
                        gw[r * n + i] = (gr[i] - dot) / sums[r];
                    }
                }
            }
            vec![Some(gw)]
        }),
    ))
}

/// `Σ_p mask_p · (−ln softmax(logits_p)[target_p])` over the rows of
/// `logits [rows, classes]` → scalar.
pub fn masked_cross_entropy(tape: &mut Tape, logits: Var, targets: &[usize], mask: &[f64]) -> Result<Var> {
    expect_rank(tape, "masked_cross_entropy", logits, 2)?;
    let (rows, m) = (tape.shape(logits)[0], tape.shape(logits)[1]);
    if targets.len() != rows || mask.len() != rows {
        return Err(Error::Dimension {
            op: "masked_cross_entropy",
            axis: "batch",
            expected: rows,
            found: targets.len().min(mask.len()),
        });
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= m) {
        return Err(Error::invalid(format!("target class {bad} out of range for {m} classes")));
    }
    let mut probs = vec![0.0; rows * m];
    let mut total = 0.0;
    for (r, row) in tape.value(logits).chunks(m).enumerate() {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        for i in 0..m {
            probs[r * m + i] = (row[i] - lse).exp();
        }
        if mask[r] != 0.0 {
            total += mask[r] * (lse - row[targets[r]]);
        }
    }
    let targets = targets.to_vec();
    let mask = mask.to_vec();
    Ok(tape.push_op(
        "masked_cross_entropy",
        vec![],
        vec![total],
        &[logits],
        Box::new(move |_, g| {
            let mut gl = vec![0.0; rows * m];
            for r in 0..rows {
                if mask[r] == 0.0 {
                    continue;
                }
                for i in 0..m {
                    let onehot = if i == targets[r] { 1.0 } else { 0.0 };
                    gl[r * m + i] = g[0] * mask[r] * (probs[r * m + i] - onehot);
                }
            }
            vec![Some(gl)]
        }),
    ))
}
