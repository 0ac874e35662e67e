use madegan::memory::{self, MemoryBank};
use madegan::tensor::{ops, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bank(slots: usize, dim: usize, shrink: bool, seed: u64) -> MemoryBank {
    let omega = memory::init_bank(slots, dim, &mut ChaCha8Rng::seed_from_u64(seed));
    MemoryBank::new(omega, shrink).unwrap()
}

fn query(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

#[test]
fn weights_lie_on_the_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for shrink in [false, true] {
        let bank = random_bank(64, 16, shrink, 1);
        for _ in 0..10_000 {
            let w = bank.weights(&query(&mut rng, 16)).unwrap();
            assert_eq!(w.len(), 64);
            assert!(w.iter().all(|&v| v >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn addressing_ignores_query_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bank = random_bank(32, 8, false, 2);
    for _ in 0..1000 {
        let z = query(&mut rng, 8);
        let c = rng.gen_range(1e-3..1e3);
        let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
        let (a, b) = (bank.weights(&z).unwrap(), bank.weights(&zc).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y} at scale {c}");
        }
    }
}

#[test]
fn cosine_addressing_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bank = random_bank(5, 3, false, 3);
    let z = query(&mut rng, 3);
    let rows: Vec<&[f64]> = bank.omega().data().chunks(3).collect();
    let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e: Vec<f64> = rows
        .iter()
        .map(|r| {
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            (r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / (rn * zn)).exp()
        })
        .collect();
    let s: f64 = e.iter().sum();
    for (w, e) in bank.weights(&z).unwrap().iter().zip(&e) {
        assert!((w - e / s).abs() < 1e-14);
    }
}

#[test]
fn entropy_endpoints() {
    let n = 2000;
    let mut tape = Tape::new();
    let mut one_hot = vec![0.0; n];
    one_hot[17] = 1.0;
    let uniform = vec![1.0 / n as f64; n];
    let w = tape.constant_from(vec![2, n], [one_hot, uniform].concat()).unwrap();
    let e = ops::row_entropy(&mut tape, w).unwrap();
    let e = tape.value(e);
    assert!(e[0].abs() < 1e-9, "{}", e[0]);
    assert!((e[1] - (n as f64).ln()).abs() < 1e-9, "{}", e[1]);
}

#[test]
fn retrieval_is_a_convex_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let bank = random_bank(16, 4, false, 4);
    let rows: Vec<&[f64]> = bank.omega().data().chunks(4).collect();
    for _ in 0..100 {
        let w = bank.weights(&query(&mut rng, 4)).unwrap();
        let z = bank.retrieve(&w).unwrap();
        for d in 0..4 {
            let (lo, hi) = rows.iter().fold((f64::MAX, f64::MIN), |(l, h), r| (l.min(r[d]), h.max(r[d])));
            assert!(z[d] >= lo - 1e-12 && z[d] <= hi + 1e-12);
            let direct: f64 = w.iter().zip(&rows).map(|(wi, r)| wi * r[d]).sum();
            assert!((z[d] - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn hard_shrink_is_idempotent_and_sparser() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let plain = random_bank(40, 6, false, 5);
    let shrunk = random_bank(40, 6, true, 5);
    for _ in 0..200 {
        let z = query(&mut rng, 6);
        let (w, s) = (plain.weights(&z).unwrap(), shrunk.weights(&z).unwrap());
        let nz = |v: &[f64]| v.iter().filter(|&&x| x > 0.0).count();
        assert!(nz(&s) <= nz(&w));
        let argmax = |v: &[f64]| madegan::metrics::argmax(v);
        assert_eq!(argmax(&w), argmax(&s));

        let mut tape = Tape::new();
        let sv = tape.constant_from(vec![1, 40], s.clone()).unwrap();
        let again = ops::hard_shrink_renorm(&mut tape, sv, 1.0 / 40.0).unwrap();
        for (a, b) in tape.value(again).iter().zip(&s) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn initial_bank_has_bounded_nonzero_rows() {
    let omega: Tensor = memory::init_bank(2000, 50, &mut ChaCha8Rng::seed_from_u64(12));
    let b = 1.0 / 50f64.sqrt();
    assert_eq!(omega.shape(), &[2000, 50]);
    assert!(omega.data().iter().all(|v| v.abs() <= b));
    for row in omega.data().chunks(50) {
        assert!(row.iter().map(|v| v * v).sum::<f64>().sqrt() > memory::MIN_ROW_NORM);
    }
}

#[test]
fn memorized_prototype_is_recalled_by_small_shrunk_bank() {
    let cos = |a: &[f64], b: &[f64]| {
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n(a) * n(b))
    };
    let mut checked = 0;
    for seed in 0..20 {
        let omega = Tensor::randn(vec![8, 256], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(100 + seed));
        let bank = MemoryBank::new(omega, true).unwrap();
        let rows: Vec<&[f64]> = bank.omega().data().chunks(256).collect();
        for (j, wj) in rows.iter().enumerate() {
            if rows.iter().enumerate().any(|(i, r)| i != j && cos(wj, r) >= 0.2) {
                continue;
            }
            let z_hat = bank.retrieve(&bank.weights(wj).unwrap()).unwrap();
            assert!(cos(&z_hat, wj) > 0.95, "seed {seed} slot {j}: {}", cos(&z_hat, wj));
            checked += 1;
        }
    }
    assert!(checked >= 100, "{checked}");
}
