//! Acceptance report: one line per criterion. The deterministic contracts
//! (1 to 4, 7 to 9) set a non-zero exit status on failure; the trained
//! experiments (5, 6) and the full-data run (10) are reported only.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use madegan::classifier::{mb_loss, train_second_level, FeatureExtractor, Level2Config};
use madegan::config::RunConfig;
use madegan::data::wfdb::{decode_212, encode_212};
use madegan::gan::{self, scale_scores, Arch, GenFlags, Level1, TrainConfig, TRUNK_LEN};
use madegan::memory::{self, MemoryBank};
use madegan::metrics;
use madegan::nn::{Forward, Mode};
use madegan::pipeline::{self, Run};
use madegan::synth::{synth_beats, Jitter, Mix};
use madegan::tensor::gradcheck::relative_errors;
use madegan::tensor::{ops, Checkpoint, Tape, Tensor, Var};
use madegan::{Result, BEAT_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPORT_ONLY: [usize; 3] = [5, 6, 10];

const SMALL: Arch = Arch { width: 4, latent: 16, slots: 64 };

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape.to_vec(), 0.0, 1.0, &mut rng(seed))
}

fn probe(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(v).to_vec();
    let r = tape.constant(randn(&shape, seed ^ 0x5eed));
    let p = ops::mul(tape, v, r)?;
    Ok(ops::sum(tape, p))
}

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

fn gradient_cases() -> Vec<(&'static str, Vec<Tensor>, Build)> {
    let a = randn(&[3, 4], 1);
    let b = randn(&[3, 4], 2);
    let x = randn(&[2, 3, 12], 3);
    let flags = GenFlags { memory: true, shrink: false };
    let tiny = Arch { width: 1, latent: 3, slots: 5 };
    let gen = gan::init_generator(&tiny, flags, &mut rng(4));
    let disc = gan::init_discriminator(&tiny, &mut rng(5));
    let beats = Tensor::uniform(vec![2, BEAT_LEN], -0.5, 0.5, &mut rng(6));
    let masks = vec![vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0]];
    vec![
        (
            "add",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let y = ops::add(t, v[0], v[1])?;
                probe(t, y, 1)
            }),
        ),
        (
            "sub",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let y = ops::sub(t, v[0], v[1])?;
                probe(t, y, 2)
            }),
        ),
        (
            "mul",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| {
                let y = ops::mul(t, v[0], v[1])?;
                probe(t, y, 3)
            }),
        ),
        (
            "scale",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::scale(t, v[0], -1.7);
                probe(t, y, 4)
            }),
        ),
        (
            "mean",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::mul(t, v[0], v[0])?;
                Ok(ops::mean(t, y))
            }),
        ),
        (
            "reshape",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::reshape(t, v[0], vec![2, 6])?;
                probe(t, y, 5)
            }),
        ),
        (
            "leaky_relu",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::leaky_relu(t, v[0], 0.2)?;
                probe(t, y, 6)
            }),
        ),
        (
            "tanh",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::tanh(t, v[0]);
                probe(t, y, 7)
            }),
        ),
        (
            "sigmoid",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::sigmoid(t, v[0]);
                probe(t, y, 8)
            }),
        ),
        (
            "softplus",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::softplus(t, v[0]);
                probe(t, y, 9)
            }),
        ),
        (
            "linear",
            vec![randn(&[4, 5], 10), randn(&[3, 5], 11), randn(&[3], 12)],
            Box::new(|t, v| {
                let y = ops::linear(t, v[0], v[1], v[2])?;
                probe(t, y, 10)
            }),
        ),
        (
            "matmul",
            vec![randn(&[4, 5], 13), randn(&[5, 2], 14)],
            Box::new(|t, v| {
                let y = ops::matmul(t, v[0], v[1])?;
                probe(t, y, 11)
            }),
        ),
        (
            "matmul_nt",
            vec![randn(&[4, 5], 15), randn(&[3, 5], 16)],
            Box::new(|t, v| {
                let y = ops::matmul_nt(t, v[0], v[1])?;
                probe(t, y, 12)
            }),
        ),
        (
            "row_normalize",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::row_normalize(t, v[0])?;
                probe(t, y, 13)
            }),
        ),
        (
            "softmax_rows",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::softmax_rows(t, v[0])?;
                probe(t, y, 14)
            }),
        ),
        (
            "conv1d",
            vec![x.clone(), randn(&[4, 3, 4], 17)],
            Box::new(|t, v| {
                let y = ops::conv1d(t, v[0], v[1], 2, 1)?;
                probe(t, y, 15)
            }),
        ),
        (
            "conv1d_transpose",
            vec![x.clone(), randn(&[3, 2, 4], 18)],
            Box::new(|t, v| {
                let y = ops::conv1d_transpose(t, v[0], v[1], 2, 1)?;
                probe(t, y, 16)
            }),
        ),
        (
            "bias_add",
            vec![x.clone(), randn(&[3], 19)],
            Box::new(|t, v| {
                let y = ops::bias_add(t, v[0], v[1])?;
                probe(t, y, 17)
            }),
        ),
        (
            "batch_norm_train",
            vec![x.clone(), randn(&[3], 20), randn(&[3], 21)],
            Box::new(|t, v| {
                let (y, _) = ops::batch_norm_train(t, v[0], v[1], v[2], 1e-5)?;
                probe(t, y, 18)
            }),
        ),
        (
            "batch_norm_eval",
            vec![x.clone(), randn(&[3], 22), randn(&[3], 23)],
            Box::new(|t, v| {
                let y = ops::batch_norm_eval(t, v[0], v[1], v[2], &[0.3, -0.2, 0.1], &[1.5, 0.7, 2.0], 1e-5)?;
                probe(t, y, 19)
            }),
        ),
        (
            "row_sum_squares",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::row_sum_squares(t, v[0])?;
                probe(t, y, 20)
            }),
        ),
        (
            "row_l2_norm",
            vec![a.clone()],
            Box::new(|t, v| {
                let y = ops::row_l2_norm(t, v[0])?;
                probe(t, y, 21)
            }),
        ),
        (
            "row_entropy",
            vec![a.clone()],
            Box::new(|t, v| {
                let w = ops::softmax_rows(t, v[0])?;
                let y = ops::row_entropy(t, w)?;
                probe(t, y, 22)
            }),
        ),
        (
            "hard_shrink_renorm",
            vec![a.clone()],
            Box::new(|t, v| {
                let w = ops::softmax_rows(t, v[0])?;
                let y = ops::hard_shrink_renorm(t, w, 0.25)?;
                probe(t, y, 23)
            }),
        ),
        (
            "masked_cross_entropy",
            vec![randn(&[4, 3], 24)],
            Box::new(|t, v| ops::masked_cross_entropy(t, v[0], &[0, 2, 1, 2], &[1.0, 0.0, 1.0, 1.0])),
        ),
        (
            "memory address",
            vec![a.clone(), randn(&[6, 4], 25)],
            Box::new(|t, v| {
                let w = memory::address(t, v[0], v[1], true)?;
                probe(t, w, 24)
            }),
        ),
        (
            "memory retrieve",
            vec![a.clone(), randn(&[6, 4], 26)],
            Box::new(|t, v| {
                let w = memory::address(t, v[0], v[1], false)?;
                let z = memory::retrieve(t, w, v[1])?;
                probe(t, z, 25)
            }),
        ),
        ("reconstruction loss", vec![a.clone(), b.clone()], Box::new(|t, v| gan::reconstruction_loss(t, v[0], v[1]))),
        (
            "discriminator loss",
            vec![randn(&[5, 1], 27), randn(&[5, 1], 28)],
            Box::new(|t, v| Ok(gan::adversarial_losses(t, v[0], v[1])?.0)),
        ),
        ("generator adversarial loss", vec![randn(&[5, 1], 29)], Box::new(|t, v| Ok(gan::generator_adv_loss(t, v[0])))),
        (
            "feature matching loss",
            vec![randn(&[3, 4, 5], 30), randn(&[3, 4, 5], 31)],
            Box::new(|t, v| gan::feature_matching_loss(t, v[0], v[1])),
        ),
        (
            "sparsity loss",
            vec![randn(&[4, 7], 32)],
            Box::new(|t, v| {
                let w = ops::softmax_rows(t, v[0])?;
                memory::sparsity_loss(t, w)
            }),
        ),
        (
            "multi-branch loss",
            vec![randn(&[6, 3], 33), randn(&[6, 3], 34)],
            Box::new(move |t, v| Ok(mb_loss(t, v, &[0, 1, 2, 2, 1, 0], &masks)?.0)),
        ),
        (
            "generator objective",
            vec![beats.clone()],
            Box::new(move |t, v| {
                let mut f = Forward::new(t, &gen, Mode::Train).frozen();
                let out = gan::generator_forward(&mut f, v[0], flags)?;
                let rec = gan::reconstruction_loss(t, v[0], out.x_hat)?;
                let sp = memory::sparsity_loss(t, out.w.expect("memory enabled"))?;
                ops::add(t, rec, sp)
            }),
        ),
        (
            "discriminator network",
            vec![beats],
            Box::new(move |t, v| {
                let mut f = Forward::new(t, &disc, Mode::Train).frozen();
                let (logit, h) = gan::discriminator_forward(&mut f, v[0])?;
                let adv = gan::generator_adv_loss(t, logit);
                let hs = probe(t, h, 35)?;
                ops::add(t, adv, hs)
            }),
        ),
    ]
}

/// Each case is checked at two step sizes and the smaller error counts: a
/// step that crosses a leaky-ReLU kink inflates the numeric estimate, a
/// wrong gradient does not shrink with the step.
fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let mut worst = (0.0, "");
    for (name, inputs, build) in gradient_cases() {
        let err = [1e-5, 1e-6]
            .iter()
            .map(|&step| relative_errors(&inputs, step, |t, v| build(t, v)).unwrap().into_iter().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        if err > worst.0 {
            worst = (err, name);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst.0 < 1e-4 && secs < 60.0,
        format!("{} cases, worst relative error {:.2e} ({}), {secs:.1} s", gradient_cases().len(), worst.0, worst.1),
    )
}

fn memory_invariants() -> Verdict {
    let mut r = rng(7);
    let mut simplex_err: f64 = 0.0;
    let mut negative = false;
    for shrink in [false, true] {
        let bank = MemoryBank::new(memory::init_bank(64, 16, &mut rng(1)), shrink).unwrap();
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..16).map(|_| r.gen_range(-3.0..3.0)).collect();
            let w = bank.weights(&z).unwrap();
            negative |= w.iter().any(|&v| v < 0.0);
            simplex_err = simplex_err.max((w.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let bank = MemoryBank::new(memory::init_bank(32, 8, &mut rng(2)), false).unwrap();
    let mut scale_err: f64 = 0.0;
    for _ in 0..1000 {
        let z: Vec<f64> = (0..8).map(|_| r.gen_range(-3.0..3.0)).collect();
        let c = r.gen_range(1e-3..1e3);
        let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
        let (a, b) = (bank.weights(&z).unwrap(), bank.weights(&zc).unwrap());
        scale_err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(scale_err, f64::max);
    }
    let n = 2000;
    let mut one_hot = vec![0.0; n];
    one_hot[17] = 1.0;
    let mut tape = Tape::new();
    let w = tape.constant_from(vec![2, n], [one_hot, vec![1.0 / n as f64; n]].concat()).unwrap();
    let e = ops::row_entropy(&mut tape, w).unwrap();
    let e = tape.value(e).to_vec();
    let uniform_err = (e[1] - (n as f64).ln()).abs();
    verdict(
        !negative && simplex_err < 1e-9 && scale_err <= 1e-12 && e[0].abs() < 1e-9 && uniform_err < 1e-9,
        format!(
            "simplex error {simplex_err:.1e}, scale error {scale_err:.1e}, one-hot entropy {:.1e}, uniform error {uniform_err:.1e}",
            e[0]
        ),
    )
}

fn stage_shapes(arch: Arch) -> bool {
    let flags = GenFlags { memory: true, shrink: false };
    let gen = gan::init_generator(&arch, flags, &mut rng(1));
    let disc = gan::init_discriminator(&arch, &mut rng(2));
    let mut tape = Tape::new();
    let x = tape.constant_from(vec![2, BEAT_LEN], vec![0.1; 2 * BEAT_LEN]).unwrap();
    let mut f = Forward::new(&mut tape, &gen, Mode::Train);
    let mut h = ops::reshape(f.tape, x, vec![2, 1, BEAT_LEN]).unwrap();
    let ch = arch.channels();
    let mut ok = true;
    for (i, len) in [160, 80, 40, 20, 10].into_iter().enumerate() {
        h = f.conv_block(h, &format!("enc.{i}"), 2, 1).unwrap();
        ok &= f.tape.shape(h) == [2, ch[i], len];
    }
    let out = gan::generator_forward(&mut f, x, flags).unwrap();
    ok &= tape.shape(out.z) == [2, arch.latent] && tape.shape(out.z_hat) == [2, arch.latent];
    ok &= tape.shape(out.w.unwrap()) == [2, arch.slots] && tape.shape(out.x_hat) == [2, BEAT_LEN];
    let mut f = Forward::new(&mut tape, &disc, Mode::Train);
    let (logit, h) = gan::discriminator_forward(&mut f, x).unwrap();
    ok && tape.shape(logit) == [2, 1] && tape.shape(h) == [2, arch.feature_channels(), TRUNK_LEN]
}

fn shape_pipeline() -> Verdict {
    let archs = [Arch::FULL, SMALL, Arch { width: 1, latent: 3, slots: 5 }];
    let ok: Vec<bool> = archs.iter().map(|&a| stage_shapes(a)).collect();
    verdict(ok.iter().all(|&b| b), format!("320 → 160/80/40/20/10 → d_z → 320 for d_z ∈ {{50, 16, 3}}: {ok:?}"))
}

fn tied_set(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = r.gen_range(2..=200);
    let levels = r.gen_range(2..30);
    let mut labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = labels.iter().map(|&l| r.gen_range(0..levels) as f64 * 0.37 + if l { 0.5 } else { 0.0 }).collect();
    (scores, labels)
}

fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                twice += if si > sj {
                    2
                } else if si == sj {
                    1
                } else {
                    0
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

fn swept_auprc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let (mut area, mut prev) = (0.0, 0.0);
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| l && s >= t).count() as f64;
        let flagged = scores.iter().filter(|&&s| s >= t).count() as f64;
        area += (tp / pos - prev) * (tp / flagged);
        prev = tp / pos;
    }
    area
}

fn metric_oracles() -> Verdict {
    let mut r = rng(1);
    let (mut exact, mut prc_err) = (0, 0.0f64);
    for _ in 0..100 {
        let (s, l) = tied_set(&mut r);
        exact += usize::from(metrics::auroc(&s, &l).unwrap() == pairwise_auroc(&s, &l));
        prc_err = prc_err.max((metrics::auprc(&s, &l).unwrap() - swept_auprc(&s, &l)).abs());
    }
    let f = metrics::f_score(0.856, 0.954);
    verdict(
        exact == 100 && prc_err < 1e-12 && (f - 0.902).abs() <= 0.0005,
        format!("AUROC exact on {exact}/100 sets, AUPRC sweep error {prc_err:.1e}, f-score {f:.4}"),
    )
}

fn model_inputs(n: usize, mix: Mix, jitter: &Jitter, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let beats = synth_beats(n, &mix, jitter, &mut rng(seed));
    let x = beats.iter().map(|b| gan::to_model_input(&b.waveform)).collect();
    let y = beats.iter().map(|b| b.label.id()).collect();
    (x, y)
}

fn level1_experiment() -> Verdict {
    let start = Instant::now();
    let jitter = Jitter::default();
    let (train, _) = model_inputs(2000, Mix::NORMAL, &jitter, 100);
    let (mut test, _) = model_inputs(222, Mix::NORMAL, &jitter, 101);
    let (abnormal, _) = model_inputs(600, Mix::new([0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap(), &jitter, 102);
    test.extend(abnormal);
    let labels: Vec<bool> = (0..test.len()).map(|i| i >= 222).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let mut auroc = [0.0; 2];
        for (k, adversarial) in [true, false].into_iter().enumerate() {
            let cfg = TrainConfig { epochs: 50, seed, memory: adversarial, adversarial, ..Default::default() };
            let mut m = Level1::new(SMALL, cfg).unwrap();
            m.fit(&train, None, |_| {}).unwrap();
            let scaled = scale_scores(&m.scores(&test).unwrap()).unwrap();
            auroc[k] = metrics::auroc(&scaled, &labels).unwrap();
        }
        ok &= auroc[0] >= 0.90 && auroc[0] >= auroc[1];
        lines.push(format!("seed {seed}: MadeGAN {:.4} vs AE {:.4}", auroc[0], auroc[1]));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(ok && secs <= 600.0, format!("{}; {secs:.0} s", lines.join(", ")))
}

/// Beats three times as variable as the defaults, so that the abnormal
/// classes overlap. The level-1 model is trained on normals of the same
/// distribution.
fn level2_experiment() -> Verdict {
    let start = Instant::now();
    let d = Jitter::default();
    let k = 3.0;
    let jitter = Jitter { amplitude: d.amplitude * k, width: d.width * k, shift: d.shift * k, noise: d.noise * k };
    let (normals, _) = model_inputs(2000, Mix::NORMAL, &jitter, 6);
    let mut level1 = Level1::new(SMALL, TrainConfig { epochs: 50, ..Default::default() }).unwrap();
    level1.fit(&normals, None, |_| {}).unwrap();
    let level1 = &level1;
    let (x, y) =
        model_inputs(1080, Mix::new([0.0, 300.0 / 1080.0, 700.0 / 1080.0, 80.0 / 1080.0]).unwrap(), &jitter, 7);
    let y: Vec<usize> = y.into_iter().map(|c| c - 1).collect();
    let (mut wins, mut frozen_f1, mut random_f1) = (0, 0.0, 0.0);
    let mut pairs = Vec::new();
    for seed in 0..5u64 {
        let frozen = FeatureExtractor::from_level1(level1).unwrap();
        let mb = train_second_level(&x, &y, frozen.clone(), &Level2Config { seed, ..Default::default() }).unwrap();
        let single_cfg = Level2Config { seed, branches: 1, balance: false, ..Default::default() };
        let single = train_second_level(&x, &y, frozen, &single_cfg).unwrap();
        let mut random = FeatureExtractor::random(SMALL, 1000 + seed).unwrap();
        random.calibrate(&x).unwrap();
        let baseline = train_second_level(&x, &y, random, &Level2Config { seed, ..Default::default() }).unwrap();
        let (a, b) = (mb.report.metrics.recall, single.report.metrics.recall);
        wins += usize::from(a >= b);
        frozen_f1 += mb.report.metrics.f_score / 5.0;
        random_f1 += baseline.report.metrics.f_score / 5.0;
        pairs.push(format!("{a:.3}/{b:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        wins >= 4 && frozen_f1 >= random_f1 && secs <= 600.0,
        format!(
            "macro-recall MB/single {} ({wins}/5 wins); mean macro-F1 frozen {frozen_f1:.4} vs random {random_f1:.4}; {secs:.0} s",
            pairs.join(" ")
        ),
    )
}

fn bits(p: &madegan::tensor::ParamSet) -> Vec<u64> {
    p.iter().flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits())).collect()
}

fn freeze_and_ablation() -> Verdict {
    let jitter = Jitter::default();
    let (normals, _) = model_inputs(96, Mix::NORMAL, &jitter, 30);
    let mut l1 = Level1::new(SMALL, TrainConfig { epochs: 2, batch_size: 32, seed: 31, ..Default::default() }).unwrap();
    l1.fit(&normals, None, |_| {}).unwrap();
    let disc_before = bits(&l1.disc);
    let (x, y) = model_inputs(120, Mix::new([0.0, 0.4, 0.4, 0.2]).unwrap(), &jitter, 32);
    let y: Vec<usize> = y.into_iter().map(|c| c - 1).collect();
    let cfg = Level2Config { epochs: 3, batch_size: 16, seed: 33, ..Default::default() };
    let out = train_second_level(&x, &y, FeatureExtractor::from_level1(&l1).unwrap(), &cfg).unwrap();
    let trunk: Vec<u64> = l1
        .disc
        .iter()
        .filter(|(n, _)| out.model.extractor.params().contains(n))
        .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()))
        .collect();
    let frozen = bits(&l1.disc) == disc_before && bits(out.model.extractor.params()) == trunk;

    let base = TrainConfig { epochs: 2, batch_size: 16, seed: 34, ..Default::default() };
    let no_mem = Level1::new(SMALL, TrainConfig { memory: false, ..base }).unwrap();
    let mut tape = Tape::new();
    let xb = tape.constant_from(vec![2, BEAT_LEN], normals[..2].concat()).unwrap();
    let mut f = Forward::new(&mut tape, &no_mem.gen, Mode::Train);
    let g = gan::generator_forward(&mut f, xb, no_mem.flags()).unwrap();
    let memory_off = no_mem.gen.iter().all(|(n, _)| !n.starts_with("mem."))
        && g.w.is_none()
        && tape.value(g.z) == tape.value(g.z_hat);

    let mut off = Level1::new(SMALL, TrainConfig { adversarial: false, ..base }).unwrap();
    let untouched = bits(&off.disc);
    off.fit(&normals, None, |_| {}).unwrap();
    let mut zero = Level1::new(SMALL, TrainConfig { lambda_fm: 0.0, lambda_adv: 0.0, ..base }).unwrap();
    zero.fit(&normals, None, |_| {}).unwrap();
    let adversarial_off = bits(&off.disc) == untouched && bits(&off.gen) == bits(&zero.gen);
    verdict(
        frozen && memory_off && adversarial_off,
        format!("discriminator frozen {frozen}, memory off {memory_off}, adversarial off {adversarial_off}"),
    )
}

fn format_round_trips() -> Verdict {
    let mut r = rng(1);
    let samples: Vec<i32> = (0..2_000_000).map(|_| r.gen_range(-2048..=2047)).collect();
    let wfdb = decode_212(&encode_212(&samples).unwrap()).unwrap() == samples;
    let mut c = Checkpoint::new();
    c.push("a.weight", Tensor::randn(vec![3, 2, 4], 0.0, 1.0, &mut r));
    c.push("b", Tensor::from_vec(vec![-0.0, f64::MAX, 1e-300]).unwrap());
    let level1 = Level1::new(SMALL, TrainConfig::default()).unwrap().to_checkpoint();
    let dir = tempfile::tempdir().unwrap();
    let mut ckpt = true;
    for (i, c) in [c, level1].iter().enumerate() {
        let (p1, p2) = (dir.path().join(format!("{i}a")), dir.path().join(format!("{i}b")));
        c.save(&p1).unwrap();
        Checkpoint::load(&p1).unwrap().save(&p2).unwrap();
        ckpt &= std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
    }
    verdict(wfdb && ckpt, format!("212 identity over 10^6 pairs {wfdb}, checkpoint bytes identical {ckpt}"))
}

fn score_scaling() -> Verdict {
    let mut r = rng(2);
    let mut ok = true;
    for _ in 0..100 {
        let (s, l) = tied_set(&mut r);
        let s: Vec<f64> = s.iter().map(|v| v * 13.7 + 2.0).collect();
        let scaled = scale_scores(&s).unwrap();
        let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ok &= min == 0.0 && max == 1.0 && metrics::auroc(&s, &l).unwrap() == metrics::auroc(&scaled, &l).unwrap();
    }
    verdict(ok, "min 0, max 1 and unchanged AUROC on 100 sets".into())
}

fn full_data() -> Verdict {
    let Some(dir) = std::env::var_os("MITBIH_DIR").map(PathBuf::from) else {
        return Verdict::Skip("set MITBIH_DIR to a local MIT-BIH copy to run".into());
    };
    let out = tempfile::tempdir().unwrap();
    let run = Run::new(RunConfig::default(), out.path()).unwrap();
    let pre = pipeline::preprocess(&run, &dir, None).unwrap();
    let [n, s, v, f] = pre.counts;
    let counts_ok = [n, v, s, f] == [86_717, 7_008, 3_026, 802];
    let l1 = pipeline::train_level1(&run, &run.path(pipeline::BEATS_FILE), None).unwrap();
    let auroc = l1.logs.last().and_then(|l| l.auroc).unwrap_or(f64::NAN);
    let band = (auroc - 0.954).abs() <= 0.05;
    let detail = format!("counts N/V/S/F {n}/{v}/{s}/{f}, AUROC {auroc:.4}");
    match (counts_ok, band) {
        (true, true) => Verdict::Pass(detail),
        (true, false) => Verdict::Fail(format!("{detail} (outside the ±0.05 band; reported only)")),
        _ => Verdict::Fail(detail),
    }
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Verdict::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn report(i: usize, name: &str, v: Verdict) -> bool {
    let (tag, detail, failed) = match v {
        Verdict::Pass(d) => ("PASS", d, false),
        Verdict::Fail(d) => ("FAIL", d, !REPORT_ONLY.contains(&i)),
        Verdict::Skip(d) => ("SKIP", d, false),
    };
    println!("criterion {i:>2} {tag} {name}: {detail}");
    failed
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut failed = false;
    failed |= report(1, "gradient suite", guarded(gradient_suite));
    failed |= report(2, "memory invariants", guarded(memory_invariants));
    failed |= report(3, "shape pipeline", guarded(shape_pipeline));
    failed |= report(4, "metric oracles", guarded(metric_oracles));
    failed |= report(5, "synthetic level-1 experiment", guarded(level1_experiment));
    failed |= report(6, "synthetic level-2 experiment", guarded(level2_experiment));
    failed |= report(7, "freeze and ablation contracts", guarded(freeze_and_ablation));
    failed |= report(8, "format round-trips", guarded(format_round_trips));
    failed |= report(9, "score scaling", guarded(score_scaling));
    failed |= report(10, "full MIT-BIH pipeline", guarded(full_data));
    if failed {
        std::process::exit(1);
    }
}
