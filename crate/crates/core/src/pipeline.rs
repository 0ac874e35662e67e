//! Command implementations behind the CLI. Each command reads its inputs,
//! writes its artifacts under the output directory together with a
//! resolved-config sidecar, and returns a summary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::classifier::{
    cross_validate, stratified_split, train_second_level, write_predictions, FeatureExtractor, Level2, Level2Config,
};
use crate::config::RunConfig;
use crate::data::{class_counts, read_csv_beats, wfdb, write_csv_beats, BeatRecord, Class};
use crate::error::{Error, Result};
use crate::gan::{scale_scores, to_model_input, EpochLog, Level1};
use crate::metrics::{best_f_threshold, kfold, mean_std, point_metrics, EvalReport};
use crate::signal::{normalize_beat, prepare_recording};
use crate::synth::{render_recording, synth_beats, RecordingConfig};
use crate::tensor::Checkpoint;

pub const BEATS_FILE: &str = "beats.csv";
pub const LEVEL1_CKPT: &str = "level1.mgan";
pub const LEVEL2_CKPT: &str = "level2.mgan";
pub const LEVEL1_TEST: &str = "level1_test.csv";
pub const ABNORMAL_FILE: &str = "abnormal.csv";

/// Resolved configuration and output directory of one invocation.
#[derive(Clone, Debug)]
pub struct Run {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Run {
    pub fn new(cfg: RunConfig, out_dir: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        Ok(Run { cfg, out_dir: out_dir.into() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn prepare(&self, command: &str) -> Result<()> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| Error::invalid(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let text = format!("# resolved configuration of `{command}`\n{}", self.cfg.to_text());
        fs::write(self.path(&format!("{command}.config")), text)?;
        Ok(())
    }
}

fn read_beats(path: &Path) -> Result<Vec<BeatRecord>> {
    let f = File::open(path).map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    let source = path.file_stem().and_then(|s| s.to_str()).unwrap_or("beats");
    read_csv_beats(BufReader::new(f), source)
}

fn write_beats(path: &Path, beats: &[BeatRecord]) -> Result<()> {
    write_csv_beats(BufWriter::new(File::create(path)?), beats)
}

fn model_inputs(beats: &[BeatRecord]) -> Vec<Vec<f64>> {
    beats.iter().map(|b| to_model_input(&b.waveform)).collect()
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!("{} not found", path.display())));
    }
    Checkpoint::load(path)
}

/// Per-class counts as a small text table.
pub fn count_table(counts: &[usize; 4]) -> String {
    let mut s = String::from("class  beats\n");
    for c in Class::ALL {
        let _ = writeln!(s, "{:<5}  {}", c.token(), counts[c.id()]);
    }
    let _ = writeln!(s, "total  {}", counts.iter().sum::<usize>());
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSummary {
    pub beats: usize,
    pub counts: [usize; 4],
    pub recordings: Vec<String>,
}

/// Writes `beats.csv` and, when requested, WFDB recordings under `records/`.
pub fn synth(run: &Run) -> Result<SynthSummary> {
    run.prepare("synth")?;
    let c = &run.cfg;
    let beats = synth_beats(c.synth_beats, &c.synth_mix, &c.jitter(), &mut stream_rng(c.seed, 1));
    write_beats(&run.path(BEATS_FILE), &beats)?;
    let mut recordings = Vec::new();
    for i in 0..c.synth_recordings {
        let rc = RecordingConfig {
            bpm: c.synth_bpm,
            duration_s: c.synth_duration_s,
            mix: c.synth_mix,
            jitter: c.jitter(),
            wander: c.synth_wander,
            record_id: format!("{}", 900 + i),
            ..Default::default()
        };
        let s = render_recording(&rc, &mut stream_rng(c.seed, 100 + i as u64))?;
        wfdb::save_record(&run.path("records"), &s.recording, &s.annotations)?;
        recordings.push(rc.record_id);
    }
    Ok(SynthSummary { beats: beats.len(), counts: class_counts(beats.iter().map(|b| &b.label)), recordings })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessSummary {
    pub records: Vec<String>,
    pub excluded: Vec<String>,
    pub counts: [usize; 4],
    pub dropped_boundary: usize,
    pub dropped_unlabeled: usize,
}

/// Record ids with a `.hea` file in `dir`, sorted.
pub fn list_records(dir: &Path) -> Result<Vec<String>> {
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension().and_then(|x| x.to_str()) == Some("hea"))
                .then(|| p.file_stem()?.to_str().map(String::from))
                .flatten()
        })
        .collect();
    ids.sort();
    Ok(ids)
}

/// Filters, detects, segments and normalizes every record in `input`,
/// writing `beats.csv`.
pub fn preprocess(run: &Run, input: &Path, only: Option<&[String]>) -> Result<PreprocessSummary> {
    let all = match only {
        Some(ids) => ids.to_vec(),
        None => list_records(input)?,
    };
    if all.is_empty() {
        return Err(Error::invalid(format!("no records found in {}", input.display())));
    }
    run.prepare("preprocess")?;
    let (excluded, ids): (Vec<String>, Vec<String>) = all.into_iter().partition(|id| run.cfg.prep_exclude.contains(id));
    if ids.is_empty() {
        log::warn!("every record was excluded");
    }
    let prep = run.cfg.prep_config();
    let mut beats = Vec::new();
    let (mut boundary, mut unlabeled) = (0, 0);
    for id in &ids {
        let atr = input.join(format!("{id}.atr"));
        if !atr.exists() {
            return Err(Error::invalid(format!("annotation file {} is missing", atr.display())));
        }
        let (rec, ann) = wfdb::load_record(input, id)?;
        let (mut b, drops) = prepare_recording(&rec, &ann, &prep)?;
        boundary += drops.boundary;
        unlabeled += drops.unlabeled;
        for beat in &mut b {
            beat.waveform = normalize_beat(&beat.waveform);
        }
        log::info!("record {id}: {} beats, {} dropped", b.len(), drops.total());
        beats.extend(b);
    }
    write_beats(&run.path(BEATS_FILE), &beats)?;
    Ok(PreprocessSummary {
        records: ids,
        excluded,
        counts: class_counts(beats.iter().map(|b| &b.label)),
        dropped_boundary: boundary,
        dropped_unlabeled: unlabeled,
    })
}

#[derive(Clone, Debug)]
pub struct Level1Summary {
    pub train: usize,
    pub test_normal: usize,
    pub test_abnormal: usize,
    pub logs: Vec<EpochLog>,
}

/// Splits normals into training and test parts; all abnormal beats join
/// the test set and are also written out for the second level.
pub fn train_level1(run: &Run, data: &Path, resume: Option<&Path>) -> Result<Level1Summary> {
    let beats = read_beats(data)?;
    let (normal, abnormal): (Vec<BeatRecord>, Vec<BeatRecord>) = beats.into_iter().partition(|b| b.label == Class::N);
    if normal.len() < 2 {
        return Err(Error::invalid("level-1 training needs at least 2 normal beats"));
    }
    run.prepare("train-level1")?;
    let mut order: Vec<usize> = (0..normal.len()).collect();
    order.shuffle(&mut stream_rng(run.cfg.seed, 0));
    let n_test = ((run.cfg.l1_test_fraction * normal.len() as f64).round() as usize).min(normal.len() - 2);
    let (test_idx, train_idx) = order.split_at(n_test);
    let train: Vec<BeatRecord> = train_idx.iter().map(|&i| normal[i].clone()).collect();
    let mut test: Vec<BeatRecord> = test_idx.iter().map(|&i| normal[i].clone()).collect();
    test.extend(abnormal.iter().cloned());
    write_beats(&run.path(LEVEL1_TEST), &test)?;
    write_beats(&run.path(ABNORMAL_FILE), &abnormal)?;

    let mut model = match resume {
        Some(p) => {
            let mut m = Level1::from_checkpoint(&load_checkpoint(p)?)?;
            m.cfg.epochs = run.cfg.l1_epochs;
            m
        }
        None => Level1::new(run.cfg.arch(), run.cfg.train_config())?,
    };
    let x = model_inputs(&train);
    let tx = model_inputs(&test);
    let labels: Vec<bool> = test.iter().map(|b| b.label != Class::N).collect();
    let eval = (labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)).then_some((tx.as_slice(), labels.as_slice()));

    let log_path = run.path("level1_log.csv");
    let append = resume.is_some() && log_path.exists();
    let mut log = BufWriter::new(
        fs::OpenOptions::new().create(true).append(append).write(true).truncate(!append).open(&log_path)?,
    );
    if !append {
        writeln!(log, "{}", EpochLog::CSV_HEADER)?;
    }
    let ckpt_path = run.path(LEVEL1_CKPT);
    let mut io_err = None;
    let logs = model.fit(&x, eval, |l| {
        log::info!("epoch {}: {}", l.epoch, l.csv_row());
        if let Err(e) = writeln!(log, "{}", l.csv_row()) {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    log.flush()?;
    model.to_checkpoint().save(&ckpt_path)?;
    Ok(Level1Summary { train: train.len(), test_normal: test_idx.len(), test_abnormal: abnormal.len(), logs })
}

#[derive(Clone, Debug)]
pub struct Level2Summary {
    pub train: usize,
    pub test: usize,
    pub report: EvalReport,
    pub extractor_checksum: u64,
}

fn abnormal_labels(beats: &[BeatRecord]) -> Result<Vec<usize>> {
    beats
        .iter()
        .map(|b| {
            b.label
                .abnormal_index()
                .ok_or_else(|| Error::invalid("second-level data must contain only S, V and F beats"))
        })
        .collect()
}

/// Trains the multi-branch head on abnormal beats with the frozen
/// discriminator trunk; writes the combined checkpoint, loss log,
/// test-split predictions and report.
pub fn train_level2(run: &Run, checkpoint: &Path, data: &Path) -> Result<Level2Summary> {
    let mut ckpt = load_checkpoint(checkpoint)?;
    let level1 = Level1::from_checkpoint(&ckpt)?;
    let beats: Vec<BeatRecord> = read_beats(data)?.into_iter().filter(|b| b.label != Class::N).collect();
    let labels = abnormal_labels(&beats)?;
    run.prepare("train-level2")?;
    let before = level1.disc.checksum();
    let extractor = FeatureExtractor::from_level1(&level1)?;
    let checksum = extractor.checksum();
    let out = train_second_level(&model_inputs(&beats), &labels, extractor, &run.cfg.level2_config())?;
    if level1.disc.checksum() != before || out.model.extractor.checksum() != checksum {
        return Err(Error::invalid("level-1 parameters changed during second-level training"));
    }
    let mut log = String::from("epoch,loss\n");
    for (i, l) in out.losses.iter().enumerate() {
        let _ = writeln!(log, "{},{l}", i + 1);
    }
    fs::write(run.path("level2_log.csv"), log)?;
    let ids: Vec<String> = out.test_idx.iter().map(|&i| format!("{}:{}", beats[i].record_id, i)).collect();
    let truth: Vec<usize> = out.test_idx.iter().map(|&i| labels[i]).collect();
    write_predictions(
        BufWriter::new(File::create(run.path("level2_predictions.csv"))?),
        &ids,
        &out.test_probs,
        Some(&truth),
    )?;
    out.report.write(&run.out_dir, "level2")?;
    out.model.append_to(&mut ckpt);
    ckpt.save(run.path(LEVEL2_CKPT))?;
    Ok(Level2Summary {
        train: out.train_idx.len(),
        test: out.test_idx.len(),
        report: out.report,
        extractor_checksum: checksum,
    })
}

fn has_head(ckpt: &Checkpoint) -> bool {
    ckpt.get("meta.l2.branches").is_some()
}

/// Anomaly scores, scaled scores and, with a second-level head, class
/// probabilities of every beat, as `scores.csv`.
pub fn score(run: &Run, checkpoint: &Path, data: &Path) -> Result<usize> {
    let ckpt = load_checkpoint(checkpoint)?;
    let beats = read_beats(data)?;
    if beats.len() < 2 {
        return Err(Error::invalid("scoring needs at least 2 beats"));
    }
    run.prepare("score")?;
    let x = model_inputs(&beats);
    let (level1, head) = if has_head(&ckpt) {
        let (l1, l2) = Level2::from_checkpoint(&ckpt)?;
        (l1, Some(l2))
    } else {
        (Level1::from_checkpoint(&ckpt)?, None)
    };
    let raw = level1.scores(&x)?;
    let scaled = scale_scores(&raw)?;
    let probs = head.as_ref().map(|h| h.predict(&x)).transpose()?;
    let mut w = BufWriter::new(File::create(run.path("scores.csv"))?);
    write!(w, "id,label,score,scaled")?;
    if probs.is_some() {
        write!(w, ",p_S,p_V,p_F,pred")?;
    }
    writeln!(w)?;
    for (i, b) in beats.iter().enumerate() {
        write!(w, "{}:{i},{},{},{}", b.record_id, b.label.token(), raw[i], scaled[i])?;
        if let Some(p) = &probs {
            let p = &p[i];
            let pred = Class::ABNORMAL[crate::metrics::argmax(p)].token();
            write!(w, ",{},{},{},{pred}", p[0], p[1], p[2])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(beats.len())
}

#[derive(Clone, Debug)]
pub struct EvaluateSummary {
    pub level1: EvalReport,
    pub level2: Option<EvalReport>,
    /// Mean and standard deviation per metric over folds.
    pub folds: Option<serde_json::Value>,
}

/// Threshold from a stratified validation slice, report on the rest.
pub fn binary_report(scores: &[f64], labels: &[bool], val_fraction: f64, seed: u64) -> Result<EvalReport> {
    let ids: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let (rest, val) = stratified_split(&ids, 2, val_fraction, seed);
    let pick = |idx: &[usize]| -> (Vec<f64>, Vec<bool>) {
        (idx.iter().map(|&i| scores[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let (vs, vl) = pick(&val);
    let (rs, rl) = pick(&rest);
    let thr = best_f_threshold(&vs, &vl)?;
    EvalReport::binary(&rs, &rl, thr)
}

fn fold_summary(rows: &[[f64; 6]]) -> serde_json::Value {
    let names = ["auroc", "auprc", "recall", "precision", "f_score", "accuracy"];
    let mut map = serde_json::Map::new();
    for (k, name) in names.iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let (m, s) = mean_std(&vals);
        map.insert(name.to_string(), json!({ "mean": m, "std": s, "folds": vals }));
    }
    serde_json::Value::Object(map)
}

fn row(r: &EvalReport) -> [f64; 6] {
    [r.auroc, r.auprc, r.metrics.recall, r.metrics.precision, r.metrics.f_score, r.metrics.accuracy]
}

/// Level-1 report on min-max scaled scores (plus the second-level report
/// when the checkpoint has a head). With `folds`, also k-fold mean ± std:
/// the threshold is chosen on k − 1 folds and applied to the held-out one.
pub fn evaluate(run: &Run, checkpoint: &Path, data: &Path, folds: bool) -> Result<EvaluateSummary> {
    let ckpt = load_checkpoint(checkpoint)?;
    let beats = read_beats(data)?;
    let labels: Vec<bool> = beats.iter().map(|b| b.label != Class::N).collect();
    if !(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)) {
        return Err(Error::invalid("evaluation data needs both normal and abnormal beats"));
    }
    run.prepare("evaluate")?;
    let (level1, head) = if has_head(&ckpt) {
        let (l1, l2) = Level2::from_checkpoint(&ckpt)?;
        (l1, Some(l2))
    } else {
        (Level1::from_checkpoint(&ckpt)?, None)
    };
    let x = model_inputs(&beats);
    let scaled = scale_scores(&level1.scores(&x)?)?;
    let seed = run.cfg.seed;
    let level1_report = binary_report(&scaled, &labels, run.cfg.eval_val_fraction, seed)?;
    level1_report.write(&run.out_dir, "level1")?;

    let abn: Vec<usize> = (0..beats.len()).filter(|&i| labels[i]).collect();
    let abn_labels: Vec<usize> = abn.iter().map(|&i| beats[i].label.abnormal_index().unwrap_or(0)).collect();
    let abn_x: Vec<Vec<f64>> = abn.iter().map(|&i| x[i].clone()).collect();
    let mut level2_report = None;
    if let Some(h) = &head {
        let present = (0..3).all(|c| abn_labels.contains(&c));
        if present {
            let names: Vec<&str> = Class::ABNORMAL.iter().map(|c| c.token()).collect();
            let r = EvalReport::multiclass(&h.predict(&abn_x)?, &abn_labels, &names)?;
            r.write(&run.out_dir, "level2_eval")?;
            level2_report = Some(r);
        } else {
            log::warn!("second-level report skipped: evaluation data lacks some of S, V, F");
        }
    }

    let mut fold_json = None;
    if folds {
        let k = run.cfg.eval_folds;
        let ids: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
        let mut rows = Vec::new();
        for f in kfold(&ids, k, seed, true)? {
            let pick = |idx: &[usize]| -> (Vec<f64>, Vec<bool>) {
                (idx.iter().map(|&i| scaled[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
            };
            let (ts, tl) = pick(&f.train);
            let (es, el) = pick(&f.test);
            let thr = best_f_threshold(&ts, &tl)?;
            let m = point_metrics(&es, &el, thr)?;
            rows.push([
                crate::metrics::auroc(&es, &el)?,
                crate::metrics::auprc(&es, &el)?,
                m.recall,
                m.precision,
                m.f_score,
                m.accuracy,
            ]);
        }
        let mut j = json!({ "folds": k, "level1": fold_summary(&rows) });
        if let (Some(h), Some(_)) = (&head, &level2_report) {
            let feats = h.extractor.extract(&abn_x)?;
            let cfg = Level2Config { branches: h.head.branches, ..run.cfg.level2_config() };
            let reps = cross_validate(&feats, &abn_labels, h.extractor.channels(), k, &cfg)?;
            j["level2"] = fold_summary(&reps.iter().map(row).collect::<Vec<_>>());
        }
        fs::write(
            run.path("folds.json"),
            serde_json::to_string_pretty(&j).map_err(|e| Error::invalid(e.to_string()))? + "\n",
        )?;
        fold_json = Some(j);
    }
    Ok(EvaluateSummary { level1: level1_report, level2: level2_report, folds: fold_json })
}
