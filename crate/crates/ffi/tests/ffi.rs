use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use madegan::classifier::{train_second_level, FeatureExtractor, Level2Config};
use madegan::gan::{self, Arch, Level1, TrainConfig};
use madegan::synth::{self, synth_beats, Jitter, Mix, RecordingConfig};
use madegan::tensor::Checkpoint;
use madegan_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SMALL: Arch = Arch { width: 4, latent: 16, slots: 64 };

fn last_error() -> String {
    unsafe { CStr::from_ptr(mg_last_error()) }.to_string_lossy().into_owned()
}

fn raw_beats(n: usize, mix: Mix, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let b = synth_beats(n, &mix, &Jitter::default(), &mut ChaCha8Rng::seed_from_u64(seed));
    (b.iter().map(|b| b.waveform.clone()).collect(), b.iter().map(|b| b.label.abnormal_index().unwrap_or(0)).collect())
}

fn level1() -> Level1 {
    let (x, _) = raw_beats(64, Mix::NORMAL, 1);
    let x: Vec<Vec<f64>> = x.iter().map(|b| gan::to_model_input(b)).collect();
    let mut m = Level1::new(SMALL, TrainConfig { epochs: 1, batch_size: 32, seed: 2, ..Default::default() }).unwrap();
    m.fit(&x, None, |_| {}).unwrap();
    m
}

fn with_head(l1: &Level1) -> Checkpoint {
    let (x, y) = raw_beats(60, Mix::new([0.0, 0.3, 0.5, 0.2]).unwrap(), 3);
    let x: Vec<Vec<f64>> = x.iter().map(|b| gan::to_model_input(b)).collect();
    let cfg = Level2Config { epochs: 1, batch_size: 16, ..Default::default() };
    let out = train_second_level(&x, &y, FeatureExtractor::from_level1(l1).unwrap(), &cfg).unwrap();
    let mut c = l1.to_checkpoint();
    out.model.append_to(&mut c);
    c
}

fn load_bytes(bytes: &[u8]) -> *mut MgModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mg_model_load_bytes(bytes.as_ptr(), bytes.len(), &mut m) }, MgStatus::Ok, "{}", last_error());
    assert!(!m.is_null());
    m
}

#[test]
fn version_and_beat_length() {
    let v = unsafe { CStr::from_ptr(mg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert_eq!(mg_beat_len(), 320);
}

#[test]
fn scores_match_the_library() {
    let l1 = level1();
    let m = load_bytes(&l1.to_checkpoint().to_bytes());
    let mut info = MgModelInfo::default();
    assert_eq!(unsafe { mg_model_info(m, &mut info) }, MgStatus::Ok);
    assert_eq!(info, MgModelInfo { width: 4, latent: 16, slots: 64, epochs_trained: 1, branches: 0 });

    let (x, _) = raw_beats(5, Mix::new([0.5, 0.0, 0.5, 0.0]).unwrap(), 4);
    let flat = x.concat();
    let mut out = vec![0.0; 5];
    assert_eq!(unsafe { mg_model_score(m, flat.as_ptr(), 5, out.as_mut_ptr()) }, MgStatus::Ok);
    let want = l1.scores(&x.iter().map(|b| gan::to_model_input(b)).collect::<Vec<_>>()).unwrap();
    assert_eq!(out, want);
    assert_eq!(last_error(), "");

    let mut probs = vec![0.0; 15];
    assert_eq!(unsafe { mg_model_classify(m, flat.as_ptr(), 5, probs.as_mut_ptr()) }, MgStatus::NoHead);
    assert!(last_error().contains("head"));
    unsafe { mg_model_free(m) };
}

#[test]
fn classification_with_head() {
    let l1 = level1();
    let m = load_bytes(&with_head(&l1).to_bytes());
    let mut info = MgModelInfo::default();
    assert_eq!(unsafe { mg_model_info(m, &mut info) }, MgStatus::Ok);
    assert_eq!(info.branches, 4);
    let (x, _) = raw_beats(3, Mix::new([0.0, 0.0, 1.0, 0.0]).unwrap(), 5);
    let mut probs = vec![0.0; 9];
    assert_eq!(unsafe { mg_model_classify(m, x.concat().as_ptr(), 3, probs.as_mut_ptr()) }, MgStatus::Ok);
    for p in probs.chunks(3) {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    unsafe { mg_model_free(m) };
}

#[test]
fn load_errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    let path = CString::new("/definitely/not/here.mgan").unwrap();
    assert_eq!(unsafe { mg_model_load(path.as_ptr(), &mut m) }, MgStatus::Io);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let junk = b"NOPE....";
    assert_eq!(unsafe { mg_model_load_bytes(junk.as_ptr(), junk.len(), &mut m) }, MgStatus::Checkpoint);
    assert_eq!(unsafe { mg_model_load(ptr::null(), &mut m) }, MgStatus::NullPointer);
    assert_eq!(unsafe { mg_model_score(ptr::null(), ptr::null(), 0, ptr::null_mut()) }, MgStatus::NullPointer);
    unsafe { mg_model_free(ptr::null_mut()) };
}

#[test]
fn metric_entry_points() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut a = 0.0;
    assert_eq!(unsafe { mg_auroc(scores.as_ptr(), labels.as_ptr(), 4, &mut a) }, MgStatus::Ok);
    assert_eq!(a, 0.75);
    assert_eq!(unsafe { mg_auprc(scores.as_ptr(), labels.as_ptr(), 4, &mut a) }, MgStatus::Ok);
    assert!((a - madegan::metrics::auprc(&scores, &[false, false, true, true]).unwrap()).abs() < 1e-15);
    let one_class = [1u8; 4];
    assert_eq!(unsafe { mg_auroc(scores.as_ptr(), one_class.as_ptr(), 4, &mut a) }, MgStatus::InvalidArgument);

    let mut scaled = [0.0; 4];
    assert_eq!(unsafe { mg_scale_scores(scores.as_ptr(), 4, scaled.as_mut_ptr()) }, MgStatus::Ok);
    assert_eq!((scaled[0], scaled[3]), (0.0, 1.0));
}

#[test]
fn signal_entry_points() {
    let cfg = RecordingConfig { duration_s: 20.0, ..Default::default() };
    let rec = synth::render_recording(&cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let x: Vec<f64> = rec.recording.lead();
    let mut filtered = vec![0.0; x.len()];
    let st = unsafe { mg_highpass(x.as_ptr(), x.len(), 360.0, 0.5, 301, filtered.as_mut_ptr()) };
    assert_eq!(st, MgStatus::Ok);
    let (mut count, mut small) = (0usize, [0usize; 2]);
    let st = unsafe { mg_detect_r_peaks(filtered.as_ptr(), filtered.len(), 360.0, small.as_mut_ptr(), 2, &mut count) };
    assert_eq!(st, MgStatus::BufferTooSmall);
    let mut peaks = vec![0usize; count];
    let st =
        unsafe { mg_detect_r_peaks(filtered.as_ptr(), filtered.len(), 360.0, peaks.as_mut_ptr(), count, &mut count) };
    assert_eq!(st, MgStatus::Ok);
    assert_eq!(count, rec.peaks.len());
    for (p, t) in peaks.iter().zip(&rec.peaks) {
        assert!(p.abs_diff(*t) <= 5, "{p} vs {t}");
    }
    let st = unsafe { mg_highpass(x.as_ptr(), x.len(), 360.0, 0.5, 300, filtered.as_mut_ptr()) };
    assert_eq!(st, MgStatus::InvalidArgument);
}

fn static_lib() -> Option<PathBuf> {
    let deps = std::env::current_exe().ok()?.parent()?.to_path_buf();
    [deps.parent()?.join("libmadegan_ffi.a"), deps.join("libmadegan_ffi.a")].into_iter().find(|p| p.exists())
}

#[test]
fn c_program_links_against_the_header() {
    let Some(lib) = static_lib() else {
        panic!("static library not found next to the test binary");
    };
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.mgan");
    level1().to_checkpoint().save(&ckpt).unwrap();
    let exe = dir.path().join("smoke");
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&exe).arg(&ckpt).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("width=4 latent=16 slots=64 score=0 classify=8"), "{text}");
    assert!(text.contains("missing=5 null=1"), "{text}");
}
