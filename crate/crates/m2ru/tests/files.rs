use std::fs;

use m2ru::checkpoint::{decode, encode, load_checkpoint, save_checkpoint, Checkpoint, VERSION};
use m2ru::config::RunConfig;
use m2ru::experiments::{drive, load_stream, new_run, write_run_outputs};
use m2ru::features::{load_features, save_features};
use m2ru::idx::{load_idx, save_idx};
use m2ru::Error;
use m2ru_core::harness::{synthetic_digits, FeatureSet};
use m2ru_core::rng::{below, stream, uniform_f64, Stream};
use m2ru_core::trainer::BackendKind;

fn small_config(backend: BackendKind) -> RunConfig {
    let mut cfg = RunConfig {
        backend,
        ..RunConfig::default()
    };
    cfg.data.tasks = 2;
    cfg.data.n_train = 60;
    cfg.data.n_test = 30;
    cfg.replay.capacity_per_task = 20;
    cfg
}

#[test]
fn idx_round_trip_preserves_8_bit_images() {
    let dir = tempfile::tempdir().unwrap();
    let set = synthetic_digits(25, 4);
    let (img, lbl) = (dir.path().join("img.idx"), dir.path().join("lbl.idx"));
    save_idx(&set, &img, &lbl).unwrap();
    let back = load_idx(&img, &lbl).unwrap();
    assert_eq!((back.rows, back.cols), (28, 28));
    assert_eq!(back.labels, set.labels);
    for (a, b) in back.pixels.iter().zip(&set.pixels) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        assert_eq!((a * 255.0).round() / 255.0, *a);
    }
    save_idx(&back, &img, &lbl).unwrap();
    assert_eq!(load_idx(&img, &lbl).unwrap(), back);
}

#[test]
fn idx_count_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img.idx"), dir.path().join("lbl.idx"));
    save_idx(&synthetic_digits(3, 1), &img, dir.path().join("unused").as_path()).unwrap();
    save_idx(&synthetic_digits(4, 1), dir.path().join("unused2").as_path(), &lbl).unwrap();
    assert!(matches!(load_idx(&img, &lbl), Err(Error::Idx { .. })));
}

#[test]
fn feature_file_of_100_rows_round_trips() {
    let mut rng = stream(17, Stream::Dataset);
    let dim = 12;
    let features = (0..100 * dim).map(|_| (uniform_f64(&mut rng) - 0.5) * 1e3).collect();
    let labels = (0..100).map(|_| below(&mut rng, 10)).collect();
    let set = FeatureSet::new(dim, features, labels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    save_features(&set, &path).unwrap();
    let back = load_features(&path).unwrap();
    assert_eq!(back, set);
    let first = fs::read(&path).unwrap();
    save_features(&back, &path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

fn mid_run_checkpoint(backend: BackendKind) -> (RunConfig, Checkpoint) {
    let cfg = small_config(backend);
    let ts = load_stream(&cfg).unwrap();
    let mut run = new_run(&cfg).unwrap();
    drive(&cfg, &ts, &mut run, None, Some(17)).unwrap();
    assert!(!run.is_finished());
    (cfg.clone(), Checkpoint { config: cfg, run })
}

#[test]
fn checkpoint_save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for backend in [BackendKind::Reference, BackendKind::Crossbar] {
        let (_, ckpt) = mid_run_checkpoint(backend);
        let path = dir.path().join("c.bin");
        save_checkpoint(&ckpt, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, ckpt);
        save_checkpoint(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }
}

#[test]
fn corrupt_checkpoint_fails_checksum() {
    let (_, ckpt) = mid_run_checkpoint(BackendKind::Reference);
    let mut bytes = encode(&ckpt).unwrap();
    let last = bytes.len() - 10;
    bytes[last] ^= 0x01;
    let err = decode(&bytes, "c.bin".as_ref()).unwrap_err();
    assert!(matches!(err, Error::Checksum { .. }), "{err}");
}

#[test]
fn checkpoint_version_mismatch_is_explicit() {
    let (_, ckpt) = mid_run_checkpoint(BackendKind::Reference);
    let mut bytes = encode(&ckpt).unwrap();
    bytes[8..12].copy_from_slice(&(VERSION + 1).to_le_bytes());
    match decode(&bytes, "c.bin".as_ref()).unwrap_err() {
        Error::CheckpointVersion { found, expected, .. } => assert_eq!((found, expected), (VERSION + 1, VERSION)),
        other => panic!("{other}"),
    }
    assert!(matches!(
        decode(b"garbage", "c.bin".as_ref()),
        Err(Error::Checkpoint { .. })
    ));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    for backend in [BackendKind::Reference, BackendKind::Crossbar] {
        let (cfg, ckpt) = mid_run_checkpoint(backend);
        let ts = load_stream(&cfg).unwrap();
        let path = dir.path().join("mid.bin");
        save_checkpoint(&ckpt, &path).unwrap();
        let mut resumed = load_checkpoint(&path).unwrap().run;
        resumed.run_to_end(&ts).unwrap();

        let mut whole = new_run(&cfg).unwrap();
        whole.run_to_end(&ts).unwrap();
        assert_eq!(resumed, whole);

        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        write_run_outputs(&cfg, &whole, &a).unwrap();
        write_run_outputs(&cfg, &resumed, &b).unwrap();
        for f in [
            "steps.csv",
            "accuracy.csv",
            "summary.json",
            "write_cdf.csv",
            "config.toml",
        ] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }
}
