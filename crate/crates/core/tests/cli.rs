use std::path::Path;

use motiondiff::cli::{main_with_args, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use motiondiff::dataio::{read_features, Checkpoint, ClipFile};
use motiondiff::representation::decode_positions;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("motiondiff").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pipeline_from_synthetic_data_to_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run_dir = dir.path().join("run");
    let samples = dir.path().join("samples");
    assert_eq!(run(&["gen-synth", "--out", p(&data), "--clips", "12", "--frames", "8"]), EXIT_OK);
    assert_eq!(std::fs::read_dir(&data).unwrap().count(), 13);

    let train = ["train", "--data", p(&data), "--kind", "rpqjr", "--steps", "6", "--batch-size", "4", "--log-every", "2"];
    let mut args = train.to_vec();
    args.extend(["--out", p(&run_dir), "--checkpoint-every", "3"]);
    assert_eq!(run(&args), EXIT_OK);
    let ck = Checkpoint::read(run_dir.join("checkpoint.ckpt")).unwrap();
    assert_eq!(ck.step, 6);

    // resuming from step 3 lands on the same parameters as the straight run
    let resumed = dir.path().join("resumed");
    let mid = run_dir.join("checkpoint_00000003.ckpt");
    let mut args = train.to_vec();
    args.extend(["--out", p(&resumed), "--resume", p(&mid)]);
    assert_eq!(run(&args), EXIT_OK);
    let again = Checkpoint::read(resumed.join("checkpoint.ckpt")).unwrap();
    assert_eq!(again.params, ck.params);
    assert_eq!(again.optimizer, ck.optimizer);

    let ckpt = run_dir.join("checkpoint.ckpt");
    assert_eq!(run(&["sample", "--checkpoint", p(&ckpt), "--count", "5", "--chunk", "2", "--out", p(&samples)]), EXIT_OK);
    let feats: Vec<_> = std::fs::read_dir(&samples).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "feat").collect();
    assert_eq!(feats.len(), 5);
    let fm = read_features(samples.join("sample_00004.feat")).unwrap();
    assert_eq!((fm.frames, fm.dim()), (8, 20));
    ClipFile::read(samples.join("sample_00004.clip")).unwrap();

    assert_eq!(run(&["eval", "--real", p(&data), "--generated", p(&samples), "--pairs", "5"]), EXIT_OK);
}

#[test]
fn convert_round_trip_and_header_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(run(&["gen-synth", "--out", p(&data), "--clips", "1", "--joints", "6", "--generator", "figure-eight"]), EXIT_OK);
    let clip = data.join("clip_00000.clip");
    let skel = data.join("skeleton.json");
    let original = ClipFile::read(&clip).unwrap();
    let want = original.clip.joint_positions(&original.skeleton).unwrap();
    for (kind, dim) in [("rp6jr", 42), ("rpqjr", 28), ("rpajr", 21), ("rpejr", 21), ("rpmjr", 63)] {
        let feat = dir.path().join(format!("{kind}.feat"));
        let back = dir.path().join(format!("{kind}.clip"));
        assert_eq!(run(&["convert", "--input", p(&clip), "--kind", kind, "--out", p(&feat)]), EXIT_OK);
        let bytes = std::fs::read(&feat).unwrap();
        assert_eq!(u32::from_le_bytes(bytes[32..36].try_into().unwrap()), dim);
        assert_eq!(run(&["convert", "--input", p(&feat), "--inverse", "--skeleton", p(&skel), "--out", p(&back)]), EXIT_OK);
        let got = ClipFile::read(&back).unwrap();
        let pos = got.clip.joint_positions(&got.skeleton).unwrap();
        let err = want.iter().flatten().zip(pos.iter().flatten()).flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs())).fold(0.0, f64::max);
        assert!(err < 1e-6, "{kind}: {err}");
    }
    // positions carry no rotations, so there is nothing to invert to
    let jp = dir.path().join("jp.feat");
    assert_eq!(run(&["convert", "--input", p(&clip), "--kind", "jp", "--out", p(&jp)]), EXIT_OK);
    let fm = read_features(&jp).unwrap();
    assert_eq!(fm.dim(), 18);
    let pos = decode_positions(&fm, &original.skeleton).unwrap();
    assert_eq!(pos.len(), original.clip.frames());
    assert_eq!(run(&["convert", "--input", p(&jp), "--inverse", "--skeleton", p(&skel), "--out", p(&dir.path().join("x.clip"))]), EXIT_DATA);
}

#[test]
fn smooth_keeps_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(run(&["gen-synth", "--out", p(&data), "--clips", "1"]), EXIT_OK);
    let out = dir.path().join("smooth.clip");
    assert_eq!(run(&["smooth", "--input", p(&data.join("clip_00000.clip")), "--out", p(&out), "--sigma", "2"]), EXIT_OK);
    let a = ClipFile::read(data.join("clip_00000.clip")).unwrap();
    let b = ClipFile::read(&out).unwrap();
    assert_eq!(a.clip.frames(), b.clip.frames());
    assert_ne!(a.clip, b.clip);
    assert_eq!(run(&["smooth", "--input", p(&data.join("clip_00000.clip")), "--out", p(&out), "--sigma", "0"]), EXIT_DATA);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.feat");
    assert_eq!(run(&["convert", "--input", "missing.clip", "--kind", "bogus", "--out", p(&out)]), EXIT_USAGE);
    assert_eq!(run(&["no-such-command"]), EXIT_USAGE);
    assert_eq!(run(&["convert", "--input", p(&dir.path().join("missing.clip")), "--kind", "jp", "--out", p(&out)]), EXIT_DATA);
    std::fs::write(dir.path().join("junk.clip"), b"not a clip").unwrap();
    assert_eq!(run(&["convert", "--input", p(&dir.path().join("junk.clip")), "--kind", "jp", "--out", p(&out)]), EXIT_DATA);
    assert_eq!(run(&["--help"]), EXIT_OK);
}
