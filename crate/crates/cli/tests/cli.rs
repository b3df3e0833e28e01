use ndarray::Array3;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use volnorm::isgen::IsGenModel;
use volnorm::mlkit::{kfold_cv, Dataset, EvalReport, Forest};
use volnorm::normalize::read_volcache3;
use volnorm::radiomics::parse_feature_table;
use volnorm::volume::{read_nifti, write_nifti, Orientation, Volume3D};

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_volnorm"));
    c.args(args).env_remove("VOLNORM_CACHE_DIR");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.txt");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "phantom.shape = 12, 16, 16
isgen.image_size = 16
isgen.off_epochs = 1
isgen.on_epochs = 1
isgen.cycles = 1
isgen.d_max = 2
isgen.triplets = 8
isgen.val_triplets = 4
normalize.target = 32
select.window = 16
rf.n_estimators = 10
";

fn corpus(dir: &Path, cfg: &Path, n: usize, name: &str) -> PathBuf {
    let out = dir.join(name);
    ok(&["phantom", "--config", s(cfg), "--out", s(&out), "--n", &n.to_string()]);
    out
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn phantom_corpus_is_complete_balanced_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = corpus(tmp.path(), &cfg, 10, "a");
    let b = corpus(tmp.path(), &cfg, 10, "b");
    let subjects: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    assert_eq!(subjects.len(), 10);
    let mut positives = 0;
    for d in &subjects {
        for f in ["FLAIR.nii", "T1wCE.nii", "T2w.nii", "mask.nii", "label.txt"] {
            assert!(d.join(f).is_file(), "{} lacks {f}", d.display());
        }
        let v = read_nifti(d.join("FLAIR.nii")).unwrap();
        assert_eq!(v.shape(), [12, 16, 16]);
        positives += std::fs::read_to_string(d.join("label.txt")).unwrap().trim().parse::<usize>().unwrap();
    }
    assert_eq!(positives, 5);
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
    let c = tmp.path().join("c");
    ok(&["phantom", "--config", s(&cfg), "--seed", "1", "--out", s(&c), "--n", "10"]);
    assert_ne!(tree_bytes(&a), tree_bytes(&c));
}

#[test]
fn train_isgen_writes_a_loadable_checkpoint_and_one_log_line_per_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let data = corpus(tmp.path(), &cfg, 3, "corpus");
    let ckpt = tmp.path().join("flair.ckpt");
    let out = ok(&["train-isgen", "--config", s(&cfg), "--corpus", s(&data), "--modality", "FLAIR", "--out", s(&ckpt)]);
    assert!(out.contains("2 epochs"), "{out}");
    let model = IsGenModel::load(&ckpt).unwrap();
    assert_eq!(model.image_size(), 16);
    let log = std::fs::read_to_string(tmp.path().join("flair.ckpt.log")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let again = tmp.path().join("again.ckpt");
    ok(&["train-isgen", "--config", s(&cfg), "--corpus", s(&data), "--modality", "FLAIR", "--out", s(&again)]);
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn missing_inputs_fail_with_a_clear_message() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let out = run(&["train-isgen", "--corpus", s(&missing), "--modality", "FLAIR", "--out", s(&tmp.path().join("x.ckpt"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("does not exist"), "{err}");
    assert!(!tmp.path().join("x.ckpt").exists());

    let cfg = write_config(tmp.path(), "seed = 1\nbogus = 2\n");
    let out = run(&["phantom", "--config", s(&cfg), "--out", s(&tmp.path().join("c")), "--n", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn corpus_files_are_checked_against_their_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let data = corpus(tmp.path(), &cfg, 2, "corpus");
    let flair = data.join("sub-0001/FLAIR.nii");
    let mut v = read_nifti(&flair).unwrap().into_data();
    v[[0, 0, 0]] += 1.0;
    write_nifti(&Volume3D::new(v, [1.0; 3], Orientation::Axial, "FLAIR").unwrap(), &flair).unwrap();
    let out = run(&["radiomics", "--in", s(&data), "--out", s(&tmp.path().join("f.csv"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest hash"));
}

#[test]
fn normalize_yields_cubes_and_reuses_its_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "phantom.shape = 8, 12, 12\n");
    let data = corpus(tmp.path(), &cfg, 2, "corpus");
    let out = tmp.path().join("norm");
    let args = ["normalize", "--config", s(&cfg), "--in", s(&data), "--out", s(&out)];
    let first = ok(&args);
    assert!(first.contains("8 computed, 0 cached, 0 re-derived"), "{first}");
    let manifest = std::fs::read_to_string(out.join("normalized.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 9);
    for line in manifest.lines().skip(1) {
        let file = line.split('\t').nth(3).unwrap();
        assert_eq!(read_volcache3(out.join(file)).unwrap().shape(), [128, 128, 128]);
        assert!(line.contains("\tCoronal\t"));
    }
    let before = tree_bytes(&out);

    let second = ok(&args);
    assert!(second.contains("0 computed, 8 cached, 0 re-derived"), "{second}");
    assert_eq!(tree_bytes(&out), before);

    let victim = out.join("sub-0000/T2w.volcache");
    let mut bytes = std::fs::read(&victim).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&victim, bytes).unwrap();
    let third = ok(&args);
    assert!(third.contains("0 computed, 7 cached, 1 re-derived"), "{third}");
    assert_eq!(tree_bytes(&out), before);

    // a separate cache directory holds the entries; outputs are unchanged
    let cache = tmp.path().join("cache");
    let out2 = tmp.path().join("norm2");
    let args2 = ["normalize", "--config", s(&cfg), "--in", s(&data), "--out", s(&out2)];
    let r = run_env(&args2, &[("VOLNORM_CACHE_DIR", &cache)]);
    assert!(r.status.success());
    assert!(cache.join("sub-0001/mask.volcache").is_file());
    let r = run_env(&args2, &[("VOLNORM_CACHE_DIR", &cache)]);
    assert!(String::from_utf8_lossy(&r.stdout).contains("8 cached"));
    let strip = |t: Vec<(String, Vec<u8>)>| t.into_iter().filter(|(n, _)| !n.ends_with(".key")).collect::<Vec<_>>();
    assert_eq!(strip(tree_bytes(&out2)), strip(before));

    // changed settings invalidate the cache
    let cfg64 = write_config(tmp.path(), "phantom.shape = 8, 12, 12\nnormalize.target = 64\nselect.window = 32\n");
    let r = ok(&["normalize", "--config", s(&cfg64), "--in", s(&data), "--out", s(&out)]);
    assert!(r.contains("8 computed"), "{r}");
}

fn features_of(path: &Path) -> Dataset {
    let (_, rows) = parse_feature_table(&std::fs::read_to_string(path).unwrap()).unwrap();
    Dataset::new(rows.iter().map(|r| r.values.clone()).collect(), rows.iter().map(|r| r.label).collect()).unwrap()
}

#[test]
fn classification_pipeline_reproduces_library_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let data = corpus(tmp.path(), &cfg, 40, "corpus");
    let norm = tmp.path().join("norm");
    ok(&["normalize", "--config", s(&cfg), "--in", s(&data), "--out", s(&norm)]);

    let windows = tmp.path().join("windows.tsv");
    ok(&["select", "--config", s(&cfg), "--in", s(&norm), "--out", s(&windows)]);
    let text = std::fs::read_to_string(&windows).unwrap();
    assert_eq!(text.lines().count(), 41);
    for line in text.lines().skip(1) {
        let f: Vec<usize> = line.split('\t').skip(2).map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[2] - f[1], 16);
        assert!(f[1] <= f[0] && f[0] < f[2] && f[2] <= 32);
    }
    ok(&["select", "--config", s(&cfg), "--in", s(&norm), "--out", s(&windows), "--mode", "central"]);
    // raw volumes are thinner than the window
    assert!(!run(&["select", "--config", s(&cfg), "--in", s(&data), "--out", s(&windows)]).status.success());

    let table = tmp.path().join("features.csv");
    ok(&["radiomics", "--in", s(&norm), "--out", s(&table)]);
    let header = std::fs::read_to_string(&table).unwrap().lines().next().unwrap().split(',').count();
    assert_eq!(header, 2 + 39);

    let forest = tmp.path().join("forest.json");
    ok(&["train-rf", "--config", s(&cfg), "--features", s(&table), "--out", s(&forest)]);
    let f: Forest = serde_json::from_str(&std::fs::read_to_string(&forest).unwrap()).unwrap();
    assert_eq!(f.trees.len(), 10);

    let report = tmp.path().join("report.json");
    let printed = ok(&["evaluate", "--config", s(&cfg), "--forest", s(&forest), "--features", s(&table), "--out", s(&report), "--name", "enhanced"]);
    assert!(printed.starts_with("Model,"), "{printed}");
    let got: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let want = kfold_cv(&features_of(&table), &f.config, 5, 0).unwrap();
    assert_eq!(got, want);

    let other = tmp.path().join("other.json");
    ok(&["evaluate", "--config", s(&cfg), "--seed", "1", "--forest", s(&forest), "--features", s(&table), "--out", s(&other)]);
    // with seed 3 one test fold holds a single class, leaving specificity and AUROC undefined
    let partial = tmp.path().join("partial.json");
    ok(&["evaluate", "--config", s(&cfg), "--seed", "3", "--forest", s(&forest), "--features", s(&table), "--out", s(&partial)]);
    let r = run(&["anova", s(&report), s(&partial)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("undefined"));
    let anova_out = tmp.path().join("anova.txt");
    let printed = ok(&["anova", s(&report), s(&other), "--out", s(&anova_out)]);
    assert_eq!(printed.trim_end(), std::fs::read_to_string(&anova_out).unwrap().trim_end());
    for factor in ["A,", "B,", "Interaction,"] {
        assert!(printed.lines().any(|l| l.starts_with(factor)), "{printed}");
    }
}

#[test]
fn full_grid_search_emits_every_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "phantom.shape = 16, 16, 16\n");
    let data = corpus(tmp.path(), &cfg, 20, "corpus");
    let table = tmp.path().join("features.csv");
    ok(&["radiomics", "--in", s(&data), "--out", s(&table)]);
    // the defaults are the full tuning grid
    let grid = tmp.path().join("grid.txt");
    std::fs::write(&grid, "# full grid\n").unwrap();
    let forest = tmp.path().join("forest.json");
    let grid_table = tmp.path().join("grid.csv");
    let out = ok(&["train-rf", "--config", s(&cfg), "--features", s(&table), "--out", s(&forest), "--grid", s(&grid), "--table", s(&grid_table)]);
    assert!(out.contains("searched 4320 configurations"), "{out}");
    assert_eq!(std::fs::read_to_string(&grid_table).unwrap().lines().count(), 4321);

    std::fs::write(&grid, "grid.n_estimators = 5\nseed = 2\n").unwrap();
    let r = run(&["train-rf", "--features", s(&table), "--out", s(&forest), "--grid", s(&grid)]);
    assert!(!r.status.success(), "non-grid keys are rejected in grid files");
}

#[test]
fn impute_single_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let slice = |v: f32| {
        let data = ndarray_from(|r, c| v + (r * 4 + c) as f32);
        Volume3D::new(data, [2.0, 1.0, 1.0], Orientation::Axial, "FLAIR").unwrap()
    };
    let (a, b) = (tmp.path().join("a.nii"), tmp.path().join("b.nii"));
    write_nifti(&slice(0.0), &a).unwrap();
    write_nifti(&slice(10.0), &b).unwrap();
    let c = tmp.path().join("c.nii");
    ok(&["impute", "--single", s(&a), s(&b), "--out", s(&c)]);
    let got = read_nifti(&c).unwrap();
    assert_eq!(got.data(), slice(0.0).data());
    assert_eq!(got.spacing(), [1.0, 1.0, 1.0]);
    ok(&["impute", "--single", s(&a), s(&b), "--out", s(&c), "--imputer", "mean"]);
    assert_eq!(read_nifti(&c).unwrap().data(), slice(5.0).data());

    let cfg = write_config(tmp.path(), SMALL);
    let data = corpus(tmp.path(), &cfg, 2, "corpus");
    let ckpt = tmp.path().join("m.ckpt");
    ok(&["train-isgen", "--config", s(&cfg), "--corpus", s(&data), "--modality", "FLAIR", "--out", s(&ckpt)]);
    ok(&["impute", "--single", s(&a), s(&b), "--out", s(&c), "--model", s(&ckpt)]);
    let v = read_nifti(&c).unwrap();
    assert_eq!(v.shape(), [1, 4, 4]);
    assert!(v.data().iter().all(|&x| (0.0..=25.0).contains(&x)));

    let three = tmp.path().join("three.nii");
    write_nifti(&read_nifti(data.join("sub-0000/FLAIR.nii")).unwrap(), &three).unwrap();
    assert!(!run(&["impute", "--single", s(&a), s(&three), "--out", s(&c)]).status.success());
}

fn ndarray_from(f: impl Fn(usize, usize) -> f32) -> Array3<f32> {
    Array3::from_shape_fn((1, 4, 4), |(_, r, c)| f(r, c))
}
