//! One function per subcommand. Each validates its inputs, writes outputs
//! through [`write_verified`] and returns a short summary for stdout.

use crate::config::Config;
use crate::corpus::{
    items, load_modality, load_subjects, load_volume, mask_from_volume, relative, sha256_hex, subject_id, write_verified,
    Entry, Layout, Manifest, Provenance, MASK_ITEM,
};
use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use volnorm::isgen::{on_off_train, sample_triplets, IsGenModel};
use volnorm::mlkit::{anova_two_way, fit_forest, grid_search, kfold_cv, report_table, Dataset, EvalReport, Forest, ParamGrid};
use volnorm::normalize::{
    cached_array3, normalize_mask, normalize_volume, normalized_spacing, volcache_bytes, CacheStatus, CopyImputer, IsGenImputer,
    MeanImputer, SliceImputer,
};
use volnorm::radiomics::{extract_all, feature_names, parse_feature_table, write_feature_table, FeatureRow};
use volnorm::selection::{central_selection, enhanced_selection};
use volnorm::tensorkit::checkpoint_bytes;
use volnorm::volume::{nifti_bytes, nifti_mask_bytes, phantom_subject, read_nifti, Orientation, Volume3D, SUBJECT_MODALITIES};

/// Environment variable naming the normalization cache directory. Defaults
/// to the output directory.
pub const CACHE_DIR_ENV: &str = "VOLNORM_CACHE_DIR";

pub fn phantom(cfg: &Config, out: &Path, n: usize) -> Result<String> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let mut entries = Vec::new();
    for i in 0..n {
        let id = subject_id(i);
        let s = phantom_subject(cfg.seed, i, &cfg.phantom)?;
        let orientation = cfg.phantom.orientation;
        for item in items() {
            let bytes = match s.volumes.get(item) {
                Some(v) => nifti_bytes(v)?,
                None => nifti_mask_bytes(&s.mask, orientation)?,
            };
            let file = relative(&id, item, "nii");
            let sha256 = write_verified(&out.join(&file), &bytes)?;
            entries.push(Entry { subject: id.clone(), label: s.label, item: item.to_string(), file, sha256, provenance: None });
        }
        write_verified(&out.join(&id).join("label.txt"), format!("{}\n", s.label).as_bytes())?;
    }
    let manifest = Manifest { layout: Layout::Raw, entries };
    write_verified(&out.join(manifest.file_name()), manifest.to_text().as_bytes())?;
    let positives = manifest.subjects()?.iter().filter(|s| s.1 == 1).count();
    Ok(format!("wrote {n} subjects ({positives} positive) to {}", out.display()))
}

/// Subjects used for validation during generator training: every tenth,
/// starting with the last, and never all of them.
fn validation_split(n: usize) -> Vec<bool> {
    let mut val: Vec<bool> = (0..n).map(|i| (n - 1 - i) % 10 == 0).collect();
    if n < 2 {
        val = vec![false; n];
    }
    val
}

pub fn train_isgen(cfg: &Config, corpus: &Path, modality: &str, out: &Path, log: Option<&Path>) -> Result<String> {
    let vols = load_modality(corpus, modality).with_context(|| format!("loading {modality} from {}", corpus.display()))?;
    if vols.is_empty() {
        bail!("corpus {} has no subjects", corpus.display());
    }
    let split = validation_split(vols.len());
    let (val, train): (Vec<_>, Vec<_>) = vols.into_iter().zip(&split).partition(|(_, &v)| v);
    let train: Vec<Volume3D> = train.into_iter().map(|(v, _)| v).collect();
    let mut val: Vec<Volume3D> = val.into_iter().map(|(v, _)| v).collect();
    if val.is_empty() {
        val = train.clone();
    }
    let tc = cfg.train_config();
    let train_t = sample_triplets(&train, cfg.triplets, tc.d_max, cfg.image_size, cfg.seed)?;
    let val_t = sample_triplets(&val, cfg.val_triplets.max(1), tc.d_max, cfg.image_size, cfg.seed.wrapping_add(1))?;
    let mut model = IsGenModel::new(cfg.generator_config(), cfg.discriminator_config(), cfg.seed)?;
    let history = on_off_train(&mut model, &train_t, &val_t, &tc)?;
    write_verified(out, &checkpoint_bytes(&model.named_values()))?;
    // the checkpoint must load back into an equivalent model
    let back = IsGenModel::load(out)?;
    if back.named_values() != model.named_values() {
        bail!("checkpoint {} does not reload", out.display());
    }
    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(out, ".log"));
    write_verified(&log_path, history.to_text().as_bytes())?;
    let last = history.epochs.last().and_then(|e| e.val_rl).ok_or_else(|| anyhow!("no validation loss was recorded"))?;
    Ok(format!(
        "trained {modality} generator for {} epochs on {} triplets; final validation reconstruction loss {last:.6}",
        history.epochs.len(),
        train_t.len(),
    ))
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `MODALITY=checkpoint` pairs.
pub fn parse_model_arg(s: &str) -> Result<(String, PathBuf)> {
    let (m, p) = s.split_once('=').ok_or_else(|| anyhow!("expected MODALITY=CHECKPOINT, got {s:?}"))?;
    Ok((m.to_string(), PathBuf::from(p)))
}

struct LoadedModel {
    model: IsGenModel,
    sha256: String,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CacheCounts {
    pub hit: usize,
    pub computed: usize,
    pub rederived: usize,
}

impl CacheCounts {
    fn add(&mut self, s: CacheStatus) {
        match s {
            CacheStatus::Hit => self.hit += 1,
            CacheStatus::Computed => self.computed += 1,
            CacheStatus::Rederived => self.rederived += 1,
        }
    }
}

pub fn normalize(cfg: &Config, input: &Path, out: &Path, models: &[(String, PathBuf)], cache_dir: Option<&Path>) -> Result<String> {
    let manifest = Manifest::load(input)?;
    if manifest.layout != Layout::Raw {
        bail!("{} is already normalized", input.display());
    }
    let mut loaded = BTreeMap::new();
    for (m, path) in models {
        if !SUBJECT_MODALITIES.contains(&m.as_str()) {
            bail!("no modality named {m:?}; expected one of {SUBJECT_MODALITIES:?}");
        }
        let bytes = std::fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
        let model = IsGenModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        if loaded.insert(m.clone(), LoadedModel { model, sha256: sha256_hex(&bytes) }).is_some() {
            bail!("two checkpoints given for {m}");
        }
    }
    let cache_dir = cache_dir.unwrap_or(out);
    let target = cfg.target;
    let mut counts = CacheCounts::default();
    let mut entries = Vec::new();
    for (id, label, subject_items) in manifest.subjects()? {
        let orientation = load_volume(input, &subject_items[MASK_ITEM])?.orientation();
        for item in items() {
            let e = &subject_items[item];
            let vol = load_volume(input, e)?;
            let model = loaded.get(item);
            let imputer = match model {
                Some(m) => format!("isgen:{}", m.sha256),
                None => "copy".to_string(),
            };
            let key = format!("target={target}\timputer={imputer}\tinput={}\n", e.sha256);
            let file = relative(&id, item, "volcache");
            let cache_path = cache_dir.join(&file);
            if let Some(dir) = cache_path.parent() {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mask = if item == MASK_ITEM { Some(mask_from_volume(&vol)?) } else { None };
            let (data, status) = cached_array3(&cache_path, &key, || {
                let v = if let Some(mask) = &mask {
                    normalize_mask(mask, orientation, target)?.data().mapv(f32::from)
                } else {
                    match model {
                        Some(m) => normalize_volume(&vol, &IsGenImputer::new(&m.model.generator), target)?.into_data(),
                        None => normalize_volume(&vol, &CopyImputer, target)?.into_data(),
                    }
                };
                Ok(v)
            })
            .with_context(|| format!("normalizing {id} {item}"))?;
            counts.add(status);
            if data.shape() != [target; 3] {
                bail!("{id} {item}: normalized shape {:?} is not {target}³", data.shape());
            }
            let bytes = volcache_bytes(&data.into_dyn());
            let out_path = out.join(&file);
            let sha256 = if out_path == cache_path { sha256_hex(&std::fs::read(&out_path)?) } else { write_verified(&out_path, &bytes)? };
            if sha256 != sha256_hex(&bytes) {
                bail!("{} does not hold the normalized data", out_path.display());
            }
            let spacing = normalized_spacing(&vol, target)?;
            let provenance = Some(Provenance { input_sha256: e.sha256.clone(), orientation: Orientation::Coronal, spacing });
            entries.push(Entry { subject: id.clone(), label, item: item.to_string(), file, sha256, provenance });
        }
    }
    let manifest = Manifest { layout: Layout::Normalized, entries };
    write_verified(&out.join(manifest.file_name()), manifest.to_text().as_bytes())?;
    Ok(format!(
        "normalized {} items to {target}^3: {} computed, {} cached, {} re-derived",
        manifest.entries.len(),
        counts.computed,
        counts.hit,
        counts.rederived
    ))
}

pub fn radiomics(input: &Path, out: &Path) -> Result<String> {
    let subjects = load_subjects(input)?;
    let mut rows = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let fv = extract_all(&s.volumes, &s.mask).with_context(|| format!("extracting features for {}", s.id))?;
        rows.push(FeatureRow { subject: s.id.clone(), label: s.label, values: fv.values });
    }
    let text = write_feature_table(&feature_names(), &rows)?;
    // the written table must parse back to the same rows
    if parse_feature_table(&text)?.1 != rows {
        bail!("feature table does not round-trip");
    }
    write_verified(out, text.as_bytes())?;
    Ok(format!("wrote {} features for {} subjects to {}", feature_names().len(), rows.len(), out.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SelectMode {
    /// Center on the largest tumor cross-section.
    Enhanced,
    /// Center on the slice with the most foreground.
    Central,
}

pub fn select(cfg: &Config, input: &Path, out: &Path, mode: SelectMode, modality: &str, threshold: f32) -> Result<String> {
    let subjects = load_subjects(input)?;
    let mut text = String::from("subject\tlabel\tcenter\tstart\tend\n");
    for s in &subjects {
        let vol = s.volumes.get(modality).ok_or_else(|| anyhow!("{} has no {modality}", s.id))?;
        let sel = match mode {
            SelectMode::Enhanced => enhanced_selection(vol, &s.mask, cfg.window),
            SelectMode::Central => central_selection(vol, threshold, cfg.window),
        }
        .with_context(|| format!("selecting slices for {}", s.id))?;
        text.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", s.id, s.label, sel.center, sel.range.start, sel.range.end));
    }
    write_verified(out, text.as_bytes())?;
    Ok(format!("wrote {}-slice windows for {} subjects to {}", cfg.window, subjects.len(), out.display()))
}

pub fn load_dataset(features: &Path) -> Result<(Vec<String>, Dataset)> {
    let text = std::fs::read_to_string(features).with_context(|| format!("reading {}", features.display()))?;
    let (names, rows) = parse_feature_table(&text).with_context(|| format!("in {}", features.display()))?;
    let y = rows.iter().map(|r| r.label).collect();
    let x = rows.into_iter().map(|r| r.values).collect();
    Ok((names, Dataset::new(x, y)?))
}

/// Grid file: a config file restricted to `grid.*` keys.
pub fn load_grid(path: &Path) -> Result<ParamGrid> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        if !line.starts_with("grid.") {
            bail!("{}: only grid.* keys are allowed, found {line:?}", path.display());
        }
    }
    Ok(Config::parse(&text).with_context(|| format!("in grid {}", path.display()))?.grid)
}

pub fn train_rf(cfg: &Config, features: &Path, out: &Path, grid: Option<&Path>, table: Option<&Path>) -> Result<String> {
    let (_, data) = load_dataset(features)?;
    let base = cfg.forest_config();
    let (config, summary) = match grid {
        None => (base, String::new()),
        Some(g) => {
            let grid = load_grid(g)?;
            let search = grid_search(&data, &grid, &base, cfg.k, cfg.seed)?;
            let table = table.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(out, ".grid.csv"));
            write_verified(&table, search.to_text().as_bytes())?;
            let best = search.best().clone();
            (best, format!("; searched {} configurations, table in {}", search.rows.len(), table.display()))
        }
    };
    let forest = fit_forest(&data, &config)?;
    let json = serde_json::to_string_pretty(&forest)?;
    if serde_json::from_str::<Forest>(&json)? != forest {
        bail!("forest does not round-trip through JSON");
    }
    write_verified(out, json.as_bytes())?;
    Ok(format!("fit {} trees on {} subjects{summary}", forest.trees.len(), data.len()))
}

pub fn evaluate(cfg: &Config, forest: &Path, features: &Path, out: &Path, name: &str) -> Result<String> {
    let text = std::fs::read_to_string(forest).with_context(|| format!("reading {}", forest.display()))?;
    let forest: Forest = serde_json::from_str(&text).with_context(|| format!("parsing {}", forest.display()))?;
    let (_, data) = load_dataset(features)?;
    if data.dim() != forest.n_features() {
        bail!("forest expects {} features, table has {}", forest.n_features(), data.dim());
    }
    let report = kfold_cv(&data, &forest.config, cfg.k, cfg.seed)?;
    let json = serde_json::to_string_pretty(&report)?;
    if serde_json::from_str::<EvalReport>(&json)? != report {
        bail!("report does not round-trip through JSON");
    }
    write_verified(out, json.as_bytes())?;
    Ok(format!("{}\n{}", report_table(&[(name, &report)]).trim_end(), report.fold_table().trim_end()))
}

pub fn anova(reports: &[PathBuf], alpha: f64, out: Option<&Path>) -> Result<String> {
    if reports.len() < 2 {
        bail!("anova needs at least two reports");
    }
    let mut values = Vec::with_capacity(reports.len());
    for p in reports {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: EvalReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        values.push(r.replicates().ok_or_else(|| anyhow!("{}: some fold left a metric undefined", p.display()))?);
    }
    let table = anova_two_way(&values, alpha)?;
    let text = table.to_text();
    if let Some(o) = out {
        write_verified(o, text.as_bytes())?;
    }
    Ok(text.trim_end().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ImputerKind {
    Copy,
    Mean,
}

/// Impute the slice midway between two single-slice volumes.
pub fn impute(a: &Path, b: &Path, out: &Path, model: Option<&Path>, kind: ImputerKind) -> Result<String> {
    let read = |p: &Path| read_nifti(p).with_context(|| format!("reading {}", p.display()));
    let (va, vb) = (read(a)?, read(b)?);
    for (v, p) in [(&va, a), (&vb, b)] {
        if v.n_slices() != 1 {
            bail!("{} holds {} slices, expected 1", p.display(), v.n_slices());
        }
    }
    if va.shape() != vb.shape() {
        bail!("slice shapes differ: {:?} vs {:?}", va.shape(), vb.shape());
    }
    let (lo_a, hi_a) = va.min_max();
    let (lo_b, hi_b) = vb.min_max();
    let range = (lo_a.min(lo_b), hi_a.max(hi_b));
    let (left, right) = (va.slice(0), vb.slice(0));
    let (slice, how) = match model {
        Some(p) => {
            let m = IsGenModel::load(p).with_context(|| format!("loading checkpoint {}", p.display()))?;
            (IsGenImputer::new(&m.generator).impute(&left, &right, range)?, "isgen")
        }
        None => match kind {
            ImputerKind::Copy => (CopyImputer.impute(&left, &right, range)?, "copy"),
            ImputerKind::Mean => (MeanImputer.impute(&left, &right, range)?, "mean"),
        },
    };
    let v = va.with_slices(&[slice], va.spacing()[0] / 2.0)?;
    write_verified(out, &nifti_bytes(&v)?)?;
    Ok(format!("imputed a {}x{} slice with the {how} imputer", v.shape()[1], v.shape()[2]))
}
