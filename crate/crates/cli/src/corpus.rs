//! On-disk corpus layouts.
//!
//! A raw corpus holds one directory per subject plus a manifest:
//!
//! ```text
//! DIR/corpus.tsv                 subject  label  item  file  sha256
//! DIR/sub-0000/FLAIR.nii
//! DIR/sub-0000/T1wCE.nii
//! DIR/sub-0000/T2w.nii
//! DIR/sub-0000/mask.nii
//! DIR/sub-0000/label.txt
//! ```
//!
//! A normalized corpus stores each item as a VOLCACHE file. Its manifest
//! also carries the orientation and spacing lost by the raw array format and
//! the hash of the input each item was derived from:
//!
//! ```text
//! DIR/normalized.tsv             subject  label  item  file  sha256  input_sha256  orientation  spacing
//! DIR/sub-0000/FLAIR.volcache
//! ```

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use volnorm::normalize::{parse_volcache, write_atomic};
use volnorm::volume::{read_nifti_bytes, Mask3D, Orientation, Volume3D, SUBJECT_MODALITIES};

pub const RAW_MANIFEST: &str = "corpus.tsv";
pub const NORMALIZED_MANIFEST: &str = "normalized.tsv";
pub const MASK_ITEM: &str = "mask";

const RAW_HEADER: &str = "subject\tlabel\titem\tfile\tsha256";
const NORMALIZED_HEADER: &str = "subject\tlabel\titem\tfile\tsha256\tinput_sha256\torientation\tspacing";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Atomically write `bytes`, read them back and check the hash. Returns the
/// hex digest.
pub fn write_verified(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    let digest = sha256_hex(bytes);
    let back = std::fs::read(path).with_context(|| format!("re-reading {}", path.display()))?;
    if sha256_hex(&back) != digest {
        bail!("{} did not read back as written", path.display());
    }
    Ok(digest)
}

pub fn subject_id(index: usize) -> String {
    format!("sub-{index:04}")
}

/// The items of every subject, modalities first.
pub fn items() -> Vec<&'static str> {
    SUBJECT_MODALITIES.iter().copied().chain([MASK_ITEM]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub subject: String,
    pub label: u8,
    pub item: String,
    /// Relative to the corpus directory.
    pub file: String,
    pub sha256: String,
    /// Normalized corpora only.
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub input_sha256: String,
    pub orientation: Orientation,
    pub spacing: [f32; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Raw,
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub layout: Layout,
    pub entries: Vec<Entry>,
}

fn format_spacing(s: [f32; 3]) -> String {
    format!("{},{},{}", s[0], s[1], s[2])
}

fn parse_spacing(s: &str) -> Result<[f32; 3]> {
    let v: Vec<f32> = s.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| anyhow!("spacing {s:?} is not three numbers"))
}

impl Manifest {
    pub fn file_name(&self) -> &'static str {
        match self.layout {
            Layout::Raw => RAW_MANIFEST,
            Layout::Normalized => NORMALIZED_MANIFEST,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(match self.layout {
            Layout::Raw => RAW_HEADER,
            Layout::Normalized => NORMALIZED_HEADER,
        });
        s.push('\n');
        for e in &self.entries {
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}", e.subject, e.label, e.item, e.file, e.sha256));
            if let Some(p) = &e.provenance {
                s.push_str(&format!("\t{}\t{}\t{}", p.input_sha256, p.orientation, format_spacing(p.spacing)));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, layout: Layout) -> Result<Manifest> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| anyhow!("empty manifest"))?;
        let (expected, width) = match layout {
            Layout::Raw => (RAW_HEADER, 5),
            Layout::Normalized => (NORMALIZED_HEADER, 8),
        };
        if header != expected {
            bail!("unexpected manifest header {header:?}");
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != width {
                bail!("manifest line {}: expected {width} fields, found {}", i + 2, f.len());
            }
            let label: u8 = f[1].parse().with_context(|| format!("manifest line {}: label", i + 2))?;
            if label > 1 {
                bail!("manifest line {}: label must be 0 or 1", i + 2);
            }
            let provenance = match layout {
                Layout::Raw => None,
                Layout::Normalized => Some(Provenance {
                    input_sha256: f[5].to_string(),
                    orientation: f[6].parse().map_err(|e| anyhow!("manifest line {}: {e}", i + 2))?,
                    spacing: parse_spacing(f[7]).with_context(|| format!("manifest line {}", i + 2))?,
                }),
            };
            entries.push(Entry {
                subject: f[0].to_string(),
                label,
                item: f[2].to_string(),
                file: f[3].to_string(),
                sha256: f[4].to_string(),
                provenance,
            });
        }
        Ok(Manifest { layout, entries })
    }

    /// Read whichever manifest `dir` holds.
    pub fn load(dir: &Path) -> Result<Manifest> {
        if !dir.is_dir() {
            bail!("corpus directory {} does not exist", dir.display());
        }
        for layout in [Layout::Normalized, Layout::Raw] {
            let m = Manifest { layout, entries: Vec::new() };
            let path = dir.join(m.file_name());
            if path.exists() {
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                return Manifest::parse(&text, layout).with_context(|| format!("in {}", path.display()));
            }
        }
        bail!("{} holds neither {RAW_MANIFEST} nor {NORMALIZED_MANIFEST}", dir.display())
    }

    /// Subjects in manifest order, each with its label and entries.
    pub fn subjects(&self) -> Result<Vec<(String, u8, BTreeMap<String, Entry>)>> {
        let mut out: Vec<(String, u8, BTreeMap<String, Entry>)> = Vec::new();
        for e in &self.entries {
            match out.last_mut() {
                Some((s, label, items)) if *s == e.subject => {
                    if *label != e.label {
                        bail!("subject {s} has conflicting labels");
                    }
                    if items.insert(e.item.clone(), e.clone()).is_some() {
                        bail!("subject {s} lists {} twice", e.item);
                    }
                }
                _ => {
                    if out.iter().any(|(s, _, _)| *s == e.subject) {
                        bail!("subject {} is not contiguous in the manifest", e.subject);
                    }
                    out.push((e.subject.clone(), e.label, BTreeMap::from([(e.item.clone(), e.clone())])));
                }
            }
        }
        for (s, _, have) in &out {
            for want in items() {
                if !have.contains_key(want) {
                    bail!("subject {s} lacks {want}");
                }
            }
        }
        Ok(out)
    }
}

/// Read an entry's bytes and check them against the manifest hash.
pub fn read_checked(dir: &Path, e: &Entry) -> Result<Vec<u8>> {
    let path = dir.join(&e.file);
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    if sha256_hex(&bytes) != e.sha256 {
        bail!("{} does not match its manifest hash", path.display());
    }
    Ok(bytes)
}

pub fn mask_from_volume(v: &Volume3D) -> Result<Mask3D> {
    Ok(Mask3D::new(v.data().mapv(|x| u8::from(x > 0.5)), v.spacing())?)
}

/// Decode one entry as a volume.
pub fn load_volume(dir: &Path, e: &Entry) -> Result<Volume3D> {
    let bytes = read_checked(dir, e)?;
    let vol = match &e.provenance {
        None => read_nifti_bytes(&bytes).with_context(|| format!("decoding {}", e.file))?,
        Some(p) => {
            let data = parse_volcache(&bytes)
                .with_context(|| format!("decoding {}", e.file))?
                .into_dimensionality()
                .map_err(|_| anyhow!("{} is not rank 3", e.file))?;
            Volume3D::new(data, p.spacing, p.orientation, e.item.as_str())?
        }
    };
    Ok(vol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub label: u8,
    pub volumes: BTreeMap<String, Volume3D>,
    pub mask: Mask3D,
}

pub fn load_subjects(dir: &Path) -> Result<Vec<Subject>> {
    let manifest = Manifest::load(dir)?;
    manifest
        .subjects()?
        .into_iter()
        .map(|(id, label, items)| {
            let mut volumes = BTreeMap::new();
            for m in SUBJECT_MODALITIES {
                volumes.insert(m.to_string(), load_volume(dir, &items[m])?.with_modality(m));
            }
            let mask = mask_from_volume(&load_volume(dir, &items[MASK_ITEM])?)?;
            Ok(Subject { id, label, volumes, mask })
        })
        .collect()
}

/// Like [`load_subjects`] but decoding only one modality.
pub fn load_modality(dir: &Path, modality: &str) -> Result<Vec<Volume3D>> {
    let manifest = Manifest::load(dir)?;
    manifest
        .subjects()?
        .into_iter()
        .map(|(id, _, items)| {
            let e = items.get(modality).ok_or_else(|| anyhow!("subject {id} has no {modality}"))?;
            load_volume(dir, e)
        })
        .collect()
}

pub fn relative(subject: &str, item: &str, ext: &str) -> String {
    format!("{subject}/{item}.{ext}")
}
