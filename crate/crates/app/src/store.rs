//! On-disk project store: one file per artifact plus a JSON index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    MoveSequence,
    HoldsSequence,
    Clip,
    Dataset,
    Checkpoint,
}

impl ArtifactKind {
    fn dir(self) -> &'static str {
        match self {
            ArtifactKind::MoveSequence | ArtifactKind::HoldsSequence => "sequences",
            ArtifactKind::Clip => "clips",
            ArtifactKind::Dataset => "datasets",
            ArtifactKind::Checkpoint => "checkpoints",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            ArtifactKind::MoveSequence | ArtifactKind::HoldsSequence => "seq",
            ArtifactKind::Clip => "clip",
            ArtifactKind::Dataset => "data",
            ArtifactKind::Checkpoint => "ckpt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub kind: ArtifactKind,
    /// Path relative to the store root.
    pub file: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    next_id: u64,
    entries: BTreeMap<String, Entry>,
}

/// Artifacts addressed by id. Writes are serialized; the last write to an
/// id wins.
#[derive(Debug)]
pub struct ProjectStore {
    root: PathBuf,
    index: Mutex<Index>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl ProjectStore {
    /// Opens or creates a store. Index entries whose file has disappeared
    /// are dropped.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).with_context(|| format!("creating store at {}", root.display()))?;
        let index_path = root.join(INDEX_FILE);
        let mut index: Index = if index_path.exists() {
            serde_json::from_slice(&fs::read(&index_path)?).with_context(|| format!("reading {}", index_path.display()))?
        } else {
            Index::default()
        };
        index.entries.retain(|id, e| {
            let ok = root.join(&e.file).is_file();
            if !ok {
                log::warn!("store entry {id} points at missing file {}; dropped", e.file);
            }
            ok
        });
        let store = Self { root, index: Mutex::new(index) };
        store.save_index(&store.index.lock().expect("store lock"))?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn save_index(&self, index: &Index) -> Result<()> {
        write_atomic(&self.root.join(INDEX_FILE), &serde_json::to_vec_pretty(index)?)
    }

    /// Stores `bytes` under a fresh id.
    pub fn insert(&self, kind: ArtifactKind, bytes: &[u8]) -> Result<String> {
        let mut index = self.index.lock().expect("store lock");
        let id = loop {
            index.next_id += 1;
            let id = format!("{}-{:06}", kind.prefix(), index.next_id);
            if !index.entries.contains_key(&id) {
                break id;
            }
        };
        self.write_entry(&mut index, &id, kind, bytes)?;
        Ok(id)
    }

    /// Creates or replaces the artifact `id`.
    pub fn put(&self, id: &str, kind: ArtifactKind, bytes: &[u8]) -> Result<()> {
        if !valid_id(id) {
            bail!("invalid artifact id `{id}`");
        }
        let mut index = self.index.lock().expect("store lock");
        self.write_entry(&mut index, id, kind, bytes)
    }

    fn write_entry(&self, index: &mut Index, id: &str, kind: ArtifactKind, bytes: &[u8]) -> Result<()> {
        let dir = self.root.join(kind.dir());
        fs::create_dir_all(&dir)?;
        let file = format!("{}/{id}.json", kind.dir());
        write_atomic(&self.root.join(&file), bytes)?;
        index.entries.insert(id.to_string(), Entry { kind, file });
        self.save_index(index)
    }

    pub fn get(&self, id: &str) -> Result<Option<(Entry, Vec<u8>)>> {
        let entry = match self.index.lock().expect("store lock").entries.get(id) {
            Some(e) => e.clone(),
            None => return Ok(None),
        };
        let bytes = fs::read(self.root.join(&entry.file)).with_context(|| format!("reading artifact {id}"))?;
        Ok(Some((entry, bytes)))
    }

    pub fn list(&self) -> Vec<(String, Entry)> {
        self.index.lock().expect("store lock").entries.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}
