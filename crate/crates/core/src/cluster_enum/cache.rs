//! On-disk cache for set lists and `L_k` values.
//!
//! Layout under the cache root:
//!
//! ```text
//! sets/k{K}-c{C}.bin   set lists for sizes 1..=K with coordinate budget C
//! sets/canon-k{K}.bin  canonical-only set lists for sizes 1..=K
//! lk/k{K}.json         one LkValue
//! ```
//!
//! Binary set files are `HCXSETS\0`, a little-endian `u32` format version,
//! `k_max`, budget and a canonical-only flag as `u32`, then per size a `u64` count followed by the
//! packed keys as little-endian `u128`, and finally the SHA-256 of everything
//! before it. A file that fails any check is rebuilt and overwritten.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CanonicalSetList, LkValue, SetKey};
use crate::error::{Error, Result};

pub const CACHE_ENV: &str = "HCX_CACHE_DIR";
const MAGIC: &[u8; 8] = b"HCXSETS\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheStatus {
    /// No cache root configured; computed in process.
    Disabled,
    /// Already computed earlier in this process.
    Memory,
    Hit,
    Miss,
    /// A cache file existed but failed validation and was replaced.
    Rebuilt,
}

/// The explicit directory if given, else `$HCX_CACHE_DIR` if set and non-empty.
pub fn cache_root(explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn encode(lists: &CanonicalSetList) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(lists.k_max() as u32).to_le_bytes());
    buf.extend_from_slice(&lists.coord_budget().to_le_bytes());
    buf.extend_from_slice(&(lists.is_canonical_only() as u32).to_le_bytes());
    for keys in lists.all_keys() {
        buf.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for k in keys {
            buf.extend_from_slice(&k.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Which list a cache file holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListKind {
    Full { budget: u32 },
    Canonical,
}

impl ListKind {
    fn budget(self, k_max: usize) -> u32 {
        match self {
            ListKind::Full { budget } => budget,
            ListKind::Canonical => 2 * (k_max as u32 - 1),
        }
    }
}

fn decode(bytes: &[u8], k_max: usize, kind: ListKind) -> Option<CanonicalSetList> {
    let budget = kind.budget(k_max);
    let canonical_only = kind == ListKind::Canonical;
    if bytes.len() < 20 + 32 {
        return None;
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return None;
    }
    let mut r = body;
    let mut take = |n: usize| -> Option<&[u8]> {
        if r.len() < n {
            return None;
        }
        let (head, tail) = r.split_at(n);
        r = tail;
        Some(head)
    };
    if take(8)? != MAGIC {
        return None;
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    if u32_at(take(4)?) != FORMAT_VERSION
        || u32_at(take(4)?) as usize != k_max
        || u32_at(take(4)?) != budget
        || u32_at(take(4)?) != canonical_only as u32
    {
        return None;
    }
    let mut by_size = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let raw = take(n.checked_mul(16)?)?;
        let keys: Vec<SetKey> = raw
            .chunks_exact(16)
            .map(|c| u128::from_le_bytes(c.try_into().unwrap()))
            .collect();
        by_size.push(keys);
    }
    if !r.is_empty() {
        return None;
    }
    Some(CanonicalSetList::from_parts(k_max, budget, canonical_only, by_size))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| Error::Cache(format!("no parent directory for {}", path.display())))?;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().unwrap().to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn set_list_path(root: &Path, k_max: usize, kind: ListKind) -> PathBuf {
    let name = match kind {
        ListKind::Full { budget } => format!("k{k_max}-c{budget}.bin"),
        ListKind::Canonical => format!("canon-k{k_max}.bin"),
    };
    root.join("sets").join(name)
}

fn build(k_max: usize, kind: ListKind) -> Result<CanonicalSetList> {
    match kind {
        ListKind::Full { budget } => CanonicalSetList::build_with_budget(k_max, budget),
        ListKind::Canonical => CanonicalSetList::build_canonical(k_max),
    }
}

pub fn lk_path(root: &Path, k: usize) -> PathBuf {
    root.join("lk").join(format!("k{k}.json"))
}

/// Load set lists from `root`, or build and store them.
pub fn load_or_build(root: Option<&Path>, k_max: usize, kind: ListKind) -> Result<(CanonicalSetList, CacheStatus)> {
    let Some(root) = root else {
        return Ok((build(k_max, kind)?, CacheStatus::Disabled));
    };
    let path = set_list_path(root, k_max, kind);
    let existing = fs::read(&path).ok();
    if let Some(lists) = existing.as_deref().and_then(|b| decode(b, k_max, kind)) {
        return Ok((lists, CacheStatus::Hit));
    }
    let lists = build(k_max, kind)?;
    write_atomic(&path, &encode(&lists))?;
    let status = if existing.is_some() {
        CacheStatus::Rebuilt
    } else {
        CacheStatus::Miss
    };
    Ok((lists, status))
}

fn list_memory() -> &'static Mutex<HashMap<usize, Arc<CanonicalSetList>>> {
    static CELL: OnceLock<Mutex<HashMap<usize, Arc<CanonicalSetList>>>> = OnceLock::new();
    CELL.get_or_init(Default::default)
}

/// Canonical-only set lists for clusters up to size `k`, memoised in process.
pub fn lists_for(k: usize, root: Option<&Path>) -> Result<(Arc<CanonicalSetList>, CacheStatus)> {
    let memory = list_memory().lock().unwrap();
    if let Some((_, lists)) = memory.iter().filter(|(&kk, _)| kk >= k).min_by_key(|(&kk, _)| kk) {
        return Ok((lists.clone(), CacheStatus::Memory));
    }
    drop(memory);
    let (lists, status) = load_or_build(root, k, ListKind::Canonical)?;
    let lists = Arc::new(lists);
    list_memory().lock().unwrap().insert(k, lists.clone());
    Ok((lists, status))
}

#[derive(Serialize, Deserialize)]
struct LkFile {
    format: u32,
    value: LkValue,
    sha256: String,
}

fn lk_digest(value: &LkValue) -> Result<String> {
    let body = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect())
}

pub(super) fn load_or_compute_lk(root: Option<&Path>, k: usize) -> Result<(LkValue, CacheStatus)> {
    let path = root.map(|r| lk_path(r, k));
    let existing = path.as_ref().and_then(|p| fs::read(p).ok());
    if let Some(bytes) = &existing {
        if let Ok(file) = serde_json::from_slice::<LkFile>(bytes) {
            if file.format == FORMAT_VERSION && file.value.k() == k && lk_digest(&file.value)? == file.sha256 {
                return Ok((file.value, CacheStatus::Hit));
            }
        }
    }
    let (lists, _) = lists_for(k, root)?;
    let value = LkValue::from_lists(&lists, k)?;
    let Some(path) = path else {
        return Ok((value, CacheStatus::Disabled));
    };
    let file = LkFile {
        format: FORMAT_VERSION,
        sha256: lk_digest(&value)?,
        value,
    };
    write_atomic(&path, &serde_json::to_vec_pretty(&file)?)?;
    let status = if existing.is_some() {
        CacheStatus::Rebuilt
    } else {
        CacheStatus::Miss
    };
    Ok((file.value, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: ListKind = ListKind::Full { budget: 4 };

    #[test]
    fn canonical_lists_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (built, status) = load_or_build(Some(dir.path()), 4, ListKind::Canonical).unwrap();
        assert_eq!(status, CacheStatus::Miss);
        let (loaded, status) = load_or_build(Some(dir.path()), 4, ListKind::Canonical).unwrap();
        assert_eq!(status, CacheStatus::Hit);
        assert!(loaded.is_canonical_only());
        assert_eq!(encode(&built), encode(&loaded));
        // A full list with the same budget must not be mistaken for it.
        let (full, status) = load_or_build(Some(dir.path()), 4, ListKind::Full { budget: 6 }).unwrap();
        assert_eq!(status, CacheStatus::Miss);
        assert!(!full.is_canonical_only());
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (built, status) = load_or_build(Some(dir.path()), 3, FULL).unwrap();
        assert_eq!(status, CacheStatus::Miss);
        let (loaded, status) = load_or_build(Some(dir.path()), 3, FULL).unwrap();
        assert_eq!(status, CacheStatus::Hit);
        assert_eq!(encode(&built), encode(&loaded));
        assert_eq!(fs::read(set_list_path(dir.path(), 3, FULL)).unwrap(), encode(&built));
    }

    #[test]
    fn corrupted_file_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let (built, _) = load_or_build(Some(dir.path()), 3, FULL).unwrap();
        let path = set_list_path(dir.path(), 3, FULL);
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        let (loaded, status) = load_or_build(Some(dir.path()), 3, FULL).unwrap();
        assert_eq!(status, CacheStatus::Rebuilt);
        assert_eq!(encode(&built), encode(&loaded));
        fs::write(&path, b"garbage").unwrap();
        assert_eq!(load_or_build(Some(dir.path()), 3, FULL).unwrap().1, CacheStatus::Rebuilt);
    }

    #[test]
    fn lk_cache_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let (v, s) = load_or_compute_lk(Some(dir.path()), 2).unwrap();
        assert_eq!(s, CacheStatus::Miss);
        let (w, s) = load_or_compute_lk(Some(dir.path()), 2).unwrap();
        assert_eq!(s, CacheStatus::Hit);
        assert_eq!(v, w);
        let path = lk_path(dir.path(), 2);
        let mut file: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        let terms = file["value"]["terms"].as_object_mut().unwrap();
        let first = terms.values_mut().next().unwrap();
        first[0][1] = serde_json::Value::String("12345".into());
        fs::write(&path, serde_json::to_vec(&file).unwrap()).unwrap();
        let (x, s) = load_or_compute_lk(Some(dir.path()), 2).unwrap();
        assert_eq!(s, CacheStatus::Rebuilt);
        assert_eq!(v, x);
        fs::write(&path, b"{").unwrap();
        assert_eq!(load_or_compute_lk(Some(dir.path()), 2).unwrap().1, CacheStatus::Rebuilt);
    }
}
