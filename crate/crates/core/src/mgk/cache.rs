//! Normalized-kernel cache keyed by unordered canonical-SMILES pairs.
//!
//! On-disk format (version 1), UTF-8 text:
//!
//! ```text
//! # alms kernel cache v1
//! # fingerprint <hex digest of the MGK hyperparameters>
//! key_a,key_b,value
//! C(C)C,CCCC,9.87e-1
//! ```
//!
//! Rows are sorted by `(key_a, key_b)` with `key_a <= key_b`; values use
//! shortest round-trip scientific notation.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dashmap::DashMap;

use super::MgkHyperparameters;
use crate::error::{Error, Result};

const MAGIC: &str = "# alms kernel cache v1";
const HEADER: &str = "key_a,key_b,value";

#[derive(Debug, Default)]
pub struct KernelCache {
    fingerprint: String,
    entries: DashMap<(String, String), f64>,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

impl KernelCache {
    pub fn new(params: &MgkHyperparameters) -> Self {
        KernelCache {
            fingerprint: params.fingerprint(),
            entries: DashMap::new(),
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.entries.get(&key(a, b)).map(|v| *v)
    }

    /// Concurrent inserts of the same key are allowed; the values are equal.
    pub fn insert(&self, a: &str, b: &str, value: f64) {
        self.entries.insert(key(a, b), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<((String, String), f64)> = self
            .entries
            .iter()
            .map(|e| (e.key().clone(), *e.value()))
            .collect();
        rows.sort_by(|x, y| x.0.cmp(&y.0));
        let tmp = path.with_extension("tmp");
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&tmp, e);
        writeln!(w, "{MAGIC}").map_err(io)?;
        writeln!(w, "# fingerprint {}", self.fingerprint).map_err(io)?;
        writeln!(w, "{HEADER}").map_err(io)?;
        for ((a, b), v) in rows {
            writeln!(w, "{a},{b},{v:e}").map_err(io)?;
        }
        w.flush().map_err(io)?;
        drop(w);
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Loads a cache file. A file written for different hyperparameters is
    /// rejected.
    pub fn load(path: &Path, params: &MgkHyperparameters) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> Result<Option<String>> {
            lines.next().transpose().map_err(|e| Error::io(path, e))
        };
        let bad = |detail: String| Error::Format {
            what: "kernel cache",
            detail,
        };
        if next()?.as_deref() != Some(MAGIC) {
            return Err(bad("missing version header".into()));
        }
        let fp_line = next()?.unwrap_or_default();
        let fingerprint = fp_line
            .strip_prefix("# fingerprint ")
            .ok_or_else(|| bad("missing fingerprint".into()))?;
        let cache = KernelCache::new(params);
        if fingerprint != cache.fingerprint {
            return Err(bad(format!(
                "written for hyperparameters {fingerprint}, expected {}",
                cache.fingerprint
            )));
        }
        if next()?.as_deref() != Some(HEADER) {
            return Err(bad("missing column header".into()));
        }
        let mut lineno = 3;
        while let Some(line) = next()? {
            lineno += 1;
            let mut parts = line.split(',');
            let (Some(a), Some(b), Some(v), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(format!("line {lineno}: expected three fields")));
            };
            let value: f64 = v
                .parse()
                .map_err(|_| bad(format!("line {lineno}: bad value {v:?}")))?;
            cache.insert(a, b, value);
        }
        Ok(cache)
    }

    /// Loads `path` if it exists and matches `params`, otherwise starts empty.
    pub fn load_or_new(path: &Path, params: &MgkHyperparameters) -> Self {
        if !path.exists() {
            return KernelCache::new(params);
        }
        match KernelCache::load(path, params) {
            Ok(cache) => cache,
            Err(e) => {
                log::warn!("ignoring kernel cache {}: {e}", path.display());
                KernelCache::new(params)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unordered_keys() {
        let c = KernelCache::new(&MgkHyperparameters::default());
        c.insert("CCCC", "C(C)C", 0.5);
        assert_eq!(c.get("C(C)C", "CCCC"), Some(0.5));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let p = MgkHyperparameters::default();
        let c = KernelCache::new(&p);
        c.insert("CCCC", "C(C)C", 0.1 + 0.2);
        c.insert("CC", "CC", 1.0 / 3.0);
        c.save(&path).unwrap();
        let d = KernelCache::load(&path, &p).unwrap();
        assert_eq!(d.get("CCCC", "C(C)C"), Some(0.1 + 0.2));
        assert_eq!(d.get("CC", "CC"), Some(1.0 / 3.0));
        d.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(MAGIC));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn rejects_foreign_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let p = MgkHyperparameters::default();
        KernelCache::new(&p).save(&path).unwrap();
        let other = MgkHyperparameters { q: 0.2, ..p };
        assert!(KernelCache::load(&path, &other).is_err());
        assert!(KernelCache::load_or_new(&path, &other).is_empty());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        std::fs::write(&path, "hello\n").unwrap();
        assert!(KernelCache::load(&path, &MgkHyperparameters::default()).is_err());
    }
}
