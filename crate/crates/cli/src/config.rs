//! Flat key-value run configuration with dotted section keys.
//!
//! Files contain `key = value` lines; `#` starts a comment. CLI flags
//! (`--seed`, `--threads`, `--out`) override the corresponding keys. The
//! manifest's config hash covers every semantically relevant effective key
//! (everything except the output directory and worker count).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use stx_core::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got {raw:?}"),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.map.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required config key `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad number for `{key}`: {v:?}"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad integer for `{key}`: {v:?}"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad integer for `{key}`: {v:?}"))),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let p = PathBuf::from(self.require(key)?);
        if !p.exists() {
            return Err(Error::Config(format!(
                "file for `{key}` does not exist: {}",
                p.display()
            )));
        }
        Ok(p)
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_or("seed", 1)
    }

    pub fn threads(&self) -> Result<usize> {
        self.usize_or("threads", 0)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.str_or("out.dir", "out"))
    }

    /// Quantile in (0.5, 1) with a default.
    pub fn quantile_or(&self, key: &str, default: f64) -> Result<f64> {
        let q = self.f64_or(key, default)?;
        if !(q > 0.5 && q < 1.0) {
            return Err(Error::Config(format!("`{key}` = {q} outside (0.5, 1)")));
        }
        Ok(q)
    }

    /// FNV-1a hash of the sorted effective key-value pairs, skipping the
    /// output location and worker count.
    pub fn config_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for (k, v) in &self.map {
            if k == "out.dir" || k == "threads" {
                continue;
            }
            for b in k.bytes().chain([b'=']).chain(v.bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{h:016x}")
    }

    /// All effective keys, for the manifest.
    pub fn entries(&self) -> Vec<(String, String)> {
        self.map
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// Grid specification `lo:step:hi` (inclusive of hi up to rounding).
pub fn parse_grid(spec: &str, key: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("`{key}` must be lo:step:hi, got {spec:?}")));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad `{key}` lower bound")))?;
    let step: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad `{key}` step")))?;
    let hi: f64 = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad `{key}` upper bound")))?;
    if !(step > 0.0) || hi < lo {
        return Err(Error::Config(format!("degenerate grid `{key}` = {spec:?}")));
    }
    let mut out = Vec::new();
    let n = ((hi - lo) / step).round() as usize;
    for i in 0..=n {
        let v = lo + step * i as f64;
        if v <= hi + 1e-9 * step {
            out.push(v);
        }
    }
    Ok(out)
}
