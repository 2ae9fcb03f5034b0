//! Download-once cache for the LIBSVM binary classification datasets.
//!
//! Layout: `<cache>/<name>.libsvm` next to `<name>.sha256`, which holds the
//! hex digest recorded on first download. Every later load re-hashes the
//! file and refuses to use it on mismatch.

use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{parse_libsvm, Dataset};

const BASE_URL: &str = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary";

#[derive(Debug, Clone, Copy)]
pub struct KnownDataset {
    pub name: &'static str,
    pub n: usize,
    pub d: usize,
    /// Pinned digest, when one has been recorded for this release of the file.
    pub sha256: Option<&'static str>,
}

pub const KNOWN_DATASETS: &[KnownDataset] = &[
    KnownDataset { name: "heart", n: 270, d: 13, sha256: None },
    KnownDataset { name: "australian", n: 690, d: 14, sha256: None },
    KnownDataset { name: "splice", n: 1000, d: 60, sha256: None },
];

pub fn known(name: &str) -> Option<&'static KnownDataset> {
    KNOWN_DATASETS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchMode {
    /// Download missing files.
    Online,
    /// Use the cache only.
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSource {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        let file = fs::File::open(&self.path)?;
        let d_hint = known(&self.name).map(|k| k.d);
        parse_libsvm(BufReader::new(file), &self.name, d_hint)
    }
}

pub fn data_path(cache: &Path, name: &str) -> PathBuf {
    cache.join(format!("{name}.libsvm"))
}

fn hash_path(cache: &Path, name: &str) -> PathBuf {
    cache.join(format!("{name}.sha256"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn http_get(url: &str) -> Result<Vec<u8>> {
    let resp = ureq::get(url).call().map_err(|e| Error::Fetch {
        name: url.to_string(),
        msg: e.to_string(),
    })?;
    let mut body = Vec::new();
    resp.into_reader().read_to_end(&mut body)?;
    Ok(body)
}

/// Ensures each named dataset is present and intact in `cache`.
pub fn fetch_datasets(cache: &Path, names: &[&str], mode: FetchMode) -> Result<Vec<DatasetSource>> {
    fetch_datasets_with(cache, names, mode, http_get)
}

/// [`fetch_datasets`] with an injectable downloader, called with the URL.
pub fn fetch_datasets_with<F>(
    cache: &Path,
    names: &[&str],
    mode: FetchMode,
    download: F,
) -> Result<Vec<DatasetSource>>
where
    F: Fn(&str) -> Result<Vec<u8>>,
{
    names
        .iter()
        .map(|&name| fetch_one(cache, name, mode, &download))
        .collect()
}

fn fetch_one<F>(cache: &Path, name: &str, mode: FetchMode, download: &F) -> Result<DatasetSource>
where
    F: Fn(&str) -> Result<Vec<u8>>,
{
    let pinned = known(name).and_then(|k| k.sha256);
    let path = data_path(cache, name);
    let sidecar = hash_path(cache, name);

    if path.exists() {
        let got = sha256_hex(&fs::read(&path)?);
        let recorded = match fs::read_to_string(&sidecar) {
            Ok(s) => Some(s.trim().to_string()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let expected = pinned.map(str::to_string).or(recorded.clone());
        if let Some(expected) = expected {
            if expected != got {
                return Err(Error::Integrity { path, expected, got });
            }
        }
        if recorded.is_none() {
            fs::write(&sidecar, format!("{got}\n"))?;
        }
        return Ok(DatasetSource {
            name: name.to_string(),
            path,
            sha256: got,
        });
    }

    if mode == FetchMode::Offline {
        return Err(Error::Fetch {
            name: name.to_string(),
            msg: format!(
                "not cached and offline; run `opt fetch` with network access or place the LIBSVM file at {}",
                path.display()
            ),
        });
    }
    if known(name).is_none() {
        return Err(Error::Fetch {
            name: name.to_string(),
            msg: "unknown dataset name".into(),
        });
    }

    let body = download(&format!("{BASE_URL}/{name}")).map_err(|e| match e {
        Error::Fetch { msg, .. } => Error::Fetch {
            name: name.to_string(),
            msg,
        },
        other => other,
    })?;
    let got = sha256_hex(&body);
    if let Some(expected) = pinned {
        if expected != got {
            return Err(Error::Integrity {
                path,
                expected: expected.to_string(),
                got,
            });
        }
    }
    fs::create_dir_all(cache)?;
    fs::write(&path, &body)?;
    fs::write(&sidecar, format!("{got}\n"))?;
    log::info!("fetched {name} into {}", path.display());
    Ok(DatasetSource {
        name: name.to_string(),
        path,
        sha256: got,
    })
}
