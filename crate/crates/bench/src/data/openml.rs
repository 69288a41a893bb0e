//! OpenML dataset client with an on-disk cache.
//!
//! Layout: `<cache>/<id>/description` (the JSON dataset description) and
//! `<cache>/<id>/data.arff`. Both are written atomically; a cache hit never
//! touches the network. When the description carries an MD5 checksum, the
//! payload is verified on download and on every cache read.

use std::path::{Path, PathBuf};
use std::time::Duration;

use md5::{Digest, Md5};
use serde::Deserialize;

use super::{parse_arff, RawTable};
use crate::error::{Error, IoContext, Result};
use crate::fsutil::atomic_write;

pub const DEFAULT_BASE_URL: &str = "https://www.openml.org";
pub const CACHE_ENV: &str = "ALP_CACHE";

#[derive(Debug, Deserialize)]
struct DescriptionDoc {
    data_set_description: Description,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Description {
    #[serde(default)]
    pub name: String,
    pub url: String,
    #[serde(default)]
    pub md5_checksum: Option<String>,
    #[serde(default)]
    pub default_target_attribute: Option<String>,
    #[serde(default)]
    pub row_id_attribute: Option<String>,
    #[serde(default)]
    pub ignore_attribute: Option<OneOrMany>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn to_vec(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpenMlClient {
    base_url: String,
    cache_dir: PathBuf,
    offline: bool,
}

fn md5_hex(bytes: &[u8]) -> String {
    format!("{:x}", Md5::digest(bytes))
}

impl OpenMlClient {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            cache_dir: cache_dir.into(),
            offline: false,
        }
    }

    pub fn with_base_url(mut self, base: &str) -> Self {
        self.base_url = base.trim_end_matches('/').to_string();
        self
    }

    /// Serve from the cache only.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    fn dir(&self, id: i64) -> PathBuf {
        self.cache_dir.join(id.to_string())
    }

    pub fn is_cached(&self, id: i64) -> bool {
        let d = self.dir(id);
        d.join("description").is_file() && d.join("data.arff").is_file()
    }

    /// The table for dataset `id`, with the default target marked and
    /// row-id/ignored attributes removed.
    pub fn fetch(&self, id: i64) -> Result<RawTable> {
        if id <= 0 {
            return Err(Error::Fetch(format!("invalid OpenML dataset id {id}")));
        }
        let dir = self.dir(id);
        let (desc, arff) = if self.is_cached(id) {
            let desc_bytes = std::fs::read(dir.join("description")).at(dir.join("description"))?;
            let desc = parse_description(&desc_bytes)?;
            let arff = std::fs::read(dir.join("data.arff")).at(dir.join("data.arff"))?;
            verify(&desc, &arff, &dir.join("data.arff").display().to_string())?;
            (desc, arff)
        } else if self.offline {
            return Err(Error::Fetch(format!(
                "dataset {id} is not cached in {}",
                self.cache_dir.display()
            )));
        } else {
            let desc_bytes = http_get(&format!("{}/api/v1/json/data/{id}", self.base_url))?;
            let desc = parse_description(&desc_bytes)?;
            let arff = http_get(&desc.url)?;
            verify(&desc, &arff, &desc.url)?;
            atomic_write(&dir.join("data.arff"), &arff)?;
            atomic_write(&dir.join("description"), &desc_bytes)?;
            (desc, arff)
        };
        let text = String::from_utf8(arff).map_err(|_| Error::Fetch(format!("dataset {id}: payload is not UTF-8")))?;
        let mut table = parse_arff(&text)?;
        let mut drop = desc
            .ignore_attribute
            .as_ref()
            .map(OneOrMany::to_vec)
            .unwrap_or_default();
        drop.extend(desc.row_id_attribute.clone());
        table.drop_columns(&drop);
        table.target_column = desc.default_target_attribute.clone();
        if table.relation.is_empty() {
            table.relation = desc.name;
        }
        Ok(table)
    }
}

fn parse_description(bytes: &[u8]) -> Result<Description> {
    serde_json::from_slice::<DescriptionDoc>(bytes)
        .map(|d| d.data_set_description)
        .map_err(|e| Error::Fetch(format!("malformed dataset description: {e}")))
}

fn verify(desc: &Description, payload: &[u8], what: &str) -> Result<()> {
    if let Some(expected) = &desc.md5_checksum {
        let actual = md5_hex(payload);
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(Error::Integrity(format!("{what}: md5 {actual}, expected {expected}")));
        }
    }
    Ok(())
}

fn http_get(url: &str) -> Result<Vec<u8>> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(300)))
        .build()
        .into();
    let mut resp = agent
        .get(url)
        .call()
        .map_err(|e| Error::Fetch(format!("GET {url}: {e}")))?;
    resp.body_mut()
        .with_config()
        .limit(1 << 31)
        .read_to_vec()
        .map_err(|e| Error::Fetch(format!("GET {url}: {e}")))
}
