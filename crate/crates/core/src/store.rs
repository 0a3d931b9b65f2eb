//! Content-addressed resource store.
//!
//! Layout: `<root>/<id[0..2]>/<id>`. Writes go through a temp file and an
//! atomic rename, so readers never observe partial payloads.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::modality::{read_wav, sniff_modality, AudioBuffer};
use crate::types::{AudioMeta, ErrorReport, Modality, Origin, Resource, ResourceId};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Lowercase hex of FNV-1a-64 plus an 8-hex-digit length suffix.
pub fn content_id(bytes: &[u8]) -> ResourceId {
    ResourceId(format!("{:016x}{:08x}", fnv1a64(bytes), bytes.len() as u32))
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ResourceStore {
    root: PathBuf,
}

impl ResourceStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(ResourceStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn locator(id: &ResourceId) -> String {
        let s = id.as_str();
        format!("{}/{}", &s[..2.min(s.len())], s)
    }

    pub fn path_of(&self, id: &ResourceId) -> PathBuf {
        self.root.join(Self::locator(id))
    }

    /// Persists a payload and returns its resource record. Storing the same
    /// bytes again yields the same id and leaves one copy on disk.
    pub fn store_resource(
        &self,
        payload: &[u8],
        declared_name: &str,
        origin: Origin,
    ) -> Result<Resource, ErrorReport> {
        if payload.is_empty() {
            return Err(ErrorReport::bad_format(format!(
                "upload '{declared_name}' is empty"
            )));
        }
        let modality = sniff_modality(payload, declared_name)?;
        let meta = match modality {
            Modality::Audio => Some(audio_meta(&read_wav(payload)?)),
            _ => None,
        };
        let id = self.persist(payload)?;
        Ok(Resource {
            locator: Self::locator(&id),
            id,
            modality,
            origin,
            meta,
        })
    }

    fn persist(&self, payload: &[u8]) -> Result<ResourceId, ErrorReport> {
        let base = content_id(payload);
        // Hash collisions are settled by byte comparison; a differing
        // payload takes the next free numbered variant of the id.
        let mut candidate = base.clone();
        for n in 1.. {
            let path = self.path_of(&candidate);
            match fs::read(&path) {
                Ok(existing) if existing == payload => return Ok(candidate),
                Ok(_) => {
                    candidate = ResourceId(format!("{base}-{n}"));
                    continue;
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    self.write_atomic(&path, payload)?;
                    return Ok(candidate);
                }
                Err(e) => return Err(io_report(&path, e)),
            }
        }
        unreachable!()
    }

    fn write_atomic(&self, path: &Path, payload: &[u8]) -> Result<(), ErrorReport> {
        let dir = path.parent().expect("store paths have a parent");
        fs::create_dir_all(dir).map_err(|e| io_report(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_report(dir, e))?;
        tmp.write_all(payload).map_err(|e| io_report(path, e))?;
        tmp.as_file().sync_all().map_err(|e| io_report(path, e))?;
        match tmp.persist_noclobber(path) {
            Ok(_) => Ok(()),
            // another writer got there first with identical content
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(io_report(path, e.error)),
        }
    }

    pub fn contains(&self, id: &ResourceId) -> bool {
        valid_id(id) && self.path_of(id).is_file()
    }

    pub fn load(&self, id: &ResourceId) -> Result<Vec<u8>, ErrorReport> {
        if !valid_id(id) {
            return Err(ErrorReport::missing(format!("no resource with id '{id}'")));
        }
        let path = self.path_of(id);
        fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                ErrorReport::missing(format!("no resource with id '{id}'"))
            } else {
                io_report(&path, e)
            }
        })
    }

    pub fn load_audio(&self, id: &ResourceId) -> Result<AudioBuffer, ErrorReport> {
        read_wav(&self.load(id)?)
    }

    pub fn load_text(&self, id: &ResourceId) -> Result<String, ErrorReport> {
        Ok(String::from_utf8_lossy(&self.load(id)?).into_owned())
    }
}

pub fn audio_meta(a: &AudioBuffer) -> AudioMeta {
    AudioMeta {
        sample_rate: a.sample_rate,
        channels: a.channels.len() as u16,
        num_samples: a.num_samples(),
    }
}

/// Ids are hex plus an optional `-n` collision suffix; anything else could
/// escape the store directory.
fn valid_id(id: &ResourceId) -> bool {
    let s = id.as_str();
    s.len() >= 2 && s.chars().all(|c| c.is_ascii_hexdigit() || c == '-') && !s.starts_with('-')
}

fn io_report(path: &Path, e: std::io::Error) -> ErrorReport {
    ErrorReport::tool_failed(format!("storage error at {}: {e}", path.display()))
        .with_suggestion("Check that the store directory is writable and has free space.")
}
