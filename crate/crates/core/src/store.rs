//! File-backed protocol store: one `<name>.psv.xml` per protocol plus an
//! optional `<name>.layout.json` sidecar written by the designer.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

const PSV_SUFFIX: &str = ".psv.xml";
const LAYOUT_SUFFIX: &str = ".layout.json";
const MAX_NAME: usize = 128;

#[derive(Debug)]
pub enum StoreError {
    InvalidName(String),
    NotFound(String),
    Io(io::Error),
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::InvalidName(n) => {
                write!(f, "invalid protocol name `{n}`: use 1-{MAX_NAME} characters from [A-Za-z0-9_-]")
            }
            StoreError::NotFound(n) => write!(f, "no protocol named `{n}`"),
            StoreError::Io(e) => write!(f, "storage error: {e}"),
        }
    }
}

impl std::error::Error for StoreError {}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        StoreError::Io(e)
    }
}

/// Accepts `[A-Za-z0-9_-]+` up to 128 characters.
pub fn check_name(name: &str) -> Result<&str, StoreError> {
    let ok = !name.is_empty()
        && name.len() <= MAX_NAME
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok {
        Ok(name)
    } else {
        Err(StoreError::InvalidName(name.to_owned()))
    }
}

#[derive(Debug)]
pub struct ProtocolStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ProtocolStore {
    /// Creates `root` when missing.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(ProtocolStore {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self, name: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(name.to_owned()).or_default().clone()
    }

    fn psv_path(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}{PSV_SUFFIX}"))
    }

    fn layout_path(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}{LAYOUT_SUFFIX}"))
    }

    /// Stored protocol names, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let file = entry?.file_name();
            let Some(file) = file.to_str() else { continue };
            if let Some(name) = file.strip_suffix(PSV_SUFFIX) {
                if check_name(name).is_ok() {
                    out.push(name.to_owned());
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Result<Vec<u8>, StoreError> {
        read(&self.psv_path(check_name(name)?), name)
    }

    /// Returns whether the protocol is new.
    pub fn put(&self, name: &str, bytes: &[u8]) -> Result<bool, StoreError> {
        check_name(name)?;
        let lock = self.lock(name);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.psv_path(name);
        let created = !path.exists();
        self.write_atomic(&path, bytes)?;
        Ok(created)
    }

    /// Removes the protocol and its layout.
    pub fn delete(&self, name: &str) -> Result<(), StoreError> {
        check_name(name)?;
        let lock = self.lock(name);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        match std::fs::remove_file(self.psv_path(name)) {
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(name.to_owned()))
            }
            r => r?,
        }
        match std::fs::remove_file(self.layout_path(name)) {
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            r => Ok(r?),
        }
    }

    pub fn get_layout(&self, name: &str) -> Result<Vec<u8>, StoreError> {
        check_name(name)?;
        if !self.psv_path(name).exists() {
            return Err(StoreError::NotFound(name.to_owned()));
        }
        read(&self.layout_path(name), name)
    }

    /// The protocol must exist.
    pub fn put_layout(&self, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        check_name(name)?;
        let lock = self.lock(name);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if !self.psv_path(name).exists() {
            return Err(StoreError::NotFound(name.to_owned()));
        }
        self.write_atomic(&self.layout_path(name), bytes)
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| StoreError::Io(e.error))?;
        Ok(())
    }
}

fn read(path: &Path, name: &str) -> Result<Vec<u8>, StoreError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => StoreError::NotFound(name.to_owned()),
        _ => StoreError::Io(e),
    })
}
