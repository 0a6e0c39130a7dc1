use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use profcct_core::Profile;

/// A loaded profile. Never mutated once registered.
#[derive(Debug)]
pub struct Entry {
    pub handle: usize,
    /// Where the profile came from, for display.
    pub origin: String,
    pub profile: Profile,
}

/// Loaded profiles keyed by handle plus the root that source reads are
/// confined to.
#[derive(Debug)]
pub struct Session {
    entries: RwLock<Arc<Vec<Arc<Entry>>>>,
    workspace_root: PathBuf,
    static_dir: Option<PathBuf>,
}

impl Session {
    /// `workspace_root` is canonicalized when possible so that confinement
    /// checks compare resolved paths.
    pub fn new(workspace_root: impl AsRef<Path>) -> Self {
        let root = workspace_root.as_ref();
        Session {
            entries: RwLock::new(Arc::new(Vec::new())),
            workspace_root: root.canonicalize().unwrap_or_else(|_| root.to_path_buf()),
            static_dir: None,
        }
    }

    /// Serve UI assets from `dir` instead of the built-in placeholder page.
    pub fn with_static_dir(mut self, dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        self.static_dir = Some(dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf()));
        self
    }

    pub fn workspace_root(&self) -> &Path {
        &self.workspace_root
    }

    pub fn static_dir(&self) -> Option<&Path> {
        self.static_dir.as_deref()
    }

    /// Registers a profile and returns its handle. Readers holding an older
    /// snapshot keep seeing it unchanged.
    pub fn add(&self, origin: impl Into<String>, profile: Profile) -> usize {
        let mut guard = self.entries.write().unwrap_or_else(|e| e.into_inner());
        let mut next: Vec<Arc<Entry>> = guard.as_ref().clone();
        let handle = next.len();
        next.push(Arc::new(Entry {
            handle,
            origin: origin.into(),
            profile,
        }));
        *guard = Arc::new(next);
        handle
    }

    pub fn snapshot(&self) -> Arc<Vec<Arc<Entry>>> {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    pub fn get(&self, handle: usize) -> Option<Arc<Entry>> {
        self.snapshot().get(handle).cloned()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
