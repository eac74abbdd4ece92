//! Loading composed types from `.cvm` files on a type path.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use compovm_core::{Error, Type, TypeLoader, TypeSource};

use crate::textio;

pub const EXTENSION: &str = "cvm";
pub const TYPE_PATH_VAR: &str = "COMPOVM_TYPE_PATH";

/// Resolves `a.b.C` to `a/b/C.cvm` under each root, first hit wins.
#[derive(Clone, Debug, Default)]
pub struct FileSource {
    roots: Vec<PathBuf>,
}

impl FileSource {
    pub fn new(roots: Vec<PathBuf>) -> FileSource {
        FileSource { roots }
    }

    /// `extra` followed by the entries of `COMPOVM_TYPE_PATH`.
    pub fn from_env(extra: &[PathBuf]) -> FileSource {
        let mut roots = extra.to_vec();
        if let Some(path) = std::env::var_os(TYPE_PATH_VAR) {
            roots.extend(std::env::split_paths(&path).filter(|p| !p.as_os_str().is_empty()));
        }
        FileSource { roots }
    }

    pub fn roots(&self) -> &[PathBuf] {
        &self.roots
    }

    pub fn relative_path(name: &str) -> PathBuf {
        let mut path: PathBuf = name.split('.').collect();
        path.set_extension(EXTENSION);
        path
    }

    pub fn find(&self, name: &str) -> Option<PathBuf> {
        let rel = Self::relative_path(name);
        self.roots.iter().map(|r| r.join(&rel)).find(|p| p.is_file())
    }

    /// Dotted names of every `.cvm` file under the roots, sorted.
    pub fn scan(&self) -> Vec<String> {
        let mut names = Vec::new();
        for root in &self.roots {
            for entry in walkdir::WalkDir::new(root).sort_by_file_name().into_iter().flatten() {
                let path = entry.path();
                if path.extension().is_some_and(|e| e == EXTENSION) {
                    if let Some(name) = dotted(root, path) {
                        names.push(name);
                    }
                }
            }
        }
        names.sort();
        names.dedup();
        names
    }
}

fn dotted(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?.with_extension("");
    let parts: Option<Vec<&str>> = rel.components().map(|c| c.as_os_str().to_str()).collect();
    Some(parts?.join("."))
}

impl TypeSource for FileSource {
    fn load(&self, loader: &Arc<TypeLoader>, name: &str) -> Result<Option<Arc<Type>>, Error> {
        let Some(path) = self.find(name) else { return Ok(None) };
        let load_error = |message: String| Error::Load { name: name.to_string(), message };
        let text = std::fs::read_to_string(&path).map_err(|e| load_error(format!("{}: {e}", path.display())))?;
        let parsed = textio::parse(&text, loader).map_err(|e| load_error(format!("{}:{e}", path.display())))?;
        match parsed.types.into_iter().find(|t| t.name() == name) {
            Some(t) => Ok(Some(t)),
            None => Err(Error::UnresolvedType(format!("{name} ({} does not define it)", path.display()))),
        }
    }
}
