#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use compovm::cli::loader;
use compovm::FileSource;
use compovm_core::TypeLoader;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn type_dir() -> PathBuf {
    fixtures().join("types")
}

/// Kit plus the fixture type directory.
pub fn fixture_loader() -> Arc<TypeLoader> {
    loader(FileSource::new(vec![type_dir()]))
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap()
}

/// Every `.cvm` file under the fixtures, relative, sorted.
pub fn cvm_files() -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![fixtures()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "cvm") {
                out.push(path.strip_prefix(fixtures()).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    out
}
