mod common;

use common::{cvm_files, fixture_loader, read};
use compovm::textio::{parse, write_file, write_type};
use compovm::FileSource;
use compovm_core::{Error, Space, TypeLoader, TypeSource, Value};

/// write(parse(write(parse(text)))) == write(parse(text)), each parse in a
/// fresh loader so the file may redefine its types.
fn fixpoint(text: &str) {
    let first = write_file(&parse(text, &fixture_loader()).unwrap()).unwrap();
    let second = write_file(&parse(&first, &fixture_loader()).unwrap()).unwrap();
    assert_eq!(first, second);
}

#[test]
fn every_fixture_is_a_fixpoint() {
    let files = cvm_files();
    assert!(files.len() >= 6, "{files:?}");
    for file in files {
        fixpoint(&read(&file));
    }
}

#[test]
fn canonical_fixtures_are_written_verbatim() {
    for file in ["types/demo/Doubler.cvm", "types/demo/Quadrupler.cvm", "scenes/doubler.cvm"] {
        let text = read(file);
        assert_eq!(write_file(&parse(&text, &fixture_loader()).unwrap()).unwrap(), text, "{file}");
    }
}

#[test]
fn file_source_resolves_and_caches() {
    let loader = fixture_loader();
    let a = loader.resolve("demo.Quadrupler").unwrap();
    let b = loader.resolve("demo.Quadrupler").unwrap();
    assert_eq!(a.id(), b.id());
    // The dependency was pulled in through the same source.
    assert!(loader.is_bound("demo.Doubler"));
    let mut s = Space::new(loader);
    let q = s.instantiate(&a).unwrap();
    s.set(q, "x", 5.into()).unwrap();
    s.pump();
    assert_eq!(s.get(q, "y").unwrap(), Value::Int(20));
}

#[test]
fn file_source_reports_misnamed_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("x")).unwrap();
    std::fs::write(dir.path().join("x/Wrong.cvm"), "type x.Other { interface {} impl {} }").unwrap();
    let source = FileSource::new(vec![dir.path().to_path_buf()]);
    let loader = TypeLoader::new();
    assert!(matches!(source.load(&loader, "x.Wrong"), Err(Error::UnresolvedType(_))));
    assert!(matches!(FileSource::default().load(&loader, "x.Wrong"), Ok(None)));
    assert!(matches!(loader.resolve("x.Missing"), Err(Error::UnresolvedType(_))));
}

#[test]
fn first_root_wins() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, v) in [(&a, 1), (&b, 2)] {
        std::fs::create_dir(dir.path().join("p")).unwrap();
        let text = format!("type p.T {{ interface {{ [RW] Int32 v = {v} }} impl {{}} }}");
        std::fs::write(dir.path().join("p/T.cvm"), text).unwrap();
    }
    let loader = compovm::cli::loader(FileSource::new(vec![a.path().into(), b.path().into()]));
    let t = loader.resolve("p.T").unwrap();
    assert_eq!(t.property(0).unwrap().default_value(), Some(&Value::Int(1)));
}

#[test]
fn written_doubler_matches_fixture() {
    let loader = fixture_loader();
    let t = loader.resolve("demo.Doubler").unwrap();
    assert_eq!(write_type(&t).unwrap(), read("types/demo/Doubler.cvm"));
}
