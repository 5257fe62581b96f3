//! Replays the checked-in fuzz corpus through the parser entry points.

use std::fs;
use std::path::PathBuf;

use eeqt_core::config::{parse_config, resolve, Preset};
use eeqt_core::output::{read_density_csv, write_density_csv};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn config_seeds() {
    let mut resolved = 0;
    for (_, data) in seeds("config_parse") {
        if let Ok(raw) = parse_config(std::str::from_utf8(&data).unwrap()) {
            resolved += usize::from(resolve(raw).is_ok());
        }
    }
    assert!(resolved >= 3);
}

#[test]
fn density_seeds() {
    let mut parsed = 0;
    for (_, data) in seeds("density_csv") {
        if let Ok(curve) = read_density_csv(std::str::from_utf8(&data).unwrap()) {
            let mut buf = Vec::new();
            write_density_csv(&curve, &mut buf).unwrap();
            assert_eq!(read_density_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), curve);
            parsed += 1;
        }
    }
    assert_eq!(parsed, 2);
}

#[test]
fn preset_seeds() {
    for (name, data) in seeds("preset_name") {
        let text = std::str::from_utf8(&data).unwrap();
        match Preset::parse(text) {
            Ok(p) => assert_eq!(Preset::parse(&p.to_string()).unwrap(), p),
            Err(_) => assert_eq!(name, "fig9"),
        }
    }
}
