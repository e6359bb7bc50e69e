//! The checked-in fuzz seeds parse (or fail) as their names say, and valid
//! ones survive a write/parse round trip.

use std::fs;
use std::path::PathBuf;

use graphalign::io;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

fn expect_invalid(name: &str) -> bool {
    ["bad", "not_a", "inconsistent"].iter().any(|p| name.starts_with(p))
}

#[test]
fn graphset_seeds() {
    for (name, text) in seeds("parse_graphset") {
        match io::parse_graphset(&text) {
            Ok(set) => {
                assert!(!expect_invalid(&name), "{name} parsed");
                assert_eq!(io::parse_graphset(&io::graphset_to_json(&set)).unwrap(), set);
            }
            Err(e) => assert!(expect_invalid(&name), "{name}: {e}"),
        }
    }
}

#[test]
fn alignment_seeds() {
    for (name, text) in seeds("parse_alignment") {
        match io::parse_alignment(&text) {
            Ok(a) => {
                assert!(!expect_invalid(&name), "{name} parsed");
                assert_eq!(io::parse_alignment(&io::alignment_to_json(&a)).unwrap(), a);
            }
            Err(e) => assert!(expect_invalid(&name), "{name}: {e}"),
        }
    }
}

#[test]
fn center_seeds() {
    for (name, text) in seeds("parse_center") {
        match io::parse_center(&text) {
            Ok(c) => {
                assert!(!expect_invalid(&name), "{name} parsed");
                assert_eq!(io::parse_center(&io::center_to_json("c", &c)).unwrap(), c);
            }
            Err(e) => assert!(expect_invalid(&name), "{name}: {e}"),
        }
    }
}
