#![allow(dead_code)]

use std::path::{Path, PathBuf};

use linstate::surface::{parse_program, Family, SourceFile};
use linstate::typecheck::{check_program, Signature};

pub fn golden_dir(suite: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(suite)
}

/// Program files of a suite, sorted by name.
pub fn golden_cases(suite: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(golden_dir(suite))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "lst"))
        .collect();
    v.sort();
    v
}

fn family_of(path: &Path) -> Family {
    let stem = path.file_stem().unwrap().to_string_lossy();
    match stem.rsplit('.').next() {
        Some("cps") => Family::Cps,
        Some("fg") => Family::Fg,
        _ => Family::Ecbv,
    }
}

/// `accepted <judgement>` or `rejected <error kind>`.
pub fn check_verdict(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let src = SourceFile::new(text, path.display().to_string());
    let sig = Signature::bit_store();
    match parse_program(&src, family_of(path), Some(&sig)) {
        Err(e) => format!("rejected parse {:?}", e.kind),
        Ok(p) => match check_program(&sig, &p) {
            Ok(j) => format!("accepted {j}"),
            Err(e) => format!("rejected {:?}", e.kind),
        },
    }
}

/// Compare every case against its `.out` file; returns the mismatches.
pub fn run_golden(suite: &str) -> Vec<String> {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut bad = Vec::new();
    for case in golden_cases(suite) {
        let got = check_verdict(&case);
        let out = case.with_extension("out");
        if update {
            std::fs::write(&out, format!("{got}\n")).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&out).unwrap_or_default();
        if want.trim() != got {
            bad.push(format!("{}: expected `{}`, got `{got}`", case.display(), want.trim()));
        }
    }
    bad
}
