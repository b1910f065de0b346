use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn run_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_linstate"));
    cmd.current_dir(dir).args(args).env_remove("LINSTATE_FUEL");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_in(&data(), args, &[])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const GOLDEN: &[(&str, &[&str])] = &[
    ("check_producer", &["check", "read_flip.fg.lst", "--theory", "bit-store"]),
    ("check_snapback", &["check", "snapback.ecbv.lst"]),
    ("check_unclosed", &["check", "unclosed.fg.lst"]),
    ("eq_pair_eta", &["eq", "pair_var.fg.lst", "pair_eta.fg.lst"]),
    ("eq_read_twice", &["eq", "read_twice.fg.lst", "read_once.fg.lst"]),
    ("eq_unit_flip", &["eq", "unit.fg.lst", "flip.fg.lst"]),
    ("translate_sps", &["translate", "--mode", "sps", "read_flip.fg.lst"]),
    ("translate_cps", &["translate", "--mode", "cps", "read_flip.fg.lst"]),
    ("normalize_trace", &["normalize", "--trace", "ident.ecbv.lst"]),
    ("eval_table", &["eval", "--model", "bit-store", "read_flip.fg.lst"]),
    ("eval_state", &["eval", "--model", "bit-store", "--state", "1", "read_flip.fg.lst"]),
    ("eval_env", &["eval", "--model", "bit-store", "--env", "b=(inr star)", "apply.fg.lst"]),
    ("eval_model_file", &["eval", "--model", "store2.lst", "--env", "p=(pair star (inl star))", "pure.fg.lst"]),
    ("check_theory_pass", &["check-theory", "--theory", "bit-store", "--comodel", "bit2.lst"]),
    ("check_theory_fail", &["check-theory", "--theory", "bit-store", "--comodel", "bit2_broken.lst"]),
    ("check_theory_global", &["check-theory", "--theory", "global-store:3"]),
    ("roundtrip_apply", &["roundtrip", "apply.fg.lst"]),
    ("correspond_small", &["correspond", "--alts", "1"]),
    ("json_type_error", &["--json", "check", "snapback.ecbv.lst"]),
];

#[test]
fn golden_reports() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut bad = Vec::new();
    for (case, args) in GOLDEN {
        let o = run(args);
        let mut got = format!("exit {}\n{}", code(&o), stdout(&o));
        if !o.stderr.is_empty() {
            got.push_str(&format!("stderr:\n{}", String::from_utf8_lossy(&o.stderr)));
        }
        let path = dir.join(format!("{case}.out"));
        if update {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_default();
        if want != got {
            bad.push(format!("{case}:\n--- expected\n{want}--- got\n{got}"));
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn reports_are_deterministic() {
    for (_, args) in GOLDEN {
        let a = run(args);
        let b = run(args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stderr, b.stderr, "{args:?}");
    }
}

#[test]
fn well_typed_check_exits_zero_and_prints_the_type() {
    let o = run(&["check", "read_flip.fg.lst", "--theory", "bit-store"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "producer (sum unit unit)");
}

#[test]
fn eta_instances_are_equal() {
    let o = run(&["eq", "pair_var.fg.lst", "pair_eta.fg.lst"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("equal"));
}

#[test]
fn type_and_parse_errors_exit_one_with_a_diagnostic() {
    let o = run(&["check", "snapback.ecbv.lst"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("LinearityViolation"));
    let o = run(&["check", "unclosed.fg.lst"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at 1:9"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["frobnicate"][..],
        &["check", "read_flip.fg.lst", "--colour"],
        &["translate", "read_flip.fg.lst"],
        &["translate", "--mode", "both", "read_flip.fg.lst"],
        &["check", "missing.lst"],
        &["check", "read_flip.fg.lst", "--theory", "heap"],
        &["eval", "--model", "bit-store", "--state", "7", "read_flip.fg.lst"],
        &[],
    ] {
        let o = run(args);
        assert_eq!(code(&o), 2, "{args:?}");
    }
}

#[test]
fn json_reports_follow_the_schema() {
    let o = run(&["--json", "eq", "unit.fg.lst", "flip.fg.lst"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "unequal");
    assert!(v["diagnostics"].as_array().unwrap().is_empty());
    assert!(v["witness"].is_string());

    let o = run(&["--json", "check", "unclosed.fg.lst"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "error");
    let d = &v["diagnostics"][0];
    assert_eq!((d["line"].as_u64(), d["col"].as_u64()), (Some(1), Some(9)));
    assert!(v.get("witness").is_none());

    let o = run(&["--json", "check-theory", "--theory", "bit-store"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn translated_files_typecheck_and_read_back() {
    let dir = std::env::temp_dir().join(format!("linstate-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = data().join("read_flip.fg.lst");
    let src = src.to_str().unwrap();
    for (mode, file, ty) in [("sps", "out.ecbv.lst", "computation (tensor (sum unit unit) S)"), ("cps", "out.cps.lst", "computation R")] {
        let o = run_in(&dir, &["translate", "--mode", mode, src, "-o", file], &[]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let o = run_in(&dir, &["check", file], &[]);
        assert_eq!(stdout(&o).trim(), ty);
    }
    let o = run_in(&dir, &["untranslate", "out.ecbv.lst"], &[]);
    assert_eq!(code(&o), 0);
    std::fs::write(dir.join("back.fg.lst"), stdout(&o)).unwrap();
    let o = run_in(&dir, &["eq", "back.fg.lst", src], &[]);
    assert_eq!(stdout(&o).split(':').next(), Some("equal"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn fuel_comes_from_the_environment() {
    let o = run_in(&data(), &["normalize", "pair_eta.fg.lst"], &[("LINSTATE_FUEL", "1")]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fuel exhausted after 1"));
    let o = run_in(&data(), &["normalize", "pair_eta.fg.lst"], &[("LINSTATE_FUEL", "100")]);
    assert_eq!(code(&o), 0);
}

#[test]
fn standard_input_is_accepted() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_linstate"))
        .args(["check", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"(geff flip)").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(stdout(&o).trim(), "producer unit");
}
