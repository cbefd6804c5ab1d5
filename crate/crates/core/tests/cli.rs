mod common;

use common::{kernel_path, regpack, scratch_dir};
use regpack::alloc::{load_binary, load_text, TABLE_ROWS};

fn path(name: &str) -> String {
    kernel_path(name).to_string_lossy().into_owned()
}

#[test]
fn occupancy_prints_rounded_percent() {
    let (code, out, _) = regpack(&["occupancy", "--regs", "52"]);
    assert_eq!(code, 0);
    assert!(out.contains("20.8%") && out.contains("21%"), "{out}");
    let (_, out, _) = regpack(&["occupancy", "--regs", "24", "--shmem", "14560"]);
    assert!(out.contains("3 block(s)") && out.contains("shared-mem"), "{out}");
}

#[test]
fn area_for_both_architectures() {
    let (code, out, _) = regpack(&["area"]);
    assert_eq!(code, 0);
    assert!(out.contains("1774304"), "{out}");
    let (code, out, _) = regpack(&["area", "--arch", "volta"]);
    assert_eq!(code, 0);
    assert!(out.contains("470.4M"), "{out}");
}

#[test]
fn analyze_reports_widths() {
    let (code, out, _) = regpack(&["analyze", &path("fig4")]);
    assert_eq!(code, 0);
    assert!(out.contains("k1"), "{out}");
}

#[test]
fn allocate_writes_loadable_tables() {
    let dir = scratch_dir("alloc");
    let text = dir.join("t.txt");
    let bin = dir.join("t.bin");
    let (code, _, err) = regpack(&["allocate", &path("wide"), "--table-out", text.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (code, _, err) = regpack(&["allocate", &path("wide"), "--binary", "--table-out", bin.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let a = load_text(&std::fs::read_to_string(text).unwrap()).unwrap();
    let b = load_binary(&std::fs::read(bin).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.len() <= TABLE_ROWS);
}

#[test]
fn simulate_a_trace_file() {
    let dir = scratch_dir("sim");
    let f = dir.join("t.trace");
    std::fs::write(&f, common::dependency_chain_trace(4, 10).to_string()).unwrap();
    for mode in ["baseline", "packed"] {
        let (code, out, err) = regpack(&["simulate", "--trace", f.to_str().unwrap(), "--mode", mode]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("ipc") || out.contains("IPC"), "{out}");
    }
}

#[test]
fn pipeline_reports_are_byte_identical_across_runs() {
    let dir = scratch_dir("pipe");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for f in [&a, &b] {
        let (code, _, err) = regpack(&["pipeline", &path("shade"), "--report", f.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn input_errors_exit_with_one() {
    assert_eq!(regpack(&["analyze", "/nonexistent/k.ir"]).0, 1);
    assert_eq!(regpack(&["bogus"]).0, 1);
    assert_eq!(regpack(&["occupancy", "--regs", "0"]).0, 1);
    assert_eq!(regpack(&["area", "--arch", "kepler"]).0, 1);
    let dir = scratch_dir("bad");
    let f = dir.join("bad.ir");
    std::fs::write(&f, "kernel k() {\nblock b:\n  x = add i32 y, 1\n  ret\n}\n").unwrap();
    let (code, _, err) = regpack(&["analyze", f.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(regpack(&["--help"]).0, 0);
    assert_eq!(regpack(&["--version"]).0, 0);
}
