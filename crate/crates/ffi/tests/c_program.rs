//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<this test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_fits() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libprogx_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let compiled = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("a C compiler on PATH");
    assert!(compiled.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&compiled.stderr));
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "exit {:?}: {}{}", run.status.code(), stdout, String::from_utf8_lossy(&run.stderr));
    assert_eq!(stdout.trim(), "instances=3");
}
