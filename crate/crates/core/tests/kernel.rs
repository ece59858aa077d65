use std::sync::Arc;
use std::time::{Duration, Instant};

use dataloop::kernel::{ArtifactKind, ExecStatus, Kernel, KernelConfig, KernelManager, KernelState, TIMEOUT_TRACEBACK};
use dataloop::Error;

const T: Duration = Duration::from_secs(20);

fn start(dir: &tempfile::TempDir) -> Kernel {
    Kernel::start("test", dir.path(), KernelConfig::default()).expect("python3 kernel starts")
}

#[test]
fn state_persists_across_executes() {
    let dir = tempfile::tempdir().unwrap();
    let k = start(&dir);
    let r = k.execute("x = 41\ny = x + 1", T).unwrap();
    assert!(r.is_success(), "{r:?}");
    let r = k.execute("print(y)", T).unwrap();
    assert_eq!(r.stdout, "42\n");
    // A trailing expression is echoed like a REPL.
    let r = k.execute("y * 2", T).unwrap();
    assert_eq!(r.stdout.trim(), "84");
}

#[test]
fn sessions_are_isolated() {
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = Kernel::start("a", da.path(), KernelConfig::default()).unwrap();
    let b = Kernel::start("b", db.path(), KernelConfig::default()).unwrap();
    assert!(a.execute("secret = 7", T).unwrap().is_success());
    let r = b.execute("print(secret)", T).unwrap();
    assert_eq!(r.status, ExecStatus::Error);
    assert!(r.traceback.unwrap().contains("NameError"));
}

#[test]
fn errors_carry_traceback_and_keep_state() {
    let dir = tempfile::tempdir().unwrap();
    let k = start(&dir);
    k.execute("keep = 'yes'", T).unwrap();
    let r = k.execute("import sys\nprint('partial')\nprint('warn', file=sys.stderr)\n1/0", T).unwrap();
    assert_eq!(r.status, ExecStatus::Error);
    assert_eq!(r.stdout, "partial\n");
    assert!(r.stderr.contains("warn"));
    assert!(r.traceback.as_deref().unwrap().contains("ZeroDivisionError"));
    assert!(r.error_text().contains("ZeroDivisionError"));
    assert_eq!(k.execute("print(keep)", T).unwrap().stdout, "yes\n");
    let r = k.execute("def broken(:\n  pass", T).unwrap();
    assert!(r.traceback.unwrap().contains("SyntaxError"));
}

#[test]
fn timeout_kills_and_restarts_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let k = start(&dir);
    k.execute("before = 1", T).unwrap();
    let started = Instant::now();
    let r = k.execute("import time\ntime.sleep(30)", Duration::from_secs(2)).unwrap();
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_millis(2400), "took {elapsed:?}");
    assert_eq!(r.status, ExecStatus::Error);
    assert!(r.traceback.unwrap().starts_with(TIMEOUT_TRACEBACK));
    assert!(r.kernel_restarted);
    assert_eq!(k.restart_count(), 1);
    assert_eq!(k.state(), KernelState::Ready);
    assert_eq!(k.execute("print(1 + 1)", T).unwrap().stdout, "2\n");
    // State did not survive the restart.
    assert!(!k.execute("before", T).unwrap().is_success());
}

#[test]
fn crash_is_an_error_result() {
    let dir = tempfile::tempdir().unwrap();
    let k = start(&dir);
    let r = k.execute("import os\nos._exit(3)", T).unwrap();
    assert_eq!(r.status, ExecStatus::Error);
    assert!(r.kernel_restarted);
    assert!(r.traceback.unwrap().contains("KernelDied"));
    assert!(k.execute("print('alive')", T).unwrap().is_success());
}

#[test]
fn artifact_scan_reports_created_file_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("preexisting.csv"), "a\n1\n").unwrap();
    let k = start(&dir);
    let r = k.execute("print('nothing')", T).unwrap();
    assert!(r.new_artifacts.is_empty(), "{:?}", r.new_artifacts);
    let r = k.execute("open('out.csv', 'w').write('x\\n1\\n')", T).unwrap();
    let names: Vec<_> = r.new_artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["out.csv"]);
    assert_eq!(r.new_artifacts[0].kind, ArtifactKind::Data);
    assert_eq!(r.new_artifacts[0].path, dir.path().join("out.csv"));

    let r = k
        .execute(
            "import matplotlib.pyplot as plt\nplt.plot([1, 2], [3, 4])\nplt.savefig('fig.png')\nimport os\nos.makedirs('sub', exist_ok=True)\nopen('sub/m.pkl', 'wb').write(b'0')",
            T,
        )
        .unwrap();
    assert!(r.is_success(), "{r:?}");
    let mut names: Vec<_> = r.new_artifacts.iter().map(|a| (a.name.clone(), a.kind)).collect();
    names.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(names, [("fig.png".to_string(), ArtifactKind::Figure), ("sub/m.pkl".to_string(), ArtifactKind::Model)]);
}

#[test]
fn output_is_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = KernelConfig { output_limit: 100, ..KernelConfig::default() };
    let k = Kernel::start("t", dir.path(), cfg).unwrap();
    let r = k.execute("print('z' * 1000)", T).unwrap();
    assert_eq!(r.stdout, format!("{}\n[truncated]", "z".repeat(100)));
}

#[test]
fn shutdown_while_busy_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let k = Arc::new(start(&dir));
    let worker = {
        let k = k.clone();
        std::thread::spawn(move || k.execute("import time\nwhile True: time.sleep(0.05)", T))
    };
    std::thread::sleep(Duration::from_millis(300));
    let started = Instant::now();
    k.shutdown();
    assert!(started.elapsed() < Duration::from_secs(6));
    let _ = worker.join().unwrap();
    assert_eq!(k.state(), KernelState::Dead);
    k.shutdown();
    assert!(matches!(k.execute("1", T), Err(Error::Precondition(_))));
}

#[test]
fn missing_interpreter_fails_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = KernelConfig { python: "/nonexistent/python-xyz".into(), ..KernelConfig::default() };
    assert!(matches!(Kernel::start("m", dir.path(), cfg), Err(Error::KernelStart(_))));
}

#[test]
fn manager_one_kernel_per_session() {
    let dir = tempfile::tempdir().unwrap();
    let m = KernelManager::new(KernelConfig::default());
    let k1 = m.get_or_start("s", dir.path()).unwrap();
    let k2 = m.get_or_start("s", dir.path()).unwrap();
    assert!(Arc::ptr_eq(&k1, &k2));
    assert!(matches!(m.start_kernel("s", dir.path()), Err(Error::Precondition(_))));
    m.shutdown("s");
    assert!(m.get("s").is_none());
    assert_eq!(k1.state(), KernelState::Dead);
    m.shutdown_all();
}
