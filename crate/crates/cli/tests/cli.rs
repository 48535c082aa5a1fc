use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scripted.toml")
}

fn mazecollab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mazecollab"))
        .args(args)
        .arg("--config")
        .arg(config())
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn pipeline(out: &Path) {
    for cmd in ["generate", "run", "grade", "report", "ablate-grading"] {
        let o = mazecollab(&[cmd], out);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    // the meta file only carries wall-clock durations
    files.retain(|(p, _)| p != Path::new("rollouts_meta.jsonl"));
    files.sort();
    files
}

#[test]
fn full_pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(ta.iter().any(|(p, _)| p == Path::new("report/summary.csv")));
    assert!(ta.iter().any(|(p, _)| p == Path::new("reliability.json")));
    assert_eq!(ta.len(), tb.len());
    for ((pa, da), (pb, db)) in ta.iter().zip(&tb) {
        assert_eq!(pa, pb);
        assert!(da == db, "{} differs", pa.display());
    }
}

#[test]
fn rerun_without_resume_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mazecollab(&["generate"], dir.path()).status.code(), Some(0));
    assert_eq!(mazecollab(&["grade"], dir.path()).status.code(), Some(2));
    assert_eq!(mazecollab(&["run", "--parallel", "2"], dir.path()).status.code(), Some(0));
    let o = mazecollab(&["run"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--resume"));
    assert_eq!(mazecollab(&["run", "--resume"], dir.path()).status.code(), Some(0));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, fs::read_to_string(config()).unwrap().replace("wall_density", "wall_densty")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mazecollab"))
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}
