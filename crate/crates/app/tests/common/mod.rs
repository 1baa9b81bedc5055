//! Helpers shared by the CLI tests and the acceptance gate.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use betaflow::landmarks::EXTREMITY_GROUPS;
use betaflow::skeleton::AnimationClip;
use betaflow::MoveSequence;

/// Position tolerance when comparing recovered holds with authored ones;
/// the synthetic streams jitter extremities by σ = 3e-4.
pub const HOLD_TOL: f64 = 2e-3;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

/// Runs the CLI; `Err` carries stderr on a nonzero exit.
pub fn betaflow(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_betaflow"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

/// Landmark stream -> static points -> holds -> moves -> clip, checked
/// against the authored problem.
pub fn end_to_end(dir: &Path) -> Result<String, String> {
    let (s, c, m, clip) = (dir.join("static.json"), dir.join("holds.json"), dir.join("moves.csv"), dir.join("clip.json"));
    betaflow(&["detect", "--in", &fixture("streams/climb_00.csv"), "--out", &p(&s)])?;
    betaflow(&["cluster", "--in", &p(&s), "--out", &p(&c), "--moves-csv", &p(&m)])?;
    betaflow(&["animate", "--in", &p(&c), "--out", &p(&clip), "--frames-per-move", "12"])?;

    let found = MoveSequence::read_csv(fs::File::open(&m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let authored =
        MoveSequence::read_csv(fs::File::open(fixtures().join("problem_00.csv")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if found.len() != authored.len() {
        return Err(format!("{} moves recovered, {} authored", found.len(), authored.len()));
    }
    let mut worst: f64 = 0.0;
    for (k, (f, a)) in found.moves.iter().zip(&authored.moves).enumerate() {
        if f.limb != a.limb {
            return Err(format!("move {k}: limb {:?}, authored {:?}", f.limb, a.limb));
        }
        worst = worst.max(f.point().distance(&a.point()));
    }
    if worst >= HOLD_TOL {
        return Err(format!("recovered holds off by up to {worst:.2e}"));
    }

    let clip: AnimationClip = serde_json::from_slice(&fs::read(&clip).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    for (k, mv) in found.moves.iter().enumerate() {
        let group = EXTREMITY_GROUPS[mv.limb.index()];
        let hit = clip.frames.iter().any(|f| group.iter().all(|&i| f.landmarks[i].point() == mv.point()));
        if !hit {
            return Err(format!("no clip frame puts {:?} exactly on the hold of move {k}", mv.limb));
        }
    }
    Ok(format!("{} moves, holds within {worst:.1e}, {} clip frames", found.len(), clip.frames_total()))
}

/// Every file under `root`, relative path and bytes.
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs every file-producing subcommand twice into separate directories
/// and compares the outputs byte for byte.
pub fn determinism(scratch: &Path) -> Result<String, String> {
    let holds = fixture("holds_00.json");
    let manifest = fixture("manifest.json");
    let problems = fixture("problems.json");
    let art = fixture("checkpoints/art.json");
    let small = ["--dim", "16", "--heads", "2", "--blocks", "1", "--ffn", "32"];
    let mut compared = 0;
    for run in ["a", "b"] {
        let d = scratch.join(run);
        let o = |name: &str| p(&d.join(name));
        betaflow(&["detect", "--in", &fixture("streams/climb_01.json"), "--out", &o("static.json")])?;
        betaflow(&["cluster", "--in", &o("static.json"), "--out", &o("holds.json"), "--moves-csv", &o("moves.csv")])?;
        betaflow(&["animate", "--in", &o("holds.json"), "--out", &o("clip.json")])?;
        betaflow(&["render", "--in", &o("clip.json"), "--out", &o("frames"), "--width", "90", "--height", "160"])?;
        betaflow(&["dataset", "--in", &problems, "--out", &o("manifest.json"), "--seed", "7", "--n-perms", "5"])?;
        for model in ["art", "simple"] {
            let mut args = vec!["train", "--model", model, "--in", &manifest, "--epochs", "2", "--seed", "7"];
            let out = o(&format!("train_{model}"));
            args.extend(["--out", &out]);
            args.extend(small);
            betaflow(&args)?;
        }
        let s2s = o("train_seq2seq");
        betaflow(&[
            "train", "--model", "seq2seq", "--in", &manifest, "--out", &s2s, "--epochs", "2", "--seed", "7", "--hidden", "8",
            "--embed", "8", "--batch-size", "4",
        ])?;
        betaflow(&["predict", "--model", "art", "--holds", &holds, "--checkpoint", &art, "--out", &o("predict_art.json")])?;
        betaflow(&["predict", "--model", "simple", "--holds", &holds, "--seed", "3", "--out", &o("predict_simple.json")])?;
        betaflow(&[
            "predict", "--model", "seq2seq", "--holds", &holds, "--checkpoint", &fixture("checkpoints/seq2seq.json"), "--out",
            &o("predict_seq2seq.json"),
        ])?;
        betaflow(&["eval", "--model", "art", "--checkpoint", &art, "--in", &manifest, "--out", &o("eval.json")])?;
        betaflow(&["fixtures", "--out", &o("fixtures"), "--seed", "7"])?;
    }
    let (a, b) = (tree(&scratch.join("a")), tree(&scratch.join("b")));
    if a.len() != b.len() {
        return Err(format!("runs wrote {} and {} files", a.len(), b.len()));
    }
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        if pa != pb {
            return Err(format!("runs wrote different files: {} vs {}", pa.display(), pb.display()));
        }
        if ba != bb {
            return Err(format!("{} differs between runs", pa.display()));
        }
        compared += 1;
    }
    Ok(format!("{compared} output files bit-identical across two runs"))
}

/// The committed fixture pack is what `fixtures --seed 7` writes today.
pub fn fixtures_are_current(scratch: &Path) -> Result<String, String> {
    betaflow(&["fixtures", "--out", &p(scratch), "--seed", "7"])?;
    let fresh = tree(scratch);
    for (rel, bytes) in &fresh {
        let committed = fs::read(fixtures().join(rel)).map_err(|e| format!("{}: {e}", rel.display()))?;
        if &committed != bytes {
            return Err(format!("fixtures/{} is stale; rerun `betaflow fixtures`", rel.display()));
        }
    }
    Ok(format!("{} fixture files match", fresh.len()))
}
