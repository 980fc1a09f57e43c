//! Runs the `stla` binary on the shipped configurations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Expected {
    pub config: &'static str,
    pub exit: i32,
    /// Theorem tag and `k̄` per point, `None` when the point is not certified.
    pub points: &'static [Option<(&'static str, u32)>],
}

pub const EXPECTED: &[Expected] = &[
    Expected { config: "classical", exit: 0, points: &[Some(("point", 1))] },
    Expected {
        config: "ex1_bony",
        exit: 0,
        points: &[Some(("fat", 3)), Some(("fat", 3)), Some(("fat", 2)), Some(("fat", 1)), Some(("fat", 2))],
    },
    Expected { config: "ex1_bony_holder", exit: 0, points: &[Some(("fat", 3))] },
    Expected { config: "ex2_first_order", exit: 2, points: &[None] },
    Expected { config: "ex2_rotation", exit: 0, points: &[Some(("fat", 2))] },
    Expected { config: "ex3_coron_disk", exit: 0, points: &[Some(("fat", 4)), Some(("fat", 4))] },
    Expected { config: "ex3_coron_point", exit: 0, points: &[Some(("point", 4))] },
    Expected { config: "ex4_oscillator", exit: 0, points: &[Some(("fat", 2)), Some(("fat", 2))] },
    Expected { config: "ex5_cylinder", exit: 0, points: &[Some(("fat", 2)), Some(("fat", 1)), Some(("fat", 1))] },
    Expected {
        config: "ex6_axis",
        exit: 0,
        points: &[Some(("manifold", 2)), Some(("corollary-restricted", 2))],
    },
    Expected { config: "ex7_curve", exit: 0, points: &[Some(("manifold", 2))] },
];

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(format!("{name}.json"))
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn stla(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_stla")).args(args).output().expect("spawn stla");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn run_config(path: &Path, out: &Path) -> Output {
    stla(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

pub fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Theorem tag and `k̄` per point from `result.json`.
pub fn verdicts(out: &Path) -> Vec<Option<(String, u32)>> {
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("result.json")).unwrap()).unwrap();
    v["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let c = &p["certificate"];
            (!c.is_null()).then(|| (c["theorem"].as_str().unwrap().to_string(), c["k_bar"].as_u64().unwrap() as u32))
        })
        .collect()
}

pub fn matches(e: &Expected, got: &[Option<(String, u32)>]) -> bool {
    got.len() == e.points.len()
        && got.iter().zip(e.points).all(|(g, w)| match (g, w) {
            (None, None) => true,
            (Some((t, k)), Some((wt, wk))) => t == wt && k == wk,
            _ => false,
        })
}
