#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

pub const PI: f64 = std::f64::consts::PI;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub out: PathBuf,
    pub elapsed: Duration,
}

impl Run {
    pub fn json(&self, name: &str) -> Value {
        read_json(&self.out.join(name))
    }

    pub fn csv(&self, name: &str) -> Csv {
        read_csv(&self.out.join(name))
    }

    pub fn bytes(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

pub fn write_scenario(dir: &Path, name: &str, body: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(body).unwrap()).unwrap();
    p
}

pub fn qudot(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Run {
    let t = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_qudot"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawn qudot");
    Run {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        out: out.to_path_buf(),
        elapsed: t.elapsed(),
    }
}

/// Writes `body` as `<tag>.json` in `dir` and runs `sub` into `dir/<tag>`.
pub fn run_body(dir: &Path, tag: &str, sub: &str, body: &Value, extra: &[&str]) -> Run {
    let cfg = write_scenario(dir, &format!("{tag}.json"), body);
    qudot(sub, &cfg, &dir.join(tag), extra)
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    pub fn f64s(&self, name: &str) -> Vec<f64> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].parse().unwrap()).collect()
    }
}

pub fn read_csv(p: &Path) -> Csv {
    let mut r = csv::Reader::from_path(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    Csv { header, rows }
}

pub fn units() -> Value {
    json!({"length": "nm", "energy": "meV", "time": "ps"})
}

pub fn dim_scan_body(k: usize) -> Value {
    json!({"units": units(), "task": {"dim_scan": {"k": k, "d_min": 2, "d_max": 10}}})
}

pub fn layout_body(scheme: &str, n: usize, d: usize) -> Value {
    json!({"units": units(), "layout": {"scheme": scheme, "qudits": n, "levels": d}})
}

pub fn cz_body() -> Value {
    json!({
        "units": units(),
        "layout": {"scheme": "aux_per_qudit", "qudits": 2, "levels": 3},
        "task": {"gate": {"kind": "controlled_phase", "participants": [0, 1], "phi": PI}}
    })
}

pub fn transfer_body(seed: u64, budget: usize) -> Value {
    json!({
        "units": units(),
        "seed": seed,
        "task": {"optimize": {"benchmark": "transfer", "delta": 0.5, "duration_scale": 1.2, "budget": budget}}
    })
}

pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Sorted names in a directory.
pub fn dir_names(p: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(p)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

/// Every artifact except the manifest must match byte for byte; the
/// manifests must agree on everything but the wall clock.
pub fn same_artifacts(a: &Path, b: &Path) -> Result<usize, String> {
    let (na, nb) = (dir_names(a), dir_names(b));
    if na != nb {
        return Err(format!("file sets differ: {na:?} vs {nb:?}"));
    }
    for n in &na {
        let (x, y) = (std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap());
        if n == "manifest.json" {
            let (mut mx, mut my): (Value, Value) =
                (serde_json::from_slice(&x).unwrap(), serde_json::from_slice(&y).unwrap());
            mx.as_object_mut().unwrap().remove("wall_clock");
            my.as_object_mut().unwrap().remove("wall_clock");
            if mx != my {
                return Err("manifests differ outside wall_clock".into());
            }
        } else if x != y {
            return Err(format!("{n} differs"));
        }
    }
    Ok(na.len())
}

/// The manifest lists every file in its directory except itself.
pub fn manifest_matches_dir(dir: &Path) -> bool {
    let m = read_json(&dir.join("manifest.json"));
    let mut listed: Vec<String> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap().to_string())
        .collect();
    listed.push("manifest.json".into());
    listed.sort();
    listed == dir_names(dir)
}
