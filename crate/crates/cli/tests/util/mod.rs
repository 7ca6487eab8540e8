//! Shared helpers for CLI end-to-end tests.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stxtreme")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn stxtreme")
}

pub fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stxtreme-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

/// A summers-only raw observation fixture: `n_stations` stations, hourly
/// measurements over June 21 .. for `hours` hours in each of `years` years,
/// heavy-tailed positive values with a deterministic LCG.
pub fn summers_fixture(n_stations: usize, years: usize, hours: usize) -> (String, String) {
    let mut stations = String::from("station_id,x_km,y_km\n");
    for s in 0..n_stations {
        stations.push_str(&format!("ST{s},{},{}\n", 10 * s, 5 * (s % 3)));
    }
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut panel = String::from("time");
    for s in 0..n_stations {
        panel.push_str(&format!(",ST{s}"));
    }
    panel.push('\n');
    for y in 0..years {
        for h in 0..hours {
            let day = 21 + h / 24;
            let hour = h % 24;
            panel.push_str(&format!("{}-06-{:02}T{:02}:00", 2001 + y, day, hour));
            for _ in 0..n_stations {
                let u = next();
                // Pareto-ish tail with some zeros like rainfall.
                let v = if u < 0.6 {
                    0.0
                } else {
                    ((1.0 - u).powf(-0.35) - 1.0) * 2.0
                };
                panel.push_str(&format!(",{v:.4}"));
            }
            panel.push('\n');
        }
    }
    (stations, panel)
}

/// Compare two output directories byte-for-byte, nulling the manifest wall
/// time (the one intentionally nondeterministic field).
pub fn assert_dirs_identical(a: &Path, b: &Path) {
    let list = |d: &Path| -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let (fa, fb) = (list(a), list(b));
    assert_eq!(fa, fb, "different file sets in {a:?} vs {b:?}");
    for name in fa {
        let ba = std::fs::read(a.join(&name)).unwrap();
        let bb = std::fs::read(b.join(&name)).unwrap();
        if name.starts_with("manifest_") && name.ends_with(".json") {
            let mut ja: serde_json::Value = serde_json::from_slice(&ba).unwrap();
            let mut jb: serde_json::Value = serde_json::from_slice(&bb).unwrap();
            for j in [&mut ja, &mut jb] {
                // Wall time and worker count are operational metadata, not
                // semantics; everything else must match exactly.
                j["wall_time_s"] = serde_json::Value::Null;
                j["threads"] = serde_json::Value::Null;
                if let Some(cfgs) = j["config"].as_array_mut() {
                    cfgs.retain(|kv| kv[0] != "out.dir" && kv[0] != "threads");
                }
            }
            assert_eq!(ja, jb, "manifest {name} differs beyond wall time");
        } else {
            assert_eq!(ba, bb, "file {name} differs");
        }
    }
}
