use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Case {
    dir: tempfile::TempDir,
}

impl Case {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, text: &str) -> PathBuf {
        let p = self.path("run.toml");
        std::fs::write(&p, text).unwrap();
        p
    }

    /// Runs the binary with `--out <tmp>/<out>`; returns the exit code and stdout.
    fn run(&self, out: &str, args: &[&str]) -> (i32, String) {
        let o = Command::new(env!("CARGO_BIN_EXE_shellspec"))
            .args(args)
            .arg("--out")
            .arg(self.path(out))
            .env("RUST_LOG", "error")
            .output()
            .unwrap();
        (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
    }

    fn json(&self, out: &str, file: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(out).join(file)).unwrap()).unwrap()
    }
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identities_pass_and_write_a_manifest() {
    let c = Case::new();
    let (code, stdout) = c.run("a", &["identities", "--nodes-per-edge", "3", "--threads", "1"]);
    assert_eq!(code, 0, "{stdout}");
    let m = c.json("a", "manifest.json");
    assert_eq!(m["command"], "identities");
    assert_eq!(m["status"], "pass");
    assert_eq!(m["threads"], 1);
    assert_eq!(m["seed"], 42);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["timings"].as_array().unwrap().len() >= 4);
    for f in ["identities.json", "identities.csv", "identities.md", "config.resolved.toml"] {
        assert!(c.path("a").join(f).exists(), "{f}");
    }
    let report = c.json("a", "identities.json");
    let nodes: Vec<u64> = report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["nodes"].as_u64().unwrap())
        .collect();
    assert_eq!(nodes, vec![54, 216]);

    // same config, same bytes; a different seed changes the hash
    c.run("b", &["identities", "--nodes-per-edge", "3", "--threads", "1"]);
    let read = |d: &str| std::fs::read(c.path(d).join("identities.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(c.json("b", "manifest.json")["config_hash"], m["config_hash"]);
    c.run("c", &["identities", "--nodes-per-edge", "2", "--seed", "7"]);
    assert_ne!(c.json("c", "manifest.json")["config_hash"], m["config_hash"]);
}

#[test]
fn config_errors_exit_with_one() {
    let c = Case::new();
    assert_eq!(c.run("a", &["identities", "--mass", "0"]).0, 1);
    let cfg = c.config("mass = -1.0\n");
    assert_eq!(c.run("a", &["identities", "--config", arg(&cfg)]).0, 1);
    let cfg = c.config("[geometry]\nshape = { kind = \"sphere\", radius = 1.0 }\nnodes = 3\n");
    assert_eq!(c.run("a", &["identities", "--config", arg(&cfg)]).0, 1);
    assert_eq!(c.run("a", &["identities", "--config", "/nonexistent/run.toml"]).0, 1);
    assert_eq!(c.run("a", &["nonsense"]).0, 1);
    let torus = c.config("[geometry]\nshape = { kind = \"torus\", major = 0.5, minor = 0.6 }\n");
    assert_eq!(c.run("a", &["identities", "--config", arg(&torus)]).0, 1);
}

#[test]
fn magnetic_only_spectrum_is_empty() {
    let c = Case::new();
    let cfg = c.config("[coupling]\nfamily = \"magnetic\"\nstrength = 1.0\n[spectrum]\nsamples = 24\n");
    let (code, stdout) = c.run("a", &["spectrum", "--config", arg(&cfg), "--nodes-per-edge", "3"]);
    assert_eq!(code, 0, "{stdout}");
    let s = c.json("a", "spectrum.json");
    assert!(s["scan"]["roots"].as_array().unwrap().is_empty());
    // both root sets are empty, so either reading matches
    assert_eq!(s["correspondence"]["supported"], "both");
    let csv = std::fs::read_to_string(c.path("a").join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 25);
}

#[test]
fn critical_coupling_is_refused() {
    let c = Case::new();
    let cfg = c.config("[coupling]\nfamily = \"anomalous_magnetic\"\nstrength = 2.0\n");
    assert_eq!(c.run("a", &["spectrum", "--config", arg(&cfg), "--nodes-per-edge", "3"]).0, 3);
    let m = c.json("a", "manifest.json");
    assert_eq!(m["status"], "refused");
    assert!(m["error"].as_str().unwrap().contains("critical"));
}

#[test]
fn resolvent_values_and_refusal_at_an_eigenvalue() {
    let c = Case::new();
    let cfg = c.config("[output]\ndump_operators = true\n");
    let (code, stdout) = c.run("a", &["resolvent", "--config", arg(&cfg), "--nodes-per-edge", "3"]);
    assert_eq!(code, 0, "{stdout}");
    let r = c.json("a", "resolvent.json");
    assert!(r["boundary_condition_defect"].as_f64().unwrap() <= 1e-8);
    let csv = std::fs::read_to_string(c.path("a").join("resolvent.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    let dump = std::fs::read(c.path("a").join("coupled.bin")).unwrap();
    assert_eq!(u64::from_le_bytes(dump[0..8].try_into().unwrap()), 4);
    assert_eq!(u64::from_le_bytes(dump[8..16].try_into().unwrap()), 54);
    assert_eq!(dump.len(), 40 + 16 * 216 * 216);

    let (code, _) = c.run("s", &["spectrum", "--nodes-per-edge", "3"]);
    assert_eq!(code, 2, "the coarse grid misses the mapped-root tolerance");
    let root = c.json("s", "spectrum.json")["scan"]["roots"][0]["a"].as_f64().unwrap();
    let cfg = c.config(&format!("[resolvent]\nz = [{root}, 0.0]\n"));
    assert_eq!(c.run("b", &["resolvent", "--config", arg(&cfg), "--nodes-per-edge", "3"]).0, 3);
}

#[test]
fn diagnostics_compare_two_shapes() {
    let c = Case::new();
    let cfg = c.config("[diagnostics]\nstability = false\ncount = 20\ntol = 0.2\nmagnetic = [2.0]\ncauchy_energies = [0.0]\n");
    let (code, stdout) = c.run("a", &["diagnostics", "--config", arg(&cfg), "--nodes-per-edge", "3"]);
    assert_eq!(code, 0, "{stdout}");
    let d = c.json("a", "diagnostics.json");
    let profiles = d["profiles"].as_array().unwrap();
    assert_eq!(profiles.len(), 2);
    assert_eq!(profiles[1]["geometry"], "compare");
    assert_eq!(profiles[0]["profile"]["singular_values"].as_array().unwrap().len(), 20);
    assert!(d["confinement"]["confining"] == false);
    let md = std::fs::read_to_string(c.path("a").join("diagnostics.md")).unwrap();
    assert!(md.contains("sigma_10/sigma_1"));

    // a tolerance the coarse grid cannot meet names the failing check
    let cfg = c.config("[diagnostics]\nstability = false\ncount = 20\ntol = 1e-4\nmagnetic = []\ncauchy_energies = [0.0]\noperators = []\n");
    assert_eq!(c.run("b", &["diagnostics", "--config", arg(&cfg), "--nodes-per-edge", "3"]).0, 2);
    let failures = c.json("b", "manifest.json")["failures"].clone();
    assert!(failures[0].as_str().unwrap().contains("factorization"));
}

#[test]
fn converge_reports_orders() {
    let c = Case::new();
    let cfg = c.config("[converge]\nquantity = \"area\"\n");
    let (code, stdout) = c.run("a", &["converge", "--config", arg(&cfg), "--nodes-per-edge", "3"]);
    assert_eq!(code, 0, "{stdout}");
    let v = c.json("a", "converge.json");
    assert_eq!(v["nodes"], serde_json::json!([54, 216, 864]));
    assert!(v["rows"][0]["fitted"].as_f64().unwrap() >= 4.0);

    let cfg = c.config("[converge]\nchecks = [\"cauchy_square[a=0]\", \"massless_square\"]\n");
    let (code, stdout) = c.run("b", &["converge", "--config", arg(&cfg), "--nodes-per-edge", "2"]);
    assert_eq!(code, 0, "{stdout}");
    let v = c.json("b", "converge.json");
    let row = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "cauchy_square[a=0]")
        .unwrap()
        .clone();
    assert!(row["fitted"].as_f64().unwrap() >= 1.0, "{row}");
    assert!(std::fs::read_to_string(c.path("b").join("converge.csv")).unwrap().lines().count() > 3);
}

fn octahedron(path: &Path) {
    let mut s = String::from("OFF\n6 8 0\n1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n");
    for t in ["0 2 4", "2 1 4", "1 3 4", "3 0 4", "2 0 5", "1 2 5", "3 1 5", "0 3 5"] {
        s.push_str(&format!("3 {t}\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn mesh_input_is_flagged() {
    let c = Case::new();
    let mesh = c.path("octa.off");
    octahedron(&mesh);
    let cfg = c.config(&format!(
        "[geometry]\nshape = {{ kind = \"mesh\", path = \"{}\" }}\nresolution = 1\n[identities]\nrefine = false\n",
        mesh.display()
    ));
    let (code, _) = c.run("a", &["identities", "--config", arg(&cfg)]);
    assert!(code == 0 || code == 2, "{code}");
    let r = c.json("a", "identities.json");
    assert_eq!(r["reports"][0]["lower_order_fallback"], true);
    assert_eq!(r["reports"][0]["nodes"], 32);
    assert!(std::fs::read_to_string(c.path("a").join("identities.md")).unwrap().contains("fallback"));
}
