//! End-to-end runs of the command-line workflows.

use std::path::{Path, PathBuf};

use pedcall::cli::run;

fn pedcall(args: &[&str]) -> i32 {
    run(std::iter::once("pedcall").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    /// Simulates one replication of sib pairs over three linked SNPs.
    fn simulate(&self) -> (PathBuf, PathBuf) {
        let config = self.write(
            "scenario.toml",
            "relationship = \"sib\"\nfamilies = 60\nseed = 3\n\n\
             [founders]\nkind = \"haplotypes\"\nfreqs = [0.55, 0.02, 0.02, 0.01, 0.02, 0.01, 0.02, 0.35]\n\n\
             [depth]\npoisson = 8.0\n\n[errors]\nfixed = 0.02\n",
        );
        let prefix = format!("{}/", self.dir.path().display());
        assert_eq!(
            pedcall(&["simulate", "--config", s(&config), "--out-prefix", &prefix]),
            0
        );
        (self.path("counts.tsv"), self.path("pedigree.tsv"))
    }
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

#[test]
fn simulate_writes_seeded_tables() {
    let ws = Workspace::new();
    ws.simulate();
    for name in ["counts.tsv", "pedigree.tsv", "truth.tsv", "alpha.tsv"] {
        assert!(ws.read(name).starts_with("# seed=3\n"), "{name}");
    }
    assert_eq!(data_rows(&ws.read("counts.tsv")).len(), 60 * 2 * 3);
    assert_eq!(data_rows(&ws.read("truth.tsv")).len(), 60 * 2 * 3);
}

#[test]
fn fit_call_and_ld_pipeline() {
    let ws = Workspace::new();
    let (counts, ped) = ws.simulate();
    let params = ws.path("params.tsv");
    assert_eq!(
        pedcall(&["fit", "--counts", s(&counts), "--ped", s(&ped), "--out", s(&params)]),
        0
    );
    let rows = data_rows(&ws.read("params.tsv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let alpha: f64 = r[2].parse().unwrap();
        assert!((0.0..0.1).contains(&alpha), "{r:?}");
    }

    let calls = ws.path("calls.tsv");
    let argv = [
        "call",
        "--counts",
        s(&counts),
        "--ped",
        s(&ped),
        "--params",
        s(&params),
        "--out",
        s(&calls),
    ];
    assert_eq!(pedcall(&argv), 0);
    let rows = data_rows(&ws.read("calls.tsv"));
    assert_eq!(rows.len(), 60 * 2 * 3);
    let keys: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| (r[0].clone(), r[1].clone(), r[2].clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for r in &rows {
        let total: f64 = r[4..7].iter().map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() <= 5e-6);
    }
    let truth: std::collections::HashMap<(String, String, String), String> = data_rows(&ws.read("truth.tsv"))
        .into_iter()
        .map(|r| ((r[0].clone(), r[1].clone(), r[2].clone()), r[3].clone()))
        .collect();
    let wrong = rows
        .iter()
        .filter(|r| truth[&(r[0].clone(), r[1].clone(), r[2].clone())] != r[3])
        .count();
    assert!(wrong * 10 < rows.len(), "{wrong} wrong calls");

    let joint = ws.path("joint.tsv");
    let argv = [
        "fit",
        "--counts",
        s(&counts),
        "--ped",
        s(&ped),
        "--loci",
        "snp1,snp2",
        "--joint",
        "--out",
        s(&joint),
    ];
    assert_eq!(pedcall(&argv), 0);
    assert!(ws.read("joint.tsv").contains("#haplotypes\n00\t"));
    let joint_calls = ws.path("joint_calls.tsv");
    let argv = [
        "call",
        "--counts",
        s(&counts),
        "--ped",
        s(&ped),
        "--params",
        s(&joint),
        "--out",
        s(&joint_calls),
    ];
    assert_eq!(pedcall(&argv), 0);
    assert_eq!(data_rows(&ws.read("joint_calls.tsv")).len(), 60 * 2 * 2);

    let panel = ws.write("panel.txt", "#loci 2\n00\n00\n00\n11\n11\n01\n");
    let panel_calls = ws.path("panel_calls.tsv");
    let argv = [
        "call",
        "--counts",
        s(&counts),
        "--ped",
        s(&ped),
        "--params",
        s(&joint),
        "--panel",
        s(&panel),
        "--out",
        s(&panel_calls),
    ];
    assert_eq!(pedcall(&argv), 0);

    let ld = ws.path("ld.tsv");
    assert_eq!(
        pedcall(&["ld-pipeline", "--counts", s(&counts), "--ped", s(&ped), "--out", s(&ld)]),
        0
    );
    let rows = data_rows(&ws.read("ld.tsv"));
    assert_eq!(rows.len(), 60 * 2 * 3);
    let wrong = rows
        .iter()
        .filter(|r| truth[&(r[0].clone(), r[1].clone(), r[2].clone())] != r[3])
        .count();
    assert!(wrong * 10 < rows.len(), "{wrong} wrong LD calls");
}

#[test]
fn non_convergence_exits_two_with_output() {
    let ws = Workspace::new();
    let (counts, ped) = ws.simulate();
    let params = ws.path("params.tsv");
    let code = pedcall(&[
        "fit",
        "--counts",
        s(&counts),
        "--ped",
        s(&ped),
        "--max-iter",
        "1",
        "--out",
        s(&params),
    ]);
    assert_eq!(code, 2);
    assert_eq!(data_rows(&ws.read("params.tsv")).len(), 3);
}

#[test]
fn validation_errors_exit_one() {
    let ws = Workspace::new();
    let counts = ws.write(
        "bad.tsv",
        "family_id\tmember_id\tsnp_id\tdepth\tvariants\nF1\tA\trs1\t3\t4\n",
    );
    let ped = ws.write("ped.tsv", "family_id\trelationship\tmembers\nF1\tsingleton\tA\n");
    let out = ws.path("out.tsv");
    assert_eq!(
        pedcall(&["fit", "--counts", s(&counts), "--ped", s(&ped), "--out", s(&out)]),
        1
    );
    assert!(!out.exists());

    let counts = ws.write(
        "good.tsv",
        "family_id\tmember_id\tsnp_id\tdepth\tvariants\nF1\tA\trs1\t3\t1\n",
    );
    let trio = ws.write("trio.tsv", "family_id\trelationship\tmembers\nF1\ttrio\tA\n");
    assert_eq!(
        pedcall(&["fit", "--counts", s(&counts), "--ped", s(&trio), "--out", s(&out)]),
        1
    );
    assert_eq!(
        pedcall(&[
            "ld-pipeline",
            "--counts",
            s(&counts),
            "--ped",
            s(&ped),
            "--min-r2",
            "2",
            "--out",
            s(&out)
        ]),
        1
    );
    assert_eq!(
        pedcall(&["evaluate", "--scenario", "/nonexistent.toml", "--out", s(&out)]),
        1
    );
    assert_eq!(
        pedcall(&[
            "--threads",
            "0",
            "fit",
            "--counts",
            s(&counts),
            "--ped",
            s(&ped),
            "--out",
            s(&out)
        ]),
        1
    );
    assert_eq!(pedcall(&["frobnicate"]), 1);
}

#[test]
fn evaluate_writes_table() {
    let ws = Workspace::new();
    let scenario = ws.write(
        "trio.toml",
        "relationship = \"trio\"\nfamilies = 30\nreplications = 3\nseed = 8\n\n\
         [founders]\nkind = \"mafs\"\nmafs = [0.1]\n\n[depth]\npoisson = 10.0\n\n[errors]\nfixed = 0.05\n",
    );
    let out = ws.path("table.tsv");
    let argv = [
        "evaluate",
        "--scenario",
        s(&scenario),
        "--methods",
        "pedgc,seqem",
        "--seed",
        "12",
        "--out",
        s(&out),
    ];
    assert_eq!(pedcall(&argv), 0);
    let text = ws.read("table.tsv");
    assert!(text.starts_with("# seed=12\nscenario\tmethod\t"));
    assert_eq!(data_rows(&text).len(), 2);
}
