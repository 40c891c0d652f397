//! Acceptance run: one pass/fail line per criterion. Every command goes
//! through the `profinite` binary twice, with one worker thread and with
//! several, and the JSON bytes of the two runs are compared for criterion 9.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use serde_json::Value;

/// Wall-clock limits in seconds (process start to exit, many-thread run).
const RANK_LIMIT: f64 = 5.0;
const FINITE_LIMIT: f64 = 60.0;
const ZP_LIMIT: f64 = 10.0;
/// Exact arithmetic throughout: every count below must match exactly.
const MIN_RANDOM_SHEAVES: usize = 20;
const ASSOC_TRIPLES: usize = 200;
const PHI_SEQUENCES: usize = 20;
const SEED: &str = "20240601";
const MANY_THREADS: &str = "4";

struct Runner {
    determinism: Vec<(String, bool)>,
}

struct Run {
    result: Value,
    elapsed: Duration,
    ok: bool,
}

impl Runner {
    fn exec(args: &[&str], threads: &str) -> (Vec<u8>, Duration, bool) {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_profinite"))
            .args(args)
            .args(["--json", "--seed", SEED, "--threads", threads])
            .env_remove("PROFINITE_DEPTH")
            .output()
            .expect("profinite binary runs");
        let elapsed = start.elapsed();
        if !out.status.success() {
            eprintln!("  {:?} exited with {:?}: {}", args, out.status.code(), String::from_utf8_lossy(&out.stderr));
        }
        (out.stdout, elapsed, out.status.success())
    }

    fn run(&mut self, args: &[&str]) -> Run {
        let (one, _, ok1) = Self::exec(args, "1");
        let (many, elapsed, ok) = Self::exec(args, MANY_THREADS);
        self.determinism.push((args.join(" "), ok1 && ok && one == many && !one.is_empty()));
        let parsed: Value = serde_json::from_slice(&many).unwrap_or(Value::Null);
        let schema_ok = parsed["schema"] == 1;
        Run { result: parsed["result"].clone(), elapsed, ok: ok && schema_ok }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn len(v: &Value) -> usize {
    v.as_array().map_or(usize::MAX, Vec::len)
}

fn criterion_1(r: &mut Runner) -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    let cases: [(&[&str], u64); 5] = [
        (&["cb", "rank", "--tower", "pro_p:2", "--depth", "6"], 2),
        (&["cb", "rank", "--tower", "pro_p:3", "--depth", "6"], 2),
        (&["cb", "rank", "--tower", "pro_p:5", "--depth", "6"], 2),
        (&["cb", "rank", "--tower", "trivial", "--depth", "6"], 1),
        (&["cb", "rank", "--empty"], 0),
    ];
    for (args, want) in cases {
        let mut a = args.to_vec();
        a.push("--verify");
        let run = r.run(&a);
        let got = run.result["verdict"]["exact"].as_u64();
        let good = run.ok && got == Some(want) && run.result["verify"]["passed"] == true && secs(run.elapsed) < RANK_LIMIT;
        ok &= good;
        notes.push(format!("{}={:?} {:.2}s", args[2..].join(" "), got, secs(run.elapsed)));
    }
    (ok, notes.join(", "))
}

fn criterion_2(r: &mut Runner) -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for p in ["2", "3", "5"] {
        let run = r.run(&["cb", "heights", "--tower", &format!("pro_p:{p}"), "--depth", "6"]);
        let entries = run.result["entries"].as_array().cloned().unwrap_or_default();
        // Subgroups of Z/p^6: the chain p^0, ..., p^5 and the zero subgroup.
        let mut zero = 0;
        let mut proper = 0;
        for e in &entries {
            let h = e["height"]["exact"].as_u64();
            if e["point"]["label"] == "0" {
                zero += 1;
                ok &= h == Some(1);
            } else {
                proper += 1;
                ok &= h == Some(0);
            }
        }
        ok &= run.ok && zero == 1 && proper == 6;
        notes.push(format!("p={p}: {proper} threads at 0, zero thread at 1"));
    }
    (ok, notes.join("; "))
}

const FINITE: [&str; 5] = ["cyclic:2", "cyclic:3", "cyclic:4", "prod:cyclic:2,cyclic:2", "sym:3"];

fn criterion_3(r: &mut Runner) -> (bool, String) {
    let mut ok = true;
    let mut total = Duration::ZERO;
    let mut pairs = 0;
    for g in FINITE {
        let audit = r.run(&["mackey", "audit", "--group", g]);
        let setup = format!("finite:{g}");
        let cert = r.run(&["homdim", "certify", "--setup", &setup, "--verify"]);
        total += audit.elapsed + cert.elapsed;
        pairs += audit.result["ext1"]["pairs"].as_u64().unwrap_or(0);
        ok &= audit.ok && len(&audit.result["ext1"]["nonzero_ext1"]) == 0;
        ok &= cert.ok && cert.result["verdict"] == serde_json::json!({"kind": "exact", "value": 0});
        ok &= cert.result["verify"]["passed"] == true;
    }
    ok &= secs(total) < FINITE_LIMIT;
    (ok, format!("{pairs} Ext^1 pairs all zero, 5 certificates Exact(0), {:.2}s", secs(total)))
}

fn criterion_4(r: &mut Runner) -> (bool, String) {
    let cert = r.run(&["homdim", "certify", "--setup", "spzp-weyl", "--verify"]);
    let res = r.run(&["sheaf", "godement", "--base", "spzp", "--sheaf", "const:Q", "--stages", "3", "--verify"]);
    let ext = r.run(&["sheaf", "extension", "--base", "spzp", "--quotient", "sky:omega", "--sub", "const:Q", "--verify"]);
    let stages = res.result["summary"]["stages"].as_array().cloned().unwrap_or_default();
    // A terminated resolution stops at its last nonzero stage, so I^2 is
    // either absent or listed with zero stalks.
    let i2_zero = res.result["summary"]["terminated"] == true
        && stages.len() >= 2
        && stages[2..].iter().all(|s| s["stalk_dims"].as_array().is_some_and(|d| d.iter().all(|x| x["dim"] == 0)));
    let length = res.result["summary"]["length"].as_u64();
    let ok = cert.ok
        && cert.result["verdict"] == serde_json::json!({"kind": "exact", "value": 1})
        && cert.result["verify"]["passed"] == true
        && res.ok
        && length == Some(1)
        && i2_zero
        && res.result["verify"]["passed"] == true
        && ext.ok
        && ext.result["summary"]["exact"] == true
        && ext.result["summary"]["splits"] == false
        && ext.result["verify"]["passed"] == true
        && secs(cert.elapsed) < ZP_LIMIT;
    (ok, format!("Exact(1), length {length:?}, I^2 = 0: {i2_zero}, extension non-split, {:.2}s", secs(cert.elapsed)))
}

fn criterion_5(r: &mut Runner) -> (bool, String) {
    let count = (MIN_RANDOM_SHEAVES + 4).to_string();
    let run = r.run(&["sheaf", "vanishing", "--count", &count, "--stages", "4"]);
    let bases = run.result["bases"].as_array().cloned().unwrap_or_default();
    let rank_ok = !bases.is_empty() && bases.iter().all(|b| b[1]["exact"].as_u64().is_some_and(|n| n <= 2));
    let sheaves = run.result["sheaves"].as_u64().unwrap_or(0) as usize;
    let violations = len(&run.result["violations"]);
    let ok = run.ok && rank_ok && sheaves >= MIN_RANDOM_SHEAVES && violations == 0;
    let checked = &run.result["stalks_checked"];
    (ok, format!("{sheaves} sheaves on {} bases of rank <= 2, {checked} stalks, {violations} violations", bases.len()))
}

fn criterion_6(r: &mut Runner) -> (bool, String) {
    let mut ok = true;
    let n = ASSOC_TRIPLES.to_string();
    for g in ["cyclic:2", "cyclic:3", "sym:3"] {
        let run = r.run(&["burnside", "assoc", "--group", g, "--count", &n]);
        ok &= run.ok && run.result["triples"] == ASSOC_TRIPLES && len(&run.result["failures"]) == 0;
    }
    for g in FINITE.iter().chain(&["dihedral:8"]) {
        let run = r.run(&["burnside", "marks", "--group", g]);
        ok &= run.ok && run.result["invertible"] == true;
    }
    let ring = r.run(&["burnside", "ring", "--group", "cyclic:2"]);
    let classes = ring.result["classes"].as_array().cloned().unwrap_or_default();
    let free = classes.iter().position(|c| len(c) == 1);
    let relation = free.is_some_and(|e| {
        let sq = &ring.result["structure"][e][e];
        (0..classes.len()).all(|k| sq[k] == if k == e { 2 } else { 0 })
    });
    ok &= ring.ok && relation;
    (ok, format!("3 x {ASSOC_TRIPLES} triples associative, marks invertible, [C2/e]^2 = 2[C2/e]: {relation}"))
}

fn criterion_7(r: &mut Runner) -> (bool, String) {
    let run = r.run(&["span", "colimit", "--tower", "pro_p:2", "--level", "3"]);
    let levels = run.result["levels"].as_array().cloned().unwrap_or_default();
    let all = levels.len() == 4
        && levels.iter().all(|l| l["classes"].as_u64().is_some_and(|c| c > 0 && l["witnessed"] == c && l["round_trips"] == c));
    let counts: Vec<String> = levels.iter().map(|l| l["classes"].to_string()).collect();
    (run.ok && all, format!("span classes per level {}", counts.join("/")))
}

fn criterion_8(r: &mut Runner) -> (bool, String) {
    let audit = r.run(&["mackey", "audit", "--group", "sym:3"]);
    let phi = r.run(&["mackey", "phi", "--group", "sym:3", "--count", &PHI_SEQUENCES.to_string()]);
    let ex = &phi.result["exactness"];
    let ok = audit.ok
        && len(&audit.result["yoneda"]["mismatches"]) == 0
        && audit.result["yoneda"]["pairs"] == 16
        && phi.ok
        && len(&phi.result["hom"]["mismatches"]) == 0
        && ex["sequences"] == PHI_SEQUENCES
        && ex["exact_before"] == PHI_SEQUENCES
        && ex["exact_after"] == PHI_SEQUENCES;
    (
        ok,
        format!(
            "Yoneda {} pairs, Phi hom {} pairs, {} of {} sequences exact after Phi",
            audit.result["yoneda"]["pairs"], phi.result["hom"]["pairs"], ex["exact_after"], PHI_SEQUENCES
        ),
    )
}

fn main() -> ExitCode {
    // libtest-style flags from `cargo test` are ignored.
    let mut r = Runner { determinism: vec![] };
    type Check = fn(&mut Runner) -> (bool, String);
    let checks: [(&str, Check); 8] = [
        ("1 CB rank of pro-p, trivial and empty", criterion_1),
        ("2 heights in S(Z_p)", criterion_2),
        ("3 finite groups have dimension 0", criterion_3),
        ("4 Z_p has dimension 1", criterion_4),
        ("5 stalk vanishing below height", criterion_5),
        ("6 Burnside algebra", criterion_6),
        ("7 colimit witnesses at pro-2 levels <= 3", criterion_7),
        ("8 Yoneda and Phi audits over S3", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        let (ok, detail) = f(&mut r);
        failed += usize::from(!ok);
        println!("criterion {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    }
    let diverged: Vec<&String> = r.determinism.iter().filter(|d| !d.1).map(|d| &d.0).collect();
    let ok = diverged.is_empty();
    failed += usize::from(!ok);
    println!(
        "criterion 9 byte-identical JSON at 1 and {MANY_THREADS} threads: {} ({} commands, {} differ{})",
        if ok { "PASS" } else { "FAIL" },
        r.determinism.len(),
        diverged.len(),
        if ok { String::new() } else { format!(": {diverged:?}") }
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
