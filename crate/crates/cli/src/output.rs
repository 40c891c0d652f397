use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Tsv,
    Pretty,
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// What a command produced. `data` is the JSON payload; `lines` and `table`
/// are the human-readable view.
#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub data: Value,
    pub lines: Vec<String>,
    pub table: Option<Table>,
    /// set when `--verify` ran
    pub verified: Option<bool>,
}

impl Report {
    pub fn new(command: &str, data: Value) -> Self {
        Report { command: command.to_string(), data, lines: vec![], table: None, verified: None }
    }

    pub fn line(mut self, s: impl Into<String>) -> Self {
        self.lines.push(s.into());
        self
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }

    /// Records re-verification results under `"verify"`.
    pub fn with_verification(mut self, checks: Vec<(String, bool, String)>) -> Self {
        let ok = checks.iter().all(|c| c.1);
        let items: Vec<Value> =
            checks.iter().map(|(c, p, d)| json!({"check": c, "passed": p, "detail": d})).collect();
        if let Value::Object(m) = &mut self.data {
            m.insert("verify".into(), json!({"passed": ok, "checks": items}));
        }
        for (c, p, d) in &checks {
            self.lines.push(format!("verify {c}: {} {d}", if *p { "ok" } else { "FAILED" }));
        }
        self.verified = Some(ok);
        self
    }

    pub fn render(&self, f: Format) -> String {
        match f {
            Format::Json => {
                let v = json!({"schema": 1, "command": self.command, "result": self.data});
                format!("{}\n", serde_json::to_string(&v).expect("json values serialize"))
            }
            Format::Tsv => match &self.table {
                Some(t) => {
                    let mut out = format!("#{}\n", t.header.join("\t"));
                    for r in &t.rows {
                        out.push_str(&r.join("\t"));
                        out.push('\n');
                    }
                    out
                }
                None => flat_tsv(&self.data),
            },
            Format::Pretty => {
                let mut out = String::new();
                for l in &self.lines {
                    out.push_str(l);
                    out.push('\n');
                }
                if let Some(t) = &self.table {
                    out.push_str(&aligned(t));
                }
                out
            }
        }
    }
}

fn flat_tsv(v: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(m) = v {
        for (k, x) in m {
            let s = match x {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k}\t{s}\n"));
        }
    } else {
        out.push_str(&format!("{v}\n"));
    }
    out
}

fn aligned(t: &Table) -> String {
    let n = t.header.len();
    let mut w: Vec<usize> = t.header.iter().map(|h| h.chars().count()).collect();
    for r in &t.rows {
        for (i, c) in r.iter().enumerate().take(n) {
            w[i] = w[i].max(c.chars().count());
        }
    }
    let fmt_row = |r: &[String]| {
        let cells: Vec<String> = r.iter().enumerate().map(|(i, c)| format!("{c:>width$}", width = w[i.min(n - 1)])).collect();
        format!("{}\n", cells.join("  ").trim_end())
    };
    let mut out = fmt_row(&t.header);
    for r in &t.rows {
        out.push_str(&fmt_row(r));
    }
    out
}
