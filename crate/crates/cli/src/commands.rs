use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use serde_json::{json, Value};

use profinite_core::burnside::{associativity_audit, colimit_audit, span_compose, BurnsideContext, Span};
use profinite_core::cb::{cb_rank, heights, verify_rank_certificate, Height, RankCertificate, SpaceTree, Verdict};
use profinite_core::group::{core, weyl_group, FiniteGroup, SubgroupLattice};
use profinite_core::homdim::{
    ext_sheaf, homdim_certificate, mackey_battery, mackey_ext1_audit, nonsplit_extension, parity_witness,
    phi_exactness_audit, phi_hom_audit, verify_certificate, Extension, HomDimSetup,
};
use profinite_core::mackey::{ext, hom_space, named_functor, projective_resolution, yoneda_audit, MackeyFunctorQ};
use profinite_core::sheaf::{
    constant_q, godement_resolution, hom_sheaf, random_sheaf, skyscraper_q, vanishing_audit, weyl_check, EqSheaf,
    GodementResolution, SheafBase, Site,
};
use profinite_core::tower::{stability_oracle, subgroup_space, GroupTower, SubgroupPoint};
use profinite_core::Error;

use crate::output::{Report, Table};
use crate::{BurnsideCmd, CbCmd, Cli, Command, GroupCmd, HomdimCmd, MackeyCmd, SheafCmd, SpaceArgs, SpanCmd, TowerCmd};

/// A usage problem in the arguments or input files (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() || e.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Capacity { .. } | Error::DepthExhausted { .. } | Error::ResolutionTooShort { .. }) => 3,
        Some(Error::Parse(_) | Error::UnknownFamily(_) | Error::InvalidGroup(_) | Error::InvalidGSet(_)) => 2,
        Some(Error::NotSubgroup(_) | Error::InvalidSheaf(_) | Error::MiddleMismatch) => 2,
        _ => 1,
    }
}

fn usage(s: impl Into<String>) -> anyhow::Error {
    Usage(s.into()).into()
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn to_value<T: serde::Serialize + ?Sized>(x: &T) -> Value {
    serde_json::to_value(x).expect("report data serializes")
}

pub fn run(cli: &Cli) -> Result<Report> {
    let g = &cli.global;
    match &cli.command {
        Command::Group(GroupCmd::Info { group }) => group_info(group),
        Command::Tower(c) => tower(c),
        Command::Cb(CbCmd::Rank(a)) => cb_rank_cmd(a, g.verify),
        Command::Cb(CbCmd::Heights(a)) => cb_heights(a),
        Command::Burnside(c) => burnside(c, g.seed),
        Command::Span(c) => span(c, g.verify),
        Command::Mackey(c) => mackey(c, g.seed),
        Command::Sheaf(c) => sheaf(c, g.seed, g.verify),
        Command::Homdim(c) => homdim(c, g.seed, g.verify),
    }
}

fn elements(s: &profinite_core::group::Subgroup) -> String {
    let e: Vec<String> = s.elements().iter().map(usize::to_string).collect();
    format!("{{{}}}", e.join(","))
}

fn group_info(sel: &str) -> Result<Report> {
    let g = FiniteGroup::from_selector(sel)?;
    let lat = SubgroupLattice::new(&g)?;
    let subgroups: Vec<Value> = (0..lat.len())
        .map(|i| {
            let s = lat.subgroup(i);
            json!({"index": i, "order": s.order(), "elements": s.elements(), "class": lat.class_of(i)})
        })
        .collect();
    let mut table = Table::new(&["class", "order", "members", "normalizer", "core", "weyl", "representative"]);
    let classes: Vec<Value> = (0..lat.num_classes())
        .map(|c| {
            let k = lat.rep_subgroup(c);
            let w = weyl_group(&g, k);
            let co = core(&g, k);
            table.push(vec![
                format!("K{c}"),
                k.order().to_string(),
                lat.class_members(c).len().to_string(),
                w.normalizer.order().to_string(),
                elements(&co),
                w.group.order().to_string(),
                elements(k),
            ]);
            json!({
                "class": c,
                "representative": lat.rep(c),
                "order": k.order(),
                "members": lat.class_members(c),
                "normal": lat.class_members(c).len() == 1,
                "normalizer": w.normalizer.elements(),
                "core": co.elements(),
                "weyl_order": w.group.order(),
            })
        })
        .collect();
    let data = json!({
        "group": g.label(),
        "order": g.order(),
        "abelian": g.is_abelian(),
        "subgroups": subgroups,
        "classes": classes,
    });
    Ok(Report::new("group info", data)
        .line(format!("{} of order {}{}", g.label(), g.order(), if g.order() == 1 { " (trivial)" } else { "" }))
        .line(format!("{} subgroups in {} conjugacy classes", lat.len(), lat.num_classes()))
        .with_table(table))
}

fn tower(c: &TowerCmd) -> Result<Report> {
    match c {
        TowerCmd::Info(a) => {
            let t = GroupTower::builtin(&a.tower, a.depth)?;
            let space = subgroup_space(&t)?;
            let mut table = Table::new(&["level", "group", "order", "subgroups"]);
            for (k, l) in space.lattices.iter().enumerate() {
                table.push(vec![k.to_string(), t.level(k).label().into(), t.level(k).order().to_string(), l.len().to_string()]);
            }
            let data = json!({
                "tower": t.family().to_string(),
                "depth": t.depth(),
                "chain": t.chain(),
                "orders": t.level_orders(),
                "subgroups": space.tree.sizes(),
            });
            Ok(Report::new("tower info", data).line(format!("chain {}", t.chain())).with_table(table))
        }
        TowerCmd::Stability { tower, level, index } => {
            let t = GroupTower::builtin(&tower.tower, tower.depth)?;
            let space = subgroup_space(&t)?;
            let lat = space.lattices.get(*level).ok_or_else(|| usage(format!("level {level} beyond depth {}", t.depth())))?;
            if *index >= lat.len() {
                bail!(usage(format!("level {level} has {} subgroups", lat.len())));
            }
            let h = lat.subgroup(*index).clone();
            let st = stability_oracle(&t, &SubgroupPoint { level: *level, subgroup: h.clone() })?;
            let data = json!({"level": level, "index": index, "subgroup": h.elements(), "stability": st});
            Ok(Report::new("tower stability", data).line(format!("level {level} subgroup {}: {st:?}", elements(&h))))
        }
    }
}

fn space(a: &SpaceArgs) -> Result<SpaceTree> {
    if a.empty {
        return Ok(SpaceTree::empty());
    }
    if let Some(n) = a.discrete {
        return Ok(SpaceTree::discrete(n, a.depth));
    }
    if let Some(p) = &a.tree {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        return Ok(SpaceTree::from_json(&text)?);
    }
    let fam = a.tower.as_deref().ok_or_else(|| usage("give --tower, --tree, --discrete or --empty"))?;
    Ok(subgroup_space(&GroupTower::builtin(fam, a.depth)?)?.tree)
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Exact(n) => format!("Exact({n})"),
        Verdict::Interval { lo, hi: Some(h) } => format!("Interval[{lo}, {h}]"),
        Verdict::Interval { lo, hi: None } => format!("Interval[{lo}, ?]"),
        Verdict::PerfectHullDetected { rank } => format!("PerfectHullDetected(after {rank})"),
    }
}

fn cb_rank_cmd(a: &SpaceArgs, verify: bool) -> Result<Report> {
    let tree = space(a)?;
    let cert = cb_rank(&tree)?;
    let mut table = Table::new(&["stage", "remaining", "removed", "shrinking", "undecided"]);
    for r in &cert.trace {
        table.push(vec![
            r.stage.to_string(),
            r.remaining.to_string(),
            r.removed.len().to_string(),
            r.shrinking.len().to_string(),
            r.undecided.len().to_string(),
        ]);
    }
    let mut report = Report::new("cb rank", to_value(&cert))
        .line(format!("chain {} (depth {})", cert.chain, cert.depth))
        .line(format!("rank {}", verdict_text(&cert.verdict)))
        .with_table(table);
    if verify {
        let text = serde_json::to_string(&cert)?;
        let back: RankCertificate = serde_json::from_str(&text)?;
        let problems = verify_rank_certificate(&back);
        let detail = if problems.is_empty() { "consistent".to_string() } else { problems.join("; ") };
        report = report.with_verification(vec![("rank certificate".into(), problems.is_empty(), detail)]);
    }
    Ok(report)
}

fn cb_heights(a: &SpaceArgs) -> Result<Report> {
    let tree = space(a)?;
    let h = heights(&tree)?;
    let mut table = Table::new(&["node", "label", "height"]);
    for e in &h.entries {
        let ht = match &e.height {
            Height::Exact(n) => n.to_string(),
            Height::Undecided { retained_through } => format!("undecided (kept through stage {retained_through})"),
            Height::Hull => "perfect".into(),
        };
        table.push(vec![e.point.index.to_string(), e.point.label.clone().unwrap_or_default(), ht]);
    }
    Ok(Report::new("cb heights", to_value(&h)).line(format!("rank {}", verdict_text(&h.verdict))).with_table(table))
}

fn context(sel: &str) -> Result<Arc<BurnsideContext>> {
    Ok(Arc::new(BurnsideContext::new(&FiniteGroup::from_selector(sel)?)?))
}

fn check_class(ctx: &BurnsideContext, i: usize) -> Result<()> {
    if i >= ctx.num_classes() {
        bail!(usage(format!("{} has {} subgroup classes", ctx.group().label(), ctx.num_classes())));
    }
    Ok(())
}

fn burnside(c: &BurnsideCmd, seed: u64) -> Result<Report> {
    match c {
        BurnsideCmd::Marks { group } => {
            let ctx = context(group)?;
            let ring = ctx.burnside_ring();
            let n = ring.classes.len();
            let mut header = vec!["set".to_string()];
            header.extend((0..n).map(|k| format!("K{k}")));
            let mut table = Table { header, rows: vec![] };
            for (r, &i) in ring.row_classes.iter().enumerate() {
                let mut row = vec![format!("G/K{i}")];
                row.extend(ring.marks[r].iter().map(i64::to_string));
                table.push(row);
            }
            let invertible = ring.marks_matrix().inverse().is_some();
            let data = json!({
                "group": ring.group,
                "classes": ring.classes,
                "row_classes": ring.row_classes,
                "marks": ring.marks,
                "invertible": invertible,
            });
            Ok(Report::new("burnside marks", data)
                .line(format!("table of marks of {} (rows G/K by size, columns K)", ring.group))
                .with_table(table))
        }
        BurnsideCmd::Ring { group } => {
            let ctx = context(group)?;
            let ring = ctx.burnside_ring();
            let mut table = Table::new(&["i", "j", "product"]);
            let n = ring.classes.len();
            for i in 0..n {
                for j in i..n {
                    let terms: Vec<String> = (0..n)
                        .filter(|&k| ring.structure[i][j][k] != 0)
                        .map(|k| format!("{}[G/K{k}]", ring.structure[i][j][k]))
                        .collect();
                    table.push(vec![format!("G/K{i}"), format!("G/K{j}"), terms.join(" + ")]);
                }
            }
            Ok(Report::new("burnside ring", to_value(&ring)).line(format!("Burnside ring of {}", ring.group)).with_table(table))
        }
        BurnsideCmd::Hom { group, from, to } => {
            let ctx = context(group)?;
            check_class(&ctx, *from)?;
            check_class(&ctx, *to)?;
            let basis = ctx.transitive_hom_basis(*from, *to);
            let mut table = Table::new(&["apex", "left", "right"]);
            for k in basis {
                table.push(vec![format!("G/K{}", k.class), k.left.to_string(), k.right.to_string()]);
            }
            let data = json!({"group": ctx.group().label(), "from": from, "to": to, "basis": basis});
            Ok(Report::new("burnside hom", data)
                .line(format!("{} span classes G/K{from} -> G/K{to}", basis.len()))
                .with_table(table))
        }
        BurnsideCmd::Assoc { group, count } => {
            let ctx = context(group)?;
            let a = associativity_audit(&ctx, seed, *count)?;
            let line = format!("{}: {} triples, {} failures", a.group, a.triples, a.failures.len());
            Ok(Report::new("burnside assoc", to_value(&a)).line(line))
        }
    }
}

fn span_pair(path: &Path) -> Result<(Arc<BurnsideContext>, Span, Span)> {
    let v = read_json(path)?;
    let sel = v.get("group").and_then(Value::as_str).ok_or_else(|| usage("span file needs \"group\""))?;
    let ctx = context(sel)?;
    let get = |k: &str| -> Result<Span> {
        let x = v.get(k).ok_or_else(|| usage(format!("span file needs \"{k}\"")))?;
        Ok(Span::from_json(ctx.group(), x)?)
    };
    let (a, b) = (get("first")?, get("second")?);
    Ok((ctx, a, b))
}

fn span(c: &SpanCmd, verify: bool) -> Result<Report> {
    match c {
        SpanCmd::Compose { file } => {
            let (ctx, first, second) = span_pair(file)?;
            let s = span_compose(&first, &second)?;
            let canon = ctx.canonical(&s);
            let data = json!({"group": ctx.group().label(), "span": s.to_json(), "canonical": canon});
            let mut report = Report::new("span compose", data)
                .line(format!("apex of size {}, {} transitive pieces", s.apex.size(), canon.0.len()));
            for k in &canon.0 {
                report = report.line(format!("  G/K{} at ({}, {})", k.class, k.left, k.right));
            }
            if verify {
                let back = Span::from_json(ctx.group(), &serde_json::from_str(&s.to_json().to_string())?)?;
                let via = ctx.compose_homs(&ctx.hom(&first), &ctx.hom(&second))?;
                let ok = ctx.canonical(&back) == canon && ctx.hom(&back) == via;
                report = report.with_verification(vec![("composite".into(), ok, "matches the composite in the span category".into())]);
            }
            Ok(report)
        }
        SpanCmd::Equivalent { file } => {
            let (ctx, first, second) = span_pair(file)?;
            let eq = ctx.span_equivalent(&first, &second);
            let data = json!({"equivalent": eq, "first": ctx.canonical(&first), "second": ctx.canonical(&second)});
            Ok(Report::new("span equivalent", data).line(format!("equivalent: {eq}")))
        }
        SpanCmd::Basis { group, from, to } => {
            let ctx = context(group)?;
            check_class(&ctx, *from)?;
            check_class(&ctx, *to)?;
            let (a, b) = (ctx.transitive(*from), ctx.transitive(*to));
            let spans: Vec<Value> =
                ctx.transitive_hom_basis(*from, *to).iter().map(|k| ctx.span_of_class(k, a, b).to_json()).collect();
            let n = spans.len();
            Ok(Report::new("span basis", json!({"group": group, "spans": spans})).line(format!("{n} basis spans")))
        }
        SpanCmd::Colimit { tower, level } => {
            let t = GroupTower::builtin(tower, *level)?;
            let levels = colimit_audit(&t, *level)?;
            let mut table = Table::new(&["level", "classes", "witnessed", "round_trips", "first_seen"]);
            for l in &levels {
                let fs: Vec<String> = l.first_seen.iter().map(usize::to_string).collect();
                table.push(vec![
                    l.level.to_string(),
                    l.classes.to_string(),
                    l.witnessed.to_string(),
                    l.round_trips.to_string(),
                    fs.join(","),
                ]);
            }
            Ok(Report::new("span colimit", json!({"tower": t.chain(), "levels": levels})).with_table(table))
        }
    }
}

fn functor(ctx: &Arc<BurnsideContext>, name: &str) -> Result<MackeyFunctorQ> {
    named_functor(ctx, name).map_err(|e| usage(e.to_string()))
}

fn mackey(c: &MackeyCmd, seed: u64) -> Result<Report> {
    match c {
        MackeyCmd::Ext { pair, degree } => {
            let ctx = context(&pair.group)?;
            let (m, n) = (functor(&ctx, &pair.m)?, functor(&ctx, &pair.n)?);
            let d = ext(&m, &n, *degree);
            let data = json!({"group": ctx.group().label(), "M": pair.m, "N": pair.n, "degree": degree, "dimension": d});
            Ok(Report::new("mackey ext", data).line(format!("dim Ext^{degree}({}, {}) = {d}", pair.m, pair.n)))
        }
        MackeyCmd::Hom { pair } => {
            let ctx = context(&pair.group)?;
            let (m, n) = (functor(&ctx, &pair.m)?, functor(&ctx, &pair.n)?);
            let d = hom_space(&m, &n).len();
            let data = json!({"group": ctx.group().label(), "M": pair.m, "N": pair.n, "dimension": d});
            Ok(Report::new("mackey hom", data).line(format!("dim Hom({}, {}) = {d}", pair.m, pair.n)))
        }
        MackeyCmd::Show { group, m } => {
            let ctx = context(group)?;
            let f = functor(&ctx, m)?;
            let mut table = Table::new(&["class", "order", "dim"]);
            for (c, d) in f.dims().iter().enumerate() {
                table.push(vec![format!("K{c}"), ctx.lattice().rep_subgroup(c).order().to_string(), d.to_string()]);
            }
            Ok(Report::new("mackey show", f.to_json()).line(format!("{m} over {}", ctx.group().label())).with_table(table))
        }
        MackeyCmd::Resolve { group, m, length } => {
            let ctx = context(group)?;
            let f = functor(&ctx, m)?;
            let r = projective_resolution(&f, *length);
            let mut table = Table::new(&["stage", "generators"]);
            for (p, gens) in r.stages.iter().enumerate() {
                let g: Vec<String> = gens.iter().map(|x| format!("Rep(G/K{})", x.class)).collect();
                table.push(vec![p.to_string(), g.join(" + ")]);
            }
            let line = match r.length() {
                Some(l) => format!("resolution of {m} has length {l}"),
                None => format!("resolution of {m} not finished after {} stages", r.stages.len()),
            };
            Ok(Report::new("mackey resolve", to_value(&r)).line(line).with_table(table))
        }
        MackeyCmd::Audit { group } => {
            let ctx = context(group)?;
            let e = mackey_ext1_audit(&ctx)?;
            let y = yoneda_audit(&ctx);
            let data = json!({"ext1": e, "yoneda": y});
            Ok(Report::new("mackey audit", data)
                .line(format!("Ext^1: {} pairs, {} nonzero", e.pairs, e.nonzero_ext1.len()))
                .line(format!("Yoneda: {} pairs, {} mismatches", y.pairs, y.mismatches.len())))
        }
        MackeyCmd::Phi { group, count } => {
            let ctx = context(group)?;
            let battery = mackey_battery(&ctx)?;
            let homs = phi_hom_audit(&battery)?;
            let exact = phi_exactness_audit(&battery, seed, *count)?;
            let data = json!({"hom": homs, "exactness": exact});
            Ok(Report::new("mackey phi", data)
                .line(format!("hom dimensions: {} pairs, {} mismatches", homs.pairs, homs.mismatches.len()))
                .line(format!(
                    "exactness: {} sequences, {} exact before, {} exact after, {} nontrivial",
                    exact.sequences, exact.exact_before, exact.exact_after, exact.nontrivial
                )))
        }
    }
}

fn base(desc: &str) -> Result<SheafBase> {
    SheafBase::from_descriptor(desc).map_err(|e| usage(e.to_string()))
}

fn sheaf_spec(b: &SheafBase, spec: &str) -> Result<EqSheaf> {
    if spec == "const:Q" || spec == "constQ" {
        return Ok(constant_q(b));
    }
    if let Some(site) = spec.strip_prefix("sky:") {
        let site = Site::parse(site).map_err(|e| usage(e.to_string()))?;
        return Ok(skyscraper_q(b, site)?);
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|_| usage(format!("bad seed in '{spec}'")))?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        return Ok(random_sheaf(b, &mut rng, 2)?.with_label(spec));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let e = EqSheaf::from_json(&read_json(Path::new(path))?)?;
        if e.base().descriptor() != b.descriptor() {
            bail!(usage(format!("sheaf in {path} lives on {}, not {}", e.base().descriptor(), b.descriptor())));
        }
        return Ok(e);
    }
    Err(usage(format!("unknown sheaf '{spec}' (const:Q, sky:SITE, random:SEED, file:PATH)")))
}

fn dims_table(res: &GodementResolution) -> Table {
    let (h, m) = res.shape();
    let stages: Vec<EqSheaf> = res.stages.iter().map(|s| s.reshape(h, m).expect("stages share a refinement")).collect();
    let mut header = vec!["site".to_string()];
    header.extend((0..stages.len()).map(|n| format!("I{n}")));
    let mut t = Table { header, rows: vec![] };
    if let Some(first) = stages.first() {
        for site in first.all_sites() {
            let mut row = vec![site.to_string()];
            row.extend(stages.iter().map(|s| s.stalk(site).dim.to_string()));
            t.push(row);
        }
    }
    t
}

fn resolution_checks(res: &GodementResolution) -> Result<Vec<(String, bool, String)>> {
    let back = GodementResolution::from_json(&serde_json::from_str(&res.to_json().to_string())?)?;
    let v = back.verify();
    let same = back.to_json() == res.to_json();
    Ok(vec![
        ("reload".into(), same, "resolution JSON reloads unchanged".into()),
        ("exactness".into(), v.is_ok(), v.err().map_or("differentials compose to zero and are exact".into(), |e| e.to_string())),
    ])
}

fn extension_checks(x: &Extension) -> Result<Vec<(String, bool, String)>> {
    let back = Extension::from_json(&serde_json::from_str(&x.to_json().to_string())?)?;
    Ok(vec![
        ("exact".into(), back.exact, "0 -> sub -> middle -> quotient -> 0 stalkwise exact".into()),
        ("non-split".into(), !back.splits, format!("{} x {} splitting system", back.splitting_equations, back.splitting_unknowns)),
    ])
}

fn sheaf(c: &SheafCmd, seed: u64, verify: bool) -> Result<Report> {
    match c {
        SheafCmd::Godement { base: b, sheaf: s, stages } => {
            let b = base(b)?;
            let e = sheaf_spec(&b, s)?;
            let res = godement_resolution(&e, *stages)?;
            let line = match res.length() {
                Some(l) => format!("Godement resolution of {} has length {l}", e.label()),
                None => format!("Godement resolution of {} not finished after {} stages", e.label(), res.stages.len()),
            };
            let data = json!({"summary": res.summary(), "resolution": res.to_json()});
            let mut report = Report::new("sheaf godement", data).line(line).with_table(dims_table(&res));
            if verify {
                report = report.with_verification(resolution_checks(&res)?);
            }
            Ok(report)
        }
        SheafCmd::Ext { base: b, e, f, degree } => {
            let b = base(b)?;
            let (e, f) = (sheaf_spec(&b, e)?, sheaf_spec(&b, f)?);
            let r = ext_sheaf(&e, &f, *degree)?;
            let line = format!("Ext^{degree}({}, {}) = {:?} (class dimension {})", e.label(), f.label(), r.value, r.class_dimension);
            Ok(Report::new("sheaf ext", to_value(&r)).line(line))
        }
        SheafCmd::Hom { base: b, e, f } => {
            let b = base(b)?;
            let (e, f) = (sheaf_spec(&b, e)?, sheaf_spec(&b, f)?);
            let d = hom_sheaf(&e, &f)?.dim();
            let data = json!({"E": e.label(), "F": f.label(), "dimension": d});
            Ok(Report::new("sheaf hom", data).line(format!("dim Hom({}, {}) = {d}", e.label(), f.label())))
        }
        SheafCmd::Weyl { base: b, sheaf: s } => {
            let b = base(b)?;
            let e = sheaf_spec(&b, s)?;
            let w = weyl_check(&e);
            Ok(Report::new("sheaf weyl", to_value(&w)).line(format!("Weyl condition for {}: {}", e.label(), w.holds)))
        }
        SheafCmd::Parity { base: b, sheaf: s } => {
            let b = base(b)?;
            let e = sheaf_spec(&b, s)?;
            let w = parity_witness(&e, Site::Limit, 0)?;
            let line = match &w {
                Some(w) => format!("{} witness of period {} at {}", w.parity, w.period, w.site),
                None => "no parity witness".into(),
            };
            Ok(Report::new("sheaf parity", json!({"witness": w})).line(line))
        }
        SheafCmd::Extension { base: b, quotient, sub } => {
            let b = base(b)?;
            let (q, s) = (sheaf_spec(&b, quotient)?, sheaf_spec(&b, sub)?);
            let Some(x) = nonsplit_extension(&q, &s)? else {
                return Ok(Report::new("sheaf extension", json!({"extension": null})).line("no non-split extension found"));
            };
            let data = json!({"summary": x.summary(), "extension": x.to_json()});
            let line = format!("extension of {} by {}: exact {}, splits {}", q.label(), s.label(), x.exact, x.splits);
            let mut report = Report::new("sheaf extension", data).line(line);
            if verify {
                report = report.with_verification(extension_checks(&x)?);
            }
            Ok(report)
        }
        SheafCmd::Vanishing { bases, count, stages } => {
            let bs: Vec<SheafBase> = bases.split(',').map(|d| base(d.trim())).collect::<Result<_>>()?;
            let a = vanishing_audit(&bs, seed, *count, *stages)?;
            let line = format!(
                "{} sheaves, {} stalks checked, max length {}, {} violations",
                a.sheaves,
                a.stalks_checked,
                a.max_length,
                a.violations.len()
            );
            Ok(Report::new("sheaf vanishing", to_value(&a)).line(line))
        }
        SheafCmd::Verify { file } => {
            let v = read_json(file)?;
            let v = v.pointer("/result/resolution").or_else(|| v.pointer("/result/extension")).cloned().unwrap_or(v);
            let checks = if v.get("stages").is_some() {
                resolution_checks(&GodementResolution::from_json(&v)?)?
            } else if v.get("middle").is_some() {
                extension_checks(&Extension::from_json(&v)?)?
            } else {
                bail!(usage("expected a resolution or an extension"));
            };
            Ok(Report::new("sheaf verify", json!({})).with_verification(checks))
        }
    }
}

fn homdim(c: &HomdimCmd, seed: u64, verify: bool) -> Result<Report> {
    match c {
        HomdimCmd::Certify { setup } => {
            let s = HomDimSetup::parse(setup).map_err(|e| usage(e.to_string()))?;
            let cert = homdim_certificate(&s, seed)?;
            let mut report = Report::new("homdim certify", to_value(&cert))
                .line(format!("setup {}", cert.setup))
                .line(format!("CB rank {}", verdict_text(&cert.cb_rank)))
                .line(format!("bounds [{}, {}]", cert.lower, cert.upper.map_or("?".into(), |u| u.to_string())))
                .line(format!("verdict {}", serde_json::to_string(&cert.verdict)?));
            for a in &cert.audits {
                report = report.line(format!("  {}: {} {}", a.check, if a.passed { "ok" } else { "FAILED" }, a.detail));
            }
            if verify {
                let text = serde_json::to_string(&cert)?;
                let lines = verify_certificate(&serde_json::from_str(&text)?)?;
                report = report.with_verification(lines.into_iter().map(|l| (l.check, l.passed, l.detail)).collect());
            }
            Ok(report)
        }
        HomdimCmd::Verify { file } => {
            let v = read_json(file)?;
            let cert = v.get("result").cloned().unwrap_or(v);
            let lines = verify_certificate(&cert)?;
            if lines.is_empty() {
                return Err(anyhow!(usage("nothing to verify")));
            }
            Ok(Report::new("homdim verify", json!({}))
                .with_verification(lines.into_iter().map(|l| (l.check, l.passed, l.detail)).collect()))
        }
    }
}
