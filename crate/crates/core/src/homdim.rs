//! Ext of equivariant sheaves, non-split extensions, homological dimension
//! certificates, and the passage from Mackey functors to Weyl sheaves.

use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::burnside::BurnsideContext;
use crate::cb::{cb_rank, SpaceTree, Verdict};
use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::linalg::{q, QMatrix, Q};
use crate::mackey::{
    ext_mackey, fixed_point, hom_space, image, kernel as mackey_kernel, projective_resolution, quotient,
    representable_transitive, cokernel as mackey_cokernel, MackeyFunctorQ, MackeyMorphism,
};
use crate::reps::rational_irreducibles;
use crate::sheaf::{
    constant_q, godement_i0, godement_resolution, hom_same_shape, kernel, left_inverse, random_sheaf,
    right_inverse, skyscraper_q, stalk_hom, stalk_vanishing_check, EqSheaf, GodementResolution, MapLayout,
    PerTail, SheafBase, SheafMap, Site, Stalk,
};
use crate::tower::{subgroup_space_tower, GroupTower};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ExtValue {
    Exact(usize),
    /// Positive in the periodic class and growing with the period.
    LowerBoundPositive,
    /// Zero in the periodic class, not stable under refinement.
    ZeroInClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtResult {
    pub degree: usize,
    pub value: ExtValue,
    pub class_dimension: usize,
    pub head: usize,
    pub period: usize,
    pub method: String,
}

/// Cochains `Hom(E, Iⁿ)` and their coboundaries, all presented with one shape.
struct HomComplex {
    dims: Vec<usize>,
    /// `d[n]: C^n -> C^{n+1}` in basis coordinates
    d: Vec<QMatrix>,
}

fn hom_complex(e: &EqSheaf, res: &GodementResolution, top: usize, h: usize, m: usize) -> Result<HomComplex> {
    let src = e.reshape(h, m)?;
    let stages: Vec<EqSheaf> =
        res.stages.iter().take(top + 1).map(|s| s.reshape(h, m)).collect::<Result<_>>()?;
    let homs: Vec<_> = stages.iter().map(|s| hom_same_shape(&src, s)).collect();
    let mut d = Vec::new();
    for n in 0..homs.len().saturating_sub(1) {
        let diff = res.differentials[n + 1].reshape(h, m);
        let (cur, next) = (&homs[n], &homs[n + 1]);
        let mut cols = Vec::with_capacity(cur.dim());
        for phi in cur.maps() {
            let psi = phi.then(&diff);
            let flat = next.layout.flatten(&psi);
            cols.push(next.basis.solve_vec(&flat).expect("composite is a sheaf map"));
        }
        d.push(QMatrix::from_columns(next.dim(), &cols));
    }
    Ok(HomComplex { dims: homs.iter().map(|x| x.dim()).collect(), d })
}

fn cohomology(c: &HomComplex, degree: usize) -> usize {
    let Some(&dim) = c.dims.get(degree) else { return 0 };
    let out = c.d.get(degree).map_or(0, QMatrix::rank);
    let inc = if degree == 0 { 0 } else { c.d.get(degree - 1).map_or(0, QMatrix::rank) };
    dim - out - inc
}

/// `Ext^degree(E, F)` from the Godement resolution of `F`.
///
/// Degrees past the resolution length are exactly zero. Otherwise the
/// complex `Hom(E, I•)` is computed with eventually periodic tail maps; the
/// result is exact when it does not change under a longer head and a doubled
/// period, and a positive lower bound when it grows.
pub fn ext_sheaf(e: &EqSheaf, f: &EqSheaf, degree: usize) -> Result<ExtResult> {
    let (coarse, h, m, len) = class_ext(e, f, degree)?;
    if let Some(len) = len.filter(|&l| degree > l) {
        return Ok(ExtResult {
            degree,
            value: ExtValue::Exact(0),
            class_dimension: 0,
            head: h,
            period: m,
            method: format!("resolution length {len}"),
        });
    }
    let finer = f.reshape(f.head_len() + 1, 2 * f.period())?;
    let (fine, ..) = class_ext(e, &finer, degree)?;
    let value = match (coarse == fine, coarse > 0) {
        (true, _) => ExtValue::Exact(coarse),
        (false, true) => ExtValue::LowerBoundPositive,
        (false, false) => ExtValue::ZeroInClass,
    };
    Ok(ExtResult {
        degree,
        value,
        class_dimension: coarse,
        head: h,
        period: m,
        method: "periodic tail class, compared under refinement".into(),
    })
}

/// Dimension in the periodic class, the shape used, and the resolution length.
fn class_ext(e: &EqSheaf, f: &EqSheaf, degree: usize) -> Result<(usize, usize, usize, Option<usize>)> {
    let res = godement_resolution(f, degree + 2)?;
    let (h0, m0) = res.shape();
    let h = h0.max(e.head_len());
    let m = m0.lcm_with(e.period());
    let len = res.length();
    if len.is_some_and(|l| degree > l) {
        return Ok((0, h, m, len));
    }
    if len.is_none() && res.stages.len() <= degree + 1 {
        return Err(Error::ResolutionUnavailable(format!("Godement resolution of {} did not terminate", f.label())));
    }
    let top = (degree + 1).min(res.stages.len() - 1);
    let general = cohomology(&hom_complex(e, &res, top, h, m)?, degree);
    if let Some(site) = skyscraper_site(e) {
        let reduced = cohomology(&stalk_fixed_complex(site, &res, top, h, m)?, degree);
        if reduced != general {
            return Err(Error::AxiomViolation(format!(
                "stalk-fixed-point complex at {site} gives {reduced}, Hom complex gives {general}"
            )));
        }
    }
    Ok((general, h, m, len))
}

/// The site of `E` when `E` is the skyscraper `Q` with trivial action there.
fn skyscraper_site(e: &EqSheaf) -> Option<Site> {
    let mut nonzero = e.all_sites().into_iter().filter(|&s| e.stalk(s).dim > 0);
    let site = nonzero.next()?;
    if nonzero.next().is_some() || matches!(site, Site::Pattern(_)) {
        return None;
    }
    let st = e.stalk(site);
    (st.dim == 1 && st.action.iter().all(QMatrix::is_identity) && e.germ_map().is_zero()).then_some(site)
}

/// `Hom(sky(x, Q), Iⁿ)` as the stabiliser-fixed vectors of `Iⁿ_x` (with zero
/// germ when `x = ω`), with the differentials restricted to them.
fn stalk_fixed_complex(site: Site, res: &GodementResolution, top: usize, h: usize, m: usize) -> Result<HomComplex> {
    let stages: Vec<EqSheaf> =
        res.stages.iter().take(top + 1).map(|s| s.reshape(h, m)).collect::<Result<_>>()?;
    let spaces: Vec<QMatrix> = stages
        .iter()
        .map(|st| {
            let fixed = st.stalk(site).fixed_subspace();
            if site == Site::Limit {
                &fixed * &(st.germ_map() * &fixed).kernel()
            } else {
                fixed
            }
        })
        .collect();
    let mut d = Vec::new();
    for n in 0..spaces.len().saturating_sub(1) {
        let diff = res.differentials[n + 1].reshape(h, m);
        let img = diff.at(site) * &spaces[n];
        d.push(spaces[n + 1].solve(&img).expect("differentials preserve fixed vectors"));
    }
    Ok(HomComplex { dims: spaces.iter().map(QMatrix::cols).collect(), d })
}

trait LcmWith {
    fn lcm_with(self, other: usize) -> usize;
}

impl LcmWith for usize {
    fn lcm_with(self, other: usize) -> usize {
        num_integer::Integer::lcm(&self, &other)
    }
}

/// A stabiliser-fixed section of `coker δ` at a point of large height, built
/// by keeping a germ's tail at even (or odd) residues only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParityWitness {
    pub site: String,
    pub stage: usize,
    pub period: usize,
    /// Tail component of the section of `I⁰` at `ω`; its `ω` component is zero.
    pub section: PerTail,
    #[serde(with = "crate::linalg::qvec_serde")]
    pub class: Vec<Q>,
    pub parity: String,
    pub nonzero_in_cokernel: bool,
    pub outside_germ_image: bool,
}

/// Witness of nonvanishing of `(coker δ_stage)_x` at a `Γ`-fixed vector.
///
/// Fails with `HeightTooLow` when `ht(x) <= stage`; returns `None` when no
/// fixed germ has a tail that survives the parity cut.
pub fn parity_witness(e: &EqSheaf, site: Site, stage: usize) -> Result<Option<ParityWitness>> {
    let heights = e.base().site_heights()?;
    let ht = heights.of(site).ok_or_else(|| Error::InvalidSheaf(format!("no site {site}")))?;
    if ht <= stage {
        return Err(Error::HeightTooLow { height: ht, stage });
    }
    if stage > 0 || site != Site::Limit {
        return Err(Error::Unsupported("parity witnesses are built at the limit point for stage 0".into()));
    }
    let step = godement_i0(e)?;
    let src = &step.source;
    let period = src.period();
    if period % 2 != 0 {
        return Ok(None);
    }
    let fixed = src.limit().fixed_subspace();
    let germs = src.germ_map() * &fixed;
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(src.pattern().iter().scan(0, |acc, s| {
            *acc += s.dim;
            Some(*acc)
        }))
        .collect();
    let pi = step.delta.limit.cokernel();
    for v in fixed.columns() {
        let u = src.germ_map().mul_vec(&v);
        for (parity, keep) in [("even", 0), ("odd", 1)] {
            let mut t = u.clone();
            for j in (0..period).filter(|j| j % 2 != keep) {
                for x in &mut t[offsets[j]..offsets[j + 1]] {
                    *x = Q::zero();
                }
            }
            if t.iter().all(Zero::is_zero) {
                continue;
            }
            if germs.solve_vec(&t).is_some() {
                continue;
            }
            let mut section = vec![Q::zero(); src.limit().dim];
            section.extend(t.iter().cloned());
            let class = pi.mul_vec(&section);
            return Ok(Some(ParityWitness {
                site: site.to_string(),
                stage,
                period,
                section: PerTail { period, values: t },
                nonzero_in_cokernel: class.iter().any(|x| !x.is_zero()),
                class,
                parity: parity.into(),
                outside_germ_image: true,
            }));
        }
    }
    Ok(None)
}

/// `0 → F → X → E → 0` with a proof that no splitting exists.
#[derive(Clone, Debug)]
pub struct Extension {
    pub sub: EqSheaf,
    pub middle: EqSheaf,
    pub quotient: EqSheaf,
    pub inclusion: SheafMap,
    pub projection: SheafMap,
    pub cocycle: String,
    pub exact: bool,
    /// Whether the splitting equations have a solution.
    pub splits: bool,
    pub splitting_unknowns: usize,
    pub splitting_equations: usize,
}

impl Extension {
    pub fn to_json(&self) -> Value {
        json!({
            "sub": self.sub.to_json(),
            "middle": self.middle.to_json(),
            "quotient": self.quotient.to_json(),
            "inclusion": self.inclusion,
            "projection": self.projection,
            "cocycle": self.cocycle,
        })
    }

    /// Reloads an extension and re-derives exactness and the splitting
    /// verdict from the stored data.
    pub fn from_json(v: &Value) -> Result<Extension> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Parse(format!("extension JSON lacks '{k}'")));
        let parse = |e: serde_json::Error| Error::Parse(e.to_string());
        let sub = EqSheaf::from_json(field("sub")?)?;
        let middle = EqSheaf::from_json(field("middle")?)?;
        let quotient = EqSheaf::from_json(field("quotient")?)?;
        let inclusion: SheafMap = serde_json::from_value(field("inclusion")?.clone()).map_err(parse)?;
        let projection: SheafMap = serde_json::from_value(field("projection")?.clone()).map_err(parse)?;
        inclusion.check(&sub, &middle)?;
        projection.check(&middle, &quotient)?;
        let cocycle = field("cocycle")?.as_str().unwrap_or_default().to_string();
        Ok(assemble(sub, middle, quotient, inclusion, projection, cocycle))
    }

    pub fn summary(&self) -> Value {
        json!({
            "sub": self.sub.label(),
            "quotient": self.quotient.label(),
            "middle_stalk_dims": self.middle.stalk_dims().iter().map(|(s, d)| json!({"site": s.to_string(), "dim": d})).collect::<Vec<_>>(),
            "middle_germ_map": self.middle.germ_map(),
            "cocycle": self.cocycle,
            "exact": self.exact,
            "splits": self.splits,
            "splitting_system": {"unknowns": self.splitting_unknowns, "equations": self.splitting_equations},
        })
    }
}

/// A non-split extension of `E` by `F`, found from a cocycle `E → coker δ`
/// not factoring through `I⁰(F)`. The parity witness is tried first.
pub fn nonsplit_extension(e: &EqSheaf, f: &EqSheaf) -> Result<Option<Extension>> {
    let step = godement_i0(f)?;
    let (c, pi) = crate::sheaf::cokernel(&step.delta, &step.source, &step.sheaf)?;
    let h = e.head_len().max(step.sheaf.head_len());
    let m = e.period().lcm_with(step.sheaf.period());
    let (e2, f2, i0, c2) = (e.reshape(h, m)?, step.source.reshape(h, m)?, step.sheaf.reshape(h, m)?, c.reshape(h, m)?);
    let (delta, pi) = (step.delta.reshape(h, m), pi.reshape(h, m));
    let hom_ec = hom_same_shape(&e2, &c2);
    if hom_ec.dim() == 0 {
        return Ok(None);
    }
    let hom_ei = hom_same_shape(&e2, &i0);
    let boundaries: Vec<Vec<Q>> = hom_ei.maps().iter().map(|g| hom_ec.layout.flatten(&g.then(&pi))).collect();
    let b = QMatrix::from_columns(hom_ec.layout.len(), &boundaries);
    let base_rank = b.rank();
    let outside = |w: &SheafMap| b.hstack(&QMatrix::column_vector(&hom_ec.layout.flatten(w))).rank() > base_rank;

    let mut chosen: Option<(SheafMap, String)> = None;
    if e.base().has_tail() {
        if let Ok(Some(pw)) = parity_witness(f, Site::Limit, 0) {
            let triv = Stalk::trivial(1, e2.base().group().order());
            for theta in stalk_hom(e2.limit(), &triv, e2.base().group()) {
                let mut w = SheafMap::zero(&e2, &c2);
                w.limit = &QMatrix::column_vector(&pw.class) * &theta;
                if w.check(&e2, &c2).is_ok() && outside(&w) {
                    chosen = Some((w, format!("parity ({}) tail of period {}", pw.parity, pw.period)));
                    break;
                }
            }
        }
    }
    if chosen.is_none() {
        chosen = hom_ec
            .maps()
            .into_iter()
            .enumerate()
            .find(|(_, w)| outside(w))
            .map(|(k, w)| (w, format!("basis cocycle {k}")));
    }
    let Some((w, cocycle)) = chosen else { return Ok(None) };

    // X is the pullback of I⁰(F) → coker δ ← E.
    let sum = i0.direct_sum(&e2)?;
    let psi = zip_maps(&pi, &w, |a, b| a.hstack(&-b));
    let (x, iota) = kernel(&psi, &sum)?;
    let x = x.with_label(format!("ext({},{})", e.label(), f.label()));
    let mut projection = SheafMap::zero(&x, &e2);
    for s in x.all_sites() {
        *site_mut(&mut projection, s) = &select_tail(i0.stalk(s).dim, e2.stalk(s).dim) * iota.at(s);
    }
    let inclusion = {
        let mut out = SheafMap::zero(&f2, &x);
        for s in x.all_sites() {
            let top = delta.at(s).vstack(&QMatrix::zeros(e2.stalk(s).dim, f2.stalk(s).dim));
            *site_mut(&mut out, s) = &left_inverse(iota.at(s)) * &top;
        }
        out
    };
    inclusion.check(&f2, &x)?;
    projection.check(&x, &e2)?;
    Ok(Some(assemble(f2, x, e2, inclusion, projection, cocycle)))
}

fn assemble(
    sub: EqSheaf,
    middle: EqSheaf,
    quotient: EqSheaf,
    inclusion: SheafMap,
    projection: SheafMap,
    cocycle: String,
) -> Extension {
    let exact = inclusion.is_injective()
        && projection.is_surjective()
        && inclusion.then(&projection).is_zero()
        && middle.all_sites().iter().all(|&s| middle.stalk(s).dim == sub.stalk(s).dim + quotient.stalk(s).dim);
    // A splitting is σ: E → X with p σ = 1.
    let layout = MapLayout::new(&quotient, &middle);
    let homog = layout.equations(&quotient, &middle);
    let mut rows: Vec<Vec<Q>> = Vec::new();
    let mut rhs: Vec<Q> = vec![Q::zero(); homog.rows()];
    for s in middle.all_sites() {
        let (off, r, cdim) = layout.block(s);
        let p = projection.at(s);
        for i in 0..cdim {
            for j in 0..cdim {
                let mut row = vec![Q::zero(); layout.len()];
                for k in 0..r {
                    row[off + k * cdim + j] = p[(i, k)].clone();
                }
                rows.push(row);
                rhs.push(if i == j { q(1) } else { Q::zero() });
            }
        }
    }
    let affine = QMatrix::from_rows_shaped(rows.len(), layout.len(), rows);
    let system = homog.vstack(&affine);
    let splits = system.solve_vec(&rhs).is_some();
    Extension {
        sub,
        middle,
        quotient,
        inclusion,
        projection,
        cocycle,
        exact,
        splits,
        splitting_unknowns: layout.len(),
        splitting_equations: system.rows(),
    }
}

fn select_tail(skip: usize, keep: usize) -> QMatrix {
    QMatrix::zeros(keep, skip).hstack(&QMatrix::identity(keep))
}

fn site_mut(m: &mut SheafMap, s: Site) -> &mut QMatrix {
    match s {
        Site::Orbit(i) => &mut m.exceptional[i],
        Site::Tail(t) => &mut m.head[t],
        Site::Pattern(j) => &mut m.pattern[j],
        Site::Limit => &mut m.limit,
    }
}

fn zip_maps(a: &SheafMap, b: &SheafMap, f: impl Fn(&QMatrix, &QMatrix) -> QMatrix) -> SheafMap {
    let z = |x: &[QMatrix], y: &[QMatrix]| x.iter().zip(y).map(|(p, q)| f(p, q)).collect();
    SheafMap {
        exceptional: z(&a.exceptional, &b.exceptional),
        head: z(&a.head, &b.head),
        pattern: z(&a.pattern, &b.pattern),
        limit: f(&a.limit, &b.limit),
    }
}

#[derive(Clone, Debug)]
pub enum HomDimSetup {
    /// Rational Mackey functors for a finite group, via Weyl sheaves on its
    /// (discrete) subgroup space.
    FiniteGroup(String),
    /// Weyl sheaves on the subgroup space of `Z_p`.
    SpZp(usize),
    /// A bare space: only the rank bound is available.
    Tree(SpaceTree),
}

impl HomDimSetup {
    /// `finite:<group>`, `spzp:<p>`, `spzp-weyl` (p = 2) or `spzp-weyl:<p>`.
    pub fn parse(s: &str) -> Result<HomDimSetup> {
        let s = s.trim();
        if let Some(sel) = s.strip_prefix("finite:") {
            FiniteGroup::from_selector(sel)?;
            return Ok(HomDimSetup::FiniteGroup(sel.to_string()));
        }
        let p = match s {
            "spzp" | "spzp-weyl" => Some("2"),
            _ => s.strip_prefix("spzp:").or_else(|| s.strip_prefix("spzp-weyl:")),
        };
        if let Some(p) = p {
            let p: usize = p.parse().map_err(|_| Error::Parse(format!("bad setup '{s}'")))?;
            if p < 2 || !(2..p).all(|d| p % d != 0) {
                return Err(Error::Parse(format!("setup '{s}': {p} is not prime")));
            }
            return Ok(HomDimSetup::SpZp(p));
        }
        Err(Error::Parse(format!("unknown setup '{s}' (finite:<group>, spzp:<p> or spzp-weyl)")))
    }

    pub fn describe(&self) -> String {
        match self {
            HomDimSetup::FiniteGroup(s) => format!("finite:{s}"),
            HomDimSetup::SpZp(p) => format!("spzp:{p}"),
            HomDimSetup::Tree(t) => format!("tree:{}", t.chain()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HomDimVerdict {
    Exact { value: usize },
    Interval { lo: usize, hi: Option<usize> },
    PerfectHull,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditLine {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MackeyExtAudit {
    pub functors: Vec<String>,
    pub pairs: usize,
    pub nonzero_ext1: Vec<(String, String, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomDimCertificate {
    pub setup: String,
    pub cb_rank: Verdict,
    pub lower: usize,
    pub upper: Option<usize>,
    pub verdict: HomDimVerdict,
    pub audits: Vec<AuditLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mackey: Option<MackeyExtAudit>,
    /// Resolutions of the battery's first sheaf, re-verifiable offline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extension: Option<Value>,
    pub note: String,
}

const CLASS_NOTE: &str = "Ext is computed with eventually periodic tails; nonvanishing is certified by explicit non-split extensions, upper bounds by resolution length. Ambient Ext dimensions at the limit point are not computed.";

/// Representables on transitive sets and fixed-point functors of the
/// rational irreducibles.
pub fn mackey_battery(ctx: &Arc<BurnsideContext>) -> Result<Vec<MackeyFunctorQ>> {
    let mut v: Vec<MackeyFunctorQ> = (0..ctx.num_classes())
        .map(|a| representable_transitive(ctx, a).with_label(format!("representable:{a}")))
        .collect();
    for r in rational_irreducibles(ctx.group())? {
        v.push(fixed_point(ctx, &r).with_label(format!("fixedpoint:{}", r.label)));
    }
    Ok(v)
}

/// `Ext¹` over every ordered pair of the battery.
pub fn mackey_ext1_audit(ctx: &Arc<BurnsideContext>) -> Result<MackeyExtAudit> {
    let battery = mackey_battery(ctx)?;
    let rows: Vec<Vec<(String, String, usize)>> = battery
        .par_iter()
        .map(|m| {
            let res = projective_resolution(m, 2);
            battery
                .iter()
                .map(|n| Ok((m.label().to_string(), n.label().to_string(), ext_mackey(&res, n, 1)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let pairs = rows.iter().map(Vec::len).sum();
    Ok(MackeyExtAudit {
        functors: battery.iter().map(|m| m.label().to_string()).collect(),
        pairs,
        nonzero_ext1: rows.into_iter().flatten().filter(|r| r.2 != 0).collect(),
    })
}

fn resolution_audit(base: &SheafBase, battery: &[EqSheaf], bound: usize) -> Result<AuditLine> {
    let heights = base.site_heights()?;
    let mut worst = 0;
    let mut violations = 0;
    for e in battery {
        let res = godement_resolution(e, bound + 2)?;
        match res.length() {
            Some(l) => worst = worst.max(l),
            None => worst = usize::MAX,
        }
        violations += stalk_vanishing_check(&res, &heights)?.violations.len();
    }
    Ok(AuditLine {
        check: "godement resolution length".into(),
        passed: worst <= bound && violations == 0,
        detail: format!(
            "{} sheaves, longest resolution {}, {} stalk vanishing violations",
            battery.len(),
            if worst == usize::MAX { "unterminated".to_string() } else { worst.to_string() },
            violations
        ),
    })
}

fn sheaf_battery(base: &SheafBase, seed: u64, random: usize) -> Result<Vec<EqSheaf>> {
    let mut v = vec![constant_q(base)];
    for i in 0..base.orbits().len() {
        v.push(skyscraper_q(base, Site::Orbit(i))?);
    }
    if base.has_tail() {
        v.push(skyscraper_q(base, Site::Tail(0))?);
        v.push(skyscraper_q(base, Site::Limit)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        v.push(random_sheaf(base, &mut rng, 2)?);
    }
    Ok(v)
}

/// Upper bound from the rank of the subgroup space, audited by Godement
/// resolution lengths; lower bound from an explicit non-split extension.
pub fn homdim_certificate(setup: &HomDimSetup, seed: u64) -> Result<HomDimCertificate> {
    let mut audits = Vec::new();
    let (rank, base, mackey) = match setup {
        HomDimSetup::FiniteGroup(sel) => {
            let g = FiniteGroup::from_selector(sel)?;
            let ctx = Arc::new(BurnsideContext::new(&g)?);
            let base = SheafBase::subgroups(sel)?;
            let rank = cb_rank(&base.shell_tree(1)?)?.verdict;
            let audit = mackey_ext1_audit(&ctx)?;
            audits.push(AuditLine {
                check: "mackey ext1 vanishing".into(),
                passed: audit.nonzero_ext1.is_empty(),
                detail: format!("{} ordered pairs, {} nonzero", audit.pairs, audit.nonzero_ext1.len()),
            });
            (rank, Some(base), Some(audit))
        }
        HomDimSetup::SpZp(p) => {
            let tower = GroupTower::builtin(&format!("pro_p:{p}"), 4)?;
            let rank = cb_rank(&subgroup_space_tower(&tower)?)?.verdict;
            (rank, Some(SheafBase::spzp(*p, 1)?), None)
        }
        HomDimSetup::Tree(t) => (cb_rank(t)?.verdict, None, None),
    };
    let n = match rank {
        Verdict::Exact(n) => n,
        Verdict::PerfectHullDetected { .. } => {
            return Ok(HomDimCertificate {
                setup: setup.describe(),
                cb_rank: rank,
                lower: 0,
                upper: None,
                verdict: HomDimVerdict::PerfectHull,
                audits,
                mackey,
                resolution: None,
                extension: None,
                note: "perfect hull detected: no certificate".into(),
            })
        }
        _ => {
            return Ok(HomDimCertificate {
                setup: setup.describe(),
                cb_rank: rank,
                lower: 0,
                upper: None,
                verdict: HomDimVerdict::Interval { lo: 0, hi: None },
                audits,
                mackey,
                resolution: None,
                extension: None,
                note: "rank not certified".into(),
            })
        }
    };
    let bound = n.saturating_sub(1);
    let Some(base) = base else {
        return Ok(HomDimCertificate {
            setup: setup.describe(),
            cb_rank: rank,
            lower: 0,
            upper: Some(bound),
            verdict: if bound == 0 {
                HomDimVerdict::Exact { value: 0 }
            } else {
                HomDimVerdict::Interval { lo: 0, hi: Some(bound) }
            },
            audits,
            mackey,
            resolution: None,
            extension: None,
            note: "bound from the rank only; no sheaf model to audit".into(),
        });
    };
    let battery = sheaf_battery(&base, seed, 4)?;
    let line = resolution_audit(&base, &battery, bound)?;
    let upper = line.passed.then_some(bound);
    audits.push(line);
    let resolution = Some(godement_resolution(&battery[0], bound + 2)?.to_json());
    let mut lower = 0;
    let mut extension = None;
    if bound >= 1 && base.has_tail() {
        let sky = skyscraper_q(&base, Site::Limit)?;
        let c = constant_q(&base);
        let ext = nonsplit_extension(&sky, &c)?;
        let ok = ext.as_ref().is_some_and(|x| x.exact && !x.splits);
        audits.push(AuditLine {
            check: "non-split extension of sky(omega,Q) by constQ".into(),
            passed: ok,
            detail: ext.as_ref().map_or("no cocycle".into(), |x| x.cocycle.clone()),
        });
        if ok {
            lower = 1;
            extension = ext.map(|x| x.to_json());
        }
    }
    let verdict = match upper {
        Some(u) if u == lower => HomDimVerdict::Exact { value: u },
        u => HomDimVerdict::Interval { lo: lower, hi: u },
    };
    Ok(HomDimCertificate {
        setup: setup.describe(),
        cb_rank: rank,
        lower,
        upper,
        verdict,
        audits,
        mackey,
        resolution,
        extension,
        note: CLASS_NOTE.into(),
    })
}

/// Re-verifies a certificate from its JSON: the embedded resolution is
/// re-checked for exactness and length, the embedded extension for
/// exactness and infeasibility of the splitting system, and the bounds
/// against the verdict.
pub fn verify_certificate(v: &Value) -> Result<Vec<AuditLine>> {
    let mut out = Vec::new();
    let lower = v.get("lower").and_then(Value::as_u64).unwrap_or(0) as usize;
    let upper = v.get("upper").and_then(Value::as_u64).map(|u| u as usize);
    if let Some(r) = v.get("resolution") {
        let res = GodementResolution::from_json(r)?;
        let checked = res.verify();
        let heights = res.input.base().site_heights()?;
        let violations = stalk_vanishing_check(&res, &heights)?.violations.len();
        out.push(AuditLine {
            check: "resolution".into(),
            passed: checked.is_ok() && violations == 0 && upper.is_none_or(|u| res.length().is_some_and(|l| l <= u)),
            detail: format!("length {:?}, {}", res.length(), checked.err().map_or("exact".into(), |e| e.to_string())),
        });
    }
    if let Some(x) = v.get("extension") {
        let ext = Extension::from_json(x)?;
        out.push(AuditLine {
            check: "extension".into(),
            passed: ext.exact && !ext.splits && lower >= 1,
            detail: format!(
                "exact {}, splitting system {} x {} {}",
                ext.exact,
                ext.splitting_equations,
                ext.splitting_unknowns,
                if ext.splits { "solvable" } else { "infeasible" }
            ),
        });
    } else if lower > 0 {
        out.push(AuditLine { check: "extension".into(), passed: false, detail: "lower bound without witness".into() });
    }
    let verdict = v.get("verdict").cloned().unwrap_or(Value::Null);
    let consistent = match verdict.get("kind").and_then(Value::as_str) {
        Some("exact") => verdict.get("value").and_then(Value::as_u64).map(|x| x as usize) == Some(lower) && upper == Some(lower),
        Some(_) => true,
        None => false,
    };
    out.push(AuditLine { check: "verdict".into(), passed: consistent, detail: verdict.to_string() });
    Ok(out)
}

/// The discrete subgroup space of the functor's group, orbits in class order.
pub fn weyl_base(ctx: &BurnsideContext) -> Result<SheafBase> {
    SheafBase::subgroups_of(ctx.group(), ctx.lattice())
}

/// Stalk data of `Φ(M)` at a class: the quotient of `M(K)` by inductions
/// from proper subgroups, with the induced `N(K)` action.
fn phi_projection(m: &MackeyFunctorQ, c: usize) -> QMatrix {
    let ctx = m.context();
    let lat = ctx.lattice();
    let rep = lat.rep(c);
    let k = lat.subgroup(rep);
    let mut im = QMatrix::zeros(m.dims()[c], 0);
    for (s, sub) in lat.subgroups().iter().enumerate() {
        if sub.order() < k.order() && sub.is_subgroup_of(k) {
            im = im.hstack(&m.ind_any(rep, s));
        }
    }
    im.cokernel()
}

pub fn mackey_to_weylsheaf(m: &MackeyFunctorQ) -> Result<EqSheaf> {
    let ctx = m.context();
    let base = weyl_base(ctx)?;
    let lat = ctx.lattice();
    let mut stalks = Vec::new();
    for (c, orbit) in base.orbits().iter().enumerate() {
        let p = phi_projection(m, c);
        let sec = right_inverse(&p);
        let rep = lat.rep(c);
        let action = orbit.stabilizer.elements().iter().map(|&n| &(&p * &m.conj_any(rep, n)) * &sec).collect();
        stalks.push(Stalk { dim: p.rows(), action });
    }
    let n = ctx.group().order();
    EqSheaf::new(&base, format!("Phi({})", m.label()), stalks, vec![], vec![Stalk::zero(n)], Stalk::zero(n), QMatrix::zeros(0, 0))
}

/// `Φ` on a natural transformation `M → N`.
pub fn mackey_morphism_to_sheaf(f: &MackeyMorphism, m: &MackeyFunctorQ, n: &MackeyFunctorQ) -> Result<SheafMap> {
    let sm = mackey_to_weylsheaf(m)?;
    let sn = mackey_to_weylsheaf(n)?;
    let mut out = SheafMap::zero(&sm, &sn);
    for c in 0..m.dims().len() {
        let (pm, pn) = (phi_projection(m, c), phi_projection(n, c));
        out.exceptional[c] = &(&pn * &f.maps[c]) * &right_inverse(&pm);
    }
    out.check(&sm, &sn)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhiHomAudit {
    pub pairs: usize,
    pub mismatches: Vec<(String, String, usize, usize)>,
}

/// `dim Hom(M, N) = dim Hom(ΦM, ΦN)` over all ordered pairs.
pub fn phi_hom_audit(functors: &[MackeyFunctorQ]) -> Result<PhiHomAudit> {
    let sheaves: Vec<EqSheaf> = functors.iter().map(mackey_to_weylsheaf).collect::<Result<_>>()?;
    let rows: Vec<Vec<(String, String, usize, usize)>> = functors
        .par_iter()
        .zip(&sheaves)
        .map(|(m, sm)| {
            functors
                .iter()
                .zip(&sheaves)
                .map(|(n, sn)| {
                    let a = hom_space(m, n).len();
                    let b = crate::sheaf::hom_sheaf(sm, sn).map(|h| h.dim())?;
                    Ok((m.label().to_string(), n.label().to_string(), a, b))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let pairs = rows.iter().map(Vec::len).sum();
    Ok(PhiHomAudit { pairs, mismatches: rows.into_iter().flatten().filter(|r| r.2 != r.3).collect() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhiExactnessAudit {
    pub sequences: usize,
    pub exact_before: usize,
    pub exact_after: usize,
    pub nontrivial: usize,
}

fn stalkwise_exact(i: &SheafMap, p: &SheafMap, a: &EqSheaf, b: &EqSheaf, c: &EqSheaf) -> bool {
    i.is_injective()
        && p.is_surjective()
        && i.then(p).is_zero()
        && a.all_sites().iter().all(|&s| b.stalk(s).dim == a.stalk(s).dim + c.stalk(s).dim)
}

fn mackey_exact(i: &MackeyMorphism, p: &MackeyMorphism) -> bool {
    i.maps.iter().zip(&p.maps).all(|(x, y)| {
        x.rank() == x.cols() && y.rank() == y.rows() && (y * x).is_zero() && x.rows() == x.cols() + y.rows()
    })
}

/// Seeded short exact sequences `0 → im f → N → coker f → 0` and
/// `0 → ker f → M → M/ker f → 0` for random `f: M → N` from the battery and
/// its pairwise sums; checks that `Φ` keeps them exact.
pub fn phi_exactness_audit(functors: &[MackeyFunctorQ], seed: u64, count: usize) -> Result<PhiExactnessAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<MackeyFunctorQ> = functors.to_vec();
    for i in 0..functors.len().min(3) {
        pool.push(functors[i].direct_sum(&functors[functors.len() - 1 - i]));
    }
    let mut audit = PhiExactnessAudit { sequences: 0, exact_before: 0, exact_after: 0, nontrivial: 0 };
    let mut attempts = 0;
    while audit.sequences < count {
        attempts += 1;
        if attempts > 50 * count.max(1) {
            return Err(Error::Unsupported("could not draw enough nonzero morphisms".into()));
        }
        let m = &pool[rng.gen_range(0..pool.len())];
        let n = &pool[rng.gen_range(0..pool.len())];
        let basis = hom_space(m, n);
        if basis.is_empty() {
            continue;
        }
        let mut f = MackeyMorphism::zero(m, n);
        for b in &basis {
            f = f.add(&b.scale(&q(rng.gen_range(-2..=2))));
        }
        let (a, i, b, c, p) = if audit.sequences % 2 == 0 {
            let (im, inc) = image(n, &f);
            let (co, proj) = mackey_cokernel(n, &f);
            (im, inc, n.clone(), co, proj)
        } else {
            let (k, inc) = mackey_kernel(m, &f);
            let (co, proj) = quotient(m, &inc.maps, "coim")?;
            (k, inc, m.clone(), co, proj)
        };
        audit.sequences += 1;
        if a.total_dim() > 0 && c.total_dim() > 0 {
            audit.nontrivial += 1;
        }
        if mackey_exact(&i, &p) {
            audit.exact_before += 1;
        }
        let fi = mackey_morphism_to_sheaf(&i, &a, &b)?;
        let fp = mackey_morphism_to_sheaf(&p, &b, &c)?;
        let (sa, sb, sc) = (mackey_to_weylsheaf(&a)?, mackey_to_weylsheaf(&b)?, mackey_to_weylsheaf(&c)?);
        if stalkwise_exact(&fi, &fp, &sa, &sb, &sc) {
            audit.exact_after += 1;
        }
    }
    Ok(audit)
}

/// Stalk dimensions of `Φ(M)` and its Weyl check.
pub fn phi_summary(m: &MackeyFunctorQ) -> Result<Value> {
    let s = mackey_to_weylsheaf(m)?;
    Ok(json!({
        "functor": m.label(),
        "stalk_dims": s.stalk_dims().iter().map(|(site, d)| json!({"site": site.to_string(), "dim": d})).collect::<Vec<_>>(),
        "weyl": crate::sheaf::weyl_check(&s),
    }))
}
