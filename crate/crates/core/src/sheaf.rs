//! Equivariant sheaves of rational vector spaces over scattered bases of
//! Cantor-Bendixson rank at most two.
//!
//! A base consists of a finite group `Γ` (through which every action factors),
//! finitely many exceptional orbits `Γ/H`, and optionally a sequence of
//! `Γ`-fixed isolated points `x_0, x_1, ...` converging to a `Γ`-fixed limit `ω`.
//! A sheaf stores one stalk per exceptional orbit (a module for the
//! stabiliser), stalks at the first few sequence points, a periodic pattern of
//! stalks for the rest, a stalk at `ω`, and the germ map from the `ω` stalk to
//! eventually periodic tails, stored over one period.

use std::fmt;

use num_integer::Integer;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cb::{heights, Height, LevelAction, RegionType, SpaceTree, TreeActions};
use crate::error::{Error, Result};
use crate::group::{is_normal, normalizer, FiniteGroup, Subgroup, SubgroupLattice};
use crate::linalg::{q, QMatrix, Q};
use crate::reps::{rational_irreducibles, rep_hom_space, QRep};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseOrbit {
    pub label: String,
    pub stabilizer: Subgroup,
    /// Must act trivially on the stalk at the orbit's base point.
    pub weyl_kernel: Subgroup,
}

/// Weyl kernels along the convergent sequence: individually for the first
/// points, then periodically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TailShape {
    pub head_kernels: Vec<Subgroup>,
    pub pattern_kernels: Vec<Subgroup>,
    pub limit_kernel: Subgroup,
}

impl TailShape {
    pub fn kernel_at(&self, t: usize) -> &Subgroup {
        match self.head_kernels.get(t) {
            Some(k) => k,
            None => &self.pattern_kernels[t % self.pattern_kernels.len()],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SheafBase {
    descriptor: String,
    group: FiniteGroup,
    orbits: Vec<BaseOrbit>,
    tail: Option<TailShape>,
}

/// A point class of the base. `Pattern(j)` stands for every sequence point
/// past the sheaf's head that is congruent to `j` modulo its period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Site {
    Orbit(usize),
    Tail(usize),
    Pattern(usize),
    Limit,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Orbit(i) => write!(f, "orbit{i}"),
            Site::Tail(t) => write!(f, "x{t}"),
            Site::Pattern(j) => write!(f, "x[{j}+]"),
            Site::Limit => write!(f, "omega"),
        }
    }
}

impl Site {
    pub fn parse(s: &str) -> Result<Site> {
        let s = s.trim();
        if s == "omega" || s == "limit" {
            return Ok(Site::Limit);
        }
        let num = |rest: &str| rest.parse::<usize>().map_err(|_| Error::Parse(format!("bad site '{s}'")));
        if let Some(rest) = s.strip_prefix("orbit") {
            return Ok(Site::Orbit(num(rest)?));
        }
        if let Some(rest) = s.strip_prefix('x') {
            return Ok(Site::Tail(num(rest)?));
        }
        Err(Error::Parse(format!("bad site '{s}' (orbitN, xN or omega)")))
    }
}

impl SheafBase {
    pub fn new(
        descriptor: impl Into<String>,
        group: FiniteGroup,
        orbits: Vec<BaseOrbit>,
        tail: Option<TailShape>,
    ) -> Result<Self> {
        let check_kernel = |k: &Subgroup, h: &Subgroup, what: &str| -> Result<()> {
            if !k.is_subgroup_of(h) {
                return Err(Error::InvalidSheaf(format!("{what}: kernel not inside stabiliser")));
            }
            let (hg, emb) = crate::group::subgroup_as_group(&group, h);
            let local: Vec<usize> =
                k.elements().iter().map(|x| emb.iter().position(|y| y == x).unwrap()).collect();
            if !is_normal(&hg, &Subgroup::new(&hg, local)?) {
                return Err(Error::InvalidSheaf(format!("{what}: kernel not normal in stabiliser")));
            }
            Ok(())
        };
        let whole = Subgroup::whole(&group);
        for o in &orbits {
            check_kernel(&o.weyl_kernel, &o.stabilizer, &o.label)?;
        }
        if let Some(t) = &tail {
            if t.pattern_kernels.is_empty() {
                return Err(Error::InvalidSheaf("tail pattern needs at least one kernel".into()));
            }
            for k in t.head_kernels.iter().chain(&t.pattern_kernels).chain([&t.limit_kernel]) {
                check_kernel(k, &whole, "tail")?;
            }
        }
        Ok(SheafBase { descriptor: descriptor.into(), group, orbits, tail })
    }

    /// The subgroup space of `Z_p`: points `p^k Z_p` converging to `0`. The
    /// actions factor through `Γ = Z/p^d`; `d = 0` gives trivial actions.
    pub fn spzp(p: usize, d: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::Parse("spzp needs a prime".into()));
        }
        let n = p.checked_pow(d).filter(|&n| n <= 4096).ok_or(Error::Capacity {
            what: "spzp quotient".into(),
            bound: 4096,
        })?;
        let g = FiniteGroup::cyclic(n);
        let head = (0..d)
            .map(|k| {
                let step = p.pow(k);
                Subgroup::new(&g, (0..n).step_by(step).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let triv = Subgroup::trivial(&g);
        let descriptor = if d == 0 { format!("spzp:{p}") } else { format!("spzp:{p}:{d}") };
        let tail = TailShape { head_kernels: head, pattern_kernels: vec![triv.clone()], limit_kernel: triv };
        SheafBase::new(descriptor, g, vec![], Some(tail))
    }

    /// The (finite, discrete) subgroup space of a finite group, one orbit per
    /// conjugacy class with stabiliser `N(K)` and Weyl kernel `K`.
    pub fn subgroups(selector: &str) -> Result<Self> {
        let g = FiniteGroup::from_selector(selector)?;
        let mut base = SheafBase::subgroups_of(&g, &SubgroupLattice::new(&g)?)?;
        base.descriptor = format!("subgroups:{selector}");
        Ok(base)
    }

    /// As [`SheafBase::subgroups`], with orbits in the order of a given lattice.
    pub fn subgroups_of(g: &FiniteGroup, lat: &SubgroupLattice) -> Result<Self> {
        let orbits = (0..lat.num_classes())
            .map(|c| {
                let k = lat.rep_subgroup(c).clone();
                BaseOrbit { label: format!("(K{c})"), stabilizer: normalizer(g, &k), weyl_kernel: k }
            })
            .collect();
        SheafBase::new(format!("subgroups:{}", g.label()), g.clone(), orbits, None)
    }

    /// `n` points with trivial actions.
    pub fn discrete(n: usize) -> Self {
        let g = FiniteGroup::trivial();
        let t = Subgroup::trivial(&g);
        let orbits = (0..n)
            .map(|i| BaseOrbit { label: format!("p{i}"), stabilizer: t.clone(), weyl_kernel: t.clone() })
            .collect();
        SheafBase::new(format!("discrete:{n}"), g, orbits, None).expect("trivial base")
    }

    /// A free orbit `Γ/e` plus a convergent sequence of fixed points, with
    /// `Γ` given by a group selector.
    pub fn sequence(selector: &str) -> Result<Self> {
        let g = FiniteGroup::from_selector(selector)?;
        let t = Subgroup::trivial(&g);
        let orbits = vec![BaseOrbit { label: "free".into(), stabilizer: t.clone(), weyl_kernel: t.clone() }];
        let tail = TailShape { head_kernels: vec![], pattern_kernels: vec![t.clone()], limit_kernel: t };
        SheafBase::new(format!("sequence:{selector}"), g, orbits, Some(tail))
    }

    /// `spzp:P[:D]` (`spzp` alone is `spzp:2`), `subgroups:SEL`,
    /// `discrete:N`, `sequence:SEL`.
    pub fn from_descriptor(s: &str) -> Result<Self> {
        if s.trim() == "spzp" {
            return SheafBase::spzp(2, 0);
        }
        let (kind, rest) = s.trim().split_once(':').ok_or_else(|| Error::Parse(format!("bad base '{s}'")))?;
        let num = |x: &str| x.parse::<usize>().map_err(|_| Error::Parse(format!("bad base '{s}'")));
        match kind {
            "spzp" => match rest.split_once(':') {
                Some((p, d)) => SheafBase::spzp(num(p)?, num(d)? as u32),
                None => SheafBase::spzp(num(rest)?, 0),
            },
            "subgroups" => SheafBase::subgroups(rest),
            "discrete" => Ok(SheafBase::discrete(num(rest)?)),
            "sequence" => SheafBase::sequence(rest),
            _ => Err(Error::Parse(format!("unknown base kind '{kind}'"))),
        }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn orbits(&self) -> &[BaseOrbit] {
        &self.orbits
    }

    pub fn tail(&self) -> Option<&TailShape> {
        self.tail.as_ref()
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    pub fn stabilizer(&self, site: Site) -> Subgroup {
        match site {
            Site::Orbit(i) => self.orbits[i].stabilizer.clone(),
            _ => Subgroup::whole(&self.group),
        }
    }

    fn check_site(&self, site: Site) -> Result<()> {
        let ok = match site {
            Site::Orbit(i) => i < self.orbits.len(),
            _ => self.has_tail(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSheaf(format!("site {site} is not in base {}", self.descriptor)))
        }
    }

    /// Finite-depth tree presentation: the exceptional points, the first
    /// `depth` sequence points, and one clopen containing the rest and `ω`.
    pub fn shell_tree(&self, depth: usize) -> Result<SpaceTree> {
        let g = &self.group;
        let mut points: Vec<(String, Vec<usize>)> = Vec::new();
        for o in &self.orbits {
            let cosets = left_cosets(g, &o.stabilizer);
            let index_of = |x: usize| cosets.iter().position(|c| c.contains(&x)).unwrap();
            for (ci, c) in cosets.iter().enumerate() {
                let action = g.elements().map(|h| index_of(g.mul(h, c[0]))).collect();
                points.push((format!("{}.{ci}", o.label), action));
            }
        }
        let n_exc = points.len();
        let depth = if self.has_tail() { depth.max(1) } else { depth };
        let mut sizes = Vec::new();
        let mut labels = Vec::new();
        let mut tables = Vec::new();
        for k in 0..=depth {
            let tail_nodes = if self.has_tail() { k + 1 } else { 0 };
            sizes.push(n_exc + tail_nodes);
            let mut lab: Vec<String> = points.iter().map(|p| p.0.clone()).collect();
            if self.has_tail() {
                lab.extend((0..k).map(|t| format!("x{t}")));
                lab.push(format!("U{k}"));
            }
            labels.push(lab);
            let table: Vec<Vec<usize>> = g
                .elements()
                .map(|h| {
                    let mut row: Vec<usize> = Vec::with_capacity(n_exc + tail_nodes);
                    let mut base = 0;
                    for o in &self.orbits {
                        let m = g.order() / o.stabilizer.order();
                        let slice = &points[base..base + m];
                        row.extend(slice.iter().map(|p| base + p.1[h]));
                        base += m;
                    }
                    row.extend(n_exc..n_exc + tail_nodes);
                    row
                })
                .collect();
            tables.push(LevelAction::Table(table));
        }
        let bonds: Vec<Vec<usize>> = (0..depth)
            .map(|k| {
                let mut b: Vec<usize> = (0..n_exc).collect();
                if self.has_tail() {
                    b.extend(n_exc..n_exc + k);
                    b.push(n_exc + k);
                    b.push(n_exc + k);
                }
                b
            })
            .collect();
        let mut regions = vec![RegionType::SINGLETON; sizes[depth]];
        if self.has_tail() {
            *regions.last_mut().unwrap() = RegionType::Peak(1);
        }
        let actions = TreeActions {
            group_orders: vec![g.order(); depth + 1],
            group_bonds: vec![g.elements().collect(); depth],
            levels: tables,
        };
        SpaceTree::new(sizes, bonds, format!("shell:{}", self.descriptor))?
            .with_regions(regions)?
            .with_actions(actions)?
            .with_labels(labels)
    }

    /// Heights of every site, read off the height report of the shell tree.
    pub fn site_heights(&self) -> Result<SiteHeights> {
        let tree = self.shell_tree(2)?;
        let report = heights(&tree)?;
        let exact = |i: usize| -> Result<usize> {
            match report.height_of(i) {
                Some(Height::Exact(h)) => Ok(*h),
                other => Err(Error::Unsupported(format!("height of shell point {i} is {other:?}"))),
            }
        };
        let mut orbits = Vec::new();
        let mut base = 0;
        for o in &self.orbits {
            orbits.push(exact(base)?);
            base += self.group.order() / o.stabilizer.order();
        }
        let (isolated_tail, limit) = if self.has_tail() {
            (Some(exact(base)?), Some(exact(base + tree.depth())?))
        } else {
            (None, None)
        };
        Ok(SiteHeights { orbits, isolated_tail, limit })
    }
}

fn left_cosets(g: &FiniteGroup, h: &Subgroup) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.order()];
    let mut out = Vec::new();
    let mut order: Vec<usize> = vec![g.identity()];
    order.extend(g.elements().filter(|&x| x != g.identity()));
    for x in order {
        if seen[x] {
            continue;
        }
        let c: Vec<usize> = h.elements().iter().map(|&k| g.mul(x, k)).collect();
        for &y in &c {
            seen[y] = true;
        }
        out.push(c);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SiteHeights {
    pub orbits: Vec<usize>,
    pub isolated_tail: Option<usize>,
    pub limit: Option<usize>,
}

impl SiteHeights {
    pub fn of(&self, site: Site) -> Option<usize> {
        match site {
            Site::Orbit(i) => self.orbits.get(i).copied(),
            Site::Tail(_) | Site::Pattern(_) => self.isolated_tail,
            Site::Limit => self.limit,
        }
    }
}

/// A module for the stabiliser of a site; `action[k]` is the matrix of the
/// `k`-th stabiliser element in increasing element order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stalk {
    pub dim: usize,
    pub action: Vec<QMatrix>,
}

impl Stalk {
    pub fn zero(order: usize) -> Self {
        Stalk { dim: 0, action: vec![QMatrix::zeros(0, 0); order] }
    }

    pub fn trivial(dim: usize, order: usize) -> Self {
        Stalk { dim, action: vec![QMatrix::identity(dim); order] }
    }

    pub fn restrict(rep: &QRep, h: &Subgroup) -> Self {
        Stalk { dim: rep.dim, action: h.elements().iter().map(|&x| rep.matrices[x].clone()).collect() }
    }

    pub fn direct_sum(&self, other: &Stalk) -> Stalk {
        Stalk {
            dim: self.dim + other.dim,
            action: self
                .action
                .iter()
                .zip(&other.action)
                .map(|(a, b)| QMatrix::block_diag(&[a.clone(), b.clone()]))
                .collect(),
        }
    }

    fn check(&self, g: &FiniteGroup, h: &Subgroup, what: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSheaf(format!("stalk {what}: {m}")));
        if self.action.len() != h.order() {
            return bad("one matrix per stabiliser element");
        }
        if self.action.iter().any(|m| m.shape() != (self.dim, self.dim)) {
            return bad("matrix shape");
        }
        let els = h.elements();
        for (i, &a) in els.iter().enumerate() {
            for (j, &b) in els.iter().enumerate() {
                let k = els.binary_search(&g.mul(a, b)).unwrap();
                if &self.action[i] * &self.action[j] != self.action[k] {
                    return bad("not a representation");
                }
            }
        }
        Ok(())
    }

    /// Basis (columns) of the vectors fixed by every stabiliser element.
    pub fn fixed_subspace(&self) -> QMatrix {
        let id = QMatrix::identity(self.dim);
        let mut stack = QMatrix::zeros(0, self.dim);
        for m in &self.action {
            stack = stack.vstack(&(m - &id));
        }
        stack.kernel()
    }

    fn conjugate_by(&self, p: &QMatrix, pinv: &QMatrix) -> Stalk {
        Stalk { dim: self.dim, action: self.action.iter().map(|m| &(pinv * m) * p).collect() }
    }
}

/// An equivariant sheaf on a [`SheafBase`], eventually periodic along the
/// convergent sequence.
#[derive(Clone, Debug)]
pub struct EqSheaf {
    base: SheafBase,
    label: String,
    exceptional: Vec<Stalk>,
    head: Vec<Stalk>,
    pattern: Vec<Stalk>,
    limit: Stalk,
    /// Germ map: rows are the tail coordinates over one period
    /// (residue-major), columns the `ω` stalk.
    lambda: QMatrix,
}

pub type EqSheafFinite = EqSheaf;
pub type ConvergingSheaf = EqSheaf;

impl PartialEq for EqSheaf {
    fn eq(&self, other: &Self) -> bool {
        self.base.descriptor == other.base.descriptor
            && self.exceptional == other.exceptional
            && self.head == other.head
            && self.pattern == other.pattern
            && self.limit == other.limit
            && self.lambda == other.lambda
    }
}

/// An eventually periodic tail: `values` concatenates one vector per residue
/// class modulo `period`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerTail {
    pub period: usize,
    #[serde(with = "crate::linalg::qvec_serde")]
    pub values: Vec<Q>,
}

impl EqSheaf {
    pub fn new(
        base: &SheafBase,
        label: impl Into<String>,
        exceptional: Vec<Stalk>,
        head: Vec<Stalk>,
        pattern: Vec<Stalk>,
        limit: Stalk,
        lambda: QMatrix,
    ) -> Result<Self> {
        let s = EqSheaf { base: base.clone(), label: label.into(), exceptional, head, pattern, limit, lambda };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let g = &self.base.group;
        let whole = Subgroup::whole(g);
        let bad = |m: String| Err(Error::InvalidSheaf(m));
        if self.exceptional.len() != self.base.orbits.len() {
            return bad("one stalk per exceptional orbit".into());
        }
        for (i, (s, o)) in self.exceptional.iter().zip(&self.base.orbits).enumerate() {
            s.check(g, &o.stabilizer, &format!("orbit{i}"))?;
        }
        if self.pattern.is_empty() {
            return bad("the tail pattern needs at least one residue".into());
        }
        for (t, s) in self.head.iter().enumerate() {
            s.check(g, &whole, &format!("x{t}"))?;
        }
        for (j, s) in self.pattern.iter().enumerate() {
            s.check(g, &whole, &format!("pattern{j}"))?;
        }
        self.limit.check(g, &whole, "omega")?;
        if !self.base.has_tail() && (self.tail_total() > 0 || self.limit.dim > 0 || self.head.iter().any(|s| s.dim > 0))
        {
            return bad("a base without a tail carries no tail stalks".into());
        }
        if self.lambda.shape() != (self.tail_total(), self.limit.dim) {
            return bad(format!(
                "germ map has shape {:?}, expected {:?}",
                self.lambda.shape(),
                (self.tail_total(), self.limit.dim)
            ));
        }
        for k in 0..g.order() {
            if &self.tail_action(k) * &self.lambda != &self.lambda * &self.limit.action[k] {
                return bad(format!("germ map is not equivariant at element {k}"));
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &SheafBase {
        &self.base
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn exceptional(&self) -> &[Stalk] {
        &self.exceptional
    }

    pub fn head(&self) -> &[Stalk] {
        &self.head
    }

    pub fn pattern(&self) -> &[Stalk] {
        &self.pattern
    }

    pub fn limit(&self) -> &Stalk {
        &self.limit
    }

    pub fn germ_map(&self) -> &QMatrix {
        &self.lambda
    }

    pub fn period(&self) -> usize {
        self.pattern.len()
    }

    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.head.len(), self.pattern.len())
    }

    fn tail_total(&self) -> usize {
        self.pattern.iter().map(|s| s.dim).sum()
    }

    fn tail_offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for s in &self.pattern {
            o.push(o.last().unwrap() + s.dim);
        }
        o
    }

    /// The action of a `Γ` element on tails over one period.
    fn tail_action(&self, k: usize) -> QMatrix {
        QMatrix::block_diag(&self.pattern.iter().map(|s| s.action[k].clone()).collect::<Vec<_>>())
    }

    pub fn stalk(&self, site: Site) -> &Stalk {
        match site {
            Site::Orbit(i) => &self.exceptional[i],
            Site::Tail(t) => self.head.get(t).unwrap_or_else(|| &self.pattern[t % self.pattern.len()]),
            Site::Pattern(j) => &self.pattern[j % self.pattern.len()],
            Site::Limit => &self.limit,
        }
    }

    /// Every block of the presentation, including the `ω` block of a base
    /// without a tail.
    pub fn all_sites(&self) -> Vec<Site> {
        let mut out: Vec<Site> = (0..self.exceptional.len()).map(Site::Orbit).collect();
        out.extend((0..self.head.len()).map(Site::Tail));
        out.extend((0..self.pattern.len()).map(Site::Pattern));
        out.push(Site::Limit);
        out
    }

    /// Every site of the presentation.
    pub fn sites(&self) -> Vec<Site> {
        let mut out: Vec<Site> = (0..self.exceptional.len()).map(Site::Orbit).collect();
        if self.base.has_tail() {
            out.extend((0..self.head.len()).map(Site::Tail));
            out.extend((0..self.pattern.len()).map(Site::Pattern));
            out.push(Site::Limit);
        }
        out
    }

    pub fn stalk_dims(&self) -> Vec<(Site, usize)> {
        self.sites().into_iter().map(|s| (s, self.stalk(s).dim)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.exceptional.iter().chain(&self.head).chain(&self.pattern).chain([&self.limit]).all(|s| s.dim == 0)
    }

    pub fn germ(&self, e: &[Q]) -> PerTail {
        PerTail { period: self.period(), values: self.lambda.mul_vec(e) }
    }

    /// Same sheaf presented with head length `h` and period `m`.
    pub fn reshape(&self, h: usize, m: usize) -> Result<EqSheaf> {
        if h < self.head.len() || m == 0 || m % self.period() != 0 {
            return Err(Error::InvalidSheaf(format!(
                "cannot reshape ({}, {}) to ({h}, {m})",
                self.head.len(),
                self.period()
            )));
        }
        if (h, m) == self.shape() {
            return Ok(self.clone());
        }
        let head = (0..h).map(|t| self.stalk(Site::Tail(t)).clone()).collect();
        let pattern: Vec<Stalk> = (0..m).map(|j| self.pattern[j % self.period()].clone()).collect();
        let off = self.tail_offsets();
        let mut lambda = QMatrix::zeros(0, self.limit.dim);
        for j in 0..m {
            let r = j % self.period();
            lambda = lambda.vstack(&self.lambda.block(off[r], 0, off[r + 1] - off[r], self.limit.dim));
        }
        Ok(EqSheaf { head, pattern, lambda, ..self.clone() })
    }

    pub fn direct_sum(&self, other: &EqSheaf) -> Result<EqSheaf> {
        let (a, b) = align(self, other)?;
        let sum = |x: &[Stalk], y: &[Stalk]| x.iter().zip(y).map(|(s, t)| s.direct_sum(t)).collect::<Vec<_>>();
        let (oa, ob) = (a.tail_offsets(), b.tail_offsets());
        let mut lambda = QMatrix::zeros(0, a.limit.dim + b.limit.dim);
        for j in 0..a.period() {
            let la = a.lambda.block(oa[j], 0, oa[j + 1] - oa[j], a.limit.dim);
            let lb = b.lambda.block(ob[j], 0, ob[j + 1] - ob[j], b.limit.dim);
            lambda = lambda.vstack(&QMatrix::block_diag(&[la, lb]));
        }
        EqSheaf::new(
            &a.base,
            format!("{}+{}", a.label, b.label),
            sum(&a.exceptional, &b.exceptional),
            sum(&a.head, &b.head),
            sum(&a.pattern, &b.pattern),
            a.limit.direct_sum(&b.limit),
            lambda,
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "base": self.base.descriptor,
            "label": self.label,
            "exceptional": self.exceptional,
            "head": self.head,
            "period": self.period(),
            "pattern": self.pattern,
            "limit": self.limit,
            "germ_map": self.lambda,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| v.get(k).cloned().ok_or_else(|| Error::Parse(format!("sheaf JSON lacks '{k}'")));
        let parse = |e: serde_json::Error| Error::Parse(e.to_string());
        let base = SheafBase::from_descriptor(field("base")?.as_str().ok_or(Error::Parse("base".into()))?)?;
        let label = v.get("label").and_then(Value::as_str).unwrap_or("sheaf").to_string();
        let pattern: Vec<Stalk> = serde_json::from_value(field("pattern")?).map_err(parse)?;
        if let Some(p) = v.get("period").and_then(Value::as_u64) {
            if p as usize != pattern.len() {
                return Err(Error::Parse(format!("period {p} does not match {} pattern stalks", pattern.len())));
            }
        }
        EqSheaf::new(
            &base,
            label,
            serde_json::from_value(field("exceptional")?).map_err(parse)?,
            serde_json::from_value(v.get("head").cloned().unwrap_or(json!([]))).map_err(parse)?,
            pattern,
            serde_json::from_value(field("limit")?).map_err(parse)?,
            serde_json::from_value(field("germ_map")?).map_err(parse)?,
        )
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a.lcm(&b)
}

/// Presents two sheaves on the same base with a common head and period.
pub fn align(a: &EqSheaf, b: &EqSheaf) -> Result<(EqSheaf, EqSheaf)> {
    if a.base.descriptor != b.base.descriptor {
        return Err(Error::InvalidSheaf(format!(
            "sheaves live on different bases ({} vs {})",
            a.base.descriptor, b.base.descriptor
        )));
    }
    let h = a.head_len().max(b.head_len());
    let m = lcm(a.period(), b.period());
    Ok((a.reshape(h, m)?, b.reshape(h, m)?))
}

/// The constant sheaf with stalk the `Γ`-representation `rep`.
pub fn constant_sheaf(base: &SheafBase, rep: &QRep) -> Result<EqSheaf> {
    let g = &base.group;
    if rep.matrices.len() != g.order() {
        return Err(Error::InvalidSheaf("representation of the wrong group".into()));
    }
    let whole = Subgroup::whole(g);
    let exceptional = base.orbits.iter().map(|o| Stalk::restrict(rep, &o.stabilizer)).collect();
    let (pattern, limit, lambda) = if base.has_tail() {
        (vec![Stalk::restrict(rep, &whole)], Stalk::restrict(rep, &whole), QMatrix::identity(rep.dim))
    } else {
        (vec![Stalk::zero(g.order())], Stalk::zero(g.order()), QMatrix::zeros(0, 0))
    };
    EqSheaf::new(base, format!("const:{}", rep.label), exceptional, vec![], pattern, limit, lambda)
}

pub fn constant_q(base: &SheafBase) -> EqSheaf {
    constant_sheaf(base, &QRep::trivial(&base.group)).expect("trivial representation").with_label("constQ")
}

/// The sheaf supported on the orbit of `site` with the given stalk there.
pub fn skyscraper(base: &SheafBase, site: Site, stalk: Stalk) -> Result<EqSheaf> {
    base.check_site(site)?;
    let n = base.group.order();
    let mut exceptional: Vec<Stalk> =
        base.orbits.iter().map(|o| Stalk::zero(o.stabilizer.order())).collect();
    let mut head = Vec::new();
    let mut limit = Stalk::zero(n);
    match site {
        Site::Orbit(i) => exceptional[i] = stalk,
        Site::Tail(t) => {
            head = vec![Stalk::zero(n); t + 1];
            head[t] = stalk;
        }
        Site::Limit => limit = stalk,
        Site::Pattern(_) => return Err(Error::InvalidSheaf("a skyscraper sits on a single orbit".into())),
    }
    let d = limit.dim;
    EqSheaf::new(base, format!("sky({site})"), exceptional, head, vec![Stalk::zero(n)], limit, QMatrix::zeros(0, d))
}

pub fn skyscraper_q(base: &SheafBase, site: Site) -> Result<EqSheaf> {
    base.check_site(site)?;
    let order = base.stabilizer(site).order();
    Ok(skyscraper(base, site, Stalk::trivial(1, order))?.with_label(format!("sky({site},Q)")))
}

/// Restriction to the orbit of `site` followed by extension by zero.
pub fn restrict_extend(e: &EqSheaf, site: Site) -> Result<EqSheaf> {
    let s = skyscraper(&e.base, site, e.stalk(site).clone())?;
    Ok(s.with_label(format!("{}|{site}", e.label)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeylReport {
    pub holds: bool,
    pub failures: Vec<Site>,
}

/// Whether every Weyl kernel acts trivially on its stalk.
pub fn weyl_check(e: &EqSheaf) -> WeylReport {
    let base = &e.base;
    let g = &base.group;
    let trivial_on = |stalk: &Stalk, stab: &Subgroup, kernel: &Subgroup| {
        let id = QMatrix::identity(stalk.dim);
        kernel.elements().iter().all(|x| stalk.action[stab.elements().binary_search(x).unwrap()] == id)
    };
    let whole = Subgroup::whole(g);
    let mut failures = Vec::new();
    for (i, o) in base.orbits.iter().enumerate() {
        if !trivial_on(&e.exceptional[i], &o.stabilizer, &o.weyl_kernel) {
            failures.push(Site::Orbit(i));
        }
    }
    if let Some(tail) = &base.tail {
        let individual = e.head_len().max(tail.head_kernels.len());
        let span = individual + lcm(e.period(), tail.pattern_kernels.len());
        for t in 0..span {
            if !trivial_on(e.stalk(Site::Tail(t)), &whole, tail.kernel_at(t)) {
                let site = if t < individual { Site::Tail(t) } else { Site::Pattern(t % e.period()) };
                if !failures.contains(&site) {
                    failures.push(site);
                }
            }
        }
        if !trivial_on(&e.limit, &whole, &tail.limit_kernel) {
            failures.push(Site::Limit);
        }
    }
    WeylReport { holds: failures.is_empty(), failures }
}

/// A morphism of sheaves of the same shape, given stalkwise: one matrix per
/// exceptional orbit, head point, pattern residue, and at `ω`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheafMap {
    pub exceptional: Vec<QMatrix>,
    pub head: Vec<QMatrix>,
    pub pattern: Vec<QMatrix>,
    pub limit: QMatrix,
}

impl SheafMap {
    fn blocks(&self) -> impl Iterator<Item = &QMatrix> {
        self.exceptional.iter().chain(&self.head).chain(&self.pattern).chain([&self.limit])
    }

    fn from_fn(src: &EqSheaf, dst: &EqSheaf, mut f: impl FnMut(Site, &Stalk, &Stalk) -> QMatrix) -> SheafMap {
        let mut at = |s: Site| f(s, src.stalk(s), dst.stalk(s));
        SheafMap {
            exceptional: (0..src.exceptional.len()).map(|i| at(Site::Orbit(i))).collect(),
            head: (0..src.head_len()).map(|t| at(Site::Tail(t))).collect(),
            pattern: (0..src.period()).map(|j| at(Site::Pattern(j))).collect(),
            limit: at(Site::Limit),
        }
    }

    pub fn zero(src: &EqSheaf, dst: &EqSheaf) -> SheafMap {
        SheafMap::from_fn(src, dst, |_, a, b| QMatrix::zeros(b.dim, a.dim))
    }

    pub fn identity(e: &EqSheaf) -> SheafMap {
        SheafMap::from_fn(e, e, |_, a, _| QMatrix::identity(a.dim))
    }

    pub fn at(&self, site: Site) -> &QMatrix {
        match site {
            Site::Orbit(i) => &self.exceptional[i],
            Site::Tail(t) => self.head.get(t).unwrap_or_else(|| &self.pattern[t % self.pattern.len()]),
            Site::Pattern(j) => &self.pattern[j % self.pattern.len()],
            Site::Limit => &self.limit,
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &SheafMap) -> SheafMap {
        let c = |a: &[QMatrix], b: &[QMatrix]| a.iter().zip(b).map(|(x, y)| y * x).collect();
        SheafMap {
            exceptional: c(&self.exceptional, &next.exceptional),
            head: c(&self.head, &next.head),
            pattern: c(&self.pattern, &next.pattern),
            limit: &next.limit * &self.limit,
        }
    }

    pub fn add(&self, other: &SheafMap) -> SheafMap {
        let c = |a: &[QMatrix], b: &[QMatrix]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        SheafMap {
            exceptional: c(&self.exceptional, &other.exceptional),
            head: c(&self.head, &other.head),
            pattern: c(&self.pattern, &other.pattern),
            limit: &self.limit + &other.limit,
        }
    }

    pub fn scale(&self, s: &Q) -> SheafMap {
        let c = |a: &[QMatrix]| a.iter().map(|x| x.scale(s)).collect();
        SheafMap {
            exceptional: c(&self.exceptional),
            head: c(&self.head),
            pattern: c(&self.pattern),
            limit: self.limit.scale(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks().all(QMatrix::is_zero)
    }

    /// Stalkwise injective and surjective.
    pub fn is_isomorphism(&self) -> bool {
        self.blocks().all(|m| m.rows() == m.cols() && m.rank() == m.rows())
    }

    pub fn is_injective(&self) -> bool {
        self.blocks().all(|m| m.rank() == m.cols())
    }

    pub fn is_surjective(&self) -> bool {
        self.blocks().all(|m| m.rank() == m.rows())
    }

    pub fn reshape(&self, h: usize, m: usize) -> SheafMap {
        SheafMap {
            exceptional: self.exceptional.clone(),
            head: (0..h).map(|t| self.at(Site::Tail(t)).clone()).collect(),
            pattern: (0..m).map(|j| self.pattern[j % self.pattern.len()].clone()).collect(),
            limit: self.limit.clone(),
        }
    }

    /// Shapes, equivariance and compatibility with the germ maps.
    pub fn check(&self, src: &EqSheaf, dst: &EqSheaf) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSheaf(format!("sheaf map: {m}")));
        if src.shape() != dst.shape()
            || self.exceptional.len() != src.exceptional.len()
            || self.head.len() != src.head_len()
            || self.pattern.len() != src.period()
        {
            return bad("shape mismatch".into());
        }
        for s in src.all_sites() {
            let (a, b, f) = (src.stalk(s), dst.stalk(s), self.at(s));
            if f.shape() != (b.dim, a.dim) {
                return bad(format!("block at {s} has shape {:?}", f.shape()));
            }
            for (x, y) in a.action.iter().zip(&b.action) {
                if &(y * f) != &(f * x) {
                    return bad(format!("not equivariant at {s}"));
                }
            }
        }
        let tail = QMatrix::block_diag(&self.pattern);
        if &dst.lambda * &self.limit != &tail * &src.lambda {
            return bad("germs are not preserved".into());
        }
        Ok(())
    }
}

/// Cokernel of a sheaf map, with the projection from the target.
pub fn cokernel(f: &SheafMap, src: &EqSheaf, dst: &EqSheaf) -> Result<(EqSheaf, SheafMap)> {
    debug_assert!(f.check(src, dst).is_ok());
    let proj = SheafMap::from_fn(dst, dst, |s, _, _| f.at(s).cokernel());
    let quotient = |p: &QMatrix, stalk: &Stalk| -> Stalk {
        let sec = right_inverse(p);
        Stalk { dim: p.rows(), action: stalk.action.iter().map(|m| &(p * m) * &sec).collect() }
    };
    let exceptional = dst.exceptional.iter().zip(&proj.exceptional).map(|(s, p)| quotient(p, s)).collect();
    let head = dst.head.iter().zip(&proj.head).map(|(s, p)| quotient(p, s)).collect();
    let pattern: Vec<Stalk> = dst.pattern.iter().zip(&proj.pattern).map(|(s, p)| quotient(p, s)).collect();
    let limit = quotient(&proj.limit, &dst.limit);
    let lambda = &(&QMatrix::block_diag(&proj.pattern) * &dst.lambda) * &right_inverse(&proj.limit);
    let c = EqSheaf::new(
        &dst.base,
        format!("coker({})", dst.label),
        exceptional,
        head,
        pattern,
        limit,
        lambda,
    )?;
    Ok((c, proj))
}

/// Kernel of a sheaf map, with the inclusion into the source.
pub fn kernel(f: &SheafMap, src: &EqSheaf) -> Result<(EqSheaf, SheafMap)> {
    let inc = SheafMap::from_fn(src, src, |s, _, _| f.at(s).kernel());
    let sub = |i: &QMatrix, stalk: &Stalk| -> Stalk {
        let ret = left_inverse(i);
        Stalk { dim: i.cols(), action: stalk.action.iter().map(|m| &(&ret * m) * i).collect() }
    };
    let exceptional = src.exceptional.iter().zip(&inc.exceptional).map(|(s, i)| sub(i, s)).collect();
    let head = src.head.iter().zip(&inc.head).map(|(s, i)| sub(i, s)).collect();
    let pattern: Vec<Stalk> = src.pattern.iter().zip(&inc.pattern).map(|(s, i)| sub(i, s)).collect();
    let limit = sub(&inc.limit, &src.limit);
    let ret = QMatrix::block_diag(&inc.pattern.iter().map(left_inverse).collect::<Vec<_>>());
    let lambda = &(&ret * &src.lambda) * &inc.limit;
    let k = EqSheaf::new(&src.base, format!("ker({})", src.label), exceptional, head, pattern, limit, lambda)?;
    Ok((k, inc))
}

/// `r` with `p r = 1` for a full-row-rank `p`.
pub(crate) fn right_inverse(p: &QMatrix) -> QMatrix {
    let pt = p.transpose();
    let gram = p * &pt;
    &pt * &gram.inverse().expect("full row rank")
}

/// `l` with `l i = 1` for a full-column-rank `i`.
pub(crate) fn left_inverse(i: &QMatrix) -> QMatrix {
    right_inverse(&i.transpose()).transpose()
}

/// First Godement stage `I⁰(E)` with the unit `δ`.
///
/// At isolated points `I⁰` agrees with `E`. At `ω` its stalk is
/// `E_ω ⊕ T`, where `T` is the space of tails of period `L`, and its germ map
/// is the projection to `T`. `L` is twice the period of `E` when `E` has a
/// nonzero tail, so that alternating tails are representable.
#[derive(Clone, Debug)]
pub struct GodementStep {
    /// `E` reshaped to the period of `I⁰`.
    pub source: EqSheaf,
    pub sheaf: EqSheaf,
    pub delta: SheafMap,
}

pub fn godement_i0(e: &EqSheaf) -> Result<GodementStep> {
    let m = if e.tail_total() > 0 { 2 * e.period() } else { e.period() };
    let source = e.reshape(e.head_len(), m)?;
    let n = source.base.group.order();
    let t = source.tail_total();
    let tail = Stalk { dim: t, action: (0..n).map(|k| source.tail_action(k)).collect() };
    let limit = source.limit.direct_sum(&tail);
    let lambda = QMatrix::zeros(t, source.limit.dim).hstack(&QMatrix::identity(t));
    let sheaf = EqSheaf::new(
        &source.base,
        format!("I0({})", e.label),
        source.exceptional.clone(),
        source.head.clone(),
        source.pattern.clone(),
        limit,
        lambda,
    )?;
    let mut delta = SheafMap::identity(&source);
    delta.limit = QMatrix::identity(source.limit.dim).vstack(&source.lambda);
    Ok(GodementStep { source, sheaf, delta })
}

/// `E → I⁰ → I¹ → ...`, built by iterating `I⁰` on cokernels.
#[derive(Clone, Debug)]
pub struct GodementResolution {
    pub input: EqSheaf,
    pub stages: Vec<EqSheaf>,
    /// `differentials[0]` is `δ: E → I⁰`; `differentials[n]` maps `I^{n-1}`
    /// (reshaped to the period of `I^n`) to `I^n`.
    pub differentials: Vec<SheafMap>,
    pub terminated: bool,
}

impl GodementResolution {
    /// Index of the last stage, when the resolution terminated.
    pub fn length(&self) -> Option<usize> {
        self.terminated.then(|| self.stages.len() - 1)
    }

    /// Common head and period of all stages.
    pub fn shape(&self) -> (usize, usize) {
        let h = self.stages.iter().map(EqSheaf::head_len).max().unwrap_or(0);
        let m = self.stages.iter().fold(1, |m, s| lcm(m, s.period()));
        (h, m)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "input": self.input.to_json(),
            "stages": self.stages.iter().map(EqSheaf::to_json).collect::<Vec<_>>(),
            "differentials": self.differentials,
            "terminated": self.terminated,
            "length": self.length(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let parse = |e: serde_json::Error| Error::Parse(e.to_string());
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Parse(format!("resolution JSON lacks '{k}'")));
        let stages = field("stages")?
            .as_array()
            .ok_or_else(|| Error::Parse("stages".into()))?
            .iter()
            .map(EqSheaf::from_json)
            .collect::<Result<Vec<_>>>()?;
        Ok(GodementResolution {
            input: EqSheaf::from_json(field("input")?)?,
            stages,
            differentials: serde_json::from_value(field("differentials")?.clone()).map_err(parse)?,
            terminated: field("terminated")?.as_bool().unwrap_or(false),
        })
    }

    /// Re-checks every differential, `d∘d = 0`, injectivity of `δ`, and
    /// stalkwise exactness, including surjectivity onto the last stage when
    /// the resolution claims to terminate.
    pub fn verify(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSheaf(format!("resolution: {m}")));
        if self.stages.len() != self.differentials.len() || self.stages.is_empty() {
            return bad("one differential per stage".into());
        }
        for (n, d) in self.differentials.iter().enumerate() {
            let tgt = &self.stages[n];
            let prev = if n == 0 { &self.input } else { &self.stages[n - 1] };
            d.check(&prev.reshape(tgt.head_len(), tgt.period())?, tgt)?;
        }
        let (h, m) = self.shape();
        let (h, m) = (h.max(self.input.head_len()), lcm(m, self.input.period()));
        let ds: Vec<SheafMap> = self.differentials.iter().map(|d| d.reshape(h, m)).collect();
        let stages: Vec<EqSheaf> = self.stages.iter().map(|s| s.reshape(h, m)).collect::<Result<_>>()?;
        if !ds[0].is_injective() {
            return bad("δ is not injective".into());
        }
        for n in 0..stages.len() {
            for s in stages[n].all_sites() {
                let into = ds[n].at(s).rank();
                let out = ds.get(n + 1).map_or(0, |d| d.at(s).rank());
                if let Some(next) = ds.get(n + 1) {
                    if !(next.at(s) * ds[n].at(s)).is_zero() {
                        return bad(format!("d∘d ≠ 0 at stage {n}, {s}"));
                    }
                }
                let exact = if n == 0 { into == ds[0].at(s).cols() } else { true };
                let last = n + 1 == stages.len();
                let dim = stages[n].stalk(s).dim;
                if !exact || (!last && into + out != dim) || (last && self.terminated && into != dim) {
                    return bad(format!("not exact at stage {n}, {s}"));
                }
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> Value {
        json!({
            "input": self.input.label,
            "length": self.length(),
            "terminated": self.terminated,
            "stages": self.stages.iter().enumerate().map(|(n, s)| json!({
                "stage": n,
                "period": s.period(),
                "stalk_dims": s.stalk_dims().iter().map(|(site, d)| json!({"site": site.to_string(), "dim": d})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Iterates until the cokernel vanishes or `max_stage` stages are built.
pub fn godement_resolution(e: &EqSheaf, max_stage: usize) -> Result<GodementResolution> {
    let step = godement_i0(e)?;
    let mut stages = vec![step.sheaf.clone()];
    let mut differentials = vec![step.delta.clone()];
    let (mut c, mut pi) = cokernel(&step.delta, &step.source, &step.sheaf)?;
    let mut terminated = false;
    loop {
        if c.is_zero() {
            terminated = true;
            break;
        }
        if stages.len() > max_stage {
            break;
        }
        let step = godement_i0(&c)?;
        let (h, m) = step.source.shape();
        let d = pi.reshape(h, m).then(&step.delta);
        stages.push(step.sheaf.clone());
        differentials.push(d);
        (c, pi) = cokernel(&step.delta, &step.source, &step.sheaf)?;
    }
    Ok(GodementResolution { input: e.clone(), stages, differentials, terminated })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VanishingViolation {
    pub stage: usize,
    pub site: String,
    pub height: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VanishingReport {
    pub stalks_checked: usize,
    pub violations: Vec<VanishingViolation>,
}

/// Every nonzero stalk of `Iⁿ` must sit at a point of height at least `n`.
pub fn stalk_vanishing_check(res: &GodementResolution, heights: &SiteHeights) -> Result<VanishingReport> {
    let mut checked = 0;
    let mut violations = Vec::new();
    for (n, stage) in res.stages.iter().enumerate() {
        for (site, dim) in stage.stalk_dims() {
            checked += 1;
            let h = heights
                .of(site)
                .ok_or_else(|| Error::InvalidSheaf(format!("no height for site {site}")))?;
            if dim > 0 && h < n {
                violations.push(VanishingViolation { stage: n, site: site.to_string(), height: h, dim });
            }
        }
    }
    Ok(VanishingReport { stalks_checked: checked, violations })
}

/// Coordinates of sheaf maps between two sheaves of the same shape, in block
/// order exceptional, head, pattern, limit, each block row-major.
#[derive(Clone, Debug)]
pub struct MapLayout {
    blocks: Vec<(Site, usize, usize, usize)>,
    len: usize,
}

impl MapLayout {
    pub fn new(src: &EqSheaf, dst: &EqSheaf) -> MapLayout {
        let mut blocks = Vec::new();
        let mut off = 0;
        for s in src.all_sites() {
            let (r, c) = (dst.stalk(s).dim, src.stalk(s).dim);
            blocks.push((s, off, r, c));
            off += r * c;
        }
        MapLayout { blocks, len: off }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Offset, rows and columns of the block at `site`.
    pub fn block(&self, site: Site) -> (usize, usize, usize) {
        let b = self.blocks.iter().find(|b| b.0 == site).expect("site in layout");
        (b.1, b.2, b.3)
    }

    pub fn flatten(&self, f: &SheafMap) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.len];
        for &(s, off, r, c) in &self.blocks {
            let m = f.at(s);
            for i in 0..r {
                for j in 0..c {
                    v[off + i * c + j] = m[(i, j)].clone();
                }
            }
        }
        v
    }

    pub fn unflatten(&self, src: &EqSheaf, dst: &EqSheaf, v: &[Q]) -> SheafMap {
        SheafMap::from_fn(src, dst, |s, a, b| {
            let (off, r, c) = self.block(s);
            debug_assert_eq!((r, c), (b.dim, a.dim));
            let mut m = QMatrix::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    m[(i, j)] = v[off + i * c + j].clone();
                }
            }
            m
        })
    }

    /// Linear equations cutting out the sheaf maps.
    pub fn equations(&self, src: &EqSheaf, dst: &EqSheaf) -> QMatrix {
        let mut rows: Vec<Vec<Q>> = Vec::new();
        for &(s, off, r, c) in &self.blocks {
            let (a, b) = (src.stalk(s), dst.stalk(s));
            for (x, y) in a.action.iter().zip(&b.action) {
                if x.is_identity() && y.is_identity() {
                    continue;
                }
                for i in 0..r {
                    for j in 0..c {
                        let mut row = vec![Q::zero(); self.len];
                        for k in 0..r {
                            row[off + k * c + j] += &y[(i, k)];
                        }
                        for k in 0..c {
                            row[off + i * c + k] -= &x[(k, j)];
                        }
                        rows.push(row);
                    }
                }
            }
        }
        if src.base.has_tail() {
            let (lo, lr, lc) = self.block(Site::Limit);
            let (so, to) = (src.tail_offsets(), dst.tail_offsets());
            for jres in 0..src.period() {
                let (po, pr, pc) = self.block(Site::Pattern(jres));
                for i in 0..pr {
                    for col in 0..lc {
                        let mut row = vec![Q::zero(); self.len];
                        for k in 0..lr {
                            row[lo + k * lc + col] += &dst.lambda[(to[jres] + i, k)];
                        }
                        for k in 0..pc {
                            row[po + i * pc + k] -= &src.lambda[(so[jres] + k, col)];
                        }
                        rows.push(row);
                    }
                }
            }
        }
        QMatrix::from_rows_shaped(rows.len(), self.len, rows)
    }
}

/// Sheaf maps between two sheaves, computed after presenting both with a
/// common head and period.
#[derive(Clone, Debug)]
pub struct HomSpace {
    pub source: EqSheaf,
    pub target: EqSheaf,
    pub layout: MapLayout,
    /// Basis as columns in layout coordinates.
    pub basis: QMatrix,
}

impl HomSpace {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn maps(&self) -> Vec<SheafMap> {
        self.basis.columns().iter().map(|v| self.layout.unflatten(&self.source, &self.target, v)).collect()
    }
}

pub fn hom_sheaf(e: &EqSheaf, f: &EqSheaf) -> Result<HomSpace> {
    let (a, b) = align(e, f)?;
    Ok(hom_same_shape(&a, &b))
}

/// Maps presented with head `h` and tail period `m`.
pub fn hom_sheaf_with_shape(e: &EqSheaf, f: &EqSheaf, h: usize, m: usize) -> Result<HomSpace> {
    Ok(hom_same_shape(&e.reshape(h, m)?, &f.reshape(h, m)?))
}

/// Sheaf maps between two sheaves presented with the same head and period.
pub fn hom_same_shape(a: &EqSheaf, b: &EqSheaf) -> HomSpace {
    assert_eq!(a.shape(), b.shape(), "hom_same_shape needs equal shapes");
    let layout = MapLayout::new(a, b);
    let basis = layout.equations(a, b).kernel();
    HomSpace { source: a.clone(), target: b.clone(), layout, basis }
}

/// Random module for a subgroup: a sum of restricted irreducibles of `Γ`,
/// conjugated by a random invertible matrix.
fn random_stalk<R: Rng>(
    rng: &mut R,
    irreps: &[QRep],
    h: &Subgroup,
    max_dim: usize,
) -> Stalk {
    let mut s = Stalk::zero(h.order());
    let target = rng.gen_range(0..=max_dim);
    while s.dim < target {
        let r = &irreps[rng.gen_range(0..irreps.len())];
        if s.dim + r.dim > max_dim {
            break;
        }
        s = s.direct_sum(&Stalk::restrict(r, h));
    }
    let (p, pinv) = random_invertible(rng, s.dim);
    s.conjugate_by(&p, &pinv)
}

fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> (QMatrix, QMatrix) {
    loop {
        let mut p = QMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(0.5) {
                    p[(i, j)] = q(rng.gen_range(-2..=2));
                }
            }
        }
        if let Some(pinv) = p.inverse() {
            return (p, pinv);
        }
    }
}

/// A random sheaf satisfying the Weyl condition: stalks of dimension at most
/// `max_dim`, head length at most 2, period at most 2, and a random
/// equivariant germ map.
pub fn random_sheaf<R: Rng>(base: &SheafBase, rng: &mut R, max_dim: usize) -> Result<EqSheaf> {
    let g = &base.group;
    let irreps = rational_irreducibles(g)?;
    let whole = Subgroup::whole(g);
    // A stalk obeys the Weyl condition when it is trivial on the kernel; sums
    // of irreducibles restricted to the stabiliser are filtered accordingly.
    let pick = |rng: &mut R, h: &Subgroup, k: &Subgroup| {
        let allowed: Vec<QRep> = irreps
            .iter()
            .filter(|r| k.elements().iter().all(|&x| r.matrices[x].is_identity()))
            .cloned()
            .collect();
        random_stalk(rng, &allowed, h, max_dim)
    };
    let exceptional = base.orbits.iter().map(|o| pick(rng, &o.stabilizer, &o.weyl_kernel)).collect();
    let Some(tail) = &base.tail else {
        let n = g.order();
        return EqSheaf::new(base, "random", exceptional, vec![], vec![Stalk::zero(n)], Stalk::zero(n), QMatrix::zeros(0, 0));
    };
    let m = lcm(rng.gen_range(1..=2), tail.pattern_kernels.len());
    let h = tail.head_kernels.len() + rng.gen_range(0..=1);
    let head = (0..h).map(|t| pick(rng, &whole, tail.kernel_at(t))).collect();
    let pattern: Vec<Stalk> = (0..m).map(|j| pick(rng, &whole, tail.kernel_at(h + ((j + m - h % m) % m)))).collect();
    let limit = pick(rng, &whole, &tail.limit_kernel);
    let skeleton = EqSheaf {
        base: base.clone(),
        label: "random".into(),
        exceptional,
        head,
        pattern,
        limit,
        lambda: QMatrix::zeros(0, 0),
    };
    let tails = Stalk {
        dim: skeleton.tail_total(),
        action: (0..g.order()).map(|k| skeleton.tail_action(k)).collect(),
    };
    let hom = stalk_hom(&skeleton.limit, &tails, g);
    let mut lambda = QMatrix::zeros(tails.dim, skeleton.limit.dim);
    for b in hom {
        lambda = &lambda + &b.scale(&q(rng.gen_range(-2..=2)));
    }
    EqSheaf::new(base, "random", skeleton.exceptional, skeleton.head, skeleton.pattern, skeleton.limit, lambda)
}

/// Equivariant maps between two `Γ`-stalks.
pub(crate) fn stalk_hom(a: &Stalk, b: &Stalk, g: &FiniteGroup) -> Vec<QMatrix> {
    let to_rep = |s: &Stalk| QRep { label: String::new(), dim: s.dim, matrices: s.action.clone() };
    rep_hom_space(g, &to_rep(a), &to_rep(b))
}

/// The sheaf `E` with its germ map replaced by `λ + w`, for an equivariant
/// `w` into tails of the same period.
pub fn twist_germ(e: &EqSheaf, w: &QMatrix) -> Result<EqSheaf> {
    EqSheaf::new(
        &e.base,
        format!("{}~", e.label),
        e.exceptional.clone(),
        e.head.clone(),
        e.pattern.clone(),
        e.limit.clone(),
        &e.lambda + w,
    )
}

/// Tails of period `m` with `1` at even residues and `0` at odd ones, in each
/// coordinate of the vector `u` of a period-1 presentation.
pub fn alternating_tail(u: &[Q], m: usize) -> PerTail {
    assert!(m % 2 == 0, "alternating tails need an even period");
    let mut values = Vec::with_capacity(u.len() * m);
    for j in 0..m {
        for x in u {
            values.push(if j % 2 == 0 { x.clone() } else { Q::zero() });
        }
    }
    PerTail { period: m, values }
}

impl PerTail {
    /// Same tail over a longer period.
    pub fn lift(&self, m: usize) -> PerTail {
        assert!(m % self.period == 0);
        let block = self.values.len() / self.period;
        let mut values = Vec::with_capacity(block * m);
        for j in 0..m {
            let r = j % self.period;
            values.extend_from_slice(&self.values[r * block..(r + 1) * block]);
        }
        PerTail { period: m, values }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    /// Equality after lifting both to a common period.
    pub fn same_tail(&self, other: &PerTail) -> bool {
        let m = lcm(self.period, other.period);
        self.lift(m).values == other.lift(m).values
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VanishingAudit {
    pub bases: Vec<(String, crate::cb::Verdict)>,
    pub sheaves: usize,
    pub stalks_checked: usize,
    pub max_length: usize,
    /// `(sheaf number, violation)`
    pub violations: Vec<(usize, VanishingViolation)>,
}

/// Resolves `count` seeded random sheaves, spread round-robin over `bases`,
/// and checks that `Iⁿ` vanishes at points of height below `n`.
pub fn vanishing_audit(bases: &[SheafBase], seed: u64, count: usize, max_stage: usize) -> Result<VanishingAudit> {
    if bases.is_empty() {
        return Err(Error::Parse("no bases".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sheaves: Vec<EqSheaf> = (0..count).map(|i| random_sheaf(&bases[i % bases.len()], &mut rng, 2)).collect::<Result<_>>()?;
    let reports: Vec<Result<(usize, VanishingReport)>> = sheaves
        .par_iter()
        .map(|e| {
            let res = godement_resolution(e, max_stage)?;
            res.verify()?;
            let len = res.length().unwrap_or(max_stage);
            Ok((len, stalk_vanishing_check(&res, &e.base.site_heights()?)?))
        })
        .collect();
    let mut out = VanishingAudit {
        bases: bases
            .iter()
            .map(|b| Ok((b.descriptor.clone(), crate::cb::cb_rank(&b.shell_tree(2)?)?.verdict)))
            .collect::<Result<_>>()?,
        sheaves: count,
        stalks_checked: 0,
        max_length: 0,
        violations: vec![],
    };
    for (i, r) in reports.into_iter().enumerate() {
        let (len, rep) = r?;
        out.stalks_checked += rep.stalks_checked;
        out.max_length = out.max_length.max(len);
        out.violations.extend(rep.violations.into_iter().map(|v| (i, v)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cb::cb_rank;
    use crate::tower::{subgroup_space_tower, GroupTower};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spzp() -> SheafBase {
        SheafBase::spzp(2, 0).unwrap()
    }

    #[test]
    fn constant_sheaf_on_spzp_has_length_one() {
        let base = spzp();
        let c = constant_q(&base);
        let res = godement_resolution(&c, 4).unwrap();
        assert_eq!(res.length(), Some(1));
        let i0 = &res.stages[0];
        assert_eq!(i0.limit().dim, 1 + 2);
        assert_eq!(i0.period(), 2);
        let i1 = &res.stages[1];
        assert!(i1.sites().iter().filter(|s| **s != Site::Limit).all(|s| i1.stalk(*s).dim == 0));
        assert_eq!(i1.limit().dim, 2);
        for (n, d) in res.differentials.iter().enumerate() {
            let tgt = &res.stages[n];
            let src = if n == 0 {
                c.reshape(tgt.head_len(), tgt.period()).unwrap()
            } else {
                res.stages[n - 1].reshape(tgt.head_len(), tgt.period()).unwrap()
            };
            d.check(&src, tgt).unwrap();
        }
        assert!(res.differentials[0].is_injective());
    }

    #[test]
    fn skyscraper_is_its_own_i0() {
        let base = spzp();
        for site in [Site::Limit, Site::Tail(0), Site::Tail(3)] {
            let s = skyscraper_q(&base, site).unwrap();
            let step = godement_i0(&s).unwrap();
            assert!(step.delta.is_isomorphism(), "{site}");
            assert_eq!(godement_resolution(&s, 3).unwrap().length(), Some(0));
        }
    }

    #[test]
    fn finite_base_delta_is_iso() {
        let base = SheafBase::subgroups("sym:3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let e = random_sheaf(&base, &mut rng, 3).unwrap();
            assert!(weyl_check(&e).holds);
            let step = godement_i0(&e).unwrap();
            assert!(step.delta.is_isomorphism());
            assert_eq!(godement_resolution(&e, 3).unwrap().length(), Some(0));
        }
        let z = EqSheaf { label: "zero".into(), ..constant_q(&SheafBase::discrete(0)) };
        assert_eq!(godement_resolution(&z, 2).unwrap().length(), Some(0));
    }

    #[test]
    fn site_heights_match_subgroup_space() {
        let base = spzp();
        let h = base.site_heights().unwrap();
        assert_eq!(h.limit, Some(1));
        assert_eq!(h.isolated_tail, Some(0));
        let tree = subgroup_space_tower(&GroupTower::builtin("pro_p:2", 4).unwrap()).unwrap();
        let report = heights(&tree).unwrap();
        let max = report.max_exact_height();
        assert_eq!(max, h.limit);
        assert_eq!(
            cb_rank(&base.shell_tree(3).unwrap()).unwrap().verdict,
            cb_rank(&tree).unwrap().verdict
        );
        let finite = SheafBase::subgroups("sym:3").unwrap().site_heights().unwrap();
        assert_eq!(finite.orbits, vec![0; 4]);
        assert_eq!(finite.limit, None);
    }

    #[test]
    fn stalk_vanishing_on_random_sheaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for base in [SheafBase::spzp(3, 1).unwrap(), SheafBase::sequence("cyclic:2").unwrap()] {
            let hts = base.site_heights().unwrap();
            for _ in 0..4 {
                let e = random_sheaf(&base, &mut rng, 2).unwrap();
                assert!(weyl_check(&e).holds);
                let res = godement_resolution(&e, 4).unwrap();
                assert!(res.length().unwrap() <= 1);
                let rep = stalk_vanishing_check(&res, &hts).unwrap();
                assert!(rep.violations.is_empty(), "{:?}", rep.violations);
            }
        }
    }

    #[test]
    fn skyscraper_adjunction_at_isolated_points() {
        let base = SheafBase::sequence("cyclic:3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let e = random_sheaf(&base, &mut rng, 3).unwrap();
            for site in [Site::Orbit(0), Site::Tail(0), Site::Tail(2)] {
                let sky = skyscraper_q(&base, site).unwrap();
                let hom = hom_sheaf(&sky, &e).unwrap();
                assert_eq!(hom.dim(), e.stalk(site).fixed_subspace().cols(), "{site}");
            }
        }
    }

    #[test]
    fn skyscraper_at_limit_sees_germ_kernel() {
        let base = spzp();
        let sky = skyscraper_q(&base, Site::Limit).unwrap();
        assert_eq!(hom_sheaf(&sky, &constant_q(&base)).unwrap().dim(), 0);
        let other = skyscraper_q(&base, Site::Limit).unwrap();
        assert_eq!(hom_sheaf(&sky, &other).unwrap().dim(), 1);
        assert_eq!(hom_sheaf(&constant_q(&base), &sky).unwrap().dim(), 1);
    }

    #[test]
    fn hom_of_constant_sheaves() {
        let base = SheafBase::sequence("cyclic:2").unwrap();
        let c = constant_q(&base);
        let hom = hom_sheaf(&c, &c).unwrap();
        assert_eq!(hom.dim(), 2);
        for f in hom.maps() {
            f.check(&hom.source, &hom.target).unwrap();
        }
    }

    #[test]
    fn restrict_extend_and_weyl() {
        let base = SheafBase::subgroups("sym:3").unwrap();
        let c = constant_q(&base);
        let r = restrict_extend(&c, Site::Orbit(1)).unwrap();
        assert_eq!(r.stalk(Site::Orbit(1)).dim, 1);
        assert_eq!(r.stalk(Site::Orbit(0)).dim, 0);
        assert!(weyl_check(&c).holds);
        let g = base.group().clone();
        let regular = QRep::regular(&g);
        let bad = constant_sheaf(&base, &regular).unwrap();
        let rep = weyl_check(&bad);
        assert!(!rep.holds);
        assert!(!rep.failures.contains(&Site::Orbit(0)));
    }

    #[test]
    fn weyl_on_spzp_quotient() {
        let base = SheafBase::spzp(2, 2).unwrap();
        let g = base.group().clone();
        let sign: Vec<QMatrix> = g.elements().map(|x| QMatrix::from_rows(vec![vec![q(if x % 2 == 0 { 1 } else { -1 })]])).collect();
        let rep = QRep::new(&g, "sign", sign).unwrap();
        let c = constant_sheaf(&base, &rep).unwrap();
        let w = weyl_check(&c);
        assert_eq!(w.failures, vec![Site::Tail(0)]);
    }

    #[test]
    fn json_round_trip() {
        let base = SheafBase::sequence("cyclic:2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_sheaf(&base, &mut rng, 2).unwrap();
        let back = EqSheaf::from_json(&e.to_json()).unwrap();
        assert_eq!(e, back);
        assert!(EqSheaf::from_json(&json!({"base": "spzp:2"})).is_err());
    }

    #[test]
    fn kernel_and_cokernel_of_delta() {
        let base = spzp();
        let c = constant_q(&base);
        let step = godement_i0(&c).unwrap();
        let (k, _) = kernel(&step.delta, &step.source).unwrap();
        assert!(k.is_zero());
        let (cok, pi) = cokernel(&step.delta, &step.source, &step.sheaf).unwrap();
        pi.check(&step.sheaf, &cok).unwrap();
        assert!(step.delta.then(&pi).is_zero());
        assert_eq!(cok.limit().dim, 2);
    }

    #[test]
    fn per_tail_lifting() {
        let t = PerTail { period: 1, values: vec![q(1)] };
        assert!(t.same_tail(&t.lift(4)));
        let alt = alternating_tail(&[q(1)], 2);
        assert!(!alt.same_tail(&t));
        assert!(alt.lift(6).values == vec![q(1), q(0), q(1), q(0), q(1), q(0)]);
    }

    #[test]
    fn reshape_preserves_maps() {
        let base = spzp();
        let c = constant_q(&base);
        let r = c.reshape(3, 4).unwrap();
        // one free value at each head point, the rest determined by the germ
        assert_eq!(hom_sheaf(&c, &r).unwrap().dim(), 4);
        assert!(c.reshape(0, 3).is_ok());
        assert!(r.reshape(2, 4).is_err());
    }
}
