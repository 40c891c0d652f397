//! Tree-presented profinite spaces and the Cantor-Bendixson process on them.
//!
//! A [`SpaceTree`] is a finite stage of an inverse system of finite sets. Each
//! node at the deepest level stands for a clopen region of the limit, and the
//! region carries a certificate saying what the process does inside it. Nothing
//! is ever inferred from finite data alone: without a certificate a region is
//! `Unknown` and is kept (pessimistically) in every derivative.
//!
//! Rank follows the convention where the empty space has rank 0 and a
//! non-empty discrete space has rank 1: the rank is the least stage `n` with
//! `X^(n) = X^(n+1)`. This is one more than the convention that counts the
//! last non-empty derivative.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RANK_CONVENTION: &str =
    "rank = least n with X^(n) = X^(n+1); empty space has rank 0, non-empty discrete space rank 1 \
     (one more than the last-non-empty-derivative convention)";

/// What the Cantor-Bendixson process does inside the clopen region below a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionType {
    /// Scattered, with a unique point of maximal height `z`. `Peak(0)` is a
    /// single isolated point.
    Peak(usize),
    /// No isolated points at all.
    Perfect,
    Unknown,
}

impl RegionType {
    pub const SINGLETON: RegionType = RegionType::Peak(0);
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelAction {
    Trivial,
    /// `table[g][x]`
    Table(Vec<Vec<usize>>),
}

impl LevelAction {
    pub fn act(&self, g: usize, x: usize) -> usize {
        match self {
            LevelAction::Trivial => x,
            LevelAction::Table(t) => t[g][x],
        }
    }
}

/// Group actions on every level, compatible with the bonds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeActions {
    pub group_orders: Vec<usize>,
    /// `group_bonds[k]` maps elements of the level `k+1` group to level `k`.
    pub group_bonds: Vec<Vec<usize>>,
    pub levels: Vec<LevelAction>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRef {
    pub level: usize,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceTree {
    sizes: Vec<usize>,
    bonds: Vec<Vec<usize>>,
    actions: Option<TreeActions>,
    regions: Vec<RegionType>,
    /// original index of each surviving node, per level
    ids: Vec<Vec<usize>>,
    labels: Option<Vec<Vec<String>>>,
    stage: usize,
    chain: String,
}

#[derive(Deserialize)]
struct TreeWire {
    sizes: Vec<usize>,
    bonds: Vec<Vec<usize>>,
    #[serde(default)]
    regions: Option<Vec<RegionType>>,
    #[serde(default)]
    chain: Option<String>,
}

impl SpaceTree {
    /// Tree with every region `Unknown`.
    pub fn new(sizes: Vec<usize>, bonds: Vec<Vec<usize>>, chain: impl Into<String>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Parse("a tree needs at least one level".into()));
        }
        if bonds.len() + 1 != sizes.len() {
            return Err(Error::Parse(format!(
                "{} levels need {} bonds, got {}",
                sizes.len(),
                sizes.len() - 1,
                bonds.len()
            )));
        }
        for (k, b) in bonds.iter().enumerate() {
            if b.len() != sizes[k + 1] || b.iter().any(|&y| y >= sizes[k]) {
                return Err(Error::Parse(format!("bond {k} has the wrong shape")));
            }
            let hit: BTreeSet<usize> = b.iter().copied().collect();
            if hit.len() != sizes[k] {
                return Err(Error::Parse(format!("bond {k} is not surjective")));
            }
        }
        let deepest = *sizes.last().unwrap();
        Ok(SpaceTree {
            ids: sizes.iter().map(|&n| (0..n).collect()).collect(),
            regions: vec![RegionType::Unknown; deepest],
            sizes,
            bonds,
            actions: None,
            labels: None,
            stage: 0,
            chain: chain.into(),
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let w: TreeWire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let t = SpaceTree::new(w.sizes, w.bonds, w.chain.unwrap_or_else(|| "user".into()))?;
        match w.regions {
            Some(r) => t.with_regions(r),
            None => Ok(t),
        }
    }

    pub fn with_regions(mut self, regions: Vec<RegionType>) -> Result<Self> {
        if regions.len() != self.sizes[self.depth()] {
            return Err(Error::Parse("one region certificate per deepest node".into()));
        }
        self.regions = regions;
        Ok(self)
    }

    pub fn with_actions(mut self, actions: TreeActions) -> Result<Self> {
        if actions.levels.len() != self.sizes.len()
            || actions.group_orders.len() != self.sizes.len()
            || actions.group_bonds.len() + 1 != self.sizes.len()
        {
            return Err(Error::Parse("actions need one entry per level".into()));
        }
        for (k, a) in actions.levels.iter().enumerate() {
            if let LevelAction::Table(t) = a {
                if t.len() != actions.group_orders[k]
                    || t.iter().any(|row| row.len() != self.sizes[k] || row.iter().any(|&y| y >= self.sizes[k]))
                {
                    return Err(Error::Parse(format!("action table at level {k} has the wrong shape")));
                }
            }
        }
        self.actions = Some(actions);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<Vec<String>>) -> Result<Self> {
        if labels.len() != self.sizes.len() || labels.iter().zip(&self.sizes).any(|(l, &n)| l.len() != n) {
            return Err(Error::Parse("one label per node".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// `n` points, bijective bonds; every region is a single isolated point.
    pub fn discrete(n: usize, depth: usize) -> Self {
        let t = SpaceTree::new(vec![n; depth + 1], vec![(0..n).collect(); depth], format!("discrete:{n}"))
            .expect("constant tree is valid");
        t.with_regions(vec![RegionType::SINGLETON; n]).unwrap()
    }

    /// The empty space.
    pub fn empty() -> Self {
        SpaceTree::new(vec![0], vec![], "empty").unwrap()
    }

    /// Full binary tree (Cantor set). With `certified` every region is perfect,
    /// otherwise every region is unknown.
    pub fn binary(depth: usize, certified: bool) -> Self {
        let sizes: Vec<usize> = (0..=depth).map(|k| 1usize << k).collect();
        let bonds = (0..depth).map(|k| (0..(1usize << (k + 1))).map(|i| i / 2).collect()).collect();
        let t = SpaceTree::new(sizes, bonds, "binary").unwrap();
        if certified {
            let n = t.sizes[depth];
            t.with_regions(vec![RegionType::Perfect; n]).unwrap()
        } else {
            t
        }
    }

    /// Disjoint union; both trees must have the same depth. Actions are dropped.
    pub fn disjoint_union(&self, other: &SpaceTree) -> Result<Self> {
        if self.depth() != other.depth() {
            return Err(Error::Parse("disjoint union needs equal depths".into()));
        }
        let sizes: Vec<usize> = self.sizes.iter().zip(&other.sizes).map(|(a, b)| a + b).collect();
        let bonds = (0..self.depth())
            .map(|k| {
                let off = self.sizes[k];
                self.bonds[k].iter().copied().chain(other.bonds[k].iter().map(|&y| y + off)).collect()
            })
            .collect();
        let mut regions = self.regions.clone();
        regions.extend_from_slice(&other.regions);
        SpaceTree::new(sizes, bonds, format!("{}+{}", self.chain, other.chain))?.with_regions(regions)
    }

    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn bond(&self, k: usize) -> &[usize] {
        &self.bonds[k]
    }

    pub fn regions(&self) -> &[RegionType] {
        &self.regions
    }

    pub fn actions(&self) -> Option<&TreeActions> {
        self.actions.as_ref()
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn chain(&self) -> &str {
        &self.chain
    }

    pub fn is_empty(&self) -> bool {
        self.sizes[self.depth()] == 0
    }

    pub fn point(&self, level: usize, i: usize) -> PointRef {
        let index = self.ids[level][i];
        PointRef {
            level,
            index,
            label: self.labels.as_ref().map(|l| l[level][index].clone()),
        }
    }

    /// Ancestor at `level` of deepest node `i`.
    pub fn ancestor(&self, level: usize, i: usize) -> usize {
        let mut x = i;
        for k in (level..self.depth()).rev() {
            x = self.bonds[k][x];
        }
        x
    }

    /// Number of children of each node at `level < depth`.
    pub fn fiber_sizes(&self, level: usize) -> Vec<usize> {
        let mut c = vec![0; self.sizes[level]];
        for &y in &self.bonds[level] {
            c[y] += 1;
        }
        c
    }

    /// Subtree spanned by the deepest nodes in `keep`, with new region labels.
    fn restrict(&self, keep: &[usize], regions: Vec<RegionType>) -> SpaceTree {
        let d = self.depth();
        let mut alive: Vec<Vec<bool>> = self.sizes.iter().map(|&n| vec![false; n]).collect();
        for &i in keep {
            alive[d][i] = true;
        }
        for k in (0..d).rev() {
            for (x, &y) in self.bonds[k].iter().enumerate() {
                if alive[k + 1][x] {
                    alive[k][y] = true;
                }
            }
        }
        let new_index: Vec<Vec<Option<usize>>> = alive
            .iter()
            .map(|a| {
                let mut next = 0;
                a.iter()
                    .map(|&b| {
                        b.then(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let sizes: Vec<usize> = alive.iter().map(|a| a.iter().filter(|&&b| b).count()).collect();
        let ids: Vec<Vec<usize>> = (0..=d)
            .map(|k| (0..self.sizes[k]).filter(|&x| alive[k][x]).map(|x| self.ids[k][x]).collect())
            .collect();
        let bonds: Vec<Vec<usize>> = (0..d)
            .map(|k| {
                (0..self.sizes[k + 1])
                    .filter(|&x| alive[k + 1][x])
                    .map(|x| new_index[k][self.bonds[k][x]].unwrap())
                    .collect()
            })
            .collect();
        let actions = self.actions.as_ref().and_then(|a| {
            let mut levels = Vec::new();
            for k in 0..=d {
                match &a.levels[k] {
                    LevelAction::Trivial => levels.push(LevelAction::Trivial),
                    LevelAction::Table(t) => {
                        let mut nt = Vec::with_capacity(t.len());
                        for row in t {
                            let mut nrow = Vec::with_capacity(sizes[k]);
                            for x in (0..self.sizes[k]).filter(|&x| alive[k][x]) {
                                nrow.push(new_index[k][row[x]]?);
                            }
                            nt.push(nrow);
                        }
                        levels.push(LevelAction::Table(nt));
                    }
                }
            }
            Some(TreeActions { group_orders: a.group_orders.clone(), group_bonds: a.group_bonds.clone(), levels })
        });
        SpaceTree {
            sizes,
            bonds,
            actions,
            regions,
            ids,
            labels: self.labels.clone(),
            stage: self.stage + 1,
            chain: self.chain.clone(),
        }
    }

    fn orbits_at(&self, level: usize) -> Vec<usize> {
        let n = self.sizes[level];
        let mut orbit: Vec<usize> = (0..n).collect();
        if let Some(a) = &self.actions {
            if let LevelAction::Table(t) = &a.levels[level] {
                fn find(p: &mut [usize], x: usize) -> usize {
                    let mut r = x;
                    while p[r] != r {
                        r = p[r];
                    }
                    let mut y = x;
                    while p[y] != r {
                        let next = p[y];
                        p[y] = r;
                        y = next;
                    }
                    r
                }
                for row in t {
                    for (x, &y) in row.iter().enumerate() {
                        let (rx, ry) = (find(&mut orbit, x), find(&mut orbit, y));
                        if rx != ry {
                            orbit[rx.max(ry)] = rx.min(ry);
                        }
                    }
                }
                for x in 0..n {
                    orbit[x] = find(&mut orbit, x);
                }
            }
        }
        orbit
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolatedPoints {
    pub stage: usize,
    pub isolated: Vec<PointRef>,
    pub undecided: Vec<PointRef>,
}

/// Deepest nodes whose region is currently a single isolated point.
pub fn isolated_points(x: &SpaceTree) -> IsolatedPoints {
    let d = x.depth();
    let mut isolated = Vec::new();
    let mut undecided = Vec::new();
    for (i, r) in x.regions.iter().enumerate() {
        match r {
            RegionType::Peak(0) => isolated.push(x.point(d, i)),
            RegionType::Unknown => undecided.push(x.point(d, i)),
            _ => {}
        }
    }
    IsolatedPoints { stage: x.stage, isolated, undecided }
}

/// One step of the process. Undecided regions are retained.
pub fn derivative(x: &SpaceTree) -> SpaceTree {
    let mut keep = Vec::new();
    let mut regions = Vec::new();
    for (i, r) in x.regions.iter().enumerate() {
        match *r {
            RegionType::Peak(0) => {}
            RegionType::Peak(z) => {
                keep.push(i);
                regions.push(RegionType::Peak(z - 1));
            }
            other => {
                keep.push(i);
                regions.push(other);
            }
        }
    }
    x.restrict(&keep, regions)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exact(usize),
    /// `hi = None` means no upper bound can be certified from the data.
    Interval { lo: usize, hi: Option<usize> },
    PerfectHullDetected { rank: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub remaining: usize,
    pub removed: Vec<PointRef>,
    /// deepest nodes whose region still contains points removed at this stage
    pub shrinking: Vec<PointRef>,
    pub undecided: Vec<PointRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCertificate {
    pub verdict: Verdict,
    pub trace: Vec<StageRecord>,
    pub chain: String,
    pub depth: usize,
    pub convention: String,
}

pub fn cb_rank(x: &SpaceTree) -> Result<RankCertificate> {
    let depth = x.depth();
    let mut cur = x.clone();
    let mut trace = Vec::new();
    loop {
        let d = cur.depth();
        let peaks = cur.regions.iter().any(|r| matches!(r, RegionType::Peak(_)));
        if !peaks {
            let s = cur.stage;
            let unknown = cur.regions.contains(&RegionType::Unknown);
            let perfect = cur.regions.contains(&RegionType::Perfect);
            let verdict = if cur.is_empty() {
                Verdict::Exact(s)
            } else if unknown {
                Verdict::Interval { lo: s, hi: None }
            } else {
                debug_assert!(perfect);
                Verdict::PerfectHullDetected { rank: s }
            };
            if !cur.is_empty() {
                trace.push(StageRecord {
                    stage: s,
                    remaining: cur.sizes[d],
                    removed: vec![],
                    shrinking: vec![],
                    undecided: isolated_points(&cur).undecided,
                });
            }
            return Ok(RankCertificate {
                verdict,
                trace,
                chain: x.chain.clone(),
                depth,
                convention: RANK_CONVENTION.to_string(),
            });
        }
        if cur.stage > depth {
            return Err(Error::DepthExhausted { depth });
        }
        let iso = isolated_points(&cur);
        let shrinking = cur
            .regions
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, RegionType::Peak(z) if *z > 0))
            .map(|(i, _)| cur.point(d, i))
            .collect();
        trace.push(StageRecord {
            stage: cur.stage,
            remaining: cur.sizes[d],
            removed: iso.isolated,
            shrinking,
            undecided: iso.undecided,
        });
        cur = derivative(&cur);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Height {
    Exact(usize),
    /// no certificate; the node was kept through every computed stage
    Undecided { retained_through: usize },
    Hull,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightEntry {
    pub point: PointRef,
    /// height of the top point of the region below this node
    pub height: Height,
    /// largest height among the other points of the region, if any
    pub hidden_max_height: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightReport {
    pub entries: Vec<HeightEntry>,
    pub depth: usize,
    pub verdict: Verdict,
}

impl HeightReport {
    pub fn height_of(&self, index: usize) -> Option<&Height> {
        self.entries.iter().find(|e| e.point.index == index).map(|e| &e.height)
    }

    pub fn max_exact_height(&self) -> Option<usize> {
        self.entries
            .iter()
            .filter_map(|e| match e.height {
                Height::Exact(h) => Some(h),
                _ => None,
            })
            .max()
    }
}

pub fn heights(x: &SpaceTree) -> Result<HeightReport> {
    let cert = cb_rank(x)?;
    let reached = cert.trace.last().map_or(x.stage, |r| r.stage);
    let d = x.depth();
    let entries = x
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (height, hidden) = match *r {
                RegionType::Peak(z) => {
                    (Height::Exact(z + x.stage), (z > 0).then(|| z + x.stage - 1))
                }
                RegionType::Perfect => (Height::Hull, None),
                RegionType::Unknown => (Height::Undecided { retained_through: reached }, None),
            };
            HeightEntry { point: x.point(d, i), height, hidden_max_height: hidden }
        })
        .collect();
    Ok(HeightReport { entries, depth: d, verdict: cert.verdict })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScatteredSplit {
    /// (point, height) for every node with a certified height
    pub scattered: Vec<(PointRef, usize)>,
    pub hull: Vec<PointRef>,
    pub undecided: Vec<PointRef>,
    /// `None` when undecided regions leave the question open
    pub hull_empty: Option<bool>,
    pub verdict: Verdict,
}

pub fn scattered_split(x: &SpaceTree) -> Result<ScatteredSplit> {
    let rep = heights(x)?;
    let mut scattered = Vec::new();
    let mut hull = Vec::new();
    let mut undecided = Vec::new();
    for e in rep.entries {
        match e.height {
            Height::Exact(h) => scattered.push((e.point, h)),
            Height::Hull => hull.push(e.point),
            Height::Undecided { .. } => undecided.push(e.point),
        }
    }
    let hull_empty = if !hull.is_empty() {
        Some(false)
    } else if undecided.is_empty() {
        Some(true)
    } else {
        None
    };
    Ok(ScatteredSplit { scattered, hull, undecided, hull_empty, verdict: rep.verdict })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub ok: bool,
    pub actions_valid: bool,
    pub orbit_invariant: bool,
    pub other_orbits_nearby: bool,
    pub checked_to_depth: usize,
    pub violations: Vec<String>,
}

/// Heights are constant on orbits, and every neighbourhood of a point of
/// positive height meets another orbit, at every computed level.
pub fn check_equivariant_heights(x: &SpaceTree) -> Result<EquivarianceReport> {
    let d = x.depth();
    let mut violations = Vec::new();
    let mut actions_valid = true;
    if let Some(a) = &x.actions {
        for k in 0..=d {
            if let LevelAction::Table(t) = &a.levels[k] {
                for (g, row) in t.iter().enumerate() {
                    let img: BTreeSet<usize> = row.iter().copied().collect();
                    if img.len() != x.sizes[k] {
                        actions_valid = false;
                        violations.push(format!("level {k}: element {g} does not act bijectively"));
                    }
                }
            }
        }
        if actions_valid {
            'bonds: for k in 0..d {
                for g in 0..a.group_orders[k + 1] {
                    let pg = a.group_bonds[k][g];
                    for p in 0..x.sizes[k + 1] {
                        let lhs = x.bonds[k][a.levels[k + 1].act(g, p)];
                        let rhs = a.levels[k].act(pg, x.bonds[k][p]);
                        if lhs != rhs {
                            actions_valid = false;
                            violations.push(format!(
                                "bond {k} is not equivariant at element {g}, point {}",
                                x.ids[k + 1][p]
                            ));
                            break 'bonds;
                        }
                    }
                }
            }
        }
    }
    let rep = heights(x)?;
    let mut orbit_invariant = true;
    if let Some(a) = &x.actions {
        if actions_valid {
            for g in 0..a.group_orders[d] {
                for i in 0..x.sizes[d] {
                    let j = a.levels[d].act(g, i);
                    if rep.entries[i].height != rep.entries[j].height {
                        orbit_invariant = false;
                        violations.push(format!(
                            "heights differ on the orbit of point {}",
                            x.ids[d][i]
                        ));
                    }
                }
            }
        }
    }
    let mut other_orbits_nearby = true;
    let orbits = x.orbits_at(d);
    for (i, e) in rep.entries.iter().enumerate() {
        if !matches!(e.height, Height::Exact(h) if h > 0) {
            continue;
        }
        for level in 0..d {
            let a = x.ancestor(level, i);
            let met: BTreeSet<usize> =
                (0..x.sizes[d]).filter(|&j| x.ancestor(level, j) == a).map(|j| orbits[j]).collect();
            if met.len() < 2 {
                other_orbits_nearby = false;
                violations.push(format!(
                    "point {} of positive height sees a single orbit at level {level}",
                    x.ids[d][i]
                ));
            }
        }
    }
    violations.dedup();
    Ok(EquivarianceReport {
        ok: actions_valid && orbit_invariant && other_orbits_nearby,
        actions_valid,
        orbit_invariant,
        other_orbits_nearby,
        checked_to_depth: d,
        violations,
    })
}

/// Deepest nodes grouped by their certified region, for summaries.
pub fn region_census(x: &SpaceTree) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in &x.regions {
        let key = match r {
            RegionType::Peak(z) => format!("peak:{z}"),
            RegionType::Perfect => "perfect".into(),
            RegionType::Unknown => "unknown".into(),
        };
        *m.entry(key).or_insert(0) += 1;
    }
    m
}

/// Consistency of a rank certificate read back from JSON: consecutive
/// stages, each stage removing exactly its isolated nodes, and a verdict that
/// matches how the trace ends. Returns the problems found.
pub fn verify_rank_certificate(cert: &RankCertificate) -> Vec<String> {
    let mut problems = Vec::new();
    if cert.convention != RANK_CONVENTION {
        problems.push("unknown rank convention".to_string());
    }
    for (k, r) in cert.trace.iter().enumerate() {
        if r.stage != cert.trace[0].stage + k {
            problems.push(format!("stage {} out of order", r.stage));
        }
        if r.removed.iter().any(|p| r.shrinking.contains(p)) {
            problems.push(format!("stage {}: a removed node is also shrinking", r.stage));
        }
        if let Some(next) = cert.trace.get(k + 1) {
            if next.remaining + r.removed.len() != r.remaining {
                problems.push(format!("stage {}: {} - {} != {}", r.stage, r.remaining, r.removed.len(), next.remaining));
            }
        }
    }
    let last = cert.trace.last();
    let ok = match (&cert.verdict, last) {
        (Verdict::Exact(0), None) => true,
        (Verdict::Exact(n), Some(r)) => {
            r.stage + 1 == *n && r.remaining == r.removed.len() && r.undecided.is_empty() && r.shrinking.is_empty()
        }
        (Verdict::Interval { lo, .. }, Some(r)) => r.stage == *lo && !r.undecided.is_empty(),
        (Verdict::Interval { .. }, None) => false,
        (Verdict::PerfectHullDetected { rank }, Some(r)) => r.stage == *rank && r.removed.is_empty() && r.remaining > 0,
        _ => false,
    };
    if !ok {
        problems.push(format!("verdict {:?} does not match the end of the trace", cert.verdict));
    }
    problems
}
