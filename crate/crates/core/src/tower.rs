//! Profinite groups as towers of finite quotients, and the tree of subgroup
//! spaces `S(G/N_k)` built from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cb::{LevelAction, RegionType, SpaceTree, TreeActions};
use crate::error::{Error, Result};
use crate::group::{FiniteGroup, GroupHom, Subgroup, SubgroupLattice};

pub const DEFAULT_DEPTH: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerFamily {
    /// `Z/p^k` with reduction bonds.
    ProP(usize),
    /// Trivial group at level 0, then the given group with identity bonds.
    Finite(String),
    Trivial,
    Product(Vec<TowerFamily>),
    User,
}

impl fmt::Display for TowerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TowerFamily::ProP(p) => write!(f, "pro_p:{p}"),
            TowerFamily::Finite(s) => write!(f, "finite:{s}"),
            TowerFamily::Trivial => write!(f, "trivial"),
            TowerFamily::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(ToString::to_string).collect();
                write!(f, "prod:{}", parts.join(","))
            }
            TowerFamily::User => write!(f, "user"),
        }
    }
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl TowerFamily {
    /// `pro_p:2`, `trivial`, `finite:sym:3`, `prod:pro_p:3,pro_p:2`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("prod:") {
            let parts: Result<Vec<TowerFamily>> = rest.split(',').map(TowerFamily::parse).collect();
            let parts = parts?;
            if parts.len() < 2 || parts.iter().any(|p| matches!(p, TowerFamily::Product(_))) {
                return Err(Error::UnknownFamily(s.to_string()));
            }
            return Ok(TowerFamily::Product(parts));
        }
        if s == "trivial" {
            return Ok(TowerFamily::Trivial);
        }
        if let Some(sel) = s.strip_prefix("finite:") {
            FiniteGroup::from_selector(sel)?;
            return Ok(TowerFamily::Finite(sel.to_string()));
        }
        if let Some(p) = s.strip_prefix("pro_p:") {
            let p: usize = p.parse().map_err(|_| Error::UnknownFamily(s.to_string()))?;
            if !is_prime(p) {
                return Err(Error::UnknownFamily(format!("{s}: {p} is not prime")));
            }
            return Ok(TowerFamily::ProP(p));
        }
        Err(Error::UnknownFamily(s.to_string()))
    }

    fn factors(&self) -> Vec<TowerFamily> {
        match self {
            TowerFamily::Product(fs) => fs.clone(),
            other => vec![other.clone()],
        }
    }

    fn level_group(&self, k: usize) -> Result<FiniteGroup> {
        match self {
            TowerFamily::ProP(p) => {
                let n = p
                    .checked_pow(k as u32)
                    .filter(|&n| n <= 1 << 24)
                    .ok_or(Error::Capacity { what: format!("order of Z/{p}^{k}"), bound: 1 << 24 })?;
                Ok(FiniteGroup::cyclic(n))
            }
            TowerFamily::Finite(sel) if k > 0 => FiniteGroup::from_selector(sel),
            TowerFamily::Finite(_) | TowerFamily::Trivial => Ok(FiniteGroup::trivial()),
            TowerFamily::Product(fs) => {
                let mut g = fs[0].level_group(k)?;
                for f in &fs[1..] {
                    g = g.direct_product(&f.level_group(k)?)?;
                }
                Ok(g)
            }
            TowerFamily::User => Err(Error::UnknownFamily("user towers have no generator".into())),
        }
    }

    /// Element map `level k+1 -> level k`.
    fn level_bond(&self, k: usize, upper: &FiniteGroup, lower: &FiniteGroup) -> Vec<usize> {
        match self {
            TowerFamily::ProP(_) => (0..upper.order()).map(|x| x % lower.order()).collect(),
            TowerFamily::Finite(_) if k == 0 => vec![0; upper.order()],
            TowerFamily::Finite(_) | TowerFamily::Trivial => (0..upper.order()).collect(),
            TowerFamily::Product(fs) => {
                let parts: Vec<(usize, usize, Vec<usize>)> = fs
                    .iter()
                    .map(|f| {
                        let u = f.level_group(k + 1).expect("factor level exists");
                        let l = f.level_group(k).expect("factor level exists");
                        (u.order(), l.order(), f.level_bond(k, &u, &l))
                    })
                    .collect();
                (0..upper.order())
                    .map(|x| {
                        let mut rest = x;
                        let mut digits = vec![0; parts.len()];
                        for (j, (uo, _, _)) in parts.iter().enumerate().rev() {
                            digits[j] = rest % uo;
                            rest /= uo;
                        }
                        parts.iter().zip(&digits).fold(0, |acc, ((_, lo, b), &d)| acc * lo + b[d])
                    })
                    .collect()
            }
            TowerFamily::User => unreachable!(),
        }
    }

    /// The cofinal chain of normal subgroups this family uses.
    fn chain_text(&self) -> String {
        match self {
            TowerFamily::ProP(p) => format!("N_k = {p}^k Z_{p}"),
            TowerFamily::Finite(sel) => format!("N_0 = G, N_k = 1 for k >= 1, G = {sel}"),
            TowerFamily::Trivial => "N_k = 1".into(),
            TowerFamily::Product(fs) => {
                fs.iter().map(|f| format!("({})", f.chain_text())).collect::<Vec<_>>().join(" x ")
            }
            TowerFamily::User => "user-supplied levels".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroupTower {
    levels: Vec<FiniteGroup>,
    bonds: Vec<GroupHom>,
    family: TowerFamily,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GroupRef {
    Selector(String),
    Table(serde_json::Value),
}

#[derive(Deserialize)]
struct TowerWire {
    levels: Vec<GroupRef>,
    bonds: Vec<Vec<usize>>,
    #[serde(default)]
    family: Option<String>,
}

impl GroupTower {
    pub fn new(levels: Vec<FiniteGroup>, bonds: Vec<Vec<usize>>, family: TowerFamily) -> Result<Self> {
        if levels.is_empty() || levels[0].order() != 1 {
            return Err(Error::InvalidGroup("level 0 of a tower must be the trivial group".into()));
        }
        if bonds.len() + 1 != levels.len() {
            return Err(Error::InvalidHom("one bond per pair of adjacent levels".into()));
        }
        let mut homs = Vec::with_capacity(bonds.len());
        for (k, b) in bonds.into_iter().enumerate() {
            let h = GroupHom::new(&levels[k + 1], &levels[k], b)?;
            if !h.is_surjective() {
                return Err(Error::InvalidHom(format!("bond {k} is not surjective")));
            }
            homs.push(h);
        }
        Ok(GroupTower { levels, bonds: homs, family })
    }

    pub fn builtin(family: &str, depth: usize) -> Result<Self> {
        builtin_tower(&TowerFamily::parse(family)?, depth)
    }

    /// A user tower. A declared family is honoured only if the levels and bonds
    /// coincide with the built-in tower of that family.
    pub fn from_json(s: &str) -> Result<Self> {
        let w: TowerWire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let levels: Result<Vec<FiniteGroup>> = w
            .levels
            .iter()
            .map(|g| match g {
                GroupRef::Selector(s) => FiniteGroup::from_selector(s),
                GroupRef::Table(v) => FiniteGroup::from_json(&v.to_string()),
            })
            .collect();
        let depth = w.bonds.len();
        let t = GroupTower::new(levels?, w.bonds, TowerFamily::User)?;
        match w.family {
            None => Ok(t),
            Some(f) => {
                let b = GroupTower::builtin(&f, depth)?;
                let same = t.levels.iter().zip(&b.levels).all(|(x, y)| x.table() == y.table())
                    && t.bonds.iter().zip(&b.bonds).all(|(x, y)| x.table() == y.table());
                if same {
                    Ok(GroupTower { family: b.family, ..t })
                } else {
                    Err(Error::InvalidGroup(format!("tower does not match declared family {f}")))
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &FiniteGroup {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[FiniteGroup] {
        &self.levels
    }

    pub fn bond(&self, k: usize) -> &GroupHom {
        &self.bonds[k]
    }

    pub fn family(&self) -> &TowerFamily {
        &self.family
    }

    pub fn level_orders(&self) -> Vec<usize> {
        self.levels.iter().map(FiniteGroup::order).collect()
    }

    /// Identifier of the cofinal chain, recorded in certificates.
    pub fn chain(&self) -> String {
        format!("{} [{}], k = 0..={}", self.family, self.family.chain_text(), self.depth())
    }

    /// Composite bond `level hi -> level lo`.
    pub fn composite_bond(&self, hi: usize, lo: usize) -> Vec<usize> {
        assert!(lo <= hi && hi <= self.depth());
        let mut map: Vec<usize> = self.levels[hi].elements().collect();
        for k in (lo..hi).rev() {
            for x in map.iter_mut() {
                *x = self.bonds[k].apply(*x);
            }
        }
        map
    }
}

pub fn builtin_tower(family: &TowerFamily, depth: usize) -> Result<GroupTower> {
    if matches!(family, TowerFamily::User) {
        return Err(Error::UnknownFamily("user".into()));
    }
    let levels: Result<Vec<FiniteGroup>> = (0..=depth).map(|k| family.level_group(k)).collect();
    let levels = levels?;
    let bonds = (0..depth).map(|k| family.level_bond(k, &levels[k + 1], &levels[k])).collect();
    GroupTower::new(levels, bonds, family.clone())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupPoint {
    pub level: usize,
    pub subgroup: Subgroup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableSingleton,
    Unstable,
    Unknown,
}

/// The subgroup-space tree together with the per-level lattices it was built from.
#[derive(Clone, Debug)]
pub struct SubgroupSpace {
    pub tree: SpaceTree,
    pub lattices: Vec<SubgroupLattice>,
    /// `bonds[k][i]`: index at level `k` of the image of subgroup `i` of level `k+1`
    pub bonds: Vec<Vec<usize>>,
}

pub fn subgroup_space_tower(t: &GroupTower) -> Result<SpaceTree> {
    Ok(subgroup_space(t)?.tree)
}

pub fn subgroup_space(t: &GroupTower) -> Result<SubgroupSpace> {
    let lattices: Result<Vec<SubgroupLattice>> = t.levels.iter().map(SubgroupLattice::new).collect();
    let lattices = lattices?;
    let bonds: Vec<Vec<usize>> = (0..t.depth())
        .map(|k| {
            lattices[k + 1]
                .subgroups()
                .iter()
                .map(|h| {
                    lattices[k]
                        .index_of(&t.bonds[k].image(h))
                        .expect("image of a subgroup is a subgroup")
                })
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = lattices.iter().map(SubgroupLattice::len).collect();
    let labels: Vec<Vec<String>> = (0..=t.depth())
        .map(|k| {
            lattices[k]
                .subgroups()
                .iter()
                .enumerate()
                .map(|(i, h)| subgroup_label(&t.family, &t.levels[k], h, i))
                .collect()
        })
        .collect();
    let actions = TreeActions {
        group_orders: t.level_orders(),
        group_bonds: t.bonds.iter().map(|b| b.table().to_vec()).collect(),
        levels: (0..=t.depth())
            .map(|k| {
                if t.levels[k].is_abelian() {
                    LevelAction::Trivial
                } else {
                    LevelAction::Table(
                        t.levels[k]
                            .elements()
                            .map(|g| (0..lattices[k].len()).map(|s| lattices[k].conj(g, s)).collect())
                            .collect(),
                    )
                }
            })
            .collect(),
    };
    let regions = region_certificates(t, &lattices, &bonds);
    let tree = SpaceTree::new(sizes, bonds.clone(), t.chain())?
        .with_labels(labels)?
        .with_actions(actions)?
        .with_regions(regions)?;
    Ok(SubgroupSpace { tree, lattices, bonds })
}

fn subgroup_label(family: &TowerFamily, g: &FiniteGroup, h: &Subgroup, i: usize) -> String {
    if let TowerFamily::ProP(p) = family {
        if h.order() == 1 {
            return "0".into();
        }
        let mut idx = 0;
        let mut q = g.order() / h.order();
        while q > 1 {
            q /= p;
            idx += 1;
        }
        return format!("{p}^{idx}");
    }
    format!("#{i} (order {})", h.order())
}

/// Family lemma: predicted region type of a subgroup at level `k`, or `None`
/// when no lemma applies.
fn predicted_region(t: &GroupTower, k: usize, h: &Subgroup) -> Option<RegionType> {
    let factors = t.family.factors();
    if factors.iter().all(|f| matches!(f, TowerFamily::Trivial)) {
        return Some(RegionType::SINGLETON);
    }
    if k == 0 || factors.iter().any(|f| matches!(f, TowerFamily::User | TowerFamily::Product(_))) {
        return None;
    }
    // subgroups of a product split only when factor orders are coprime
    let primes: Vec<usize> = factors
        .iter()
        .filter_map(|f| if let TowerFamily::ProP(p) = f { Some(*p) } else { None })
        .collect();
    let mut sorted = primes.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != primes.len() {
        return None;
    }
    let orders: Vec<usize> = factors.iter().map(|f| f.level_group(k).map(|g| g.order())).collect::<Result<_>>().ok()?;
    for (f, &o) in factors.iter().zip(&orders) {
        if matches!(f, TowerFamily::Finite(_)) && primes.iter().any(|p| o % p == 0) {
            return None;
        }
    }
    let mut proj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); factors.len()];
    for &x in h.elements() {
        let mut rest = x;
        for j in (0..factors.len()).rev() {
            proj[j].insert(rest % orders[j]);
            rest /= orders[j];
        }
    }
    if proj.iter().map(|p| p.len()).product::<usize>() != h.order() {
        return None;
    }
    let z = factors
        .iter()
        .zip(&proj)
        .filter(|(f, p)| matches!(f, TowerFamily::ProP(_)) && p.len() == 1)
        .count();
    Some(RegionType::Peak(z))
}

/// Deepest-level region certificates, checked against every computed fiber:
/// a singleton has exactly one child, itself a singleton; a peak of height
/// `z` has exactly one child of height `z` and every other child lower.
fn region_certificates(
    t: &GroupTower,
    lattices: &[SubgroupLattice],
    bonds: &[Vec<usize>],
) -> Vec<RegionType> {
    let d = t.depth();
    let unknown = vec![RegionType::Unknown; lattices[d].len()];
    let predicted: Option<Vec<Vec<RegionType>>> = (0..=d)
        .map(|k| {
            if k < d && !(k >= 1 || matches!(t.family, TowerFamily::Trivial)) {
                return Some(vec![]);
            }
            lattices[k].subgroups().iter().map(|h| predicted_region(t, k, h)).collect()
        })
        .collect();
    let Some(predicted) = predicted else { return unknown };
    for k in 0..d {
        if predicted[k].is_empty() {
            continue;
        }
        let mut children: Vec<Vec<RegionType>> = vec![vec![]; lattices[k].len()];
        for (i, &y) in bonds[k].iter().enumerate() {
            children[y].push(predicted[k + 1][i]);
        }
        for (parent, kids) in predicted[k].iter().zip(&children) {
            let RegionType::Peak(z) = *parent else { return unknown };
            let same = kids.iter().filter(|r| **r == RegionType::Peak(z)).count();
            let lower = kids.iter().filter(|r| matches!(r, RegionType::Peak(w) if *w < z)).count();
            let ok = if z == 0 { kids.len() == 1 && same == 1 } else { same == 1 && same + lower == kids.len() };
            if !ok {
                return unknown;
            }
        }
    }
    predicted[d].clone()
}

/// Whether a point of the subgroup space is certifiably isolated in the limit.
pub fn stability_oracle(t: &GroupTower, x: &SubgroupPoint) -> Result<Stability> {
    if x.level > t.depth() {
        return Err(Error::Unsupported(format!("level {} beyond depth {}", x.level, t.depth())));
    }
    let space = subgroup_space(t)?;
    let start = space.lattices[x.level]
        .index_of(&x.subgroup)
        .ok_or_else(|| Error::NotSubgroup(format!("not a subgroup of level {}", x.level)))?;
    let mut frontier = vec![start];
    let mut counts = vec![1usize];
    for k in x.level..t.depth() {
        frontier = (0..space.bonds[k].len()).filter(|&i| frontier.contains(&space.bonds[k][i])).collect();
        counts.push(frontier.len());
    }
    let lemma = predicted_region(t, x.level, &x.subgroup) == Some(RegionType::SINGLETON);
    if lemma && counts.iter().all(|&c| c == 1) {
        return Ok(Stability::StableSingleton);
    }
    if counts.len() > 1 && counts.windows(2).all(|w| w[1] > w[0]) {
        return Ok(Stability::Unstable);
    }
    Ok(Stability::Unknown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cb::{cb_rank, Verdict};
    use crate::group::generate;

    #[test]
    fn builtin_level_orders() {
        assert_eq!(GroupTower::builtin("pro_p:2", 3).unwrap().level_orders(), vec![1, 2, 4, 8]);
        assert_eq!(GroupTower::builtin("trivial", 3).unwrap().level_orders(), vec![1, 1, 1, 1]);
        assert_eq!(
            GroupTower::builtin("prod:pro_p:3,pro_p:2", 2).unwrap().level_orders(),
            vec![1, 6, 36]
        );
        assert!(GroupTower::builtin("pro_p:4", 2).is_err());
        assert!(GroupTower::builtin("nope", 2).is_err());
    }

    #[test]
    fn pro_p_subgroup_space_sizes_and_fibers() {
        let t = GroupTower::builtin("pro_p:3", 4).unwrap();
        let s = subgroup_space(&t).unwrap();
        assert_eq!(s.tree.sizes(), &[1, 2, 3, 4, 5]);
        for k in 1..4 {
            let zero = s.lattices[k].index_of(&Subgroup::trivial(t.level(k))).unwrap();
            assert_eq!(s.tree.fiber_sizes(k)[zero], 2);
        }
    }

    #[test]
    fn stability_examples() {
        let t = GroupTower::builtin("pro_p:2", 6).unwrap();
        let g3 = t.level(3);
        let p1 = SubgroupPoint { level: 3, subgroup: generate(g3, &[2]) };
        assert_eq!(stability_oracle(&t, &p1).unwrap(), Stability::StableSingleton);
        let zero = SubgroupPoint { level: 3, subgroup: Subgroup::trivial(g3) };
        assert_eq!(stability_oracle(&t, &zero).unwrap(), Stability::Unstable);
        let json = serde_json::json!({
            "levels": ["trivial", "cyclic:2", "cyclic:4"],
            "bonds": [[0, 0], [0, 1, 0, 1]],
        });
        let u = GroupTower::from_json(&json.to_string()).unwrap();
        let p = SubgroupPoint { level: 1, subgroup: Subgroup::whole(u.level(1)) };
        assert_eq!(stability_oracle(&u, &p).unwrap(), Stability::Unknown);
    }

    #[test]
    fn pro_p_rank_two_and_products() {
        for p in [2, 3, 5] {
            let t = GroupTower::builtin(&format!("pro_p:{p}"), 6).unwrap();
            let c = cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap();
            assert_eq!(c.verdict, Verdict::Exact(2), "p = {p}");
        }
        let t = GroupTower::builtin("prod:pro_p:3,pro_p:2", 3).unwrap();
        let c = cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap();
        assert_eq!(c.verdict, Verdict::Exact(3));
        let t = GroupTower::builtin("prod:pro_p:2,finite:cyclic:3", 3).unwrap();
        assert_eq!(cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap().verdict, Verdict::Exact(2));
        // equal primes: subgroups do not split, no certificate
        let t = GroupTower::builtin("prod:pro_p:2,finite:cyclic:2", 3).unwrap();
        assert!(matches!(
            cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap().verdict,
            Verdict::Interval { .. }
        ));
    }

    #[test]
    fn finite_and_trivial_towers_are_discrete() {
        let t = GroupTower::builtin("trivial", 2).unwrap();
        assert_eq!(cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap().verdict, Verdict::Exact(1));
        let t = GroupTower::builtin("finite:sym:3", 2).unwrap();
        assert_eq!(cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap().verdict, Verdict::Exact(1));
        let t = GroupTower::builtin("pro_p:2", 0).unwrap();
        assert!(matches!(
            cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap().verdict,
            Verdict::Interval { .. }
        ));
    }

    #[test]
    fn declared_family_must_match() {
        let ok = serde_json::json!({
            "levels": ["trivial", "cyclic:2", "cyclic:4"],
            "bonds": [[0, 0], [0, 1, 0, 1]],
            "family": "pro_p:2",
        });
        assert_eq!(GroupTower::from_json(&ok.to_string()).unwrap().family(), &TowerFamily::ProP(2));
        let bad = serde_json::json!({
            "levels": ["trivial", "cyclic:2", "prod:cyclic:2,cyclic:2"],
            "bonds": [[0, 0], [0, 1, 0, 1]],
            "family": "pro_p:2",
        });
        assert!(GroupTower::from_json(&bad.to_string()).is_err());
    }

    #[test]
    fn chain_is_recorded() {
        let t = GroupTower::builtin("pro_p:2", 2).unwrap();
        assert!(t.chain().contains("2^k"));
        assert_eq!(cb_rank(&subgroup_space_tower(&t).unwrap()).unwrap().chain, t.chain());
    }
}
