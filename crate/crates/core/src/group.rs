//! Finite groups given by multiplication tables, their subgroups, quotients,
//! cores and Weyl groups.
//!
//! Subgroups are kept in canonical form (strictly sorted element indices) and
//! enumerated in the canonical order `(order, elements)`; the least member of a
//! conjugacy class in that order is its representative.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the number of subgroups enumerated for one group.
pub const DEFAULT_SUBGROUP_BOUND: usize = 10_000;

/// Groups up to this order get a full associativity check at construction.
const FULL_ASSOCIATIVITY_CHECK: usize = 256;

/// Largest order accepted for a group stored as an explicit table.
pub const MAX_TABLE_ORDER: usize = 4096;

/// Abelian groups `Z/m_1 x ... x Z/m_r` are stored implicitly, element index
/// in mixed radix with the first factor most significant.
#[derive(Clone, PartialEq, Eq)]
enum Repr {
    Table { mult: Vec<usize>, inv: Vec<usize> },
    Abelian { moduli: Vec<usize> },
}

#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    repr: Repr,
    identity: usize,
    generators: Vec<usize>,
    label: String,
}

impl std::fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FiniteGroup({}, order {})", self.label, self.order)
    }
}

#[derive(Serialize, Deserialize)]
struct GroupWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<u32>,
    order: usize,
    mult: Vec<Vec<usize>>,
    #[serde(default)]
    label: String,
}

impl FiniteGroup {
    pub fn from_table(table: Vec<Vec<usize>>, label: impl Into<String>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        if n > MAX_TABLE_ORDER {
            return Err(Error::Capacity { what: "group table order".into(), bound: MAX_TABLE_ORDER });
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGroup(format!("row {i} has length {}", row.len())));
            }
            if row.iter().any(|&x| x >= n) {
                return Err(Error::InvalidGroup(format!("row {i} has an out-of-range entry")));
            }
        }
        let mult: Vec<usize> = table.into_iter().flatten().collect();
        let at = |a: usize, b: usize| mult[a * n + b];
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| at(e, x) == x && at(x, e) == x))
            .ok_or_else(|| Error::InvalidGroup("no two-sided identity".into()))?;
        let mut inv = vec![usize::MAX; n];
        for g in 0..n {
            let h = (0..n)
                .find(|&h| at(h, g) == identity && at(g, h) == identity)
                .ok_or_else(|| Error::InvalidGroup(format!("element {g} has no inverse")))?;
            inv[g] = h;
        }
        let assoc = |a: usize, b: usize, c: usize| at(at(a, b), c) == at(a, at(b, c));
        if n <= FULL_ASSOCIATIVITY_CHECK {
            for a in 0..n {
                for b in 0..n {
                    let ab = at(a, b);
                    for c in 0..n {
                        if at(ab, c) != at(a, at(b, c)) {
                            return Err(Error::InvalidGroup(format!(
                                "not associative at ({a}, {b}, {c})"
                            )));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..20_000 {
                let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if !assoc(a, b, c) {
                    return Err(Error::InvalidGroup(format!("not associative at ({a}, {b}, {c})")));
                }
            }
        }
        let mut g = FiniteGroup {
            order: n,
            repr: Repr::Table { mult, inv },
            identity,
            generators: Vec::new(),
            label: label.into(),
        };
        g.generators = greedy_generators(&g);
        Ok(g)
    }

    /// `Z/m_1 x ... x Z/m_r` without a stored table.
    pub fn abelian(moduli: &[usize]) -> Self {
        assert!(moduli.iter().all(|&m| m >= 1));
        let moduli: Vec<usize> = moduli.to_vec();
        let order = moduli.iter().product();
        let label = moduli.iter().map(|m| format!("C{m}")).collect::<Vec<_>>().join("x");
        let mut g = FiniteGroup {
            order,
            repr: Repr::Abelian { moduli },
            identity: 0,
            generators: Vec::new(),
            label,
        };
        g.generators = greedy_generators(&g);
        g
    }

    fn digits(moduli: &[usize], mut x: usize) -> Vec<usize> {
        let mut d = vec![0; moduli.len()];
        for i in (0..moduli.len()).rev() {
            d[i] = x % moduli[i];
            x /= moduli[i];
        }
        d
    }

    /// A generating set, chosen greedily in element order.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        match &self.repr {
            Repr::Table { mult, .. } => mult[a * self.order + b],
            Repr::Abelian { moduli } if moduli.len() == 1 => (a + b) % self.order,
            Repr::Abelian { moduli } => {
                let (mut a, mut b) = (a, b);
                let mut out = 0;
                let mut place = 1;
                for &m in moduli.iter().rev() {
                    out += ((a % m + b % m) % m) * place;
                    a /= m;
                    b /= m;
                    place *= m;
                }
                out
            }
        }
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        match &self.repr {
            Repr::Table { inv, .. } => inv[a],
            Repr::Abelian { moduli } => {
                let d = Self::digits(moduli, a);
                d.iter().zip(moduli).fold(0, |acc, (&x, &m)| acc * m + (m - x) % m)
            }
        }
    }

    /// `g a g^-1`
    #[inline]
    pub fn conj(&self, g: usize, a: usize) -> usize {
        self.mul(self.mul(g, a), self.inv(g))
    }

    pub fn pow(&self, g: usize, k: usize) -> usize {
        let mut acc = self.identity;
        for _ in 0..k {
            acc = self.mul(acc, g);
        }
        acc
    }

    pub fn element_order(&self, g: usize) -> usize {
        let mut x = g;
        let mut k = 1;
        while x != self.identity {
            x = self.mul(x, g);
            k += 1;
        }
        k
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    pub fn is_abelian(&self) -> bool {
        match &self.repr {
            Repr::Abelian { .. } => true,
            Repr::Table { .. } => self
                .generators
                .iter()
                .all(|&a| self.generators.iter().all(|&b| self.mul(a, b) == self.mul(b, a))),
        }
    }

    /// Cyclic factor orders when the group is stored implicitly.
    pub fn abelian_moduli(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Abelian { moduli } => Some(moduli),
            Repr::Table { .. } => None,
        }
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        (0..self.order).map(|a| (0..self.order).map(|b| self.mul(a, b)).collect()).collect()
    }

    pub fn trivial() -> Self {
        Self::cyclic(1).with_label("1")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1);
        Self::abelian(&[n])
    }

    /// Dihedral group of order `n` (n even); `r^k` has index `k`, `s r^k` has index `n/2 + k`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::UnknownFamily(format!("dihedral:{n} needs an even order >= 2")));
        }
        let m = n / 2;
        let elem = |refl: bool, k: usize| if refl { m + k % m } else { k % m };
        let mut table = vec![vec![0; n]; n];
        for a in 0..n {
            let (ra, ka) = (a >= m, a % m);
            for b in 0..n {
                let (rb, kb) = (b >= m, b % m);
                // s^ra r^ka s^rb r^kb
                let k = if rb { (m - ka + kb) % m } else { ka + kb };
                table[a][b] = elem(ra ^ rb, k);
            }
        }
        Self::from_table(table, format!("D{n}"))
    }

    /// Symmetric group on `n <= 5` letters; permutations in lexicographic order,
    /// product `(s t)(i) = s(t(i))`.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 5 {
            return Err(Error::UnknownFamily(format!("sym:{n} is outside 1..=5")));
        }
        let perms = permutations(n);
        let index: HashMap<Vec<usize>, usize> =
            perms.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let table = perms
            .iter()
            .map(|s| {
                perms
                    .iter()
                    .map(|t| {
                        let st: Vec<usize> = (0..n).map(|i| s[t[i]]).collect();
                        index[&st]
                    })
                    .collect()
            })
            .collect();
        Self::from_table(table, format!("S{n}"))
    }

    /// Element `(a, b)` has index `a * |other| + b`.
    pub fn direct_product(&self, other: &FiniteGroup) -> Result<Self> {
        if let (Some(a), Some(b)) = (self.abelian_moduli(), other.abelian_moduli()) {
            let moduli: Vec<usize> = a.iter().chain(b).copied().collect();
            return Ok(Self::abelian(&moduli).with_label(format!("{}x{}", self.label, other.label)));
        }
        let (n, m) = (self.order, other.order);
        if n * m > MAX_TABLE_ORDER {
            return Err(Error::Capacity { what: "group table order".into(), bound: MAX_TABLE_ORDER });
        }
        let table = (0..n * m)
            .map(|x| {
                (0..n * m)
                    .map(|y| self.mul(x / m, y / m) * m + other.mul(x % m, y % m))
                    .collect()
            })
            .collect();
        FiniteGroup::from_table(table, format!("{}x{}", self.label, other.label))
    }

    /// Parses `cyclic:4`, `dihedral:8`, `sym:3`, `trivial`, `prod:cyclic:2,cyclic:2`.
    pub fn from_selector(sel: &str) -> Result<Self> {
        let sel = sel.trim();
        if let Some(rest) = sel.strip_prefix("prod:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() < 2 {
                return Err(Error::UnknownFamily(sel.to_string()));
            }
            let mut g = Self::from_selector(parts[0])?;
            for p in &parts[1..] {
                g = g.direct_product(&Self::from_selector(p)?)?;
            }
            return Ok(g);
        }
        if sel == "trivial" {
            return Ok(Self::trivial());
        }
        let (fam, arg) = sel.split_once(':').ok_or_else(|| Error::UnknownFamily(sel.to_string()))?;
        let n: usize = arg.parse().map_err(|_| Error::UnknownFamily(sel.to_string()))?;
        match fam {
            "cyclic" if n >= 1 => Ok(Self::cyclic(n)),
            "dihedral" => Self::dihedral(n),
            "sym" => Self::symmetric(n),
            _ => Err(Error::UnknownFamily(sel.to_string())),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let w: GroupWire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if w.mult.len() != w.order {
            return Err(Error::InvalidGroup(format!(
                "order {} but table has {} rows",
                w.order,
                w.mult.len()
            )));
        }
        Self::from_table(w.mult, w.label)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GroupWire {
            schema: Some(1),
            order: self.order,
            mult: self.table(),
            label: self.label.clone(),
        })
        .expect("group serializes")
    }
}

fn greedy_generators(g: &FiniteGroup) -> Vec<usize> {
    let mut gens = Vec::new();
    let mut span = generate(g, &[]);
    for x in g.elements() {
        if !span.contains(x) {
            gens.push(x);
            span = generate(g, &gens);
        }
    }
    gens
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// A subgroup in canonical form. The parent group is not stored; every
/// operation takes it explicitly.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subgroup {
    elements: Vec<usize>,
}

impl Subgroup {
    /// Validates closure in `g`.
    pub fn new(g: &FiniteGroup, mut elements: Vec<usize>) -> Result<Self> {
        elements.sort_unstable();
        elements.dedup();
        if elements.iter().any(|&x| x >= g.order()) {
            return Err(Error::NotSubgroup("element out of range".into()));
        }
        let set: HashSet<usize> = elements.iter().copied().collect();
        if !set.contains(&g.identity()) {
            return Err(Error::NotSubgroup("missing identity".into()));
        }
        for &a in &elements {
            if !set.contains(&g.inv(a)) {
                return Err(Error::NotSubgroup(format!("not closed under inverse at {a}")));
            }
            for &b in &elements {
                if !set.contains(&g.mul(a, b)) {
                    return Err(Error::NotSubgroup(format!("not closed at ({a}, {b})")));
                }
            }
        }
        Ok(Subgroup { elements })
    }

    fn from_sorted_unchecked(elements: Vec<usize>) -> Self {
        debug_assert!(elements.windows(2).all(|w| w[0] < w[1]));
        Subgroup { elements }
    }

    pub fn trivial(g: &FiniteGroup) -> Self {
        Subgroup { elements: vec![g.identity()] }
    }

    pub fn whole(g: &FiniteGroup) -> Self {
        Subgroup { elements: g.elements().collect() }
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.elements.iter().all(|&x| other.contains(x))
    }

    pub fn intersect(&self, other: &Subgroup) -> Subgroup {
        Subgroup::from_sorted_unchecked(
            self.elements.iter().copied().filter(|&x| other.contains(x)).collect(),
        )
    }

    /// Canonical ordering key: order first, then elements.
    pub fn canonical_key(&self) -> (usize, &[usize]) {
        (self.elements.len(), &self.elements)
    }
}

/// Closure of a generating set.
pub fn generate(g: &FiniteGroup, gens: &[usize]) -> Subgroup {
    let mut seen = vec![false; g.order()];
    seen[g.identity()] = true;
    let mut queue = VecDeque::from([g.identity()]);
    while let Some(x) = queue.pop_front() {
        for &s in gens {
            let y = g.mul(x, s);
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    Subgroup::from_sorted_unchecked((0..g.order()).filter(|&x| seen[x]).collect())
}

/// Distinct cyclic subgroups, each with one generator.
pub fn cyclic_subgroups(g: &FiniteGroup) -> Vec<(usize, Subgroup)> {
    let mut covered = vec![false; g.order()];
    let mut out = Vec::new();
    for x in g.elements() {
        if covered[x] {
            continue;
        }
        let mut powers = vec![g.identity()];
        let mut y = x;
        while y != g.identity() {
            powers.push(y);
            y = g.mul(y, x);
        }
        let m = powers.len();
        for (k, &p) in powers.iter().enumerate() {
            if k.gcd(&m) == 1 {
                covered[p] = true;
            }
        }
        powers.sort_unstable();
        out.push((x, Subgroup::from_sorted_unchecked(powers)));
    }
    out
}


pub fn all_subgroups(g: &FiniteGroup) -> Result<Vec<Subgroup>> {
    all_subgroups_bounded(g, DEFAULT_SUBGROUP_BOUND)
}

/// Cyclic-extension enumeration: every subgroup is reached from `{e}` by
/// adjoining one cyclic subgroup at a time.
pub fn all_subgroups_bounded(g: &FiniteGroup, bound: usize) -> Result<Vec<Subgroup>> {
    let cyclic = cyclic_subgroups(g);
    let start = Subgroup::trivial(g);
    let mut seen: HashSet<Subgroup> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, Vec::<usize>::new())]);
    while let Some((h, gens)) = queue.pop_front() {
        for (x, _) in &cyclic {
            if h.contains(*x) {
                continue;
            }
            let mut more = gens.clone();
            more.push(*x);
            let k = generate(g, &more);
            if seen.insert(k.clone()) {
                if seen.len() > bound {
                    return Err(Error::Capacity {
                        what: format!("subgroups of {}", g.label()),
                        bound,
                    });
                }
                queue.push_back((k, more));
            }
        }
    }
    let mut subs: Vec<Subgroup> = seen.into_iter().collect();
    subs.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
    Ok(subs)
}

pub fn conjugate(g: &FiniteGroup, h: &Subgroup, x: usize) -> Subgroup {
    let mut e: Vec<usize> = h.elements.iter().map(|&a| g.conj(x, a)).collect();
    e.sort_unstable();
    Subgroup::from_sorted_unchecked(e)
}

pub fn normalizer(g: &FiniteGroup, h: &Subgroup) -> Subgroup {
    if g.is_abelian() {
        return Subgroup::whole(g);
    }
    Subgroup::from_sorted_unchecked(
        g.elements().filter(|&x| h.elements.iter().all(|&a| h.contains(g.conj(x, a)))).collect(),
    )
}

pub fn is_normal(g: &FiniteGroup, h: &Subgroup) -> bool {
    normalizer(g, h).order() == g.order()
}

/// Intersection of all conjugates of `h`.
pub fn core(g: &FiniteGroup, h: &Subgroup) -> Subgroup {
    if g.is_abelian() {
        return h.clone();
    }
    let mut c = h.clone();
    for x in g.elements() {
        c = c.intersect(&conjugate(g, h, x));
    }
    c
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupHom {
    domain_order: usize,
    codomain_order: usize,
    map: Vec<usize>,
}

impl GroupHom {
    pub fn new(domain: &FiniteGroup, codomain: &FiniteGroup, map: Vec<usize>) -> Result<Self> {
        if map.len() != domain.order() {
            return Err(Error::InvalidHom(format!(
                "table has {} entries for a domain of order {}",
                map.len(),
                domain.order()
            )));
        }
        if map.iter().any(|&y| y >= codomain.order()) {
            return Err(Error::InvalidHom("image out of range".into()));
        }
        if map[domain.identity()] != codomain.identity() {
            return Err(Error::InvalidHom("identity not preserved".into()));
        }
        // multiplicativity against a generating set suffices
        for a in domain.elements() {
            for &b in domain.generators() {
                if map[domain.mul(a, b)] != codomain.mul(map[a], map[b]) {
                    return Err(Error::InvalidHom(format!("not multiplicative at ({a}, {b})")));
                }
            }
        }
        Ok(GroupHom { domain_order: domain.order(), codomain_order: codomain.order(), map })
    }

    pub fn identity(g: &FiniteGroup) -> Self {
        GroupHom { domain_order: g.order(), codomain_order: g.order(), map: g.elements().collect() }
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn table(&self) -> &[usize] {
        &self.map
    }

    pub fn domain_order(&self) -> usize {
        self.domain_order
    }

    pub fn codomain_order(&self) -> usize {
        self.codomain_order
    }

    /// `other ∘ self`
    pub fn then(&self, other: &GroupHom) -> GroupHom {
        assert_eq!(self.codomain_order, other.domain_order);
        GroupHom {
            domain_order: self.domain_order,
            codomain_order: other.codomain_order,
            map: self.map.iter().map(|&x| other.map[x]).collect(),
        }
    }

    pub fn is_surjective(&self) -> bool {
        let img: HashSet<usize> = self.map.iter().copied().collect();
        img.len() == self.codomain_order
    }

    pub fn image(&self, h: &Subgroup) -> Subgroup {
        let set: BTreeSet<usize> = h.elements.iter().map(|&x| self.map[x]).collect();
        Subgroup::from_sorted_unchecked(set.into_iter().collect())
    }

    pub fn kernel(&self, domain: &FiniteGroup) -> Subgroup {
        let e = self.map[domain.identity()];
        Subgroup::from_sorted_unchecked(
            domain.elements().filter(|&x| self.map[x] == e).collect(),
        )
    }

    pub fn preimage(&self, h: &Subgroup) -> Subgroup {
        Subgroup::from_sorted_unchecked(
            (0..self.domain_order).filter(|&x| h.contains(self.map[x])).collect(),
        )
    }
}

/// Coset group `g / n` with cosets indexed in increasing order of their minimal
/// element, and the projection.
pub fn quotient(g: &FiniteGroup, n: &Subgroup) -> Result<(FiniteGroup, GroupHom)> {
    if !is_normal(g, n) {
        return Err(Error::NotNormal);
    }
    let mut coset_of = vec![usize::MAX; g.order()];
    let mut reps = Vec::new();
    for x in g.elements() {
        if coset_of[x] != usize::MAX {
            continue;
        }
        let idx = reps.len();
        reps.push(x);
        for &a in n.elements() {
            coset_of[g.mul(x, a)] = idx;
        }
    }
    let k = reps.len();
    let table =
        (0..k).map(|i| (0..k).map(|j| coset_of[g.mul(reps[i], reps[j])]).collect()).collect();
    let label = if n.order() == 1 {
        g.label().to_string()
    } else {
        format!("{}/N{}", g.label(), n.order())
    };
    let q = FiniteGroup::from_table(table, label)?;
    let proj = GroupHom { domain_order: g.order(), codomain_order: k, map: coset_of };
    Ok((q, proj))
}

/// A subgroup as a group in its own right, with the embedding into the parent.
/// Element `i` of the result is `h.elements()[i]`.
pub fn subgroup_as_group(g: &FiniteGroup, h: &Subgroup) -> (FiniteGroup, Vec<usize>) {
    let idx: HashMap<usize, usize> = h.elements.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let table = h
        .elements
        .iter()
        .map(|&a| h.elements.iter().map(|&b| idx[&g.mul(a, b)]).collect())
        .collect();
    let sub = FiniteGroup::from_table(table, format!("{}<{}>", g.label(), h.order()))
        .expect("subgroup table is a group");
    (sub, h.elements.clone())
}

#[derive(Clone, Debug)]
pub struct WeylGroup {
    pub normalizer: Subgroup,
    pub group: FiniteGroup,
    /// Indexed by parent-group element; `None` outside the normalizer.
    pub projection: Vec<Option<usize>>,
}

/// `W_G(K) = N_G(K) / K`.
pub fn weyl_group(g: &FiniteGroup, k: &Subgroup) -> WeylGroup {
    let norm = normalizer(g, k);
    let (ng, embed) = subgroup_as_group(g, &norm);
    let local: HashMap<usize, usize> = embed.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let k_local = Subgroup::from_sorted_unchecked({
        let mut v: Vec<usize> = k.elements.iter().map(|x| local[x]).collect();
        v.sort_unstable();
        v
    });
    let (w, proj) = quotient(&ng, &k_local).expect("K is normal in its normalizer");
    let mut projection = vec![None; g.order()];
    for (i, &x) in embed.iter().enumerate() {
        projection[x] = Some(proj.apply(i));
    }
    let label = format!("W({})", k.order());
    WeylGroup { normalizer: norm, group: w.with_label(label), projection }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugacyClass {
    pub representative: Subgroup,
    pub members: Vec<Subgroup>,
}

/// Subgroups of a group with their conjugation data, in canonical order.
#[derive(Clone, Debug)]
pub struct SubgroupLattice {
    subgroups: Vec<Subgroup>,
    index: HashMap<Subgroup, usize>,
    /// class index of each subgroup
    class_of: Vec<usize>,
    /// members (subgroup indices) of each class, representative first
    classes: Vec<Vec<usize>>,
    /// least `t` with `t rep t^-1 = S`
    transport: Vec<usize>,
    /// `conj[x][s]` is the index of `x S x^-1`
    conj: Vec<Vec<usize>>,
    normalizers: Vec<Subgroup>,
}

impl SubgroupLattice {
    pub fn new(g: &FiniteGroup) -> Result<Self> {
        Self::with_bound(g, DEFAULT_SUBGROUP_BOUND)
    }

    pub fn with_bound(g: &FiniteGroup, bound: usize) -> Result<Self> {
        let subgroups = all_subgroups_bounded(g, bound)?;
        let index: HashMap<Subgroup, usize> =
            subgroups.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let conj: Vec<Vec<usize>> = if g.is_abelian() {
            let fixed: Vec<usize> = (0..subgroups.len()).collect();
            vec![fixed; g.order()]
        } else {
            g.elements()
                .map(|x| subgroups.iter().map(|s| index[&conjugate(g, s, x)]).collect())
                .collect()
        };
        let mut class_of = vec![usize::MAX; subgroups.len()];
        let mut classes = Vec::new();
        let mut transport = vec![usize::MAX; subgroups.len()];
        for s in 0..subgroups.len() {
            if class_of[s] != usize::MAX {
                continue;
            }
            // canonical order guarantees s is the least member of its class
            let c = classes.len();
            let mut members = vec![s];
            class_of[s] = c;
            transport[s] = g.identity();
            for x in g.elements() {
                let t = conj[x][s];
                if class_of[t] == usize::MAX {
                    class_of[t] = c;
                    transport[t] = x;
                    members.push(t);
                }
            }
            members[1..].sort_unstable();
            classes.push(members);
        }
        let normalizers = subgroups.iter().map(|s| normalizer(g, s)).collect();
        Ok(SubgroupLattice { subgroups, index, class_of, classes, transport, conj, normalizers })
    }

    pub fn len(&self) -> usize {
        self.subgroups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgroups.is_empty()
    }

    pub fn subgroups(&self) -> &[Subgroup] {
        &self.subgroups
    }

    pub fn subgroup(&self, i: usize) -> &Subgroup {
        &self.subgroups[i]
    }

    pub fn index_of(&self, s: &Subgroup) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, s: usize) -> usize {
        self.class_of[s]
    }

    pub fn class_members(&self, c: usize) -> &[usize] {
        &self.classes[c]
    }

    /// Subgroup index of the representative of class `c`.
    pub fn rep(&self, c: usize) -> usize {
        self.classes[c][0]
    }

    pub fn rep_subgroup(&self, c: usize) -> &Subgroup {
        &self.subgroups[self.rep(c)]
    }

    /// Least `t` with `t · rep · t^-1 = subgroup s`.
    pub fn transport(&self, s: usize) -> usize {
        self.transport[s]
    }

    pub fn conj(&self, x: usize, s: usize) -> usize {
        self.conj[x][s]
    }

    pub fn normalizer(&self, s: usize) -> &Subgroup {
        &self.normalizers[s]
    }

    pub fn conjugacy_classes(&self) -> Vec<ConjugacyClass> {
        self.classes
            .iter()
            .map(|m| ConjugacyClass {
                representative: self.subgroups[m[0]].clone(),
                members: m.iter().map(|&i| self.subgroups[i].clone()).collect(),
            })
            .collect()
    }
}

pub fn subgroup_conjugacy_classes(g: &FiniteGroup) -> Result<Vec<ConjugacyClass>> {
    Ok(SubgroupLattice::new(g)?.conjugacy_classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: brute-force closure test over every subset (small groups only).
    fn subgroups_by_subsets(g: &FiniteGroup) -> Vec<Subgroup> {
        let n = g.order();
        assert!(n <= 8);
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            let elems: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            if let Ok(s) = Subgroup::new(g, elems) {
                out.push(s);
            }
        }
        out.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
        out
    }

    #[test]
    fn subgroup_counts_match_subset_oracle() {
        for (sel, count) in [("cyclic:2", 2), ("sym:3", 6), ("prod:cyclic:2,cyclic:2", 5), ("dihedral:8", 10), ("cyclic:4", 3)] {
            let g = FiniteGroup::from_selector(sel).unwrap();
            let subs = all_subgroups(&g).unwrap();
            assert_eq!(subs, subgroups_by_subsets(&g), "{sel}");
            assert_eq!(subs.len(), count, "{sel}");
        }
    }

    #[test]
    fn larger_groups_have_expected_subgroup_counts() {
        // S4 has 30 subgroups, S5 has 156
        assert_eq!(all_subgroups(&FiniteGroup::symmetric(4).unwrap()).unwrap().len(), 30);
        assert_eq!(all_subgroups(&FiniteGroup::symmetric(5).unwrap()).unwrap().len(), 156);
    }

    #[test]
    fn capacity_bound_is_enforced() {
        let g = FiniteGroup::symmetric(4).unwrap();
        assert!(matches!(all_subgroups_bounded(&g, 10), Err(Error::Capacity { .. })));
    }

    #[test]
    fn conjugacy_class_counts() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(subgroup_conjugacy_classes(&s3).unwrap().len(), 4);
        let v4 = FiniteGroup::from_selector("prod:cyclic:2,cyclic:2").unwrap();
        let classes = subgroup_conjugacy_classes(&v4).unwrap();
        assert_eq!(classes.len(), 5);
        assert!(classes.iter().all(|c| c.members.len() == 1));
    }

    #[test]
    fn class_representative_is_least_member() {
        let g = FiniteGroup::symmetric(4).unwrap();
        for c in subgroup_conjugacy_classes(&g).unwrap() {
            let least = c.members.iter().min_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
            assert_eq!(Some(&c.representative), least);
        }
    }

    #[test]
    fn core_examples() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        // (0 1) is the permutation [1, 0, 2], index 2 in lexicographic order
        let t = generate(&s3, &[2]);
        assert_eq!(t.order(), 2);
        assert_eq!(core(&s3, &t), Subgroup::trivial(&s3));
        let c4 = FiniteGroup::cyclic(4);
        let c2 = generate(&c4, &[2]);
        assert_eq!(core(&c4, &c2), c2);
        let a3 = generate(&s3, &[3]);
        assert_eq!(a3.order(), 3);
        assert_eq!(core(&s3, &a3), a3);
    }

    #[test]
    fn quotient_examples() {
        let c4 = FiniteGroup::cyclic(4);
        let (q, p) = quotient(&c4, &generate(&c4, &[2])).unwrap();
        assert_eq!(q.order(), 2);
        assert!(p.is_surjective());
        let (t, _) = quotient(&c4, &Subgroup::whole(&c4)).unwrap();
        assert_eq!(t.order(), 1);
        let (same, p) = quotient(&c4, &Subgroup::trivial(&c4)).unwrap();
        assert_eq!(same.table(), c4.table());
        assert_eq!(p.table(), &[0, 1, 2, 3]);
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(quotient(&s3, &generate(&s3, &[2])).unwrap_err(), Error::NotNormal);
    }

    #[test]
    fn weyl_group_examples() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(weyl_group(&s3, &Subgroup::trivial(&s3)).group.order(), 6);
        assert_eq!(weyl_group(&s3, &generate(&s3, &[2])).group.order(), 1);
        let c4 = FiniteGroup::cyclic(4);
        assert_eq!(weyl_group(&c4, &generate(&c4, &[2])).group.order(), 2);
    }

    #[test]
    fn dihedral_and_products_are_groups() {
        let d8 = FiniteGroup::dihedral(8).unwrap();
        assert!(!d8.is_abelian());
        assert_eq!(FiniteGroup::dihedral(4).unwrap().element_order(1), 2);
        let p = FiniteGroup::from_selector("prod:cyclic:3,sym:3").unwrap();
        assert_eq!(p.order(), 18);
        assert!(FiniteGroup::from_selector("bogus:3").is_err());
        assert!(FiniteGroup::from_selector("sym:9").is_err());
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(FiniteGroup::from_table(vec![vec![0, 0], vec![0, 0]], "x").is_err());
        // a quasigroup that is not associative
        let t = vec![vec![0, 2, 1], vec![2, 1, 0], vec![1, 0, 2]];
        assert!(FiniteGroup::from_table(t, "q").is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = FiniteGroup::dihedral(6).unwrap();
        let s = g.to_json().to_string();
        assert_eq!(FiniteGroup::from_json(&s).unwrap(), g);
    }

    #[test]
    fn hom_validation() {
        let c4 = FiniteGroup::cyclic(4);
        let c2 = FiniteGroup::cyclic(2);
        assert!(GroupHom::new(&c4, &c2, vec![0, 1, 0, 1]).is_ok());
        assert!(GroupHom::new(&c4, &c2, vec![0, 1, 1, 1]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn battery() -> Vec<FiniteGroup> {
            ["cyclic:6", "sym:3", "dihedral:8", "prod:cyclic:2,cyclic:4", "sym:4"]
                .iter()
                .map(|s| FiniteGroup::from_selector(s).unwrap())
                .collect()
        }

        /// Oracle: kernel of the permutation action on left cosets.
        fn core_by_action(g: &FiniteGroup, h: &Subgroup) -> Subgroup {
            let cosets: BTreeSet<Vec<usize>> = g
                .elements()
                .map(|x| {
                    let mut c: Vec<usize> = h.elements().iter().map(|&a| g.mul(x, a)).collect();
                    c.sort_unstable();
                    c
                })
                .collect();
            let cosets: Vec<Vec<usize>> = cosets.into_iter().collect();
            let kernel: Vec<usize> = g
                .elements()
                .filter(|&y| {
                    cosets.iter().all(|c| {
                        let mut d: Vec<usize> = c.iter().map(|&x| g.mul(y, x)).collect();
                        d.sort_unstable();
                        &d == c
                    })
                })
                .collect();
            Subgroup::new(g, kernel).unwrap()
        }

        proptest! {
            #[test]
            fn core_is_action_kernel(gi in 0usize..5, si in 0usize..1000) {
                let g = &battery()[gi];
                let subs = all_subgroups(g).unwrap();
                let h = &subs[si % subs.len()];
                let c = core(g, h);
                prop_assert_eq!(&c, &core_by_action(g, h));
                prop_assert!(is_normal(g, &c));
                prop_assert!(c.is_subgroup_of(h));
            }

            #[test]
            fn orbit_stabilizer_for_subgroup_classes(gi in 0usize..5) {
                let g = &battery()[gi];
                let lat = SubgroupLattice::new(g).unwrap();
                for s in 0..lat.len() {
                    let class = lat.class_members(lat.class_of(s)).len();
                    prop_assert_eq!(class * lat.normalizer(s).order(), g.order());
                }
            }

            #[test]
            fn subgroup_list_closed_under_operations(gi in 0usize..5, a in 0usize..1000, b in 0usize..1000, x in 0usize..1000) {
                let g = &battery()[gi];
                let lat = SubgroupLattice::new(g).unwrap();
                let h = lat.subgroup(a % lat.len());
                let k = lat.subgroup(b % lat.len());
                prop_assert!(lat.index_of(&h.intersect(k)).is_some());
                prop_assert!(lat.index_of(&core(g, h)).is_some());
                prop_assert!(lat.index_of(&conjugate(g, h, x % g.order())).is_some());
            }

            #[test]
            fn projection_is_surjective_with_kernel_n(gi in 0usize..5, si in 0usize..1000) {
                let g = &battery()[gi];
                let subs = all_subgroups(g).unwrap();
                let n = core(g, &subs[si % subs.len()]);
                let (q, p) = quotient(g, &n).unwrap();
                prop_assert!(p.is_surjective());
                prop_assert_eq!(p.kernel(g), n.clone());
                prop_assert_eq!(q.order() * n.order(), g.order());
            }
        }
    }
}
