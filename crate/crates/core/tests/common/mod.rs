//! Brute-force oracles. They only use the group's multiplication and work
//! with explicit subsets, so they share no code paths with the library's
//! lattice, orbit or linear-algebra machinery.
#![allow(dead_code)]

use std::collections::BTreeSet;

use profinite_core::group::FiniteGroup;

pub fn table(g: &FiniteGroup) -> Vec<Vec<usize>> {
    g.elements().map(|a| g.elements().map(|b| g.mul(a, b)).collect()).collect()
}

fn identity(t: &[Vec<usize>]) -> usize {
    (0..t.len()).find(|&e| (0..t.len()).all(|x| t[e][x] == x)).unwrap()
}

fn inverse(t: &[Vec<usize>], a: usize) -> usize {
    let e = identity(t);
    (0..t.len()).find(|&b| t[a][b] == e).unwrap()
}

/// Every subset closed under multiplication (finite, so a subgroup).
pub fn subgroups(g: &FiniteGroup) -> Vec<BTreeSet<usize>> {
    let t = table(g);
    let n = t.len();
    assert!(n <= 12, "subset oracle is exponential");
    let e = identity(&t);
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask & (1 << e) == 0 {
            continue;
        }
        let s: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if s.iter().all(|&a| s.iter().all(|&b| s.contains(&t[a][b]))) {
            out.push(s);
        }
    }
    out
}

pub fn conjugate(g: &FiniteGroup, h: &BTreeSet<usize>, x: usize) -> BTreeSet<usize> {
    let t = table(g);
    let xi = inverse(&t, x);
    h.iter().map(|&k| t[t[x][k]][xi]).collect()
}

/// Number of conjugacy classes of subgroups of `h` under conjugation by `h`.
pub fn subgroup_classes_within(g: &FiniteGroup, h: &BTreeSet<usize>) -> usize {
    let subs: Vec<BTreeSet<usize>> = subgroups(g).into_iter().filter(|s| s.is_subset(h)).collect();
    let mut seen: Vec<BTreeSet<usize>> = Vec::new();
    let mut classes = 0;
    for s in subs {
        if seen.contains(&s) {
            continue;
        }
        classes += 1;
        for &x in h {
            let c = conjugate(g, &s, x);
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
    }
    classes
}

pub fn left_cosets(g: &FiniteGroup, h: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let t = table(g);
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    for x in 0..t.len() {
        let c: BTreeSet<usize> = h.iter().map(|&k| t[x][k]).collect();
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// `|(G/H)^K|`.
pub fn mark(g: &FiniteGroup, h: &BTreeSet<usize>, k: &BTreeSet<usize>) -> usize {
    let t = table(g);
    left_cosets(g, h)
        .iter()
        .filter(|c| k.iter().all(|&a| c.iter().map(|&x| t[a][x]).collect::<BTreeSet<_>>() == **c))
        .count()
}

/// Isomorphism classes of transitive spans `G/H ← G/L → G/K`: one per
/// `G`-orbit `O` of `G/H × G/K` and class of subgroups of the stabiliser of a
/// point of `O` up to conjugation inside it.
pub fn transitive_span_count(g: &FiniteGroup, h: &BTreeSet<usize>, k: &BTreeSet<usize>) -> usize {
    let t = table(g);
    let (a, b) = (left_cosets(g, h), left_cosets(g, k));
    let act = |x: usize, c: &BTreeSet<usize>| -> BTreeSet<usize> { c.iter().map(|&y| t[x][y]).collect() };
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut total = 0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            if seen.contains(&(i, j)) {
                continue;
            }
            let mut stab = BTreeSet::new();
            for x in 0..t.len() {
                let (ai, bj) = (act(x, &a[i]), act(x, &b[j]));
                let p = (a.iter().position(|c| *c == ai).unwrap(), b.iter().position(|c| *c == bj).unwrap());
                seen.insert(p);
                if p == (i, j) {
                    stab.insert(x);
                }
            }
            total += subgroup_classes_within(g, &stab);
        }
    }
    total
}

/// Dimension of the vectors fixed by a finite matrix group, by averaging
/// traces (character inner product with the trivial character).
pub fn fixed_dim_by_characters(traces: &[i64]) -> usize {
    let s: i64 = traces.iter().sum();
    assert_eq!(s % traces.len() as i64, 0);
    (s / traces.len() as i64) as usize
}
