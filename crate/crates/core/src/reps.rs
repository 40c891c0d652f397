//! Finite-dimensional rational representations of a finite group and the
//! irreducible ones.
//!
//! Irreducibles come from the centre of `Q[G]`: sums over rational classes
//! (elements generating conjugate cyclic subgroups) act on the centre with
//! integer eigenvalues, and their joint eigenspaces are exactly the rational
//! isotypic blocks. A simple module is then cut out of `Q[G] e` by a
//! permutation idempotent `e_H`.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{FiniteGroup, Subgroup, SubgroupLattice};
use crate::linalg::{q, QMatrix, Q};
use num_traits::Zero;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QRep {
    pub label: String,
    pub dim: usize,
    /// one matrix per group element
    pub matrices: Vec<QMatrix>,
}

impl QRep {
    /// Checks the homomorphism property against the group's generators.
    pub fn new(g: &FiniteGroup, label: impl Into<String>, matrices: Vec<QMatrix>) -> Result<Self> {
        if matrices.len() != g.order() {
            return Err(Error::InvalidHom("one matrix per group element".into()));
        }
        let dim = matrices.first().map_or(0, QMatrix::rows);
        if matrices.iter().any(|m| m.shape() != (dim, dim)) {
            return Err(Error::InvalidHom("representation matrices must be square of one size".into()));
        }
        if !matrices[g.identity()].is_identity() {
            return Err(Error::InvalidHom("identity must act as the identity".into()));
        }
        for a in g.elements() {
            for &s in g.generators() {
                if matrices[g.mul(a, s)] != &matrices[a] * &matrices[s] {
                    return Err(Error::InvalidHom(format!("not multiplicative at ({a}, {s})")));
                }
            }
        }
        Ok(QRep { label: label.into(), dim, matrices })
    }

    pub fn trivial(g: &FiniteGroup) -> Self {
        QRep { label: "trivial".into(), dim: 1, matrices: vec![QMatrix::identity(1); g.order()] }
    }

    /// Left regular representation on `Q[G]`.
    pub fn regular(g: &FiniteGroup) -> Self {
        let n = g.order();
        let matrices = g
            .elements()
            .map(|a| {
                let mut m = QMatrix::zeros(n, n);
                for x in g.elements() {
                    m[(g.mul(a, x), x)] = q(1);
                }
                m
            })
            .collect();
        QRep { label: "regular".into(), dim: n, matrices }
    }

    /// Columns form a basis of `V^H`.
    pub fn fixed_subspace(&self, h: &Subgroup) -> QMatrix {
        let mut stacked = QMatrix::zeros(0, self.dim);
        for &a in h.elements() {
            stacked = stacked.vstack(&(&self.matrices[a] - &QMatrix::identity(self.dim)));
        }
        stacked.kernel()
    }

    pub fn direct_sum(&self, other: &QRep) -> QRep {
        QRep {
            label: format!("{}+{}", self.label, other.label),
            dim: self.dim + other.dim,
            matrices: self
                .matrices
                .iter()
                .zip(&other.matrices)
                .map(|(a, b)| QMatrix::block_diag(&[a.clone(), b.clone()]))
                .collect(),
        }
    }

    /// Kernel of the representation.
    pub fn kernel(&self, g: &FiniteGroup) -> Subgroup {
        Subgroup::new(g, g.elements().filter(|&a| self.matrices[a].is_identity()).collect())
            .expect("kernel is a subgroup")
    }
}

/// Basis of `Hom_G(V, W)`, as `dim W x dim V` matrices.
pub fn rep_hom_space(g: &FiniteGroup, v: &QRep, w: &QRep) -> Vec<QMatrix> {
    let (n, m) = (v.dim, w.dim);
    let unknowns = n * m;
    if unknowns == 0 {
        return vec![];
    }
    // X rho_V(s) = rho_W(s) X, X is m x n stored row-major
    let mut rows = Vec::new();
    for &s in g.generators() {
        let a = &v.matrices[s];
        let b = &w.matrices[s];
        for i in 0..m {
            for j in 0..n {
                let mut row = vec![Q::zero(); unknowns];
                for k in 0..n {
                    row[i * n + k] += &a[(k, j)];
                }
                for k in 0..m {
                    row[k * n + j] -= &b[(i, k)];
                }
                rows.push(row);
            }
        }
    }
    let sys = if rows.is_empty() { QMatrix::zeros(0, unknowns) } else { QMatrix::from_rows(rows) };
    sys.kernel()
        .columns()
        .into_iter()
        .map(|col| QMatrix::from_rows_shaped(m, n, col.chunks(n).map(<[Q]>::to_vec).collect()))
        .collect()
}

fn group_algebra_mul(g: &FiniteGroup, a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); g.order()];
    for (x, ax) in a.iter().enumerate() {
        if ax.is_zero() {
            continue;
        }
        for (y, by) in b.iter().enumerate() {
            if !by.is_zero() {
                out[g.mul(x, y)] += ax * by;
            }
        }
    }
    out
}

fn conjugacy_classes(g: &FiniteGroup) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.order()];
    let mut out = Vec::new();
    for x in g.elements() {
        if seen[x] {
            continue;
        }
        let mut c: Vec<usize> = g.elements().map(|a| g.conj(a, x)).collect();
        c.sort_unstable();
        c.dedup();
        for &y in &c {
            seen[y] = true;
        }
        out.push(c);
    }
    out
}

/// Classes of elements generating conjugate cyclic subgroups, as lists of
/// conjugacy-class indices.
fn rational_classes(g: &FiniteGroup, classes: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let class_of = {
        let mut v = vec![0; g.order()];
        for (i, c) in classes.iter().enumerate() {
            for &x in c {
                v[x] = i;
            }
        }
        v
    };
    let mut seen = vec![false; classes.len()];
    let mut out = Vec::new();
    for i in 0..classes.len() {
        if seen[i] {
            continue;
        }
        let x = classes[i][0];
        let ord = g.element_order(x);
        let mut members: Vec<usize> = (1..=ord)
            .filter(|k| k.gcd(&ord) == 1)
            .map(|k| class_of[g.pow(x, k)])
            .collect();
        members.sort_unstable();
        members.dedup();
        for &m in &members {
            seen[m] = true;
        }
        out.push(members);
    }
    out
}


/// Primitive central idempotents of `Q[G]`, as group-algebra vectors.
pub fn central_idempotents(g: &FiniteGroup) -> Vec<Vec<Q>> {
    let classes = conjugacy_classes(g);
    let r = classes.len();
    let class_sum = |i: usize| {
        let mut v = vec![Q::zero(); g.order()];
        for &x in &classes[i] {
            v[x] = q(1);
        }
        v
    };
    // coordinates in the class-sum basis of a central element
    let to_center = |v: &[Q]| (0..r).map(|i| v[classes[i][0]].clone()).collect::<Vec<Q>>();
    let sums: Vec<Vec<Q>> = (0..r).map(class_sum).collect();
    let mut spaces = vec![QMatrix::identity(r)];
    for rc in rational_classes(g, &classes) {
        let mut z = vec![Q::zero(); g.order()];
        let mut size = 0;
        for &i in &rc {
            for (zx, sx) in z.iter_mut().zip(&sums[i]) {
                *zx += sx;
            }
            size += classes[i].len();
        }
        let columns: Vec<Vec<Q>> = (0..r).map(|j| to_center(&group_algebra_mul(g, &z, &sums[j]))).collect();
        let mult = QMatrix::from_columns(r, &columns);
        let mut next = Vec::new();
        for w in &spaces {
            let image = &mult * w;
            for lambda in -(size as i64)..=(size as i64) {
                let shifted = &image - &w.scale(&q(lambda));
                let k = shifted.kernel();
                if k.cols() > 0 {
                    next.push(w * &k);
                }
            }
        }
        spaces = next;
    }
    let all = spaces.iter().skip(1).fold(spaces[0].clone(), |acc, s| acc.hstack(s));
    let mut one = vec![Q::zero(); r];
    one[class_of_identity(g, &classes)] = q(1);
    let coeffs = all.solve_vec(&one).expect("eigenspaces span the centre");
    let mut out = Vec::new();
    let mut offset = 0;
    for s in &spaces {
        let c = &coeffs[offset..offset + s.cols()];
        offset += s.cols();
        let center = s.mul_vec(c);
        let mut v = vec![Q::zero(); g.order()];
        for (i, cls) in classes.iter().enumerate() {
            for &x in cls {
                v[x] = center[i].clone();
            }
        }
        out.push(v);
    }
    out
}

fn class_of_identity(g: &FiniteGroup, classes: &[Vec<usize>]) -> usize {
    classes.iter().position(|c| c.contains(&g.identity())).unwrap()
}

/// Left multiplication by group elements on a left ideal with the given basis rows.
fn ideal_rep(g: &FiniteGroup, basis: &QMatrix, label: String) -> QRep {
    let n = g.order();
    let b = basis.transpose();
    let matrices = g
        .elements()
        .map(|a| {
            let mut moved = QMatrix::zeros(n, b.cols());
            for c in 0..b.cols() {
                for x in 0..n {
                    moved[(g.mul(a, x), c)] = b[(x, c)].clone();
                }
            }
            b.solve(&moved).expect("ideal is a left ideal")
        })
        .collect();
    QRep { label, dim: b.cols(), matrices }
}

/// Row basis of the left ideal generated by `v`.
fn left_ideal(g: &FiniteGroup, v: &[Q]) -> QMatrix {
    let n = g.order();
    let rows: Vec<Vec<Q>> = g
        .elements()
        .map(|a| {
            let mut w = vec![Q::zero(); n];
            for (x, vx) in v.iter().enumerate() {
                w[g.mul(a, x)] = vx.clone();
            }
            w
        })
        .collect();
    let (r, pivots) = QMatrix::from_rows(rows).rref();
    r.block(0, 0, pivots.len(), n)
}

/// Representatives of the irreducible rational representations, trivial first,
/// ordered by dimension and then by decreasing kernel.
pub fn rational_irreducibles(g: &FiniteGroup) -> Result<Vec<QRep>> {
    let lattice = SubgroupLattice::new(g)?;
    let mut out = Vec::new();
    for e in central_idempotents(g) {
        let mut best: Option<QMatrix> = None;
        for c in (0..lattice.num_classes()).rev() {
            let h = lattice.rep_subgroup(c);
            let mut eh = vec![Q::zero(); g.order()];
            let w = Q::new(1.into(), (h.order() as i64).into());
            for &x in h.elements() {
                eh[x] = w.clone();
            }
            let basis = left_ideal(g, &group_algebra_mul(g, &e, &eh));
            if basis.rows() > 0 && best.as_ref().map_or(true, |b| basis.rows() < b.rows()) {
                best = Some(basis);
            }
        }
        let mut basis = best.expect("e_G is never killed by the trivial subgroup idempotent");
        // refine to a cyclic submodule of least dimension
        loop {
            let mut smaller = None;
            for row in 0..basis.rows() {
                let sub = left_ideal(g, basis.row(row));
                if sub.rows() < basis.rows() {
                    smaller = Some(sub);
                    break;
                }
            }
            match smaller {
                Some(s) => basis = s,
                None => break,
            }
        }
        out.push(ideal_rep(g, &basis, String::new()));
    }
    let mut keyed: Vec<(usize, usize, QRep)> =
        out.into_iter().map(|r| (r.dim, g.order() - r.kernel(g).order(), r)).collect();
    keyed.sort_by_key(|(d, k, _)| (*d, *k));
    let mut irreps: Vec<QRep> = keyed.into_iter().map(|(_, _, r)| r).collect();
    let total: usize = irreps
        .iter()
        .map(|r| r.dim * r.dim / rep_hom_space(g, r, r).len())
        .sum();
    if total != g.order() {
        return Err(Error::Unsupported(format!(
            "irreducible decomposition of Q[{}] failed its dimension check",
            g.label()
        )));
    }
    let sign_like: Vec<usize> = irreps
        .iter()
        .enumerate()
        .filter(|(_, r)| r.dim == 1 && 2 * r.kernel(g).order() == g.order())
        .map(|(i, _)| i)
        .collect();
    for (i, r) in irreps.iter_mut().enumerate() {
        r.label = if i == 0 {
            "trivial".into()
        } else if sign_like == [i] {
            "sign".into()
        } else {
            format!("irr{i}")
        };
    }
    Ok(irreps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::quotient;

    /// Oracle for abelian groups: one faithful representation of each cyclic
    /// quotient, by a companion matrix of the cyclotomic polynomial.
    fn cyclic_quotient_irreps(g: &FiniteGroup) -> Vec<QRep> {
        let lattice = SubgroupLattice::new(g).unwrap();
        let mut out = Vec::new();
        for k in lattice.subgroups() {
            let (qg, proj) = quotient(g, k).unwrap();
            let m = qg.order();
            let Some(gen) = qg.elements().find(|&x| qg.element_order(x) == m) else { continue };
            let mut log = vec![0; m];
            let mut x = qg.identity();
            for i in 0..m {
                log[x] = i;
                x = qg.mul(x, gen);
            }
            let phi = cyclotomic(m);
            let d = phi.len() - 1;
            let mut c = QMatrix::zeros(d, d);
            for i in 1..d {
                c[(i, i - 1)] = q(1);
            }
            for i in 0..d {
                c[(i, d - 1)] = q(-phi[i]);
            }
            let mut powers = vec![QMatrix::identity(d)];
            for i in 1..m {
                powers.push(&powers[i - 1] * &c);
            }
            let mats = g.elements().map(|a| powers[log[proj.apply(a)]].clone()).collect();
            out.push(QRep::new(g, format!("C{m}"), mats).unwrap());
        }
        out
    }

    /// Coefficients, constant term first.
    fn cyclotomic(n: usize) -> Vec<i64> {
        let mut p = vec![0i64; n + 1];
        p[0] = -1;
        p[n] = 1;
        for d in 1..n {
            if n % d == 0 {
                let f = cyclotomic(d);
                let mut rem = p.clone();
                let mut quo = vec![0i64; rem.len() - f.len() + 1];
                for i in (0..quo.len()).rev() {
                    let c = rem[i + f.len() - 1];
                    quo[i] = c;
                    for (j, fj) in f.iter().enumerate() {
                        rem[i + j] -= c * fj;
                    }
                }
                p = quo;
            }
        }
        p
    }

    #[test]
    fn cyclotomic_polynomials() {
        assert_eq!(cyclotomic(1), vec![-1, 1]);
        assert_eq!(cyclotomic(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic(6), vec![1, -1, 1]);
    }

    #[test]
    fn abelian_irreducibles_match_cyclic_quotients() {
        for sel in ["cyclic:2", "cyclic:3", "cyclic:4", "cyclic:6", "prod:cyclic:2,cyclic:2", "prod:cyclic:2,cyclic:4"] {
            let g = FiniteGroup::from_selector(sel).unwrap();
            let ours = rational_irreducibles(&g).unwrap();
            let oracle = cyclic_quotient_irreps(&g);
            assert_eq!(ours.len(), oracle.len(), "{sel}");
            for r in &ours {
                let matches = oracle.iter().filter(|o| !rep_hom_space(&g, r, o).is_empty()).count();
                assert_eq!(matches, 1, "{sel} {}", r.label);
            }
        }
    }

    #[test]
    fn nonabelian_irreducibles() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let dims: Vec<usize> = rational_irreducibles(&s3).unwrap().iter().map(|r| r.dim).collect();
        assert_eq!(dims, vec![1, 1, 2]);
        let s4 = FiniteGroup::symmetric(4).unwrap();
        let dims: Vec<usize> = rational_irreducibles(&s4).unwrap().iter().map(|r| r.dim).collect();
        assert_eq!(dims, vec![1, 1, 2, 3, 3]);
        let d8 = FiniteGroup::dihedral(8).unwrap();
        assert_eq!(rational_irreducibles(&d8).unwrap().len(), 5);
    }

    #[test]
    fn irreducibles_are_valid_and_pairwise_distinct() {
        for sel in ["sym:3", "dihedral:8", "cyclic:5"] {
            let g = FiniteGroup::from_selector(sel).unwrap();
            let irr = rational_irreducibles(&g).unwrap();
            for (i, a) in irr.iter().enumerate() {
                QRep::new(&g, "check", a.matrices.clone()).unwrap();
                for (j, b) in irr.iter().enumerate() {
                    assert_eq!(rep_hom_space(&g, a, b).is_empty(), i != j, "{sel}");
                }
            }
            assert_eq!(irr[0].label, "trivial");
        }
    }

    #[test]
    fn c2_has_a_sign() {
        let g = FiniteGroup::cyclic(2);
        let irr = rational_irreducibles(&g).unwrap();
        assert_eq!(irr[1].label, "sign");
        assert_eq!(irr[1].matrices[1], QMatrix::from_i64(&[&[-1]]));
    }
}
