mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use num_traits::ToPrimitive;
use proptest::prelude::*;

use profinite_core::burnside::BurnsideContext;
use profinite_core::group::FiniteGroup;
use profinite_core::homdim::{mackey_battery, mackey_ext1_audit};
use profinite_core::mackey::{ext, fixed_point, hom_space, representable_transitive};
use profinite_core::reps::{rational_irreducibles, QRep};

const SMALL: &[&str] = &["cyclic:2", "cyclic:3", "cyclic:4", "prod:cyclic:2,cyclic:2", "sym:3"];

fn ctx(sel: &str) -> Arc<BurnsideContext> {
    Arc::new(BurnsideContext::new(&FiniteGroup::from_selector(sel).unwrap()).unwrap())
}

fn rep(c: &BurnsideContext, i: usize) -> BTreeSet<usize> {
    c.lattice().rep_subgroup(i).elements().iter().copied().collect()
}

fn trace(v: &QRep, g: usize) -> i64 {
    let m = &v.matrices[g];
    let t = (0..m.rows()).fold(num_rational::BigRational::from_integer(0.into()), |acc, i| acc + &m.row(i)[i]);
    assert!(t.is_integer());
    t.to_integer().to_i64().unwrap()
}

#[test]
fn representable_homs_count_spans() {
    for sel in SMALL {
        let c = ctx(sel);
        let n = c.num_classes();
        let reps: Vec<_> = (0..n).map(|a| representable_transitive(&c, a)).collect();
        for a in 0..n {
            for b in 0..n {
                let want = common::transitive_span_count(c.group(), &rep(&c, a), &rep(&c, b));
                assert_eq!(hom_space(&reps[a], &reps[b]).len(), want, "{sel} {a},{b}");
            }
        }
    }
}

#[test]
fn fixed_point_dims_by_characters() {
    for sel in SMALL.iter().chain(&["dihedral:8"]) {
        let c = ctx(sel);
        for v in rational_irreducibles(c.group()).unwrap() {
            let m = fixed_point(&c, &v);
            for k in 0..c.num_classes() {
                let traces: Vec<i64> = rep(&c, k).iter().map(|&h| trace(&v, h)).collect();
                assert_eq!(m.dims()[k], common::fixed_dim_by_characters(&traces), "{sel} {} at {k}", v.label);
            }
            m.check_axioms().unwrap();
        }
    }
}

#[test]
fn irreducibles_exhaust_the_regular_representation() {
    for sel in SMALL.iter().chain(&["dihedral:8"]) {
        let g = FiniteGroup::from_selector(sel).unwrap();
        let irr = rational_irreducibles(&g).unwrap();
        // Each irreducible V occurs in Q[G] with multiplicity dim V / dim End(V),
        // so the sum of dim(V)^2 / dim End(V) is |G|.
        let total: usize = irr
            .iter()
            .map(|v| {
                let traces: Vec<i64> = g.elements().map(|x| trace(v, x) * trace(v, x)).collect();
                let end = common::fixed_dim_by_characters(&traces);
                v.dim * v.dim / end
            })
            .sum();
        assert_eq!(total, g.order(), "{sel}");
    }
}

#[test]
fn ext1_vanishes_on_the_battery() {
    let start = Instant::now();
    for sel in SMALL {
        let audit = mackey_ext1_audit(&ctx(sel)).unwrap();
        assert!(audit.nonzero_ext1.is_empty(), "{sel}: {:?}", audit.nonzero_ext1);
        assert_eq!(audit.pairs, audit.functors.len() * audit.functors.len());
    }
    assert!(start.elapsed().as_secs_f64() < 60.0, "took {:?}", start.elapsed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hom_is_additive(sel in prop::sample::select(SMALL.to_vec()), i in 0usize..8, j in 0usize..8, k in 0usize..8) {
        let c = ctx(sel);
        let b = mackey_battery(&c).unwrap();
        let (x, y, z) = (&b[i % b.len()], &b[j % b.len()], &b[k % b.len()]);
        let sum = x.direct_sum(y);
        prop_assert_eq!(hom_space(&sum, z).len(), hom_space(x, z).len() + hom_space(y, z).len());
        prop_assert_eq!(hom_space(z, &sum).len(), hom_space(z, x).len() + hom_space(z, y).len());
        prop_assert_eq!(ext(&sum, z, 1), 0);
    }
}
