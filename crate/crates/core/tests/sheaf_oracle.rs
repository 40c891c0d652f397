mod common;

use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use profinite_core::sheaf::{
    constant_q, godement_i0, godement_resolution, hom_sheaf, random_sheaf, skyscraper_q, stalk_vanishing_check,
    weyl_check, EqSheaf, GodementResolution, SheafBase, Site, Stalk,
};

const BASES: &[&str] = &["spzp:2", "spzp:3", "spzp:2:2", "sequence:cyclic:2", "sequence:sym:3", "discrete:3"];

fn base(d: &str) -> SheafBase {
    SheafBase::from_descriptor(d).unwrap_or_else(|e| panic!("{d}: {e}"))
}

fn sheaves(seed: u64, per_base: usize) -> Vec<EqSheaf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BASES
        .iter()
        .flat_map(|d| {
            let b = base(d);
            (0..per_base).map(|_| random_sheaf(&b, &mut rng, 2).unwrap()).collect::<Vec<_>>()
        })
        .collect()
}

fn fixed_dim(s: &Stalk) -> usize {
    let traces: Vec<i64> = s
        .action
        .iter()
        .map(|m| {
            let t = (0..m.rows()).fold(num_rational::BigRational::from_integer(0.into()), |a, i| a + &m.row(i)[i]);
            t.to_integer().to_i64().unwrap()
        })
        .collect();
    common::fixed_dim_by_characters(&traces)
}

#[test]
fn random_sheaves_satisfy_weyl() {
    for e in sheaves(1, 6) {
        let r = weyl_check(&e);
        assert!(r.holds, "{}: {:?}", e.base().descriptor(), r.failures);
    }
}

#[test]
fn resolution_stalks_vanish_below_height() {
    let all = sheaves(7, 5);
    assert!(all.len() >= 20);
    let mut violations = 0;
    for e in &all {
        let res = godement_resolution(e, 4).unwrap();
        res.verify().unwrap();
        let h = e.base().site_heights().unwrap();
        violations += stalk_vanishing_check(&res, &h).unwrap().violations.len();
    }
    assert_eq!(violations, 0);
}

// Alternating sums of stalk dimensions along an exact sequence vanish.
fn euler_defect(res: &GodementResolution) -> Vec<(Site, i64)> {
    let (h, m) = res.shape();
    let input = res.input.reshape(h, m).unwrap();
    let stages: Vec<EqSheaf> = res.stages.iter().map(|s| s.reshape(h, m).unwrap()).collect();
    input
        .all_sites()
        .into_iter()
        .map(|site| {
            let alt: i64 = stages
                .iter()
                .enumerate()
                .map(|(n, s)| if n % 2 == 0 { s.stalk(site).dim as i64 } else { -(s.stalk(site).dim as i64) })
                .sum();
            (site, alt - input.stalk(site).dim as i64)
        })
        .filter(|(_, d)| *d != 0)
        .collect()
}

#[test]
fn terminated_resolutions_have_zero_euler_characteristic() {
    for e in sheaves(3, 4) {
        let res = godement_resolution(&e, 4).unwrap();
        assert!(res.terminated);
        assert_eq!(euler_defect(&res), vec![], "{}", e.base().descriptor());
        assert!(res.length().unwrap() <= 1);
    }
}

#[test]
fn i0_has_the_input_at_isolated_points() {
    for e in sheaves(5, 3) {
        let step = godement_i0(&e).unwrap();
        let (h, m) = step.sheaf.shape();
        let src = e.reshape(h, m).unwrap();
        for site in src.all_sites() {
            if site != Site::Limit {
                assert_eq!(step.sheaf.stalk(site).dim, src.stalk(site).dim, "{site}");
            }
        }
        assert!(step.delta.is_injective());
    }
}

#[test]
fn skyscraper_homs_are_fixed_vectors() {
    for e in sheaves(11, 3) {
        let deep = (0..e.period()).filter(|_| e.base().has_tail()).map(|j| Site::Tail(e.head_len() + j));
        let sites = e.all_sites().into_iter().filter(|s| matches!(s, Site::Orbit(_) | Site::Tail(_)));
        for site in sites.chain(deep) {
            let sky = skyscraper_q(e.base(), site).unwrap();
            let want = fixed_dim(e.stalk(site));
            assert_eq!(hom_sheaf(&sky, &e).unwrap().dim(), want, "Hom(sky {site}, E)");
            assert_eq!(hom_sheaf(&e, &sky).unwrap().dim(), want, "Hom(E, sky {site})");
        }
    }
}

#[test]
fn constant_sheaf_resolution_has_length_one() {
    for p in [2, 3, 5] {
        let b = SheafBase::spzp(p, 1).unwrap();
        let res = godement_resolution(&constant_q(&b), 4).unwrap();
        res.verify().unwrap();
        assert_eq!(res.length(), Some(1));
        assert!(res.stages[2..].iter().all(EqSheaf::is_zero));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn json_round_trips(seed in any::<u64>(), which in 0usize..6) {
        let b = base(BASES[which]);
        let e = random_sheaf(&b, &mut ChaCha8Rng::seed_from_u64(seed), 2).unwrap();
        prop_assert_eq!(&EqSheaf::from_json(&e.to_json()).unwrap(), &e);
        let res = godement_resolution(&e, 3).unwrap();
        let back = GodementResolution::from_json(&res.to_json()).unwrap();
        back.verify().unwrap();
        prop_assert_eq!(back.to_json(), res.to_json());
    }

    #[test]
    fn hom_dims_add_over_sums(seed in any::<u64>(), which in 0usize..6) {
        let b = base(BASES[which]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (random_sheaf(&b, &mut rng, 2).unwrap(), random_sheaf(&b, &mut rng, 2).unwrap());
        let (xa, ya) = profinite_core::sheaf::align(&x, &y).unwrap();
        let s = xa.direct_sum(&ya).unwrap();
        let d = |a: &EqSheaf, b: &EqSheaf| hom_sheaf(a, b).unwrap().dim();
        prop_assert_eq!(d(&s, &x), d(&xa, &x) + d(&ya, &x));
    }
}
