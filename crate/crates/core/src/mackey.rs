//! Rational Mackey functors on a finite group.
//!
//! A functor is stored on subgroup class representatives: `res[c][K]` and
//! `ind[c][K]` for every subgroup `K` of the representative `R_c`, and
//! `conj[c][n]` for `n` in the normaliser of `R_c`. The value at a conjugate
//! `S = t R t^-1` is identified with the value at `R` through `c_t`, `t` being
//! the lattice's transport element, so every value is written in the
//! coordinates of its class representative.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burnside::{BurnsideContext, FiniteGSet, Span, SpanClass};
use crate::error::{Error, Result};
use crate::group::{FiniteGroup, Subgroup};
use crate::linalg::{q, QMatrix, Q};
use crate::reps::QRep;

#[derive(Clone, Debug)]
pub struct MackeyFunctorQ {
    ctx: Arc<BurnsideContext>,
    label: String,
    dims: Vec<usize>,
    res: Vec<BTreeMap<usize, QMatrix>>,
    ind: Vec<BTreeMap<usize, QMatrix>>,
    conj: Vec<BTreeMap<usize, QMatrix>>,
}

impl PartialEq for MackeyFunctorQ {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.group() == other.ctx.group()
            && self.dims == other.dims
            && self.res == other.res
            && self.ind == other.ind
            && self.conj == other.conj
    }
}

/// Subgroup indices of all subgroups of `S`, ascending.
fn subgroups_below(ctx: &BurnsideContext, s: usize) -> Vec<usize> {
    let lat = ctx.lattice();
    let top = lat.subgroup(s);
    (0..lat.len()).filter(|&k| lat.subgroup(k).is_subgroup_of(top)).collect()
}

/// Representatives of the double cosets `J x K` inside `H`, least element first.
pub fn double_coset_reps(g: &FiniteGroup, j: &Subgroup, h: &Subgroup, k: &Subgroup) -> Vec<usize> {
    let mut seen = vec![false; g.order()];
    let mut reps = Vec::new();
    for &x in h.elements() {
        if seen[x] {
            continue;
        }
        reps.push(x);
        for &a in j.elements() {
            let ax = g.mul(a, x);
            for &b in k.elements() {
                seen[g.mul(ax, b)] = true;
            }
        }
    }
    reps
}

/// Left coset representatives of `K` in `H`.
fn left_coset_reps(g: &FiniteGroup, h: &Subgroup, k: &Subgroup) -> Vec<usize> {
    double_coset_reps(g, &Subgroup::trivial(g), h, k)
}

fn violation(msg: String) -> Error {
    Error::AxiomViolation(msg)
}

impl MackeyFunctorQ {
    /// Validates shapes and every Mackey axiom.
    pub fn new(
        ctx: &Arc<BurnsideContext>,
        label: impl Into<String>,
        dims: Vec<usize>,
        res: Vec<BTreeMap<usize, QMatrix>>,
        ind: Vec<BTreeMap<usize, QMatrix>>,
        conj: Vec<BTreeMap<usize, QMatrix>>,
    ) -> Result<Self> {
        let m = MackeyFunctorQ { ctx: ctx.clone(), label: label.into(), dims, res, ind, conj };
        m.check_shapes()?;
        m.check_axioms()?;
        Ok(m)
    }

    pub fn zero(ctx: &Arc<BurnsideContext>) -> Self {
        let n = ctx.num_classes();
        let dims = vec![0; n];
        let mut res = Vec::new();
        let mut conj = Vec::new();
        for c in 0..n {
            let r = ctx.lattice().rep(c);
            res.push(subgroups_below(ctx, r).into_iter().map(|k| (k, QMatrix::zeros(0, 0))).collect());
            conj.push(ctx.lattice().normalizer(r).elements().iter().map(|&x| (x, QMatrix::zeros(0, 0))).collect());
        }
        MackeyFunctorQ { ctx: ctx.clone(), label: "zero".into(), dims, ind: res.clone(), res, conj }
    }

    pub fn context(&self) -> &Arc<BurnsideContext> {
        &self.ctx
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// `res^{R_c}_K` for a subgroup index `K` of the representative.
    pub fn res(&self, c: usize, k: usize) -> &QMatrix {
        &self.res[c][&k]
    }

    pub fn ind(&self, c: usize, k: usize) -> &QMatrix {
        &self.ind[c][&k]
    }

    pub fn conj(&self, c: usize, n: usize) -> &QMatrix {
        &self.conj[c][&n]
    }

    fn check_shapes(&self) -> Result<()> {
        let ctx = &self.ctx;
        let lat = ctx.lattice();
        let n = ctx.num_classes();
        if self.dims.len() != n || self.res.len() != n || self.ind.len() != n || self.conj.len() != n {
            return Err(Error::Parse(format!("expected data for {n} subgroup classes")));
        }
        for c in 0..n {
            let r = lat.rep(c);
            let below = subgroups_below(ctx, r);
            for (name, maps) in [("res", &self.res[c]), ("ind", &self.ind[c])] {
                if !maps.keys().copied().eq(below.iter().copied()) {
                    return Err(Error::Parse(format!("{name} at class {c} must cover every subgroup of the representative")));
                }
                for (&k, m) in maps {
                    let (dk, dc) = (self.dims[lat.class_of(k)], self.dims[c]);
                    let want = if name == "res" { (dk, dc) } else { (dc, dk) };
                    if m.shape() != want {
                        return Err(Error::Parse(format!("{name} at class {c}, subgroup {k} has shape {:?}, want {want:?}", m.shape())));
                    }
                }
            }
            let norm = lat.normalizer(r).elements();
            if !self.conj[c].keys().copied().eq(norm.iter().copied()) {
                return Err(Error::Parse(format!("conj at class {c} must cover the normaliser")));
            }
            if self.conj[c].values().any(|m| m.shape() != (self.dims[c], self.dims[c])) {
                return Err(Error::Parse(format!("conj at class {c} must be square")));
            }
        }
        Ok(())
    }

    /// `c_g : M(S) -> M(gSg^-1)`.
    pub fn conj_any(&self, s: usize, g: usize) -> QMatrix {
        let lat = self.ctx.lattice();
        let grp = self.ctx.group();
        let target = lat.conj(g, s);
        let n = grp.mul(grp.mul(grp.inv(lat.transport(target)), g), lat.transport(s));
        self.conj[lat.class_of(s)][&n].clone()
    }

    /// `res^H_K` for arbitrary subgroup indices `K <= H`.
    pub fn res_any(&self, h: usize, k: usize) -> QMatrix {
        let lat = self.ctx.lattice();
        let t = lat.transport(h);
        let kk = lat.conj(self.ctx.group().inv(t), k);
        &self.conj_any(kk, t) * &self.res[lat.class_of(h)][&kk]
    }

    /// `ind^H_K` for arbitrary subgroup indices `K <= H`.
    pub fn ind_any(&self, h: usize, k: usize) -> QMatrix {
        let lat = self.ctx.lattice();
        let t = lat.transport(h);
        let ti = self.ctx.group().inv(t);
        let kk = lat.conj(ti, k);
        &self.ind[lat.class_of(h)][&kk] * &self.conj_any(k, ti)
    }

    pub fn check_axioms(&self) -> Result<()> {
        let ctx = &self.ctx;
        let lat = ctx.lattice();
        let g = ctx.group();
        for c in 0..ctx.num_classes() {
            let r = lat.rep(c);
            let rsub = lat.subgroup(r);
            if !self.res[c][&r].is_identity() || !self.ind[c][&r].is_identity() {
                return Err(violation(format!("res/ind at class {c} to itself is not the identity")));
            }
            for &h in rsub.elements() {
                if !self.conj[c][&h].is_identity() {
                    return Err(violation(format!("inner conjugation by {h} at class {c} is not the identity")));
                }
            }
            for (&a, ma) in &self.conj[c] {
                for (&b, mb) in &self.conj[c] {
                    if &self.conj[c][&g.mul(a, b)] != &(ma * mb) {
                        return Err(violation(format!("conjugation at class {c} is not multiplicative at ({a}, {b})")));
                    }
                }
            }
            let below = subgroups_below(ctx, r);
            for &j in &below {
                for &k in &below {
                    if !lat.subgroup(k).is_subgroup_of(lat.subgroup(j)) {
                        continue;
                    }
                    if &self.res_any(j, k) * &self.res[c][&j] != self.res[c][&k] {
                        return Err(violation(format!("restriction is not transitive at class {c} via {j} to {k}")));
                    }
                    if &self.ind[c][&j] * &self.ind_any(j, k) != self.ind[c][&k] {
                        return Err(violation(format!("induction is not transitive at class {c} via {j} from {k}")));
                    }
                }
            }
            for x in g.elements() {
                let rx = lat.conj(x, r);
                let cr = self.conj_any(r, x);
                for &k in &below {
                    let kx = lat.conj(x, k);
                    let ck = self.conj_any(k, x);
                    if &ck * &self.res[c][&k] != &self.res_any(rx, kx) * &cr {
                        return Err(violation(format!("restriction is not equivariant at class {c}, subgroup {k}, element {x}")));
                    }
                    if &cr * &self.ind[c][&k] != &self.ind_any(rx, kx) * &ck {
                        return Err(violation(format!("induction is not equivariant at class {c}, subgroup {k}, element {x}")));
                    }
                }
            }
            for &j in &below {
                for &k in &below {
                    let (js, ks) = (lat.subgroup(j), lat.subgroup(k));
                    let lhs = &self.res[c][&j] * &self.ind[c][&k];
                    let mut rhs = QMatrix::zeros(self.dims[lat.class_of(j)], self.dims[lat.class_of(k)]);
                    for x in double_coset_reps(g, js, rsub, ks) {
                        let xkx = lat.conj(x, k);
                        let upper = lat.index_of(&js.intersect(lat.subgroup(xkx))).expect("intersection is listed");
                        let lower = lat.conj(g.inv(x), upper);
                        let term = &(&self.ind_any(j, upper) * &self.conj_any(lower, x)) * &self.res_any(k, lower);
                        rhs = &rhs + &term;
                    }
                    if lhs != rhs {
                        return Err(violation(format!("double coset formula fails at class {c} for ({j}, {k})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Matrix of a transitive basis span `G/H_i -> G/H_j`: restrict along the
    /// left leg, conjugate, induce along the right leg.
    fn span_matrix(&self, i: usize, j: usize, b: &SpanClass) -> QMatrix {
        let ctx = &self.ctx;
        let lat = ctx.lattice();
        let g = ctx.group();
        let l = lat.rep(b.class);
        let x = ctx.coset_reps(i)[b.left];
        let y = ctx.coset_reps(j)[b.right];
        let a = lat.conj(g.inv(x), l);
        let bb = lat.conj(g.inv(y), l);
        let (hi, hj) = (lat.rep(i), lat.rep(j));
        &(&self.ind_any(hj, bb) * &self.conj_any(a, g.mul(g.inv(y), x))) * &self.res_any(hi, a)
    }

    pub fn to_span_functor(&self) -> SpanFunctorQ {
        let n = self.ctx.num_classes();
        let maps = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.ctx.transitive_hom_basis(i, j).iter().map(|b| self.span_matrix(i, j, b)).collect())
                    .collect()
            })
            .collect();
        SpanFunctorQ { ctx: self.ctx.clone(), label: self.label.clone(), dims: self.dims.clone(), maps }
    }

    /// Reads restriction, induction and conjugation off one-legged spans.
    pub fn from_span_functor(f: &SpanFunctorQ) -> Self {
        let ctx = &f.ctx;
        let lat = ctx.lattice();
        let g = ctx.group();
        let n = ctx.num_classes();
        let mut res = vec![BTreeMap::new(); n];
        let mut ind = vec![BTreeMap::new(); n];
        let mut conj = vec![BTreeMap::new(); n];
        for r in 0..n {
            let tr = ctx.transitive(r);
            for k in subgroups_below(ctx, lat.rep(r)) {
                let kc = lat.class_of(k);
                let tk = ctx.transitive(kc);
                let left = ctx.coset_of(r, g.inv(lat.transport(k)));
                let down = ctx.canonical_class(kc, tr, tk, left, 0);
                let up = ctx.canonical_class(kc, tk, tr, 0, left);
                res[r].insert(k, f.apply_class(r, kc, &down).clone());
                ind[r].insert(k, f.apply_class(kc, r, &up).clone());
            }
            for &x in lat.normalizer(lat.rep(r)).elements() {
                let cls = ctx.canonical_class(r, tr, tr, ctx.coset_of(r, x), 0);
                conj[r].insert(x, f.apply_class(r, r, &cls).clone());
            }
        }
        MackeyFunctorQ { ctx: ctx.clone(), label: f.label.clone(), dims: f.dims.clone(), res, ind, conj }
    }

    pub fn direct_sum(&self, other: &MackeyFunctorQ) -> MackeyFunctorQ {
        let bd = |a: &BTreeMap<usize, QMatrix>, b: &BTreeMap<usize, QMatrix>| -> BTreeMap<usize, QMatrix> {
            a.iter().map(|(k, m)| (*k, QMatrix::block_diag(&[m.clone(), b[k].clone()]))).collect()
        };
        let n = self.dims.len();
        MackeyFunctorQ {
            ctx: self.ctx.clone(),
            label: format!("{}+{}", self.label, other.label),
            dims: (0..n).map(|c| self.dims[c] + other.dims[c]).collect(),
            res: (0..n).map(|c| bd(&self.res[c], &other.res[c])).collect(),
            ind: (0..n).map(|c| bd(&self.ind[c], &other.ind[c])).collect(),
            conj: (0..n).map(|c| bd(&self.conj[c], &other.conj[c])).collect(),
        }
    }

    /// Transports the functor along per-class changes of basis (`new = P old`).
    fn change_basis(&self, p: &[QMatrix], pinv: &[QMatrix], dims: Vec<usize>, label: String) -> MackeyFunctorQ {
        let lat = self.ctx.lattice();
        let n = self.dims.len();
        let mut res = vec![BTreeMap::new(); n];
        let mut ind = vec![BTreeMap::new(); n];
        let mut conj = vec![BTreeMap::new(); n];
        for c in 0..n {
            for (&k, m) in &self.res[c] {
                res[c].insert(k, &(&p[lat.class_of(k)] * m) * &pinv[c]);
            }
            for (&k, m) in &self.ind[c] {
                ind[c].insert(k, &(&p[c] * m) * &pinv[lat.class_of(k)]);
            }
            for (&x, m) in &self.conj[c] {
                conj[c].insert(x, &(&p[c] * m) * &pinv[c]);
            }
        }
        MackeyFunctorQ { ctx: self.ctx.clone(), label, dims, res, ind, conj }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let lat = self.ctx.lattice();
        let mut res = Vec::new();
        let mut ind = Vec::new();
        let mut conj = Vec::new();
        for c in 0..self.dims.len() {
            for (&k, m) in &self.res[c] {
                res.push(MapEntry { class: c, subgroup: Some(lat.subgroup(k).elements().to_vec()), element: None, matrix: m.to_strings() });
            }
            for (&k, m) in &self.ind[c] {
                ind.push(MapEntry { class: c, subgroup: Some(lat.subgroup(k).elements().to_vec()), element: None, matrix: m.to_strings() });
            }
            for (&x, m) in &self.conj[c] {
                conj.push(MapEntry { class: c, subgroup: None, element: Some(x), matrix: m.to_strings() });
            }
        }
        serde_json::to_value(MackeyJson {
            group: self.ctx.group().label().to_string(),
            label: self.label.clone(),
            classes: (0..self.dims.len()).map(|c| lat.rep_subgroup(c).elements().to_vec()).collect(),
            dims: self.dims.clone(),
            res,
            ind,
            conj,
        })
        .expect("serializable")
    }

    pub fn from_json(ctx: &Arc<BurnsideContext>, v: &serde_json::Value) -> Result<Self> {
        let data: MackeyJson = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let lat = ctx.lattice();
        let g = ctx.group();
        let n = ctx.num_classes();
        if data.dims.len() != n {
            return Err(Error::Parse(format!("expected {n} dimensions")));
        }
        let dims = data.dims.clone();
        let mut res = vec![BTreeMap::new(); n];
        let mut ind = vec![BTreeMap::new(); n];
        let mut conj = vec![BTreeMap::new(); n];
        for (name, entries) in [("res", &data.res), ("ind", &data.ind)] {
            for e in entries {
                if e.class >= n {
                    return Err(Error::Parse(format!("{name}: class {} out of range", e.class)));
                }
                let elems = e.subgroup.clone().ok_or_else(|| Error::Parse(format!("{name}: missing subgroup")))?;
                let k = lat
                    .index_of(&Subgroup::new(g, elems)?)
                    .ok_or_else(|| Error::Parse(format!("{name}: unknown subgroup")))?;
                let kc = lat.class_of(k);
                let (rows, cols) = if name == "res" { (dims[kc], dims[e.class]) } else { (dims[e.class], dims[kc]) };
                let m = QMatrix::from_strings(rows, cols, &e.matrix).map_err(Error::Parse)?;
                let target = if name == "res" { &mut res } else { &mut ind };
                target[e.class].insert(k, m);
            }
        }
        for e in &data.conj {
            if e.class >= n {
                return Err(Error::Parse(format!("conj: class {} out of range", e.class)));
            }
            let x = e.element.ok_or_else(|| Error::Parse("conj: missing element".into()))?;
            let d = dims[e.class];
            conj[e.class].insert(x, QMatrix::from_strings(d, d, &e.matrix).map_err(Error::Parse)?);
        }
        MackeyFunctorQ::new(ctx, data.label, dims, res, ind, conj)
    }
}

#[derive(Serialize, Deserialize)]
struct MapEntry {
    class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subgroup: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    element: Option<usize>,
    matrix: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct MackeyJson {
    group: String,
    label: String,
    #[serde(default)]
    classes: Vec<Vec<usize>>,
    dims: Vec<usize>,
    res: Vec<MapEntry>,
    ind: Vec<MapEntry>,
    conj: Vec<MapEntry>,
}

/// An additive functor on the Burnside category, recorded on the transitive
/// skeleton: `maps[i][j][b]` is the value of the `b`-th basis span
/// `G/H_i -> G/H_j`. Composition is diagrammatic, so the value of
/// `s` then `t` is `F(t) F(s)`.
#[derive(Clone, Debug)]
pub struct SpanFunctorQ {
    ctx: Arc<BurnsideContext>,
    label: String,
    dims: Vec<usize>,
    maps: Vec<Vec<Vec<QMatrix>>>,
}

impl SpanFunctorQ {
    pub fn new(ctx: &Arc<BurnsideContext>, label: impl Into<String>, dims: Vec<usize>, maps: Vec<Vec<Vec<QMatrix>>>) -> Result<Self> {
        let n = ctx.num_classes();
        if dims.len() != n || maps.len() != n || maps.iter().any(|row| row.len() != n) {
            return Err(Error::Parse(format!("expected data for {n} subgroup classes")));
        }
        for i in 0..n {
            for j in 0..n {
                if maps[i][j].len() != ctx.transitive_hom_basis(i, j).len()
                    || maps[i][j].iter().any(|m| m.shape() != (dims[j], dims[i]))
                {
                    return Err(Error::Parse(format!("span matrices {i} -> {j} have the wrong count or shape")));
                }
            }
        }
        let f = SpanFunctorQ { ctx: ctx.clone(), label: label.into(), dims, maps };
        f.check_functoriality()?;
        Ok(f)
    }

    pub fn context(&self) -> &Arc<BurnsideContext> {
        &self.ctx
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn maps(&self, i: usize, j: usize) -> &[QMatrix] {
        &self.maps[i][j]
    }

    pub fn apply_class(&self, i: usize, j: usize, b: &SpanClass) -> &QMatrix {
        &self.maps[i][j][self.ctx.basis_position(i, j, b)]
    }

    pub fn check_functoriality(&self) -> Result<()> {
        let ctx = &self.ctx;
        let n = ctx.num_classes();
        for i in 0..n {
            let id = SpanClass { class: i, left: 0, right: 0 };
            if !self.apply_class(i, i, &id).is_identity() {
                return Err(violation(format!("identity span of class {i} does not act as the identity")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                for (b1, m1) in ctx.transitive_hom_basis(i, j).iter().zip(&self.maps[i][j]) {
                    for k in 0..n {
                        for (b2, m2) in ctx.transitive_hom_basis(j, k).iter().zip(&self.maps[j][k]) {
                            let mut sum = QMatrix::zeros(self.dims[k], self.dims[i]);
                            for c in ctx.compose_transitive(i, j, k, *b1, *b2) {
                                sum = &sum + self.apply_class(i, k, &c);
                            }
                            if sum != m2 * m1 {
                                return Err(violation(format!("composition {i} -> {j} -> {k} is not preserved")));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Value on an arbitrary span, extended additively over the orbits of
    /// source, apex and target. Rows and columns follow the orbit order of
    /// `orbit_decompose`.
    pub fn evaluate_span(&self, s: &Span) -> QMatrix {
        let ctx = &self.ctx;
        let g = ctx.group();
        let src = ctx.orbit_decompose(&s.source).orbits;
        let tgt = ctx.orbit_decompose(&s.target).orbits;
        let offsets = |orbits: &[(usize, usize)]| {
            let mut v = vec![0];
            for &(c, _) in orbits {
                v.push(v.last().unwrap() + self.dims[c]);
            }
            v
        };
        let (so, to) = (offsets(&src), offsets(&tgt));
        let locate = |x: &FiniteGSet, orbits: &[(usize, usize)], p: usize| -> (usize, usize) {
            for (o, &(c, base)) in orbits.iter().enumerate() {
                if let Some(h) = g.elements().find(|&h| x.act(h, base) == p) {
                    return (o, ctx.coset_of(c, h));
                }
            }
            unreachable!("every point lies in an orbit")
        };
        let mut out = QMatrix::zeros(*to.last().unwrap(), *so.last().unwrap());
        for (class, m) in ctx.orbit_decompose(&s.apex).orbits {
            let (a, xa) = locate(&s.source, &src, s.left[m]);
            let (b, yb) = locate(&s.target, &tgt, s.right[m]);
            let (ca, cb) = (src[a].0, tgt[b].0);
            let k = ctx.canonical_class(class, ctx.transitive(ca), ctx.transitive(cb), xa, yb);
            let block = self.apply_class(ca, cb, &k);
            let mut cur = out.block(to[b], so[a], block.rows(), block.cols());
            cur = &cur + block;
            out.set_block(to[b], so[a], &cur);
        }
        out
    }
}

/// `Span(-, G/H_a) ⊗ Q` as a span functor; a span `s` acts by precomposition
/// with its reverse.
pub fn representable_span(ctx: &Arc<BurnsideContext>, a: usize) -> SpanFunctorQ {
    let n = ctx.num_classes();
    let dims: Vec<usize> = (0..n).map(|i| ctx.transitive_hom_basis(i, a).len()).collect();
    let maps = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    ctx.transitive_hom_basis(i, j)
                        .iter()
                        .map(|b| {
                            let rev = ctx.reverse_transitive(i, j, b);
                            let mut m = QMatrix::zeros(dims[j], dims[i]);
                            for (col, t) in ctx.transitive_hom_basis(i, a).iter().enumerate() {
                                for c in ctx.compose_transitive(j, i, a, rev, *t) {
                                    m[(ctx.basis_position(j, a, &c), col)] += q(1);
                                }
                            }
                            m
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    SpanFunctorQ { ctx: ctx.clone(), label: format!("representable:{a}"), dims, maps }
}

pub fn representable_transitive(ctx: &Arc<BurnsideContext>, a: usize) -> MackeyFunctorQ {
    MackeyFunctorQ::from_span_functor(&representable_span(ctx, a))
}

/// `Span(-, A) ⊗ Q`, one summand per orbit of `A`.
pub fn representable(ctx: &Arc<BurnsideContext>, a: &FiniteGSet) -> MackeyFunctorQ {
    let dec = ctx.orbit_decompose(a);
    let label = format!("representable[{}]", dec.orbits.iter().map(|(c, _)| c.to_string()).collect::<Vec<_>>().join(","));
    let mut parts = dec.orbits.iter().map(|&(c, _)| representable_transitive(ctx, c));
    let first = parts.next().unwrap_or_else(|| MackeyFunctorQ::zero(ctx));
    parts
        .fold(first, |acc, p| acc.direct_sum(&p))
        .with_label(label)
}

/// `H -> V^H` with inclusions as restrictions and transfers as inductions.
pub fn fixed_point(ctx: &Arc<BurnsideContext>, v: &QRep) -> MackeyFunctorQ {
    let lat = ctx.lattice();
    let g = ctx.group();
    let n = ctx.num_classes();
    let bases: Vec<QMatrix> = (0..n).map(|c| v.fixed_subspace(lat.rep_subgroup(c))).collect();
    let mut res = vec![BTreeMap::new(); n];
    let mut ind = vec![BTreeMap::new(); n];
    let mut conj = vec![BTreeMap::new(); n];
    for c in 0..n {
        let r = lat.rep(c);
        let rs = lat.subgroup(r);
        for k in subgroups_below(ctx, r) {
            let w = &v.matrices[lat.transport(k)] * &bases[lat.class_of(k)];
            res[c].insert(k, w.solve(&bases[c]).expect("fixed vectors of R are fixed by K"));
            let mut transfer = QMatrix::zeros(v.dim, v.dim);
            for h in left_coset_reps(g, rs, lat.subgroup(k)) {
                transfer = &transfer + &v.matrices[h];
            }
            ind[c].insert(k, bases[c].solve(&(&transfer * &w)).expect("transfer lands in V^R"));
        }
        for &x in lat.normalizer(r).elements() {
            conj[c].insert(x, bases[c].solve(&(&v.matrices[x] * &bases[c])).expect("normaliser preserves V^R"));
        }
    }
    MackeyFunctorQ { ctx: ctx.clone(), label: format!("fixedpoint:{}", v.label), dims: bases.iter().map(QMatrix::cols).collect(), res, ind, conj }
}

/// The rational Burnside functor `H -> A(H) ⊗ Q` on the basis of transitive
/// `H`-sets `H/K`, built from double cosets.
pub fn burnside_functor(ctx: &Arc<BurnsideContext>) -> MackeyFunctorQ {
    let lat = ctx.lattice();
    let g = ctx.group();
    let n = ctx.num_classes();
    // least member of the R_c-conjugacy class of each subgroup of R_c
    let canon = |c: usize, j: usize| -> usize {
        lat.rep_subgroup(c).elements().iter().map(|&r| lat.conj(r, j)).min().unwrap()
    };
    let basis: Vec<Vec<usize>> = (0..n)
        .map(|c| {
            let mut b: Vec<usize> = subgroups_below(ctx, lat.rep(c)).into_iter().filter(|&j| canon(c, j) == j).collect();
            b.sort_unstable();
            b
        })
        .collect();
    let pos = |c: usize, j: usize| basis[c].binary_search(&canon(c, j)).expect("subgroup lies below the representative");
    let mut res = vec![BTreeMap::new(); n];
    let mut ind = vec![BTreeMap::new(); n];
    let mut conj = vec![BTreeMap::new(); n];
    for c in 0..n {
        let r = lat.rep(c);
        let rs = lat.subgroup(r);
        for k in subgroups_below(ctx, r) {
            let kc = lat.class_of(k);
            let t = lat.transport(k);
            let ti = g.inv(t);
            let ks = lat.subgroup(k);
            let mut rm = QMatrix::zeros(basis[kc].len(), basis[c].len());
            for (col, &j) in basis[c].iter().enumerate() {
                for x in double_coset_reps(g, ks, rs, lat.subgroup(j)) {
                    let s = lat.index_of(&ks.intersect(lat.subgroup(lat.conj(x, j)))).unwrap();
                    rm[(pos(kc, lat.conj(ti, s)), col)] += q(1);
                }
            }
            res[c].insert(k, rm);
            let mut im = QMatrix::zeros(basis[c].len(), basis[kc].len());
            for (col, &j) in basis[kc].iter().enumerate() {
                im[(pos(c, lat.conj(t, j)), col)] += q(1);
            }
            ind[c].insert(k, im);
        }
        for &x in lat.normalizer(r).elements() {
            let mut cm = QMatrix::zeros(basis[c].len(), basis[c].len());
            for (col, &j) in basis[c].iter().enumerate() {
                cm[(pos(c, lat.conj(x, j)), col)] = q(1);
            }
            conj[c].insert(x, cm);
        }
    }
    MackeyFunctorQ { ctx: ctx.clone(), label: "burnside".into(), dims: basis.iter().map(Vec::len).collect(), res, ind, conj }
}

/// A natural transformation, one matrix per subgroup class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MackeyMorphism {
    pub maps: Vec<QMatrix>,
}

impl MackeyMorphism {
    pub fn zero(m: &MackeyFunctorQ, n: &MackeyFunctorQ) -> Self {
        MackeyMorphism { maps: m.dims.iter().zip(&n.dims).map(|(&a, &b)| QMatrix::zeros(b, a)).collect() }
    }

    pub fn identity(m: &MackeyFunctorQ) -> Self {
        MackeyMorphism { maps: m.dims.iter().map(|&d| QMatrix::identity(d)).collect() }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &MackeyMorphism) -> Self {
        MackeyMorphism { maps: self.maps.iter().zip(&next.maps).map(|(a, b)| b * a).collect() }
    }

    pub fn add(&self, other: &MackeyMorphism) -> Self {
        MackeyMorphism { maps: self.maps.iter().zip(&other.maps).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: &Q) -> Self {
        MackeyMorphism { maps: self.maps.iter().map(|a| a.scale(s)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.maps.iter().all(QMatrix::is_zero)
    }

    pub fn is_isomorphism(&self) -> bool {
        self.maps.iter().all(|m| m.rows() == m.cols() && m.rank() == m.rows())
    }

    /// Whether the maps commute with restriction, induction and conjugation.
    pub fn is_natural(&self, m: &MackeyFunctorQ, n: &MackeyFunctorQ) -> bool {
        let lat = m.ctx.lattice();
        for c in 0..m.dims.len() {
            if self.maps[c].shape() != (n.dims[c], m.dims[c]) {
                return false;
            }
        }
        (0..m.dims.len()).all(|c| {
            m.res[c].iter().all(|(&k, a)| {
                let kc = lat.class_of(k);
                &n.res[c][&k] * &self.maps[c] == &self.maps[kc] * a
                    && &n.ind[c][&k] * &self.maps[kc] == &self.maps[c] * &m.ind[c][&k]
            }) && m.conj[c].iter().all(|(&x, a)| &n.conj[c][&x] * &self.maps[c] == &self.maps[c] * a)
        })
    }
}

/// Basis of `Hom(M, N)` from the commuting-square equations.
pub fn hom_space(m: &MackeyFunctorQ, n: &MackeyFunctorQ) -> Vec<MackeyMorphism> {
    let lat = m.ctx.lattice();
    let classes = m.dims.len();
    let mut off = vec![0];
    for c in 0..classes {
        off.push(off[c] + m.dims[c] * n.dims[c]);
    }
    let unknowns = off[classes];
    if unknowns == 0 {
        return vec![];
    }
    let var = |c: usize, r: usize, s: usize| off[c] + r * m.dims[c] + s;
    let mut rows: Vec<Vec<Q>> = Vec::new();
    // A_N phi_from - phi_to A_M = 0
    let mut square = |from: usize, to: usize, am: &QMatrix, an: &QMatrix| {
        for r in 0..n.dims[to] {
            for s in 0..m.dims[from] {
                let mut row = vec![Q::zero(); unknowns];
                for k in 0..n.dims[from] {
                    if !an[(r, k)].is_zero() {
                        row[var(from, k, s)] += &an[(r, k)];
                    }
                }
                for k in 0..m.dims[to] {
                    if !am[(k, s)].is_zero() {
                        row[var(to, r, k)] -= &am[(k, s)];
                    }
                }
                if row.iter().any(|x| !x.is_zero()) {
                    rows.push(row);
                }
            }
        }
    };
    for c in 0..classes {
        for (&k, a) in &m.res[c] {
            let kc = lat.class_of(k);
            square(c, kc, a, &n.res[c][&k]);
            square(kc, c, &m.ind[c][&k], &n.ind[c][&k]);
        }
        for (&x, a) in &m.conj[c] {
            square(c, c, a, &n.conj[c][&x]);
        }
    }
    let sys = if rows.is_empty() { QMatrix::zeros(0, unknowns) } else { QMatrix::from_rows(rows) };
    sys.kernel()
        .columns()
        .into_iter()
        .map(|v| MackeyMorphism {
            maps: (0..classes)
                .map(|c| {
                    QMatrix::from_rows_shaped(
                        n.dims[c],
                        m.dims[c],
                        (0..n.dims[c]).map(|r| v[var(c, r, 0)..var(c, r, 0) + m.dims[c]].to_vec()).collect(),
                    )
                })
                .collect(),
        })
        .collect()
}

/// Searches `Hom(M, N)` for an isomorphism by seeded random combinations.
pub fn find_isomorphism(m: &MackeyFunctorQ, n: &MackeyFunctorQ, seed: u64) -> Option<MackeyMorphism> {
    if m.dims != n.dims {
        return None;
    }
    if m.total_dim() == 0 {
        return Some(MackeyMorphism::zero(m, n));
    }
    let basis = hom_space(m, n);
    if basis.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..32 {
        let f = basis
            .iter()
            .fold(MackeyMorphism::zero(m, n), |acc, b| acc.add(&b.scale(&q(rng.gen_range(-9..=9)))));
        if f.is_isomorphism() {
            return Some(f);
        }
    }
    None
}

/// The Yoneda transformation `Rep(G/H_a) -> N` sending the identity span to `x`.
pub fn yoneda_morphism(n: &SpanFunctorQ, a: usize, x: &[Q]) -> MackeyMorphism {
    let ctx = &n.ctx;
    let maps = (0..ctx.num_classes())
        .map(|i| {
            let cols: Vec<Vec<Q>> = ctx
                .transitive_hom_basis(i, a)
                .iter()
                .map(|t| n.apply_class(a, i, &ctx.reverse_transitive(i, a, t)).mul_vec(x))
                .collect();
            QMatrix::from_columns(n.dims[i], &cols)
        })
        .collect();
    MackeyMorphism { maps }
}

/// Image of the identity span under a transformation out of `Rep(G/H_a)`.
pub fn evaluate_at_identity(ctx: &BurnsideContext, phi: &MackeyMorphism, a: usize) -> Vec<Q> {
    let id = ctx.basis_position(a, a, &SpanClass { class: a, left: 0, right: 0 });
    phi.maps[a].column(id)
}

/// The subfunctor spanned by the given columns at each class, with its inclusion.
pub fn subfunctor(m: &MackeyFunctorQ, basis: &[QMatrix], label: impl Into<String>) -> Result<(MackeyFunctorQ, MackeyMorphism)> {
    let lat = m.ctx.lattice();
    let n = m.dims.len();
    let basis: Vec<QMatrix> = basis.iter().map(QMatrix::image).collect();
    let restrict = |from: usize, to: usize, a: &QMatrix| -> Result<QMatrix> {
        basis[to].solve(&(a * &basis[from])).ok_or_else(|| violation("subspaces are not closed under the structure maps".into()))
    };
    let mut res = vec![BTreeMap::new(); n];
    let mut ind = vec![BTreeMap::new(); n];
    let mut conj = vec![BTreeMap::new(); n];
    for c in 0..n {
        for (&k, a) in &m.res[c] {
            let kc = lat.class_of(k);
            res[c].insert(k, restrict(c, kc, a)?);
            ind[c].insert(k, restrict(kc, c, &m.ind[c][&k])?);
        }
        for (&x, a) in &m.conj[c] {
            conj[c].insert(x, restrict(c, c, a)?);
        }
    }
    let sub = MackeyFunctorQ { ctx: m.ctx.clone(), label: label.into(), dims: basis.iter().map(QMatrix::cols).collect(), res, ind, conj };
    Ok((sub, MackeyMorphism { maps: basis }))
}

/// The quotient by a subfunctor given by spanning columns, with its projection.
pub fn quotient(m: &MackeyFunctorQ, basis: &[QMatrix], label: impl Into<String>) -> Result<(MackeyFunctorQ, MackeyMorphism)> {
    subfunctor(m, basis, "check")?;
    let lat = m.ctx.lattice();
    let n = m.dims.len();
    let proj: Vec<QMatrix> = basis
        .iter()
        .zip(&m.dims)
        .map(|(b, &d)| if b.cols() == 0 { QMatrix::identity(d) } else { b.cokernel() })
        .collect();
    // right inverses P^T (P P^T)^-1
    let sect: Vec<QMatrix> = proj
        .iter()
        .map(|p| {
            let pt = p.transpose();
            &pt * &(p * &pt).inverse().expect("projection has full row rank")
        })
        .collect();
    let push = |from: usize, to: usize, a: &QMatrix| &(&proj[to] * a) * &sect[from];
    let mut res = vec![BTreeMap::new(); n];
    let mut ind = vec![BTreeMap::new(); n];
    let mut conj = vec![BTreeMap::new(); n];
    for c in 0..n {
        for (&k, a) in &m.res[c] {
            let kc = lat.class_of(k);
            res[c].insert(k, push(c, kc, a));
            ind[c].insert(k, push(kc, c, &m.ind[c][&k]));
        }
        for (&x, a) in &m.conj[c] {
            conj[c].insert(x, push(c, c, a));
        }
    }
    let q = MackeyFunctorQ { ctx: m.ctx.clone(), label: label.into(), dims: proj.iter().map(QMatrix::rows).collect(), res, ind, conj };
    Ok((q, MackeyMorphism { maps: proj }))
}

pub fn kernel(m: &MackeyFunctorQ, f: &MackeyMorphism) -> (MackeyFunctorQ, MackeyMorphism) {
    let basis: Vec<QMatrix> = f.maps.iter().map(QMatrix::kernel).collect();
    subfunctor(m, &basis, format!("ker({})", m.label)).expect("kernels of natural maps are subfunctors")
}

pub fn image(n: &MackeyFunctorQ, f: &MackeyMorphism) -> (MackeyFunctorQ, MackeyMorphism) {
    let basis: Vec<QMatrix> = f.maps.iter().map(QMatrix::image).collect();
    subfunctor(n, &basis, format!("im->{}", n.label)).expect("images of natural maps are subfunctors")
}

pub fn cokernel(n: &MackeyFunctorQ, f: &MackeyMorphism) -> (MackeyFunctorQ, MackeyMorphism) {
    let basis: Vec<QMatrix> = f.maps.iter().map(QMatrix::image).collect();
    quotient(n, &basis, format!("coker->{}", n.label)).expect("images of natural maps are subfunctors")
}

/// Re-expresses a functor in a new basis at each class; exposed for tests of
/// basis independence.
pub fn twist(m: &MackeyFunctorQ, p: &[QMatrix]) -> Result<MackeyFunctorQ> {
    let pinv: Vec<QMatrix> = p
        .iter()
        .map(|x| x.inverse().ok_or_else(|| Error::Parse("change of basis is not invertible".into())))
        .collect::<Result<_>>()?;
    Ok(m.change_basis(p, &pinv, m.dims.clone(), m.label.clone()))
}

/// One Yoneda generator: a class and the element of the functor it picks out,
/// written in the previous stage of the resolution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub class: usize,
    #[serde(with = "crate::linalg::qvec_serde")]
    pub image: Vec<Q>,
}

/// `... -> P_1 -> P_0 -> M`, each `P_p` a sum of representables
/// `Rep(G/H_class)` over the generators of stage `p`. Stage-0 images live in
/// `M`; stage-`p` images live in `P_{p-1}`, in blocks following the previous
/// generators, each block on the basis `hom(G/H_class, G/H_prev)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectiveResolution {
    pub label: String,
    pub stages: Vec<Vec<Generator>>,
    /// the last computed kernel is zero
    pub terminated: bool,
}

impl ProjectiveResolution {
    /// Number of nonzero terms minus one, when the resolution terminated.
    pub fn length(&self) -> Option<usize> {
        self.terminated.then(|| self.stages.len().saturating_sub(1))
    }
}

fn span_subfunctor(p: &SpanFunctorQ, z: &[QMatrix]) -> SpanFunctorQ {
    let n = p.dims.len();
    let maps = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    p.maps[i][j]
                        .iter()
                        .map(|m| z[j].solve(&(m * &z[i])).expect("kernel is a subfunctor"))
                        .collect()
                })
                .collect()
        })
        .collect();
    SpanFunctorQ { ctx: p.ctx.clone(), label: p.label.clone(), dims: z.iter().map(QMatrix::cols).collect(), maps }
}

/// Columns spanning the subfunctor generated by `x` in `k(a)`, per class.
fn generated(k: &SpanFunctorQ, a: usize, x: &[Q]) -> Vec<QMatrix> {
    yoneda_morphism(k, a, x).maps
}

/// Greedy Yoneda generators: repeatedly add the unit vector that enlarges the
/// covered subfunctor most, preferring cheaper representables, then larger
/// subgroups, then lower coordinates.
fn choose_generators(k: &SpanFunctorQ, rep_dims: &[usize]) -> Vec<(usize, Vec<Q>)> {
    let n = k.dims.len();
    let mut covered: Vec<QMatrix> = k.dims.iter().map(|&d| QMatrix::zeros(d, 0)).collect();
    let mut gens = Vec::new();
    loop {
        let covered_dim: usize = covered.iter().map(QMatrix::cols).sum();
        if covered_dim == k.total_dim() {
            return gens;
        }
        let mut best: Option<((usize, std::cmp::Reverse<usize>, usize, std::cmp::Reverse<usize>), usize, Vec<Q>, Vec<QMatrix>)> = None;
        for c in (0..n).rev() {
            for v in 0..k.dims[c] {
                let mut e = vec![Q::zero(); k.dims[c]];
                e[v] = q(1);
                if covered[c].spans(&QMatrix::column_vector(&e)) {
                    continue;
                }
                let gen = generated(k, c, &e);
                let merged: Vec<QMatrix> = covered.iter().zip(&gen).map(|(a, b)| a.hstack(b).image()).collect();
                let total: usize = merged.iter().map(QMatrix::cols).sum();
                let key = (total, std::cmp::Reverse(rep_dims[c]), c, std::cmp::Reverse(v));
                if best.as_ref().map_or(true, |b| key > b.0) {
                    best = Some((key, c, e, merged));
                }
            }
        }
        let (_, c, e, merged) = best.expect("some unit vector lies outside the covered part");
        gens.push((c, e));
        covered = merged;
    }
}

/// Resolves `M` by sums of representables through stage `length`, stopping
/// early once a kernel vanishes.
pub fn projective_resolution(m: &MackeyFunctorQ, length: usize) -> ProjectiveResolution {
    let ctx = &m.ctx;
    let n = ctx.num_classes();
    let reps: Vec<SpanFunctorQ> = (0..n).map(|a| representable_span(ctx, a)).collect();
    let rep_dims: Vec<usize> = reps.iter().map(SpanFunctorQ::total_dim).collect();
    let mut k = m.to_span_functor();
    let mut emb: Option<Vec<QMatrix>> = None;
    let mut stages = Vec::new();
    let mut terminated = false;
    for _ in 0..=length {
        if k.total_dim() == 0 {
            terminated = true;
            break;
        }
        let gens = choose_generators(&k, &rep_dims);
        stages.push(
            gens.iter()
                .map(|(c, x)| Generator {
                    class: *c,
                    image: match &emb {
                        Some(e) => e[*c].mul_vec(x),
                        None => x.clone(),
                    },
                })
                .collect(),
        );
        // epsilon_i : P(i) -> K(i)
        let eps: Vec<QMatrix> = (0..n)
            .map(|i| {
                let blocks: Vec<QMatrix> = gens.iter().map(|(c, x)| generated(&k, *c, x)[i].clone()).collect();
                blocks.iter().fold(QMatrix::zeros(k.dims[i], 0), |acc, b| acc.hstack(b))
            })
            .collect();
        let z: Vec<QMatrix> = eps.iter().map(QMatrix::kernel).collect();
        let p = SpanFunctorQ {
            ctx: ctx.clone(),
            label: String::new(),
            dims: (0..n).map(|i| gens.iter().map(|(c, _)| reps[*c].dims[i]).sum()).collect(),
            maps: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..ctx.transitive_hom_basis(i, j).len())
                                .map(|b| {
                                    let blocks: Vec<QMatrix> = gens.iter().map(|(c, _)| reps[*c].maps[i][j][b].clone()).collect();
                                    QMatrix::block_diag(&blocks)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        };
        k = span_subfunctor(&p, &z);
        emb = Some(z);
    }
    if !terminated && k.total_dim() == 0 {
        terminated = true;
    }
    ProjectiveResolution { label: m.label.clone(), stages, terminated }
}

/// Coboundary `Hom(P_p, N) -> Hom(P_{p+1}, N)` under Yoneda, where
/// `Hom(Rep(G/H_c), N) = N(H_c)`.
fn coboundary(ctx: &BurnsideContext, r: &ProjectiveResolution, n: &SpanFunctorQ, p: usize) -> QMatrix {
    let empty = Vec::new();
    let src = r.stages.get(p).unwrap_or(&empty);
    let dst = r.stages.get(p + 1).unwrap_or(&empty);
    let src_off: Vec<usize> = src.iter().scan(0, |acc, g| { let o = *acc; *acc += n.dims[g.class]; Some(o) }).collect();
    let rows: usize = dst.iter().map(|g| n.dims[g.class]).sum();
    let cols: usize = src.iter().map(|g| n.dims[g.class]).sum();
    let mut d = QMatrix::zeros(rows, cols);
    let mut row0 = 0;
    for b in dst {
        let mut pos = 0;
        for (ai, a) in src.iter().enumerate() {
            let basis = ctx.transitive_hom_basis(b.class, a.class);
            let mut block = QMatrix::zeros(n.dims[b.class], n.dims[a.class]);
            for (ti, t) in basis.iter().enumerate() {
                let coeff = &b.image[pos + ti];
                if coeff.is_zero() {
                    continue;
                }
                let rev = ctx.reverse_transitive(b.class, a.class, t);
                block = &block + &n.apply_class(a.class, b.class, &rev).scale(coeff);
            }
            pos += basis.len();
            let mut cur = d.block(row0, src_off[ai], block.rows(), block.cols());
            cur = &cur + &block;
            d.set_block(row0, src_off[ai], &cur);
        }
        row0 += n.dims[b.class];
    }
    d
}

/// `dim Ext^degree(M, N)` from a resolution of `M`.
pub fn ext_mackey(r: &ProjectiveResolution, n: &MackeyFunctorQ, degree: usize) -> Result<usize> {
    let have = r.stages.len();
    if !r.terminated && degree + 1 >= have {
        return Err(Error::ResolutionTooShort { degree, needed: degree + 2, have });
    }
    let ns = n.to_span_functor();
    let ctx = &n.ctx;
    let dim_c: usize = r.stages.get(degree).map_or(0, |s| s.iter().map(|g| n.dims[g.class]).sum());
    let d = coboundary(ctx, r, &ns, degree);
    let cycles = dim_c - d.rank();
    let boundaries = if degree == 0 { 0 } else { coboundary(ctx, r, &ns, degree - 1).rank() };
    Ok(cycles - boundaries)
}

/// Resolves `M` far enough and returns `dim Ext^degree(M, N)`.
pub fn ext(m: &MackeyFunctorQ, n: &MackeyFunctorQ, degree: usize) -> usize {
    ext_mackey(&projective_resolution(m, degree + 1), n, degree).expect("resolution is long enough")
}

/// Named functors for the command line: `burnside`, `zero`,
/// `representable:<class>`, `fixedpoint:<trivial|sign|irrN|regular>`.
pub fn named_functor(ctx: &Arc<BurnsideContext>, name: &str) -> Result<MackeyFunctorQ> {
    let bad = || Error::Parse(format!("unknown Mackey functor '{name}'"));
    if name == "burnside" {
        return Ok(burnside_functor(ctx));
    }
    if name == "zero" {
        return Ok(MackeyFunctorQ::zero(ctx));
    }
    if let Some(rest) = name.strip_prefix("representable:") {
        let a: usize = rest.parse().map_err(|_| bad())?;
        if a >= ctx.num_classes() {
            return Err(bad());
        }
        return Ok(representable_transitive(ctx, a).with_label(name));
    }
    if let Some(rest) = name.strip_prefix("fixedpoint:") {
        let g = ctx.group();
        if rest == "regular" {
            return Ok(fixed_point(ctx, &QRep::regular(g)).with_label(name));
        }
        let irr = crate::reps::rational_irreducibles(g)?;
        let v = irr.iter().find(|r| r.label == rest).ok_or_else(bad)?;
        return Ok(fixed_point(ctx, v).with_label(name));
    }
    Err(bad())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct YonedaAudit {
    pub group: String,
    pub pairs: usize,
    /// `(a, b, dim Hom(Rep a, Rep b), |hom_basis(a, b)|)` where they differ
    pub mismatches: Vec<(usize, usize, usize, usize)>,
}

/// `dim Hom(Rep A, Rep B) = |hom_basis(A, B)|` over all transitive `A, B`.
pub fn yoneda_audit(ctx: &Arc<BurnsideContext>) -> YonedaAudit {
    let n = ctx.num_classes();
    let reps: Vec<MackeyFunctorQ> = (0..n).map(|a| representable_transitive(ctx, a)).collect();
    let rows: Vec<Vec<(usize, usize, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|a| (0..n).map(|b| (a, b, hom_space(&reps[a], &reps[b]).len(), ctx.transitive_hom_basis(a, b).len())).collect())
        .collect();
    YonedaAudit {
        group: ctx.group().label().to_string(),
        pairs: n * n,
        mismatches: rows.into_iter().flatten().filter(|r| r.2 != r.3).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::rational_irreducibles;

    fn ctx(sel: &str) -> Arc<BurnsideContext> {
        Arc::new(BurnsideContext::new(&FiniteGroup::from_selector(sel).unwrap()).unwrap())
    }

    fn battery(c: &Arc<BurnsideContext>) -> Vec<MackeyFunctorQ> {
        let mut v: Vec<MackeyFunctorQ> = (0..c.num_classes()).map(|a| representable_transitive(c, a)).collect();
        v.push(burnside_functor(c));
        for r in rational_irreducibles(c.group()).unwrap() {
            v.push(fixed_point(c, &r));
        }
        v
    }

    #[test]
    fn battery_satisfies_axioms() {
        for sel in ["cyclic:2", "cyclic:4", "prod:cyclic:2,cyclic:2", "sym:3"] {
            let c = ctx(sel);
            for m in battery(&c) {
                m.check_axioms().unwrap_or_else(|e| panic!("{sel} {}: {e}", m.label));
                m.to_span_functor().check_functoriality().unwrap_or_else(|e| panic!("{sel} {}: {e}", m.label));
            }
        }
    }

    #[test]
    fn round_trip_between_definitions() {
        for sel in ["cyclic:2", "sym:3"] {
            let c = ctx(sel);
            for m in battery(&c).into_iter().chain([MackeyFunctorQ::zero(&c)]) {
                let back = MackeyFunctorQ::from_span_functor(&m.to_span_functor());
                assert_eq!(back, m, "{sel} {}", m.label);
            }
        }
    }

    #[test]
    fn representable_values() {
        let c = ctx("cyclic:2");
        // classes: e, C2
        assert_eq!(representable_transitive(&c, 0).dims(), &[2, 1]);
        assert_eq!(representable_transitive(&c, 1).dims(), &[1, 2]);
        assert_eq!(representable(&c, &FiniteGSet::empty(c.group())).total_dim(), 0);
        let b = burnside_functor(&c);
        assert_eq!(b.dims(), &[1, 2]);
        assert!(find_isomorphism(&b, &representable(&c, &FiniteGSet::point(c.group())), 1).is_some());
    }

    #[test]
    fn burnside_functor_is_representable_at_the_point() {
        for sel in ["cyclic:3", "cyclic:4", "prod:cyclic:2,cyclic:2", "sym:3", "dihedral:8"] {
            let c = ctx(sel);
            let b = burnside_functor(&c);
            b.check_axioms().unwrap();
            let star = representable_transitive(&c, c.num_classes() - 1);
            assert!(find_isomorphism(&b, &star, 7).is_some(), "{sel}");
            let ring = c.burnside_ring();
            assert_eq!(b.dims()[c.num_classes() - 1], ring.classes.len());
        }
    }

    #[test]
    fn sign_fixed_points_of_c2() {
        let c = ctx("cyclic:2");
        let sign = rational_irreducibles(c.group()).unwrap().into_iter().find(|r| r.label == "sign").unwrap();
        let m = fixed_point(&c, &sign);
        assert_eq!(m.dims(), &[1, 0]);
        assert_eq!(m.conj(0, 1), &QMatrix::from_i64(&[&[-1]]));
    }

    #[test]
    fn yoneda_dimensions_and_inverse_maps() {
        let c = ctx("cyclic:2");
        let r0 = representable_transitive(&c, 0);
        assert_eq!(hom_space(&r0, &r0).len(), 2);
        for sel in ["cyclic:2", "sym:3"] {
            let c = ctx(sel);
            for a in 0..c.num_classes() {
                let ra = representable_transitive(&c, a);
                for nf in battery(&c) {
                    let ns = nf.to_span_functor();
                    let homs = hom_space(&ra, &nf);
                    assert_eq!(homs.len(), nf.dims()[a], "{sel} {a} {}", nf.label);
                    for v in 0..nf.dims()[a] {
                        let mut x = vec![Q::zero(); nf.dims()[a]];
                        x[v] = q(1);
                        let phi = yoneda_morphism(&ns, a, &x);
                        assert!(phi.is_natural(&ra, &nf));
                        assert_eq!(evaluate_at_identity(&c, &phi, a), x);
                    }
                    for phi in homs {
                        let x = evaluate_at_identity(&c, &phi, a);
                        assert_eq!(yoneda_morphism(&ns, a, &x), phi);
                    }
                }
            }
        }
    }

    #[test]
    fn hom_dimension_matches_span_count() {
        let c = ctx("sym:3");
        for a in 0..c.num_classes() {
            for b in 0..c.num_classes() {
                let h = hom_space(&representable_transitive(&c, a), &representable_transitive(&c, b));
                assert_eq!(h.len(), c.transitive_hom_basis(a, b).len());
            }
        }
    }

    #[test]
    fn hom_trivialities() {
        let c = ctx("sym:3");
        for m in battery(&c) {
            assert!(hom_space(&MackeyFunctorQ::zero(&c), &m).is_empty());
            let homs = hom_space(&m, &m);
            assert!(!homs.is_empty());
            assert!(MackeyMorphism::identity(&m).is_natural(&m, &m));
        }
    }

    #[test]
    fn broken_functor_is_rejected() {
        let c = ctx("cyclic:2");
        let b = burnside_functor(&c);
        let mut res = b.res.clone();
        let k = *res[1].keys().next().unwrap();
        let m = res[1].get_mut(&k).unwrap();
        m[(0, 0)] += q(1);
        let err = MackeyFunctorQ::new(&c, "bad", b.dims.clone(), res, b.ind.clone(), b.conj.clone()).unwrap_err();
        assert!(matches!(err, Error::AxiomViolation(_)));
    }

    #[test]
    fn json_round_trip() {
        let c = ctx("sym:3");
        let b = burnside_functor(&c);
        let back = MackeyFunctorQ::from_json(&c, &b.to_json()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn resolutions_of_representables_have_length_zero() {
        for sel in ["cyclic:2", "sym:3", "prod:cyclic:2,cyclic:2"] {
            let c = ctx(sel);
            for a in 0..c.num_classes() {
                let r = projective_resolution(&representable_transitive(&c, a), 3);
                assert_eq!(r.length(), Some(0), "{sel} {a}");
                assert_eq!(r.stages[0].len(), 1);
            }
            let z = projective_resolution(&MackeyFunctorQ::zero(&c), 3);
            assert!(z.stages.is_empty() && z.terminated);
        }
    }

    #[test]
    fn ext_zero_is_hom_and_higher_ext_vanishes() {
        for sel in ["cyclic:2", "sym:3"] {
            let c = ctx(sel);
            let bat = battery(&c);
            for m in &bat {
                let r = projective_resolution(m, 3);
                for n in &bat {
                    assert_eq!(ext_mackey(&r, n, 0).unwrap(), hom_space(m, n).len(), "{sel} {} {}", m.label, n.label);
                    assert_eq!(ext_mackey(&r, n, 1).unwrap(), 0, "{sel} {} {}", m.label, n.label);
                    assert_eq!(ext_mackey(&r, n, 2).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn coboundaries_compose_to_zero() {
        let c = ctx("sym:3");
        let sign = fixed_point(&c, &rational_irreducibles(c.group()).unwrap()[1]);
        let r = projective_resolution(&sign, 3);
        let ns = burnside_functor(&c).to_span_functor();
        for p in 0..2 {
            let d0 = coboundary(&c, &r, &ns, p);
            let d1 = coboundary(&c, &r, &ns, p + 1);
            assert!((&d1 * &d0).is_zero());
        }
    }

    #[test]
    fn sign_functor_resolution_is_periodic() {
        let c = ctx("cyclic:2");
        let sign = rational_irreducibles(c.group()).unwrap().into_iter().find(|r| r.label == "sign").unwrap();
        let m = fixed_point(&c, &sign);
        let r = projective_resolution(&m, 5);
        assert!(!r.terminated);
        assert_eq!(r.stages[0], vec![Generator { class: 0, image: vec![q(1)] }]);
        assert_eq!(r.stages[2], r.stages[4]);
        assert_eq!(r.stages[3], r.stages[5]);
        for d in 0..5 {
            let want = usize::from(d == 0);
            assert_eq!(ext_mackey(&r, &m, d).unwrap(), want);
        }
    }

    #[test]
    fn too_short_resolution_is_reported() {
        let c = ctx("cyclic:2");
        let sign = rational_irreducibles(c.group()).unwrap().into_iter().find(|r| r.label == "sign").unwrap();
        let r = projective_resolution(&fixed_point(&c, &sign), 0);
        if !r.terminated {
            assert!(matches!(ext_mackey(&r, &burnside_functor(&c), 1), Err(Error::ResolutionTooShort { .. })));
        }
    }

    #[test]
    fn kernel_image_cokernel_sequences() {
        let c = ctx("sym:3");
        let m = representable_transitive(&c, 0);
        let n = burnside_functor(&c);
        let homs = hom_space(&m, &n);
        let f = homs.iter().fold(MackeyMorphism::zero(&m, &n), |a, b| a.add(b));
        let (k, inc) = kernel(&m, &f);
        let (i, _) = image(&n, &f);
        let (q2, proj) = cokernel(&n, &f);
        k.check_axioms().unwrap();
        i.check_axioms().unwrap();
        q2.check_axioms().unwrap();
        assert!(inc.is_natural(&k, &m));
        assert!(proj.is_natural(&n, &q2));
        for cl in 0..c.num_classes() {
            assert_eq!(k.dims()[cl] + i.dims()[cl], m.dims()[cl]);
            assert_eq!(i.dims()[cl] + q2.dims()[cl], n.dims()[cl]);
        }
    }

    #[test]
    fn span_values_are_additive() {
        let c = ctx("cyclic:2");
        let g = c.group().clone();
        let f = burnside_functor(&c).to_span_functor();
        let x = FiniteGSet::transitive(&g, &Subgroup::trivial(&g)).disjoint_union(&FiniteGSet::point(&g));
        let id = Span::identity(&x);
        assert!(f.evaluate_span(&id).is_identity());
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn hom_dimension_is_basis_independent(seed in any::<u64>()) {
                let c = ctx("sym:3");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = burnside_functor(&c);
                let p: Vec<QMatrix> = m.dims().iter().map(|&d| {
                    loop {
                        let rows = (0..d).map(|_| (0..d).map(|_| q(rng.gen_range(-3..=3))).collect()).collect();
                        let x = QMatrix::from_rows_shaped(d, d, rows);
                        if x.rank() == d { break x; }
                    }
                }).collect();
                let t = twist(&m, &p).unwrap();
                t.check_axioms().unwrap();
                prop_assert_eq!(hom_space(&t, &m).len(), hom_space(&m, &m).len());
                prop_assert!(find_isomorphism(&t, &m, seed).is_some());
            }
        }
    }
}
