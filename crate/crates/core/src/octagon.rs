//! The octagon of Witt groups attached to `(A, σ, ε, λ, μ)`.
//!
//! `B` is the centralizer of `λ`, `τ₁ = σ|_B` and `τ₂ = Int(μ⁻¹) ∘ σ|_B`. Every `a ∈ A`
//! is `b₁ + μ b₂` with `b_i ∈ B`, and `π_i(a) = b_i`. Forms over `B` are stored in
//! coordinates of a fixed basis of `B`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::{json, Value};

use crate::algiv::{Alg, AlgElement, Algebra, InvType, Kind, PiData, Splittable};
use crate::error::{Error, Result};
use crate::herm::{HermitianForm, Isotropy, Lagrangian, Vector};
use crate::linalg::{self, Mat, Smith};
use crate::morita::Classify;
use crate::ring::{cartesian, BaseRing, LocalRing, RingElement};
use crate::witt::{exact_at, group_structure, WittHom, WittTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OctMap {
    Pi1,
    Pi2,
    Rho1,
    Rho2,
}

impl OctMap {
    pub fn is_pi(self) -> bool {
        matches!(self, OctMap::Pi1 | OctMap::Pi2)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi1" | "π₁" => Ok(OctMap::Pi1),
            "pi2" | "π₂" => Ok(OctMap::Pi2),
            "rho1" | "ρ₁" => Ok(OctMap::Rho1),
            "rho2" | "ρ₂" => Ok(OctMap::Rho2),
            _ => Err(Error::InvalidSpec(format!("unknown octagon map {s:?}"))),
        }
    }
}

impl fmt::Display for OctMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OctMap::Pi1 => "pi1",
            OctMap::Pi2 => "pi2",
            OctMap::Rho1 => "rho1",
            OctMap::Rho2 => "rho2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    A,
    B1,
    B2,
}

/// Node `k` is `W_{s ε}` of the given side.
pub const NODES: [(Side, i64); 8] = [
    (Side::A, 1),
    (Side::B1, 1),
    (Side::A, -1),
    (Side::B2, 1),
    (Side::A, -1),
    (Side::B1, -1),
    (Side::A, 1),
    (Side::B2, -1),
];

/// Arrow `k` runs from node `k` to node `k + 1 (mod 8)`.
pub const ARROWS: [OctMap; 8] =
    [OctMap::Pi1, OctMap::Rho1, OctMap::Pi2, OctMap::Rho2, OctMap::Pi1, OctMap::Rho1, OctMap::Pi2, OctMap::Rho2];

pub fn node_label(k: usize) -> String {
    let (side, s) = NODES[k % 8];
    let e = if s == 1 { "+e" } else { "-e" };
    match side {
        Side::A => format!("W_{e}(A,sigma)"),
        Side::B1 => format!("W_{e}(B,tau1)"),
        Side::B2 => format!("W_{e}(B,tau2)"),
    }
}

/// The four image characterizations, named by the node whose forms they test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    I,
    II,
    III,
    IV,
}

impl Part {
    pub const ALL: [Part; 4] = [Part::I, Part::II, Part::III, Part::IV];

    /// Node of the tested form.
    pub fn node(self) -> usize {
        match self {
            Part::I => 0,
            Part::II => 1,
            Part::III => 2,
            Part::IV => 3,
        }
    }

    /// Node the preimage is searched on.
    pub fn source_node(self) -> usize {
        (self.node() + 7) % 8
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Part::I),
            "ii" | "2" => Ok(Part::II),
            "iii" | "3" => Ok(Part::III),
            "iv" | "4" => Ok(Part::IV),
            _ => Err(Error::InvalidSpec(format!("unknown part {s:?}"))),
        }
    }
}

/// Involution types per component, for `+ε` and `-ε`.
#[derive(Clone, Debug, Serialize)]
pub struct Types {
    pub sigma: [Vec<InvType>; 2],
    pub tau1: [Vec<InvType>; 2],
    pub tau2: [Vec<InvType>; 2],
}

type SeedCache<R> = Arc<Mutex<HashMap<(Side, i64), Arc<Vec<HermitianForm<R>>>>>>;

#[derive(Clone)]
pub struct OctagonData<R: LocalRing> {
    pub a: Alg<R>,
    pub eps: AlgElement<R>,
    pub lambda: AlgElement<R>,
    pub mu: AlgElement<R>,
    /// `(B, τ₁)` and `(B, τ₂)` in the coordinates of `b_basis`.
    pub b1: Alg<R>,
    pub b2: Alg<R>,
    /// Basis of `B` in A-coordinates.
    pub b_basis: Vec<AlgElement<R>>,
    /// Basis of `T = S[λ]` in A-coordinates.
    pub t_basis: Vec<AlgElement<R>>,
    pub pi: PiData<R>,
    pub t_connected: bool,
    pub types: Types,
    coords: Vec<Smith<R::E>>,
    seeds: SeedCache<R>,
}

impl<R: LocalRing> fmt::Debug for OctagonData<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OctagonData")
            .field("a", &self.a.kind_name())
            .field("eps", &self.eps)
            .field("dim_b", &self.b_basis.len())
            .field("t_connected", &self.t_connected)
            .finish()
    }
}

fn bad(s: &str) -> Error {
    Error::InvalidOctagonData(s.to_string())
}

fn mul3<R: LocalRing>(a: &Algebra<R>, x: &AlgElement<R>, y: &AlgElement<R>, z: &AlgElement<R>) -> AlgElement<R> {
    a.mul(&a.mul(x, y), z)
}

fn same_alg<R: LocalRing>(x: &Alg<R>, y: &Alg<R>) -> bool {
    Arc::ptr_eq(x, y) || **x == **y
}

fn unit_vector<R: LocalRing>(a: &Algebra<R>, n: usize, j: usize, c: &AlgElement<R>) -> Vector<R> {
    let mut v = vec![a.zero(); n];
    v[j] = c.clone();
    v
}

/// Prefers `1, λ`, central basis vectors and their `λ`-multiples; falls back to `cent`.
fn choose_b_basis<R: LocalRing>(a: &Algebra<R>, lambda: &AlgElement<R>, cent: &[AlgElement<R>]) -> Vec<AlgElement<R>> {
    let mut cands = vec![a.one(), lambda.clone()];
    for i in 0..a.dim {
        let e = a.basis_elem(i);
        if e != a.one() && a.is_central(&e) {
            cands.push(a.mul(lambda, &e));
            cands.push(e);
        }
    }
    cands.extend(cent.iter().cloned());
    let mut chosen: Vec<AlgElement<R>> = Vec::new();
    for c in cands {
        if chosen.len() == cent.len() {
            break;
        }
        if a.mul(&c, lambda) != a.mul(lambda, &c) {
            continue;
        }
        let mut trial = chosen.clone();
        trial.push(c);
        let free = a.comps.iter().enumerate().all(|(ci, l)| {
            let cols: Vec<_> = trial.iter().map(|x| x.c[ci].clone()).collect();
            linalg::span_rank(&l.ring, &cols, a.dim) == trial.len()
        });
        if free {
            chosen = trial;
        }
    }
    if chosen.len() == cent.len() {
        chosen
    } else {
        cent.to_vec()
    }
}

/// No nontrivial idempotent in `T`, by exhaustive search over the residue field.
fn t_is_connected<R: LocalRing>(a: &Algebra<R>, t: &[AlgElement<R>], lambda: &AlgElement<R>) -> Result<bool> {
    if a.comps.len() != 1 {
        return Ok(false);
    }
    let l = &a.comps[0];
    let r = &l.ring;
    match r.residue_field().elements() {
        Some(els) => {
            let basis: Vec<_> = t.iter().map(|x| x.c[0].clone()).collect();
            let red = |v: &[R::E]| v.iter().map(|x| r.reduce(x)).collect::<Vec<_>>();
            let (zero, one) = (red(&l.zero()), red(&l.unit));
            for co in cartesian(&vec![els; basis.len()]) {
                let mut x = l.zero();
                for (c, b) in co.iter().zip(&basis) {
                    x = l.add(&x, &l.scale(c, b));
                }
                let rx = red(&x);
                if rx != zero && rx != one && red(&l.mul(&x, &x)) == rx {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        None => {
            let l2 = a.mul(lambda, lambda);
            match a.as_scalar(&l2) {
                Some(s) if l.center.len() == 1 => Ok(!r.is_square(&s.c[0])),
                _ => Err(Error::Unsupported("connectedness of T over this base".into())),
            }
        }
    }
}

/// Validates `(G3)` and derives `B`, `T`, `τ₁`, `τ₂` and the projections.
pub fn make_octagon<R: LocalRing>(a: &Alg<R>, eps: &AlgElement<R>) -> Result<OctagonData<R>> {
    let shape_ok = match &a.kind {
        Kind::Quaternion { .. } => true,
        Kind::Tensor(x, y) => matches!(**x, Kind::Quaternion { .. }) && matches!(**y, Kind::Etale { .. }),
        _ => false,
    };
    if !shape_ok {
        return Err(bad("only quaternion and quaternion (x) etale configurations are supported"));
    }
    let (lambda, mu) = match (&a.lambda, &a.mu) {
        (Some(l), Some(m)) => (l.clone(), m.clone()),
        _ => return Err(bad("lambda and mu are required")),
    };
    a.check_epsilon(eps)?;
    if a.involute(&lambda) != a.neg(&lambda) {
        return Err(bad("sigma(lambda) != -lambda"));
    }
    if a.involute(&mu) != a.neg(&mu) {
        return Err(bad("sigma(mu) != -mu"));
    }
    if a.mul(&lambda, &mu) != a.neg(&a.mul(&mu, &lambda)) {
        return Err(bad("lambda mu != -mu lambda"));
    }
    let l2 = a.mul(&lambda, &lambda);
    if !a.is_central(&l2) || !a.is_unit(&l2) || a.involute(&l2) != l2 {
        return Err(bad("lambda^2 is not a sigma-fixed central unit"));
    }
    let pi = a.pi_projections()?;
    let b_basis = choose_b_basis(a, &lambda, &pi.b);
    if 2 * b_basis.len() != a.dim {
        return Err(bad("rank of B is not half the rank of A"));
    }
    let coords: Vec<_> = a
        .comps
        .iter()
        .enumerate()
        .map(|(ci, l)| {
            let cols: Vec<_> = b_basis.iter().map(|x| x.c[ci].clone()).collect();
            linalg::smith(&l.ring, &Mat::from_cols(a.dim, &cols))
        })
        .collect();
    let minv = a.inv(&mu)?;
    let b1 = a.subalgebra(&b_basis, |ci, v| a.comps[ci].invol(v), "B,tau1", a.deg / 2)?;
    let b2 = a.subalgebra(
        &b_basis,
        |ci, v| {
            let l = &a.comps[ci];
            l.mul3(&minv.c[ci], &l.invol(v), &mu.c[ci])
        },
        "B,tau2",
        a.deg / 2,
    )?;

    let mut t_basis = Vec::new();
    let ncent = a.comps[0].center.len();
    if a.comps.iter().any(|l| l.center.len() != ncent) {
        return Err(bad("centre rank varies across components"));
    }
    for k in 0..2 * ncent {
        t_basis.push(AlgElement {
            c: a.comps
                .iter()
                .enumerate()
                .map(|(ci, l)| {
                    let z = &l.center[k % ncent];
                    if k < ncent {
                        z.clone()
                    } else {
                        l.mul(z, &lambda.c[ci])
                    }
                })
                .collect(),
        });
    }
    let t_connected = t_is_connected(a, &t_basis, &lambda)?;

    let mut d = OctagonData {
        a: a.clone(),
        eps: eps.clone(),
        lambda,
        mu,
        b1,
        b2,
        b_basis,
        t_basis,
        pi,
        t_connected,
        types: Types { sigma: [vec![], vec![]], tau1: [vec![], vec![]], tau2: [vec![], vec![]] },
        coords,
        seeds: Arc::new(Mutex::new(HashMap::new())),
    };
    d.validate()?;
    for (i, s) in [1i64, -1].into_iter().enumerate() {
        d.types.sigma[i] = a.involution_type(&d.eps_on(Side::A, s)?)?;
        d.types.tau1[i] = d.b1.involution_type(&d.eps_on(Side::B1, s)?)?;
        d.types.tau2[i] = d.b2.involution_type(&d.eps_on(Side::B2, s)?)?;
    }
    Ok(d)
}

impl<R: LocalRing> OctagonData<R> {
    fn validate(&self) -> Result<()> {
        let a = &self.a;
        let minv = a.inv(&self.mu)?;
        for b in &self.b_basis {
            if a.mul(b, &self.lambda) != a.mul(&self.lambda, b) {
                return Err(Error::InternalInconsistency("B basis does not commute with lambda".into()));
            }
            let t2 = |x: &AlgElement<R>| mul3(a, &minv, &a.involute(x), &self.mu);
            if t2(&t2(b)) != *b {
                return Err(bad("tau2 is not an involution"));
            }
        }
        self.to_b(&self.eps).map_err(|_| bad("eps is not in B"))?;
        // μB = Bμ
        for b in &self.b_basis {
            self.to_b(&mul3(a, &minv, b, &self.mu)).map_err(|_| bad("mu B != B mu"))?;
        }
        Ok(())
    }

    /// Coordinates in `B` of an element of `A` lying in `B`.
    pub fn to_b(&self, x: &AlgElement<R>) -> Result<AlgElement<R>> {
        let nb = self.b_basis.len();
        let c = self
            .a
            .comps
            .iter()
            .enumerate()
            .map(|(ci, l)| {
                linalg::solve_with(&l.ring, &self.coords[ci], self.a.dim, nb, &x.c[ci])
                    .ok_or_else(|| Error::InternalInconsistency("element is not in B".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AlgElement { c })
    }

    pub fn from_b(&self, y: &AlgElement<R>) -> AlgElement<R> {
        let a = &self.a;
        AlgElement {
            c: a.comps
                .iter()
                .enumerate()
                .map(|(ci, l)| {
                    let mut v = l.zero();
                    for (k, b) in self.b_basis.iter().enumerate() {
                        v = l.add(&v, &l.scale(&y.c[ci][k], &b.c[ci]));
                    }
                    v
                })
                .collect(),
        }
    }

    pub fn alg_on(&self, side: Side) -> &Alg<R> {
        match side {
            Side::A => &self.a,
            Side::B1 => &self.b1,
            Side::B2 => &self.b2,
        }
    }

    /// `s ε` in the coordinates of the given side.
    pub fn eps_on(&self, side: Side, s: i64) -> Result<AlgElement<R>> {
        let e = self.a.mul(&self.a.sign(s), &self.eps);
        match side {
            Side::A => Ok(e),
            _ => self.to_b(&e),
        }
    }

    fn sign_of(&self, side: Side, f: &HermitianForm<R>) -> Result<i64> {
        if !same_alg(&f.alg, self.alg_on(side)) {
            return Err(Error::FormMismatch(format!("form is not over the {side:?} side")));
        }
        for s in [1, -1] {
            if f.eps == self.eps_on(side, s)? {
                return Ok(s);
            }
        }
        Err(Error::FormMismatch("epsilon is neither eps nor -eps".into()))
    }

    /// Checks that `f` lives on node `k`.
    pub fn check_node(&self, k: usize, f: &HermitianForm<R>) -> Result<()> {
        let (side, s) = NODES[k % 8];
        if self.sign_of(side, f)? != s {
            return Err(Error::FormMismatch(format!("form does not live on node {} ({})", k % 8, node_label(k))));
        }
        Ok(())
    }

    fn project(&self, which: OctMap, x: &AlgElement<R>) -> Result<AlgElement<R>> {
        let pm = if which == OctMap::Pi1 { &self.pi.pi1 } else { &self.pi.pi2 };
        let y = AlgElement {
            c: self.a.comps.iter().enumerate().map(|(ci, l)| linalg::mat_vec(&l.ring, &pm[ci], &x.c[ci])).collect(),
        };
        self.to_b(&y)
    }

    /// `π₁`, `π₂`, `ρ₁` or `ρ₂` on a Gram matrix; the sign of ε is read off the input.
    pub fn apply(&self, which: OctMap, f: &HermitianForm<R>) -> Result<HermitianForm<R>> {
        let out = self.apply_raw(which, f)?;
        if f.is_unimodular() && !out.is_unimodular() {
            return Err(Error::InternalInconsistency(format!("{which} lost unimodularity")));
        }
        Ok(out)
    }

    fn apply_raw(&self, which: OctMap, f: &HermitianForm<R>) -> Result<HermitianForm<R>> {
        let a = &self.a;
        let out = match which {
            OctMap::Pi1 | OctMap::Pi2 => {
                let s = self.sign_of(Side::A, f)?;
                let (side, t) = if which == OctMap::Pi1 { (Side::B1, s) } else { (Side::B2, -s) };
                let n = f.n;
                let m = 2 * n;
                let shifts = [a.one(), self.mu.clone()];
                let left = [a.one(), a.involute(&self.mu)];
                let mut gram = Vec::with_capacity(m * m);
                for p in 0..2 {
                    for j in 0..n {
                        for q in 0..2 {
                            for k in 0..n {
                                let v = mul3(a, &left[p], f.entry(j, k), &shifts[q]);
                                gram.push(self.project(which, &v)?);
                            }
                        }
                    }
                }
                HermitianForm::new(self.alg_on(side).clone(), self.eps_on(side, t)?, m, gram)?
            }
            OctMap::Rho1 | OctMap::Rho2 => {
                let side = if which == OctMap::Rho1 { Side::B1 } else { Side::B2 };
                let s = self.sign_of(side, f)?;
                let c = if which == OctMap::Rho1 { self.lambda.clone() } else { a.mul(&self.lambda, &self.mu) };
                let gram = f.gram.iter().map(|x| a.mul(&c, &self.from_b(x))).collect();
                HermitianForm::new(a.clone(), self.eps_on(Side::A, -s)?, f.n, gram)?
            }
        };
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let a = &self.a;
        let mats = |ms: &[Mat<R::E>]| -> Value {
            Value::Array(
                ms.iter()
                    .zip(&a.comps)
                    .map(|(m, l)| {
                        Value::Array(
                            (0..m.rows)
                                .map(|i| Value::Array(m.row(i).iter().map(|x| l.ring.to_json(x)).collect()))
                                .collect(),
                        )
                    })
                    .collect(),
            )
        };
        let tau = |b: &Alg<R>| -> Value {
            Value::Array(b.comps.iter().map(|l| {
                Value::Array(l.sigma.iter().map(|v| Value::Array(v.iter().map(|x| l.ring.to_json(x)).collect())).collect())
            }).collect())
        };
        json!({
            "algebra": a.to_json(),
            "eps": a.elem_json(&self.eps),
            "lambda": a.elem_json(&self.lambda),
            "mu": a.elem_json(&self.mu),
            "b_basis": self.b_basis.iter().map(|x| a.elem_json(x)).collect::<Vec<_>>(),
            "t_basis": self.t_basis.iter().map(|x| a.elem_json(x)).collect::<Vec<_>>(),
            "tau1": tau(&self.b1),
            "tau2": tau(&self.b2),
            "pi1": mats(&self.pi.pi1),
            "pi2": mats(&self.pi.pi2),
            "t_connected": self.t_connected,
            "types": self.types,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ChainWitness<R: LocalRing> {
    pub pair: usize,
    pub shape: &'static str,
    pub composite: HermitianForm<R>,
    pub lagrangian: Lagrangian<R>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeReport {
    pub node: usize,
    pub label: String,
    pub classes: usize,
    pub structure: Vec<u64>,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport {
    pub config: String,
    pub nodes: Vec<NodeReport>,
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SideCheck {
    pub name: String,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceReport {
    pub name: String,
    pub nodes: Vec<NodeReport>,
    pub exact: bool,
    pub side_checks: Vec<SideCheck>,
}

fn node_report<R: LocalRing>(
    node: usize,
    label: String,
    t: &WittTable<R>,
    h_in: Option<&WittHom<R>>,
    h_out: Option<&WittHom<R>>,
) -> Result<NodeReport> {
    let n = t.len();
    let image: Vec<usize> = match h_in {
        Some(h) => h.image(),
        None => vec![0],
    };
    let kernel: Vec<usize> = match h_out {
        Some(h) => h.kernel(),
        None => (0..n).collect(),
    };
    let exact = match (h_in, h_out) {
        (Some(i), Some(o)) => exact_at(i, o)?,
        _ => image == kernel,
    };
    let counterexample = (!exact).then(|| {
        let bad = (0..n).find(|c| image.contains(c) != kernel.contains(c)).unwrap_or(0);
        json!({
            "class": bad,
            "gram": t.classes[bad].to_json(),
            "in_image": image.contains(&bad),
            "in_kernel": kernel.contains(&bad),
        })
    });
    Ok(NodeReport { node, label, classes: n, structure: group_structure(t), exact, counterexample })
}

/// Exactness report for `0 -> t_0 -> ... -> t_k -> 0`.
fn chain_report<R: LocalRing>(
    name: &str,
    tables: &[Arc<WittTable<R>>],
    homs: &[WittHom<R>],
    labels: &[String],
    side_checks: Vec<SideCheck>,
) -> Result<SequenceReport> {
    let k = tables.len();
    let nodes = (0..k)
        .map(|i| {
            let h_in = if i == 0 { None } else { Some(&homs[i - 1]) };
            let h_out = homs.get(i);
            node_report(i, labels[i].clone(), &tables[i], h_in, h_out)
        })
        .collect::<Result<Vec<_>>>()?;
    let exact = nodes.iter().all(|n| n.exact);
    Ok(SequenceReport { name: name.to_string(), nodes, exact, side_checks })
}

fn build_tables<R: Classify>(
    specs: &[(Alg<R>, AlgElement<R>)],
    rank_cap: Option<usize>,
) -> Result<Vec<Arc<WittTable<R>>>> {
    std::thread::scope(|sc| {
        let handles: Vec<_> = specs
            .iter()
            .map(|(a, e)| sc.spawn(move || WittTable::build(a, e, rank_cap).map(Arc::new)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InternalInconsistency("table worker panicked".into()))))
            .collect()
    })
}

impl<R: Classify> OctagonData<R> {
    /// The explicit Lagrangian of the composite of arrows `pair` and `pair + 1`.
    pub fn chain_witness(&self, pair: usize, input: &HermitianForm<R>) -> Result<ChainWitness<R>> {
        if pair >= 8 {
            return Err(Error::IndexError(pair));
        }
        self.check_node(pair, input)?;
        if !input.is_unimodular() {
            return Err(Error::NotUnimodular);
        }
        let first = ARROWS[pair];
        let second = ARROWS[(pair + 1) % 8];
        let mid = self.apply_raw(first, input)?;
        let composite = self.apply_raw(second, &mid)?;
        if !mid.is_unimodular() || !composite.is_unimodular() {
            return Err(Error::InternalInconsistency(format!("{second} . {first} lost unimodularity")));
        }
        let n = input.n;
        let alg = composite.alg.clone();
        let one = alg.one();
        let complement: Vec<Vector<R>> = (0..n).map(|j| unit_vector(&alg, 2 * n, j, &one)).collect();
        let candidates: Vec<(&'static str, Lagrangian<R>)> = if first.is_pi() {
            // x mu (x) 1 +- x (x) mu, for x running over the A-basis e_j of P
            [("x mu (x) 1 + x (x) mu", 1), ("x mu (x) 1 - x (x) mu", -1)]
                .into_iter()
                .map(|(name, s)| {
                    let c = alg.mul(&alg.sign(s), &self.mu);
                    let l = (0..n)
                        .map(|j| {
                            let mut v = unit_vector(&alg, 2 * n, j, &c);
                            v[n + j] = one.clone();
                            v
                        })
                        .collect();
                    (name, Lagrangian { l, complement: complement.clone() })
                })
                .collect()
        } else {
            let q1: Vec<Vector<R>> = (0..n).map(|j| unit_vector(&alg, 2 * n, j, &one)).collect();
            let q2: Vec<Vector<R>> = (0..n).map(|j| unit_vector(&alg, 2 * n, n + j, &one)).collect();
            vec![("Q (x) 1", Lagrangian { l: q1.clone(), complement: q2.clone() }), ("Q (x) mu", Lagrangian { l: q2, complement: q1 })]
        };
        for (shape, lag) in candidates {
            if composite.verify_lagrangian(&lag)? {
                return Ok(ChainWitness { pair, shape, composite, lagrangian: lag });
            }
        }
        Err(Error::InternalInconsistency(format!(
            "no Lagrangian for {second} . {first} on {}",
            serde_json::to_string(&input.to_json()).unwrap_or_default()
        )))
    }

    /// The six distinct tables, indexed like `NODES`.
    pub fn node_tables(&self, rank_cap: Option<usize>) -> Result<Vec<Arc<WittTable<R>>>> {
        let keys: Vec<(Side, i64)> = {
            let mut k = Vec::new();
            for n in NODES {
                if !k.contains(&n) {
                    k.push(n);
                }
            }
            k
        };
        let specs = keys
            .iter()
            .map(|&(side, s)| Ok((self.alg_on(side).clone(), self.eps_on(side, s)?)))
            .collect::<Result<Vec<_>>>()?;
        let built = build_tables(&specs, rank_cap)?;
        Ok(NODES.iter().map(|n| built[keys.iter().position(|k| k == n).unwrap()].clone()).collect())
    }

    /// The eight induced homomorphisms, arrow `k` from node `k`.
    pub fn node_homs(&self, tables: &[Arc<WittTable<R>>]) -> Result<Vec<WittHom<R>>> {
        (0..8)
            .map(|k| {
                let name = format!("{}: {} -> {}", ARROWS[k], node_label(k), node_label(k + 1));
                WittHom::induced(&name, &tables[k], &tables[(k + 1) % 8], |f| self.apply(ARROWS[k], f))
            })
            .collect()
    }

    /// Builds the eight tables and compares image and kernel at every node.
    pub fn check_exact(&self, rank_cap: Option<usize>) -> Result<ExactnessReport> {
        let tables = self.node_tables(rank_cap)?;
        let homs = self.node_homs(&tables)?;
        let nodes = (0..8)
            .map(|k| node_report(k, node_label(k), &tables[k], Some(&homs[(k + 7) % 8]), Some(&homs[k])))
            .collect::<Result<Vec<_>>>()?;
        let exact = nodes.iter().all(|n| n.exact);
        Ok(ExactnessReport { config: self.a.kind_name(), nodes, exact })
    }

    /// Pairwise non-isometric rank-one forms `<u>` (regular `u`) and the hyperbolic plane.
    fn seeds(&self, side: Side, s: i64) -> Result<Arc<Vec<HermitianForm<R>>>> {
        if let Some(v) = self.seeds.lock().unwrap().get(&(side, s)) {
            return Ok(v.clone());
        }
        let alg = self.alg_on(side);
        let eps = self.eps_on(side, s)?;
        let mut out: Vec<HermitianForm<R>> = Vec::new();
        let mut seen = Vec::new();
        let mut cands = Vec::new();
        for u in alg.sym_elements(&eps)? {
            if let Ok(f) = HermitianForm::new(alg.clone(), eps.clone(), 1, vec![u]) {
                if f.module_rank().iter().any(|&r| r > 0) {
                    cands.push(f);
                }
            }
        }
        cands.push(HermitianForm::hyperbolic(alg, &eps, 1)?);
        for f in cands {
            let key = (f.invariant()?.rrk(), f.witt_key()?);
            if !seen.contains(&key) {
                seen.push(key);
                out.push(f);
            }
        }
        let out = Arc::new(out);
        self.seeds.lock().unwrap().insert((side, s), out.clone());
        Ok(out)
    }

    fn kernel_condition(&self, part: Part, form: &HermitianForm<R>) -> Result<()> {
        self.check_node(part.node(), form)?;
        if !self.apply(ARROWS[part.node()], form)?.witt_key()?.is_zero() {
            return Err(Error::HypothesisViolated(format!(
                "the class does not vanish under {}",
                ARROWS[part.node()]
            )));
        }
        Ok(())
    }

    /// Searches orthogonal sums of seed forms on the source node, with module rank forced by
    /// `rank_R(QA) = 2 rank_R(Q)` and `π` keeping the module; at most `search_cap` summands.
    pub fn preimage_oracle(
        &self,
        part: Part,
        form: &HermitianForm<R>,
        search_cap: Option<usize>,
    ) -> Result<HermitianForm<R>> {
        self.check_node(part.node(), form)?;
        let src = part.source_node();
        let map = ARROWS[src];
        let (side, s) = NODES[src];
        let target = form.module_rank();
        let need: Vec<usize> = if map.is_pi() {
            target
        } else {
            if target.iter().any(|r| r % 2 == 1) {
                return Err(Error::NotFound);
            }
            target.iter().map(|r| r / 2).collect()
        };
        let seeds = self.seeds(side, s)?;
        let ranks: Vec<Vec<usize>> = seeds.iter().map(|f| f.module_rank()).collect();
        let zero = HermitianForm::zero_form(self.alg_on(side), &self.eps_on(side, s)?)?;
        let cap = search_cap.unwrap_or(usize::MAX);
        let mut truncated = false;
        let mut stack: Vec<(usize, HermitianForm<R>, Vec<usize>, usize)> = vec![(0, zero, vec![0; need.len()], 0)];
        while let Some((start, acc, have, count)) = stack.pop() {
            if have == need {
                if self.apply(map, &acc)?.is_isometric(form)? {
                    return Ok(acc);
                }
                continue;
            }
            if count == cap {
                truncated = true;
                continue;
            }
            for i in (start..seeds.len()).rev() {
                let next: Vec<usize> = have.iter().zip(&ranks[i]).map(|(x, y)| x + y).collect();
                if next.iter().zip(&need).all(|(x, y)| x <= y) {
                    stack.push((i, acc.direct_sum(&seeds[i])?, next, count + 1));
                }
            }
        }
        if truncated {
            Err(Error::Inconclusive(format!("no preimage within {cap} summands")))
        } else {
            Err(Error::NotFound)
        }
    }

    /// Asserts that an anisotropic form in the kernel of the next arrow has an exact preimage.
    pub fn anisotropic_image_check(&self, part: Part, form: &HermitianForm<R>) -> Result<HermitianForm<R>> {
        self.kernel_condition(part, form)?;
        if form.n > 0 && form.find_isotropic()?.is_isotropic() {
            return Err(Error::HypothesisViolated("form is isotropic".into()));
        }
        self.preimage_oracle(part, form, None)
    }
}

impl<R: Classify + Splittable> OctagonData<R> {
    /// Whether `form` (whose class dies under the next arrow) has an exact preimage, decided
    /// from involution types, Brauer classes, reduced ranks and discriminants.
    pub fn finer_predicate(&self, part: Part, form: &HermitianForm<R>) -> Result<bool> {
        if !self.t_connected {
            return Err(Error::HypothesisViolated("T is not connected".into()));
        }
        self.kernel_condition(part, form)?;
        let all = |v: &[InvType], t: InvType| v.iter().all(|x| *x == t);
        match part {
            Part::I => {
                Ok(!all(&self.types.sigma[0], InvType::Symplectic) || form.reduced_rank().iter().all(|r| r % 4 == 0))
            }
            Part::II => {
                if !all(&self.types.sigma[1], InvType::Orthogonal) || self.a.brauer_is_split()?.iter().all(|&x| x) {
                    return Ok(true);
                }
                // B is commutative in every supported configuration, so [B] = 0
                Err(Error::Unsupported("the discriminant-algebra branch needs [A] != 0".into()))
            }
            Part::III => {
                if !all(&self.types.tau2[0], InvType::Orthogonal) {
                    return Ok(true);
                }
                let rrk = form.reduced_rank();
                if rrk.iter().any(|r| r % 2 == 1) {
                    return Ok(false);
                }
                if form.n == 0 {
                    return Ok(true);
                }
                let (d, _) = form.discriminant_value()?;
                let l2 = self.a.mul(&self.lambda, &self.lambda);
                let alpha = self
                    .a
                    .as_scalar(&l2)
                    .ok_or_else(|| Error::Unsupported("disc(T/R) needs lambda^2 in R".into()))?;
                let base = &self.a.base;
                Ok(base.comps.iter().enumerate().all(|(ci, r)| {
                    let ainv = r.inv(&alpha.c[ci]).unwrap_or_else(|| r.one());
                    let mut x = d.c[ci].clone();
                    for _ in 0..rrk[ci] / 2 {
                        x = r.mul(&x, &ainv);
                    }
                    r.is_square(&x)
                }))
            }
            Part::IV => Ok(true),
        }
    }
}

/// The two octagon configurations: `(α, β)_R`, and `(α, β)_R ⊗ R[√α₁]` when `alpha1` is given.
pub fn configuration<R: LocalRing>(
    base: &BaseRing<R>,
    alpha: &RingElement<R>,
    beta: &RingElement<R>,
    alpha1: Option<&RingElement<R>>,
) -> Result<Alg<R>> {
    let q = Algebra::quaternion(base, alpha, beta)?;
    match alpha1 {
        None => Ok(q),
        Some(a1) => Algebra::tensor(&q, &Algebra::quadratic_etale(base, a1)?),
    }
}

fn rewrap<R: LocalRing>(t: &WittTable<R>, f: HermitianForm<R>) -> Result<HermitianForm<R>> {
    HermitianForm::new(t.alg.clone(), t.eps.clone(), f.n, f.gram)
}

/// `0 -> W₁(T,θ) -Tr-> W(R) -λρ-> W₁(T,id) -Tr-> W(R) -λρ-> W₋₁(T,θ) -> 0` with `T = R[√α]`.
pub fn lewis_five<R: Classify>(base: &BaseRing<R>, alpha: &RingElement<R>, rank_cap: Option<usize>) -> Result<SequenceReport> {
    let t = Algebra::quadratic_etale(base, alpha)?;
    let tid = t.subalgebra(&[t.basis_elem(0), t.basis_elem(1)], |_, v| v.to_vec(), "T,id", 1)?;
    let r = Algebra::scalar(base)?;
    let lam = t.lambda.clone().ok_or_else(|| Error::InternalInconsistency("etale lambda".into()))?;
    let specs = vec![
        (t.clone(), t.one()),
        (r.clone(), r.one()),
        (tid.clone(), tid.one()),
        (t.clone(), t.sign(-1)),
    ];
    let built = build_tables(&specs, rank_cap)?;
    let tables = vec![built[0].clone(), built[1].clone(), built[2].clone(), built[1].clone(), built[3].clone()];
    let trace = |src: &Arc<WittTable<R>>, name: &str| {
        WittHom::induced(name, src, &built[1], |f| rewrap(&built[1], f.trace_transfer()?))
    };
    let lambda_rho = |dst: &Arc<WittTable<R>>, name: &str| {
        WittHom::induced(name, &built[1], dst, |f| {
            let gram = f
                .gram
                .iter()
                .map(|x| {
                    let s = r.as_scalar(x).expect("scalar algebra");
                    dst.alg.mul(&lam, &dst.alg.scalar_elem(&s))
                })
                .collect();
            HermitianForm::new(dst.alg.clone(), dst.eps.clone(), f.n, gram)
        })
    };
    let homs = vec![
        trace(&built[0], "Tr: W_1(T,theta) -> W(R)")?,
        lambda_rho(&built[2], "lambda rho: W(R) -> W_1(T,id)")?,
        trace(&built[2], "Tr: W_1(T,id) -> W(R)")?,
        lambda_rho(&built[3], "lambda rho: W(R) -> W_-1(T,theta)")?,
    ];
    let labels: Vec<String> =
        ["W_1(T,theta)", "W(R)", "W_1(T,id)", "W(R)", "W_-1(T,theta)"].iter().map(|s| s.to_string()).collect();
    let side = vec![SideCheck { name: "Tr on W_1(T,theta) is injective".into(), ok: homs[0].is_injective() }];
    chain_report("five_term", &tables, &homs, &labels, side)
}

/// `0 -> W₁(A) -> W₁(B,τ) -> W₋₁(A) -> W₁(B,id) -> W₋₁(A) -> W₋₁(B,τ) -> W₁(A) -> 0`
/// for `A = (α, β)_R`, plus injectivity of `[f] -> [Trd ∘ f]` on `W₁(A)`.
pub fn lewis_seven<R: Classify>(
    base: &BaseRing<R>,
    alpha: &RingElement<R>,
    beta: &RingElement<R>,
    rank_cap: Option<usize>,
) -> Result<SequenceReport> {
    let a = Algebra::quaternion(base, alpha, beta)?;
    let d = make_octagon(&a, &a.one())?;
    let all = d.node_tables(rank_cap)?;
    let homs_all = d.node_homs(&all)?;
    let tables: Vec<_> = all[..7].to_vec();
    let homs: Vec<_> = homs_all[..6].to_vec();
    let labels: Vec<String> = (0..7).map(node_label).collect();
    let r = Algebra::scalar(base)?;
    let wr = Arc::new(WittTable::build(&r, &r.one(), rank_cap)?);
    let trd = WittHom::induced("Trd", &all[0], &wr, |f| rewrap(&wr, f.trace_transfer()?))?;
    let side = vec![
        SideCheck { name: "W_-1(B,id) = 0".into(), ok: all[7].is_trivial() },
        SideCheck { name: "Trd on W_1(A) is injective".into(), ok: trd.is_injective() },
    ];
    chain_report("seven_term", &tables, &homs, &labels, side)
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobsonReport {
    pub isotropic: bool,
    pub trace_isotropic: bool,
    pub isotropy_equiv: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isometric: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_isometric: Option<bool>,
    pub isometry_equiv: bool,
}

/// Compares isotropy of `f` with that of `Tr ∘ f`, and, given `g`, isometry of `f, g` with
/// isometry of their traces.
pub fn jacobson_check<R: Classify>(f: &HermitianForm<R>, g: Option<&HermitianForm<R>>) -> Result<JacobsonReport> {
    let a = &f.alg;
    if !matches!(a.kind, Kind::Etale { .. } | Kind::Quaternion { .. }) || f.eps != a.one() {
        return Err(Error::HypothesisViolated("needs a 1-hermitian form over an etale or quaternion algebra".into()));
    }
    let iso = |h: &HermitianForm<R>| -> Result<bool> {
        Ok(h.n > 0 && !matches!(h.find_isotropic()?, Isotropy::Anisotropic))
    };
    let tf = f.trace_transfer()?;
    let (isotropic, trace_isotropic) = (iso(f)?, iso(&tf)?);
    let (isometric, trace_isometric) = match g {
        Some(g) => {
            let tg = g.trace_transfer()?;
            let tg = HermitianForm::new(tf.alg.clone(), tf.eps.clone(), tg.n, tg.gram)?;
            (Some(f.is_isometric(g)?), Some(tf.is_isometric(&tg)?))
        }
        None => (None, None),
    };
    Ok(JacobsonReport {
        isotropic,
        trace_isotropic,
        isotropy_equiv: isotropic == trace_isotropic,
        isometric,
        trace_isometric,
        isometry_equiv: isometric == trace_isometric,
    })
}
