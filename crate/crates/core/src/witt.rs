//! Witt groups over finite base rings as explicit tables.
//!
//! Classes are found by breadth-first closure from the rank-one forms `<u>`,
//! where `u` runs over ε-symmetric elements with a regular `1 x 1` Gram. Non-unit
//! `u` give forms on non-free projectives, which the Witt group needs as soon as
//! the algebra has more than one simple factor.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::algiv::{Alg, AlgElement};
use crate::error::{Error, Result};
use crate::herm::{HermitianForm, WittKey};
use crate::morita::Classify;
use crate::ring::{cartesian, LocalRing};

const MAX_CLASSES: usize = 4096;

#[derive(Clone, Debug)]
pub struct WittTable<R: LocalRing> {
    pub alg: Alg<R>,
    pub eps: AlgElement<R>,
    /// Class representatives; index 0 is the zero form.
    pub classes: Vec<HermitianForm<R>>,
    pub keys: Vec<WittKey>,
    pub add: Vec<Vec<usize>>,
    pub neg: Vec<usize>,
    /// Classes of the rank-one seed forms.
    pub generators: Vec<usize>,
    index: HashMap<WittKey, usize>,
}

impl<R: Classify> WittTable<R> {
    /// Closes the seed classes under `+`; representatives above `rank_cap` abort the search.
    pub fn build(alg: &Alg<R>, eps: &AlgElement<R>, rank_cap: Option<usize>) -> Result<Self> {
        alg.check_epsilon(eps)?;
        let cap = rank_cap.unwrap_or(4 * alg.deg);
        let seeds = seed_forms(alg, eps)?;
        let zero = HermitianForm::zero_form(alg, eps)?;
        let mut t = WittTable {
            alg: alg.clone(),
            eps: eps.clone(),
            keys: vec![zero.witt_key()?],
            classes: vec![zero],
            add: Vec::new(),
            neg: Vec::new(),
            generators: Vec::new(),
            index: HashMap::new(),
        };
        t.index.insert(t.keys[0].clone(), 0);

        let mut gens: Vec<(HermitianForm<R>, WittKey)> = Vec::new();
        for s in seeds {
            let k = s.witt_key()?;
            if !gens.iter().any(|(_, g)| *g == k) {
                gens.push((s, k));
            }
        }
        let mut queue = VecDeque::from([0usize]);
        while let Some(c) = queue.pop_front() {
            for (g, _) in &gens {
                let sum = t.classes[c].direct_sum(g)?;
                let k = sum.witt_key()?;
                if t.index.contains_key(&k) {
                    continue;
                }
                let rep = reduce(sum)?;
                if rep.n > cap {
                    return Err(Error::CapExceeded(format!(
                        "a class needs rank {} > cap {cap} ({} classes so far)",
                        rep.n,
                        t.classes.len()
                    )));
                }
                if t.classes.len() >= MAX_CLASSES {
                    return Err(Error::CapExceeded(format!("more than {MAX_CLASSES} classes")));
                }
                t.index.insert(k.clone(), t.classes.len());
                queue.push_back(t.classes.len());
                t.keys.push(k);
                t.classes.push(rep);
            }
        }
        t.generators = gens.iter().map(|(_, k)| t.index[k]).collect();
        t.generators.sort_unstable();
        t.generators.dedup();

        let n = t.classes.len();
        let mut add = vec![vec![0; n]; n];
        for i in 0..n {
            for j in i..n {
                let s = t.class_of(&t.classes[i].direct_sum(&t.classes[j])?)?;
                add[i][j] = s;
                add[j][i] = s;
            }
        }
        t.neg = (0..n)
            .map(|i| add[i].iter().position(|&s| s == 0))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InternalInconsistency("a class has no inverse".into()))?;
        t.add = add;
        Ok(t)
    }

    /// Index of the class of `f`.
    pub fn class_of(&self, f: &HermitianForm<R>) -> Result<usize> {
        if !Arc::ptr_eq(&f.alg, &self.alg) && *f.alg != *self.alg {
            return Err(Error::FormMismatch("form lives over another algebra".into()));
        }
        if f.eps != self.eps {
            return Err(Error::FormMismatch("form has another epsilon".into()));
        }
        let k = f.witt_key()?;
        self.index
            .get(&k)
            .copied()
            .ok_or_else(|| Error::CapExceeded("class not reached by the table".into()))
    }

    /// Representatives are pairwise inequivalent and anisotropic; checked with the
    /// form-level predicates, independently of the key lookup.
    pub fn check_representatives(&self) -> Result<()> {
        for (i, f) in self.classes.iter().enumerate() {
            if f.invariant()?.is_isotropic() {
                return Err(Error::InternalInconsistency(format!("representative {i} is isotropic")));
            }
            for (j, g) in self.classes.iter().enumerate().skip(i + 1) {
                if f.witt_equivalent(g)? {
                    return Err(Error::InternalInconsistency(format!("classes {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }
}

impl<R: LocalRing> WittTable<R> {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.classes.len() == 1
    }

    /// Abelian group axioms on the table.
    pub fn check_axioms(&self) -> Result<()> {
        let n = self.len();
        let bad = |m: String| Err(Error::InternalInconsistency(m));
        for i in 0..n {
            if self.add[0][i] != i {
                return bad(format!("0 + {i} != {i}"));
            }
            if self.add[i][self.neg[i]] != 0 {
                return bad(format!("{i} has no inverse"));
            }
            for j in 0..n {
                if self.add[i][j] != self.add[j][i] {
                    return bad(format!("{i} + {j} is not commutative"));
                }
                for k in 0..n {
                    if self.add[self.add[i][j]][k] != self.add[i][self.add[j][k]] {
                        return bad(format!("({i} + {j}) + {k} is not associative"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn order(&self, i: usize) -> usize {
        let mut x = i;
        let mut k = 1;
        while x != 0 {
            x = self.add[x][i];
            k += 1;
        }
        k
    }

    /// `m * x`.
    pub fn multiple(&self, x: usize, m: usize) -> usize {
        (0..m).fold(0, |acc, _| self.add[acc][x])
    }

    pub fn to_json(&self) -> Value {
        json!({
            "classes": self.classes.iter().map(HermitianForm::to_json).collect::<Vec<_>>(),
            "addition": self.add,
            "negation": self.neg,
            "generators": self.generators,
            "structure": group_structure(self),
        })
    }
}

/// Rank-one forms `<u>` with `u` ε-symmetric, nonzero and regular.
///
/// `u` runs over combinations of a basis of `Sym_ε` with coefficients in
/// `0..p`, which meets every residue class of `Sym_ε`.
fn seed_forms<R: Classify>(alg: &Alg<R>, eps: &AlgElement<R>) -> Result<Vec<HermitianForm<R>>> {
    let mut per = Vec::new();
    for (l, e) in alg.comps.iter().zip(&eps.c) {
        let q = l.ring.residue_field().elements().ok_or(Error::NotEnumerable)?.len();
        let digits: Vec<R::E> = (0..q as i64).map(|i| l.ring.int(i)).collect();
        let basis = l.sym_basis(e);
        let combos = cartesian(&vec![digits; basis.len()]);
        per.push(
            combos
                .into_iter()
                .map(|co| {
                    let mut v = l.zero();
                    for (c, b) in co.iter().zip(&basis) {
                        v = l.add(&v, &l.scale(c, b));
                    }
                    v
                })
                .collect::<Vec<_>>(),
        );
    }
    let mut out = Vec::new();
    for c in cartesian(&per) {
        let u = AlgElement { c };
        if alg.is_zero(&u) {
            continue;
        }
        if let Ok(f) = HermitianForm::new(alg.clone(), eps.clone(), 1, vec![u]) {
            out.push(f);
        }
    }
    Ok(out)
}

/// Witt-reduced representative: the anisotropic kernel when it is smaller.
fn reduce<R: Classify>(f: HermitianForm<R>) -> Result<HermitianForm<R>> {
    match f.witt_decompose() {
        Ok(d) if d.kernel.n < f.n => Ok(d.kernel),
        Ok(_) | Err(Error::NotUnimodular) => Ok(f),
        Err(e) => Err(e),
    }
}

/// Invariant factors `d_1 | d_2 | ...` of a table, all greater than one.
pub fn group_structure<R: LocalRing>(t: &WittTable<R>) -> Vec<u64> {
    let n = t.len() as u64;
    let mut primes = Vec::new();
    let mut m = n;
    let mut p = 2;
    while m > 1 {
        if m % p == 0 {
            primes.push(p);
            while m % p == 0 {
                m /= p;
            }
        }
        p += 1;
    }
    // per prime: elementary divisors, largest first
    let mut columns: Vec<Vec<u64>> = Vec::new();
    for p in primes {
        // c[k] = log_p |G[p^k]|
        let mut c = vec![0u32];
        let mut pk = 1usize;
        loop {
            pk *= p as usize;
            let count = (0..t.len()).filter(|&x| t.multiple(x, pk) == 0).count() as u64;
            let mut lg = 0;
            let mut v = count;
            while v > 1 {
                v /= p;
                lg += 1;
            }
            let done = c.last() == Some(&lg);
            c.push(lg);
            if done {
                break;
            }
        }
        // cyclic factors of order >= p^k: c[k] - c[k-1]
        let ge: Vec<u32> = (1..c.len()).map(|k| c[k] - c[k - 1]).collect();
        let mut divs = Vec::new();
        for k in (1..=ge.len()).rev() {
            let exact = ge[k - 1] - ge.get(k).copied().unwrap_or(0);
            for _ in 0..exact {
                divs.push(p.pow(k as u32));
            }
        }
        columns.push(divs);
    }
    let len = columns.iter().map(Vec::len).max().unwrap_or(0);
    let mut out: Vec<u64> =
        (0..len).map(|i| columns.iter().map(|c| c.get(i).copied().unwrap_or(1)).product()).collect();
    out.reverse();
    out
}

/// Homomorphism of tables induced by a form-level functor.
#[derive(Clone, Debug)]
pub struct WittHom<R: LocalRing> {
    pub name: String,
    pub source: Arc<WittTable<R>>,
    pub target: Arc<WittTable<R>>,
    pub map: Vec<usize>,
}

impl<R: Classify> WittHom<R> {
    /// Applies `f` to every representative and checks that the result is additive.
    pub fn induced(
        name: &str,
        source: &Arc<WittTable<R>>,
        target: &Arc<WittTable<R>>,
        f: impl Fn(&HermitianForm<R>) -> Result<HermitianForm<R>>,
    ) -> Result<Self> {
        let map = source.classes.iter().map(|c| target.class_of(&f(c)?)).collect::<Result<Vec<_>>>()?;
        let h = WittHom { name: name.to_string(), source: source.clone(), target: target.clone(), map };
        h.check_additive()?;
        Ok(h)
    }
}

impl<R: LocalRing> WittHom<R> {
    pub fn zero(name: &str, source: &Arc<WittTable<R>>, target: &Arc<WittTable<R>>) -> Self {
        WittHom { name: name.to_string(), source: source.clone(), target: target.clone(), map: vec![0; source.len()] }
    }

    pub fn check_additive(&self) -> Result<()> {
        if self.map[0] != 0 {
            return Err(Error::InternalInconsistency(format!("{}: 0 is not sent to 0", self.name)));
        }
        let (s, t) = (&self.source, &self.target);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if self.map[s.add[i][j]] != t.add[self.map[i]][self.map[j]] {
                    return Err(Error::InternalInconsistency(format!("{} is not additive at ({i}, {j})", self.name)));
                }
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Vec<usize> {
        (0..self.map.len()).filter(|&i| self.map[i] == 0).collect()
    }

    pub fn image(&self) -> Vec<usize> {
        let mut v = self.map.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn is_injective(&self) -> bool {
        self.kernel() == [0]
    }

    pub fn is_surjective(&self) -> bool {
        self.image().len() == self.target.len()
    }

    /// `other` after `self`.
    pub fn then(&self, other: &WittHom<R>) -> Result<WittHom<R>> {
        if !same_table(&self.target, &other.source) {
            return Err(Error::HomMismatch(format!("{} does not feed {}", self.name, other.name)));
        }
        Ok(WittHom {
            name: format!("{} . {}", other.name, self.name),
            source: self.source.clone(),
            target: other.target.clone(),
            map: self.map.iter().map(|&i| other.map[i]).collect(),
        })
    }
}

fn same_table<R: LocalRing>(a: &Arc<WittTable<R>>, b: &Arc<WittTable<R>>) -> bool {
    Arc::ptr_eq(a, b) || (a.keys == b.keys && a.eps == b.eps && *a.alg == *b.alg)
}

/// Whether `image(h_in) == kernel(h_out)`.
pub fn exact_at<R: LocalRing>(h_in: &WittHom<R>, h_out: &WittHom<R>) -> Result<bool> {
    if !same_table(&h_in.target, &h_out.source) {
        return Err(Error::HomMismatch(format!("{} does not feed {}", h_in.name, h_out.name)));
    }
    Ok(h_in.image() == h_out.kernel())
}
