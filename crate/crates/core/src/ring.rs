//! Coefficient rings: odd `Z/m` split into prime-power components, and exact
//! rationals standing in for the reals (only signs matter there).

use std::fmt::Debug;
use std::hash::Hash;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MAX_MODULUS: u64 = 1_000_000;

/// A local ring with 2 invertible in which every element is a unit times a
/// power of a uniformizer (`Z/p^k`, or a field).
pub trait LocalRing: Clone + Debug + PartialEq + Eq + Hash + Send + Sync + 'static {
    type E: Clone + Debug + PartialEq + Eq + Hash + Send + Sync + 'static;
    type Cache: Send + Sync + 'static;

    fn zero(&self) -> Self::E;
    fn one(&self) -> Self::E;
    fn int(&self, n: i64) -> Self::E;
    fn add(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn sub(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn neg(&self, a: &Self::E) -> Self::E;
    /// `None` for zero, otherwise the exponent of the uniformizer.
    fn val(&self, a: &Self::E) -> Option<u32>;
    fn inv(&self, a: &Self::E) -> Option<Self::E>;
    /// Some `q` with `b * q == a`.
    fn div_exact(&self, a: &Self::E, b: &Self::E) -> Option<Self::E>;
    /// Square test for units.
    fn is_square(&self, a: &Self::E) -> bool;
    fn residue_field(&self) -> Self;
    fn reduce(&self, a: &Self::E) -> Self::E;
    fn elements(&self) -> Option<Vec<Self::E>>;
    fn name(&self) -> String;
    fn to_json(&self, a: &Self::E) -> Value;
    fn parse(&self, s: &str) -> Result<Self::E>;

    fn is_zero(&self, a: &Self::E) -> bool {
        self.val(a).is_none()
    }
    fn is_unit(&self, a: &Self::E) -> bool {
        self.val(a) == Some(0)
    }
    fn half(&self) -> Self::E {
        self.inv(&self.int(2)).expect("2 is a unit")
    }
}

/// `Z/p^k` with `p` odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Zpk {
    pub p: u64,
    pub k: u32,
    pub m: u64,
}

impl Zpk {
    pub fn new(p: u64, k: u32) -> Zpk {
        Zpk { p, k, m: p.pow(k) }
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut b = a % self.m;
        let mut r = 1 % self.m;
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % self.m;
            }
            b = b * b % self.m;
            e >>= 1;
        }
        r
    }
}

fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i64, (a % m) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i64) as u64)
}

impl LocalRing for Zpk {
    type E = u64;
    type Cache = crate::morita::MoritaCache;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.m
    }
    fn int(&self, n: i64) -> u64 {
        n.rem_euclid(self.m as i64) as u64
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        let s = a + b;
        if s >= self.m {
            s - self.m
        } else {
            s
        }
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.m - b
        }
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a * b % self.m
    }
    fn neg(&self, a: &u64) -> u64 {
        if *a == 0 {
            0
        } else {
            self.m - a
        }
    }
    fn val(&self, a: &u64) -> Option<u32> {
        if *a == 0 {
            return None;
        }
        let mut v = 0;
        let mut x = *a;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        Some(v)
    }
    fn inv(&self, a: &u64) -> Option<u64> {
        inv_mod(*a, self.m)
    }
    fn div_exact(&self, a: &u64, b: &u64) -> Option<u64> {
        let vb = match self.val(b) {
            None => return if *a == 0 { Some(0) } else { None },
            Some(v) => v,
        };
        let va = match self.val(a) {
            None => return Some(0),
            Some(v) => v,
        };
        if va < vb {
            return None;
        }
        let pv = self.p.pow(vb);
        let bu = inv_mod(b / pv, self.m)?;
        Some((a / pv) % self.m * bu % self.m)
    }
    fn is_square(&self, a: &u64) -> bool {
        self.pow(a % self.p, (self.p - 1) / 2) % self.p == 1
    }
    fn residue_field(&self) -> Zpk {
        Zpk::new(self.p, 1)
    }
    fn reduce(&self, a: &u64) -> u64 {
        a % self.p
    }
    fn elements(&self) -> Option<Vec<u64>> {
        Some((0..self.m).collect())
    }
    fn name(&self) -> String {
        format!("Z/{}", self.m)
    }
    fn to_json(&self, a: &u64) -> Value {
        Value::from(*a)
    }
    fn parse(&self, s: &str) -> Result<u64> {
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n = self.parse(n)?;
            let d = self.parse(d)?;
            let di = self.inv(&d).ok_or_else(|| Error::NotAUnit(t.to_string()))?;
            return Ok(self.mul(&n, &di));
        }
        let v: i64 = t.parse().map_err(|_| Error::InvalidSpec(format!("bad integer '{t}'")))?;
        Ok(self.int(v))
    }
}

/// Exact rationals with sign-based square classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RealQ;

impl LocalRing for RealQ {
    type E = BigRational;
    type Cache = ();

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn int(&self, n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn val(&self, a: &BigRational) -> Option<u32> {
        if a.is_zero() {
            None
        } else {
            Some(0)
        }
    }
    fn inv(&self, a: &BigRational) -> Option<BigRational> {
        if a.is_zero() {
            None
        } else {
            Some(a.recip())
        }
    }
    fn div_exact(&self, a: &BigRational, b: &BigRational) -> Option<BigRational> {
        if b.is_zero() {
            if a.is_zero() {
                Some(BigRational::zero())
            } else {
                None
            }
        } else {
            Some(a / b)
        }
    }
    fn is_square(&self, a: &BigRational) -> bool {
        a.is_positive()
    }
    fn residue_field(&self) -> RealQ {
        RealQ
    }
    fn reduce(&self, a: &BigRational) -> BigRational {
        a.clone()
    }
    fn elements(&self) -> Option<Vec<BigRational>> {
        None
    }
    fn name(&self) -> String {
        "R".to_string()
    }
    fn to_json(&self, a: &BigRational) -> Value {
        if a.is_integer() {
            match a.to_integer().to_i64() {
                Some(v) => Value::from(v),
                None => Value::from(a.to_string()),
            }
        } else {
            Value::from(format!("{}/{}", a.numer(), a.denom()))
        }
    }
    fn parse(&self, s: &str) -> Result<BigRational> {
        let t = s.trim();
        let bad = || Error::InvalidSpec(format!("bad rational '{t}'"));
        let (n, d) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(n, d))
    }
}

/// Finite product of local rings of one kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BaseRing<R: LocalRing> {
    pub comps: Vec<R>,
    pub desc: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingElement<R: LocalRing> {
    pub c: Vec<R::E>,
}

/// Result of parsing a descriptor.
#[derive(Clone, Debug)]
pub enum AnyRing {
    Finite(BaseRing<Zpk>),
    Real(BaseRing<RealQ>),
}

fn factor(mut m: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 3;
    while d * d <= m {
        if m % d == 0 {
            let mut k = 0;
            while m % d == 0 {
                m /= d;
                k += 1;
            }
            out.push((d, k));
        }
        d += 2;
    }
    if m > 1 {
        out.push((m, 1));
    }
    out
}

fn is_prime(n: u64) -> bool {
    n >= 2 && factor(n) == vec![(n, 1)]
}

enum Atom {
    Mod(u64),
    Real,
}

fn parse_atom(s: &str) -> Result<Atom> {
    let t = s.trim();
    if t == "R" {
        return Ok(Atom::Real);
    }
    let num = |x: &str| -> Result<u64> {
        x.trim()
            .parse::<u64>()
            .map_err(|_| Error::InvalidSpec(format!("bad modulus in '{t}'")))
    };
    let check = |m: u64| -> Result<u64> {
        if m < 3 || m % 2 == 0 || m > MAX_MODULUS {
            Err(Error::InvalidModulus(format!("{m}")))
        } else {
            Ok(m)
        }
    };
    if let Some(rest) = t.strip_prefix("Z/") {
        return Ok(Atom::Mod(check(num(rest)?)?));
    }
    if let Some(rest) = t.strip_prefix("GF(").and_then(|r| r.strip_suffix(')')) {
        let p = check(num(rest)?)?;
        if !is_prime(p) {
            return Err(Error::InvalidModulus(format!("GF({p}) needs a prime")));
        }
        return Ok(Atom::Mod(p));
    }
    Err(Error::InvalidSpec(format!("unknown ring '{t}'")))
}

/// Parses `Z/m`, `GF(p)`, `R`, or a product of these joined by `x`.
pub fn make_ring(desc: &str) -> Result<AnyRing> {
    let parts: Vec<&str> = desc
        .split(|c| c == 'x' || c == 'X' || c == '×')
        .map(str::trim)
        .collect();
    if parts.iter().all(|p| p.is_empty()) {
        return Err(Error::InvalidSpec("empty product".into()));
    }
    let mut mods = Vec::new();
    let mut reals = 0;
    for p in &parts {
        if p.is_empty() {
            return Err(Error::InvalidSpec(format!("empty factor in '{desc}'")));
        }
        match parse_atom(p)? {
            Atom::Mod(m) => mods.push(m),
            Atom::Real => reals += 1,
        }
    }
    let desc = parts.join(" x ");
    match (mods.is_empty(), reals) {
        (true, r) => Ok(AnyRing::Real(BaseRing { comps: vec![RealQ; r], desc })),
        (false, 0) => {
            let comps = mods
                .iter()
                .flat_map(|&m| factor(m).into_iter().map(|(p, k)| Zpk::new(p, k)))
                .collect();
            Ok(AnyRing::Finite(BaseRing { comps, desc }))
        }
        _ => Err(Error::Unsupported("products mixing R with Z/m".into())),
    }
}

impl BaseRing<Zpk> {
    pub fn parse(desc: &str) -> Result<Self> {
        match make_ring(desc)? {
            AnyRing::Finite(r) => Ok(r),
            AnyRing::Real(_) => Err(Error::NotEnumerable),
        }
    }

    /// Order of the ring.
    pub fn size(&self) -> u64 {
        self.comps.iter().map(|c| c.m).product()
    }

    /// The modulus of the CRT product when the ring is a single `Z/m`.
    pub fn modulus(&self) -> u64 {
        self.size()
    }

    pub fn residue_primes(&self) -> Vec<u64> {
        self.comps.iter().map(|c| c.p).collect()
    }
}

impl BaseRing<RealQ> {
    pub fn reals() -> Self {
        BaseRing { comps: vec![RealQ], desc: "R".into() }
    }
}

impl<R: LocalRing> BaseRing<R> {
    pub fn local(r: R) -> Self {
        let desc = r.name();
        BaseRing { comps: vec![r], desc }
    }

    pub fn ncomps(&self) -> usize {
        self.comps.len()
    }

    pub fn int(&self, n: i64) -> RingElement<R> {
        RingElement { c: self.comps.iter().map(|r| r.int(n)).collect() }
    }

    pub fn zero(&self) -> RingElement<R> {
        self.int(0)
    }

    pub fn one(&self) -> RingElement<R> {
        self.int(1)
    }

    pub fn parse_elem(&self, s: &str) -> Result<RingElement<R>> {
        Ok(RingElement { c: self.comps.iter().map(|r| r.parse(s)).collect::<Result<_>>()? })
    }

    fn check(&self, a: &RingElement<R>) -> Result<()> {
        if a.c.len() != self.comps.len() {
            return Err(Error::RingMismatch);
        }
        Ok(())
    }

    fn zip(
        &self,
        a: &RingElement<R>,
        b: &RingElement<R>,
        f: impl Fn(&R, &R::E, &R::E) -> R::E,
    ) -> Result<RingElement<R>> {
        self.check(a)?;
        self.check(b)?;
        Ok(RingElement {
            c: self.comps.iter().zip(a.c.iter().zip(&b.c)).map(|(r, (x, y))| f(r, x, y)).collect(),
        })
    }

    pub fn add(&self, a: &RingElement<R>, b: &RingElement<R>) -> Result<RingElement<R>> {
        self.zip(a, b, |r, x, y| r.add(x, y))
    }

    pub fn sub(&self, a: &RingElement<R>, b: &RingElement<R>) -> Result<RingElement<R>> {
        self.zip(a, b, |r, x, y| r.sub(x, y))
    }

    pub fn mul(&self, a: &RingElement<R>, b: &RingElement<R>) -> Result<RingElement<R>> {
        self.zip(a, b, |r, x, y| r.mul(x, y))
    }

    pub fn neg(&self, a: &RingElement<R>) -> Result<RingElement<R>> {
        self.check(a)?;
        Ok(RingElement { c: self.comps.iter().zip(&a.c).map(|(r, x)| r.neg(x)).collect() })
    }

    pub fn is_unit(&self, a: &RingElement<R>) -> Result<bool> {
        self.check(a)?;
        Ok(self.comps.iter().zip(&a.c).all(|(r, x)| r.is_unit(x)))
    }

    pub fn inv(&self, a: &RingElement<R>) -> Result<RingElement<R>> {
        self.check(a)?;
        let c = self
            .comps
            .iter()
            .zip(&a.c)
            .map(|(r, x)| r.inv(x).ok_or_else(|| Error::NotAUnit(format!("{:?}", a.c))))
            .collect::<Result<_>>()?;
        Ok(RingElement { c })
    }

    /// Whether the unit `u` is a square of a unit.
    pub fn square_class(&self, u: &RingElement<R>) -> Result<bool> {
        if !self.is_unit(u)? {
            return Err(Error::NotAUnit(format!("{:?}", u.c)));
        }
        Ok(self.comps.iter().zip(&u.c).all(|(r, x)| r.is_square(x)))
    }

    /// Whether `alpha` is a norm from `S = R[l | l^2 = a]`.
    pub fn norm_class(&self, a: &RingElement<R>, alpha: &RingElement<R>) -> Result<bool> {
        if !self.is_unit(alpha)? {
            return Err(Error::NotAUnit(format!("{:?}", alpha.c)));
        }
        if !self.is_unit(a)? {
            return Err(Error::NotAUnit(format!("{:?}", a.c)));
        }
        Ok(self.comps.iter().zip(a.c.iter().zip(&alpha.c)).all(|(r, (a, al))| local_norm_class(r, a, al)))
    }

    /// Reduction of `a` modulo the maximal ideal of component `i`.
    pub fn residue(&self, a: &RingElement<R>, i: usize) -> Result<(R, R::E)> {
        self.check(a)?;
        let r = self.comps.get(i).ok_or(Error::IndexError(i))?;
        Ok((r.residue_field(), r.reduce(&a.c[i])))
    }

    /// All elements, ascending per component and lexicographic across components.
    pub fn enumerate(&self) -> Result<Vec<RingElement<R>>> {
        let lists = self
            .comps
            .iter()
            .map(|r| r.elements().ok_or(Error::NotEnumerable))
            .collect::<Result<Vec<_>>>()?;
        Ok(cartesian(&lists).into_iter().map(|c| RingElement { c }).collect())
    }

    pub fn to_json(&self, a: &RingElement<R>) -> Value {
        Value::Array(self.comps.iter().zip(&a.c).map(|(r, x)| r.to_json(x)).collect())
    }
}

pub(crate) fn cartesian<T: Clone>(lists: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for l in lists {
        out = out
            .into_iter()
            .flat_map(|pre| {
                l.iter().map(move |x| {
                    let mut v = pre.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// Norm test for one component, decided on the residue field by enumeration.
pub fn local_norm_class<R: LocalRing>(r: &R, a: &R::E, alpha: &R::E) -> bool {
    let k = r.residue_field();
    let (a, alpha) = (r.reduce(a), r.reduce(alpha));
    match k.elements() {
        Some(els) => els.iter().any(|x| {
            els.iter().any(|y| {
                let n = k.sub(&k.mul(x, x), &k.mul(&a, &k.mul(y, y)));
                n == alpha
            })
        }),
        // over the reals: a split algebra has all units as norms; otherwise norms are positive
        None => k.is_square(&a) || k.is_square(&alpha),
    }
}

/// Newton lifting `e <- 3e^2 - 2e^3` of an idempotent modulo `p` to one modulo `p^k`.
pub fn lift_idempotent<F>(r: &Zpk, mul: F, e0: &[u64]) -> Result<Vec<u64>>
where
    F: Fn(&[u64], &[u64]) -> Vec<u64>,
{
    let red = |v: &[u64]| v.iter().map(|x| x % r.p).collect::<Vec<_>>();
    let e2 = mul(e0, e0);
    if red(&e2) != red(e0) {
        return Err(Error::NotIdempotent);
    }
    let mut e = e0.to_vec();
    for _ in 0..=r.k {
        let sq = mul(&e, &e);
        if sq == e {
            return Ok(e);
        }
        let cu = mul(&sq, &e);
        e = sq.iter().zip(&cu).map(|(s, c)| r.sub(&r.mul(&3, s), &r.mul(&2, c))).collect();
    }
    if mul(&e, &e) == e {
        Ok(e)
    } else {
        Err(Error::InternalInconsistency("idempotent lifting did not converge".into()))
    }
}
