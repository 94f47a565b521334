//! Classification of hermitian forms by reduction to the residue field and
//! Morita transfer to forms over the centres of the simple factors.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algiv::{Algebra, Kind, LocalAlg};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ring::{LocalRing, RealQ, Zpk};

/// Invariants of a form on one simple factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FactorInv {
    /// Symmetric bilinear over the factor's centre; `disc_square` is the class of
    /// the signed discriminant `(-1)^{N(N-1)/2} det`.
    Quadratic { rank: usize, disc_square: bool },
    Alternating { rank: usize },
    Hermitian { rank: usize },
    /// A pair of factors switched by the involution; `dim` is that of one side.
    Exchange { dim: usize, rrk: usize },
    /// Real trace form.
    Signed { rank: usize, signature: i64 },
    /// Real case with trivial Witt group.
    Null { rank: usize },
}

/// Witt class of one factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FactorKey {
    Zero,
    Quadratic { odd: bool, disc_square: bool },
    HermitianOdd,
    Signature(i64),
}

impl FactorInv {
    pub fn key(&self) -> FactorKey {
        match *self {
            FactorInv::Quadratic { rank, disc_square } => {
                if rank % 2 == 0 && disc_square {
                    FactorKey::Zero
                } else {
                    FactorKey::Quadratic { odd: rank % 2 == 1, disc_square }
                }
            }
            FactorInv::Hermitian { rank } if rank % 2 == 1 => FactorKey::HermitianOdd,
            FactorInv::Signed { signature, .. } if signature != 0 => FactorKey::Signature(signature),
            _ => FactorKey::Zero,
        }
    }

    pub fn isotropic(&self) -> bool {
        match *self {
            FactorInv::Quadratic { rank, disc_square } => rank >= 3 || (rank == 2 && disc_square),
            FactorInv::Alternating { rank } | FactorInv::Hermitian { rank } => rank >= 2,
            FactorInv::Exchange { dim, .. } => dim > 0,
            FactorInv::Signed { rank, signature } => (signature.unsigned_abs() as usize) < rank,
            FactorInv::Null { rank } => rank > 0,
        }
    }

    /// Reduced rank on this factor.
    pub fn rrk(&self) -> usize {
        match *self {
            FactorInv::Quadratic { rank, .. }
            | FactorInv::Alternating { rank }
            | FactorInv::Hermitian { rank }
            | FactorInv::Signed { rank, .. }
            | FactorInv::Null { rank } => rank,
            FactorInv::Exchange { rrk, .. } => rrk,
        }
    }
}

/// Structure of the residue algebra, computed once per component.
#[derive(Clone, Debug)]
pub struct MoritaData {
    pub factors: Vec<FactorData>,
}

pub type MoritaCache = Result<MoritaData>;

#[derive(Clone, Debug)]
pub enum FactorData {
    Exchange {
        z1: Vec<u64>,
        /// Degree of `z1 A` over its centre and the centre's degree over `F_p`.
        r: usize,
        f: usize,
    },
    Fixed(Box<FixedFactor>),
}

#[derive(Clone, Debug)]
pub struct FixedFactor {
    pub z: Vec<u64>,
    pub f: usize,
    pub r: usize,
    pub unitary: bool,
    /// Skew unit of `zA` used to pass from a symplectic to an orthogonal involution.
    pub u: Option<(Vec<u64>, Vec<u64>)>,
    /// Symmetric idempotent of rank one for the (possibly twisted) involution.
    pub e: Vec<u64>,
    pub field: Kf,
    /// `w` generating the centre of `zA` when `f == 2`.
    pub w: Vec<u64>,
    /// Basis of `zAe` over the centre.
    pub kbasis: Vec<Vec<u64>>,
    /// Smith data for coordinates of `eAe` in the basis `e, we`.
    coords: linalg::Smith<u64>,
}

/// `F_p` or `F_p(w)` with `w^2 = a` a non-square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Kf {
    pub p: u64,
    pub a: u64,
    pub f: usize,
}

pub type Ke = [u64; 2];

impl Kf {
    fn fp(&self) -> Zpk {
        Zpk::new(self.p, 1)
    }
    pub fn zero(&self) -> Ke {
        [0, 0]
    }
    pub fn is_zero(&self, x: &Ke) -> bool {
        x[0] == 0 && x[1] == 0
    }
    pub fn add(&self, x: &Ke, y: &Ke) -> Ke {
        let k = self.fp();
        [k.add(&x[0], &y[0]), k.add(&x[1], &y[1])]
    }
    pub fn sub(&self, x: &Ke, y: &Ke) -> Ke {
        let k = self.fp();
        [k.sub(&x[0], &y[0]), k.sub(&x[1], &y[1])]
    }
    pub fn mul(&self, x: &Ke, y: &Ke) -> Ke {
        let k = self.fp();
        let ax = k.mul(&self.a, &k.mul(&x[1], &y[1]));
        [k.add(&k.mul(&x[0], &y[0]), &ax), k.add(&k.mul(&x[0], &y[1]), &k.mul(&x[1], &y[0]))]
    }
    pub fn conj(&self, x: &Ke) -> Ke {
        [x[0], self.fp().neg(&x[1])]
    }
    pub fn norm(&self, x: &Ke) -> u64 {
        self.mul(x, &self.conj(x))[0]
    }
    pub fn inv(&self, x: &Ke) -> Option<Ke> {
        let n = self.fp().inv(&self.norm(x))?;
        let c = self.conj(x);
        Some(self.mul(&c, &[n, 0]))
    }
    pub fn is_square(&self, x: &Ke) -> bool {
        let k = self.fp();
        if self.f == 1 {
            k.is_square(&x[0])
        } else {
            k.is_square(&self.norm(x))
        }
    }
}

/// Rank of a matrix over `K`.
fn k_rank(k: &Kf, m: &mut [Vec<Ke>]) -> usize {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| !k.is_zero(&m[i][c])) else { continue };
        m.swap(rank, p);
        let inv = k.inv(&m[rank][c]).unwrap();
        for i in 0..rows {
            if i != rank && !k.is_zero(&m[i][c]) {
                let f = k.mul(&m[i][c], &inv);
                for j in 0..cols {
                    let t = k.mul(&f, &m[rank][j]);
                    m[i][j] = k.sub(&m[i][j], &t);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Symmetric Gaussian elimination; returns the nonzero diagonal entries.
fn k_diagonalize(k: &Kf, mut m: Vec<Vec<Ke>>) -> Vec<Ke> {
    let n = m.len();
    let mut pivots = Vec::new();
    let mut alive: Vec<usize> = (0..n).collect();
    while !alive.is_empty() {
        let diag = alive.iter().copied().find(|&i| !k.is_zero(&m[i][i]));
        let p = match diag {
            Some(p) => p,
            None => {
                let pair = alive.iter().flat_map(|&i| alive.iter().map(move |&j| (i, j))).find(|&(i, j)| {
                    i != j && !k.is_zero(&m[i][j])
                });
                let Some((i, j)) = pair else { break };
                // e_i <- e_i + e_j
                for t in 0..n {
                    m[i][t] = k.add(&m[i][t], &m[j][t]);
                }
                for t in 0..n {
                    m[t][i] = k.add(&m[t][i], &m[t][j]);
                }
                i
            }
        };
        let d = m[p][p];
        let dinv = k.inv(&d).unwrap();
        for &i in &alive {
            if i == p || k.is_zero(&m[i][p]) {
                continue;
            }
            let f = k.mul(&m[i][p], &dinv);
            for t in 0..n {
                let s = k.mul(&f, &m[p][t]);
                m[i][t] = k.sub(&m[i][t], &s);
            }
            for t in 0..n {
                let s = k.mul(&f, &m[t][p]);
                m[t][i] = k.sub(&m[t][i], &s);
            }
        }
        pivots.push(d);
        alive.retain(|&i| i != p);
    }
    pivots
}

/// Classification of one component of a form.
pub trait Classify: LocalRing {
    fn classify(alg: &Algebra<Self>, ci: usize, eps: &[Self::E], gram: &[Vec<Self::E>], n: usize)
        -> Result<Vec<FactorInv>>;
}

impl Classify for Zpk {
    fn classify(alg: &Algebra<Zpk>, ci: usize, eps: &[u64], gram: &[Vec<u64>], n: usize) -> Result<Vec<FactorInv>> {
        let l = &alg.comps[ci];
        let data = morita_data(l)?;
        let p = l.ring.p;
        let red = |v: &Vec<u64>| v.iter().map(|x| x % p).collect::<Vec<_>>();
        let g: Vec<Vec<u64>> = gram.iter().map(red).collect();
        let eps = red(&eps.to_vec());
        let res = residue_of(l);
        data.factors.iter().map(|fd| classify_factor(&res, fd, &eps, &g, n)).collect()
    }
}

fn residue_of(l: &LocalAlg<Zpk>) -> LocalAlg<Zpk> {
    if l.ring.k == 1 {
        l.clone()
    } else {
        l.residue()
    }
}

pub fn morita_data(l: &LocalAlg<Zpk>) -> Result<&MoritaData> {
    l.cache.get_or_init(|| compute_morita(&residue_of(l))).as_ref().map_err(Clone::clone)
}

fn span_dim(a: &LocalAlg<Zpk>, vs: &[Vec<u64>]) -> usize {
    linalg::span_rank(&a.ring, vs, a.dim)
}

/// `x` times the basis, i.e. a spanning set of `xA`, `Ax` or `xAy`.
fn corner(a: &LocalAlg<Zpk>, x: &[u64], y: &[u64]) -> Vec<Vec<u64>> {
    (0..a.dim).map(|j| a.mul3(x, &a.basis(j), y)).collect()
}

fn pow_in(a: &LocalAlg<Zpk>, one: &[u64], y: &[u64], mut m: u128) -> Vec<u64> {
    let mut acc = one.to_vec();
    let mut b = y.to_vec();
    while m > 0 {
        if m & 1 == 1 {
            acc = a.mul(&acc, &b);
        }
        b = a.mul(&b, &b);
        m >>= 1;
    }
    acc
}

/// Inverse of `x` inside `zA`, where `z` is a central idempotent.
fn inv_in(a: &LocalAlg<Zpk>, z: &[u64], x: &[u64]) -> Option<Vec<u64>> {
    let y = linalg::solve(&a.ring, &a.left_matrix(x), z)?;
    let y = a.mul(&y, z);
    (a.mul(x, &y) == z && a.mul(&y, x) == z).then_some(y)
}

fn random_in(a: &LocalAlg<Zpk>, rng: &mut ChaCha8Rng, z: &[u64]) -> Vec<u64> {
    let v: Vec<u64> = (0..a.dim).map(|_| rng.gen_range(0..a.ring.p)).collect();
    a.mul(z, &v)
}

fn compute_morita(a: &LocalAlg<Zpk>) -> Result<MoritaData> {
    let k = a.ring;
    let p = k.p;
    let center = linalg::kernel(&k, &commutators(a)).0;
    let c = center.len();
    if (p as f64).powi(c as i32) > 2e6 {
        return Err(Error::Unsupported(format!("center of dimension {c} too large to enumerate")));
    }
    // idempotents of the center
    let combos = crate::ring::cartesian(&vec![(0..p).collect::<Vec<u64>>(); c]);
    let mut idems = Vec::new();
    for co in combos {
        let mut v = a.zero();
        for (x, b) in co.iter().zip(&center) {
            v = a.add(&v, &a.scale(x, b));
        }
        if !a.is_zero(&v) && a.mul(&v, &v) == v {
            idems.push(v);
        }
    }
    let primitive: Vec<Vec<u64>> = idems
        .iter()
        .filter(|e| idems.iter().all(|g| {
            let ge = a.mul(g, e);
            a.is_zero(&ge) || ge == **e
        }))
        .cloned()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c7a_0000 ^ p);
    let mut factors = Vec::new();
    let mut seen: Vec<Vec<u64>> = Vec::new();
    for z in &primitive {
        if seen.contains(z) {
            continue;
        }
        let sz = a.invol(z);
        let zc: Vec<_> = center.iter().map(|x| a.mul(z, x)).collect();
        let f = span_dim(a, &zc);
        let dza = span_dim(a, &corner(a, z, &a.unit));
        let r = ((dza / f) as f64).sqrt().round() as usize;
        if r * r * f != dza {
            return Err(Error::InternalInconsistency("simple factor is not a matrix algebra".into()));
        }
        if sz != *z {
            seen.push(sz.clone());
            seen.push(z.clone());
            factors.push(FactorData::Exchange { z1: z.clone(), r, f });
            continue;
        }
        seen.push(z.clone());
        factors.push(FactorData::Fixed(Box::new(fixed_factor(a, z, &zc, f, r, &mut rng)?)));
    }
    Ok(MoritaData { factors })
}

fn commutators(a: &LocalAlg<Zpk>) -> Mat<u64> {
    let d = a.dim;
    let mut m = Mat { rows: d * d, cols: d, a: vec![0; d * d * d] };
    for j in 0..d {
        let x = a.basis(j);
        for i in 0..d {
            let b = a.basis(i);
            let c = a.sub(&a.mul(&x, &b), &a.mul(&b, &x));
            for t in 0..d {
                m.set(i * d + t, j, c[t]);
            }
        }
    }
    m
}

fn fixed_factor(
    a: &LocalAlg<Zpk>,
    z: &[u64],
    zc: &[Vec<u64>],
    f: usize,
    r: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FixedFactor> {
    let k = a.ring;
    let p = k.p;
    // generator of the centre of zA over F_p
    let mut w = z.to_vec();
    let mut wa = 0;
    let mut unitary = false;
    if f == 2 {
        let gens = independent(a, zc);
        let mut found = None;
        'outer: for x in 0..p {
            for y in 0..p {
                let v = a.add(&a.scale(&x, &gens[0]), &a.scale(&y, &gens[1]));
                if span_dim(a, &[v.clone(), z.to_vec()]) < 2 {
                    continue;
                }
                let v2 = a.mul(&v, &v);
                let Some(c) = (0..p).find(|c| a.scale(c, z) == v2) else { continue };
                let s = a.invol(&v);
                // if sigma moves the centre, no generator outside F_p is fixed
                if s == v || s == a.neg(&v) {
                    let moving = s != v;
                    found = Some((v, c, moving));
                    break 'outer;
                }
            }
        }
        let (v, c, moving) = found.ok_or_else(|| Error::InternalInconsistency("no centre generator".into()))?;
        w = v;
        wa = c;
        unitary = moving;
    }
    let field = Kf { p, a: wa, f };
    // a skew unit when the involution is symplectic
    let mut u = None;
    if !unitary {
        let sym: Vec<_> = (0..a.dim)
            .map(|j| {
                let b = a.mul(z, &a.basis(j));
                a.add(&b, &a.invol(&b))
            })
            .collect();
        let sdim = span_dim(a, &sym);
        if sdim == f * r * (r + 1) / 2 {
        } else if sdim == f * r * (r - 1) / 2 {
            let mut found = None;
            for _ in 0..2000 {
                let x = random_in(a, rng, z);
                let s = a.sub(&x, &a.invol(&x));
                if let Some(si) = inv_in(a, z, &s) {
                    found = Some((s, si));
                    break;
                }
            }
            u = Some(found.ok_or_else(|| Error::Inconclusive("no skew unit found".into()))?);
        } else {
            return Err(Error::InternalInconsistency(format!("Sym dimension {sdim} fits no type")));
        }
    }
    let sig = |x: &[u64]| -> Vec<u64> {
        match &u {
            Some((uu, ui)) => a.mul3(uu, &a.invol(x), ui),
            None => a.invol(x),
        }
    };
    // a symmetric idempotent of rank one
    let q = (p as u128).pow(f as u32);
    let mut mexp: u128 = 1;
    for i in 0..r {
        let t = q.checked_pow(r as u32).and_then(|x| x.checked_sub(q.pow(i as u32)));
        mexp = t
            .and_then(|t| mexp.checked_mul(t))
            .ok_or_else(|| Error::Unsupported("simple factor too large".into()))?;
    }
    mexp = mexp.max(r as u128);
    let scalars: Vec<Vec<u64>> = (0..p)
        .flat_map(|c0| {
            let w = &w;
            (0..if f == 2 && !unitary { p } else { 1 }).map(move |c1| a.add(&a.scale(&c0, z), &a.scale(&c1, w)))
        })
        .collect();
    let mut e = z.to_vec();
    let mut tries = 0;
    'search: while span_dim(a, &corner(a, &e, &e)) != f {
        tries += 1;
        if tries > 5000 {
            return Err(Error::Inconclusive("no symmetric rank-one idempotent found".into()));
        }
        let x = a.mul3(&e, &random_in(a, rng, z), &e);
        let s = a.add(&x, &sig(&x));
        for c in &scalars {
            let y = a.sub(&s, &a.mul(c, &e));
            let pm = pow_in(a, &e, &y, mexp);
            let e2 = a.sub(&e, &pm);
            if !a.is_zero(&e2) && e2 != e {
                e = e2;
                continue 'search;
            }
        }
    }
    if sig(&e) != e || a.mul(&e, &e) != e {
        return Err(Error::InternalInconsistency("idempotent search".into()));
    }
    // basis of zAe over K
    let mut kbasis = Vec::new();
    let mut span: Vec<Vec<u64>> = Vec::new();
    for v in corner(a, z, &e) {
        if kbasis.len() == r {
            break;
        }
        let mut test = span.clone();
        test.push(v.clone());
        if span_dim(a, &test) > span.len() {
            span.push(v.clone());
            if f == 2 {
                span.push(a.mul(&w, &v));
            }
            kbasis.push(v);
        }
    }
    if kbasis.len() != r {
        return Err(Error::InternalInconsistency("module basis".into()));
    }
    let we = a.mul(&w, &e);
    let cols = if f == 2 { vec![e.clone(), we] } else { vec![e.clone()] };
    let coords = linalg::smith(&k, &Mat::from_cols(a.dim, &cols));
    Ok(FixedFactor { z: z.to_vec(), f, r, unitary, u, e, field, w, kbasis, coords })
}

fn independent(a: &LocalAlg<Zpk>, vs: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let mut out: Vec<Vec<u64>> = Vec::new();
    for v in vs {
        let mut t = out.clone();
        t.push(v.clone());
        if span_dim(a, &t) > out.len() {
            out.push(v.clone());
        }
    }
    out
}

impl FixedFactor {
    fn sigma(&self, a: &LocalAlg<Zpk>, x: &[u64]) -> Vec<u64> {
        match &self.u {
            Some((u, ui)) => a.mul3(u, &a.invol(x), ui),
            None => a.invol(x),
        }
    }

    fn kcoords(&self, a: &LocalAlg<Zpk>, x: &[u64]) -> Result<Ke> {
        let n = if self.f == 2 { 2 } else { 1 };
        let c = linalg::solve_with(&a.ring, &self.coords, a.dim, n, x)
            .ok_or_else(|| Error::InternalInconsistency("value outside eAe".into()))?;
        Ok([c[0], if n == 2 { c[1] } else { 0 }])
    }

    /// Transferred Gram matrix over `K` and the sign of `eps` after twisting.
    pub fn transfer(
        &self,
        a: &LocalAlg<Zpk>,
        eps: &[u64],
        g: &[Vec<u64>],
        n: usize,
    ) -> Result<(Vec<Vec<Ke>>, Option<i64>)> {
        let r = self.r;
        let gz: Vec<Vec<u64>> = g
            .iter()
            .map(|x| match &self.u {
                Some((u, _)) => a.mul(u, x),
                None => a.mul(&self.z, x),
            })
            .collect();
        let sv: Vec<_> = self.kbasis.iter().map(|v| self.sigma(a, v)).collect();
        let mut m = vec![vec![[0u64; 2]; n * r]; n * r];
        for j in 0..n {
            for i in 0..r {
                for l in 0..n {
                    let left = a.mul(&sv[i], &gz[j * n + l]);
                    for i2 in 0..r {
                        let val = a.mul(&left, &self.kbasis[i2]);
                        m[j * r + i][l * r + i2] = self.kcoords(a, &val)?;
                    }
                }
            }
        }
        let sign = if self.unitary {
            None
        } else {
            let ez = a.mul(eps, &self.z);
            let s = if ez == self.z {
                1
            } else if ez == a.neg(&self.z) {
                -1
            } else {
                return Err(Error::InvalidEpsilon);
            };
            Some(if self.u.is_some() { -s } else { s })
        };
        Ok((m, sign))
    }
}

fn classify_factor(a: &LocalAlg<Zpk>, fd: &FactorData, eps: &[u64], g: &[Vec<u64>], n: usize) -> Result<FactorInv> {
    match fd {
        FactorData::Exchange { z1, r, f } => {
            let d = a.dim;
            let mut cols = Vec::new();
            for l in 0..n {
                for t in 0..d {
                    let x = a.mul(&a.basis(t), z1);
                    let mut col = Vec::with_capacity(n * d);
                    for j in 0..n {
                        col.extend(a.mul(&g[j * n + l], &x));
                    }
                    cols.push(col);
                }
            }
            let dim = linalg::span_rank(&a.ring, &cols, n * d);
            Ok(FactorInv::Exchange { dim, rrk: dim / (r * f) })
        }
        FactorData::Fixed(ff) => {
            let (mut m, sign) = ff.transfer(a, eps, g, n)?;
            let k = &ff.field;
            match sign {
                None => Ok(FactorInv::Hermitian { rank: k_rank(k, &mut m) }),
                Some(-1) => Ok(FactorInv::Alternating { rank: k_rank(k, &mut m) }),
                Some(_) => {
                    let piv = k_diagonalize(k, m);
                    let nn = piv.len();
                    let mut d = [1u64, 0];
                    for x in &piv {
                        d = k.mul(&d, x);
                    }
                    if (nn * (nn.saturating_sub(1)) / 2) % 2 == 1 {
                        d = k.sub(&k.zero(), &d);
                    }
                    Ok(FactorInv::Quadratic { rank: nn, disc_square: k.is_square(&d) })
                }
            }
        }
    }
}

/// Number of simple factors and the kind of each, for reporting.
pub fn factor_summary(l: &LocalAlg<Zpk>) -> Result<Vec<String>> {
    Ok(morita_data(l)?
        .factors
        .iter()
        .map(|f| match f {
            FactorData::Exchange { r, f, .. } => format!("exchange(r={r},f={f})"),
            FactorData::Fixed(x) => {
                let t = if x.unitary { "unitary" } else if x.u.is_some() { "symplectic" } else { "orthogonal" };
                format!("{t}(r={},f={})", x.r, x.f)
            }
        })
        .collect())
}

// ---- real case ----

/// Signature and rank of a symmetric rational matrix.
pub fn real_signature(m: &Mat<BigRational>) -> (usize, i64) {
    let n = m.rows;
    let mut a: Vec<Vec<BigRational>> = (0..n).map(|i| m.row(i)).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let (mut rank, mut sig) = (0usize, 0i64);
    while !alive.is_empty() {
        let p = match alive.iter().copied().find(|&i| !a[i][i].is_zero()) {
            Some(p) => p,
            None => {
                let pair = alive
                    .iter()
                    .flat_map(|&i| alive.iter().map(move |&j| (i, j)))
                    .find(|&(i, j)| i != j && !a[i][j].is_zero());
                let Some((i, j)) = pair else { break };
                for t in 0..n {
                    let x = a[j][t].clone();
                    a[i][t] += x;
                }
                for t in 0..n {
                    let x = a[t][j].clone();
                    a[t][i] += x;
                }
                i
            }
        };
        let d = a[p][p].clone();
        for &i in &alive {
            if i == p || a[i][p].is_zero() {
                continue;
            }
            let f = &a[i][p] / &d;
            for t in 0..n {
                let s = &f * &a[p][t];
                a[i][t] -= s;
            }
            for t in 0..n {
                let s = &f * &a[t][p];
                a[t][i] -= s;
            }
        }
        rank += 1;
        sig += if d.is_positive() { 1 } else { -1 };
        alive.retain(|&i| i != p);
    }
    (rank, sig)
}

fn trace_supported(k: &Kind<RealQ>) -> bool {
    match k {
        Kind::Scalar | Kind::Etale { .. } | Kind::Quaternion { .. } | Kind::Exchange => true,
        Kind::Tensor(x, y) => matches!(x.as_ref(), Kind::Scalar) && trace_supported(y)
            || matches!(y.as_ref(), Kind::Scalar) && trace_supported(x),
        _ => false,
    }
}

/// The trace form `(x, y) -> tr(L_{h(x, y)})` as a symmetric real matrix.
pub fn trace_form(l: &LocalAlg<RealQ>, g: &[Vec<BigRational>], n: usize) -> Mat<BigRational> {
    let d = l.dim;
    let r = RealQ;
    let tr = |x: &[BigRational]| {
        let m = l.left_matrix(x);
        let mut s = BigRational::zero();
        for i in 0..d {
            s += m.at(i, i);
        }
        s
    };
    let sb: Vec<_> = (0..d).map(|t| l.invol(&l.basis(t))).collect();
    let mut out = Mat { rows: n * d, cols: n * d, a: vec![r.zero(); n * n * d * d] };
    for j in 0..n {
        for t in 0..d {
            for l2 in 0..n {
                let left = l.mul(&sb[t], &g[j * n + l2]);
                for t2 in 0..d {
                    let v = tr(&l.mul(&left, &l.basis(t2)));
                    out.set(j * d + t, l2 * d + t2, v);
                }
            }
        }
    }
    out
}

impl Classify for RealQ {
    fn classify(
        alg: &Algebra<RealQ>,
        ci: usize,
        eps: &[BigRational],
        gram: &[Vec<BigRational>],
        n: usize,
    ) -> Result<Vec<FactorInv>> {
        let l = &alg.comps[ci];
        if !trace_supported(&alg.kind) {
            return Err(Error::Unsupported(format!("real classification for {}", alg.kind_name())));
        }
        let sign = if *eps == l.unit {
            1
        } else if *eps == l.neg(&l.unit) {
            -1
        } else {
            return Err(Error::Unsupported("real classification needs eps = +-1".into()));
        };
        let lin_rank = |g: &[Vec<BigRational>]| {
            let d = l.dim;
            let m = Mat::from_fn(n * d, n * d, |row, col| {
                let (j, t) = (row / d, row % d);
                let (c, s) = (col / d, col % d);
                l.mul(&g[j * n + c], &l.basis(s))[t].clone()
            });
            linalg::residue_rank(&RealQ, &m)
        };
        let quat = matches!(alg.kind, Kind::Quaternion { .. });
        let scalar = alg.dim == 1;
        let exchange = matches!(alg.kind, Kind::Exchange);
        if exchange {
            return Ok(vec![FactorInv::Null { rank: lin_rank(gram) }]);
        }
        if sign == 1 {
            let (rank, signature) = real_signature(&trace_form(l, gram, n));
            return Ok(vec![FactorInv::Signed { rank, signature }]);
        }
        if scalar {
            return Ok(vec![FactorInv::Null { rank: lin_rank(gram) }]);
        }
        if quat {
            return Err(Error::Unsupported("skew-hermitian forms over real quaternions".into()));
        }
        let lam = alg.lambda.as_ref().ok_or_else(|| Error::Unsupported("no lambda".into()))?;
        let g2: Vec<_> = gram.iter().map(|x| l.mul(&lam.c[ci], x)).collect();
        let (rank, signature) = real_signature(&trace_form(l, &g2, n));
        Ok(vec![FactorInv::Signed { rank, signature }])
    }
}
