//! Finite free algebras with involution, given by structure constants.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ring::{BaseRing, LocalRing, RealQ, RingElement, Zpk};

/// One CRT component of an algebra.
pub struct LocalAlg<R: LocalRing> {
    pub ring: R,
    pub dim: usize,
    /// `table[i * dim + j]` lists the nonzero coordinates of `e_i e_j`.
    pub table: Vec<Vec<(usize, R::E)>>,
    pub unit: Vec<R::E>,
    /// `sigma[i]` is the image of `e_i`.
    pub sigma: Vec<Vec<R::E>>,
    pub center: Vec<Vec<R::E>>,
    pub(crate) cache: OnceLock<R::Cache>,
}

impl<R: LocalRing> fmt::Debug for LocalAlg<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalAlg").field("ring", &self.ring).field("dim", &self.dim).finish()
    }
}

impl<R: LocalRing> Clone for LocalAlg<R> {
    fn clone(&self) -> Self {
        LocalAlg {
            ring: self.ring.clone(),
            dim: self.dim,
            table: self.table.clone(),
            unit: self.unit.clone(),
            sigma: self.sigma.clone(),
            center: self.center.clone(),
            cache: OnceLock::new(),
        }
    }
}

impl<R: LocalRing> PartialEq for LocalAlg<R> {
    fn eq(&self, o: &Self) -> bool {
        self.ring == o.ring && self.table == o.table && self.unit == o.unit && self.sigma == o.sigma
    }
}

impl<R: LocalRing> LocalAlg<R> {
    /// Builds from a dense table `mul[(i*dim + j)*dim + k]` and computes the center.
    pub fn from_dense(
        ring: R,
        dim: usize,
        mul: &[R::E],
        unit: Vec<R::E>,
        sigma: Vec<Vec<R::E>>,
    ) -> Result<Self> {
        let table = (0..dim * dim)
            .map(|ij| {
                (0..dim)
                    .filter(|&k| !ring.is_zero(&mul[ij * dim + k]))
                    .map(|k| (k, mul[ij * dim + k].clone()))
                    .collect()
            })
            .collect();
        let mut a = LocalAlg { ring, dim, table, unit, sigma, center: Vec::new(), cache: OnceLock::new() };
        a.center = a.compute_center()?;
        Ok(a)
    }

    pub fn zero(&self) -> Vec<R::E> {
        vec![self.ring.zero(); self.dim]
    }

    pub fn basis(&self, i: usize) -> Vec<R::E> {
        let mut v = self.zero();
        v[i] = self.ring.one();
        v
    }

    pub fn scalar(&self, c: &R::E) -> Vec<R::E> {
        self.unit.iter().map(|u| self.ring.mul(u, c)).collect()
    }

    pub fn add(&self, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
        a.iter().zip(b).map(|(x, y)| self.ring.add(x, y)).collect()
    }

    pub fn sub(&self, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
        a.iter().zip(b).map(|(x, y)| self.ring.sub(x, y)).collect()
    }

    pub fn neg(&self, a: &[R::E]) -> Vec<R::E> {
        a.iter().map(|x| self.ring.neg(x)).collect()
    }

    pub fn scale(&self, c: &R::E, a: &[R::E]) -> Vec<R::E> {
        a.iter().map(|x| self.ring.mul(c, x)).collect()
    }

    pub fn is_zero(&self, a: &[R::E]) -> bool {
        a.iter().all(|x| self.ring.is_zero(x))
    }

    pub fn mul(&self, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
        let r = &self.ring;
        let mut out = self.zero();
        for (i, x) in a.iter().enumerate() {
            if r.is_zero(x) {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if r.is_zero(y) {
                    continue;
                }
                let xy = r.mul(x, y);
                for (k, c) in &self.table[i * self.dim + j] {
                    out[*k] = r.add(&out[*k], &r.mul(&xy, c));
                }
            }
        }
        out
    }

    pub fn mul3(&self, a: &[R::E], b: &[R::E], c: &[R::E]) -> Vec<R::E> {
        self.mul(&self.mul(a, b), c)
    }

    pub fn invol(&self, a: &[R::E]) -> Vec<R::E> {
        let r = &self.ring;
        let mut out = self.zero();
        for (i, x) in a.iter().enumerate() {
            if r.is_zero(x) {
                continue;
            }
            for (k, s) in self.sigma[i].iter().enumerate() {
                if !r.is_zero(s) {
                    out[k] = r.add(&out[k], &r.mul(x, s));
                }
            }
        }
        out
    }

    /// Matrix of `x -> a x`.
    pub fn left_matrix(&self, a: &[R::E]) -> Mat<R::E> {
        let cols: Vec<_> = (0..self.dim).map(|j| self.mul(a, &self.basis(j))).collect();
        Mat::from_cols(self.dim, &cols)
    }

    /// Matrix of `x -> x a`.
    pub fn right_matrix(&self, a: &[R::E]) -> Mat<R::E> {
        let cols: Vec<_> = (0..self.dim).map(|j| self.mul(&self.basis(j), a)).collect();
        Mat::from_cols(self.dim, &cols)
    }

    pub fn is_unit(&self, a: &[R::E]) -> bool {
        linalg::residue_rank(&self.ring, &self.left_matrix(a)) == self.dim
    }

    pub fn inv(&self, a: &[R::E]) -> Option<Vec<R::E>> {
        let x = linalg::solve(&self.ring, &self.left_matrix(a), &self.unit)?;
        if self.mul(&x, a) == self.unit {
            Some(x)
        } else {
            None
        }
    }

    pub fn is_central(&self, a: &[R::E]) -> bool {
        (0..self.dim).all(|i| {
            let b = self.basis(i);
            self.mul(a, &b) == self.mul(&b, a)
        })
    }

    fn commutator_matrix(&self) -> Mat<R::E> {
        // rows: for each basis e_i, the coordinates of x e_i - e_i x
        let d = self.dim;
        let mut m = Mat { rows: d * d, cols: d, a: vec![self.ring.zero(); d * d * d] };
        for j in 0..d {
            let x = self.basis(j);
            for i in 0..d {
                let b = self.basis(i);
                let c = self.sub(&self.mul(&x, &b), &self.mul(&b, &x));
                for k in 0..d {
                    m.set(i * d + k, j, c[k].clone());
                }
            }
        }
        m
    }

    fn compute_center(&self) -> Result<Vec<Vec<R::E>>> {
        let (basis, free) = linalg::kernel(&self.ring, &self.commutator_matrix());
        if !free {
            return Err(Error::InvalidAlgebra("center is not free".into()));
        }
        Ok(basis)
    }

    /// Basis of the commutant of `x`.
    pub fn centralizer(&self, x: &[R::E]) -> Result<Vec<Vec<R::E>>> {
        let m = linalg::mat_sub(&self.ring, &self.left_matrix(x), &self.right_matrix(x));
        let (basis, free) = linalg::kernel(&self.ring, &m);
        if !free {
            return Err(Error::NonFreeCentralizer);
        }
        Ok(basis)
    }

    /// Basis of `{ s : s = eps * sigma(s) }`, a direct summand since 2 is a unit.
    pub fn sym_basis(&self, eps: &[R::E]) -> Vec<Vec<R::E>> {
        let cols: Vec<_> = (0..self.dim)
            .map(|j| {
                let b = self.basis(j);
                self.sub(&b, &self.mul(eps, &self.invol(&b)))
            })
            .collect();
        linalg::kernel(&self.ring, &Mat::from_cols(self.dim, &cols)).0
    }

    pub fn validate(&self) -> Result<()> {
        let (r, d) = (&self.ring, self.dim);
        let bad = |m: &str| Err(Error::InvalidAlgebra(m.to_string()));
        for i in 0..d {
            let b = self.basis(i);
            if self.mul(&self.unit, &b) != b || self.mul(&b, &self.unit) != b {
                return bad("unit");
            }
            if self.invol(&self.invol(&b)) != b {
                return bad("involution is not of order 2");
            }
        }
        if self.invol(&self.unit) != self.unit {
            return bad("involution does not fix 1");
        }
        for i in 0..d {
            for j in 0..d {
                let ij = self.mul(&self.basis(i), &self.basis(j));
                let lhs = self.invol(&ij);
                let rhs = self.mul(&self.sigma[j], &self.sigma[i]);
                if lhs != rhs {
                    return bad("involution is not an anti-automorphism");
                }
                for k in 0..d {
                    let a = self.mul(&ij, &self.basis(k));
                    let b = self.mul(&self.basis(i), &self.mul(&self.basis(j), &self.basis(k)));
                    if a != b {
                        return bad("multiplication is not associative");
                    }
                }
            }
        }
        for c in &self.center {
            if !self.is_central(c) {
                return bad("center basis does not centralize");
            }
        }
        let _ = r;
        Ok(())
    }

    /// Rank at the residue field of the sigma-fixed part of the center.
    pub fn fixed_center_rank(&self) -> usize {
        let k = self.ring.residue_field();
        let cols: Vec<_> = self.center.iter().map(|c| self.sub(c, &self.invol(c))).collect();
        if cols.is_empty() {
            return 0;
        }
        let m = Mat::from_cols(self.dim, &cols);
        let red = Mat { rows: m.rows, cols: m.cols, a: m.a.iter().map(|x| self.ring.reduce(x)).collect() };
        self.center.len() - linalg::residue_rank(&k, &red)
    }

    /// Reduction modulo the maximal ideal.
    pub fn residue(&self) -> LocalAlg<R> {
        let r = &self.ring;
        let red = |v: &Vec<R::E>| v.iter().map(|x| r.reduce(x)).collect::<Vec<_>>();
        let k = r.residue_field();
        let table = self
            .table
            .iter()
            .map(|l| l.iter().map(|(i, c)| (*i, r.reduce(c))).filter(|(_, c)| !k.is_zero(c)).collect())
            .collect();
        LocalAlg {
            ring: k,
            dim: self.dim,
            table,
            unit: red(&self.unit),
            sigma: self.sigma.iter().map(red).collect(),
            center: self.center.iter().map(red).collect(),
            cache: OnceLock::new(),
        }
    }

    /// Same multiplication, new involution.
    pub fn with_sigma(&self, sigma: Vec<Vec<R::E>>) -> Result<LocalAlg<R>> {
        let a = LocalAlg {
            ring: self.ring.clone(),
            dim: self.dim,
            table: self.table.clone(),
            unit: self.unit.clone(),
            sigma,
            center: self.center.clone(),
            cache: OnceLock::new(),
        };
        a.validate()?;
        Ok(a)
    }

    /// The subalgebra spanned by a free basis, with involution `inv` restricted to it.
    pub fn subalgebra(
        &self,
        basis: &[Vec<R::E>],
        inv: impl Fn(&[R::E]) -> Vec<R::E>,
    ) -> Result<LocalAlg<R>> {
        let r = &self.ring;
        let n = basis.len();
        let bm = Mat::from_cols(self.dim, basis);
        let sm = linalg::smith(r, &bm);
        let coords = |v: &[R::E]| -> Result<Vec<R::E>> {
            linalg::solve_with(r, &sm, self.dim, n, v)
                .ok_or_else(|| Error::InvalidAlgebra("span is not closed".into()))
        };
        let mut mul = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                mul.extend(coords(&self.mul(&basis[i], &basis[j]))?);
            }
        }
        let unit = coords(&self.unit)?;
        let sigma = basis.iter().map(|b| coords(&inv(b))).collect::<Result<Vec<_>>>()?;
        let a = LocalAlg::from_dense(r.clone(), n, &mul, unit, sigma)?;
        a.validate()?;
        Ok(a)
    }
}

/// Construction provenance, used to recognize shapes.
#[derive(Clone, Debug, PartialEq)]
pub enum Kind<R: LocalRing> {
    Scalar,
    Etale { alpha: RingElement<R> },
    Quaternion { alpha: RingElement<R>, beta: RingElement<R> },
    Matrix { n: usize, involution: String },
    Exchange,
    Tensor(Box<Kind<R>>, Box<Kind<R>>),
    Sub(String),
    Twisted(Box<Kind<R>>),
}

/// How reduced norm and trace are computed.
#[derive(Clone, Debug, PartialEq)]
pub enum NrdModel<R: LocalRing> {
    /// Determinant of left multiplication (degree 1).
    Regular,
    /// The basis is the matrix units of `M_n`.
    Matrix(usize),
    /// `A` is free over the commutative subring spanned by `t`, with basis `f`.
    Subring { t: Vec<AlgElement<R>>, f: Vec<AlgElement<R>> },
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlgElement<R: LocalRing> {
    /// Coordinates per CRT component.
    pub c: Vec<Vec<R::E>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InvType {
    Orthogonal,
    Symplectic,
    Unitary,
}

#[derive(Debug)]
pub struct Algebra<R: LocalRing> {
    pub base: BaseRing<R>,
    pub dim: usize,
    pub deg: usize,
    pub comps: Vec<LocalAlg<R>>,
    pub lambda: Option<AlgElement<R>>,
    pub mu: Option<AlgElement<R>>,
    pub nrd: NrdModel<R>,
    pub kind: Kind<R>,
}

impl<R: LocalRing> PartialEq for Algebra<R> {
    fn eq(&self, o: &Self) -> bool {
        self.base == o.base && self.comps == o.comps
    }
}

pub type Alg<R> = Arc<Algebra<R>>;

fn dense<R: LocalRing>(r: &R, dim: usize, entries: &[(usize, usize, usize, i64)]) -> Vec<R::E> {
    let mut m = vec![r.zero(); dim * dim * dim];
    for &(i, j, k, c) in entries {
        m[(i * dim + j) * dim + k] = r.int(c);
    }
    m
}

fn diag_sigma<R: LocalRing>(r: &R, signs: &[i64]) -> Vec<Vec<R::E>> {
    let d = signs.len();
    (0..d)
        .map(|i| (0..d).map(|k| if i == k { r.int(signs[i]) } else { r.zero() }).collect())
        .collect()
}

impl<R: LocalRing> Algebra<R> {
    fn assemble(
        base: &BaseRing<R>,
        deg: usize,
        comps: Vec<LocalAlg<R>>,
        kind: Kind<R>,
        nrd: NrdModel<R>,
    ) -> Result<Alg<R>> {
        for c in &comps {
            c.validate()?;
        }
        let dim = comps[0].dim;
        Ok(Arc::new(Algebra { base: base.clone(), dim, deg, comps, lambda: None, mu: None, nrd, kind }))
    }

    fn check_unit(base: &BaseRing<R>, a: &RingElement<R>) -> Result<()> {
        if !base.is_unit(a)? {
            return Err(Error::NotAUnit(format!("{:?}", a.c)));
        }
        Ok(())
    }

    /// `(R, id)`.
    pub fn scalar(base: &BaseRing<R>) -> Result<Alg<R>> {
        let comps = base
            .comps
            .iter()
            .map(|r| LocalAlg::from_dense(r.clone(), 1, &[r.one()], vec![r.one()], vec![vec![r.one()]]))
            .collect::<Result<_>>()?;
        Self::assemble(base, 1, comps, Kind::Scalar, NrdModel::Regular)
    }

    /// `R[l | l^2 = alpha]` with `l -> -l`.
    pub fn quadratic_etale(base: &BaseRing<R>, alpha: &RingElement<R>) -> Result<Alg<R>> {
        Self::check_unit(base, alpha)?;
        let comps = base
            .comps
            .iter()
            .zip(&alpha.c)
            .map(|(r, a)| {
                let mut m = dense(r, 2, &[(0, 0, 0, 1), (0, 1, 1, 1), (1, 0, 1, 1)]);
                m[(2 + 1) * 2] = a.clone();
                LocalAlg::from_dense(r.clone(), 2, &m, vec![r.one(), r.zero()], diag_sigma(r, &[1, -1]))
            })
            .collect::<Result<_>>()?;
        let mut a = Self::assemble(base, 1, comps, Kind::Etale { alpha: alpha.clone() }, NrdModel::Regular)?;
        Arc::get_mut(&mut a).unwrap().lambda = Some(AlgElement::basis(base, 2, 1));
        Ok(a)
    }

    /// Basis `{1, l, m, ml}` with `l^2 = alpha`, `m^2 = beta`, `lm = -ml`, conjugation.
    pub fn quaternion(base: &BaseRing<R>, alpha: &RingElement<R>, beta: &RingElement<R>) -> Result<Alg<R>> {
        Self::check_unit(base, alpha)?;
        Self::check_unit(base, beta)?;
        let comps = base
            .comps
            .iter()
            .zip(alpha.c.iter().zip(&beta.c))
            .map(|(r, (a, b))| {
                let ab = r.mul(a, b);
                let mut m = vec![r.zero(); 64];
                let mut put = |i: usize, j: usize, k: usize, c: R::E| m[(i * 4 + j) * 4 + k] = c;
                for i in 0..4 {
                    put(0, i, i, r.one());
                    put(i, 0, i, r.one());
                }
                put(1, 1, 0, a.clone());
                put(2, 2, 0, b.clone());
                put(3, 3, 0, r.neg(&ab));
                put(1, 2, 3, r.int(-1));
                put(2, 1, 3, r.one());
                put(1, 3, 2, r.neg(a));
                put(3, 1, 2, a.clone());
                put(2, 3, 1, b.clone());
                put(3, 2, 1, r.neg(b));
                let unit = vec![r.one(), r.zero(), r.zero(), r.zero()];
                LocalAlg::from_dense(r.clone(), 4, &m, unit, diag_sigma(r, &[1, -1, -1, -1]))
            })
            .collect::<Result<_>>()?;
        let t = vec![AlgElement::basis(base, 4, 0), AlgElement::basis(base, 4, 1)];
        let f = vec![AlgElement::basis(base, 4, 0), AlgElement::basis(base, 4, 2)];
        let kind = Kind::Quaternion { alpha: alpha.clone(), beta: beta.clone() };
        let mut q = Self::assemble(base, 2, comps, kind, NrdModel::Subring { t, f })?;
        let qm = Arc::get_mut(&mut q).unwrap();
        qm.lambda = Some(AlgElement::basis(base, 4, 1));
        qm.mu = Some(AlgElement::basis(base, 4, 2));
        Ok(q)
    }

    /// `M_n(R)` with transpose, the symplectic involution, or the adjoint of a
    /// diagonal form `diag(gamma)` (a list of length `n`, or `n - 1` with a leading 1 implied).
    pub fn matrix(base: &BaseRing<R>, n: usize, kind: &MatrixInvolution<R>) -> Result<Alg<R>> {
        if n == 0 {
            return Err(Error::InvalidArity("n must be positive".into()));
        }
        let d = n * n;
        let gammas: Option<Vec<RingElement<R>>> = match kind {
            MatrixInvolution::Symplectic if n % 2 == 1 => {
                return Err(Error::InvalidArity(format!("symplectic involution needs even n, got {n}")))
            }
            MatrixInvolution::DiagAdjoint(g) => {
                let mut g = g.clone();
                if g.len() + 1 == n {
                    g.insert(0, base.one());
                }
                if g.len() != n {
                    return Err(Error::InvalidArity(format!("need {n} diagonal entries")));
                }
                for x in &g {
                    Self::check_unit(base, x)?;
                }
                Some(g)
            }
            _ => None,
        };
        let comps = base
            .comps
            .iter()
            .enumerate()
            .map(|(ci, r)| {
                let mut m = vec![r.zero(); d * d * d];
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            m[((i * n + j) * d + (j * n + l)) * d + i * n + l] = r.one();
                        }
                    }
                }
                let mut unit = vec![r.zero(); d];
                for i in 0..n {
                    unit[i * n + i] = r.one();
                }
                let sigma = (0..d)
                    .map(|ij| {
                        let (i, j) = (ij / n, ij % n);
                        let mut v = vec![r.zero(); d];
                        match kind {
                            MatrixInvolution::Transpose => v[j * n + i] = r.one(),
                            MatrixInvolution::Symplectic => {
                                // J E_ji J^{-1} with J = [[0, I], [-I, 0]]
                                let h = n / 2;
                                let (jj, sj) = if j < h { (j + h, -1) } else { (j - h, 1) };
                                let (ii, si) = if i < h { (i + h, -1) } else { (i - h, 1) };
                                v[jj * n + ii] = r.int(sj * si);
                            }
                            MatrixInvolution::DiagAdjoint(_) => {
                                let g = gammas.as_ref().unwrap();
                                let gi = &g[i].c[ci];
                                let gj = r.inv(&g[j].c[ci]).unwrap();
                                v[j * n + i] = r.mul(gi, &gj);
                            }
                        }
                        v
                    })
                    .collect();
                LocalAlg::from_dense(r.clone(), d, &m, unit, sigma)
            })
            .collect::<Result<_>>()?;
        let name = match kind {
            MatrixInvolution::Transpose => "transpose",
            MatrixInvolution::Symplectic => "symplectic",
            MatrixInvolution::DiagAdjoint(_) => "diag_adjoint",
        };
        Self::assemble(
            base,
            n,
            comps,
            Kind::Matrix { n, involution: name.to_string() },
            NrdModel::Matrix(n),
        )
    }

    /// `R x R` with the switch involution.
    pub fn exchange(base: &BaseRing<R>) -> Result<Alg<R>> {
        let comps = base
            .comps
            .iter()
            .map(|r| {
                let m = dense(r, 2, &[(0, 0, 0, 1), (1, 1, 1, 1)]);
                let sigma = vec![vec![r.zero(), r.one()], vec![r.one(), r.zero()]];
                LocalAlg::from_dense(r.clone(), 2, &m, vec![r.one(), r.one()], sigma)
            })
            .collect::<Result<_>>()?;
        Self::assemble(base, 1, comps, Kind::Exchange, NrdModel::Regular)
    }

    /// `A0 (x) A1` with `sigma0 (x) sigma1`; designated elements come from `A0`.
    pub fn tensor(a0: &Alg<R>, a1: &Alg<R>) -> Result<Alg<R>> {
        if a0.base != a1.base {
            return Err(Error::RingMismatch);
        }
        let (d0, d1) = (a0.dim, a1.dim);
        let d = d0 * d1;
        let comps = a0
            .comps
            .iter()
            .zip(&a1.comps)
            .map(|(x, y)| {
                let r = &x.ring;
                let mut m = vec![r.zero(); d * d * d];
                for i in 0..d0 {
                    for k in 0..d0 {
                        for (p, c) in &x.table[i * d0 + k] {
                            for j in 0..d1 {
                                for l in 0..d1 {
                                    for (q, c2) in &y.table[j * d1 + l] {
                                        let idx = ((i * d1 + j) * d + (k * d1 + l)) * d + p * d1 + q;
                                        m[idx] = r.add(&m[idx], &r.mul(c, c2));
                                    }
                                }
                            }
                        }
                    }
                }
                let unit = kron(r, &x.unit, &y.unit);
                let sigma = (0..d).map(|ij| kron(r, &x.sigma[ij / d1], &y.sigma[ij % d1])).collect();
                LocalAlg::from_dense(r.clone(), d, &m, unit, sigma)
            })
            .collect::<Result<Vec<_>>>()?;
        let base = &a0.base;
        let lift0 = |e: &AlgElement<R>| AlgElement {
            c: e.c.iter().zip(&a1.comps).map(|(v, y)| kron(&y.ring, v, &y.unit)).collect(),
        };
        let lift1 = |e: &AlgElement<R>| AlgElement {
            c: e.c.iter().zip(&a0.comps).map(|(v, x)| kron(&x.ring, &x.unit, v)).collect(),
        };
        let nrd = match (&a0.nrd, &a1.nrd) {
            (_, _) if d1 == 1 => map_nrd(&a0.nrd, &lift0),
            (_, _) if d0 == 1 => map_nrd(&a1.nrd, &lift1),
            (NrdModel::Subring { t, f }, _) if a1.deg == 1 && a1.comps[0].center.len() == d1 => {
                let mut tt = Vec::new();
                for x in t {
                    for j in 0..d1 {
                        let y = AlgElement::basis(base, d1, j);
                        tt.push(AlgElement {
                            c: x
                                .c
                                .iter()
                                .zip(&y.c)
                                .zip(&a0.comps)
                                .map(|((u, v), cp)| kron(&cp.ring, u, v))
                                .collect(),
                        });
                    }
                }
                NrdModel::Subring { t: tt, f: f.iter().map(&lift0).collect() }
            }
            (NrdModel::Regular, NrdModel::Regular) => NrdModel::Regular,
            _ => NrdModel::Unavailable,
        };
        let kind = Kind::Tensor(Box::new(a0.kind.clone()), Box::new(a1.kind.clone()));
        let mut t = Self::assemble(base, a0.deg * a1.deg, comps, kind, nrd)?;
        let tm = Arc::get_mut(&mut t).unwrap();
        tm.lambda = a0.lambda.as_ref().map(&lift0);
        tm.mu = a0.mu.as_ref().map(&lift0);
        Ok(t)
    }

    /// Same multiplication with the involution `x -> u sigma(x) u^{-1}`.
    pub fn twisted(&self, u: &AlgElement<R>) -> Result<Alg<R>> {
        let uinv = self.inv(u)?;
        let comps = self
            .comps
            .iter()
            .enumerate()
            .map(|(ci, a)| {
                let sigma = (0..a.dim)
                    .map(|i| a.mul3(&u.c[ci], &a.sigma[i], &uinv.c[ci]))
                    .collect();
                a.with_sigma(sigma)
            })
            .collect::<Result<_>>()?;
        Ok(Arc::new(Algebra {
            base: self.base.clone(),
            dim: self.dim,
            deg: self.deg,
            comps,
            lambda: self.lambda.clone(),
            mu: self.mu.clone(),
            nrd: self.nrd.clone(),
            kind: Kind::Twisted(Box::new(self.kind.clone())),
        }))
    }

    /// Subalgebra with a free basis (same count on every component).
    pub fn subalgebra(
        &self,
        basis: &[AlgElement<R>],
        inv: impl Fn(usize, &[R::E]) -> Vec<R::E>,
        name: &str,
        deg: usize,
    ) -> Result<Alg<R>> {
        let comps = self
            .comps
            .iter()
            .enumerate()
            .map(|(ci, a)| {
                let b: Vec<_> = basis.iter().map(|x| x.c[ci].clone()).collect();
                a.subalgebra(&b, |v| inv(ci, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Algebra {
            base: self.base.clone(),
            dim: basis.len(),
            deg,
            comps,
            lambda: None,
            mu: None,
            nrd: NrdModel::Regular,
            kind: Kind::Sub(name.to_string()),
        }))
    }

    // ---- elements ----

    pub fn zero(&self) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().map(|a| a.zero()).collect() }
    }

    pub fn one(&self) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().map(|a| a.unit.clone()).collect() }
    }

    pub fn scalar_elem(&self, x: &RingElement<R>) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().zip(&x.c).map(|(a, c)| a.scalar(c)).collect() }
    }

    pub fn int(&self, n: i64) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().map(|a| a.scalar(&a.ring.int(n))).collect() }
    }

    /// Element from integer coordinates, the same on every component.
    pub fn from_ints(&self, v: &[i64]) -> Result<AlgElement<R>> {
        if v.len() != self.dim {
            return Err(Error::InvalidArity(format!("expected {} coordinates", self.dim)));
        }
        Ok(AlgElement { c: self.comps.iter().map(|a| v.iter().map(|x| a.ring.int(*x)).collect()).collect() })
    }

    pub fn basis_elem(&self, i: usize) -> AlgElement<R> {
        AlgElement::basis(&self.base, self.dim, i)
    }

    fn check(&self, a: &AlgElement<R>) -> Result<()> {
        if a.c.len() != self.comps.len() || a.c.iter().any(|v| v.len() != self.dim) {
            return Err(Error::RingMismatch);
        }
        Ok(())
    }

    fn map2(
        &self,
        a: &AlgElement<R>,
        b: &AlgElement<R>,
        f: impl Fn(&LocalAlg<R>, &[R::E], &[R::E]) -> Vec<R::E>,
    ) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().enumerate().map(|(i, l)| f(l, &a.c[i], &b.c[i])).collect() }
    }

    pub fn add(&self, a: &AlgElement<R>, b: &AlgElement<R>) -> AlgElement<R> {
        self.map2(a, b, |l, x, y| l.add(x, y))
    }

    pub fn sub(&self, a: &AlgElement<R>, b: &AlgElement<R>) -> AlgElement<R> {
        self.map2(a, b, |l, x, y| l.sub(x, y))
    }

    pub fn mul(&self, a: &AlgElement<R>, b: &AlgElement<R>) -> AlgElement<R> {
        self.map2(a, b, |l, x, y| l.mul(x, y))
    }

    pub fn neg(&self, a: &AlgElement<R>) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().zip(&a.c).map(|(l, x)| l.neg(x)).collect() }
    }

    pub fn involute(&self, a: &AlgElement<R>) -> AlgElement<R> {
        AlgElement { c: self.comps.iter().zip(&a.c).map(|(l, x)| l.invol(x)).collect() }
    }

    pub fn is_unit(&self, a: &AlgElement<R>) -> bool {
        self.comps.iter().zip(&a.c).all(|(l, x)| l.is_unit(x))
    }

    pub fn inv(&self, a: &AlgElement<R>) -> Result<AlgElement<R>> {
        self.check(a)?;
        let c = self
            .comps
            .iter()
            .zip(&a.c)
            .map(|(l, x)| l.inv(x).ok_or_else(|| Error::NotAUnit(format!("{:?}", a.c))))
            .collect::<Result<_>>()?;
        Ok(AlgElement { c })
    }

    pub fn is_zero(&self, a: &AlgElement<R>) -> bool {
        self.comps.iter().zip(&a.c).all(|(l, x)| l.is_zero(x))
    }

    pub fn is_central(&self, a: &AlgElement<R>) -> bool {
        self.comps.iter().zip(&a.c).all(|(l, x)| l.is_central(x))
    }

    /// The element as a ring scalar, if it lies in `R * 1`.
    pub fn as_scalar(&self, a: &AlgElement<R>) -> Option<RingElement<R>> {
        let c = self
            .comps
            .iter()
            .zip(&a.c)
            .map(|(l, x)| {
                let i = l.unit.iter().position(|u| l.ring.is_unit(u))?;
                let s = l.ring.div_exact(&x[i], &l.unit[i])?;
                (l.scalar(&s) == *x).then_some(s)
            })
            .collect::<Option<_>>()?;
        Some(RingElement { c })
    }

    /// `eps = +-1`.
    pub fn sign(&self, s: i64) -> AlgElement<R> {
        self.int(s)
    }

    pub fn check_epsilon(&self, eps: &AlgElement<R>) -> Result<()> {
        self.check(eps)?;
        if !self.is_central(eps) || self.mul(&self.involute(eps), eps) != self.one() {
            return Err(Error::InvalidEpsilon);
        }
        Ok(())
    }

    /// Involution type per CRT component, from ranks at the residue field.
    pub fn involution_type(&self, eps: &AlgElement<R>) -> Result<Vec<InvType>> {
        self.check_epsilon(eps)?;
        self.comps
            .iter()
            .zip(&eps.c)
            .map(|(l, e)| {
                let k = l.ring.residue_field();
                let red = |v: &Vec<R::E>| v.iter().map(|x| l.ring.reduce(x)).collect::<Vec<_>>();
                let c = l.center.len();
                let moving = l.center.iter().any(|z| red(&l.invol(z)) != red(z));
                if moving {
                    return Ok(InvType::Unitary);
                }
                let sym = l.sym_basis(e).len();
                let n = self.deg;
                let _ = k;
                if sym == c * n * (n + 1) / 2 {
                    Ok(InvType::Orthogonal)
                } else if sym == c * n * (n - 1) / 2 {
                    Ok(InvType::Symplectic)
                } else {
                    Err(Error::InternalInconsistency(format!("Sym rank {sym} fits no type")))
                }
            })
            .collect()
    }

    /// Reduced trace and norm (central elements).
    pub fn reduced_trace_norm(&self, a: &AlgElement<R>) -> Result<(AlgElement<R>, AlgElement<R>)> {
        self.check(a)?;
        let (trd, nrd) = match &self.nrd {
            NrdModel::Regular => {
                let mut t = Vec::new();
                let mut n = Vec::new();
                for (l, x) in self.comps.iter().zip(&a.c) {
                    let m = l.left_matrix(x);
                    let mut tr = l.ring.zero();
                    for i in 0..l.dim {
                        tr = l.ring.add(&tr, m.at(i, i));
                    }
                    t.push(l.scalar(&tr));
                    n.push(l.scalar(&linalg::det(&l.ring, &m)));
                }
                (AlgElement { c: t }, AlgElement { c: n })
            }
            NrdModel::Matrix(nn) => {
                let mut t = Vec::new();
                let mut n = Vec::new();
                for (l, x) in self.comps.iter().zip(&a.c) {
                    let m = Mat::from_fn(*nn, *nn, |i, j| x[i * nn + j].clone());
                    let mut tr = l.ring.zero();
                    for i in 0..*nn {
                        tr = l.ring.add(&tr, m.at(i, i));
                    }
                    t.push(l.scalar(&tr));
                    n.push(l.scalar(&linalg::det(&l.ring, &m)));
                }
                (AlgElement { c: t }, AlgElement { c: n })
            }
            NrdModel::Subring { t, f } => self.subring_trace_norm(t, f, a)?,
            NrdModel::Unavailable => {
                return Err(Error::Unsupported("no reduced norm model for this algebra".into()))
            }
        };
        if !self.is_central(&nrd) || !self.is_central(&trd) {
            return Err(Error::InternalInconsistency("reduced norm is not central".into()));
        }
        Ok((trd, nrd))
    }

    fn subring_trace_norm(
        &self,
        t: &[AlgElement<R>],
        f: &[AlgElement<R>],
        a: &AlgElement<R>,
    ) -> Result<(AlgElement<R>, AlgElement<R>)> {
        let n = f.len();
        let mut trs = Vec::new();
        let mut nrs = Vec::new();
        for (ci, l) in self.comps.iter().enumerate() {
            // R-basis f_i t_l
            let cols: Vec<_> =
                f.iter().flat_map(|fi| t.iter().map(move |tl| l.mul(&fi.c[ci], &tl.c[ci]))).collect();
            let bm = Mat::from_cols(l.dim, &cols);
            let sm = linalg::smith(&l.ring, &bm);
            // m[i][j] in T with a f_j = sum_i f_i m_ij
            let mut m = vec![vec![l.zero(); n]; n];
            for j in 0..n {
                let v = l.mul(&a.c[ci], &f[j].c[ci]);
                let co = linalg::solve_with(&l.ring, &sm, l.dim, cols.len(), &v)
                    .ok_or_else(|| Error::InternalInconsistency("subring basis".into()))?;
                for i in 0..n {
                    let mut e = l.zero();
                    for (li, tl) in t.iter().enumerate() {
                        e = l.add(&e, &l.scale(&co[i * t.len() + li], &tl.c[ci]));
                    }
                    m[i][j] = e;
                }
            }
            let mut tr = l.zero();
            for i in 0..n {
                tr = l.add(&tr, &m[i][i]);
            }
            trs.push(tr);
            nrs.push(leibniz(l, &m));
        }
        Ok((AlgElement { c: trs }, AlgElement { c: nrs }))
    }

    pub fn nrd(&self, a: &AlgElement<R>) -> Result<AlgElement<R>> {
        Ok(self.reduced_trace_norm(a)?.1)
    }

    /// Basis of the commutant of `x`.
    pub fn centralizer(&self, x: &AlgElement<R>) -> Result<Vec<AlgElement<R>>> {
        self.check(x)?;
        let per: Vec<_> = self.comps.iter().zip(&x.c).map(|(l, v)| l.centralizer(v)).collect::<Result<_>>()?;
        let n = per[0].len();
        if per.iter().any(|b| b.len() != n) {
            return Err(Error::NonFreeCentralizer);
        }
        let basis: Vec<_> = (0..n).map(|i| AlgElement { c: per.iter().map(|b| b[i].clone()).collect() }).collect();
        for a in &basis {
            for b in &basis {
                let ab = self.mul(a, b);
                if self.mul(&ab, x) != self.mul(x, &ab) {
                    return Err(Error::InternalInconsistency("centralizer not closed".into()));
                }
            }
        }
        Ok(basis)
    }

    /// Enumerates `Sym_eps`, the elements with `s = eps sigma(s)`.
    pub fn sym_elements(&self, eps: &AlgElement<R>) -> Result<Vec<AlgElement<R>>> {
        let mut per = Vec::new();
        for (l, e) in self.comps.iter().zip(&eps.c) {
            let basis = l.sym_basis(e);
            let els = l.ring.elements().ok_or(Error::NotEnumerable)?;
            let combos = crate::ring::cartesian(&vec![els; basis.len()]);
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
        Ok(crate::ring::cartesian(&per).into_iter().map(|c| AlgElement { c }).collect())
    }

    /// `pi_1(a) = (a + l^{-1} a l)/2` and `pi_2(a) = m^{-1}(a - pi_1 a)`, as matrices on coordinates,
    /// together with bases of `B` and `mB`.
    pub fn pi_projections(&self) -> Result<PiData<R>> {
        let (l, m) = match (&self.lambda, &self.mu) {
            (Some(l), Some(m)) => (l.clone(), m.clone()),
            _ => return Err(Error::InvalidOctagonData("lambda and mu are required".into())),
        };
        let bad = |s: &str| Error::InvalidOctagonData(s.to_string());
        let linv = self.inv(&l).map_err(|_| bad("lambda is not a unit"))?;
        let minv = self.inv(&m).map_err(|_| bad("mu is not a unit"))?;
        if self.mul(&l, &m) != self.neg(&self.mul(&m, &l)) {
            return Err(bad("lambda mu != -mu lambda"));
        }
        let mut pi1 = Vec::new();
        let mut pi2 = Vec::new();
        for (ci, a) in self.comps.iter().enumerate() {
            let h = a.ring.half();
            let p1: Vec<_> = (0..a.dim)
                .map(|j| {
                    let b = a.basis(j);
                    a.scale(&h, &a.add(&b, &a.mul3(&linv.c[ci], &b, &l.c[ci])))
                })
                .collect();
            let p2: Vec<_> =
                (0..a.dim).map(|j| a.mul(&minv.c[ci], &a.sub(&a.basis(j), &p1[j]))).collect();
            pi1.push(Mat::from_cols(a.dim, &p1));
            pi2.push(Mat::from_cols(a.dim, &p2));
        }
        let b = self.centralizer(&l)?;
        let mb: Vec<_> = b.iter().map(|x| self.mul(&m, x)).collect();
        // A = B + mB
        for (ci, a) in self.comps.iter().enumerate() {
            let cols: Vec<_> = b.iter().chain(&mb).map(|x| x.c[ci].clone()).collect();
            if cols.len() != a.dim || linalg::residue_rank(&a.ring, &Mat::from_cols(a.dim, &cols)) != a.dim {
                return Err(bad("A is not B + mu B"));
            }
            // pi_1 + mu pi_2 = id
            for j in 0..a.dim {
                let x = a.add(&pi1[ci].col(j), &a.mul(&m.c[ci], &pi2[ci].col(j)));
                if x != a.basis(j) {
                    return Err(Error::InternalInconsistency("pi_1 + mu pi_2 != id".into()));
                }
            }
        }
        Ok(PiData { pi1, pi2, b, mb })
    }

    /// Quaternion splitting: a rank-one idempotent and the isomorphism onto `M_2(R)`.
    pub fn split_quaternion(&self) -> Result<Splitting<R>>
    where
        R: Splittable,
    {
        if !matches!(self.kind, Kind::Quaternion { .. }) {
            return Err(Error::Unsupported("split_quaternion needs a quaternion algebra".into()));
        }
        let mut es = Vec::new();
        for ci in 0..self.comps.len() {
            match R::rank_one_idempotent(self, ci)? {
                Some(e) => es.push(e),
                None => return Ok(Splitting::NonSplit),
            }
        }
        let mut phis = Vec::new();
        for (l, e) in self.comps.iter().zip(&es) {
            phis.push(peirce(l, e)?);
        }
        Ok(Splitting::Split { e: AlgElement { c: es }, phi: phis })
    }

    /// Split or not, per component.
    pub fn brauer_is_split(&self) -> Result<Vec<bool>>
    where
        R: Splittable,
    {
        fn go<R: LocalRing + Splittable>(a: &Algebra<R>, k: &Kind<R>, ci: usize) -> Result<bool> {
            match k {
                Kind::Scalar | Kind::Etale { .. } | Kind::Matrix { .. } | Kind::Exchange => Ok(true),
                Kind::Quaternion { alpha, beta } => {
                    Ok(R::norm_form_isotropic(&a.comps[ci].ring, &alpha.c[ci], &beta.c[ci]))
                }
                Kind::Tensor(x, y) => match (x.as_ref(), y.as_ref()) {
                    (q, Kind::Scalar) | (Kind::Scalar, q) => go(a, q, ci),
                    (q @ Kind::Quaternion { .. }, Kind::Etale { alpha }) => {
                        // over a field factor of S that is not split the quaternion part
                        // splits by a real-closed argument; finite fields split everything
                        let r = &a.comps[ci].ring;
                        Ok(go(a, q, ci)? || (!R::finite() && !r.is_square(&alpha.c[ci])))
                    }
                    _ => Err(Error::Unsupported("tensor shape".into())),
                },
                _ => Err(Error::Unsupported("algebra shape".into())),
            }
        }
        (0..self.comps.len()).map(|ci| go(self, &self.kind, ci)).collect()
    }

    pub fn to_json(&self) -> Value {
        let comp = |l: &LocalAlg<R>| {
            let r = &l.ring;
            let v = |x: &Vec<R::E>| Value::Array(x.iter().map(|e| r.to_json(e)).collect());
            let mut structure = Vec::new();
            for i in 0..l.dim {
                let mut row = Vec::new();
                for j in 0..l.dim {
                    let mut w = l.zero();
                    for (k, c) in &l.table[i * l.dim + j] {
                        w[*k] = c.clone();
                    }
                    row.push(v(&w));
                }
                structure.push(Value::Array(row));
            }
            json!({
                "ring": r.name(),
                "structure": structure,
                "involution": l.sigma.iter().map(v).collect::<Vec<_>>(),
                "unit": v(&l.unit),
                "center": l.center.iter().map(v).collect::<Vec<_>>(),
            })
        };
        let mut o = json!({
            "base": self.base.desc,
            "dim": self.dim,
            "degree": self.deg,
            "kind": format!("{:?}", self.kind_name()),
            "components": self.comps.iter().map(comp).collect::<Vec<_>>(),
        });
        if let Some(l) = &self.lambda {
            o["lambda"] = self.elem_json(l);
        }
        if let Some(m) = &self.mu {
            o["mu"] = self.elem_json(m);
        }
        o
    }

    pub fn kind_name(&self) -> String {
        fn n<R: LocalRing>(k: &Kind<R>) -> String {
            match k {
                Kind::Scalar => "scalar".into(),
                Kind::Etale { .. } => "quadratic_etale".into(),
                Kind::Quaternion { .. } => "quaternion".into(),
                Kind::Matrix { n, involution } => format!("matrix({n},{involution})"),
                Kind::Exchange => "exchange".into(),
                Kind::Tensor(a, b) => format!("{} (x) {}", n(a), n(b)),
                Kind::Sub(s) => s.clone(),
                Kind::Twisted(a) => format!("twisted {}", n(a)),
            }
        }
        n(&self.kind)
    }

    /// Coordinates as an array of ring elements (each an array over components).
    pub fn elem_json(&self, a: &AlgElement<R>) -> Value {
        Value::Array(
            (0..self.dim)
                .map(|i| {
                    Value::Array(self.comps.iter().zip(&a.c).map(|(l, v)| l.ring.to_json(&v[i])).collect())
                })
                .collect(),
        )
    }

    pub fn elem_from_json(&self, v: &Value) -> Result<AlgElement<R>> {
        let bad = || Error::InvalidSpec(format!("bad element {v}"));
        let coords = match v {
            Value::Array(a) if a.len() == self.dim => a.clone(),
            Value::Number(_) | Value::String(_) => {
                let s = scalar_text(v).ok_or_else(bad)?;
                let x = self.base.parse_elem(&s)?;
                return Ok(self.scalar_elem(&x));
            }
            _ => return Err(bad()),
        };
        let mut c = vec![Vec::with_capacity(self.dim); self.comps.len()];
        for x in coords {
            match &x {
                Value::Array(per) if per.len() == self.comps.len() => {
                    for (ci, y) in per.iter().enumerate() {
                        c[ci].push(self.comps[ci].ring.parse(&scalar_text(y).ok_or_else(bad)?)?);
                    }
                }
                _ => {
                    let s = scalar_text(&x).ok_or_else(bad)?;
                    for (ci, l) in self.comps.iter().enumerate() {
                        c[ci].push(l.ring.parse(&s)?);
                    }
                }
            }
        }
        Ok(AlgElement { c })
    }
}

pub(crate) fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn map_nrd<R: LocalRing>(m: &NrdModel<R>, lift: &impl Fn(&AlgElement<R>) -> AlgElement<R>) -> NrdModel<R> {
    match m {
        NrdModel::Subring { t, f } => {
            NrdModel::Subring { t: t.iter().map(lift).collect(), f: f.iter().map(lift).collect() }
        }
        other => other.clone(),
    }
}

fn kron<R: LocalRing>(r: &R, x: &[R::E], y: &[R::E]) -> Vec<R::E> {
    let mut out = Vec::with_capacity(x.len() * y.len());
    for a in x {
        for b in y {
            out.push(r.mul(a, b));
        }
    }
    out
}

fn leibniz<R: LocalRing>(l: &LocalAlg<R>, m: &[Vec<Vec<R::E>>]) -> Vec<R::E> {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = l.zero();
    permute(&mut perm, 0, &mut |p| {
        let mut term = l.unit.clone();
        for (i, &j) in p.iter().enumerate() {
            term = l.mul(&term, &m[i][j]);
        }
        if parity(p) {
            total = l.sub(&total, &term);
        } else {
            total = l.add(&total, &term);
        }
    });
    total
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

fn parity(p: &[usize]) -> bool {
    let mut odd = false;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                odd = !odd;
            }
        }
    }
    odd
}

impl<R: LocalRing> AlgElement<R> {
    pub fn basis(base: &BaseRing<R>, dim: usize, i: usize) -> Self {
        AlgElement {
            c: base
                .comps
                .iter()
                .map(|r| (0..dim).map(|k| if k == i { r.one() } else { r.zero() }).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum MatrixInvolution<R: LocalRing> {
    Transpose,
    Symplectic,
    DiagAdjoint(Vec<RingElement<R>>),
}

#[derive(Clone, Debug)]
pub struct PiData<R: LocalRing> {
    /// Per component, columns are `pi_1(e_j)` in A-coordinates.
    pub pi1: Vec<Mat<R::E>>,
    pub pi2: Vec<Mat<R::E>>,
    pub b: Vec<AlgElement<R>>,
    pub mb: Vec<AlgElement<R>>,
}

#[derive(Clone, Debug)]
pub enum Splitting<R: LocalRing> {
    NonSplit,
    /// `phi[c]` maps A-coordinates to the coordinates in the matrix units `E11, E12, E21, E22`.
    Split { e: AlgElement<R>, phi: Vec<Mat<R::E>> },
}

/// Peirce decomposition for a rank-one idempotent of a quaternion algebra.
fn peirce<R: LocalRing>(l: &LocalAlg<R>, e: &[R::E]) -> Result<Mat<R::E>> {
    let r = &l.ring;
    let f = l.sub(&l.unit, e);
    // e A f is free of rank one; pick a generator
    let eaf: Vec<_> = (0..l.dim).map(|j| l.mul3(e, &l.basis(j), &f)).collect();
    let e12 = eaf
        .iter()
        .find(|x| x.iter().any(|c| r.is_unit(c)))
        .cloned()
        .ok_or_else(|| Error::InternalInconsistency("no Peirce generator".into()))?;
    // e21 in f A e with e12 e21 = e
    let fae: Vec<_> = (0..l.dim).map(|j| l.mul3(&f, &l.basis(j), e)).collect();
    let cols: Vec<_> = fae.iter().map(|x| l.mul(&e12, x)).collect();
    let co = linalg::solve(r, &Mat::from_cols(l.dim, &cols), e)
        .ok_or_else(|| Error::InternalInconsistency("no e21".into()))?;
    let mut e21 = l.zero();
    for (c, x) in co.iter().zip(&fae) {
        e21 = l.add(&e21, &l.scale(c, x));
    }
    let units = [e.to_vec(), e12, e21, f];
    let inv = linalg::inverse(r, &Mat::from_cols(l.dim, &units))
        .ok_or_else(|| Error::InternalInconsistency("Peirce basis".into()))?;
    Ok(inv)
}

/// Component-level splitting support.
pub trait Splittable: LocalRing {
    fn finite() -> bool;
    fn norm_form_isotropic(r: &Self, alpha: &Self::E, beta: &Self::E) -> bool;
    fn rank_one_idempotent(a: &Algebra<Self>, ci: usize) -> Result<Option<Vec<Self::E>>>;
}

impl Splittable for Zpk {
    fn finite() -> bool {
        true
    }

    fn norm_form_isotropic(r: &Zpk, alpha: &u64, beta: &u64) -> bool {
        let k = r.residue_field();
        let (a, b) = (r.reduce(alpha), r.reduce(beta));
        let coeffs = [1, k.neg(&a), k.neg(&b), k.mul(&a, &b)];
        let p = k.p;
        (1..p.pow(4)).any(|mut n| {
            let mut s = 0;
            for c in coeffs {
                let x = n % p;
                n /= p;
                s = k.add(&s, &k.mul(&c, &k.mul(&x, &x)));
            }
            s == 0
        })
    }

    fn rank_one_idempotent(a: &Algebra<Zpk>, ci: usize) -> Result<Option<Vec<u64>>> {
        let Kind::Quaternion { alpha, beta } = &a.kind else { unreachable!() };
        let l = &a.comps[ci];
        if !Self::norm_form_isotropic(&l.ring, &alpha.c[ci], &beta.c[ci]) {
            return Ok(None);
        }
        let res = l.residue();
        let p = res.ring.p;
        let total = p.pow(l.dim as u32);
        let from_index = |mut n: u64| -> Vec<u64> {
            (0..l.dim)
                .map(|_| {
                    let x = n % p;
                    n /= p;
                    x
                })
                .collect()
        };
        let is_rank_one = |v: &Vec<u64>| !res.is_zero(v) && *v != res.unit && res.mul(v, v) == *v;
        let found = if total <= 6561 {
            (0..total).map(from_index).find(is_rank_one)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(p);
            (0..1_000_000).map(|_| from_index(rng.gen_range(0..total))).find(is_rank_one)
        };
        let e0 = found.ok_or_else(|| Error::Inconclusive("idempotent search cap reached".into()))?;
        let e = crate::ring::lift_idempotent(&l.ring, |x, y| l.mul(x, y), &e0)?;
        Ok(Some(e))
    }
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

impl Splittable for RealQ {
    fn finite() -> bool {
        false
    }

    fn norm_form_isotropic(_r: &RealQ, alpha: &BigRational, beta: &BigRational) -> bool {
        !(alpha.is_negative() && beta.is_negative())
    }

    fn rank_one_idempotent(a: &Algebra<RealQ>, ci: usize) -> Result<Option<Vec<BigRational>>> {
        let Kind::Quaternion { alpha, beta } = &a.kind else { unreachable!() };
        let (al, be) = (&alpha.c[ci], &beta.c[ci]);
        if !Self::norm_form_isotropic(&RealQ, al, be) {
            return Ok(None);
        }
        // x with x^2 = c a rational square gives e = (1 + x/sqrt c)/2
        let cands = [(1usize, al.clone()), (2, be.clone()), (3, -(al * be))];
        for (idx, c) in cands {
            if c.is_zero() {
                continue;
            }
            if let Some(s) = rational_sqrt(&c) {
                let h = BigRational::new(BigInt::from(1), BigInt::from(2));
                let mut e = vec![BigRational::zero(); 4];
                e[0] = h.clone();
                e[idx] = h / s;
                return Ok(Some(e));
            }
        }
        Err(Error::Unsupported("splitting needs an irrational idempotent".into()))
    }
}
