//! Dense linear algebra over a local ring: Smith form with transforms, solving,
//! kernels, determinants.

use crate::ring::LocalRing;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat<E> {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<E>,
}

impl<E: Clone> Mat<E> {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> E) -> Self {
        let mut a = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                a.push(f(i, j));
            }
        }
        Mat { rows, cols, a }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(rows: usize, cols: &[Vec<E>]) -> Self {
        Mat::from_fn(rows, cols.len(), |i, j| cols[j][i].clone())
    }

    pub fn at(&self, i: usize, j: usize) -> &E {
        &self.a[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: E) {
        self.a[i * self.cols + j] = v;
    }

    pub fn col(&self, j: usize) -> Vec<E> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<E> {
        self.a[i * self.cols..(i + 1) * self.cols].to_vec()
    }
}

pub fn identity<R: LocalRing>(r: &R, n: usize) -> Mat<R::E> {
    Mat::from_fn(n, n, |i, j| if i == j { r.one() } else { r.zero() })
}

pub fn mat_mul<R: LocalRing>(r: &R, x: &Mat<R::E>, y: &Mat<R::E>) -> Mat<R::E> {
    assert_eq!(x.cols, y.rows);
    let mut out = Mat { rows: x.rows, cols: y.cols, a: vec![r.zero(); x.rows * y.cols] };
    for i in 0..x.rows {
        for l in 0..x.cols {
            let xv = x.at(i, l);
            if r.is_zero(xv) {
                continue;
            }
            for j in 0..y.cols {
                let t = r.mul(xv, y.at(l, j));
                let idx = i * y.cols + j;
                out.a[idx] = r.add(&out.a[idx], &t);
            }
        }
    }
    out
}

pub fn mat_sub<R: LocalRing>(r: &R, x: &Mat<R::E>, y: &Mat<R::E>) -> Mat<R::E> {
    Mat { rows: x.rows, cols: x.cols, a: x.a.iter().zip(&y.a).map(|(a, b)| r.sub(a, b)).collect() }
}

pub fn mat_vec<R: LocalRing>(r: &R, x: &Mat<R::E>, v: &[R::E]) -> Vec<R::E> {
    (0..x.rows)
        .map(|i| {
            let mut s = r.zero();
            for j in 0..x.cols {
                s = r.add(&s, &r.mul(x.at(i, j), &v[j]));
            }
            s
        })
        .collect()
}

/// `p * m * q = diag(d)` with `p`, `q` invertible.
#[derive(Clone, Debug)]
pub struct Smith<E> {
    pub d: Vec<E>,
    pub p: Mat<E>,
    pub q: Mat<E>,
}

pub fn smith<R: LocalRing>(r: &R, m: &Mat<R::E>) -> Smith<R::E> {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut p = identity(r, rows);
    let mut q = identity(r, cols);
    let n = rows.min(cols);
    let mut d = Vec::with_capacity(n);
    for t in 0..n {
        // pivot of minimal valuation in the lower-right block
        let mut best: Option<(u32, usize, usize)> = None;
        'search: for i in t..rows {
            for j in t..cols {
                if let Some(v) = r.val(a.at(i, j)) {
                    if best.map_or(true, |b| v < b.0) {
                        best = Some((v, i, j));
                        if v == 0 {
                            break 'search;
                        }
                    }
                }
            }
        }
        let Some((_, pi, pj)) = best else {
            d.extend(std::iter::repeat(r.zero()).take(n - t));
            break;
        };
        if pi != t {
            swap_rows(&mut a, t, pi);
            swap_rows(&mut p, t, pi);
        }
        if pj != t {
            swap_cols(&mut a, t, pj);
            swap_cols(&mut q, t, pj);
        }
        let piv = a.at(t, t).clone();
        for i in t + 1..rows {
            if r.is_zero(a.at(i, t)) {
                continue;
            }
            let f = r.div_exact(a.at(i, t), &piv).expect("minimal valuation pivot divides");
            add_row(r, &mut a, i, t, &r.neg(&f));
            add_row(r, &mut p, i, t, &r.neg(&f));
        }
        for j in t + 1..cols {
            if r.is_zero(a.at(t, j)) {
                continue;
            }
            let f = r.div_exact(a.at(t, j), &piv).expect("minimal valuation pivot divides");
            add_col(r, &mut a, j, t, &r.neg(&f));
            add_col(r, &mut q, j, t, &r.neg(&f));
        }
        d.push(piv);
    }
    Smith { d, p, q }
}

fn swap_rows<E: Clone>(m: &mut Mat<E>, i: usize, j: usize) {
    for c in 0..m.cols {
        m.a.swap(i * m.cols + c, j * m.cols + c);
    }
}

fn swap_cols<E: Clone>(m: &mut Mat<E>, i: usize, j: usize) {
    for rr in 0..m.rows {
        m.a.swap(rr * m.cols + i, rr * m.cols + j);
    }
}

/// row_i += f * row_j
fn add_row<R: LocalRing>(r: &R, m: &mut Mat<R::E>, i: usize, j: usize, f: &R::E) {
    for c in 0..m.cols {
        let t = r.mul(f, m.at(j, c));
        let idx = i * m.cols + c;
        m.a[idx] = r.add(&m.a[idx], &t);
    }
}

/// col_i += f * col_j
fn add_col<R: LocalRing>(r: &R, m: &mut Mat<R::E>, i: usize, j: usize, f: &R::E) {
    for rr in 0..m.rows {
        let t = r.mul(f, m.at(rr, j));
        let idx = rr * m.cols + i;
        m.a[idx] = r.add(&m.a[idx], &t);
    }
}

/// Some solution of `m x = b`.
pub fn solve<R: LocalRing>(r: &R, m: &Mat<R::E>, b: &[R::E]) -> Option<Vec<R::E>> {
    let s = smith(r, m);
    solve_with(r, &s, m.rows, m.cols, b)
}

pub fn solve_with<R: LocalRing>(
    r: &R,
    s: &Smith<R::E>,
    rows: usize,
    cols: usize,
    b: &[R::E],
) -> Option<Vec<R::E>> {
    let pb = mat_vec(r, &s.p, b);
    let mut y = vec![r.zero(); cols];
    for i in 0..rows {
        if i < s.d.len() {
            y[i] = r.div_exact(&pb[i], &s.d[i])?;
        } else if !r.is_zero(&pb[i]) {
            return None;
        }
    }
    Some(mat_vec(r, &s.q, &y))
}

/// Kernel of `m`: a basis of its free part and whether the kernel is free.
pub fn kernel<R: LocalRing>(r: &R, m: &Mat<R::E>) -> (Vec<Vec<R::E>>, bool) {
    let s = smith(r, m);
    let mut basis = Vec::new();
    let mut free = true;
    for j in 0..m.cols {
        let dj = s.d.get(j);
        match dj.map(|x| r.val(x)) {
            None | Some(None) => basis.push(s.q.col(j)),
            Some(Some(0)) => {}
            Some(Some(_)) => free = false,
        }
    }
    (basis, free)
}

/// Number of unit invariant factors, i.e. the rank at the residue field.
pub fn residue_rank<R: LocalRing>(r: &R, m: &Mat<R::E>) -> usize {
    smith(r, m).d.iter().filter(|x| r.is_unit(x)).count()
}

/// Kernel and image are direct summands.
pub fn is_regular<R: LocalRing>(r: &R, m: &Mat<R::E>) -> bool {
    smith(r, m).d.iter().all(|x| r.is_zero(x) || r.is_unit(x))
}

pub fn inverse<R: LocalRing>(r: &R, m: &Mat<R::E>) -> Option<Mat<R::E>> {
    if m.rows != m.cols {
        return None;
    }
    let s = smith(r, m);
    let mut dinv = Vec::with_capacity(s.d.len());
    for x in &s.d {
        dinv.push(r.inv(x)?);
    }
    let n = m.rows;
    let scaled = Mat::from_fn(n, n, |i, j| r.mul(s.q.at(i, j), &dinv[j]));
    Some(mat_mul(r, &scaled, &s.p))
}

pub fn det<R: LocalRing>(r: &R, m: &Mat<R::E>) -> R::E {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    let mut acc = r.one();
    for t in 0..n {
        let mut best: Option<(u32, usize)> = None;
        for i in t..n {
            if let Some(v) = r.val(a.at(i, t)) {
                if best.map_or(true, |b| v < b.0) {
                    best = Some((v, i));
                }
            }
        }
        let Some((_, pi)) = best else { return r.zero() };
        if pi != t {
            swap_rows(&mut a, t, pi);
            acc = r.neg(&acc);
        }
        let piv = a.at(t, t).clone();
        for i in t + 1..n {
            if r.is_zero(a.at(i, t)) {
                continue;
            }
            let f = r.div_exact(a.at(i, t), &piv).expect("minimal valuation pivot divides");
            add_row(r, &mut a, i, t, &r.neg(&f));
        }
        acc = r.mul(&acc, &piv);
    }
    acc
}

/// Rank over a field of the span of the given vectors.
pub fn span_rank<R: LocalRing>(r: &R, vecs: &[Vec<R::E>], len: usize) -> usize {
    if vecs.is_empty() {
        return 0;
    }
    residue_rank(r, &Mat::from_cols(len, vecs))
}
