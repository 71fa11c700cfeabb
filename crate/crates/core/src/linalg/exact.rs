//! Exact-rational matrix routines: elimination, inverse, kernel,
//! characteristic polynomial.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::mat::QMat;
use crate::Rat;

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_i(p: i64) -> Rat {
    Rat::from(BigInt::from(p))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // to_f64 handles big numerators by scaling
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational from a finite double (dyadic).
pub fn f64_to_rat(v: f64) -> Option<Rat> {
    if !v.is_finite() {
        return None;
    }
    Rat::from_float(v)
}

/// Parses "p/q", an integer, or a plain decimal string.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let num: BigInt = p.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        let den: BigInt = q.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?
        };
        let digits: BigInt =
            if frac.is_empty() { BigInt::zero() } else { frac.parse().map_err(|_| Error::Parse(format!("bad decimal {s:?}")))? };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = Rat::new(digits, scale);
        let whole = Rat::from(int);
        return Ok(if neg { whole - frac_part } else { whole + frac_part });
    }
    let num: BigInt = s.parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    Ok(Rat::from(num))
}

/// Reduced row echelon form; returns (rref, rank, pivot columns).
pub fn rref(a: &QMat) -> (QMat, usize, Vec<usize>) {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let mut rank = 0;
    let mut pivots = Vec::new();
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| !m[(i, c)].is_zero()) else {
            continue;
        };
        if p != rank {
            for j in 0..cols {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(rank, j)].clone();
                m[(rank, j)] = tmp;
            }
        }
        let inv = m[(rank, c)].recip();
        for j in 0..cols {
            m[(rank, j)] = m[(rank, j)].clone() * inv.clone();
        }
        for i in 0..rows {
            if i == rank || m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone();
            for j in 0..cols {
                let v = m[(rank, j)].clone() * f.clone();
                m[(i, j)] = m[(i, j)].clone() - v;
            }
        }
        pivots.push(c);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    (m, rank, pivots)
}

pub fn rank(a: &QMat) -> usize {
    rref(a).1
}

/// Kernel basis (columns are free-variable solutions).
pub fn kernel(a: &QMat) -> Vec<Vec<Rat>> {
    let (r, rank, pivots) = rref(a);
    let cols = a.cols();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![Rat::zero(); cols];
        v[f] = Rat::from(BigInt::from(1));
        for (row, &p) in pivots.iter().enumerate().take(rank) {
            v[p] = -r[(row, f)].clone();
        }
        basis.push(v);
    }
    basis
}

pub fn inverse(a: &QMat) -> Result<QMat> {
    if !a.is_square() {
        return Err(Error::Dimension("inverse of non-square matrix".into()));
    }
    let n = a.rows();
    let aug = QMat::hstack(&[a.clone(), QMat::identity(n)]);
    let (r, rank, _) = rref(&aug);
    if rank < n {
        return Err(Error::Singular("exact inverse of singular matrix".into()));
    }
    Ok(r.submatrix(&(0..n).collect::<Vec<_>>(), &(n..2 * n).collect::<Vec<_>>()))
}

pub fn det(a: &QMat) -> Rat {
    assert!(a.is_square());
    let mut m = a.clone();
    let n = m.rows();
    let mut d = Rat::from(BigInt::from(1));
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            for j in 0..n {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(c, j)].clone();
                m[(c, j)] = tmp;
            }
            d = -d;
        }
        d *= m[(c, c)].clone();
        let inv = m[(c, c)].recip();
        for i in c + 1..n {
            if m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone() * inv.clone();
            for j in c..n {
                let v = m[(c, j)].clone() * f.clone();
                m[(i, j)] = m[(i, j)].clone() - v;
            }
        }
    }
    d
}

/// Characteristic polynomial coefficients of `a`, monic, by the
/// Faddeev–LeVerrier recurrence. Returned lowest degree first:
/// `p(t) = c[0] + c[1] t + ... + t^n`.
pub fn charpoly(a: &QMat) -> Vec<Rat> {
    assert!(a.is_square());
    let n = a.rows();
    let mut coeffs = vec![Rat::zero(); n + 1];
    coeffs[n] = Rat::from(BigInt::from(1));
    let mut m = QMat::identity(n);
    for k in 1..=n {
        m = a.matmul(&m);
        let tr: Rat = (0..n).fold(Rat::zero(), |acc, i| acc + m[(i, i)].clone());
        let c = -tr / Rat::from(BigInt::from(k as i64));
        coeffs[n - k] = c.clone();
        for i in 0..n {
            m[(i, i)] = m[(i, i)].clone() + c.clone();
        }
    }
    coeffs
}

/// Integer roots of a monic rational polynomial with multiplicities.
/// Returns `None` if the polynomial does not split over the integers.
pub fn integer_roots(coeffs: &[Rat]) -> Option<Vec<(i64, usize)>> {
    let mut p: Vec<Rat> = coeffs.to_vec();
    let mut roots: Vec<(i64, usize)> = Vec::new();
    // strip zero roots first
    let mut zero_mult = 0;
    while p.len() > 1 && p[0].is_zero() {
        p.remove(0);
        zero_mult += 1;
    }
    if zero_mult > 0 {
        roots.push((0, zero_mult));
    }
    while p.len() > 1 {
        let c0 = &p[0];
        if !c0.denom().is_one_like() {
            return None;
        }
        let c0int = c0.numer().clone();
        let mut found = None;
        for cand in divisor_candidates(&c0int) {
            if eval_poly(&p, cand).is_zero() {
                found = Some(cand);
                break;
            }
        }
        let r = found?;
        let mut mult = 0;
        loop {
            let (q, rem) = deflate(&p, r);
            if !rem.is_zero() {
                break;
            }
            p = q;
            mult += 1;
            if p.len() == 1 {
                break;
            }
        }
        if mult == 0 {
            return None;
        }
        roots.push((r, mult));
    }
    Some(roots)
}

trait IsOneLike {
    fn is_one_like(&self) -> bool;
}
impl IsOneLike for BigInt {
    fn is_one_like(&self) -> bool {
        self.abs() == BigInt::from(1)
    }
}

fn divisor_candidates(c: &BigInt) -> Vec<i64> {
    let mut out = Vec::new();
    let Some(c) = c.abs().to_i64() else { return out };
    if c == 0 {
        return vec![0];
    }
    let mut d = 1;
    while d * d <= c {
        if c % d == 0 {
            out.extend_from_slice(&[d, -d, c / d, -(c / d)]);
        }
        d += 1;
    }
    out.sort_by_key(|v| v.abs());
    out.dedup();
    out
}

fn eval_poly(p: &[Rat], x: i64) -> Rat {
    let x = Rat::from(BigInt::from(x));
    p.iter().rev().fold(Rat::zero(), |acc, c| acc * x.clone() + c.clone())
}

/// Divides `p` by `(t - r)`; returns (quotient, remainder).
fn deflate(p: &[Rat], r: i64) -> (Vec<Rat>, Rat) {
    let r = Rat::from(BigInt::from(r));
    let n = p.len() - 1;
    let mut q = vec![Rat::zero(); n];
    let mut carry = p[n].clone();
    for k in (0..n).rev() {
        q[k] = carry.clone();
        carry = p[k].clone() + carry * r.clone();
    }
    (q, carry)
}
