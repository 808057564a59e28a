//! Dense exact linear algebra over Q.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type QVector = Vec<BigRational>;
/// Row-major.
pub type QMatrix = Vec<QVector>;

pub fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn zero_vector(n: usize) -> QVector {
    vec![BigRational::zero(); n]
}

pub fn identity(n: usize) -> QMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { q(1) } else { q(0) }).collect())
        .collect()
}

pub fn from_ints(rows: &[&[i64]]) -> QMatrix {
    rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()
}

pub fn mat_vec(m: &QMatrix, v: &[BigRational]) -> QVector {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mat_mul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let cols = b.first().map(|r| r.len()).unwrap_or(0);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * &brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn mat_pow(m: &QMatrix, e: u32) -> QMatrix {
    let mut out = identity(m.len());
    for _ in 0..e {
        out = mat_mul(&out, m);
    }
    out
}

pub fn sub_scalar_identity(m: &QMatrix, lambda: &BigRational) -> QMatrix {
    let mut out = m.clone();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    out
}

pub fn is_zero_vector(v: &[BigRational]) -> bool {
    v.iter().all(|x| x.is_zero())
}

pub fn is_zero_matrix(m: &QMatrix) -> bool {
    m.iter().all(|r| is_zero_vector(r))
}

pub fn add_scaled(acc: &mut [BigRational], v: &[BigRational], s: &BigRational) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x * s;
    }
}

/// Reduced row echelon form; returns the nonzero rows and their pivot columns.
pub fn rref(rows: &[QVector]) -> (QMatrix, Vec<usize>) {
    let mut m: QMatrix = rows.to_vec();
    let ncols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot_row = m[r].clone();
                add_scaled(&mut m[i], &pivot_row, &-f);
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[QVector]) -> usize {
    rref(rows).1.len()
}

/// Basis of `{x : m x = 0}`.
pub fn nullspace(m: &QMatrix) -> Vec<QVector> {
    let ncols = m.first().map(|r| r.len()).unwrap_or(0);
    let (r, pivots) = rref(m);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = zero_vector(ncols);
            v[fc] = q(1);
            for (row, &pc) in r.iter().zip(&pivots) {
                v[pc] = -row[fc].clone();
            }
            v
        })
        .collect()
}

/// Coefficients `c` with `sum c_i basis_i = v`, or `None` if `v` is outside the span.
pub fn solve_in_span(basis: &[QVector], v: &[BigRational]) -> Option<QVector> {
    let n = basis.len();
    if n == 0 {
        return is_zero_vector(v).then(Vec::new);
    }
    // augmented system: rows are coordinates, columns are basis vectors plus v
    let dim = v.len();
    let rows: QMatrix = (0..dim)
        .map(|i| {
            let mut row: QVector = basis.iter().map(|b| b[i].clone()).collect();
            row.push(v[i].clone());
            row
        })
        .collect();
    let (r, pivots) = rref(&rows);
    if pivots.contains(&n) {
        return None;
    }
    if pivots.len() < n {
        // dependent basis: caller bug
        return None;
    }
    let mut c = zero_vector(n);
    for (row, &pc) in r.iter().zip(&pivots) {
        c[pc] = row[n].clone();
    }
    Some(c)
}

pub fn max_abs_f64(v: &[BigRational]) -> f64 {
    v.iter()
        .map(|x| x.abs().to_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

pub fn to_f64_vec(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

pub fn format_rational(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
