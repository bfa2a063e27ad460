//! Small dense helpers on `&[f64]` vectors. Dimensions here never exceed 8,
//! so everything is written for short slices and no allocation in the hot
//! paths beyond the caller's buffers.

use nalgebra::{DMatrix, DVector};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// `a + t * (b - a)`
#[inline]
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn centroid<'a>(points: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    let mut count = 0usize;
    for p in points {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        c.iter_mut().for_each(|x| *x *= inv);
    }
    c
}

/// Removes from `v` its components along the orthonormal vectors in `basis`
/// (two passes of modified Gram–Schmidt) and returns the residual norm.
pub fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
    norm(v)
}

/// Orthonormalizes `vectors` in order. Returns the orthonormal vectors and the
/// product of the residual norms, which equals `sqrt(det(Gram))`, the
/// parallelotope content spanned by the input. Near-dependent vectors (residual
/// below `tol` times their original length) are dropped and make the content 0.
pub fn gram_schmidt(vectors: &[Vec<f64>], tol: f64) -> (Vec<Vec<f64>>, f64) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut content = 1.0;
    for v in vectors {
        let len = norm(v);
        let mut w = v.clone();
        let res = orthogonalize(&mut w, &basis);
        if len == 0.0 || res <= tol * len {
            content = 0.0;
            continue;
        }
        content *= res;
        w.iter_mut().for_each(|x| *x /= res);
        basis.push(w);
    }
    (basis, content)
}

/// Solves the square system `A x = b` (`rows` given row-major). `None` when singular.
pub fn solve(rows: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let rhs = DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

pub fn determinant(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j]).determinant()
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
