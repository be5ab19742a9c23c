//! Small dense linear-algebra helpers on top of nalgebra.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance under which two spectral values are treated as tied.
pub(crate) const TIE_RTOL: f64 = 1e-10;

/// Flips `v` so its largest-magnitude entry is positive. Entries within a
/// relative 1e-12 of the maximum count as ties and the lowest index wins.
pub fn normalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0 - *x);
    }
}

pub fn normalize_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        normalize_sign(col.as_mut_slice());
    }
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Sign-normalizes each column and orders columns by `key` descending.
///
/// Runs of keys within [`TIE_RTOL`] of each other are ordered by descending
/// lexicographic comparison of the normalized columns. Returns the
/// permutation applied (new position → old column).
pub fn canonical_order(keys: &[f64], vectors: &mut DMatrix<f64>) -> Vec<usize> {
    normalize_column_signs(vectors);
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));

    let scale = keys.iter().fold(0.0f64, |m, k| m.max(k.abs())).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && (keys[order[end - 1]] - keys[order[end]]).abs() <= TIE_RTOL * scale
        {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&a, &b| {
                lex_desc(vectors.column(a).as_slice(), vectors.column(b).as_slice())
                    .then(a.cmp(&b))
            });
        }
        start = end;
    }

    let reordered = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
        vectors[(r, order[c])]
    });
    *vectors = reordered;
    order
}

/// Eigen-decomposition of a symmetric matrix. The input is symmetrized first;
/// eigenvalues are returned unsorted together with their eigenvectors.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Orthogonal polar factor `U·Vᵀ` of a square matrix.
pub fn polar_factor(g: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = g.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let vt = svd.v_t.expect("svd computed with v_t");
    u * vt
}

/// Largest absolute deviation of `QᵀQ` from the identity.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let mut worst = 0.0f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, c)] - target).abs());
        }
    }
    worst
}

/// Principal angles (radians, ascending) between the column spans of two
/// matrices with orthonormal columns.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let cross = a.transpose() * b;
    let sv = cross.singular_values();
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn column_vec(m: &DMatrix<f64>, c: usize) -> DVector<f64> {
    m.column(c).into_owned()
}
