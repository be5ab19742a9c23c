//! Dense 4th-order tensors and 2-D multilayer signals.
//!
//! A [`Tensor4`] is stored row-major over its four modes, so for an MLG tensor
//! of shape `(M, N, M, N)` the flat offset of `(α, i, β, j)` is
//! `((α·N + i)·M + β)·N + j`. This is also the row-major layout of the
//! `MN×MN` flattening with row `α·N + i` and column `β·N + j`.
//!
//! Mode-n unfoldings use the cyclic column order: for mode `n` the columns
//! enumerate modes `n+1, n+2, n+3` (mod 4) row-major, the first of them
//! varying slowest.

use std::io::{Read, Write};
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};

use crate::error::{MgspError, Result};

const TENSOR_MAGIC: &[u8; 4] = b"MLG4";
const SIGNAL_MAGIC: &[u8; 4] = b"MLGS";

/// Dense real 4th-order tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        let len = dims.iter().product();
        Tensor4 {
            dims,
            data: vec![0.0; len],
        }
    }

    /// Zero tensor shaped like an MLG with `layers` layers and `entities` entities.
    pub fn zeros_mlg(layers: usize, entities: usize) -> Self {
        Self::zeros([layers, entities, layers, entities])
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(MgspError::shape("Tensor4::from_vec", len, data.len()));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(MgspError::param(format!("non-finite tensor entry {bad}")));
        }
        Ok(Tensor4 { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    /// True when the shape is `(M, N, M, N)`.
    pub fn is_mlg_shaped(&self) -> bool {
        self.dims[0] == self.dims[2] && self.dims[1] == self.dims[3]
    }

    /// `(M, N)` for an MLG-shaped tensor.
    pub fn mlg_dims(&self) -> Result<(usize, usize)> {
        if self.is_mlg_shaped() {
            Ok((self.dims[0], self.dims[1]))
        } else {
            Err(MgspError::shape(
                "MLG tensor",
                "(M, N, M, N)",
                format!("{:?}", self.dims),
            ))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, idx: [usize; 4]) -> usize {
        let [_, d1, d2, d3] = self.dims;
        ((idx[0] * d1 + idx[1]) * d2 + idx[2]) * d3 + idx[3]
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize, j: usize) -> f64 {
        self.data[self.offset([a, i, b, j])]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, j: usize, value: f64) {
        let o = self.offset([a, i, b, j]);
        self.data[o] = value;
    }

    #[inline]
    pub fn add_at(&mut self, a: usize, i: usize, b: usize, j: usize, value: f64) {
        let o = self.offset([a, i, b, j]);
        self.data[o] += value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Tensor4) -> Tensor4 {
        assert_eq!(self.dims, other.dims, "sub dimension mismatch");
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Symmetric rank-1 term `f ∘ e ∘ f ∘ e`.
    pub fn symmetric_rank1(f: &[f64], e: &[f64]) -> Tensor4 {
        let (m, n) = (f.len(), e.len());
        let mut t = Tensor4::zeros_mlg(m, n);
        for a in 0..m {
            for i in 0..n {
                let left = f[a] * e[i];
                if left == 0.0 {
                    continue;
                }
                for b in 0..m {
                    for j in 0..n {
                        t.set(a, i, b, j, left * f[b] * e[j]);
                    }
                }
            }
        }
        t
    }

    /// Mode-`mode` product `T ×ₙ A` (0-based mode).
    ///
    /// `A` must have as many columns as `dims[mode]`; the result replaces that
    /// dimension by `A.nrows()`.
    pub fn mode_product(&self, a: &DMatrix<f64>, mode: usize) -> Result<Tensor4> {
        check_mode(mode)?;
        if a.ncols() != self.dims[mode] {
            return Err(MgspError::shape(
                format!("mode-{} product", mode + 1),
                format!("{} columns", self.dims[mode]),
                format!("{} columns", a.ncols()),
            ));
        }
        let outer: usize = self.dims[..mode].iter().product();
        let inner: usize = self.dims[mode + 1..].iter().product();
        let (rows, size) = (a.nrows(), self.dims[mode]);
        let mut dims = self.dims;
        dims[mode] = rows;
        let mut out = vec![0.0; outer * rows * inner];
        for o in 0..outer {
            let src = &self.data[o * size * inner..(o + 1) * size * inner];
            let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
            for r in 0..rows {
                let dst_row = &mut dst[r * inner..(r + 1) * inner];
                for k in 0..size {
                    let coef = a[(r, k)];
                    if coef == 0.0 {
                        continue;
                    }
                    let src_row = &src[k * inner..(k + 1) * inner];
                    for (d, s) in dst_row.iter_mut().zip(src_row) {
                        *d += coef * s;
                    }
                }
            }
        }
        Ok(Tensor4 { dims, data: out })
    }

    /// Mode-`mode` unfolding with cyclic column order (0-based mode).
    pub fn unfold(&self, mode: usize) -> Result<DMatrix<f64>> {
        check_mode(mode)?;
        let order = cyclic_order(mode);
        let rows = self.dims[mode];
        let cols: usize = self.data.len() / rows.max(1);
        let mut m = DMatrix::zeros(rows, cols);
        let d = order.map(|k| self.dims[k]);
        let mut idx = [0usize; 4];
        for r in 0..d[0] {
            idx[order[0]] = r;
            let mut c = 0;
            for x in 0..d[1] {
                idx[order[1]] = x;
                for y in 0..d[2] {
                    idx[order[2]] = y;
                    for z in 0..d[3] {
                        idx[order[3]] = z;
                        m[(r, c)] = self.data[self.offset(idx)];
                        c += 1;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`Tensor4::unfold`].
    pub fn fold(matrix: &DMatrix<f64>, mode: usize, dims: [usize; 4]) -> Result<Tensor4> {
        check_mode(mode)?;
        let len: usize = dims.iter().product();
        if matrix.nrows() != dims[mode] || matrix.nrows() * matrix.ncols() != len {
            return Err(MgspError::shape(
                format!("fold mode {}", mode + 1),
                format!("{} rows, {} entries", dims[mode], len),
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        let mut t = Tensor4::zeros(dims);
        let order = cyclic_order(mode);
        let d = order.map(|k| dims[k]);
        let mut idx = [0usize; 4];
        for r in 0..d[0] {
            idx[order[0]] = r;
            let mut c = 0;
            for x in 0..d[1] {
                idx[order[1]] = x;
                for y in 0..d[2] {
                    idx[order[2]] = y;
                    for z in 0..d[3] {
                        idx[order[3]] = z;
                        let o = t.offset(idx);
                        t.data[o] = matrix[(r, c)];
                        c += 1;
                    }
                }
            }
        }
        Ok(t)
    }

    /// `MN×MN` flattening: row `α·N + i`, column `β·N + j`.
    pub fn flatten(&self) -> Result<DMatrix<f64>> {
        let (m, n) = self.mlg_dims()?;
        let size = m * n;
        Ok(DMatrix::from_row_slice(size, size, &self.data))
    }

    /// Inverse of [`Tensor4::flatten`].
    pub fn unflatten(matrix: &DMatrix<f64>, layers: usize, entities: usize) -> Result<Tensor4> {
        let size = layers * entities;
        if matrix.nrows() != size || matrix.ncols() != size {
            return Err(MgspError::shape(
                "unflatten",
                format!("{size}x{size}"),
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        let mut data = Vec::with_capacity(size * size);
        for r in 0..size {
            data.extend(matrix.row(r).iter().copied());
        }
        Tensor4::from_vec([layers, entities, layers, entities], data)
    }

    /// Writes the `MLG4` little-endian dump.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, n) = self.mlg_dims()?;
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&(m as u32).to_le_bytes())?;
        w.write_all(&(n as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Tensor4> {
        let (m, n) = read_header(&mut r, TENSOR_MAGIC)?;
        let data = read_f64s(&mut r, m * n * m * n)?;
        Tensor4::from_vec([m, n, m, n], data)
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if mode < 4 {
        Ok(())
    } else {
        Err(MgspError::param(format!("tensor mode {} out of range 1..4", mode + 1)))
    }
}

fn cyclic_order(mode: usize) -> [usize; 4] {
    [mode, (mode + 1) % 4, (mode + 2) % 4, (mode + 3) % 4]
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(usize, usize)> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if &head[..4] != magic {
        return Err(MgspError::Parse(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&head[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let m = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    Ok((m, n))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Signal over an MLG: entry `(α, i)` is the value of entity `i` in layer `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlgSignal(DMatrix<f64>);

impl MlgSignal {
    pub fn zeros(layers: usize, entities: usize) -> Self {
        MlgSignal(DMatrix::zeros(layers, entities))
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        MlgSignal(values)
    }

    pub fn from_row_slice(layers: usize, entities: usize, values: &[f64]) -> Self {
        MlgSignal(DMatrix::from_row_slice(layers, entities, values))
    }

    pub fn layers(&self) -> usize {
        self.0.nrows()
    }

    pub fn entities(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Mode-n product of a 2-D signal (0-based mode): mode 0 gives `A·s`,
    /// mode 1 gives `s·Aᵀ`.
    pub fn mode_product(&self, a: &DMatrix<f64>, mode: usize) -> Result<DMatrix<f64>> {
        match mode {
            0 if a.ncols() == self.layers() => Ok(a * &self.0),
            1 if a.ncols() == self.entities() => Ok(&self.0 * a.transpose()),
            0 | 1 => Err(MgspError::shape(
                format!("signal mode-{} product", mode + 1),
                format!(
                    "{} columns",
                    if mode == 0 { self.layers() } else { self.entities() }
                ),
                format!("{} columns", a.ncols()),
            )),
            _ => Err(MgspError::param(format!(
                "signal mode {} out of range 1..2",
                mode + 1
            ))),
        }
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SIGNAL_MAGIC)?;
        w.write_all(&(self.layers() as u32).to_le_bytes())?;
        w.write_all(&(self.entities() as u32).to_le_bytes())?;
        for r in 0..self.layers() {
            for c in 0..self.entities() {
                w.write_all(&self.0[(r, c)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<MlgSignal> {
        let (m, n) = read_header(&mut r, SIGNAL_MAGIC)?;
        let data = read_f64s(&mut r, m * n)?;
        Ok(MlgSignal::from_row_slice(m, n, &data))
    }
}

impl Deref for MlgSignal {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl DerefMut for MlgSignal {
    fn deref_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.0
    }
}

/// Rank-1 signal `f ∘ e`, entry `(α, i) = f_α · e_i`.
pub fn outer_rank1(f: &DVector<f64>, e: &DVector<f64>) -> MlgSignal {
    MlgSignal(f * e.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counting(dims: [usize; 4]) -> Tensor4 {
        let len = dims.iter().product();
        Tensor4::from_vec(dims, (0..len).map(|v| v as f64 * 0.5 - 3.0).collect()).unwrap()
    }

    fn unfold_multiply_fold(t: &Tensor4, a: &DMatrix<f64>, mode: usize) -> Tensor4 {
        let mut dims = t.dims();
        dims[mode] = a.nrows();
        Tensor4::fold(&(a * t.unfold(mode).unwrap()), mode, dims).unwrap()
    }

    #[test]
    fn signal_mode_products() {
        let s = MlgSignal::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let id = DMatrix::identity(2, 2);
        assert_eq!(s.mode_product(&id, 0).unwrap(), *s.matrix());

        let pick = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert_eq!(
            s.mode_product(&pick, 0).unwrap(),
            DMatrix::from_row_slice(1, 2, &[3.0, 4.0])
        );

        let sum = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert_eq!(
            s.mode_product(&sum, 1).unwrap(),
            DMatrix::from_row_slice(2, 1, &[3.0, 7.0])
        );
    }

    #[test]
    fn signal_mode_product_reports_mode() {
        let s = MlgSignal::zeros(2, 3);
        let bad = DMatrix::zeros(1, 3);
        let err = s.mode_product(&bad, 0).unwrap_err().to_string();
        assert!(err.contains("mode-1"), "{err}");
        let err = s.mode_product(&DMatrix::zeros(1, 2), 1).unwrap_err().to_string();
        assert!(err.contains("mode-2"), "{err}");
    }

    #[test]
    fn mode_product_identity_and_permutation() {
        let t = counting([2, 2, 2, 2]);
        let id = DMatrix::identity(2, 2);
        for mode in 0..4 {
            assert_eq!(t.mode_product(&id, mode).unwrap(), t);
        }

        let mut single = Tensor4::zeros([2, 2, 2, 2]);
        single.set(0, 0, 0, 0, 1.0);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let out = single.mode_product(&swap, 0).unwrap();
        let mut expected = Tensor4::zeros([2, 2, 2, 2]);
        expected.set(1, 0, 0, 0, 1.0);
        assert_eq!(out, expected);
    }

    #[test]
    fn mode_product_rejects_bad_columns() {
        let t = Tensor4::zeros([2, 3, 2, 3]);
        assert!(t.mode_product(&DMatrix::zeros(2, 2), 1).is_err());
        assert!(t.mode_product(&DMatrix::zeros(2, 2), 4).is_err());
    }

    #[test]
    fn unfold_rank_one_and_zero() {
        let z = Tensor4::zeros([2, 3, 2, 3]);
        assert!(z.unfold(0).unwrap().iter().all(|v| *v == 0.0));

        let t = Tensor4::symmetric_rank1(&[1.0, 0.0], &[0.0, 1.0]);
        let u = t.unfold(0).unwrap();
        assert_eq!(u.rank(1e-12), 1);
    }

    #[test]
    fn cyclic_unfold_column_order() {
        let t = counting([2, 3, 2, 3]);
        let u = t.unfold(1).unwrap();
        // mode 2 row i, columns over (β, j, α) with β slowest
        assert_eq!(u.shape(), (3, 12));
        assert_eq!(u[(1, 0)], t.get(0, 1, 0, 0));
        assert_eq!(u[(1, 1)], t.get(1, 1, 0, 0));
        assert_eq!(u[(1, 2)], t.get(0, 1, 0, 1));
        assert_eq!(u[(2, 11)], t.get(1, 2, 1, 2));
    }

    #[test]
    fn flatten_four_cycle() {
        let mut t = Tensor4::zeros_mlg(2, 2);
        for a in 0..2 {
            t.set(a, 0, a, 1, 1.0);
            t.set(a, 1, a, 0, 1.0);
        }
        for i in 0..2 {
            t.set(0, i, 1, i, 1.0);
            t.set(1, i, 0, i, 1.0);
        }
        let f = t.flatten().unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0,
            ],
        );
        assert_eq!(f, expected);
        assert_eq!(f, f.transpose());
        assert_eq!(Tensor4::unflatten(&f, 2, 2).unwrap(), t);
    }

    #[test]
    fn outer_product_cases() {
        let s = outer_rank1(&DVector::from_vec(vec![1.0, 0.0]), &DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(*s.matrix(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let s = outer_rank1(&DVector::from_vec(vec![1.0, 1.0]), &DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(*s.matrix(), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]));
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let t = counting([2, 3, 2, 3]);
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MLG4");
        assert_eq!(buf.len(), 12 + 36 * 8);
        assert_eq!(Tensor4::read_binary(&buf[..]).unwrap(), t);

        let s = MlgSignal::from_row_slice(2, 3, &[0.1, -2.0, 3.5, 1e-300, 7.0, -0.0]);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MLGS");
        let back = MlgSignal::read_binary(&buf[..]).unwrap();
        assert!(back.iter().zip(s.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(Tensor4::read_binary(&buf[..]).is_err());
    }

    fn tensor_strategy() -> impl Strategy<Value = Tensor4> {
        (1usize..4, 1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(a, b, c, d)| {
            proptest::collection::vec(-10.0f64..10.0, a * b * c * d)
                .prop_map(move |data| Tensor4::from_vec([a, b, c, d], data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn fold_inverts_unfold(t in tensor_strategy()) {
            for mode in 0..4 {
                let back = Tensor4::fold(&t.unfold(mode).unwrap(), mode, t.dims()).unwrap();
                prop_assert_eq!(&back, &t);
            }
        }

        #[test]
        fn mode_product_matches_unfolded_route(t in tensor_strategy(), seed in 0u64..1000) {
            for mode in 0..4 {
                let rows = 1 + (seed as usize + mode) % 3;
                let a = DMatrix::from_fn(rows, t.dims()[mode], |r, c| {
                    ((seed as f64 + 1.0) * (r as f64 + 0.3) * (c as f64 + 1.7)).sin()
                });
                let direct = t.mode_product(&a, mode).unwrap();
                let oracle = unfold_multiply_fold(&t, &a, mode);
                prop_assert_eq!(direct.dims(), oracle.dims());
                prop_assert!(direct.max_abs_diff(&oracle) < 1e-12);
            }
        }

        #[test]
        fn flatten_preserves_norm(m in 1usize..4, n in 1usize..5, seed in 0u64..1000) {
            let len = m * n * m * n;
            let data = (0..len).map(|k| ((k as f64 + 1.0) * (seed as f64 + 0.5)).cos()).collect();
            let t = Tensor4::from_vec([m, n, m, n], data).unwrap();
            let f = t.flatten().unwrap();
            prop_assert!((f.norm() - t.frobenius_norm()).abs() < 1e-12);
        }

        #[test]
        fn signal_mode_one_matches_triple_loop(
            vals in proptest::collection::vec(-5.0f64..5.0, 12),
            amat in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let s = MlgSignal::from_row_slice(3, 4, &vals);
            let a = DMatrix::from_row_slice(2, 3, &amat);
            let got = s.mode_product(&a, 0).unwrap();
            for r in 0..2 {
                for c in 0..4 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        acc += a[(r, k)] * s[(k, c)];
                    }
                    prop_assert!((got[(r, c)] - acc).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn rank_one_norm_identity(
            f in proptest::collection::vec(-3.0f64..3.0, 1..5),
            e in proptest::collection::vec(-3.0f64..3.0, 1..7),
        ) {
            let fv = DVector::from_vec(f);
            let ev = DVector::from_vec(e);
            let s = outer_rank1(&fv, &ev);
            prop_assert!((s.norm() - fv.norm() * ev.norm()).abs() < 1e-10);
        }
    }
}
