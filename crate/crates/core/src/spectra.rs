//! Spectral and singular bases of multilayer graphs and the MLG transform pair.
//!
//! Two decompositions of an undirected representing tensor `F` are provided:
//!
//! * [`hosvd`]: the singular space. `E_f` holds the left singular vectors of
//!   the mode-1 unfolding and `E_e` those of the mode-2 unfolding; partial
//!   symmetry makes modes 3 and 4 reuse them.
//! * [`orthogonal_cp`]: the spectral space. `F ≈ Σ λ_{αi} f_α∘e_i∘f_α∘e_i`
//!   with orthonormal `f_α`, `e_i`, fitted by alternating polar updates
//!   started from the HOSVD bases.
//!
//! Both produce a [`SpectralBasis`], consumed by [`mgft`] / [`imgft`].
//!
//! Basis columns are canonicalized: the largest-magnitude entry of every
//! column is positive, columns are sorted by descending value magnitude, and
//! tied values are ordered lexicographically (descending) on the normalized
//! columns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MgspError, Result};
use crate::linalg::{canonical_order, orthonormality_error, polar_factor, symmetric_eigen};
use crate::mlg::require_undirected;
use crate::tensor::{MlgSignal, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Singular bases from HOSVD.
    Hosvd,
    /// Spectral bases from orthogonal CP.
    Cp,
    /// Product of single-layer graph Fourier bases (baselines).
    Graph,
}

/// Layer basis `E_f` (M×M) and entity basis `E_e` (N×N) with their values.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    pub layer_basis: DMatrix<f64>,
    pub entity_basis: DMatrix<f64>,
    pub layer_values: Vec<f64>,
    pub entity_values: Vec<f64>,
    pub kind: BasisKind,
}

impl SpectralBasis {
    pub fn new(
        layer_basis: DMatrix<f64>,
        entity_basis: DMatrix<f64>,
        layer_values: Vec<f64>,
        entity_values: Vec<f64>,
        kind: BasisKind,
    ) -> Result<Self> {
        if !layer_basis.is_square() || layer_values.len() != layer_basis.nrows() {
            return Err(MgspError::shape(
                "layer basis",
                format!("{0}x{0} with {0} values", layer_values.len()),
                format!("{}x{}", layer_basis.nrows(), layer_basis.ncols()),
            ));
        }
        if !entity_basis.is_square() || entity_values.len() != entity_basis.nrows() {
            return Err(MgspError::shape(
                "entity basis",
                format!("{0}x{0} with {0} values", entity_values.len()),
                format!("{}x{}", entity_basis.nrows(), entity_basis.ncols()),
            ));
        }
        Ok(SpectralBasis {
            layer_basis,
            entity_basis,
            layer_values,
            entity_values,
            kind,
        })
    }

    /// Identity bases with unit values.
    pub fn identity(layers: usize, entities: usize) -> Self {
        SpectralBasis {
            layer_basis: DMatrix::identity(layers, layers),
            entity_basis: DMatrix::identity(entities, entities),
            layer_values: vec![1.0; layers],
            entity_values: vec![1.0; entities],
            kind: BasisKind::Graph,
        }
    }

    pub fn layers(&self) -> usize {
        self.layer_basis.nrows()
    }

    pub fn entities(&self) -> usize {
        self.entity_basis.nrows()
    }

    /// Worst deviation of `E_fᵀE_f` or `E_eᵀE_e` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.layer_basis).max(orthonormality_error(&self.entity_basis))
    }

    fn check_signal(&self, s: &DMatrix<f64>, context: &str) -> Result<()> {
        if s.shape() != (self.layers(), self.entities()) {
            return Err(MgspError::shape(
                context,
                format!("{}x{}", self.layers(), self.entities()),
                format!("{}x{}", s.nrows(), s.ncols()),
            ));
        }
        Ok(())
    }
}

/// Forward MLG transform `ŝ = E_fᵀ · s · E_e`.
pub fn mgft(s: &MlgSignal, basis: &SpectralBasis) -> Result<MlgSignal> {
    basis.check_signal(s, "mgft")?;
    Ok(MlgSignal::from_matrix(
        basis.layer_basis.tr_mul(s.matrix()) * &basis.entity_basis,
    ))
}

/// Inverse MLG transform `s = E_f · ŝ · E_eᵀ`.
pub fn imgft(s_hat: &MlgSignal, basis: &SpectralBasis) -> Result<MlgSignal> {
    basis.check_signal(s_hat, "imgft")?;
    Ok(MlgSignal::from_matrix(
        &basis.layer_basis * s_hat.matrix() * basis.entity_basis.transpose(),
    ))
}

/// Left singular vectors and singular values of the mode-`mode` unfolding
/// (0-based), canonicalized.
pub fn mode_singular_basis(f: &Tensor4, mode: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let unfolded = f.unfold(mode)?;
    let gram = &unfolded * unfolded.transpose();
    let (eig, mut vectors) = symmetric_eigen(&gram);
    let singular: Vec<f64> = eig.iter().map(|v| v.max(0.0).sqrt()).collect();
    let order = canonical_order(&singular, &mut vectors);
    Ok((order.iter().map(|&k| singular[k]).collect(), vectors))
}

/// Singular bases of an undirected tensor without forming the core.
pub fn hosvd_basis(f: &Tensor4) -> Result<SpectralBasis> {
    require_undirected(f)?;
    let (gamma, ef) = mode_singular_basis(f, 0)?;
    let (sigma, ee) = mode_singular_basis(f, 1)?;
    SpectralBasis::new(ef, ee, gamma, sigma, BasisKind::Hosvd)
}

/// `F = S ×₁ E_f ×₂ E_e ×₃ E_f ×₄ E_e`.
#[derive(Clone, Debug)]
pub struct HosvdFactorization {
    pub core: Tensor4,
    pub basis: SpectralBasis,
}

impl HosvdFactorization {
    pub fn reconstruct(&self) -> Tensor4 {
        let (ef, ee) = (&self.basis.layer_basis, &self.basis.entity_basis);
        self.core
            .mode_product(ef, 0)
            .and_then(|t| t.mode_product(ee, 1))
            .and_then(|t| t.mode_product(ef, 2))
            .and_then(|t| t.mode_product(ee, 3))
            .expect("core and bases have conforming shapes")
    }
}

pub fn hosvd(f: &Tensor4) -> Result<HosvdFactorization> {
    let basis = hosvd_basis(f)?;
    let eft = basis.layer_basis.transpose();
    let eet = basis.entity_basis.transpose();
    let core = f
        .mode_product(&eft, 0)?
        .mode_product(&eet, 1)?
        .mode_product(&eft, 2)?
        .mode_product(&eet, 3)?;
    Ok(HosvdFactorization { core, basis })
}

/// One eigenpair of the flattened tensor, eigenvector reshaped to `M×N`.
#[derive(Clone, Debug)]
pub struct FlattenedEigenpair {
    pub value: f64,
    pub vector: MlgSignal,
}

/// Eigenpairs of the symmetric `MN×MN` flattening, sorted by signed value
/// descending.
pub fn flattened_eigen(f: &Tensor4) -> Result<Vec<FlattenedEigenpair>> {
    require_undirected(f)?;
    let (m, n) = f.mlg_dims()?;
    let (values, mut vectors) = symmetric_eigen(&f.flatten()?);
    let order = canonical_order(&values, &mut vectors);
    Ok(order
        .iter()
        .enumerate()
        .map(|(col, &k)| FlattenedEigenpair {
            value: values[k],
            vector: MlgSignal::from_row_slice(m, n, vectors.column(col).as_slice()),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CpOptions {
    fn default() -> Self {
        CpOptions {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// `F ≈ Σ_{α,i} λ_{αi} · f_α∘e_i∘f_α∘e_i` with orthonormal factors.
#[derive(Clone, Debug)]
pub struct CpFactorization {
    /// `λ_{αi}`, rows follow the columns of `E_f`, columns those of `E_e`.
    pub weights: DMatrix<f64>,
    pub basis: SpectralBasis,
    /// `‖F − Σ λ f∘e∘f∘e‖_F` of the returned factors.
    pub residual: f64,
    /// Same residual for the HOSVD initialization (diagonal core truncation).
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after the initialization and each accepted iteration.
    pub history: Vec<f64>,
}

impl CpFactorization {
    pub fn relative_residual(&self, f: &Tensor4) -> f64 {
        let norm = f.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            self.residual / norm
        }
    }

    pub fn reconstruct(&self) -> Tensor4 {
        let (m, n) = (self.basis.layers(), self.basis.entities());
        let w = self.basis.layer_basis.kronecker(&self.basis.entity_basis);
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m * n, |k, _| {
            self.weights[(k / n, k % n)]
        }));
        let flat = &w * lam * w.transpose();
        Tensor4::unflatten(&flat, m, n).expect("square flattening")
    }
}

/// `N×N` block `F[a, :, b, :]` of the flattening.
fn entity_block(flat: &DMatrix<f64>, n: usize, a: usize, b: usize) -> DMatrix<f64> {
    flat.view((a * n, b * n), (n, n)).into_owned()
}

/// `C_α = Σ_{a,b} f_α[a] f_α[b] F[a,:,b,:]` for every layer vector.
fn layer_contractions(flat: &DMatrix<f64>, ef: &DMatrix<f64>, n: usize) -> Vec<DMatrix<f64>> {
    let m = ef.nrows();
    let blocks: Vec<Vec<DMatrix<f64>>> = (0..m)
        .map(|a| (0..m).map(|b| entity_block(flat, n, a, b)).collect())
        .collect();
    (0..m)
        .map(|alpha| {
            let mut c = DMatrix::zeros(n, n);
            for a in 0..m {
                for b in 0..m {
                    let w = ef[(a, alpha)] * ef[(b, alpha)];
                    if w != 0.0 {
                        c += &blocks[a][b] * w;
                    }
                }
            }
            c
        })
        .collect()
}

/// `B_i[a,b] = e_iᵀ F[a,:,b,:] e_i` for every entity vector.
fn entity_contractions(flat: &DMatrix<f64>, ee: &DMatrix<f64>, m: usize) -> Vec<DMatrix<f64>> {
    let n = ee.nrows();
    let mut out = vec![DMatrix::zeros(m, m); n];
    for a in 0..m {
        for b in 0..m {
            let block = entity_block(flat, n, a, b);
            let z = &block * ee;
            for (i, bi) in out.iter_mut().enumerate() {
                bi[(a, b)] = ee.column(i).dot(&z.column(i));
            }
        }
    }
    out
}

fn cp_weights(flat: &DMatrix<f64>, ef: &DMatrix<f64>, ee: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (ef.nrows(), ee.nrows());
    let contractions = layer_contractions(flat, ef, n);
    let mut weights = DMatrix::zeros(m, n);
    for (alpha, c) in contractions.iter().enumerate() {
        let y = c * ee;
        for i in 0..n {
            weights[(alpha, i)] = ee.column(i).dot(&y.column(i));
        }
    }
    weights
}

fn cp_residual(flat: &DMatrix<f64>, ef: &DMatrix<f64>, ee: &DMatrix<f64>, weights: &DMatrix<f64>) -> f64 {
    let n = ee.nrows();
    let w = ef.kronecker(ee);
    let scaled = DMatrix::from_fn(w.nrows(), w.ncols(), |r, c| w[(r, c)] * weights[(c / n, c % n)]);
    (flat - scaled * w.transpose()).norm()
}

/// Ascent direction for `Σ_k Σ_col (uᵀ B̃_k u)²` where `B̃_k = B_k + shift·I`
/// is positive semidefinite; its polar factor never decreases the objective.
fn shifted_gradient(basis: &DMatrix<f64>, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let size = basis.nrows();
    let shift = mats.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let mut grad = DMatrix::zeros(size, size);
    for mat in mats {
        let shifted = mat + DMatrix::identity(size, size) * shift;
        let y = &shifted * basis;
        for col in 0..size {
            let q = basis.column(col).dot(&y.column(col));
            let mut g = grad.column_mut(col);
            g.axpy(q, &y.column(col), 1.0);
        }
    }
    grad
}

/// Orthogonal CP by alternating polar updates, initialized from HOSVD.
///
/// Each sweep updates `E_f` with `E_e` fixed, then `E_e` with `E_f` fixed;
/// `λ_{αi} = ⟨F, f_α∘e_i∘f_α∘e_i⟩`. Stops after `max_iter` sweeps or when the
/// residual changes by less than `tol` relative to `‖F‖_F`. Hitting the
/// iteration cap is not an error.
pub fn orthogonal_cp(f: &Tensor4, options: CpOptions) -> Result<CpFactorization> {
    let init = hosvd_basis(f)?;
    let (m, n) = f.mlg_dims()?;
    let flat = f.flatten()?;
    let norm_sq = flat.norm_squared();
    let norm = norm_sq.sqrt();

    let mut ef = init.layer_basis;
    let mut ee = init.entity_basis;
    let mut weights = cp_weights(&flat, &ef, &ee);
    let initial_residual = cp_residual(&flat, &ef, &ee, &weights);
    let mut objective = weights.norm_squared();
    let mut history = vec![initial_residual];
    let mut iterations = 0;
    let mut converged = norm == 0.0;

    while !converged && iterations < options.max_iter {
        let b = entity_contractions(&flat, &ee, m);
        let ef_next = polar_factor(&shifted_gradient(&ef, &b));
        let c = layer_contractions(&flat, &ef_next, n);
        let ee_next = polar_factor(&shifted_gradient(&ee, &c));
        let weights_next = cp_weights(&flat, &ef_next, &ee_next);
        let objective_next = weights_next.norm_squared();
        if objective_next < objective - 1e-12 * norm_sq {
            break;
        }
        iterations += 1;
        let prev = (norm_sq - objective).max(0.0).sqrt();
        let next = (norm_sq - objective_next).max(0.0).sqrt();
        ef = ef_next;
        ee = ee_next;
        weights = weights_next;
        objective = objective_next;
        history.push(next.min(*history.last().unwrap()));
        if (prev - next).abs() <= options.tol * norm {
            converged = true;
        }
    }

    let mut residual = cp_residual(&flat, &ef, &ee, &weights);
    if residual > initial_residual {
        // accepted sweeps only raise Σλ²; keep the initialization on round-off
        let base = hosvd_basis(f)?;
        ef = base.layer_basis;
        ee = base.entity_basis;
        weights = cp_weights(&flat, &ef, &ee);
        residual = initial_residual;
    }

    let layer_energy: Vec<f64> = (0..m).map(|a| weights.row(a).norm()).collect();
    let entity_energy: Vec<f64> = (0..n).map(|i| weights.column(i).norm()).collect();
    let row_order = canonical_order(&layer_energy, &mut ef);
    let col_order = canonical_order(&entity_energy, &mut ee);
    let weights = DMatrix::from_fn(m, n, |r, c| weights[(row_order[r], col_order[c])]);
    let basis = SpectralBasis::new(
        ef,
        ee,
        row_order.iter().map(|&k| layer_energy[k]).collect(),
        col_order.iter().map(|&k| entity_energy[k]).collect(),
        BasisKind::Cp,
    )?;
    if let Some(last) = history.last_mut() {
        *last = last.min(residual);
    }

    Ok(CpFactorization {
        weights,
        basis,
        residual,
        initial_residual,
        iterations,
        converged,
        history,
    })
}

/// Eigenbasis of a symmetric single-layer graph matrix, columns ordered by
/// eigenvalue magnitude descending.
pub fn graph_fourier_basis(matrix: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (values, mut vectors) = symmetric_eigen(matrix);
    let magnitude: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let order = canonical_order(&magnitude, &mut vectors);
    (order.iter().map(|&k| values[k]).collect(), vectors)
}
