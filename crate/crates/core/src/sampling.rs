//! Vertex-domain sampling/interpolation and spectral-domain lossy sampling.
//!
//! Spectral sampling transforms a signal, reorders the coefficients so that
//! the important ones gather in the top-left corner, keeps a prefix of them
//! according to a [`SampleShape`], zero-fills the rest and inverts:
//!
//! * block-wise keeps the top-left `P×Q` block,
//! * layer-wise keeps the first `K` coefficients in row-major order (dropping
//!   whole layers from the bottom, right to left inside a layer),
//! * entity-wise keeps the first `K` coefficients in column-major order.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MgspError, Result};
use crate::spectra::{imgft, mgft, BasisKind, SpectralBasis};
use crate::tensor::MlgSignal;

/// Ordered layer and entity indices (0-based) picked by vertex sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionPair {
    layers: Vec<usize>,
    entities: Vec<usize>,
    total_layers: usize,
    total_entities: usize,
}

fn check_indices(idx: &[usize], bound: usize, what: &str) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&v| v >= bound) {
        return Err(MgspError::param(format!(
            "{what} index {} out of range 1..{bound}",
            bad + 1
        )));
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MgspError::param(format!(
            "{what} indices must be strictly increasing"
        )));
    }
    Ok(())
}

impl SelectionPair {
    pub fn new(layers: Vec<usize>, entities: Vec<usize>, total_layers: usize, total_entities: usize) -> Result<Self> {
        check_indices(&layers, total_layers, "layer")?;
        check_indices(&entities, total_entities, "entity")?;
        Ok(SelectionPair {
            layers,
            entities,
            total_layers,
            total_entities,
        })
    }

    pub fn full(total_layers: usize, total_entities: usize) -> Self {
        SelectionPair {
            layers: (0..total_layers).collect(),
            entities: (0..total_entities).collect(),
            total_layers,
            total_entities,
        }
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn entities(&self) -> &[usize] {
        &self.entities
    }

    fn operator(picked: &[usize], total: usize) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(picked.len(), total);
        for (row, &col) in picked.iter().enumerate() {
            s[(row, col)] = 1.0;
        }
        s
    }

    /// `S_P ∈ {0,1}^{P×M}` with `[S_P]_{a,p_a} = 1`.
    pub fn layer_operator(&self) -> DMatrix<f64> {
        Self::operator(&self.layers, self.total_layers)
    }

    /// `S_Q ∈ {0,1}^{Q×N}` with `[S_Q]_{b,q_b} = 1`.
    pub fn entity_operator(&self) -> DMatrix<f64> {
        Self::operator(&self.entities, self.total_entities)
    }
}

/// `s_D = s ×₁ S_P ×₂ S_Q`.
pub fn vertex_sample(s: &MlgSignal, sel: &SelectionPair) -> Result<DMatrix<f64>> {
    if (s.layers(), s.entities()) != (sel.total_layers, sel.total_entities) {
        return Err(MgspError::shape(
            "vertex_sample",
            format!("{}x{}", sel.total_layers, sel.total_entities),
            format!("{}x{}", s.layers(), s.entities()),
        ));
    }
    let rows = MlgSignal::from_matrix(s.mode_product(&sel.layer_operator(), 0)?);
    rows.mode_product(&sel.entity_operator(), 1)
}

/// Interpolation matrices `T_M ∈ ℝ^{M×P}` and `T_N ∈ ℝ^{N×Q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationPair {
    pub layer: DMatrix<f64>,
    pub entity: DMatrix<f64>,
}

impl InterpolationPair {
    /// Zero-fill interpolation `T_M = S_Pᵀ`, `T_N = S_Qᵀ`.
    pub fn zero_fill(sel: &SelectionPair) -> Self {
        InterpolationPair {
            layer: sel.layer_operator().transpose(),
            entity: sel.entity_operator().transpose(),
        }
    }
}

/// `s_R = s_D ×₁ T_M ×₂ T_N`.
pub fn vertex_interpolate(sampled: &DMatrix<f64>, ip: &InterpolationPair) -> Result<MlgSignal> {
    if ip.layer.ncols() != sampled.nrows() || ip.entity.ncols() != sampled.ncols() {
        return Err(MgspError::shape(
            "vertex_interpolate",
            format!("{}x{}", ip.layer.ncols(), ip.entity.ncols()),
            format!("{}x{}", sampled.nrows(), sampled.ncols()),
        ));
    }
    let sd = MlgSignal::from_matrix(sampled.clone());
    let rows = MlgSignal::from_matrix(sd.mode_product(&ip.layer, 0)?);
    Ok(MlgSignal::from_matrix(rows.mode_product(&ip.entity, 1)?))
}

/// Rule used to reorder transformed coefficients before truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientOrdering {
    /// Layers by `|γ_α|`, entities by `|σ_i|`, both descending.
    SpectralValue,
    /// Rows and columns of `ŝ` by L2 energy, descending.
    #[default]
    CoefficientEnergy,
}

/// Which coefficients survive, expressed on the reordered `ŝ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "direction", rename_all = "kebab-case")]
pub enum SampleShape {
    LayerWise { count: usize },
    EntityWise { count: usize },
    BlockWise { layers: usize, entities: usize },
}

impl SampleShape {
    pub fn kept_count(&self) -> usize {
        match *self {
            SampleShape::LayerWise { count } | SampleShape::EntityWise { count } => count,
            SampleShape::BlockWise { layers, entities } => layers * entities,
        }
    }

    pub fn direction_name(&self) -> &'static str {
        match self {
            SampleShape::LayerWise { .. } => "layer-wise",
            SampleShape::EntityWise { .. } => "entity-wise",
            SampleShape::BlockWise { .. } => "block-wise",
        }
    }

    fn validate(&self, m: usize, n: usize) -> Result<()> {
        let ok = match *self {
            SampleShape::LayerWise { count } | SampleShape::EntityWise { count } => count <= m * n,
            SampleShape::BlockWise { layers, entities } => layers <= m && entities <= n,
        };
        if ok {
            Ok(())
        } else {
            Err(MgspError::param(format!(
                "{} keeps {:?}, more than the {m}x{n} signal holds",
                self.direction_name(),
                self
            )))
        }
    }

    /// Whether reordered position `(a, b)` is kept.
    fn keeps(&self, a: usize, b: usize, m: usize, n: usize) -> bool {
        match *self {
            SampleShape::BlockWise { layers, entities } => a < layers && b < entities,
            SampleShape::LayerWise { count } => a * n + b < count,
            SampleShape::EntityWise { count } => b * m + a < count,
        }
    }
}

/// Kept count over total signal size.
pub fn sampling_fraction(shape: &SampleShape, m: usize, n: usize) -> f64 {
    if m * n == 0 {
        return 0.0;
    }
    shape.kept_count() as f64 / (m * n) as f64
}

/// Ordering permutations plus the truncation shape.
///
/// `row_perm[a]` is the original layer placed at reordered row `a`;
/// likewise `col_perm` for entities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub ordering: CoefficientOrdering,
    pub shape: SampleShape,
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&v| v < seen.len() && !std::mem::replace(&mut seen[v], true))
}

fn descending_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

/// Reordering permutations for `ŝ` under `ordering`; ties keep the lower
/// original index first.
pub fn order_coefficients(
    s_hat: &MlgSignal,
    basis: &SpectralBasis,
    ordering: CoefficientOrdering,
) -> (Vec<usize>, Vec<usize>) {
    match ordering {
        CoefficientOrdering::SpectralValue => (
            descending_order(&basis.layer_values.iter().map(|v| v.abs()).collect::<Vec<_>>()),
            descending_order(&basis.entity_values.iter().map(|v| v.abs()).collect::<Vec<_>>()),
        ),
        CoefficientOrdering::CoefficientEnergy => {
            let rows: Vec<f64> = (0..s_hat.layers()).map(|r| s_hat.row(r).norm()).collect();
            let cols: Vec<f64> = (0..s_hat.entities()).map(|c| s_hat.column(c).norm()).collect();
            (descending_order(&rows), descending_order(&cols))
        }
    }
}

impl SamplingPlan {
    pub fn new(
        ordering: CoefficientOrdering,
        shape: SampleShape,
        row_perm: Vec<usize>,
        col_perm: Vec<usize>,
    ) -> Result<Self> {
        if !is_permutation(&row_perm) || !is_permutation(&col_perm) {
            return Err(MgspError::param("plan permutations must be bijections"));
        }
        shape.validate(row_perm.len(), col_perm.len())?;
        Ok(SamplingPlan {
            ordering,
            shape,
            row_perm,
            col_perm,
        })
    }

    /// Builds the plan for an already transformed signal.
    pub fn for_coefficients(
        s_hat: &MlgSignal,
        basis: &SpectralBasis,
        ordering: CoefficientOrdering,
        shape: SampleShape,
    ) -> Result<Self> {
        let (row_perm, col_perm) = order_coefficients(s_hat, basis, ordering);
        SamplingPlan::new(ordering, shape, row_perm, col_perm)
    }

    pub fn layers(&self) -> usize {
        self.row_perm.len()
    }

    pub fn entities(&self) -> usize {
        self.col_perm.len()
    }

    pub fn fraction(&self) -> f64 {
        sampling_fraction(&self.shape, self.layers(), self.entities())
    }

    /// Kept mask in original coefficient coordinates.
    pub fn mask(&self) -> DMatrix<bool> {
        let (m, n) = (self.layers(), self.entities());
        let mut mask = DMatrix::from_element(m, n, false);
        for a in 0..m {
            for b in 0..n {
                if self.shape.keeps(a, b, m, n) {
                    mask[(self.row_perm[a], self.col_perm[b])] = true;
                }
            }
        }
        mask
    }
}

/// One retained transform coefficient, in original (unpermuted) coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeptCoefficient {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub plan: SamplingPlan,
    /// Kept coefficients in reordered scan order of the plan.
    pub kept: Vec<KeptCoefficient>,
    /// `ŝ_D`: the kept top-left block for block-wise plans.
    pub block: Option<DMatrix<f64>>,
    pub recovered: MlgSignal,
    /// `‖s − s_R‖_F / ‖s‖_F` (0 for a zero signal).
    pub relative_error: f64,
}

/// Algorithm: transform, reorder, truncate, zero-fill, invert.
pub fn spectral_sample(
    s: &MlgSignal,
    basis: &SpectralBasis,
    ordering: CoefficientOrdering,
    shape: SampleShape,
) -> Result<SampleOutcome> {
    let s_hat = mgft(s, basis)?;
    let plan = SamplingPlan::for_coefficients(&s_hat, basis, ordering, shape)?;
    sample_transformed(s, &s_hat, basis, plan)
}

/// Same as [`spectral_sample`] with fixed permutations.
pub fn spectral_sample_with_plan(
    s: &MlgSignal,
    basis: &SpectralBasis,
    plan: SamplingPlan,
) -> Result<SampleOutcome> {
    let s_hat = mgft(s, basis)?;
    if (plan.layers(), plan.entities()) != (s.layers(), s.entities()) {
        return Err(MgspError::shape(
            "sampling plan",
            format!("{}x{}", s.layers(), s.entities()),
            format!("{}x{}", plan.layers(), plan.entities()),
        ));
    }
    sample_transformed(s, &s_hat, basis, plan)
}

fn sample_transformed(
    s: &MlgSignal,
    s_hat: &MlgSignal,
    basis: &SpectralBasis,
    plan: SamplingPlan,
) -> Result<SampleOutcome> {
    let (m, n) = (s.layers(), s.entities());
    let mut kept = Vec::with_capacity(plan.shape.kept_count());
    let scan: Box<dyn Iterator<Item = (usize, usize)>> = match plan.shape {
        SampleShape::EntityWise { .. } => Box::new((0..n).flat_map(|b| (0..m).map(move |a| (a, b)))),
        _ => Box::new((0..m).flat_map(|a| (0..n).map(move |b| (a, b)))),
    };
    for (a, b) in scan {
        if plan.shape.keeps(a, b, m, n) {
            let (row, col) = (plan.row_perm[a], plan.col_perm[b]);
            kept.push(KeptCoefficient {
                row,
                col,
                value: s_hat[(row, col)],
            });
        }
    }
    let block = match plan.shape {
        SampleShape::BlockWise { layers, entities } => Some(DMatrix::from_fn(layers, entities, |a, b| {
            s_hat[(plan.row_perm[a], plan.col_perm[b])]
        })),
        _ => None,
    };
    let recovered = recover(m, n, &kept, basis)?;
    let norm = s.norm();
    let relative_error = if norm == 0.0 {
        0.0
    } else {
        (s.matrix() - recovered.matrix()).norm() / norm
    };
    Ok(SampleOutcome {
        plan,
        kept,
        block,
        recovered,
        relative_error,
    })
}

/// Zero-fills the kept coefficients and applies the inverse transform.
pub fn recover(m: usize, n: usize, kept: &[KeptCoefficient], basis: &SpectralBasis) -> Result<MlgSignal> {
    let mut filled = MlgSignal::zeros(m, n);
    for c in kept {
        if c.row >= m || c.col >= n {
            return Err(MgspError::param(format!(
                "coefficient ({}, {}) outside {m}x{n}",
                c.row, c.col
            )));
        }
        filled[(c.row, c.col)] = c.value;
    }
    imgft(&filled, basis)
}

#[derive(Serialize, Deserialize)]
struct PayloadHeader {
    format: String,
    version: u32,
    layers: usize,
    entities: usize,
    basis: BasisKind,
    index_base: usize,
    plan: SamplingPlan,
}

/// Self-describing compressed signal: plan plus kept coefficients.
///
/// On disk: one JSON header line, then a `row,col,value` CSV block with
/// 0-based indices into the transformed signal.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedSignal {
    pub layers: usize,
    pub entities: usize,
    pub basis_kind: BasisKind,
    pub plan: SamplingPlan,
    pub coefficients: Vec<KeptCoefficient>,
}

const PAYLOAD_FORMAT: &str = "mgsp-compressed";

impl CompressedSignal {
    pub fn from_outcome(outcome: &SampleOutcome, basis_kind: BasisKind) -> Self {
        CompressedSignal {
            layers: outcome.plan.layers(),
            entities: outcome.plan.entities(),
            basis_kind,
            plan: outcome.plan.clone(),
            coefficients: outcome.kept.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = PayloadHeader {
            format: PAYLOAD_FORMAT.into(),
            version: 1,
            layers: self.layers,
            entities: self.entities,
            basis: self.basis_kind,
            index_base: 0,
            plan: self.plan.clone(),
        };
        let line = serde_json::to_string(&header).map_err(|e| MgspError::Parse(e.to_string()))?;
        let mut out = String::with_capacity(line.len() + 32 * self.coefficients.len());
        out.push_str(&line);
        out.push_str("\nrow,col,value\n");
        for c in &self.coefficients {
            out.push_str(&format!("{},{},{}\n", c.row, c.col, c.value));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let head = lines
            .next()
            .ok_or_else(|| MgspError::Parse("empty payload".into()))??;
        let header: PayloadHeader =
            serde_json::from_str(&head).map_err(|e| MgspError::Parse(format!("payload header: {e}")))?;
        if header.format != PAYLOAD_FORMAT {
            return Err(MgspError::Parse(format!("unknown payload format {}", header.format)));
        }
        let plan = SamplingPlan::new(
            header.plan.ordering,
            header.plan.shape,
            header.plan.row_perm,
            header.plan.col_perm,
        )?;
        if (plan.layers(), plan.entities()) != (header.layers, header.entities) {
            return Err(MgspError::Parse("plan does not match payload dimensions".into()));
        }
        match lines.next() {
            Some(Ok(h)) if h.trim() == "row,col,value" => {}
            _ => return Err(MgspError::Parse("missing coefficient header".into())),
        }
        let mut coefficients = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || MgspError::Parse(format!("coefficient line {}: {line}", k + 1));
            let mut parts = line.split(',');
            let mut next = || parts.next().map(str::trim).ok_or_else(bad);
            let row: usize = next()?.parse().map_err(|_| bad())?;
            let col: usize = next()?.parse().map_err(|_| bad())?;
            let value: f64 = next()?.parse().map_err(|_| bad())?;
            if row >= header.layers || col >= header.entities {
                return Err(bad());
            }
            coefficients.push(KeptCoefficient { row, col, value });
        }
        Ok(CompressedSignal {
            layers: header.layers,
            entities: header.entities,
            basis_kind: header.basis,
            plan,
            coefficients,
        })
    }

    pub fn decode(&self, basis: &SpectralBasis) -> Result<MlgSignal> {
        if basis.kind != self.basis_kind {
            return Err(MgspError::param(format!(
                "payload encoded with {:?} basis, got {:?}",
                self.basis_kind, basis.kind
            )));
        }
        recover(self.layers, self.entities, &self.coefficients, basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::outer_rank1;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_basis(m: usize, n: usize, rng: &mut ChaCha8Rng) -> SpectralBasis {
        let qf = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let qe = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let mut lv: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
        let mut ev: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        lv.sort_by(|a, b| b.total_cmp(a));
        ev.sort_by(|a, b| b.total_cmp(a));
        SpectralBasis::new(qf, qe, lv, ev, BasisKind::Hosvd).unwrap()
    }

    fn random_signal(m: usize, n: usize, rng: &mut ChaCha8Rng) -> MlgSignal {
        MlgSignal::from_matrix(DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)))
    }

    /// Transform, mask, and invert with explicit loops.
    fn mask_oracle(s: &MlgSignal, basis: &SpectralBasis, mask: &DMatrix<bool>) -> DMatrix<f64> {
        let (m, n) = (s.layers(), s.entities());
        let (ef, ee) = (&basis.layer_basis, &basis.entity_basis);
        let mut hat = DMatrix::zeros(m, n);
        for a in 0..m {
            for i in 0..n {
                let mut acc = 0.0;
                for b in 0..m {
                    for j in 0..n {
                        acc += ef[(b, a)] * s[(b, j)] * ee[(j, i)];
                    }
                }
                hat[(a, i)] = if mask[(a, i)] { acc } else { 0.0 };
            }
        }
        let mut out = DMatrix::zeros(m, n);
        for b in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..m {
                    for i in 0..n {
                        acc += ef[(b, a)] * hat[(a, i)] * ee[(j, i)];
                    }
                }
                out[(b, j)] = acc;
            }
        }
        out
    }

    #[test]
    fn vertex_sample_cases() {
        let s = MlgSignal::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let sel = SelectionPair::new(vec![0], vec![1], 2, 2).unwrap();
        assert_eq!(vertex_sample(&s, &sel).unwrap(), DMatrix::from_element(1, 1, 2.0));
        assert_eq!(vertex_sample(&s, &SelectionPair::full(2, 2)).unwrap(), *s.matrix());

        let s = MlgSignal::from_matrix(DMatrix::from_fn(3, 4, |r, c| (r * 10 + c) as f64));
        let sel = SelectionPair::new(vec![0, 2], vec![1, 3], 3, 4).unwrap();
        let got = vertex_sample(&s, &sel).unwrap();
        for (a, &p) in sel.layers().iter().enumerate() {
            for (b, &q) in sel.entities().iter().enumerate() {
                assert_eq!(got[(a, b)], s[(p, q)]);
            }
        }
    }

    #[test]
    fn selection_validation() {
        assert!(SelectionPair::new(vec![0, 3], vec![0], 3, 2).is_err());
        assert!(SelectionPair::new(vec![1, 1], vec![0], 3, 2).is_err());
        assert!(SelectionPair::new(vec![2, 1], vec![0], 3, 2).is_err());
    }

    #[test]
    fn zero_fill_interpolation() {
        let s = MlgSignal::from_matrix(DMatrix::from_fn(3, 4, |r, c| 1.0 + (r * 4 + c) as f64));
        let sel = SelectionPair::new(vec![1, 2], vec![0, 3], 3, 4).unwrap();
        let sd = vertex_sample(&s, &sel).unwrap();
        let sr = vertex_interpolate(&sd, &InterpolationPair::zero_fill(&sel)).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                let picked = sel.layers().contains(&r) && sel.entities().contains(&c);
                assert_eq!(sr[(r, c)], if picked { s[(r, c)] } else { 0.0 });
            }
        }
        // sampling the interpolation again reproduces s_D
        assert_eq!(vertex_sample(&sr, &sel).unwrap(), sd);

        let ip = InterpolationPair {
            layer: DMatrix::identity(3, 3),
            entity: DMatrix::identity(4, 4),
        };
        assert_eq!(vertex_interpolate(s.matrix(), &ip).unwrap(), s);
        assert!(vertex_interpolate(&DMatrix::zeros(2, 2), &ip).is_err());
    }

    #[test]
    fn bandlimited_signal_recovers_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = random_basis(3, 5, &mut rng);
        let s = outer_rank1(
            &DVector::from_column_slice(basis.layer_basis.column(0).as_slice()),
            &DVector::from_column_slice(basis.entity_basis.column(0).as_slice()),
        );
        let s = MlgSignal::from_matrix(s.into_matrix() * 2.5);
        let out = spectral_sample(
            &s,
            &basis,
            CoefficientOrdering::CoefficientEnergy,
            SampleShape::BlockWise { layers: 1, entities: 1 },
        )
        .unwrap();
        assert!(out.relative_error < 1e-12);
        assert_eq!(out.kept.len(), 1);
        assert_eq!((out.kept[0].row, out.kept[0].col), (0, 0));
    }

    #[test]
    fn energy_ordering_example() {
        let hat = MlgSignal::from_row_slice(2, 2, &[0.0, 3.0, 5.0, 1.0]);
        let basis = SpectralBasis::identity(2, 2);
        let (rows, cols) = order_coefficients(&hat, &basis, CoefficientOrdering::CoefficientEnergy);
        assert_eq!(rows, vec![1, 0]);
        assert_eq!(cols, vec![0, 1]);

        let sorted = MlgSignal::from_row_slice(2, 3, &[9.0, 4.0, 1.0, 3.0, 2.0, 0.5]);
        let (rows, cols) =
            order_coefficients(&sorted, &SpectralBasis::identity(2, 3), CoefficientOrdering::CoefficientEnergy);
        assert_eq!(rows, vec![0, 1]);
        assert_eq!(cols, vec![0, 1, 2]);

        let tied = MlgSignal::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let (rows, cols) = order_coefficients(&tied, &basis, CoefficientOrdering::CoefficientEnergy);
        assert_eq!(rows, vec![0, 1]);
        assert_eq!(cols, vec![0, 1]);
    }

    #[test]
    fn spectral_value_ordering_uses_magnitudes() {
        let mut basis = SpectralBasis::identity(3, 2);
        basis.layer_values = vec![1.0, -4.0, 2.0];
        basis.entity_values = vec![0.5, 0.5];
        let (rows, cols) = order_coefficients(&MlgSignal::zeros(3, 2), &basis, CoefficientOrdering::SpectralValue);
        assert_eq!(rows, vec![1, 2, 0]);
        assert_eq!(cols, vec![0, 1]);
    }

    #[test]
    fn keep_everything_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = random_basis(3, 7, &mut rng);
        let s = random_signal(3, 7, &mut rng);
        for shape in [
            SampleShape::BlockWise { layers: 3, entities: 7 },
            SampleShape::LayerWise { count: 21 },
            SampleShape::EntityWise { count: 21 },
        ] {
            let out = spectral_sample(&s, &basis, CoefficientOrdering::CoefficientEnergy, shape).unwrap();
            assert!(out.relative_error <= 1e-9);
            assert_eq!(out.plan.fraction(), 1.0);
        }
    }

    #[test]
    fn oversized_plans_are_rejected() {
        let basis = SpectralBasis::identity(2, 3);
        let s = MlgSignal::zeros(2, 3);
        for shape in [
            SampleShape::LayerWise { count: 7 },
            SampleShape::BlockWise { layers: 3, entities: 1 },
        ] {
            let err = spectral_sample(&s, &basis, CoefficientOrdering::SpectralValue, shape).unwrap_err();
            assert!(matches!(err, MgspError::InvalidParameter(_)));
        }
        assert!(SamplingPlan::new(
            CoefficientOrdering::SpectralValue,
            SampleShape::LayerWise { count: 1 },
            vec![0, 0],
            vec![0, 1, 2],
        )
        .is_err());
    }

    #[test]
    fn fractions() {
        assert_eq!(sampling_fraction(&SampleShape::LayerWise { count: 768 }, 3, 256), 1.0);
        assert_eq!(sampling_fraction(&SampleShape::LayerWise { count: 384 }, 3, 256), 0.5);
        assert_eq!(
            sampling_fraction(&SampleShape::BlockWise { layers: 2, entities: 128 }, 3, 256),
            256.0 / 768.0
        );
    }

    #[test]
    fn directions_scan_in_documented_order() {
        let hat = MlgSignal::from_row_slice(2, 3, &[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let basis = SpectralBasis::identity(2, 3);
        let layer = spectral_sample(&hat, &basis, CoefficientOrdering::SpectralValue, SampleShape::LayerWise { count: 4 })
            .unwrap();
        let kept: Vec<(usize, usize)> = layer.kept.iter().map(|c| (c.row, c.col)).collect();
        assert_eq!(kept, vec![(0, 0), (0, 1), (0, 2), (1, 0)]);
        let entity =
            spectral_sample(&hat, &basis, CoefficientOrdering::SpectralValue, SampleShape::EntityWise { count: 3 })
                .unwrap();
        let kept: Vec<(usize, usize)> = entity.kept.iter().map(|c| (c.row, c.col)).collect();
        assert_eq!(kept, vec![(0, 0), (1, 0), (0, 1)]);
    }

    #[test]
    fn block_fractions_on_random_3x256() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let basis = random_basis(3, 256, &mut rng);
        let s = random_signal(3, 256, &mut rng);
        let mut last = -1.0;
        for q in [64usize, 128, 256] {
            let shape = SampleShape::BlockWise { layers: 3, entities: q };
            let plan = SamplingPlan::for_coefficients(&mgft(&s, &basis).unwrap(), &basis, CoefficientOrdering::CoefficientEnergy, shape)
                .unwrap();
            let out = spectral_sample_with_plan(&s, &basis, plan.clone()).unwrap();
            let oracle = mask_oracle(&s, &basis, &plan.mask());
            assert!((out.recovered.matrix() - &oracle).amax() < 1e-12);
            if last >= 0.0 {
                assert!(out.relative_error <= last + 1e-15);
            }
            last = out.relative_error;
        }
        assert!(last < 1e-9);
    }

    #[test]
    fn payload_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let basis = random_basis(3, 6, &mut rng);
        let s = random_signal(3, 6, &mut rng);
        let out = spectral_sample(&s, &basis, CoefficientOrdering::CoefficientEnergy, SampleShape::EntityWise { count: 7 })
            .unwrap();
        let payload = CompressedSignal::from_outcome(&out, BasisKind::Hosvd);
        let mut buf = Vec::new();
        payload.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with('{'));
        assert_eq!(text.lines().count(), 2 + 7);
        let back = CompressedSignal::read_from(&buf[..]).unwrap();
        assert_eq!(back, payload);
        assert_eq!(back.decode(&basis).unwrap(), out.recovered);
    }

    proptest! {
        #[test]
        fn matches_mask_oracle_all_plans(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = random_basis(4, 6, &mut rng);
            let s = random_signal(4, 6, &mut rng);
            let count = rng.gen_range(0..=24);
            let (p, q) = (rng.gen_range(0..=4), rng.gen_range(0..=6));
            for ordering in [CoefficientOrdering::SpectralValue, CoefficientOrdering::CoefficientEnergy] {
                for shape in [
                    SampleShape::LayerWise { count },
                    SampleShape::EntityWise { count },
                    SampleShape::BlockWise { layers: p, entities: q },
                ] {
                    let out = spectral_sample(&s, &basis, ordering, shape).unwrap();
                    let oracle = mask_oracle(&s, &basis, &out.plan.mask());
                    prop_assert!((out.recovered.matrix() - oracle).amax() < 1e-12);
                    prop_assert_eq!(out.kept.len(), shape.kept_count());
                }
            }
        }

        #[test]
        fn error_non_increasing_in_kept_count(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = random_basis(3, 5, &mut rng);
            let s = random_signal(3, 5, &mut rng);
            let hat = mgft(&s, &basis).unwrap();
            let mut last = f64::INFINITY;
            for count in 0..=15 {
                let plan = SamplingPlan::for_coefficients(
                    &hat, &basis, CoefficientOrdering::CoefficientEnergy, SampleShape::LayerWise { count },
                ).unwrap();
                let err = spectral_sample_with_plan(&s, &basis, plan).unwrap().relative_error;
                prop_assert!(err <= last + 1e-12);
                last = err;
            }
        }

        #[test]
        fn single_coefficient_block_is_maximal(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = SpectralBasis::identity(3, 4);
            // rank-1 magnitudes make the row/column energy argmax the global argmax
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = MlgSignal::from_matrix(DMatrix::from_fn(3, 4, |r, c| u[r] * v[c]));
            let out = spectral_sample(&s, &basis, CoefficientOrdering::CoefficientEnergy,
                SampleShape::BlockWise { layers: 1, entities: 1 }).unwrap();
            let best = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!((out.kept[0].value.abs() - best).abs() < 1e-15);
        }
    }
}
