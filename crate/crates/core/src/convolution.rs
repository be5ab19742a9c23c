//! Spectral convolution on MLGs, localization kernels, window smoothing and
//! threshold edge detection.
//!
//! Window nodes are numbered row-major inside the `k×k` window; for RGB the
//! layers are R, G, B in that order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::grid_mlg;
use crate::error::{MgspError, Result};
use crate::imageio::GrayImage;
use crate::mlg::Representation;
use crate::spectra::{hosvd_basis, imgft, mgft, SpectralBasis};
use crate::tensor::MlgSignal;

/// `x ⋆ y = imgft(mgft(x) ∘ mgft(y))`.
pub fn mlg_convolve(x: &MlgSignal, y: &MlgSignal, basis: &SpectralBasis) -> Result<MlgSignal> {
    let xh = mgft(x, basis)?;
    let yh = mgft(y, basis)?;
    imgft(&MlgSignal::from_matrix(xh.component_mul(yh.matrix())), basis)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelVariant {
    /// Center node of the middle layer.
    C1,
    /// Center node of every layer.
    C2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderPolicy {
    Replicate,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub size: usize,
    pub layers: usize,
    pub stride: usize,
    pub border: BorderPolicy,
}

impl WindowSpec {
    pub fn new(size: usize, layers: usize) -> Result<Self> {
        let spec = WindowSpec {
            size,
            layers,
            stride: 1,
            border: BorderPolicy::Replicate,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.size % 2 == 0 {
            return Err(MgspError::param(format!("window size must be odd, got {}", self.size)));
        }
        if self.layers == 0 || self.stride == 0 {
            return Err(MgspError::param("window needs at least one layer and a positive stride"));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.size * self.size
    }

    pub fn center(&self) -> usize {
        (self.nodes() - 1) / 2
    }
}

/// Indicator kernel over the window MLG.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub values: MlgSignal,
    /// Active `(layer, node)` positions.
    pub active: Vec<(usize, usize)>,
}

pub fn make_localization_kernel(spec: &WindowSpec, variant: KernelVariant) -> Result<Kernel> {
    spec.validate()?;
    let center = spec.center();
    let active: Vec<(usize, usize)> = match variant {
        KernelVariant::C1 => vec![(spec.layers / 2, center)],
        KernelVariant::C2 => (0..spec.layers).map(|l| (l, center)).collect(),
    };
    let mut values = MlgSignal::zeros(spec.layers, spec.nodes());
    for &(l, n) in &active {
        values[(l, n)] = 1.0;
    }
    Ok(Kernel { values, active })
}

/// HOSVD basis of the window MLG (4-neighbor grid per layer, counterpart
/// interlayer edges, Laplacian representation).
pub fn window_basis(spec: &WindowSpec) -> Result<SpectralBasis> {
    spec.validate()?;
    let g = grid_mlg(spec.size, spec.size, spec.layers, Representation::Laplacian)?;
    hosvd_basis(g.representing_tensor())
}

/// Multi-plane raster (one row-major plane per layer).
#[derive(Clone, Copy, Debug)]
pub struct Planes<'a> {
    pub planes: &'a [Vec<f64>],
    pub height: usize,
    pub width: usize,
}

impl Planes<'_> {
    fn sample(&self, layer: usize, r: isize, c: isize, border: BorderPolicy) -> f64 {
        let (h, w) = (self.height as isize, self.width as isize);
        if (0..h).contains(&r) && (0..w).contains(&c) {
            return self.planes[layer][(r * w + c) as usize];
        }
        match border {
            BorderPolicy::Replicate => self.planes[layer][(r.clamp(0, h - 1) * w + c.clamp(0, w - 1)) as usize],
            BorderPolicy::Zero => 0.0,
        }
    }

    fn window(&self, spec: &WindowSpec, r: usize, c: usize) -> MlgSignal {
        let half = (spec.size / 2) as isize;
        let mut s = MlgSignal::zeros(spec.layers, spec.nodes());
        for l in 0..spec.layers {
            for dr in 0..spec.size {
                for dc in 0..spec.size {
                    let rr = r as isize + dr as isize - half;
                    let cc = c as isize + dc as isize - half;
                    s[(l, dr * spec.size + dc)] = self.sample(l, rr, cc, spec.border);
                }
            }
        }
        s
    }
}

/// Mean of `mlg_convolve(window, kernel)` over all window entries.
fn window_mean(window: &MlgSignal, kernel: &Kernel, basis: &SpectralBasis) -> Result<f64> {
    let out = mlg_convolve(window, &kernel.values, basis)?;
    Ok(out.mean())
}

/// Smoothed single-channel image: each output pixel is the mean of the
/// convolution outputs of the window centered on it.
///
/// With `normalize_dc` the result is divided by the same quantity computed
/// on an all-ones window, so constant images map to themselves exactly.
pub fn smooth_image(
    planes: Planes<'_>,
    spec: &WindowSpec,
    kernel: &Kernel,
    basis: &SpectralBasis,
    normalize_dc: bool,
) -> Result<GrayImage> {
    spec.validate()?;
    if planes.planes.len() != spec.layers || planes.planes.iter().any(|p| p.len() != planes.height * planes.width) {
        return Err(MgspError::shape(
            "smooth_image planes",
            format!("{} planes of {}", spec.layers, planes.height * planes.width),
            format!("{} planes", planes.planes.len()),
        ));
    }
    if planes.height < spec.size || planes.width < spec.size {
        return Err(MgspError::param(format!(
            "{}x{} image is smaller than the {k}x{k} window",
            planes.height,
            planes.width,
            k = spec.size
        )));
    }
    if kernel.values.shape() != (spec.layers, spec.nodes()) {
        return Err(MgspError::shape(
            "kernel",
            format!("{}x{}", spec.layers, spec.nodes()),
            format!("{}x{}", kernel.values.nrows(), kernel.values.ncols()),
        ));
    }
    let scale = if normalize_dc {
        let ones = MlgSignal::from_matrix(nalgebra::DMatrix::from_element(spec.layers, spec.nodes(), 1.0));
        let dc = window_mean(&ones, kernel, basis)?;
        if dc.abs() < 1e-12 {
            return Err(MgspError::param("kernel has no DC response; cannot normalize"));
        }
        1.0 / dc
    } else {
        1.0
    };
    let out_h = planes.height.div_ceil(spec.stride);
    let out_w = planes.width.div_ceil(spec.stride);
    let rows: Vec<Result<Vec<f64>>> = (0..out_h)
        .into_par_iter()
        .map(|orow| {
            (0..out_w)
                .map(|ocol| {
                    let win = planes.window(spec, orow * spec.stride, ocol * spec.stride);
                    let v = win[(0, 0)];
                    if normalize_dc && win.iter().all(|&x| x == v) {
                        // linear in the window, so a flat window maps to itself
                        return Ok(v);
                    }
                    Ok(window_mean(&win, kernel, basis)? * scale)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(out_h * out_w);
    for row in rows {
        values.extend(row?);
    }
    GrayImage::new(out_h, out_w, values)
}

/// How the difference field is thresholded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "lowercase")]
pub enum ThresholdPolicy {
    Fixed(f64),
    /// Nearest-rank percentile (0–100) of the field.
    Percentile(f64),
    Otsu,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Percentile(95.0)
    }
}

/// Differences at or below this are treated as round-off, never as edges.
pub const EDGE_NOISE_FLOOR: f64 = 1e-9;

pub fn resolve_threshold(field: &[f64], policy: ThresholdPolicy) -> Result<f64> {
    match policy {
        ThresholdPolicy::Fixed(t) if t.is_finite() && t >= 0.0 => Ok(t),
        ThresholdPolicy::Fixed(t) => Err(MgspError::param(format!("threshold must be nonnegative, got {t}"))),
        ThresholdPolicy::Percentile(p) if (0.0..=100.0).contains(&p) => {
            if field.is_empty() {
                return Ok(0.0);
            }
            let mut sorted = field.to_vec();
            sorted.sort_by(f64::total_cmp);
            let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
            Ok(sorted[rank.min(sorted.len()) - 1])
        }
        ThresholdPolicy::Percentile(p) => Err(MgspError::param(format!("percentile must be in [0, 100], got {p}"))),
        ThresholdPolicy::Otsu => Ok(otsu(field)),
    }
}

/// Otsu's threshold on a 256-bin histogram over `[0, max]`.
fn otsu(field: &[f64]) -> f64 {
    let max = field.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let bins = 256;
    let mut hist = vec![0usize; bins];
    for &v in field {
        let b = ((v / max) * (bins - 1) as f64).round() as usize;
        hist[b.min(bins - 1)] += 1;
    }
    let total = field.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    (best_t as f64 + 0.5) / (bins - 1) as f64 * max
}

/// Binary edge map plus the field and threshold that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    pub height: usize,
    pub width: usize,
    pub edges: Vec<bool>,
    pub field: Vec<f64>,
    pub threshold: f64,
}

impl EdgeMap {
    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    /// Marks `field > threshold` (and above the noise floor).
    pub fn from_field(height: usize, width: usize, field: Vec<f64>, policy: ThresholdPolicy) -> Result<Self> {
        let threshold = resolve_threshold(&field, policy)?;
        let edges = field.iter().map(|&d| d > threshold && d > EDGE_NOISE_FLOOR).collect();
        Ok(EdgeMap {
            height,
            width,
            edges,
            field,
            threshold,
        })
    }
}

/// Edges where `|gray − smoothed|` exceeds the policy threshold.
pub fn detect_edges(gray: &GrayImage, smoothed: &GrayImage, policy: ThresholdPolicy) -> Result<EdgeMap> {
    if (gray.height(), gray.width()) != (smoothed.height(), smoothed.width()) {
        return Err(MgspError::shape(
            "detect_edges",
            format!("{}x{}", gray.height(), gray.width()),
            format!("{}x{}", smoothed.height(), smoothed.width()),
        ));
    }
    let field = gray
        .values()
        .iter()
        .zip(smoothed.values())
        .map(|(g, s)| (g - s).abs())
        .collect();
    EdgeMap::from_field(gray.height(), gray.width(), field, policy)
}

/// Classic 3×3 gradient operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientOperator {
    Sobel,
    Prewitt,
}

/// Gradient magnitude with replicated borders.
pub fn gradient_magnitude(gray: &GrayImage, op: GradientOperator) -> GrayImage {
    let side = match op {
        GradientOperator::Sobel => 2.0,
        GradientOperator::Prewitt => 1.0,
    };
    let (h, w) = (gray.height() as isize, gray.width() as isize);
    let at = |r: isize, c: isize| gray.get(r.clamp(0, h - 1) as usize, c.clamp(0, w - 1) as usize);
    let mut values = Vec::with_capacity((h * w) as usize);
    for r in 0..h {
        for c in 0..w {
            let gx = (at(r - 1, c + 1) + side * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + side * at(r, c - 1) + at(r + 1, c - 1));
            let gy = (at(r + 1, c - 1) + side * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + side * at(r - 1, c) + at(r - 1, c + 1));
            values.push((gx * gx + gy * gy).sqrt());
        }
    }
    GrayImage::new(h as usize, w as usize, values).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{grid_adjacency, laplacian_matrix};
    use crate::spectra::{graph_fourier_basis, BasisKind};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(m: usize, n: usize, rng: &mut ChaCha8Rng) -> MlgSignal {
        MlgSignal::from_matrix(DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)))
    }

    fn single_layer_basis(adj: &DMatrix<f64>) -> SpectralBasis {
        let (values, vectors) = graph_fourier_basis(&laplacian_matrix(adj));
        let magnitudes = values.iter().map(|v| v.abs()).collect();
        SpectralBasis::new(DMatrix::identity(1, 1), vectors, vec![1.0], magnitudes, BasisKind::Graph).unwrap()
    }

    fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.5) {
                    let w = rng.gen_range(0.1..1.0);
                    a[(i, j)] = w;
                    a[(j, i)] = w;
                }
            }
        }
        a
    }

    #[test]
    fn spectral_identity_and_zero() {
        let basis = window_basis(&WindowSpec::new(3, 3).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_signal(3, 9, &mut rng);
        let ones = MlgSignal::from_matrix(DMatrix::from_element(3, 9, 1.0));
        let unit = imgft(&ones, &basis).unwrap();
        assert!((mlg_convolve(&x, &unit, &basis).unwrap().matrix() - x.matrix()).amax() < 1e-12);
        let zero = MlgSignal::zeros(3, 9);
        assert_eq!(mlg_convolve(&zero, &x, &basis).unwrap().amax(), 0.0);
    }

    #[test]
    fn path_graph_filtering_form() {
        let mut path = DMatrix::zeros(5, 5);
        for i in 0..4 {
            path[(i, i + 1)] = 1.0;
            path[(i + 1, i)] = 1.0;
        }
        let basis = single_layer_basis(&path);
        let v = &basis.entity_basis;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_signal(1, 5, &mut rng);
        let y = random_signal(1, 5, &mut rng);
        let y_hat = v.transpose() * y.row(0).transpose();
        let expected = v * DMatrix::from_diagonal(&y_hat) * v.transpose() * x.row(0).transpose();
        let got = mlg_convolve(&x, &y, &basis).unwrap();
        for i in 0..5 {
            assert!((got[(0, i)] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels() {
        let spec = WindowSpec::new(3, 3).unwrap();
        let c1 = make_localization_kernel(&spec, KernelVariant::C1).unwrap();
        assert_eq!(c1.active, vec![(1, 4)]);
        assert_eq!(c1.values.sum(), 1.0);
        let c2 = make_localization_kernel(&spec, KernelVariant::C2).unwrap();
        assert_eq!(c2.active, vec![(0, 4), (1, 4), (2, 4)]);
        assert_eq!(c2.values.sum(), 3.0);
        assert!(WindowSpec::new(4, 3).is_err());
    }

    fn three_planes(h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f64) -> Vec<Vec<f64>> {
        (0..3).map(|l| (0..h * w).map(|p| f(l, p / w, p % w)).collect()).collect()
    }

    #[test]
    fn constant_images_stay_constant() {
        let spec = WindowSpec::new(3, 3).unwrap();
        let basis = window_basis(&spec).unwrap();
        for variant in [KernelVariant::C1, KernelVariant::C2] {
            let kernel = make_localization_kernel(&spec, variant).unwrap();
            let planes = three_planes(6, 7, |_, _, _| 0.4);
            let p = Planes { planes: &planes, height: 6, width: 7 };
            let raw = smooth_image(p, &spec, &kernel, &basis, false).unwrap();
            let first = raw.values()[0];
            assert!(raw.values().iter().all(|v| *v == first));
            let norm = smooth_image(p, &spec, &kernel, &basis, true).unwrap();
            assert!(norm.values().iter().all(|v| *v == 0.4));
            assert_eq!((norm.height(), norm.width()), (6, 7));
        }
    }

    #[test]
    fn single_window_matches_explicit_loops() {
        let spec = WindowSpec::new(3, 3).unwrap();
        let basis = window_basis(&spec).unwrap();
        let kernel = make_localization_kernel(&spec, KernelVariant::C1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let planes: Vec<Vec<f64>> = (0..3).map(|_| (0..9).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let out = smooth_image(Planes { planes: &planes, height: 3, width: 3 }, &spec, &kernel, &basis, false).unwrap();

        let (ef, ee) = (&basis.layer_basis, &basis.entity_basis);
        let transform = |s: &dyn Fn(usize, usize) -> f64| {
            let mut hat = [[0.0; 9]; 3];
            for (a, row) in hat.iter_mut().enumerate() {
                for (i, cell) in row.iter_mut().enumerate() {
                    for b in 0..3 {
                        for j in 0..9 {
                            *cell += ef[(b, a)] * s(b, j) * ee[(j, i)];
                        }
                    }
                }
            }
            hat
        };
        let s_hat = transform(&|l, n| planes[l][n]);
        let c_hat = transform(&|l, n| kernel.values[(l, n)]);
        let mut total = 0.0;
        for b in 0..3 {
            for j in 0..9 {
                for a in 0..3 {
                    for i in 0..9 {
                        total += ef[(b, a)] * s_hat[a][i] * c_hat[a][i] * ee[(j, i)];
                    }
                }
            }
        }
        assert!((out.get(1, 1) - total / 27.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_rejects_small_images() {
        let spec = WindowSpec::new(5, 3).unwrap();
        let basis = window_basis(&spec).unwrap();
        let kernel = make_localization_kernel(&spec, KernelVariant::C2).unwrap();
        let planes = three_planes(4, 8, |_, _, _| 0.0);
        let err = smooth_image(Planes { planes: &planes, height: 4, width: 8 }, &spec, &kernel, &basis, true);
        assert!(matches!(err, Err(MgspError::InvalidParameter(_))));
    }

    #[test]
    fn edge_thresholds() {
        let gray = GrayImage::new(1, 4, vec![0.0, 0.5, 1.0, 0.2]).unwrap();
        let none = detect_edges(&gray, &gray, ThresholdPolicy::Fixed(0.1)).unwrap();
        assert_eq!(none.count(), 0);
        let smooth = GrayImage::new(1, 4, vec![0.0, 0.4, 1.0, 0.9]).unwrap();
        let all = detect_edges(&gray, &smooth, ThresholdPolicy::Fixed(0.0)).unwrap();
        assert_eq!(all.edges, vec![false, true, false, true]);
        assert_eq!(resolve_threshold(&[1.0, 2.0, 3.0, 4.0], ThresholdPolicy::Percentile(50.0)).unwrap(), 2.0);
        assert_eq!(resolve_threshold(&[1.0, 2.0, 3.0, 4.0], ThresholdPolicy::Percentile(100.0)).unwrap(), 4.0);
        let t = resolve_threshold(&[0.0, 0.0, 0.1, 0.9, 1.0, 1.0], ThresholdPolicy::Otsu).unwrap();
        assert!(t > 0.1 && t < 0.9);
        assert!(detect_edges(&gray, &GrayImage::new(2, 2, vec![0.0; 4]).unwrap(), ThresholdPolicy::Otsu).is_err());
    }

    #[test]
    fn two_tone_edges_hug_the_boundary() {
        let spec = WindowSpec::new(3, 3).unwrap();
        let basis = window_basis(&spec).unwrap();
        let kernel = make_localization_kernel(&spec, KernelVariant::C1).unwrap();
        let (h, w) = (10, 12);
        let planes = three_planes(h, w, |_, _, c| if c < 6 { 0.0 } else { 1.0 });
        let smoothed = smooth_image(Planes { planes: &planes, height: h, width: w }, &spec, &kernel, &basis, true).unwrap();
        let gray = GrayImage::new(h, w, planes[0].clone()).unwrap();
        let map = detect_edges(&gray, &smoothed, ThresholdPolicy::Fixed(0.05)).unwrap();
        assert!(map.count() > 0);
        for (p, &e) in map.edges.iter().enumerate() {
            if e {
                assert!((5..=6).contains(&(p % w)));
            }
        }
    }

    #[test]
    fn gradient_operators() {
        let flat = GrayImage::new(4, 4, vec![0.3; 16]).unwrap();
        for op in [GradientOperator::Sobel, GradientOperator::Prewitt] {
            assert!(gradient_magnitude(&flat, op).values().iter().all(|v| *v == 0.0));
        }
        let step = GrayImage::new(3, 4, (0..12).map(|p| if p % 4 < 2 { 0.0 } else { 1.0 }).collect()).unwrap();
        let g = gradient_magnitude(&step, GradientOperator::Sobel);
        assert_eq!(g.get(1, 1), 4.0);
        assert_eq!(g.get(1, 0), 0.0);
        assert_eq!(gradient_magnitude(&step, GradientOperator::Prewitt).get(1, 2), 3.0);
    }

    proptest! {
        #[test]
        fn commutative_and_linear(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = window_basis(&WindowSpec::new(3, 3).unwrap()).unwrap();
            let (x, y, z) = (random_signal(3, 9, &mut rng), random_signal(3, 9, &mut rng), random_signal(3, 9, &mut rng));
            let xy = mlg_convolve(&x, &y, &basis).unwrap();
            let yx = mlg_convolve(&y, &x, &basis).unwrap();
            prop_assert!((xy.matrix() - yx.matrix()).amax() < 1e-12);
            let a = rng.gen_range(-2.0..2.0);
            let combo = MlgSignal::from_matrix(x.matrix() * a + z.matrix());
            let lhs = mlg_convolve(&combo, &y, &basis).unwrap();
            let rhs = xy.matrix() * a + mlg_convolve(&z, &y, &basis).unwrap().matrix();
            prop_assert!((lhs.matrix() - rhs).amax() < 1e-12);
        }

        #[test]
        fn single_layer_expansion(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let adj = random_graph(8, &mut rng);
            let basis = single_layer_basis(&adj);
            let f = &basis.entity_basis;
            let x = random_signal(1, 8, &mut rng);
            let active: Vec<usize> = (0..8).filter(|_| rng.gen_bool(0.3)).collect();
            let mut kernel = MlgSignal::zeros(1, 8);
            for &k in &active {
                kernel[(0, k)] = 1.0;
            }
            let got = mlg_convolve(&x, &kernel, &basis).unwrap();
            let mut expected = vec![0.0; 8];
            for j in 0..8 {
                let gain: f64 = active.iter().map(|&k| f[(k, j)]).sum();
                let proj: f64 = (0..8).map(|i| f[(i, j)] * x[(0, i)]).sum();
                for (i, e) in expected.iter_mut().enumerate() {
                    *e += f[(i, j)] * proj * gain;
                }
            }
            for i in 0..8 {
                prop_assert!((got[(0, i)] - expected[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn grid_adjacency_is_symmetric() {
        let a = grid_adjacency(3, 4);
        assert_eq!(a, a.transpose());
        assert_eq!(a.sum(), 2.0 * (3.0 * 3.0 + 2.0 * 4.0));
    }
}
