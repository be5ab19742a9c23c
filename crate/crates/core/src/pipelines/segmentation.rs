//! Unsupervised hyperspectral segmentation on a superpixel MLG, with pixel
//! k-means and single-layer spectral clustering baselines.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::builders::{cluster_frames_to_layers, gaussian_mlg, GaussianOptions};
use crate::cube::ImageCube;
use crate::error::{MgspError, Result};
use crate::kmeans::{kmeans, KMeansOptions};
use crate::linalg::symmetric_eigen;
use crate::spectra::hosvd;
use crate::superpixel::{compute_superpixels, SlicOptions, SuperpixelMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentationMethod {
    #[serde(rename = "k-means")]
    KMeans,
    #[serde(rename = "GSP")]
    Gsp,
    #[serde(rename = "M-GSP")]
    Mgsp,
}

impl SegmentationMethod {
    pub fn label(self) -> &'static str {
        match self {
            SegmentationMethod::KMeans => "k-means",
            SegmentationMethod::Gsp => "GSP",
            SegmentationMethod::Mgsp => "M-GSP",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentationConfig {
    /// Layer count `M`.
    pub layers: usize,
    /// Superpixel count `N`.
    pub superpixels: usize,
    /// Segment count `Q`.
    pub segments: usize,
    pub seed: u64,
    pub slic: SlicOptions,
    pub gaussian: GaussianOptions,
    /// k-means restarts on the singular rows and spectral embeddings.
    pub restarts: usize,
    /// k-means restarts of the pixel baseline.
    pub baseline_restarts: usize,
}

impl SegmentationConfig {
    pub fn new(segments: usize, seed: u64) -> Self {
        SegmentationConfig {
            layers: 10,
            superpixels: 100,
            segments,
            seed,
            slic: SlicOptions::default(),
            gaussian: GaussianOptions::default(),
            restarts: 20,
            baseline_restarts: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub method: SegmentationMethod,
    pub height: usize,
    pub width: usize,
    /// Row-major labels in `1..=Q`, numbered by first appearance.
    pub labels: Vec<usize>,
    pub boundary: Vec<bool>,
    pub segments: usize,
    /// Kept singular vectors (M-GSP only).
    pub kept_vectors: Option<usize>,
    /// Entity-wise singular values, descending (M-GSP only).
    pub entity_values: Vec<f64>,
    /// Band → layer assignment (M-GSP only).
    pub layer_assignment: Vec<usize>,
    pub superpixels: Option<SuperpixelMap>,
}

impl SegmentationResult {
    fn build(method: SegmentationMethod, height: usize, width: usize, raw: &[usize], segments: usize) -> Self {
        let labels = relabel(raw);
        let boundary = boundary_map(height, width, &labels).expect("label count matches");
        SegmentationResult {
            method,
            height,
            width,
            labels,
            boundary,
            segments,
            kept_vectors: None,
            entity_values: Vec::new(),
            layer_assignment: Vec::new(),
            superpixels: None,
        }
    }
}

/// Renumbers labels `1, 2, …` in raster order of first appearance.
fn relabel(raw: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    raw.iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(k) => k + 1,
            None => {
                seen.push(*l);
                seen.len()
            }
        })
        .collect()
}

/// `P = argmax_k (σ_k − σ_{k+1})`, 1-based, ties to the smallest `k`.
pub fn singular_gap_select(values: &[f64]) -> Result<usize> {
    if values.len() < 2 {
        return Err(MgspError::param("singular gap needs at least two values"));
    }
    let mut best = (1, values[0] - values[1]);
    for k in 2..values.len() {
        let gap = values[k - 1] - values[k];
        if gap > best.1 {
            best = (k, gap);
        }
    }
    Ok(best.0)
}

fn check_segments(q: usize, limit: usize, what: &str) -> Result<()> {
    if q == 0 {
        return Err(MgspError::param("need at least one segment"));
    }
    if q > limit {
        return Err(MgspError::param(format!("{q} segments exceed the {limit} {what}")));
    }
    Ok(())
}

/// MLG segmentation: frames → `M` layers, `N` superpixels, Gaussian MLG,
/// HOSVD entity basis, k-means on the first `P` singular vectors' rows.
pub fn segment_hsi(cube: &ImageCube, config: &SegmentationConfig) -> Result<SegmentationResult> {
    let (h, w) = (cube.height(), cube.width());
    check_segments(config.segments, config.superpixels, "superpixels")?;
    let cube = cube.normalized();
    let clustering = cluster_frames_to_layers(&cube, config.layers, config.seed)?;
    let channels: Vec<&[f64]> = clustering.layer_signals.iter().map(Vec::as_slice).collect();
    let sp = compute_superpixels(&channels, h, w, config.superpixels, config.slic)?;

    let (p, entity_values, groups) = if config.segments == 1 {
        (0, Vec::new(), vec![0; sp.count])
    } else {
        let g = gaussian_mlg(&clustering, &sp, config.gaussian)?;
        let fact = hosvd(g.adjacency())?;
        let values = fact.basis.entity_values.clone();
        let p = singular_gap_select(&values)?.max(config.segments).min(sp.count);
        let e = &fact.basis.entity_basis;
        let rows: Vec<Vec<f64>> = (0..sp.count).map(|i| (0..p).map(|c| e[(i, c)]).collect()).collect();
        let opts = KMeansOptions::new(config.segments, config.seed).with_restarts(config.restarts);
        (p, values, kmeans(&rows, opts)?.assignment)
    };

    let raw: Vec<usize> = sp.labels.iter().map(|&s| groups[s]).collect();
    let mut result = SegmentationResult::build(SegmentationMethod::Mgsp, h, w, &raw, config.segments);
    result.kept_vectors = Some(p);
    result.entity_values = entity_values;
    result.layer_assignment = clustering.assignment;
    result.superpixels = Some(sp);
    Ok(result)
}

/// k-means on per-pixel spectra of the normalized cube.
pub fn kmeans_baseline(cube: &ImageCube, config: &SegmentationConfig) -> Result<SegmentationResult> {
    check_segments(config.segments, cube.pixels(), "pixels")?;
    let cube = cube.normalized();
    let points: Vec<Vec<f64>> = (0..cube.pixels()).map(|p| cube.spectrum(p)).collect();
    let opts = KMeansOptions::new(config.segments, config.seed).with_restarts(config.baseline_restarts);
    let assignment = kmeans(&points, opts)?.assignment;
    Ok(SegmentationResult::build(
        SegmentationMethod::KMeans,
        cube.height(),
        cube.width(),
        &assignment,
        config.segments,
    ))
}

/// Spectral clustering of the superpixels on one graph: Gaussian kNN graph
/// over mean full spectra, normalized Laplacian, the `Q` smallest
/// eigenvectors with unit-normalized rows, then k-means.
pub fn gsp_baseline(cube: &ImageCube, config: &SegmentationConfig) -> Result<SegmentationResult> {
    let (h, w) = (cube.height(), cube.width());
    check_segments(config.segments, config.superpixels, "superpixels")?;
    let cube = cube.normalized();
    let clustering = cluster_frames_to_layers(&cube, config.layers, config.seed)?;
    let channels: Vec<&[f64]> = clustering.layer_signals.iter().map(Vec::as_slice).collect();
    let sp = compute_superpixels(&channels, h, w, config.superpixels, config.slic)?;
    let n = sp.count;

    let band_means: Vec<Vec<f64>> = (0..cube.bands()).map(|b| sp.region_means(cube.frame(b))).collect();
    let feats: Vec<Vec<f64>> = (0..n).map(|i| band_means.iter().map(|m| m[i]).collect()).collect();
    let d2 = |a: usize, b: usize| -> f64 { feats[a].iter().zip(&feats[b]).map(|(x, y)| (x - y) * (x - y)).sum() };

    let knn = config.gaussian.knn.min(n.saturating_sub(1));
    let mut neighbors = Vec::with_capacity(n);
    let mut knn_dists = Vec::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (d2(i, j), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        others.truncate(knn);
        knn_dists.extend(others.iter().map(|(d, _)| d.sqrt()));
        neighbors.push(others);
    }
    knn_dists.sort_by(f64::total_cmp);
    let sigma = match config.gaussian.sigma_intra {
        Some(s) if s > 0.0 => s,
        _ => knn_dists.get(knn_dists.len() / 2).copied().filter(|&m| m > 0.0).unwrap_or(1.0),
    };
    let mut adj = DMatrix::zeros(n, n);
    for (i, list) in neighbors.iter().enumerate() {
        for &(d, j) in list {
            let wgt = (-d / (sigma * sigma)).exp().max(f64::MIN_POSITIVE);
            adj[(i, j)] = wgt;
            adj[(j, i)] = wgt;
        }
    }

    let groups = if config.segments == 1 {
        vec![0; n]
    } else {
        let deg: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
        let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
        let lap = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - inv[i] * adj[(i, j)] * inv[j]);
        let (values, vectors) = symmetric_eigen(&lap);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let row: Vec<f64> = order[..config.segments].iter().map(|&c| vectors[(i, c)]).collect();
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter().map(|v| v / norm).collect()
                } else {
                    row
                }
            })
            .collect();
        let opts = KMeansOptions::new(config.segments, config.seed).with_restarts(config.restarts);
        kmeans(&rows, opts)?.assignment
    };
    let raw: Vec<usize> = sp.labels.iter().map(|&s| groups[s]).collect();
    let mut result = SegmentationResult::build(SegmentationMethod::Gsp, h, w, &raw, config.segments);
    result.superpixels = Some(sp);
    Ok(result)
}

/// Pixels with a 4-neighbor of a different label.
pub fn boundary_map(height: usize, width: usize, labels: &[usize]) -> Result<Vec<bool>> {
    if labels.len() != height * width {
        return Err(MgspError::shape("label map", height * width, labels.len()));
    }
    let mut out = vec![false; labels.len()];
    for r in 0..height {
        for c in 0..width {
            let l = labels[r * width + c];
            let differs = (r > 0 && labels[(r - 1) * width + c] != l)
                || (r + 1 < height && labels[(r + 1) * width + c] != l)
                || (c > 0 && labels[r * width + c - 1] != l)
                || (c + 1 < width && labels[r * width + c + 1] != l);
            out[r * width + c] = differs;
        }
    }
    Ok(out)
}

/// Square (Chebyshev) dilation by `tol` pixels.
fn dilate(height: usize, width: usize, map: &[bool], tol: usize) -> Vec<bool> {
    if tol == 0 {
        return map.to_vec();
    }
    let mut rows = vec![false; map.len()];
    for r in 0..height {
        for c in 0..width {
            let lo = c.saturating_sub(tol);
            let hi = (c + tol).min(width - 1);
            rows[r * width + c] = (lo..=hi).any(|cc| map[r * width + cc]);
        }
    }
    let mut out = vec![false; map.len()];
    for r in 0..height {
        let lo = r.saturating_sub(tol);
        let hi = (r + tol).min(height - 1);
        for c in 0..width {
            out[r * width + c] = (lo..=hi).any(|rr| rows[rr * width + c]);
        }
    }
    out
}

/// Fraction of pixels whose boundary status agrees within `tol` pixels: a
/// pixel counts as correct unless a predicted boundary has no truth boundary
/// within `tol`, or a truth boundary has no predicted boundary within `tol`.
pub fn boundary_accuracy(height: usize, width: usize, pred: &[usize], truth: &[usize], tol: usize) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(MgspError::shape("boundary accuracy", truth.len(), pred.len()));
    }
    let bp = boundary_map(height, width, pred)?;
    let bt = boundary_map(height, width, truth)?;
    if bp.is_empty() {
        return Ok(1.0);
    }
    let dp = dilate(height, width, &bp, tol);
    let dt = dilate(height, width, &bt, tol);
    let correct = (0..bp.len()).filter(|&x| (!bp[x] || dt[x]) && (!bt[x] || dp[x])).count();
    Ok(correct as f64 / bp.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gap_examples() {
        assert_eq!(singular_gap_select(&[10.0, 9.0, 2.0, 1.0]).unwrap(), 2);
        assert_eq!(singular_gap_select(&[5.0, 1.0]).unwrap(), 1);
        assert_eq!(singular_gap_select(&[3.0; 6]).unwrap(), 1);
        assert!(singular_gap_select(&[1.0]).is_err());
    }

    #[test]
    fn boundary_examples() {
        // two halves of a 4x4 map
        let truth: Vec<usize> = (0..16).map(|p| usize::from(p % 4 >= 2)).collect();
        let b = boundary_map(4, 4, &truth).unwrap();
        let cols: Vec<usize> = (0..16).filter(|&p| b[p]).map(|p| p % 4).collect();
        assert!(cols.iter().all(|&c| c == 1 || c == 2) && cols.len() == 8);
        assert_eq!(boundary_accuracy(4, 4, &truth, &truth, 1).unwrap(), 1.0);
        assert_eq!(boundary_accuracy(4, 4, &[7; 16], &truth, 1).unwrap(), 0.5);
        assert!(boundary_accuracy(4, 4, &[0; 15], &truth, 1).is_err());
    }

    fn checker(r: usize, c: usize) -> usize {
        (r / 2 + c / 2) % 2
    }

    #[test]
    fn shifted_checkerboard_within_tolerance() {
        let truth: Vec<usize> = (0..64).map(|p| checker(p / 8, p % 8)).collect();
        let pred: Vec<usize> = (0..64).map(|p| checker(p / 8, p % 8 + 1)).collect();
        assert_ne!(pred, truth);
        assert_eq!(boundary_accuracy(8, 8, &pred, &truth, 1).unwrap(), 1.0);
        assert!(boundary_accuracy(8, 8, &pred, &truth, 0).unwrap() < 1.0);
    }

    proptest! {
        #[test]
        fn tol_zero_is_symmetric(a in proptest::collection::vec(0usize..3, 30), b in proptest::collection::vec(0usize..3, 30)) {
            let x = boundary_accuracy(5, 6, &a, &b, 0).unwrap();
            let y = boundary_accuracy(5, 6, &b, &a, 0).unwrap();
            prop_assert_eq!(x, y);
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn boundary_map_matches_definition(labels in proptest::collection::vec(0usize..3, 20)) {
            let b = boundary_map(4, 5, &labels).unwrap();
            for p in 0..20 {
                let (r, c) = (p / 5, p % 5);
                let mut nbrs = Vec::new();
                if r > 0 { nbrs.push(p - 5); }
                if r < 3 { nbrs.push(p + 5); }
                if c > 0 { nbrs.push(p - 1); }
                if c < 4 { nbrs.push(p + 1); }
                prop_assert_eq!(b[p], nbrs.iter().any(|&q| labels[q] != labels[p]));
            }
        }
    }

    fn two_region_cube() -> (ImageCube, Vec<usize>) {
        let (h, w, bands) = (24, 24, 12);
        let truth: Vec<usize> = (0..h * w).map(|p| usize::from(p % w >= 10)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cube = ImageCube::from_fn(h, w, bands, |r, c, b| {
            let noise = rng.gen_range(-0.02..0.02);
            if truth[r * w + c] == 0 {
                0.2 + 0.05 * (b as f64).sin() + noise
            } else {
                0.7 - 0.03 * b as f64 + noise
            }
        })
        .unwrap();
        (cube, truth)
    }

    fn small_config(q: usize) -> SegmentationConfig {
        SegmentationConfig {
            layers: 4,
            superpixels: 36,
            ..SegmentationConfig::new(q, 42)
        }
    }

    #[test]
    fn two_regions_are_recovered() {
        let (cube, truth) = two_region_cube();
        let res = segment_hsi(&cube, &small_config(2)).unwrap();
        assert!(res.labels.iter().all(|&l| (1..=2).contains(&l)));
        let acc = boundary_accuracy(24, 24, &res.labels, &truth, 1).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
        assert!(res.kept_vectors.unwrap() >= 2);
        let again = segment_hsi(&cube, &small_config(2)).unwrap();
        assert_eq!(again.labels, res.labels);
        for method in [kmeans_baseline, gsp_baseline] {
            let base = method(&cube, &small_config(2)).unwrap();
            assert!(boundary_accuracy(24, 24, &base.labels, &truth, 1).unwrap() >= 0.95);
        }
    }

    #[test]
    fn single_segment_and_limits() {
        let (cube, _) = two_region_cube();
        let res = segment_hsi(&cube, &small_config(1)).unwrap();
        assert!(res.labels.iter().all(|&l| l == 1));
        assert!(res.boundary.iter().all(|&b| !b));
        assert!(segment_hsi(&cube, &small_config(37)).is_err());
    }
}
