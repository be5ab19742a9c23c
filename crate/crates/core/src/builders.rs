//! Multilayer graphs built from images: pixel grids for RGB and
//! band-cluster × superpixel Gaussian graphs for hyperspectral cubes.

use nalgebra::DMatrix;

use crate::cube::ImageCube;
use crate::error::{MgspError, Result};
use crate::kmeans::{kmeans, KMeansOptions};
use crate::mlg::{MultilayerGraph, Representation};
use crate::superpixel::SuperpixelMap;
use crate::tensor::Tensor4;

/// Adjacency of the 4-neighbor `rows×cols` pixel grid; node `r·cols + c`.
pub fn grid_adjacency(rows: usize, cols: usize) -> DMatrix<f64> {
    let n = rows * cols;
    let mut a = DMatrix::zeros(n, n);
    for r in 0..rows {
        for c in 0..cols {
            let p = r * cols + c;
            if c + 1 < cols {
                a[(p, p + 1)] = 1.0;
                a[(p + 1, p)] = 1.0;
            }
            if r + 1 < rows {
                a[(p, p + cols)] = 1.0;
                a[(p + cols, p)] = 1.0;
            }
        }
    }
    a
}

/// Complete graph on `n` nodes with unit weights.
pub fn complete_adjacency(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })
}

/// `D − A` of a symmetric adjacency matrix.
pub fn laplacian_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -a.clone();
    for i in 0..a.nrows() {
        l[(i, i)] += a.row(i).sum();
    }
    l
}

/// Grid MLG: identical 4-neighbor intralayer grids in every layer plus
/// unit interlayer edges between each pixel's counterparts in every pair of
/// layers.
pub fn grid_mlg(rows: usize, cols: usize, layers: usize, representation: Representation) -> Result<MultilayerGraph> {
    if rows == 0 || cols == 0 || layers == 0 {
        return Err(MgspError::param("grid dimensions must be positive"));
    }
    let n = rows * cols;
    let grid = grid_adjacency(rows, cols);
    let mut t = Tensor4::zeros_mlg(layers, n);
    for a in 0..layers {
        for i in 0..n {
            for j in 0..n {
                if grid[(i, j)] != 0.0 {
                    t.set(a, i, a, j, grid[(i, j)]);
                }
            }
            for b in 0..layers {
                if b != a {
                    t.set(a, i, b, i, 1.0);
                }
            }
        }
    }
    MultilayerGraph::from_adjacency(t, representation)
}

/// Bands grouped into layers, with one mean frame per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerClustering {
    /// Layer (0-based) of each band.
    pub assignment: Vec<usize>,
    /// Row-major `H·W` mean frame of each layer.
    pub layer_signals: Vec<Vec<f64>>,
    pub height: usize,
    pub width: usize,
}

impl LayerClustering {
    pub fn layers(&self) -> usize {
        self.layer_signals.len()
    }

    /// Within-layer sum of squared frame deviations.
    pub fn sse(&self, cube: &ImageCube) -> f64 {
        (0..cube.bands())
            .map(|b| {
                let mean = &self.layer_signals[self.assignment[b]];
                cube.frame(b).iter().zip(mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>()
            })
            .sum()
    }
}

/// Groups the `B` bands of a cube into `m` layers by k-means on whole
/// frames. Layers are numbered by their lowest band.
pub fn cluster_frames_to_layers(cube: &ImageCube, m: usize, seed: u64) -> Result<LayerClustering> {
    let bands = cube.bands();
    if m == 0 || m > bands {
        return Err(MgspError::param(format!("cannot group {bands} bands into {m} layers")));
    }
    let raw = if m == bands {
        (0..bands).collect()
    } else {
        let frames: Vec<Vec<f64>> = (0..bands).map(|b| cube.frame(b).to_vec()).collect();
        kmeans(&frames, KMeansOptions::new(m, seed).with_restarts(10))?.assignment
    };
    let mut order = Vec::new();
    for &c in &raw {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    let assignment: Vec<usize> = raw
        .iter()
        .map(|c| order.iter().position(|o| o == c).unwrap_or(0))
        .collect();
    let pixels = cube.pixels();
    let mut layer_signals = vec![vec![0.0; pixels]; m];
    let mut counts = vec![0usize; m];
    for (b, &l) in assignment.iter().enumerate() {
        counts[l] += 1;
        for (acc, v) in layer_signals[l].iter_mut().zip(cube.frame(b)) {
            *acc += v;
        }
    }
    for (signal, &c) in layer_signals.iter_mut().zip(&counts) {
        signal.iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(LayerClustering {
        assignment,
        layer_signals,
        height: cube.height(),
        width: cube.width(),
    })
}

/// Parameters of [`gaussian_mlg`]. `None` sigmas use the median pairwise
/// feature distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianOptions {
    pub sigma_intra: Option<f64>,
    pub sigma_inter: Option<f64>,
    pub knn: usize,
    /// Connect every entity pair across layers instead of counterparts only.
    pub full_interlayer: bool,
    /// Weight of the normalized superpixel centroid appended to features.
    pub spatial_weight: f64,
}

impl Default for GaussianOptions {
    fn default() -> Self {
        GaussianOptions {
            sigma_intra: None,
            sigma_inter: None,
            knn: 8,
            full_interlayer: false,
            spatial_weight: 0.0,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn resolve_sigma(given: Option<f64>, distances: impl FnOnce() -> Vec<f64>) -> Result<f64> {
    match given {
        Some(s) if !(s > 0.0 && s.is_finite()) => Err(MgspError::param(format!("sigma must be positive, got {s}"))),
        Some(s) => Ok(s),
        None => {
            let m = median(distances());
            Ok(if m > 0.0 { m } else { 1.0 })
        }
    }
}

fn gaussian(d2: f64, sigma: f64) -> f64 {
    (-d2 / (sigma * sigma)).exp().max(f64::MIN_POSITIVE)
}

/// Gaussian-weighted MLG over (layer, superpixel) nodes.
///
/// The feature of entity `i` in layer `α` is the mean of that layer's
/// signal over superpixel `i` (plus the weighted centroid if requested).
/// Intralayer edges keep each node's `knn` nearest neighbors, symmetrized;
/// interlayer edges link counterparts unless `full_interlayer` is set.
/// Returned in adjacency representation.
pub fn gaussian_mlg(clustering: &LayerClustering, sp: &SuperpixelMap, options: GaussianOptions) -> Result<MultilayerGraph> {
    if (sp.height, sp.width) != (clustering.height, clustering.width) {
        return Err(MgspError::shape(
            "superpixel map",
            format!("{}x{}", clustering.height, clustering.width),
            format!("{}x{}", sp.height, sp.width),
        ));
    }
    let (m, n) = (clustering.layers(), sp.count);
    let centroids = sp.centroids();
    let feats: Vec<Vec<Vec<f64>>> = clustering
        .layer_signals
        .iter()
        .map(|signal| {
            sp.region_means(signal)
                .into_iter()
                .zip(&centroids)
                .map(|(v, &(cy, cx))| {
                    let mut f = vec![v];
                    if options.spatial_weight > 0.0 {
                        f.push(options.spatial_weight * cy);
                        f.push(options.spatial_weight * cx);
                    }
                    f
                })
                .collect()
        })
        .collect();
    let d2 = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };

    let sigma_intra = resolve_sigma(options.sigma_intra, || {
        let mut all = Vec::new();
        for layer in &feats {
            for i in 0..n {
                for j in i + 1..n {
                    all.push(d2(&layer[i], &layer[j]).sqrt());
                }
            }
        }
        all
    })?;
    let sigma_inter = resolve_sigma(options.sigma_inter, || {
        let mut all = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                for i in 0..n {
                    if options.full_interlayer {
                        for j in 0..n {
                            all.push(d2(&feats[a][i], &feats[b][j]).sqrt());
                        }
                    } else {
                        all.push(d2(&feats[a][i], &feats[b][i]).sqrt());
                    }
                }
            }
        }
        all
    })?;

    let mut t = Tensor4::zeros_mlg(m, n);
    let k = options.knn.min(n.saturating_sub(1));
    for (a, layer) in feats.iter().enumerate() {
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (d2(&layer[i], &layer[j]), j)).collect();
            others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for &(dist, j) in &others[..k] {
                let w = gaussian(dist, sigma_intra);
                t.set(a, i, a, j, w);
                t.set(a, j, a, i, w);
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            for i in 0..n {
                if options.full_interlayer {
                    for j in 0..n {
                        t.set(a, i, b, j, gaussian(d2(&feats[a][i], &feats[b][j]), sigma_inter));
                    }
                } else {
                    t.set(a, i, b, i, gaussian(d2(&feats[a][i], &feats[b][i]), sigma_inter));
                }
            }
        }
    }
    MultilayerGraph::from_adjacency(t, Representation::Adjacency)
}
