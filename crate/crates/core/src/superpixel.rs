//! SLIC-style superpixels over a multichannel raster.
//!
//! Centers are seeded on a regular grid (exactly `N` of them) and refined by
//! local k-means in a `2S×2S` window, `S = sqrt(H·W/N)`, with distance
//!
//! ```text
//! D² = mean_c (f_c(p) − f_c(k))² + (m · d_xy / S)²
//! ```
//!
//! Afterwards every label is made 4-connected: stray components are merged
//! into the largest adjacent superpixel, and if labels went missing the
//! largest superpixels are split until exactly `N` remain.

use std::collections::VecDeque;

use crate::error::{MgspError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlicOptions {
    /// Weight `m` of the spatial term.
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicOptions {
    fn default() -> Self {
        SlicOptions {
            compactness: 0.1,
            iterations: 10,
        }
    }
}

/// Superpixel labels (0-based, row-major) and region centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperpixelMap {
    pub height: usize,
    pub width: usize,
    pub count: usize,
    pub labels: Vec<usize>,
}

impl SuperpixelMap {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Centroid of each superpixel as `(row/H, col/W)`.
    pub fn centroids(&self) -> Vec<(f64, f64)> {
        let mut acc = vec![(0.0, 0.0, 0usize); self.count];
        for (p, &l) in self.labels.iter().enumerate() {
            acc[l].0 += (p / self.width) as f64;
            acc[l].1 += (p % self.width) as f64;
            acc[l].2 += 1;
        }
        acc.into_iter()
            .map(|(r, c, n)| {
                let n = n.max(1) as f64;
                (r / n / self.height as f64, c / n / self.width as f64)
            })
            .collect()
    }

    /// Mean of a row-major plane over each superpixel.
    pub fn region_means(&self, plane: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.count];
        let mut n = vec![0usize; self.count];
        for (&l, v) in self.labels.iter().zip(plane) {
            sum[l] += v;
            n[l] += 1;
        }
        sum.into_iter().zip(n).map(|(s, n)| s / n.max(1) as f64).collect()
    }
}

fn neighbors(p: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (p / w, p % w);
    let mut out = [usize::MAX; 4];
    if r > 0 {
        out[0] = p - w;
    }
    if c > 0 {
        out[1] = p - 1;
    }
    if c + 1 < w {
        out[2] = p + 1;
    }
    if r + 1 < h {
        out[3] = p + w;
    }
    out.into_iter().filter(|&q| q != usize::MAX)
}

/// 4-connected components of equal labels; returns `(component id per
/// pixel, (label, size) per component)`.
fn components(labels: &[usize], h: usize, w: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut comp = vec![usize::MAX; labels.len()];
    let mut info = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = info.len();
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            for q in neighbors(p, h, w) {
                if comp[q] == usize::MAX && labels[q] == labels[start] {
                    comp[q] = id;
                    queue.push_back(q);
                }
            }
        }
        info.push((labels[start], size));
    }
    (comp, info)
}

/// Renumbers labels by first appearance in raster order.
fn compact(labels: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    map.len()
}

fn grid_seeds(h: usize, w: usize, n: usize) -> Vec<(f64, f64)> {
    let mut rows = ((n as f64 * h as f64 / w as f64).sqrt().round() as usize).clamp(1, h.min(n));
    while n.div_ceil(rows) > w {
        rows += 1;
    }
    let mut seeds = Vec::with_capacity(n);
    for r in 0..rows {
        let in_row = n / rows + usize::from(r < n % rows);
        let y = (r as f64 + 0.5) * h as f64 / rows as f64 - 0.5;
        for c in 0..in_row {
            let x = (c as f64 + 0.5) * w as f64 / in_row as f64 - 0.5;
            seeds.push((y, x));
        }
    }
    seeds
}

/// Computes exactly `n` 4-connected superpixels of a raster whose channels
/// are row-major `H·W` planes.
pub fn compute_superpixels(
    channels: &[&[f64]],
    height: usize,
    width: usize,
    n: usize,
    options: SlicOptions,
) -> Result<SuperpixelMap> {
    let pixels = height * width;
    if channels.is_empty() || channels.iter().any(|c| c.len() != pixels) {
        return Err(MgspError::shape("superpixel channels", pixels, channels.first().map_or(0, |c| c.len())));
    }
    if n == 0 || n > pixels {
        return Err(MgspError::param(format!("cannot form {n} superpixels from {pixels} pixels")));
    }
    let nch = channels.len();
    let step = (pixels as f64 / n as f64).sqrt();
    let spatial = options.compactness / step;
    let feature = |p: usize| -> Vec<f64> { channels.iter().map(|c| c[p]).collect() };

    let mut centers: Vec<(f64, f64, Vec<f64>)> = grid_seeds(height, width, n)
        .into_iter()
        .map(|(y, x)| {
            let p = (y.round().max(0.0) as usize).min(height - 1) * width + (x.round().max(0.0) as usize).min(width - 1);
            (y, x, feature(p))
        })
        .collect();

    let dist = |p: usize, k: &(f64, f64, Vec<f64>)| -> f64 {
        let (r, c) = ((p / width) as f64, (p % width) as f64);
        let df: f64 = channels.iter().zip(&k.2).map(|(ch, v)| (ch[p] - v).powi(2)).sum::<f64>() / nch as f64;
        let ds = (r - k.0).powi(2) + (c - k.1).powi(2);
        df + spatial * spatial * ds
    };

    let mut labels = vec![usize::MAX; pixels];
    let reach = (2.0 * step).ceil() as isize;
    for _ in 0..options.iterations.max(1) {
        let mut best = vec![f64::INFINITY; pixels];
        labels.fill(usize::MAX);
        for (k, center) in centers.iter().enumerate() {
            let (cy, cx) = (center.0.round() as isize, center.1.round() as isize);
            let r0 = (cy - reach).max(0) as usize;
            let r1 = ((cy + reach) as usize).min(height - 1);
            let c0 = (cx - reach).max(0) as usize;
            let c1 = ((cx + reach) as usize).min(width - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let p = r * width + c;
                    let d = dist(p, center);
                    if d < best[p] {
                        best[p] = d;
                        labels[p] = k;
                    }
                }
            }
        }
        for p in 0..pixels {
            if labels[p] == usize::MAX {
                labels[p] = (0..centers.len())
                    .min_by(|&a, &b| dist(p, &centers[a]).total_cmp(&dist(p, &centers[b])))
                    .unwrap_or(0);
            }
        }
        let mut acc = vec![(0.0, 0.0, vec![0.0; nch], 0usize); centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let a = &mut acc[l];
            a.0 += (p / width) as f64;
            a.1 += (p % width) as f64;
            for (s, ch) in a.2.iter_mut().zip(channels) {
                *s += ch[p];
            }
            a.3 += 1;
        }
        for (center, (y, x, f, cnt)) in centers.iter_mut().zip(acc) {
            if cnt > 0 {
                let c = cnt as f64;
                *center = (y / c, x / c, f.into_iter().map(|v| v / c).collect());
            }
        }
    }

    enforce_connectivity(&mut labels, height, width);
    let mut count = compact(&mut labels);
    while count < n {
        split_largest(&mut labels, height, width, count);
        count += 1;
    }
    count = compact(&mut labels);
    Ok(SuperpixelMap {
        height,
        width,
        count,
        labels,
    })
}

/// Keeps the largest component of each label; other components join the
/// largest adjacent superpixel. Each round only merges into main components,
/// which therefore keep their labels, so the loop terminates.
fn enforce_connectivity(labels: &mut [usize], h: usize, w: usize) {
    loop {
        let (comp, info) = components(labels, h, w);
        let mut main = std::collections::HashMap::new();
        for (id, &(label, size)) in info.iter().enumerate() {
            let entry = main.entry(label).or_insert(id);
            if size > info[*entry].1 {
                *entry = id;
            }
        }
        let is_main = |id: usize| main[&info[id].0] == id;
        if (0..info.len()).all(is_main) {
            return;
        }
        let mut target: Vec<Option<usize>> = vec![None; info.len()];
        for p in 0..labels.len() {
            let id = comp[p];
            if is_main(id) {
                continue;
            }
            for q in neighbors(p, h, w) {
                let other = comp[q];
                if !is_main(other) {
                    continue;
                }
                let better = target[id].is_none_or(|t| {
                    let (s_new, s_old) = (info[other].1, info[t].1);
                    s_new > s_old || (s_new == s_old && other < t)
                });
                if better {
                    target[id] = Some(other);
                }
            }
        }
        for p in 0..labels.len() {
            if let Some(t) = target[comp[p]] {
                labels[p] = info[t].0;
            }
        }
    }
}

/// Splits the largest region (lowest label on ties) into two connected
/// parts; the new part gets label `next`.
fn split_largest(labels: &mut [usize], h: usize, w: usize, next: usize) {
    let mut sizes = vec![0usize; next];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let target = (0..next).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap_or(0);
    let bfs = |from: usize, labels: &[usize]| -> Vec<usize> {
        let mut seen = vec![false; labels.len()];
        let mut order = vec![from];
        seen[from] = true;
        let mut head = 0;
        while head < order.len() {
            let p = order[head];
            head += 1;
            for q in neighbors(p, h, w) {
                if !seen[q] && labels[q] == target {
                    seen[q] = true;
                    order.push(q);
                }
            }
        }
        order
    };
    let first = labels.iter().position(|&l| l == target).unwrap_or(0);
    let far = *bfs(first, labels).last().unwrap_or(&first);
    let order = bfs(far, labels);
    let half = order.len().div_ceil(2);
    for &p in &order[..half] {
        labels[p] = next;
    }
    // Pieces of the remainder cut off from its largest part join the ball.
    let (comp, info) = components(labels, h, w);
    let keep = (0..info.len())
        .filter(|&id| info[id].0 == target)
        .max_by(|&a, &b| info[a].1.cmp(&info[b].1).then(b.cmp(&a)));
    for p in 0..labels.len() {
        if labels[p] == target && Some(comp[p]) != keep {
            labels[p] = next;
        }
    }
}
