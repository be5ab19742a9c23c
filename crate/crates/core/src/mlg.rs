//! Multilayer graph container and its adjacency/Laplacian tensors.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MgspError, Result};
use crate::tensor::Tensor4;

/// Which tensor represents the graph in downstream spectral analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Adjacency,
    Laplacian,
}

/// Result of a partial-symmetry check `T_{αiβj} = T_{βjαi}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn check_undirected(t: &Tensor4, tol: f64) -> SymmetryReport {
    let max_deviation = match t.mlg_dims() {
        Ok((m, n)) => {
            let mut worst = 0.0f64;
            for a in 0..m {
                for i in 0..n {
                    for b in 0..m {
                        for j in 0..n {
                            worst = worst.max((t.get(a, i, b, j) - t.get(b, j, a, i)).abs());
                        }
                    }
                }
            }
            worst
        }
        Err(_) => f64::INFINITY,
    };
    SymmetryReport {
        max_deviation,
        tolerance: tol,
        passed: max_deviation <= tol,
    }
}

/// Tolerance used when validating graphs and decomposition inputs.
pub const SYMMETRY_TOL: f64 = 1e-9;

pub(crate) fn require_undirected(t: &Tensor4) -> Result<()> {
    t.mlg_dims()?;
    let report = check_undirected(t, SYMMETRY_TOL);
    if report.passed {
        Ok(())
    } else {
        Err(MgspError::graph(format!(
            "tensor is not undirected (max |T_aibj - T_bjai| = {:e})",
            report.max_deviation
        )))
    }
}

/// Combinatorial Laplacian `L = D − A` with `D_{αiαi} = Σ_{β,j} A_{αiβj}`.
pub fn build_laplacian(adjacency: &Tensor4) -> Result<Tensor4> {
    let (m, n) = adjacency.mlg_dims()?;
    if let Some(v) = adjacency.as_slice().iter().find(|v| **v < 0.0) {
        return Err(MgspError::graph(format!("negative adjacency entry {v}")));
    }
    let mut lap = Tensor4::zeros_mlg(m, n);
    for (dst, src) in lap.as_mut_slice().iter_mut().zip(adjacency.as_slice()) {
        *dst = -src;
    }
    for a in 0..m {
        for i in 0..n {
            let mut degree = 0.0;
            for b in 0..m {
                for j in 0..n {
                    degree += adjacency.get(a, i, b, j);
                }
            }
            lap.add_at(a, i, a, i, degree);
        }
    }
    Ok(lap)
}

/// Undirected multilayer graph with `M` layers of `N` entities each.
#[derive(Clone, Debug)]
pub struct MultilayerGraph {
    adjacency: Tensor4,
    representation: Representation,
    laplacian: Option<Tensor4>,
}

impl MultilayerGraph {
    /// Validates an adjacency tensor: undirected, nonnegative, no self-loops.
    pub fn from_adjacency(adjacency: Tensor4, representation: Representation) -> Result<Self> {
        let (m, n) = adjacency.mlg_dims()?;
        if let Some(v) = adjacency.as_slice().iter().find(|v| **v < 0.0) {
            return Err(MgspError::graph(format!("negative adjacency entry {v}")));
        }
        for a in 0..m {
            for i in 0..n {
                if adjacency.get(a, i, a, i) != 0.0 {
                    return Err(MgspError::graph(format!(
                        "self-loop at layer {}, entity {}",
                        a + 1,
                        i + 1
                    )));
                }
            }
        }
        require_undirected(&adjacency)?;
        let laplacian = match representation {
            Representation::Laplacian => Some(build_laplacian(&adjacency)?),
            Representation::Adjacency => None,
        };
        Ok(MultilayerGraph {
            adjacency,
            representation,
            laplacian,
        })
    }

    pub fn layers(&self) -> usize {
        self.adjacency.dims()[0]
    }

    pub fn entities(&self) -> usize {
        self.adjacency.dims()[1]
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn adjacency(&self) -> &Tensor4 {
        &self.adjacency
    }

    /// The tensor `F` selected by the representation tag.
    pub fn representing_tensor(&self) -> &Tensor4 {
        self.laplacian.as_ref().unwrap_or(&self.adjacency)
    }

    pub fn with_representation(self, representation: Representation) -> Result<Self> {
        MultilayerGraph::from_adjacency(self.adjacency, representation)
    }

    /// Writes the plain-text edge list: a `M N` header, then one
    /// `α i β j w` line (1-based) per undirected edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, n) = (self.layers(), self.entities());
        let mut out = format!("{m} {n}\n");
        for a in 0..m {
            for i in 0..n {
                for b in 0..m {
                    for j in 0..n {
                        if (b, j) <= (a, i) {
                            continue;
                        }
                        let wgt = self.adjacency.get(a, i, b, j);
                        if wgt != 0.0 {
                            let _ = writeln!(out, "{} {} {} {} {}", a + 1, i + 1, b + 1, j + 1, wgt);
                        }
                    }
                }
            }
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Parses the edge-list format. Each line sets both `(α,i,β,j)` and its
    /// mirror; `#` starts a comment.
    pub fn read_edge_list<R: Read>(r: R, representation: Representation) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut tensor: Option<Tensor4> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let bad = |what: &str| MgspError::Parse(format!("line {}: {what}", lineno + 1));
            match &mut tensor {
                None => {
                    if fields.len() != 2 {
                        return Err(bad("expected header `M N`"));
                    }
                    let m: usize = fields[0].parse().map_err(|_| bad("bad M"))?;
                    let n: usize = fields[1].parse().map_err(|_| bad("bad N"))?;
                    if m == 0 || n == 0 {
                        return Err(bad("M and N must be positive"));
                    }
                    tensor = Some(Tensor4::zeros_mlg(m, n));
                }
                Some(t) => {
                    if fields.len() != 5 {
                        return Err(bad("expected `a i b j w`"));
                    }
                    let (m, n) = (t.dims()[0], t.dims()[1]);
                    let mut idx = [0usize; 4];
                    for (k, slot) in idx.iter_mut().enumerate() {
                        let v: usize = fields[k].parse().map_err(|_| bad("bad index"))?;
                        let limit = if k % 2 == 0 { m } else { n };
                        if v == 0 || v > limit {
                            return Err(bad("index out of range"));
                        }
                        *slot = v - 1;
                    }
                    let w: f64 = fields[4].parse().map_err(|_| bad("bad weight"))?;
                    if !w.is_finite() {
                        return Err(bad("non-finite weight"));
                    }
                    let [a, i, b, j] = idx;
                    t.set(a, i, b, j, w);
                    t.set(b, j, a, i, w);
                }
            }
        }
        let tensor = tensor.ok_or_else(|| MgspError::Parse("empty edge list".into()))?;
        MultilayerGraph::from_adjacency(tensor, representation)
    }
}
