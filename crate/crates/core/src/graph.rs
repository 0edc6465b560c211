//! Pixel graph construction and the symmetric normalized Laplacian.
//!
//! Pixels are nodes of a 4-connected graph. Edge weights come from the
//! intensity term of a joint bilateral kernel evaluated on a guide image; on a
//! 4-connected grid the spatial term is the same for every edge and cancels in
//! `D^{-1/2} W D^{-1/2}`, so it is fixed to one. Hole pixels get no edges.

use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::image::{HoleMask, ImageGray};

/// Largest graph for which a dense matrix may be materialized.
pub const DENSE_LIMIT: usize = 8192;

/// Default intensity-kernel width on the 0..255 scale.
pub const DEFAULT_SIGMA_R: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub sigma_r: f64,
    /// Spatial kernel width. Constant over a 4-connected grid, so unused.
    pub sigma_s: f64,
}

impl WeightParams {
    pub fn new(sigma_r: f64, sigma_s: f64) -> Result<Self> {
        for (name, v) in [("sigma_r", sigma_r), ("sigma_s", sigma_s)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { sigma_r, sigma_s })
    }

    /// Intensity kernel `exp(-(a-b)^2 / (2 sigma_r^2))`.
    #[inline]
    pub fn weight(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        (-(d * d) / (2.0 * self.sigma_r * self.sigma_r)).exp()
    }
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            sigma_r: DEFAULT_SIGMA_R,
            sigma_s: 1.0,
        }
    }
}

/// One undirected edge, stored once with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
}

impl PixelGraph {
    /// Builds a graph from an explicit edge list. Edges are canonicalized to
    /// `i < j` and sorted; self loops and negative or non-finite weights are rejected.
    pub fn from_edges(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a},{b}) outside {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self loop at node {a}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!("edge ({a},{b}) has weight {w}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            list.push(Edge { i, j, w });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if list.windows(2).any(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j)) {
            return Err(Error::InvalidParameter("duplicate edge".into()));
        }
        let mut degrees = vec![0.0; n_nodes];
        for e in &list {
            degrees[e.i] += e.w;
            degrees[e.j] += e.w;
        }
        Ok(Self {
            n_nodes,
            edges: list,
            degrees,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.degrees[i] == 0.0
    }

    /// The vector `sqrt(degrees)`, which spans the Laplacian null space on each component.
    pub fn sqrt_degrees(&self) -> GraphSignal {
        GraphSignal::new(self.degrees.iter().map(|d| d.sqrt()).collect())
    }

    /// `x = D^{1/2} xhat`; identity on degree-zero nodes.
    pub fn normalize_signal(&self, xhat: &[f64]) -> Result<GraphSignal> {
        check_len("signal", self.n_nodes, xhat.len())?;
        Ok(self
            .degrees
            .iter()
            .zip(xhat)
            .map(|(&d, &v)| if d > 0.0 { v * d.sqrt() } else { v })
            .collect())
    }

    /// `xhat = D^{-1/2} x`; identity on degree-zero nodes.
    pub fn denormalize_signal(&self, x: &[f64]) -> Result<GraphSignal> {
        check_len("signal", self.n_nodes, x.len())?;
        Ok(self
            .degrees
            .iter()
            .zip(x)
            .map(|(&d, &v)| if d > 0.0 { v / d.sqrt() } else { v })
            .collect())
    }
}

/// Builds the hole-aware 4-connected bilateral graph over `guide`.
///
/// Nodes are pixels in row-major order. For every pixel the right and the
/// lower neighbour are visited, so the edge list comes out sorted by `(i, j)`.
pub fn build_graph(guide: &ImageGray, mask: &HoleMask, params: &WeightParams) -> Result<PixelGraph> {
    mask.matches(guide)?;
    let (w, h) = (guide.width(), guide.height());
    let g = guide.samples();
    let holes = mask.flags();
    let n = w * h;
    let mut edges = Vec::with_capacity(2 * n);
    let mut degrees = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if holes[i] {
                continue;
            }
            let mut link = |j: usize| {
                if !holes[j] {
                    let wt = params.weight(g[i], g[j]);
                    degrees[i] += wt;
                    degrees[j] += wt;
                    edges.push(Edge { i, j, w: wt });
                }
            };
            if x + 1 < w {
                link(i + 1);
            }
            if y + 1 < h {
                link(i + w);
            }
        }
    }
    Ok(PixelGraph {
        n_nodes: n,
        edges,
        degrees,
    })
}

/// A square linear operator acting on real vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y <- A x`. Both slices have length [`LinearOperator::dim`].
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

/// `L = I - D^{-1/2} W D^{-1/2}` in compressed-row form.
///
/// Rows and columns of isolated nodes are identically zero. Each off-diagonal
/// value is computed once and written to both `(i, j)` and `(j, i)`, so the
/// operator is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLaplacian {
    n: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedLaplacian {
    pub fn from_graph(g: &PixelGraph) -> Self {
        let n = g.n_nodes;
        let inv_sqrt: Vec<f64> = g
            .degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let diag = g.degrees.iter().map(|&d| if d > 0.0 { 1.0 } else { 0.0 }).collect();

        let mut counts = vec![0usize; n];
        for e in &g.edges {
            counts[e.i] += 1;
            counts[e.j] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        for e in &g.edges {
            let v = -e.w * inv_sqrt[e.i] * inv_sqrt[e.j];
            col_idx[fill[e.i]] = e.j;
            values[fill[e.i]] = v;
            fill[e.i] += 1;
            col_idx[fill[e.j]] = e.i;
            values[fill[e.j]] = v;
            fill[e.j] += 1;
        }
        Self {
            n,
            diag,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// True for degree-zero nodes, whose row and column are zero.
    pub fn is_isolated(&self, i: usize) -> bool {
        self.diag[i] == 0.0
    }

    pub fn apply(&self, x: &[f64]) -> Result<GraphSignal> {
        check_len("signal", self.n, x.len())?;
        Ok(GraphSignal::new(self.apply_vec(x)))
    }

    /// Dense copy of the operator; refused above [`DENSE_LIMIT`] nodes.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n: self.n,
                limit: DENSE_LIMIT,
            });
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.values[k];
            }
        }
        Ok(m)
    }
}

impl LinearOperator for NormalizedLaplacian {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }
}

pub fn normalized_laplacian(g: &PixelGraph) -> NormalizedLaplacian {
    NormalizedLaplacian::from_graph(g)
}

/// A real vector with one value per graph node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphSignal(Vec<f64>);

impl GraphSignal {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for GraphSignal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GraphSignal {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for GraphSignal {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for GraphSignal {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
