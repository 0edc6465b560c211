//! Vertex-domain graph filters built only from Laplacian-vector products.
//!
//! All filters here act on *normalized* signals (`x = D^{1/2} xhat`). Use
//! [`apply_filter`] to go from an image-domain patch to a filtered patch; it
//! owns the `D^{+-1/2}` round trip.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::graph::{dot, GraphSignal, LinearOperator, NormalizedLaplacian, PixelGraph};
use crate::oracle;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_STOP_BAND: f64 = 0.5;
pub const DEFAULT_RHO: f64 = 2.0;

/// Relative curvature `p^T L p / |p|^2` below which a CG step is abandoned.
pub const CG_BREAKDOWN_TOL: f64 = 1e-14;

/// Residual norm, relative to `|f| + 2 |x0|`, treated as exactly zero.
pub const CG_RESIDUAL_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    /// One step of `x - L x`.
    Jbf,
    /// `(I + rho L^2)^{-1}`, solved to convergence.
    Gbjbf,
    /// Truncated Chebyshev series of the GBJBF response.
    KPoly,
    /// Minimax low pass with shifted Chebyshev roots on `[l, 2]`.
    KCheb,
    /// `k` CG steps on `x^T L x - 2 x^T b` from `x0 = b`.
    KCg,
    /// `k` CG steps on `x^T L x` from `x0 = b`.
    KCg0,
}

impl FilterKind {
    pub const ALL: [FilterKind; 6] = [
        FilterKind::Jbf,
        FilterKind::Gbjbf,
        FilterKind::KPoly,
        FilterKind::KCheb,
        FilterKind::KCg,
        FilterKind::KCg0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Jbf => "jbf",
            FilterKind::Gbjbf => "gbjbf",
            FilterKind::KPoly => "poly",
            FilterKind::KCheb => "cheb",
            FilterKind::KCg => "cg",
            FilterKind::KCg0 => "cg0",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown filter '{s}'")))
    }
}

/// Which filter to run, with its parameters.
///
/// `k` is ignored by JBF and GBJBF, `l` is only read by k-CHEB and `rho` only
/// by GBJBF and k-POLY.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub k: usize,
    pub l: f64,
    pub rho: f64,
    /// Solve GBJBF through the dense eigendecomposition instead of CG.
    pub oracle: bool,
}

impl FilterSpec {
    pub fn new(kind: FilterKind) -> Self {
        Self {
            kind,
            k: DEFAULT_K,
            l: DEFAULT_STOP_BAND,
            rho: DEFAULT_RHO,
            oracle: false,
        }
    }

    pub fn with_oracle(mut self, oracle: bool) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_stop_band(mut self, l: f64) -> Self {
        self.l = l;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        use FilterKind::*;
        if matches!(self.kind, KPoly | KCheb | KCg | KCg0) && self.k == 0 {
            return Err(Error::InvalidParameter(format!("{}: k must be >= 1", self.kind)));
        }
        if self.kind == KCheb {
            check_stop_band(self.l)?;
        }
        if matches!(self.kind, Gbjbf | KPoly) && !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{}: rho must be positive, got {}",
                self.kind, self.rho
            )));
        }
        Ok(())
    }

    /// Short label such as `3-CG` or `JBF`.
    pub fn label(&self) -> String {
        match self.kind {
            FilterKind::Jbf | FilterKind::Gbjbf => self.kind.name().to_uppercase(),
            _ => format!("{}-{}", self.k, self.kind.name().to_uppercase()),
        }
    }
}

fn check_stop_band(l: f64) -> Result<()> {
    if l > 0.0 && l < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "stop band start must lie in (0, 2), got {l}"
        )))
    }
}

/// `x - L x`.
pub fn jbf<A: LinearOperator + ?Sized>(l: &A, b: &[f64]) -> Result<GraphSignal> {
    check_len("signal", l.dim(), b.len())?;
    let lb = l.apply_vec(b);
    Ok(b.iter().zip(&lb).map(|(x, y)| x - y).collect())
}

/// Roots and scale of the degree-`k` Chebyshev low pass with stop band `[l, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebDesign {
    pub k: usize,
    pub l: f64,
    /// Descending; this is also the application order.
    pub roots: Vec<f64>,
    /// `1 / prod(roots)`, so that the response is 1 at `lambda = 0`.
    pub scale: f64,
}

impl ChebDesign {
    /// `scale * prod(r_i - lambda)`.
    pub fn response(&self, lambda: f64) -> f64 {
        self.roots.iter().fold(self.scale, |acc, r| acc * (r - lambda))
    }
}

/// Maps the Chebyshev roots `cos(pi (2i - 1) / 2k)` from `[-1, 1]` onto `[l, 2]`.
pub fn cheb_design(k: usize, l: f64) -> Result<ChebDesign> {
    if k == 0 {
        return Err(Error::InvalidParameter("Chebyshev degree must be >= 1".into()));
    }
    check_stop_band(l)?;
    let half_width = (2.0 - l) / 2.0;
    let center = (2.0 + l) / 2.0;
    let roots: Vec<f64> = (1..=k)
        .map(|i| {
            let unit = (PI * (2 * i - 1) as f64 / (2 * k) as f64).cos();
            half_width * unit + center
        })
        .collect();
    let scale = 1.0 / roots.iter().product::<f64>();
    Ok(ChebDesign { k, l, roots, scale })
}

/// `x^0 = r_0 b`, then `x^i = r_i x^{i-1} - L x^{i-1}` over the roots in order.
pub fn cheb_filter<A: LinearOperator + ?Sized>(l: &A, b: &[f64], design: &ChebDesign) -> Result<GraphSignal> {
    cheb_filter_ordered(l, b, design.scale, &design.roots)
}

/// Root-product iteration with caller-chosen root order.
pub fn cheb_filter_ordered<A: LinearOperator + ?Sized>(
    l: &A,
    b: &[f64],
    scale: f64,
    roots: &[f64],
) -> Result<GraphSignal> {
    check_len("signal", l.dim(), b.len())?;
    let mut x: Vec<f64> = b.iter().map(|v| scale * v).collect();
    let mut lx = vec![0.0; x.len()];
    for &r in roots {
        l.apply_into(&x, &mut lx);
        for (xi, li) in x.iter_mut().zip(&lx) {
            *xi = r * *xi - li;
        }
    }
    Ok(GraphSignal::new(x))
}

/// Chebyshev series `sum_j c_j T_j(lambda - 1)` on `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpansion {
    pub k: usize,
    pub rho: f64,
    pub coeffs: Vec<f64>,
}

impl PolyExpansion {
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("empty Chebyshev series".into()));
        }
        Ok(Self {
            k: coeffs.len() - 1,
            rho: f64::NAN,
            coeffs,
        })
    }

    /// Clenshaw evaluation at a scalar `lambda`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let t = lambda - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }
}

/// Number of Gauss-Chebyshev nodes used for a degree-`k` expansion.
pub fn poly_quadrature_nodes(k: usize) -> usize {
    64.max(8 * k)
}

/// Degree-`k` Chebyshev coefficients of `target` over `lambda = 1 + cos(theta)`,
/// computed with `nodes`-point Gauss-Chebyshev quadrature.
pub fn chebyshev_coefficients(target: impl Fn(f64) -> f64, k: usize, nodes: usize) -> Vec<f64> {
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|m| {
            let theta = PI * (m as f64 + 0.5) / nodes as f64;
            (theta, target(1.0 + theta.cos()))
        })
        .collect();
    (0..=k)
        .map(|j| {
            let s: f64 = samples.iter().map(|(th, h)| h * (j as f64 * th).cos()).sum();
            let c = 2.0 * s / nodes as f64;
            if j == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect()
}

/// Truncated Chebyshev series of the GBJBF response `1 / (1 + rho lambda^2)`.
///
/// `rho = 0` is accepted and yields the constant series `{1, 0, ...}`.
pub fn poly_expand_gbjbf(k: usize, rho: f64) -> Result<PolyExpansion> {
    if k == 0 {
        return Err(Error::InvalidParameter("series degree must be >= 1".into()));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must be finite and >= 0, got {rho}"
        )));
    }
    let coeffs = chebyshev_coefficients(|lam| 1.0 / (1.0 + rho * lam * lam), k, poly_quadrature_nodes(k));
    Ok(PolyExpansion { k, rho, coeffs })
}

/// Applies the series with the three-term recurrence in `t = L - I`; exactly
/// `k` Laplacian products.
pub fn poly_filter<A: LinearOperator + ?Sized>(l: &A, b: &[f64], p: &PolyExpansion) -> Result<GraphSignal> {
    check_len("signal", l.dim(), b.len())?;
    let n = b.len();
    let mut out: Vec<f64> = b.iter().map(|v| p.coeffs[0] * v).collect();
    if p.coeffs.len() == 1 {
        return Ok(GraphSignal::new(out));
    }
    let mut prev = b.to_vec();
    let mut cur = l.apply_vec(b);
    for (c, bi) in cur.iter_mut().zip(b) {
        *c -= bi;
    }
    for (o, c) in out.iter_mut().zip(&cur) {
        *o += p.coeffs[1] * c;
    }
    let mut tmp = vec![0.0; n];
    for &cj in &p.coeffs[2..] {
        l.apply_into(&cur, &mut tmp);
        for i in 0..n {
            let next = 2.0 * (tmp[i] - cur[i]) - prev[i];
            prev[i] = cur[i];
            cur[i] = next;
            out[i] += cj * next;
        }
    }
    Ok(GraphSignal::new(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgVariant {
    /// `x0 = f = b`.
    Cg,
    /// `x0 = b`, `f = 0`.
    Cg0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: GraphSignal,
    /// Steps actually taken.
    pub iterations: usize,
    /// Set when the curvature along the search direction vanished before `k` steps.
    pub early_termination: bool,
    /// `x^T L x - 2 x^T f` at `x^0, x^1, ...`.
    pub objective: Vec<f64>,
}

/// Hestenes-Stiefel conjugate gradients on `x^T A x - 2 x^T f` from `x0`.
///
/// After `m` steps the iterate minimizes the quadratic over
/// `x0 + span{r0, A r0, ..., A^{m-1} r0}` with `r0 = f - A x0`. A step whose
/// curvature `p^T A p` is at most [`CG_BREAKDOWN_TOL`]` |p|^2` is not taken, and
/// iteration also stops once the residual is at round-off level
/// ([`CG_RESIDUAL_FLOOR`]). `A` is assumed to have norm at most 2.
pub fn cg_minimize<A: LinearOperator + ?Sized>(a: &A, x0: &[f64], f: &[f64], k: usize) -> Result<CgOutcome> {
    let n = a.dim();
    check_len("initial iterate", n, x0.len())?;
    check_len("right-hand side", n, f.len())?;
    let mut x = x0.to_vec();
    let mut ap = a.apply_vec(&x);
    let objective_at = |x: &[f64], ax: &[f64]| dot(x, ax) - 2.0 * dot(x, f);
    let mut objective = vec![objective_at(&x, &ap)];
    let mut r: Vec<f64> = f.iter().zip(&ap).map(|(fi, ai)| fi - ai).collect();
    let mut ax = ap.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let residual_floor = CG_RESIDUAL_FLOOR * (dot(f, f).sqrt() + 2.0 * dot(x0, x0).sqrt());
    let mut iterations = 0;
    let mut early_termination = false;
    while iterations < k {
        if rr.sqrt() <= residual_floor {
            early_termination = true;
            break;
        }
        a.apply_into(&p, &mut ap);
        let curv = dot(&p, &ap);
        let pp = dot(&p, &p);
        if curv.is_nan() || curv <= CG_BREAKDOWN_TOL * pp {
            early_termination = true;
            break;
        }
        let alpha = rr / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            ax[i] += alpha * ap[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        objective.push(objective_at(&x, &ax));
        let rr_new = dot(&r, &r);
        let beta = if rr > 0.0 { rr_new / rr } else { 0.0 };
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(CgOutcome {
        x: GraphSignal::new(x),
        iterations,
        early_termination,
        objective,
    })
}

/// The k-step CG filters.
///
/// Isolated nodes carry no graph information: their entries of `f` are taken
/// as zero, which keeps them out of every residual and search direction, so
/// they come back unchanged and do not influence the step sizes.
pub fn cg_filter(l: &NormalizedLaplacian, b: &[f64], k: usize, variant: CgVariant) -> Result<CgOutcome> {
    check_len("signal", l.n(), b.len())?;
    if k == 0 {
        return Err(Error::InvalidParameter("CG iteration count must be >= 1".into()));
    }
    let f: Vec<f64> = match variant {
        CgVariant::Cg => b
            .iter()
            .enumerate()
            .map(|(i, &v)| if l.is_isolated(i) { 0.0 } else { v })
            .collect(),
        CgVariant::Cg0 => vec![0.0; b.len()],
    };
    cg_minimize(l, b, &f, k)
}

/// Runs the filter named by `spec` on an already normalized signal.
pub fn filter_normalized(spec: &FilterSpec, l: &NormalizedLaplacian, b: &[f64]) -> Result<GraphSignal> {
    spec.validate()?;
    match spec.kind {
        FilterKind::Jbf => jbf(l, b),
        FilterKind::Gbjbf if spec.oracle => oracle::gbjbf_dense(&oracle::dense_eig(l)?, spec.rho, b),
        FilterKind::Gbjbf => oracle::gbjbf_exact(l, spec.rho, b),
        FilterKind::KPoly => poly_filter(l, b, &poly_expand_gbjbf(spec.k, spec.rho)?),
        FilterKind::KCheb => cheb_filter(l, b, &cheb_design(spec.k, spec.l)?),
        FilterKind::KCg => Ok(cg_filter(l, b, spec.k, CgVariant::Cg)?.x),
        FilterKind::KCg0 => Ok(cg_filter(l, b, spec.k, CgVariant::Cg0)?.x),
    }
}

/// Normalizes `b_hat`, filters, and denormalizes.
///
/// Isolated nodes (holes, or pixels cut off by holes) are copied from the input
/// bit for bit for every filter kind.
pub fn apply_filter(
    spec: &FilterSpec,
    l: &NormalizedLaplacian,
    graph: &PixelGraph,
    b_hat: &[f64],
) -> Result<GraphSignal> {
    check_len("graph vs operator", graph.n_nodes(), l.n())?;
    let b = graph.normalize_signal(b_hat)?;
    let x = filter_normalized(spec, l, &b)?;
    let mut out = graph.denormalize_signal(&x)?;
    for (i, o) in out.iter_mut().enumerate() {
        if graph.is_isolated(i) {
            *o = b_hat[i];
        }
    }
    Ok(out)
}
