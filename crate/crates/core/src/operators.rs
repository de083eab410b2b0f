//! One-dimensional nodal spectral operators and their tensor-product application.
//!
//! Every element carries a Lagrange basis on `P + 1` quadrature nodes. From the
//! quadrature weights `H`, the weak derivative matrix `Q_ij = ∫ L_i L_j'` and the
//! face matrix `B` we get the summation-by-parts pair `D = H⁻¹ Q`, `Q + Qᵀ = B`.
//! Multi-dimensional derivatives are Kronecker products of the 1D operator and
//! are applied pencil by pencil along one axis at a time.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 16;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuadratureKind {
    /// Gauss-Legendre-Lobatto: both endpoints are nodes.
    Gll,
    /// Gauss-Legendre: no endpoint is a node.
    Gl,
    /// Gauss-Legendre-Radau with the left endpoint as a node.
    Glr,
}

impl QuadratureKind {
    pub const ALL: [QuadratureKind; 3] = [QuadratureKind::Gll, QuadratureKind::Gl, QuadratureKind::Glr];

    /// Highest monomial degree integrated exactly by the `P + 1` point rule.
    pub fn exactness(self, degree: usize) -> usize {
        match self {
            QuadratureKind::Gll => 2 * degree - 1,
            QuadratureKind::Glr => 2 * degree,
            QuadratureKind::Gl => 2 * degree + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadratureKind::Gll => "GLL",
            QuadratureKind::Gl => "GL",
            QuadratureKind::Glr => "GLR",
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub degree: usize,
    pub kind: QuadratureKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

fn newton<F>(mut x: f64, degree: usize, f: F) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    for _ in 0..NEWTON_MAX_ITER {
        let (value, slope) = f(x);
        let step = value / slope;
        x -= step;
        if step.abs() <= NEWTON_TOL * (1.0 + x.abs()) {
            // one polishing step at machine precision
            let (value, slope) = f(x);
            let x_final = x - value / slope;
            return Ok(if x_final.is_finite() { x_final } else { x });
        }
    }
    Err(Error::NonConvergence { degree })
}

/// Builds the `P + 1` point rule of the requested kind.
pub fn build_quadrature(degree: usize, kind: QuadratureKind) -> Result<QuadratureRule> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    let p = degree;
    let n = p + 1;
    let pi = std::f64::consts::PI;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);

    match kind {
        QuadratureKind::Gl => {
            for i in 0..n {
                let guess = -((2 * i + 1) as f64 * pi / (2 * n) as f64).cos();
                let x = newton(guess, degree, |x| legendre(n, x))?;
                let (_, dp) = legendre(n, x);
                nodes.push(x);
                weights.push(2.0 / ((1.0 - x * x) * dp * dp));
            }
        }
        QuadratureKind::Gll => {
            let pf = p as f64;
            nodes.push(-1.0);
            for i in 1..p {
                let guess = -(pi * i as f64 / pf).cos();
                let x = newton(guess, degree, |x| {
                    let (lp, dlp) = legendre(p, x);
                    let d2 = (2.0 * x * dlp - pf * (pf + 1.0) * lp) / (1.0 - x * x);
                    (dlp, d2)
                })?;
                nodes.push(x);
            }
            nodes.push(1.0);
            for &x in &nodes {
                let (lp, _) = legendre(p, x);
                weights.push(2.0 / (pf * (pf + 1.0) * lp * lp));
            }
        }
        QuadratureKind::Glr => {
            let nf = n as f64;
            nodes.push(-1.0);
            weights.push(2.0 / (nf * nf));
            for i in 1..n {
                let guess = -(2.0 * pi * i as f64 / (2 * p + 1) as f64).cos();
                let x = newton(guess, degree, |x| {
                    let (a, da) = legendre(p, x);
                    let (b, db) = legendre(p + 1, x);
                    (a + b, da + db)
                })?;
                let (lp, _) = legendre(p, x);
                nodes.push(x);
                weights.push((1.0 - x) / (nf * nf * lp * lp));
            }
        }
    }

    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonConvergence { degree });
    }
    Ok(QuadratureRule { degree, kind, nodes, weights })
}

/// Per-degree 1D operators. Matrices are stored row-major, `(P+1)²` entries.
#[derive(Clone, Debug)]
pub struct ElementOperators {
    pub rule: QuadratureRule,
    /// Diagonal of the norm matrix `H`.
    pub h: Vec<f64>,
    pub qmat: Vec<f64>,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
    pub e_left: Vec<f64>,
    pub e_right: Vec<f64>,
    bary: Vec<f64>,
}

impl ElementOperators {
    pub fn n(&self) -> usize {
        self.rule.nodes.len()
    }

    pub fn degree(&self) -> usize {
        self.rule.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    /// Values of all Lagrange cardinals at `x`.
    pub fn eval_basis_at(&self, x: f64) -> Result<Vec<f64>> {
        if !(x.abs() <= 1.0 + 1e-12) {
            return Err(Error::OutOfReferenceDomain(x));
        }
        Ok(lagrange_values(&self.rule.nodes, &self.bary, x))
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| xj - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

fn lagrange_values(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    if let Some(j) = nodes.iter().position(|&xj| xj == x) {
        let mut out = vec![0.0; n];
        out[j] = 1.0;
        return out;
    }
    let terms: Vec<f64> = nodes.iter().zip(bary).map(|(&xj, &wj)| wj / (x - xj)).collect();
    let denom: f64 = terms.iter().sum();
    terms.iter().map(|t| t / denom).collect()
}

pub fn build_operators(degree: usize, kind: QuadratureKind) -> Result<ElementOperators> {
    let rule = build_quadrature(degree, kind)?;
    let n = rule.nodes.len();
    let x = &rule.nodes;
    let bary = barycentric_weights(x);

    // D_ij = L_j'(x_i); the diagonal is fixed by the row-sum condition D·1 = 0.
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (x[i] - x[j]);
                d[i * n + j] = v;
                row_sum += v;
            }
        }
        d[i * n + i] = -row_sum;
    }

    // Q_ij = Σ_m h_m L_i(x_m) L_j'(x_m) = h_i D_ij, exact for all three rules.
    let h = rule.weights.clone();
    let qmat: Vec<f64> = (0..n * n).map(|idx| h[idx / n] * d[idx]).collect();

    let e_left = lagrange_values(x, &bary, -1.0);
    let e_right = lagrange_values(x, &bary, 1.0);
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = e_right[i] * e_right[j] - e_left[i] * e_left[j];
        }
    }

    Ok(ElementOperators { rule, h, qmat, d, b, e_left, e_right, bary })
}

/// Nodal coefficients of one element: `ncomp` components, each a tensor-product
/// block of `n^dim` nodes in lexicographic order with the x index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub dim: usize,
    pub ncomp: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl NodalField {
    pub fn zeros(dim: usize, ncomp: usize, n: usize) -> Self {
        Self { dim, ncomp, n, data: vec![0.0; ncomp * n.pow(dim as u32)] }
    }

    pub fn nodes_per_component(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let np = self.nodes_per_component();
        &self.data[c * np..(c + 1) * np]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let np = self.nodes_per_component();
        &mut self.data[c * np..(c + 1) * np]
    }

    /// Fills component `c` from a function of the reference coordinates.
    pub fn fill_component<F: Fn([f64; 3]) -> f64>(&mut self, c: usize, nodes: &[f64], f: F) {
        let (n, dim) = (self.n, self.dim);
        for (idx, value) in self.component_mut(c).iter_mut().enumerate() {
            *value = f(reference_point(idx, n, dim, nodes));
        }
    }
}

/// Reference coordinates of lexicographic node `idx`.
pub fn reference_point(idx: usize, n: usize, dim: usize, nodes: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut rest = idx;
    for axis_value in out.iter_mut().take(dim) {
        *axis_value = nodes[rest % n];
        rest /= n;
    }
    out
}

/// Applies `scale · D` along `axis` to one component block, overwriting `dst`.
pub(crate) fn derivative_along(
    src: &[f64],
    dst: &mut [f64],
    d: &[f64],
    n: usize,
    axis: usize,
    scale: f64,
) {
    let stride = n.pow(axis as u32);
    let block = stride * n;
    debug_assert_eq!(src.len(), dst.len());
    debug_assert_eq!(src.len() % block, 0);
    if stride == 1 {
        for (s, t) in src.chunks_exact(n).zip(dst.chunks_exact_mut(n)) {
            for i in 0..n {
                let row = &d[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for j in 0..n {
                    acc += row[j] * s[j];
                }
                t[i] = scale * acc;
            }
        }
        return;
    }
    for start in (0..src.len()).step_by(block) {
        let s = &src[start..start + block];
        let t = &mut dst[start..start + block];
        for i in 0..n {
            let out = &mut t[i * stride..(i + 1) * stride];
            out.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n {
                let coef = scale * d[i * n + j];
                let inp = &s[j * stride..(j + 1) * stride];
                for (o, v) in out.iter_mut().zip(inp) {
                    *o += coef * v;
                }
            }
        }
    }
}

/// `(2/Δξ)` times the 1D derivative applied to every pencil along `axis`.
pub fn apply_derivative(
    field: &NodalField,
    axis: usize,
    ops: &ElementOperators,
    spacing: f64,
) -> Result<NodalField> {
    let n = ops.n();
    if field.n != n {
        return Err(Error::ShapeMismatch(format!(
            "field has {} nodes per axis, operators have {}",
            field.n, n
        )));
    }
    if axis >= field.dim || field.data.len() != field.ncomp * field.nodes_per_component() {
        return Err(Error::ShapeMismatch(format!(
            "axis {axis} / data length {} for a {}-D field with {} components",
            field.data.len(),
            field.dim,
            field.ncomp
        )));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidExtent(format!("element spacing {spacing} must be positive")));
    }
    let mut out = NodalField::zeros(field.dim, field.ncomp, n);
    let np = field.nodes_per_component();
    for c in 0..field.ncomp {
        derivative_along(
            &field.data[c * np..(c + 1) * np],
            &mut out.data[c * np..(c + 1) * np],
            &ops.d,
            n,
            axis,
            2.0 / spacing,
        );
    }
    Ok(out)
}
