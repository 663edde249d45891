//! Graph shift operators stored in compressed sparse rows.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GsoKind {
    /// `S = W`, zero diagonal.
    Adjacency,
    /// `S = W / λ_max(W)`, zero diagonal, spectral radius 1.
    ScaledAdjacency,
    /// `S = I − D^{−1/2} W D^{−1/2}`.
    NormalizedLaplacian,
    /// Directed circular delay, `[S]_{i, i−1 mod n} = 1`.
    CycleShift,
    /// Any explicitly supplied operator.
    Custom,
}

impl GsoKind {
    pub fn tag(self) -> &'static str {
        match self {
            GsoKind::Adjacency => "adjacency",
            GsoKind::ScaledAdjacency => "scaled-adjacency",
            GsoKind::NormalizedLaplacian => "normalized-laplacian",
            GsoKind::CycleShift => "cycle-shift",
            GsoKind::Custom => "custom",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "adjacency" => Some(GsoKind::Adjacency),
            "scaled-adjacency" => Some(GsoKind::ScaledAdjacency),
            "normalized-laplacian" => Some(GsoKind::NormalizedLaplacian),
            "cycle-shift" => Some(GsoKind::CycleShift),
            "custom" => Some(GsoKind::Custom),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            row_ptr,
            cols: entries.iter().map(|e| e.1).collect(),
            vals: entries.iter().map(|e| e.2).collect(),
        }
    }

    #[inline]
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                acc += v * x[*c];
            }
            *o = acc;
        }
    }
}

/// An `n × n` graph shift operator. Both `S` and `Sᵀ` are kept in CSR form
/// so forward and adjoint applications are both row-oriented sparse matvecs.
#[derive(Debug, Clone, PartialEq)]
pub struct Gso {
    n: usize,
    kind: GsoKind,
    s: Csr,
    st: Csr,
    /// Dense copy of `S` for operators dense enough that one GEMM over all
    /// blocks beats per-block sparse products.
    dense: Option<Array2<f64>>,
}

/// Dense shifting pays off once `S` has at least `n²/8` nonzeros.
fn prefers_dense(n: usize, nnz: usize) -> bool {
    n * n <= 8 * nnz.max(1)
}

impl Gso {
    /// Builds `S` from `(row, col, value)` triplets; exact zeros are dropped.
    pub fn from_triplets(
        n: usize,
        kind: GsoKind,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("shift operator needs n >= 1".into()));
        }
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) outside a {n}x{n} operator"
                )));
            }
            if v != 0.0 {
                list.push((i, j, v));
            }
        }
        list.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if list.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument("duplicate operator entry".into()));
        }
        let transposed = list.iter().map(|&(i, j, v)| (j, i, v)).collect();
        let dense = prefers_dense(n, list.len()).then(|| {
            let mut d = Array2::zeros((n, n));
            for &(i, j, v) in &list {
                d[[i, j]] = v;
            }
            d
        });
        Ok(Self {
            n,
            kind,
            s: Csr::from_triplets(n, list),
            st: Csr::from_triplets(n, transposed),
            dense,
        })
    }

    /// Dense matrix to operator; for tests and small custom operators.
    pub fn from_dense(dense: ArrayView2<f64>) -> Result<Self> {
        let (r, c) = dense.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!("{r}x{c} is not square")));
        }
        Self::from_triplets(
            r,
            GsoKind::Custom,
            dense.indexed_iter().map(|((i, j), &v)| (i, j, v)),
        )
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_triplets(n, GsoKind::Custom, (0..n).map(|i| (i, i, 1.0)))
    }

    /// Shift operator of `g` of the requested kind (`Adjacency` or
    /// `NormalizedLaplacian`; a cycle shift comes from [`Gso::cycle`]).
    pub fn from_graph(g: &Graph, kind: GsoKind) -> Result<Self> {
        let n = g.node_count();
        match kind {
            GsoKind::Adjacency => Self::from_triplets(
                n,
                kind,
                g.edges()
                    .iter()
                    .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)]),
            ),
            GsoKind::ScaledAdjacency => {
                let adjacency = Self::from_graph(g, GsoKind::Adjacency)?;
                let lambda = adjacency.largest_eigenvalue_symmetric();
                if !(lambda > 0.0) {
                    return Err(Error::InvalidArgument(
                        "adjacency has no positive eigenvalue to scale by".into(),
                    ));
                }
                Self::from_triplets(
                    n,
                    kind,
                    adjacency.entries().map(|(i, j, v)| (i, j, v / lambda)).collect::<Vec<_>>(),
                )
            }
            GsoKind::NormalizedLaplacian => {
                let mut inv_sqrt = Vec::with_capacity(n);
                for i in 0..n {
                    let d = g.degree(i);
                    if d <= 0.0 {
                        return Err(Error::ZeroDegree { node: i });
                    }
                    inv_sqrt.push(1.0 / d.sqrt());
                }
                let diag = (0..n).map(|i| (i, i, 1.0));
                let off = g.edges().iter().flat_map(|&(i, j, w)| {
                    let v = -w * inv_sqrt[i] * inv_sqrt[j];
                    [(i, j, v), (j, i, v)]
                });
                Self::from_triplets(n, kind, diag.chain(off).collect::<Vec<_>>())
            }
            GsoKind::CycleShift => Self::cycle(n),
            GsoKind::Custom => Err(Error::InvalidArgument(
                "a custom operator cannot be derived from a graph".into(),
            )),
        }
    }

    /// The circular delay on `n` nodes: `(Sx)_i = x_{i−1 mod n}`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("cycle shift needs n >= 2".into()));
        }
        Self::from_triplets(
            n,
            GsoKind::CycleShift,
            (0..n).map(|i| (i, (i + n - 1) % n, 1.0)),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GsoKind {
        self.kind
    }

    pub fn nnz(&self) -> usize {
        self.s.vals.len()
    }

    /// Nonzero entries of `S` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.s.row_ptr[i]..self.s.row_ptr[i + 1]).map(move |p| (i, self.s.cols[p], self.s.vals[p]))
        })
    }

    /// Largest (most positive) eigenvalue, assuming `S` is symmetric.
    ///
    /// Power iteration on `S + cI` with `c` the largest absolute row sum,
    /// which makes the spectrum nonnegative so the iteration cannot
    /// oscillate between `±λ`.
    pub fn largest_eigenvalue_symmetric(&self) -> f64 {
        let n = self.n;
        let shift = (0..n)
            .map(|i| self.s.vals[self.s.row_ptr[i]..self.s.row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if shift == 0.0 {
            return 0.0;
        }
        // deterministic start with a small tilt so it is not orthogonal to
        // the dominant eigenvector of a non-Perron matrix
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / (n as f64 * 7.0)).collect();
        let mut y = vec![0.0; n];
        let mut estimate = 0.0;
        for _ in 0..100_000 {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
            self.apply(&x, &mut y);
            y.iter_mut().zip(&x).for_each(|(yi, xi)| *yi += shift * xi);
            let rayleigh: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
            let converged = (rayleigh - estimate).abs() <= 1e-15 * rayleigh.abs();
            estimate = rayleigh;
            std::mem::swap(&mut x, &mut y);
            if converged {
                break;
            }
        }
        estimate - shift
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.entries() {
            d[[i, j]] = v;
        }
        d
    }

    /// `out = S x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.s.matvec(x, out);
    }

    /// `out = Sᵀ x`.
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.st.matvec(x, out);
    }

    /// Applies `S` to every length-`n` block of every row of `x`, i.e. to
    /// every graph signal of a feature-major batch.
    pub fn shift_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.dense {
            Some(d) => self.blockwise_dense(d.t(), x),
            None => self.blockwise(&self.s, x),
        }
    }

    /// Like [`Gso::shift_rows`] with `Sᵀ`.
    pub fn shift_rows_transpose(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.dense {
            Some(d) => self.blockwise_dense(d.view(), x),
            None => self.blockwise(&self.st, x),
        }
    }

    /// Every length-`n` block is a row of an `(rows·B) × n` matrix, so the
    /// whole batch shifts as one product with `m`.
    fn blockwise_dense(&self, m: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_columns(x.ncols())?;
        let (rows, cols) = x.dim();
        let blocks = rows * (cols / self.n);
        let x = x.as_standard_layout();
        let xr = x.to_shape((blocks, self.n)).expect("standard layout");
        let mut out = Array2::zeros((blocks, self.n));
        general_mat_mul(1.0, &xr, &m, 0.0, &mut out);
        Ok(out.into_shape_with_order((rows, cols)).expect("contiguous"))
    }

    /// Shifts through the sparse rows regardless of density.
    #[cfg(test)]
    fn shift_rows_sparse(&self, x: ArrayView2<f64>, transpose: bool) -> Result<Array2<f64>> {
        self.blockwise(if transpose { &self.st } else { &self.s }, x)
    }

    fn blockwise(&self, m: &Csr, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_columns(x.ncols())?;
        let x = x.as_standard_layout();
        let mut out = Array2::zeros(x.raw_dim());
        let src = x.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("fresh array");
        for (xs, ys) in src.chunks_exact(self.n).zip(dst.chunks_exact_mut(self.n)) {
            m.matvec(xs, ys);
        }
        Ok(out)
    }

    pub(crate) fn check_columns(&self, cols: usize) -> Result<()> {
        if cols == 0 || cols % self.n != 0 {
            return Err(Error::DimensionMismatch(format!(
                "signal has {cols} columns, expected a positive multiple of {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// `[x, Sx, S²x, …, S^{K−1}x]`, each step one sparse application to every
/// signal in `x`.
pub fn shift_powers(s: &Gso, x: ArrayView2<f64>, k_taps: usize) -> Result<Vec<Array2<f64>>> {
    if k_taps == 0 {
        return Err(Error::InvalidArgument("need at least one tap".into()));
    }
    s.check_columns(x.ncols())?;
    let mut powers = Vec::with_capacity(k_taps);
    powers.push(x.to_owned());
    for k in 1..k_taps {
        let next = s.shift_rows(powers[k - 1].view())?;
        powers.push(next);
    }
    Ok(powers)
}

/// `[x, Sᵀx, …, (Sᵀ)^{K−1}x]`.
pub fn shift_powers_transpose(
    s: &Gso,
    x: ArrayView2<f64>,
    k_taps: usize,
) -> Result<Vec<Array2<f64>>> {
    if k_taps == 0 {
        return Err(Error::InvalidArgument("need at least one tap".into()));
    }
    s.check_columns(x.ncols())?;
    let mut powers = Vec::with_capacity(k_taps);
    powers.push(x.to_owned());
    for k in 1..k_taps {
        let next = s.shift_rows_transpose(powers[k - 1].view())?;
        powers.push(next);
    }
    Ok(powers)
}
