//! MIMO graph filters in four parameterizations, with hand-derived
//! backward passes.
//!
//! A MIMO graph filter maps `Q` input graph signals to `P` output signals:
//!
//! ```text
//! y_p = Σ_q Σ_k [H_k]_{p,q} S^k x_q,     k = 0 … K−1
//! ```
//!
//! The structures differ only in how the `P × Q` tap matrices `H_k` are
//! parameterized:
//!
//! | structure            | stored taps      | `H_k[p][q]`           |
//! |----------------------|------------------|-----------------------|
//! | `Full`               | `K × P × Q`      | `h[k][p][q]`          |
//! | `AggregateInputs`    | `K × P`          | `h[k][p]`             |
//! | `ConsolidateOutputs` | `K × Q`          | `h[k][q]`             |
//! | `Toeplitz`           | `K × (P+Q−1)`    | `h[k][p − q + Q − 1]` |
//!
//! Indices are 0-based throughout; tap `k = 0` multiplies `S⁰ = I`.

use std::fmt::Write as _;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::gso::{shift_powers, shift_powers_transpose, Gso};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    /// One filter per (output, input) pair: `PQK` taps.
    Full,
    /// Sum the inputs, then `P` filters: `PK` taps.
    AggregateInputs,
    /// One filter per input, summed into a single output replicated `P` times: `QK` taps.
    ConsolidateOutputs,
    /// Taps shared along diagonals `p − q`: `(P+Q−1)K` taps.
    Toeplitz,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Full,
        Structure::AggregateInputs,
        Structure::ConsolidateOutputs,
        Structure::Toeplitz,
    ];

    /// Stable machine-readable tag.
    pub fn tag(self) -> &'static str {
        match self {
            Structure::Full => "full",
            Structure::AggregateInputs => "aggregate-inputs",
            Structure::ConsolidateOutputs => "consolidate-outputs",
            Structure::Toeplitz => "toeplitz",
        }
    }

    /// Name by parameter count, as used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Structure::Full => "PQK",
            Structure::AggregateInputs => "PK",
            Structure::ConsolidateOutputs => "QK",
            Structure::Toeplitz => "(P+Q-1)K",
        }
    }

    /// Accepts either the tag or the label, case-insensitively.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|st| st.tag().eq_ignore_ascii_case(s) || st.label().eq_ignore_ascii_case(s))
    }

    /// Taps stored per shift power.
    pub fn tap_width(self, p_out: usize, q_in: usize) -> usize {
        match self {
            Structure::Full => p_out * q_in,
            Structure::AggregateInputs => p_out,
            Structure::ConsolidateOutputs => q_in,
            Structure::Toeplitz => p_out + q_in - 1,
        }
    }
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Trainable parameters of one filter: `PQK`, `PK`, `QK` or `(P+Q−1)K`.
pub fn param_count(structure: Structure, p_out: usize, q_in: usize, k_taps: usize) -> usize {
    structure.tap_width(p_out, q_in) * k_taps
}

/// Tap tensor, tagged by structure. Shapes are listed in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub enum Taps {
    Full(Array3<f64>),
    AggregateInputs(Array2<f64>),
    ConsolidateOutputs(Array2<f64>),
    Toeplitz(Array2<f64>),
}

impl Taps {
    pub fn zeros(structure: Structure, p_out: usize, q_in: usize, k_taps: usize) -> Self {
        let w = structure.tap_width(p_out, q_in);
        match structure {
            Structure::Full => Taps::Full(Array3::zeros((k_taps, p_out, q_in))),
            Structure::AggregateInputs => Taps::AggregateInputs(Array2::zeros((k_taps, w))),
            Structure::ConsolidateOutputs => Taps::ConsolidateOutputs(Array2::zeros((k_taps, w))),
            Structure::Toeplitz => Taps::Toeplitz(Array2::zeros((k_taps, w))),
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            Taps::Full(_) => Structure::Full,
            Taps::AggregateInputs(_) => Structure::AggregateInputs,
            Taps::ConsolidateOutputs(_) => Structure::ConsolidateOutputs,
            Taps::Toeplitz(_) => Structure::Toeplitz,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Taps::Full(a) => a.shape(),
            Taps::AggregateInputs(a) | Taps::ConsolidateOutputs(a) | Taps::Toeplitz(a) => a.shape(),
        }
    }

    /// Row-major view of all taps.
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Taps::Full(a) => a.as_slice(),
            Taps::AggregateInputs(a) | Taps::ConsolidateOutputs(a) | Taps::Toeplitz(a) => {
                a.as_slice()
            }
        }
        .expect("tap tensors are always in standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            Taps::Full(a) => a.as_slice_mut(),
            Taps::AggregateInputs(a) | Taps::ConsolidateOutputs(a) | Taps::Toeplitz(a) => {
                a.as_slice_mut()
            }
        }
        .expect("tap tensors are always in standard layout")
    }

    pub fn len(&self) -> usize {
        self.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Taps for shift power `k` as a `K`-free 2-D view: `P × Q` for `Full`,
    /// `1 × width` otherwise.
    fn power(&self, k: usize) -> ArrayView2<'_, f64> {
        match self {
            Taps::Full(a) => a.index_axis(Axis(0), k),
            Taps::AggregateInputs(a) | Taps::ConsolidateOutputs(a) | Taps::Toeplitz(a) => {
                a.slice(s![k..k + 1, ..])
            }
        }
    }
}

/// One graph-convolution filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoFilterParams {
    p_out: usize,
    q_in: usize,
    k_taps: usize,
    taps: Taps,
}

/// Gradients of `⟨d_y, y⟩` with respect to the taps and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterGradients {
    pub d_taps: Taps,
    pub d_input: Array2<f64>,
}

impl MimoFilterParams {
    pub fn zeros(structure: Structure, p_out: usize, q_in: usize, k_taps: usize) -> Result<Self> {
        check_dims(p_out, q_in, k_taps)?;
        Ok(Self {
            p_out,
            q_in,
            k_taps,
            taps: Taps::zeros(structure, p_out, q_in, k_taps),
        })
    }

    pub fn from_taps(p_out: usize, q_in: usize, k_taps: usize, taps: Taps) -> Result<Self> {
        check_dims(p_out, q_in, k_taps)?;
        let expected = Taps::zeros(taps.structure(), p_out, q_in, k_taps);
        if expected.shape() != taps.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{} taps have shape {:?}, expected {:?} for P={p_out}, Q={q_in}, K={k_taps}",
                taps.structure(),
                taps.shape(),
                expected.shape()
            )));
        }
        Ok(Self {
            p_out,
            q_in,
            k_taps,
            taps,
        })
    }

    /// Taps drawn uniformly from `[−bound, bound]`.
    pub fn random_uniform(
        structure: Structure,
        p_out: usize,
        q_in: usize,
        k_taps: usize,
        bound: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut params = Self::zeros(structure, p_out, q_in, k_taps)?;
        let dist = Uniform::new_inclusive(-bound, bound);
        for v in params.taps.as_slice_mut() {
            *v = dist.sample(rng);
        }
        Ok(params)
    }

    pub fn structure(&self) -> Structure {
        self.taps.structure()
    }

    pub fn p_out(&self) -> usize {
        self.p_out
    }

    pub fn q_in(&self) -> usize {
        self.q_in
    }

    pub fn k_taps(&self) -> usize {
        self.k_taps
    }

    pub fn taps(&self) -> &Taps {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut Taps {
        &mut self.taps
    }

    pub fn param_count(&self) -> usize {
        param_count(self.structure(), self.p_out, self.q_in, self.k_taps)
    }

    /// Materializes the `K` dense `P × Q` matrices `H_k`.
    pub fn expand_to_full(&self) -> Vec<Array2<f64>> {
        let (p_out, q_in) = (self.p_out, self.q_in);
        match &self.taps {
            Taps::Full(h) => h.outer_iter().map(|hk| hk.to_owned()).collect(),
            Taps::AggregateInputs(h) => h
                .outer_iter()
                .map(|row| Array2::from_shape_fn((p_out, q_in), |(p, _)| row[p]))
                .collect(),
            Taps::ConsolidateOutputs(h) => h
                .outer_iter()
                .map(|row| Array2::from_shape_fn((p_out, q_in), |(_, q)| row[q]))
                .collect(),
            Taps::Toeplitz(h) => h
                .outer_iter()
                .map(|row| Array2::from_shape_fn((p_out, q_in), |(p, q)| row[p + q_in - 1 - q]))
                .collect(),
        }
    }

    /// `[H_0 … H_{K−1}]` side by side, `P × (K·Q)`.
    fn concat_taps(&self) -> Array2<f64> {
        let q_in = self.q_in;
        match &self.taps {
            Taps::Full(h) => Array2::from_shape_fn((self.p_out, self.k_taps * q_in), |(p, kq)| {
                h[[kq / q_in, p, kq % q_in]]
            }),
            _ => {
                let mats = self.expand_to_full();
                Array2::from_shape_fn((self.p_out, self.k_taps * q_in), |(p, kq)| {
                    mats[kq / q_in][[p, kq % q_in]]
                })
            }
        }
    }

    fn check_input(&self, s: &Gso, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() != self.q_in {
            return Err(Error::DimensionMismatch(format!(
                "filter expects {} input features, got {}",
                self.q_in,
                x.nrows()
            )));
        }
        s.check_columns(x.ncols())
    }

    /// Filters a `Q × (B·N)` batch into `P × (B·N)`.
    pub fn forward(&self, s: &Gso, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(s, x)?;
        let cols = x.ncols();
        let mut y = Array2::zeros((self.p_out, cols));
        match &self.taps {
            Taps::Full(_) | Taps::Toeplitz(_) => {
                // Y = [H_0 … H_{K−1}] · [X; SX; …; S^{K−1}X], one product.
                let z = stacked_powers(s, x, self.k_taps)?;
                general_mat_mul(1.0, &self.concat_taps(), &z, 0.0, &mut y);
            }
            Taps::AggregateInputs(h) => {
                let z = x.sum_axis(Axis(0)).insert_axis(Axis(0));
                let powers = shift_powers(s, z.view(), self.k_taps)?;
                for (hk, uk) in h.outer_iter().zip(&powers) {
                    let col = hk.insert_axis(Axis(1));
                    general_mat_mul(1.0, &col, uk, 1.0, &mut y);
                }
            }
            Taps::ConsolidateOutputs(_) => {
                let powers = shift_powers(s, x, self.k_taps)?;
                let mut g = Array2::zeros((1, cols));
                for (k, zk) in powers.iter().enumerate() {
                    general_mat_mul(1.0, &self.taps.power(k), zk, 1.0, &mut g);
                }
                y.assign(&g);
            }
        }
        Ok(y)
    }

    /// Backward pass for `y = self.forward(s, x)` given `d_y = ∂L/∂y`.
    pub fn backward(
        &self,
        s: &Gso,
        x: ArrayView2<f64>,
        d_y: ArrayView2<f64>,
    ) -> Result<FilterGradients> {
        self.check_input(s, x)?;
        if d_y.dim() != (self.p_out, x.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "output gradient is {:?}, expected ({}, {})",
                d_y.dim(),
                self.p_out,
                x.ncols()
            )));
        }
        let cols = x.ncols();
        let k_taps = self.k_taps;
        let mut d_taps = Taps::zeros(self.structure(), self.p_out, self.q_in, k_taps);

        let d_input = match &self.taps {
            Taps::Full(_) | Taps::Toeplitz(_) => {
                let q_in = self.q_in;
                let z = stacked_powers(s, x, k_taps)?;
                let h = self.concat_taps();
                // [dH_0 … dH_{K−1}] = dY · Zᵀ
                let mut dh = Array2::zeros((self.p_out, k_taps * q_in));
                general_mat_mul(1.0, &d_y, &z.t(), 0.0, &mut dh);
                match &mut d_taps {
                    Taps::Full(d) => {
                        for ((k, p, q), v) in d.indexed_iter_mut() {
                            *v = dh[[p, k * q_in + q]];
                        }
                    }
                    Taps::Toeplitz(d) => {
                        for ((p, kq), v) in dh.indexed_iter() {
                            let (k, q) = (kq / q_in, kq % q_in);
                            d[[k, p + q_in - 1 - q]] += v;
                        }
                    }
                    _ => unreachable!(),
                }
                // dX = Σ_k (Sᵀ)^k (H_kᵀ dY), by Horner.
                let mut c = Array2::zeros((k_taps * q_in, cols));
                general_mat_mul(1.0, &h.t(), &d_y, 0.0, &mut c);
                horner_transpose(s, k_taps, |k, acc| {
                    *acc += &c.slice(s![k * q_in..(k + 1) * q_in, ..]);
                }, (q_in, cols))?
            }
            Taps::AggregateInputs(h) => {
                let z = x.sum_axis(Axis(0)).insert_axis(Axis(0));
                let powers = shift_powers(s, z.view(), k_taps)?;
                let Taps::AggregateInputs(d) = &mut d_taps else {
                    unreachable!()
                };
                for (k, uk) in powers.iter().enumerate() {
                    let mut dk = d.slice_mut(s![k, ..]).insert_axis(Axis(1));
                    general_mat_mul(1.0, &d_y, &uk.t(), 0.0, &mut dk);
                }
                let dz = horner_transpose(s, k_taps, |k, acc| {
                    let hk = h.slice(s![k..k + 1, ..]);
                    general_mat_mul(1.0, &hk, &d_y, 1.0, acc)
                }, (1, cols))?;
                dz.broadcast((self.q_in, cols))
                    .expect("single row broadcasts")
                    .to_owned()
            }
            Taps::ConsolidateOutputs(h) => {
                let dg = d_y.sum_axis(Axis(0)).insert_axis(Axis(0));
                let powers = shift_powers(s, x, k_taps)?;
                let Taps::ConsolidateOutputs(d) = &mut d_taps else {
                    unreachable!()
                };
                for (k, zk) in powers.iter().enumerate() {
                    let mut dk = d.slice_mut(s![k..k + 1, ..]);
                    general_mat_mul(1.0, &dg, &zk.t(), 0.0, &mut dk);
                }
                let back = shift_powers_transpose(s, dg.view(), k_taps)?;
                let mut dx = Array2::zeros((self.q_in, cols));
                for (k, wk) in back.iter().enumerate() {
                    let col = h.slice(s![k, ..]).insert_axis(Axis(1));
                    general_mat_mul(1.0, &col, wk, 1.0, &mut dx);
                }
                dx
            }
        };
        Ok(FilterGradients { d_taps, d_input })
    }

    /// Text checkpoint: a header line `mimo-filter <tag> <P> <Q> <K>`
    /// followed by `K` lines of `width` taps each, row-major.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mimo-filter {} {} {} {}",
            self.structure().tag(),
            self.p_out,
            self.q_in,
            self.k_taps
        );
        let width = self.structure().tap_width(self.p_out, self.q_in);
        for row in self.taps.as_slice().chunks(width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses [`MimoFilterParams::to_text`] output from `lines`, consuming
    /// exactly the header and `K` tap lines.
    pub fn from_text_lines<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
    ) -> Result<Self> {
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "missing filter header".into(),
        })?;
        let err = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 || f[0] != "mimo-filter" {
            return Err(err(ln, format!("expected `mimo-filter <tag> P Q K`, got `{header}`")));
        }
        let structure =
            Structure::parse(f[1]).ok_or_else(|| err(ln, format!("unknown structure `{}`", f[1])))?;
        let dims: Vec<usize> = f[2..]
            .iter()
            .map(|v| v.parse::<usize>().map_err(|e| err(ln, format!("{e}"))))
            .collect::<Result<_>>()?;
        let mut params = Self::zeros(structure, dims[0], dims[1], dims[2])?;
        let width = structure.tap_width(dims[0], dims[1]);
        let slice = params.taps.as_slice_mut();
        for k in 0..dims[2] {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(ln, format!("missing tap row {k}")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| err(ln, format!("{e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != width {
                return Err(err(ln, format!("tap row has {} values, expected {width}", vals.len())));
            }
            slice[k * width..(k + 1) * width].copy_from_slice(&vals);
        }
        Ok(params)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let params = Self::from_text_lines(&mut lines)?;
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "trailing content after filter".into(),
            });
        }
        Ok(params)
    }
}

/// Accumulates `Σ_k (Sᵀ)^k c_k` as `c_0 + Sᵀ(c_1 + Sᵀ(c_2 + …))`, where
/// `add_term(k, acc)` adds `c_k` into `acc`.
fn horner_transpose(
    s: &Gso,
    k_taps: usize,
    mut add_term: impl FnMut(usize, &mut Array2<f64>),
    dim: (usize, usize),
) -> Result<Array2<f64>> {
    let mut acc = Array2::zeros(dim);
    for k in (0..k_taps).rev() {
        if k + 1 < k_taps {
            acc = s.shift_rows_transpose(acc.view())?;
        }
        add_term(k, &mut acc);
    }
    Ok(acc)
}

/// `[X; SX; …; S^{K−1}X]` stacked row-wise, `(K·Q) × cols`.
fn stacked_powers(s: &Gso, x: ArrayView2<f64>, k_taps: usize) -> Result<Array2<f64>> {
    let q = x.nrows();
    let mut z = Array2::zeros((k_taps * q, x.ncols()));
    z.slice_mut(s![0..q, ..]).assign(&x);
    for k in 1..k_taps {
        let next = s.shift_rows(z.slice(s![(k - 1) * q..k * q, ..]))?;
        z.slice_mut(s![k * q..(k + 1) * q, ..]).assign(&next);
    }
    Ok(z)
}

fn check_dims(p_out: usize, q_in: usize, k_taps: usize) -> Result<()> {
    if p_out == 0 || q_in == 0 || k_taps == 0 {
        return Err(Error::InvalidArgument(format!(
            "P, Q, K must be positive (got {p_out}, {q_in}, {k_taps})"
        )));
    }
    Ok(())
}

pub fn mimo_forward(params: &MimoFilterParams, s: &Gso, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    params.forward(s, x)
}

pub fn mimo_backward(
    params: &MimoFilterParams,
    s: &Gso,
    x: ArrayView2<f64>,
    d_y: ArrayView2<f64>,
) -> Result<FilterGradients> {
    params.backward(s, x, d_y)
}

pub fn expand_to_full(params: &MimoFilterParams) -> Vec<Array2<f64>> {
    params.expand_to_full()
}

/// Single-input single-output graph filter `Σ_k h_k S^k x`.
pub fn lsi_apply(s: &Gso, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != s.n() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} entries, operator is {}x{}",
            x.len(),
            s.n(),
            s.n()
        )));
    }
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
    let powers = shift_powers(s, xv, h.len())?;
    let mut y = vec![0.0; x.len()];
    for (hk, pk) in h.iter().zip(&powers) {
        for (yi, v) in y.iter_mut().zip(pk.iter()) {
            *yi += hk * v;
        }
    }
    Ok(y)
}

/// Dense reference evaluation of `y = Σ_k (H_k ⊗ S^k) x` for small instances.
pub mod oracle {
    use ndarray::{Array1, Array2};

    use crate::error::{Error, Result};
    use crate::gso::Gso;

    pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        let (ar, ac) = a.dim();
        let (br, bc) = b.dim();
        Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
            a[[i / br, j / bc]] * b[[i % br, j % bc]]
        })
    }

    /// `x_stacked = [x_1; …; x_Q]` (length `Q·N`), result `[y_1; …; y_P]`.
    pub fn kron_oracle(h_mats: &[Array2<f64>], s: &Gso, x_stacked: &[f64]) -> Result<Vec<f64>> {
        let Some(first) = h_mats.first() else {
            return Err(Error::InvalidArgument("need at least one tap matrix".into()));
        };
        let (p, q) = first.dim();
        let n = s.n();
        if h_mats.iter().any(|h| h.dim() != (p, q)) || x_stacked.len() != q * n {
            return Err(Error::DimensionMismatch(format!(
                "tap matrices must all be {p}x{q} and the input {} long",
                q * n
            )));
        }
        let dense = s.to_dense();
        let mut sk = Array2::<f64>::eye(n);
        let mut big = Array2::<f64>::zeros((p * n, q * n));
        for h in h_mats {
            big += &kron(h, &sk);
            sk = dense.dot(&sk);
        }
        let x = Array1::from(x_stacked.to_vec());
        Ok(big.dot(&x).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;
    use rand::Rng as _;

    fn random(r: usize, c: usize, g: &mut Rng) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| g.gen_range(-1.0..1.0))
    }

    #[test]
    fn counts() {
        for st in Structure::ALL {
            assert_eq!(param_count(st, 1, 1, 7), 7);
        }
        assert_eq!(param_count(Structure::Full, 32, 1, 5) + param_count(Structure::Full, 64, 32, 5), 10400);
        assert_eq!(param_count(Structure::Toeplitz, 3, 2, 4), 16);
    }

    #[test]
    fn structure_parse() {
        for st in Structure::ALL {
            assert_eq!(Structure::parse(st.tag()), Some(st));
            assert_eq!(Structure::parse(st.label()), Some(st));
        }
        assert_eq!(Structure::parse("pk"), Some(Structure::AggregateInputs));
        assert_eq!(Structure::parse("nope"), None);
    }

    #[test]
    fn expand_aggregate() {
        let taps = Taps::AggregateInputs(array![[1.0, 2.0]]);
        let p = MimoFilterParams::from_taps(2, 3, 1, taps).unwrap();
        assert_eq!(p.expand_to_full()[0], array![[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]);
    }

    #[test]
    fn expand_toeplitz() {
        // d = p − q ∈ {−1, 0, 1} stored at d + 1
        let taps = Taps::Toeplitz(array![[10.0, 11.0, 12.0]]);
        let p = MimoFilterParams::from_taps(2, 2, 1, taps).unwrap();
        assert_eq!(p.expand_to_full()[0], array![[11.0, 10.0], [12.0, 11.0]]);
    }

    #[test]
    fn expand_consolidate() {
        let taps = Taps::ConsolidateOutputs(array![[3.0, 4.0], [5.0, 6.0]]);
        let p = MimoFilterParams::from_taps(3, 2, 2, taps).unwrap();
        let h = p.expand_to_full();
        assert_eq!(h[0], array![[3.0, 4.0], [3.0, 4.0], [3.0, 4.0]]);
        assert_eq!(h[1], array![[5.0, 6.0], [5.0, 6.0], [5.0, 6.0]]);
    }

    #[test]
    fn from_taps_rejects_wrong_shape() {
        let taps = Taps::Toeplitz(Array2::zeros((2, 3)));
        assert!(MimoFilterParams::from_taps(3, 2, 2, taps).is_err());
        assert!(MimoFilterParams::zeros(Structure::Full, 0, 1, 1).is_err());
    }

    #[test]
    fn full_identity_is_passthrough() {
        let mut g = rng::seeded(1);
        let mut p = MimoFilterParams::zeros(Structure::Full, 3, 3, 1).unwrap();
        if let Taps::Full(h) = p.taps_mut() {
            h.index_axis_mut(Axis(0), 0).assign(&Array2::eye(3));
        }
        let s = Gso::cycle(5).unwrap();
        let x = random(3, 10, &mut g);
        assert_eq!(p.forward(&s, x.view()).unwrap(), x);
    }

    #[test]
    fn lsi_unit_taps() {
        let s = Gso::cycle(4).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(lsi_apply(&s, &[1.0, 0.0, 0.0], &x).unwrap(), x.to_vec());
        assert_eq!(lsi_apply(&s, &[0.0, 1.0, 0.0], &x).unwrap(), vec![4.0, 1.0, 2.0, 3.0]);
        assert!(lsi_apply(&s, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn consolidate_rows_identical() {
        let mut g = rng::seeded(2);
        let p = MimoFilterParams::random_uniform(Structure::ConsolidateOutputs, 5, 3, 4, 1.0, &mut g)
            .unwrap();
        let s = Gso::cycle(6).unwrap();
        let y = p.forward(&s, random(3, 12, &mut g).view()).unwrap();
        for row in y.outer_iter().skip(1) {
            assert_eq!(row, y.row(0));
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero() {
        let mut g = rng::seeded(3);
        let s = Gso::cycle(5).unwrap();
        for st in Structure::ALL {
            let p = MimoFilterParams::random_uniform(st, 3, 2, 3, 1.0, &mut g).unwrap();
            let x = random(2, 5, &mut g);
            let gr = p.backward(&s, x.view(), Array2::zeros((3, 5)).view()).unwrap();
            assert!(gr.d_taps.as_slice().iter().all(|&v| v == 0.0));
            assert!(gr.d_input.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn full_single_tap_gradient_is_inner_product() {
        let mut g = rng::seeded(4);
        let s = Gso::cycle(6).unwrap();
        let p = MimoFilterParams::random_uniform(Structure::Full, 2, 3, 1, 1.0, &mut g).unwrap();
        let x = random(3, 6, &mut g);
        let dy = random(2, 6, &mut g);
        let gr = p.backward(&s, x.view(), dy.view()).unwrap();
        let Taps::Full(d) = &gr.d_taps else { panic!() };
        for pi in 0..2 {
            for qi in 0..3 {
                let expect = dy.row(pi).dot(&x.row(qi));
                assert!((d[[0, pi, qi]] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn forward_rejects_bad_shapes() {
        let s = Gso::cycle(4).unwrap();
        let p = MimoFilterParams::zeros(Structure::Full, 2, 3, 2).unwrap();
        assert!(p.forward(&s, Array2::zeros((2, 4)).view()).is_err());
        assert!(p.forward(&s, Array2::zeros((3, 5)).view()).is_err());
        assert!(p
            .backward(&s, Array2::zeros((3, 4)).view(), Array2::zeros((3, 4)).view())
            .is_err());
    }

    #[test]
    fn text_checkpoint_round_trip() {
        let mut g = rng::seeded(5);
        for st in Structure::ALL {
            let p = MimoFilterParams::random_uniform(st, 4, 3, 2, 0.7, &mut g).unwrap();
            let text = p.to_text();
            assert_eq!(MimoFilterParams::from_text(&text).unwrap(), p);
        }
        assert!(MimoFilterParams::from_text("mimo-filter full 1 1 2\n0.5\n").is_err());
        assert!(MimoFilterParams::from_text("mimo-filter full 1 2 1\n0.5\n").is_err());
        assert!(MimoFilterParams::from_text("mimo-filter bogus 1 1 1\n0.5\n").is_err());
    }

    #[test]
    fn kron_helper() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[0.0, 5.0], [6.0, 7.0]];
        let k = oracle::kron(&a, &b);
        assert_eq!(
            k,
            array![
                [0.0, 5.0, 0.0, 10.0],
                [6.0, 7.0, 12.0, 14.0],
                [0.0, 15.0, 0.0, 20.0],
                [18.0, 21.0, 24.0, 28.0]
            ]
        );
    }

    #[test]
    fn oracle_trivial_cases() {
        let s = Gso::cycle(3).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(oracle::kron_oracle(&[Array2::eye(2)], &s, &x).unwrap(), x.to_vec());
        let h = [0.5, -1.0, 2.0];
        let mats: Vec<Array2<f64>> = h.iter().map(|&v| array![[v]]).collect();
        let a = oracle::kron_oracle(&mats, &s, &x[..3]).unwrap();
        let b = lsi_apply(&s, &h, &x[..3]).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
