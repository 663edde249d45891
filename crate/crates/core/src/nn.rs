//! Network assembly: graph-convolution layers with ReLU, dropout on the
//! final feature map, a dense readout and softmax cross-entropy.
//!
//! The readout flattens each sample's `F × N` feature map feature-major:
//! entry `f·N + i` is feature `f` at node `i`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::filters::{MimoFilterParams, Structure, Taps};
use crate::gso::{Gso, GsoKind};
use crate::rng::Rng;

/// Forward-pass mode. Training carries the generator that draws dropout
/// masks; evaluation consumes no randomness.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

pub fn relu(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gates `d_out` by `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(x: ArrayView2<f64>, d_out: ArrayView2<f64>) -> Array2<f64> {
    let mut d = d_out.to_owned();
    d.zip_mut_with(&x, |g, &v| {
        if v <= 0.0 {
            *g = 0.0;
        }
    });
    d
}

/// Inverted dropout. Returns the output and the multiplier mask (`0` or
/// `1/keep_prob` per entry in training, all ones in evaluation).
pub fn dropout(
    x: ArrayView2<f64>,
    keep_prob: f64,
    mode: &mut Mode<'_>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability must lie in (0, 1], got {keep_prob}"
        )));
    }
    match mode {
        Mode::Train(rng) if keep_prob < 1.0 => {
            let scale = 1.0 / keep_prob;
            // One 32-bit draw per entry; keep when it falls below keep·2³².
            let threshold = (keep_prob * 4_294_967_296.0) as u64;
            let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
                if u64::from(rng.gen::<u32>()) < threshold {
                    scale
                } else {
                    0.0
                }
            });
            Ok((&x * &mask, mask))
        }
        _ => Ok((x.to_owned(), Array2::ones(x.raw_dim()))),
    }
}

/// Flattens a `F × (B·N)` batch into `B × (F·N)` rows, feature-major per sample.
fn flatten_samples(features: ArrayView2<f64>, n: usize) -> Array2<f64> {
    let (f, cols) = features.dim();
    let b = cols / n;
    let mut out = Array3::zeros((b, f, n));
    let src = features.to_shape((f, b, n)).expect("whole samples");
    out.assign(&src.permuted_axes([1, 0, 2]));
    out.into_shape_with_order((b, f * n)).expect("contiguous")
}

fn unflatten_samples(flat: ArrayView2<f64>, f: usize, n: usize) -> Array2<f64> {
    let b = flat.nrows();
    let mut out = Array3::zeros((f, b, n));
    let src = flat.to_shape((b, f, n)).expect("whole samples");
    out.assign(&src.permuted_axes([1, 0, 2]));
    out.into_shape_with_order((f, b * n)).expect("contiguous")
}

fn check_readout(w: ArrayView2<f64>, b: ArrayView1<f64>, features: ArrayView2<f64>, n: usize) -> Result<()> {
    if n == 0 || features.ncols() % n != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} columns is not a whole number of {n}-node samples",
            features.ncols()
        )));
    }
    if w.ncols() != features.nrows() * n || w.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "readout is {:?} with {} biases, features are {} x {n} per sample",
            w.dim(),
            b.len(),
            features.nrows()
        )));
    }
    Ok(())
}

/// `logits = W · flatten(features) + b` for every sample; returns `B × C`.
pub fn readout(
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    features: ArrayView2<f64>,
    n: usize,
) -> Result<Array2<f64>> {
    check_readout(w, b, features, n)?;
    let flat = flatten_samples(features, n);
    let mut logits = flat.dot(&w.t());
    logits += &b;
    Ok(logits)
}

pub struct ReadoutGradients {
    pub d_weight: Array2<f64>,
    pub d_bias: Array1<f64>,
    pub d_features: Array2<f64>,
}

pub fn readout_backward(
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    features: ArrayView2<f64>,
    n: usize,
    d_logits: ArrayView2<f64>,
) -> Result<ReadoutGradients> {
    check_readout(w, b, features, n)?;
    let batch = features.ncols() / n;
    if d_logits.dim() != (batch, w.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "logit gradient is {:?}, expected ({batch}, {})",
            d_logits.dim(),
            w.nrows()
        )));
    }
    let flat = flatten_samples(features, n);
    let d_weight = d_logits.t().dot(&flat);
    let d_bias = d_logits.sum_axis(Axis(0));
    let d_flat = d_logits.dot(&w);
    Ok(ReadoutGradients {
        d_weight,
        d_bias,
        d_features: unflatten_samples(d_flat.view(), features.nrows(), n),
    })
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut e = logits.mapv(|v| (v - max).exp());
    let z = e.sum();
    e /= z;
    e
}

/// `(−log softmax(logits)[label], softmax(logits) − onehot(label))`.
pub fn softmax_cross_entropy(logits: ArrayView1<f64>, label: usize) -> Result<(f64, Array1<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside [0, {})",
            logits.len()
        )));
    }
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let log_z = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    let loss = log_z - logits[label];
    let mut d = logits.mapv(|v| (v - log_z).exp());
    d[label] -= 1.0;
    Ok((loss, d))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub structure: Structure,
    pub p_out: usize,
    pub k_taps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub input_features: usize,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
    pub keep_prob: f64,
}

impl NetworkSpec {
    /// One graph-convolution layer per entry of `widths`, all sharing one
    /// structure and tap count.
    pub fn uniform(
        structure: Structure,
        nodes: usize,
        input_features: usize,
        widths: &[usize],
        k_taps: usize,
        classes: usize,
        keep_prob: f64,
    ) -> Self {
        Self {
            nodes,
            input_features,
            classes,
            layers: widths
                .iter()
                .map(|&p_out| LayerSpec {
                    structure,
                    p_out,
                    k_taps,
                })
                .collect(),
            keep_prob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.input_features == 0 {
            return Err(Error::InvalidArgument("nodes and input features must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("need at least one graph-conv layer".into()));
        }
        if let Some(l) = self.layers.iter().find(|l| l.p_out == 0 || l.k_taps == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths and tap counts must be positive: {l:?}"
            )));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "keep probability must lie in (0, 1], got {}",
                self.keep_prob
            )));
        }
        Ok(())
    }

    /// `(P, Q)` for each layer, chaining widths from the input.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut q = self.input_features;
        self.layers
            .iter()
            .map(|l| {
                let d = (l.p_out, q);
                q = l.p_out;
                d
            })
            .collect()
    }

    pub fn final_width(&self) -> usize {
        self.layers.last().map_or(self.input_features, |l| l.p_out)
    }

    pub fn conv_param_count(&self) -> usize {
        self.layers
            .iter()
            .zip(self.layer_dims())
            .map(|(l, (p, q))| crate::filters::param_count(l.structure, p, q, l.k_taps))
            .sum()
    }

    pub fn readout_param_count(&self) -> usize {
        self.classes * self.final_width() * self.nodes + self.classes
    }

    pub fn param_count(&self) -> usize {
        self.conv_param_count() + self.readout_param_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    gso: Gso,
    layers: Vec<MimoFilterParams>,
    readout_w: Array2<f64>,
    readout_b: Array1<f64>,
}

/// Intermediate values of a forward pass needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each graph-conv layer; entry 0 is the network input.
    pub layer_inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
    pub final_activation: Array2<f64>,
    pub dropout_mask: Array2<f64>,
    /// Dropped-out final feature map fed to the readout.
    pub readout_input: Array2<f64>,
    pub logits: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<Taps>,
    pub readout_w: Array2<f64>,
    pub readout_b: Array1<f64>,
}

impl NetworkGrads {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Taps::zeros(l.structure(), l.p_out(), l.q_in(), l.k_taps()))
                .collect(),
            readout_w: Array2::zeros(net.readout_w.raw_dim()),
            readout_b: Array1::zeros(net.readout_b.len()),
        }
    }

    /// Flat views in the same order as [`Network::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().map(Taps::as_slice).collect();
        v.push(self.readout_w.as_slice().expect("standard layout"));
        v.push(self.readout_b.as_slice().expect("standard layout"));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.layers.iter_mut().map(Taps::as_slice_mut).collect();
        v.push(self.readout_w.as_slice_mut().expect("standard layout"));
        v.push(self.readout_b.as_slice_mut().expect("standard layout"));
        v
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &NetworkGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

impl Network {
    /// All parameters zero.
    pub fn zeros(spec: NetworkSpec, gso: Gso) -> Result<Self> {
        spec.validate()?;
        if gso.n() != spec.nodes {
            return Err(Error::DimensionMismatch(format!(
                "shift operator has {} nodes, network expects {}",
                gso.n(),
                spec.nodes
            )));
        }
        let layers = spec
            .layers
            .iter()
            .zip(spec.layer_dims())
            .map(|(l, (p, q))| MimoFilterParams::zeros(l.structure, p, q, l.k_taps))
            .collect::<Result<Vec<_>>>()?;
        let readout_w = Array2::zeros((spec.classes, spec.final_width() * spec.nodes));
        let readout_b = Array1::zeros(spec.classes);
        Ok(Self {
            spec,
            gso,
            layers,
            readout_w,
            readout_b,
        })
    }

    /// Taps and readout weights uniform in `±sqrt(1/fan_in)` (`fan_in = Q·K`
    /// for a filter, `F·N` for the readout), biases zero.
    pub fn random(spec: NetworkSpec, gso: Gso, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(spec, gso)?;
        for layer in &mut net.layers {
            let bound = (1.0 / (layer.q_in() * layer.k_taps()) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for v in layer.taps_mut().as_slice_mut() {
                *v = dist.sample(rng);
            }
        }
        let bound = (1.0 / net.readout_w.ncols() as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        net.readout_w.mapv_inplace(|_| dist.sample(rng));
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn gso(&self) -> &Gso {
        &self.gso
    }

    pub fn layers(&self) -> &[MimoFilterParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [MimoFilterParams] {
        &mut self.layers
    }

    pub fn readout_weight(&self) -> &Array2<f64> {
        &self.readout_w
    }

    pub fn readout_weight_mut(&mut self) -> &mut Array2<f64> {
        &mut self.readout_w
    }

    pub fn readout_bias(&self) -> &Array1<f64> {
        &self.readout_b
    }

    pub fn readout_bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.readout_b
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(MimoFilterParams::param_count).sum::<usize>()
            + self.readout_w.len()
            + self.readout_b.len()
    }

    pub fn conv_param_count(&self) -> usize {
        self.layers.iter().map(MimoFilterParams::param_count).sum()
    }

    /// Names matching [`Network::tensors_mut`], for diagnostics.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.layers.len()).map(|i| format!("conv{i}.taps")).collect();
        names.push("readout.weight".into());
        names.push("readout.bias".into());
        names
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().map(|l| l.taps().as_slice()).collect();
        v.push(self.readout_w.as_slice().expect("standard layout"));
        v.push(self.readout_b.as_slice().expect("standard layout"));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .map(|l| l.taps_mut().as_slice_mut())
            .collect();
        v.push(self.readout_w.as_slice_mut().expect("standard layout"));
        v.push(self.readout_b.as_slice_mut().expect("standard layout"));
        v
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() != self.spec.input_features {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} input features, got {}",
                self.spec.input_features,
                x.nrows()
            )));
        }
        self.gso.check_columns(x.ncols())
    }

    /// Forward pass over a `Q₀ × (B·N)` batch. Returns `B × C` logits and
    /// the trace for [`Network::backward`].
    pub fn forward(&self, x: ArrayView2<f64>, mode: &mut Mode<'_>) -> Result<(Array2<f64>, ForwardTrace)> {
        self.check_input(x)?;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let pre = layer.forward(&self.gso, h.view())?;
            let post = relu(pre.view());
            layer_inputs.push(h);
            pre_activations.push(pre);
            h = post;
        }
        let (dropped, mask) = dropout(h.view(), self.spec.keep_prob, mode)?;
        let logits = readout(
            self.readout_w.view(),
            self.readout_b.view(),
            dropped.view(),
            self.spec.nodes,
        )?;
        let trace = ForwardTrace {
            layer_inputs,
            pre_activations,
            final_activation: h,
            dropout_mask: mask,
            readout_input: dropped,
            logits: logits.clone(),
        };
        Ok((logits, trace))
    }

    /// Evaluation-mode logits, without keeping a trace.
    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = layer.forward(&self.gso, h.view())?;
            h.mapv_inplace(|v| v.max(0.0));
        }
        readout(self.readout_w.view(), self.readout_b.view(), h.view(), self.spec.nodes)
    }

    /// Chain rule from `d_logits` (`B × C`) back through every layer.
    pub fn backward(&self, trace: &ForwardTrace, d_logits: ArrayView2<f64>) -> Result<NetworkGrads> {
        let n = self.spec.nodes;
        let consistent = trace.layer_inputs.len() == self.layers.len()
            && trace.pre_activations.len() == self.layers.len()
            && trace
                .layer_inputs
                .iter()
                .zip(&self.layers)
                .all(|(x, l)| x.nrows() == l.q_in())
            && trace
                .pre_activations
                .iter()
                .zip(&self.layers)
                .all(|(y, l)| y.nrows() == l.p_out())
            && trace.readout_input.nrows() == self.spec.final_width()
            && trace.dropout_mask.dim() == trace.final_activation.dim()
            && trace.logits.dim() == d_logits.dim();
        if !consistent {
            return Err(Error::DimensionMismatch(
                "forward trace does not match this network or the logit gradient".into(),
            ));
        }

        let ro = readout_backward(
            self.readout_w.view(),
            self.readout_b.view(),
            trace.readout_input.view(),
            n,
            d_logits,
        )?;
        let mut d_h = ro.d_features * &trace.dropout_mask;
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = relu_backward(trace.pre_activations[i].view(), d_h.view());
            let g = layer.backward(&self.gso, trace.layer_inputs[i].view(), d_pre.view())?;
            layer_grads.push(g.d_taps);
            d_h = g.d_input;
        }
        layer_grads.reverse();
        Ok(NetworkGrads {
            layers: layer_grads,
            readout_w: ro.d_weight,
            readout_b: ro.d_bias,
        })
    }

    /// Mean softmax cross-entropy over a batch and its gradient.
    /// Returns `(mean_loss, grads, correct)` where `correct` counts samples
    /// whose training-mode logits already pick the label.
    pub fn batch_gradient(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
        mode: &mut Mode<'_>,
    ) -> Result<(f64, NetworkGrads, usize)> {
        let (logits, trace) = self.forward(x, mode)?;
        if logits.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples but {} labels",
                logits.nrows(),
                labels.len()
            )));
        }
        let batch = labels.len() as f64;
        let mut d_logits = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        let mut correct = 0;
        for (i, &label) in labels.iter().enumerate() {
            let (l, d) = softmax_cross_entropy(logits.row(i), label)?;
            loss += l;
            if argmax(logits.row(i)) == label {
                correct += 1;
            }
            d_logits.row_mut(i).assign(&(d / batch));
        }
        let grads = self.backward(&trace, d_logits.view())?;
        Ok((loss / batch, grads, correct))
    }

    /// Class of a single `Q₀ × N` sample, by evaluation-mode argmax.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<usize> {
        let logits = self.logits(x)?;
        if logits.nrows() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "predict takes one sample, got {}",
                logits.nrows()
            )));
        }
        Ok(argmax(logits.row(0)))
    }

    /// Classes of every sample in a batch.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok(logits.outer_iter().map(argmax).collect())
    }

    /// Text checkpoint; layout documented in the README.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sp = &self.spec;
        let _ = writeln!(out, "mimo-gcnn-network 1");
        let _ = writeln!(out, "nodes {}", sp.nodes);
        let _ = writeln!(out, "inputs {}", sp.input_features);
        let _ = writeln!(out, "classes {}", sp.classes);
        let _ = writeln!(out, "keep_prob {:?}", sp.keep_prob);
        let _ = writeln!(out, "layers {}", sp.layers.len());
        for l in &sp.layers {
            let _ = writeln!(out, "layer {} {} {}", l.structure.tag(), l.p_out, l.k_taps);
        }
        let _ = writeln!(out, "gso {} {}", self.gso.kind().tag(), self.gso.nnz());
        for (i, j, v) in self.gso.entries() {
            let _ = writeln!(out, "{i} {j} {v:?}");
        }
        for layer in &self.layers {
            out.push_str(&layer.to_text());
        }
        let _ = writeln!(out, "readout {} {}", self.readout_w.nrows(), self.readout_w.ncols());
        for row in self.readout_w.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let bias: Vec<String> = self.readout_b.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "bias {}", bias.join(" "));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("unexpected end of checkpoint, expected {what}"),
            })
        };
        fn err(line: usize, msg: impl Into<String>) -> Error {
            Error::Parse {
                line: line + 1,
                msg: msg.into(),
            }
        }
        fn keyed<'a>(ln: usize, line: &'a str, key: &str) -> Result<Vec<&'a str>> {
            let mut f = line.split_whitespace();
            if f.next() != Some(key) {
                return Err(err(ln, format!("expected `{key}`, got `{line}`")));
            }
            Ok(f.collect())
        }
        fn num<T: std::str::FromStr>(ln: usize, s: Option<&&str>) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            let s = s.ok_or_else(|| err(ln, "missing value"))?;
            s.parse::<T>().map_err(|e| err(ln, format!("`{s}`: {e}")))
        }

        let (ln, magic) = next("header")?;
        if magic.trim() != "mimo-gcnn-network 1" {
            return Err(err(ln, "not a version-1 network checkpoint"));
        }
        let (ln, l) = next("nodes")?;
        let nodes: usize = num(ln, keyed(ln, l, "nodes")?.first())?;
        let (ln, l) = next("inputs")?;
        let input_features: usize = num(ln, keyed(ln, l, "inputs")?.first())?;
        let (ln, l) = next("classes")?;
        let classes: usize = num(ln, keyed(ln, l, "classes")?.first())?;
        let (ln, l) = next("keep_prob")?;
        let keep_prob: f64 = num(ln, keyed(ln, l, "keep_prob")?.first())?;
        let (ln, l) = next("layers")?;
        let n_layers: usize = num(ln, keyed(ln, l, "layers")?.first())?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let (ln, l) = next("layer")?;
            let f = keyed(ln, l, "layer")?;
            let structure = f
                .first()
                .and_then(|t| Structure::parse(t))
                .ok_or_else(|| err(ln, "unknown layer structure"))?;
            layers.push(LayerSpec {
                structure,
                p_out: num(ln, f.get(1))?,
                k_taps: num(ln, f.get(2))?,
            });
        }
        let spec = NetworkSpec {
            nodes,
            input_features,
            classes,
            layers,
            keep_prob,
        };

        let (ln, l) = next("gso")?;
        let f = keyed(ln, l, "gso")?;
        let kind = f
            .first()
            .and_then(|t| GsoKind::from_tag(t))
            .ok_or_else(|| err(ln, "unknown shift operator kind"))?;
        let nnz: usize = num(ln, f.get(1))?;
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (ln, l) = next("operator entry")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            entries.push((num(ln, f.first())?, num(ln, f.get(1))?, num(ln, f.get(2))?));
        }
        let gso = Gso::from_triplets(nodes, kind, entries)?;
        let mut net = Network::zeros(spec, gso)?;

        for i in 0..n_layers {
            let mut it = std::iter::from_fn(|| next("filter").ok());
            let layer = MimoFilterParams::from_text_lines(&mut it)?;
            let expected = &net.layers[i];
            if (layer.structure(), layer.p_out(), layer.q_in(), layer.k_taps())
                != (expected.structure(), expected.p_out(), expected.q_in(), expected.k_taps())
            {
                return Err(Error::DimensionMismatch(format!(
                    "filter {i} does not match its layer spec"
                )));
            }
            net.layers[i] = layer;
        }

        let (ln, l) = next("readout")?;
        let f = keyed(ln, l, "readout")?;
        let (rows, cols): (usize, usize) = (num(ln, f.first())?, num(ln, f.get(1))?);
        if (rows, cols) != net.readout_w.dim() {
            return Err(err(ln, format!("readout is {rows}x{cols}, expected {:?}", net.readout_w.dim())));
        }
        for r in 0..rows {
            let (ln, l) = next("readout row")?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| err(ln, format!("{e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(err(ln, format!("readout row has {} values, expected {cols}", vals.len())));
            }
            net.readout_w.row_mut(r).assign(&ArrayView1::from(&vals));
        }
        let (ln, l) = next("bias")?;
        let f = keyed(ln, l, "bias")?;
        if f.len() != rows {
            return Err(err(ln, format!("{} biases, expected {rows}", f.len())));
        }
        for (i, v) in f.iter().enumerate() {
            net.readout_b[i] = num(ln, Some(v))?;
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
