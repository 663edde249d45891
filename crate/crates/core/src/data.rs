//! Labeled graph-signal datasets: source-localization synthesis, test-set
//! noise, and a binary file format.
//!
//! # File layout (version 1, all integers little-endian)
//!
//! ```text
//! offset  size        field
//! 0       4           magic "GSDS"
//! 4       4           version (u32) = 1
//! 8       8           n, nodes per signal (u64)
//! 16      8           q0, features per sample (u64)
//! 24      8           c, class count (u64)
//! 32      8           sample count S (u64)
//! 40      8           metadata length L in bytes (u64)
//! 48      L           metadata, UTF-8
//! 48+L    S·q0·(4+8n) signal block: for each sample, for each feature row,
//!                     a u32 entry count (must equal n) then n f64 values
//! ...     8·S         label block: one u64 per sample
//! ```
//!
//! Total size is `48 + L + S·q0·(4 + 8n) + 8S` bytes.

use std::path::Path;

use ndarray::{s, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::gso::{Gso, GsoKind};
use crate::nn::Network;
use crate::rng::Rng;

pub const MAGIC: &[u8; 4] = b"GSDS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `q0 × n`.
    pub x: Array2<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub q0: usize,
    pub classes: usize,
    pub samples: Vec<Sample>,
    /// Free-form provenance.
    pub meta: String,
}

impl Dataset {
    pub fn new(n: usize, q0: usize, classes: usize, samples: Vec<Sample>, meta: String) -> Result<Self> {
        let ds = Self {
            n,
            q0,
            classes,
            samples,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.q0 == 0 {
            return Err(Error::InvalidArgument("n and q0 must be positive".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.x.dim() != (self.q0, self.n) {
                return Err(Error::DimensionMismatch(format!(
                    "sample {i} is {:?}, expected ({}, {})",
                    s.x.dim(),
                    self.q0,
                    self.n
                )));
            }
            if s.label >= self.classes {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} has label {} outside [0, {})",
                    s.label, self.classes
                )));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// The first `count` samples.
    pub fn take(&self, count: usize) -> Dataset {
        Dataset {
            samples: self.samples[..count.min(self.len())].to_vec(),
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> Dataset {
        Dataset {
            n: self.n,
            q0: self.q0,
            classes: self.classes,
            samples: Vec::new(),
            meta: self.meta.clone(),
        }
    }

    /// Stacks the selected samples into a `q0 × (B·n)` batch.
    pub fn batch(&self, indices: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let n = self.n;
        let mut x = Array2::zeros((self.q0, indices.len() * n));
        let mut labels = Vec::with_capacity(indices.len());
        for (b, &i) in indices.iter().enumerate() {
            let s = &self.samples[i];
            x.slice_mut(s![.., b * n..(b + 1) * n]).assign(&s.x);
            labels.push(s.label);
        }
        (x, labels)
    }

    pub fn check_compatible(&self, net: &Network) -> Result<()> {
        let spec = net.spec();
        if spec.nodes != self.n || spec.input_features != self.q0 || spec.classes < self.classes {
            return Err(Error::DimensionMismatch(format!(
                "dataset (n={}, q0={}, c={}) does not fit network (n={}, q0={}, c={})",
                self.n, self.q0, self.classes, spec.nodes, spec.input_features, spec.classes
            )));
        }
        Ok(())
    }

    /// Exact file size of this dataset in the binary format.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.meta.len() + self.len() * self.q0 * (4 + 8 * self.n) + 8 * self.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.n, self.q0, self.classes, self.len(), self.meta.len()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(self.meta.as_bytes());
        let row_len = u32::try_from(self.n)
            .map_err(|_| Error::InvalidArgument(format!("{} nodes exceed the format limit", self.n)))?;
        for s in &self.samples {
            for row in s.x.outer_iter() {
                out.extend_from_slice(&row_len.to_le_bytes());
                for v in row {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for s in &self.samples {
            out.extend_from_slice(&(s.label as u64).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedHeader(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::MalformedHeader("bad magic".into()));
        }
        r.pos = 4;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {version}")));
        }
        let mut header = [0usize; 5];
        for (slot, name) in header.iter_mut().zip(["n", "q0", "c", "count", "meta length"]) {
            *slot = usize::try_from(r.u64(name)?)
                .map_err(|_| Error::MalformedHeader(format!("{name} does not fit in memory")))?;
        }
        let [n, q0, classes, count, meta_len] = header;
        if n == 0 || q0 == 0 {
            return Err(Error::MalformedHeader(format!("n = {n}, q0 = {q0}")));
        }
        let meta_bytes = r.take(meta_len, "metadata")?;
        let meta = String::from_utf8(meta_bytes.to_vec())
            .map_err(|e| Error::MalformedHeader(format!("metadata is not UTF-8: {e}")))?;

        let mut xs = Vec::with_capacity(count.min(1 << 20));
        for i in 0..count {
            let mut x = Array2::zeros((q0, n));
            for f in 0..q0 {
                let len = r.u32("row length")? as usize;
                if len != n {
                    return Err(Error::DimensionMismatch(format!(
                        "sample {i} row {f} has {len} entries, header declares n = {n}"
                    )));
                }
                for j in 0..n {
                    x[[f, j]] = r.f64("signal value")?;
                }
            }
            xs.push(x);
        }
        let mut samples = Vec::with_capacity(xs.len());
        for x in xs {
            let label = r.u64("label")? as usize;
            samples.push(Sample { x, label });
        }
        if r.pos != bytes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} trailing bytes after declared payload",
                bytes.len() - r.pos
            )));
        }
        Dataset::new(n, q0, classes, samples, meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Truncated(format!(
                "{what} at byte {} needs {len} bytes, {} remain",
                self.pos,
                self.bytes.len() - self.pos
            )));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// `W^t δ_source` as a `1 × n` signal, by `t` sparse applications of `w`.
pub fn diffuse(w: &Gso, source: usize, t: usize) -> Array2<f64> {
    let n = w.n();
    let mut cur = vec![0.0; n];
    cur[source] = 1.0;
    let mut next = vec![0.0; n];
    for _ in 0..t {
        w.apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Array2::from_shape_vec((1, n), cur).expect("1 x n")
}

/// Source-localization samples on `g`: source `c` uniform over nodes,
/// diffusion time `t` uniform over `0..=t_max`, signal `W^t δ_c`, label `c`.
/// `W` is the raw adjacency (`GsoKind::Adjacency`) or the adjacency scaled
/// to unit spectral radius (`GsoKind::ScaledAdjacency`).
pub fn synth_source_localization(
    g: &Graph,
    n_samples: usize,
    t_max: usize,
    diffusion: GsoKind,
    rng: &mut Rng,
) -> Result<Dataset> {
    let n = g.node_count();
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if t_max >= n {
        return Err(Error::InvalidArgument(format!(
            "diffusion time bound {t_max} exceeds N − 1 = {}",
            n - 1
        )));
    }
    if !matches!(diffusion, GsoKind::Adjacency | GsoKind::ScaledAdjacency) {
        return Err(Error::InvalidArgument(format!(
            "diffusion operator must be an adjacency, got {}",
            diffusion.tag()
        )));
    }
    let w = Gso::from_graph(g, diffusion)?;
    let samples = (0..n_samples)
        .map(|_| {
            let c = rng.gen_range(0..n);
            let t = rng.gen_range(0..=t_max);
            Sample {
                x: diffuse(&w, c, t),
                label: c,
            }
        })
        .collect();
    Dataset::new(
        n,
        1,
        n,
        samples,
        format!(
            "source-localization n={n} edges={} diffusion={} t_max={t_max} sigma2=0",
            g.edge_count(),
            diffusion.tag()
        ),
    )
}

/// Adds independent `N(0, σ²)` noise to every signal entry.
pub fn add_noise(ds: &Dataset, sigma2: f64, rng: &mut Rng) -> Result<Dataset> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be finite and >= 0, got {sigma2}"
        )));
    }
    let mut out = ds.clone();
    if sigma2 > 0.0 {
        let sd = sigma2.sqrt();
        for s in &mut out.samples {
            s.x.mapv_inplace(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sd * z
            });
        }
    }
    out.meta = match out.meta.rfind(" sigma2=") {
        Some(pos) => format!("{} sigma2={sigma2}", &out.meta[..pos]),
        None => format!("{} sigma2={sigma2}", out.meta),
    };
    Ok(out)
}

/// Divides every sample by its largest absolute entry. Raw diffusion
/// magnitudes grow like a power of the top eigenvalue, which no fixed
/// initialization can absorb; after this step every input lies in [-1, 1].
/// All-zero samples are left unchanged.
pub fn normalize_max_abs(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for s in &mut out.samples {
        let m = s.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            s.x /= m;
        }
    }
    if !out.meta.contains(" norm=max") {
        out.meta.push_str(" norm=max");
    }
    out
}
