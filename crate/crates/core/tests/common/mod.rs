#![allow(dead_code)]

use mimo_gcnn::rng::Rng;
use mimo_gcnn::{Gso, GsoKind, Graph};
use ndarray::Array2;
use rand::Rng as _;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Random symmetric weighted graph on `n` nodes (possibly disconnected).
pub fn random_graph(n: usize, density: f64, rng: &mut Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < density {
                edges.push((i, j, rng.gen_range(0.1..1.0)));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Random non-symmetric operator with a diagonal, so `S ≠ Sᵀ` paths are
/// exercised too.
pub fn random_operator(n: usize, rng: &mut Rng) -> Gso {
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || rng.gen::<f64>() < 0.4 {
                entries.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    Gso::from_triplets(n, GsoKind::Custom, entries).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central difference of `f` with respect to every entry of `params`.
pub fn numeric_grad(params: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + h;
            let up = f(params);
            params[i] = orig - h;
            let down = f(params);
            params[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
