mod common;

use common::{max_abs_diff, random_graph, random_matrix, random_operator};
use mimo_gcnn::filters::{expand_to_full, lsi_apply, mimo_forward, oracle};
use mimo_gcnn::rng::{self, Rng};
use mimo_gcnn::{Gso, GsoKind, MimoFilterParams, Structure, Taps};
use ndarray::{Array2, Array3};
use rand::Rng as _;

fn random_filter(structure: Structure, p: usize, q: usize, k: usize, rng: &mut Rng) -> MimoFilterParams {
    MimoFilterParams::random_uniform(structure, p, q, k, 1.0, rng).unwrap()
}

/// Feature-major stacking `[x_1; …; x_Q]` of a single-sample `Q × N` signal.
fn stacked(x: &Array2<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

#[test]
fn forward_matches_kronecker_oracle() {
    let mut r = rng::seeded(11);
    let mut instances = 0;
    for round in 0..30 {
        for structure in Structure::ALL {
            let n = r.gen_range(1..=8);
            let (p, q, k) = (r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=4));
            let s = if round % 2 == 0 {
                random_operator(n, &mut r)
            } else {
                Gso::from_graph(&random_graph(n, 0.5, &mut r), GsoKind::Adjacency).unwrap()
            };
            let f = random_filter(structure, p, q, k, &mut r);
            let x = random_matrix(q, n, &mut r);
            let y = mimo_forward(&f, &s, x.view()).unwrap();
            let want = oracle::kron_oracle(&expand_to_full(&f), &s, &stacked(&x)).unwrap();
            let err = max_abs_diff(&stacked(&y), &want);
            assert!(err <= 1e-12, "{structure} n={n} P={p} Q={q} K={k}: {err:e}");
            instances += 1;
        }
    }
    assert!(instances >= 100);
}

#[test]
fn batched_forward_equals_per_sample_forward() {
    let mut r = rng::seeded(12);
    for structure in Structure::ALL {
        let (n, p, q, k, b) = (6, 3, 2, 4, 5);
        let s = random_operator(n, &mut r);
        let f = random_filter(structure, p, q, k, &mut r);
        let x = random_matrix(q, b * n, &mut r);
        let y = mimo_forward(&f, &s, x.view()).unwrap();
        for i in 0..b {
            let xi = x.slice(ndarray::s![.., i * n..(i + 1) * n]);
            let yi = mimo_forward(&f, &s, xi).unwrap();
            let got = y.slice(ndarray::s![.., i * n..(i + 1) * n]);
            let err = max_abs_diff(&got.iter().copied().collect::<Vec<_>>(), &stacked(&yi));
            assert!(err <= 1e-12, "{structure} sample {i}: {err:e}");
        }
    }
}

#[test]
fn structured_forward_equals_expanded_full_forward() {
    let mut r = rng::seeded(13);
    for structure in Structure::ALL {
        for _ in 0..10 {
            let (n, p, q, k) = (r.gen_range(2..=8), r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=4));
            let s = random_operator(n, &mut r);
            let f = random_filter(structure, p, q, k, &mut r);
            let mats = expand_to_full(&f);
            let full = Array3::from_shape_fn((k, p, q), |(kk, i, j)| mats[kk][[i, j]]);
            let g = MimoFilterParams::from_taps(p, q, k, Taps::Full(full)).unwrap();
            let x = random_matrix(q, 3 * n, &mut r);
            let a = mimo_forward(&f, &s, x.view()).unwrap();
            let b = mimo_forward(&g, &s, x.view()).unwrap();
            assert!(max_abs_diff(&stacked(&a), &stacked(&b)) <= 1e-12, "{structure}");
        }
    }
}

#[test]
fn forward_is_linear_in_input() {
    let mut r = rng::seeded(14);
    for structure in Structure::ALL {
        let (n, p, q, k) = (7, 3, 3, 3);
        let s = random_operator(n, &mut r);
        let f = random_filter(structure, p, q, k, &mut r);
        let x1 = random_matrix(q, 2 * n, &mut r);
        let x2 = random_matrix(q, 2 * n, &mut r);
        let (a, b) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let lhs = mimo_forward(&f, &s, (&x1 * a + &x2 * b).view()).unwrap();
        let rhs = mimo_forward(&f, &s, x1.view()).unwrap() * a + mimo_forward(&f, &s, x2.view()).unwrap() * b;
        assert!(max_abs_diff(&stacked(&lhs), &stacked(&rhs)) <= 1e-12, "{structure}");
    }
}

#[test]
fn aggregate_inputs_ignores_input_order() {
    let mut r = rng::seeded(15);
    let (n, p, q, k) = (8, 3, 4, 4);
    let s = random_operator(n, &mut r);
    let f = random_filter(Structure::AggregateInputs, p, q, k, &mut r);
    let x = random_matrix(q, n, &mut r);
    let y = mimo_forward(&f, &s, x.view()).unwrap();
    let perm = [2, 0, 3, 1];
    let xp = Array2::from_shape_fn((q, n), |(i, j)| x[[perm[i], j]]);
    let yp = mimo_forward(&f, &s, xp.view()).unwrap();
    assert!(max_abs_diff(&stacked(&y), &stacked(&yp)) <= 1e-12);
}

#[test]
fn consolidate_outputs_rows_identical() {
    let mut r = rng::seeded(16);
    for _ in 0..20 {
        let (n, p, q, k) = (r.gen_range(2..=10), r.gen_range(2..=6), r.gen_range(1..=4), r.gen_range(1..=5));
        let s = random_operator(n, &mut r);
        let f = random_filter(Structure::ConsolidateOutputs, p, q, k, &mut r);
        let x = random_matrix(q, 4 * n, &mut r);
        let y = mimo_forward(&f, &s, x.view()).unwrap();
        for row in 1..p {
            assert_eq!(y.row(row), y.row(0));
        }
    }
}

#[test]
fn cycle_operator_is_circular_convolution() {
    let mut r = rng::seeded(17);
    for _ in 0..20 {
        let n = r.gen_range(1..=32);
        let k = r.gen_range(1..=8);
        let h: Vec<f64> = (0..k).map(|_| r.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let got = lsi_apply(&Gso::cycle(n).unwrap(), &h, &x).unwrap();
        let want: Vec<f64> = (0..n)
            .map(|i| (0..k).map(|kk| h[kk] * x[(i + n * k - kk) % n]).sum())
            .collect();
        let err = max_abs_diff(&got, &want);
        assert!(err <= 1e-12, "n={n} K={k}: {err:e}");
    }
}

#[test]
fn lsi_matches_single_channel_filter() {
    let mut r = rng::seeded(18);
    let n = 9;
    let s = random_operator(n, &mut r);
    let h: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let taps = Array3::from_shape_fn((4, 1, 1), |(k, _, _)| h[k]);
    let f = MimoFilterParams::from_taps(1, 1, 4, Taps::Full(taps)).unwrap();
    let xv = Array2::from_shape_vec((1, n), x.clone()).unwrap();
    let y = mimo_forward(&f, &s, xv.view()).unwrap();
    let want = lsi_apply(&s, &h, &x).unwrap();
    assert!(max_abs_diff(&stacked(&y), &want) <= 1e-12);
}

#[test]
fn two_layer_network_conv_parameter_counts() {
    let mut counts = Vec::new();
    for structure in Structure::ALL {
        let spec = mimo_gcnn::nn::NetworkSpec::uniform(structure, 16, 1, &[32, 64], 5, 16, 0.75);
        counts.push(spec.conv_param_count());
    }
    assert_eq!(counts, vec![10400, 480, 165, 635]);
}
