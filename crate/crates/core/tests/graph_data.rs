mod common;

use mimo_gcnn::data::{add_noise, diffuse, normalize_max_abs, synth_source_localization, Dataset, Sample, HEADER_LEN};
use mimo_gcnn::graph::{sbm_draw, sbm_generate};
use mimo_gcnn::rng;
use mimo_gcnn::{Error, Gso, GsoKind, Graph, SbmSpec};
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn sbm_edge_densities_match_block_probabilities() {
    let spec = SbmSpec::new(64, 4, 0.8, 0.2, 31);
    let mut r = rng::seeded(spec.seed);
    let (mut intra, mut inter, mut intra_pairs, mut inter_pairs) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..200 {
        let g = sbm_draw(&spec, &mut r).unwrap();
        for i in 0..64 {
            for j in i + 1..64 {
                let same = spec.community_of(i) == spec.community_of(j);
                let edge = g.weight(i, j) != 0.0;
                if same {
                    intra_pairs += 1;
                    intra += edge as usize;
                } else {
                    inter_pairs += 1;
                    inter += edge as usize;
                }
            }
        }
    }
    let (pi, po) = (intra as f64 / intra_pairs as f64, inter as f64 / inter_pairs as f64);
    assert!((pi - 0.8).abs() <= 0.05, "intra density {pi}");
    assert!((po - 0.2).abs() <= 0.05, "inter density {po}");
}

#[test]
fn sbm_generate_is_seeded_and_connected() {
    for seed in 0..20 {
        let spec = SbmSpec::new(16, 4, 0.8, 0.2, seed);
        let a = sbm_generate(&spec).unwrap();
        assert!(a.is_connected());
        assert_eq!(a, sbm_generate(&spec).unwrap());
        assert!(a.edges().iter().all(|&(i, j, w)| i < j && w == 1.0));
    }
}

#[test]
fn sbm_reports_disconnection() {
    let spec = SbmSpec { max_attempts: 3, ..SbmSpec::new(16, 4, 0.0, 0.0, 1) };
    assert!(matches!(sbm_generate(&spec), Err(Error::DisconnectedGraph { attempts: 3 })));
}

#[test]
fn diffusion_matches_dense_power() {
    let g = sbm_generate(&SbmSpec::new(16, 4, 0.8, 0.2, 5)).unwrap();
    let w = Gso::from_graph(&g, GsoKind::Adjacency).unwrap();
    let d = w.to_dense();
    for c in 0..16 {
        let mut e = Array2::<f64>::zeros((16, 1));
        e[[c, 0]] = 1.0;
        let want = d.dot(&d.dot(&d.dot(&e)));
        let got = diffuse(&w, c, 3);
        let err = common::max_abs_diff(got.as_slice().unwrap(), &want.iter().copied().collect::<Vec<_>>());
        assert!(err <= 1e-10);
    }
}

#[test]
fn zero_time_signals_are_one_hot_and_k2_swaps() {
    let k2 = Graph::new(2, [(0, 1, 1.0)]).unwrap();
    let w = Gso::from_graph(&k2, GsoKind::Adjacency).unwrap();
    assert_eq!(diffuse(&w, 0, 1).as_slice().unwrap(), &[0.0, 1.0]);
    assert_eq!(diffuse(&w, 1, 0).as_slice().unwrap(), &[0.0, 1.0]);

    let g = sbm_generate(&SbmSpec::new(16, 4, 0.8, 0.2, 6)).unwrap();
    let ds = synth_source_localization(&g, 2000, 0, GsoKind::Adjacency, &mut rng::seeded(1)).unwrap();
    for s in &ds.samples {
        for (i, &v) in s.x.iter().enumerate() {
            assert_eq!(v, if i == s.label { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn labels_are_uniform() {
    let g = sbm_generate(&SbmSpec::new(16, 4, 0.8, 0.2, 7)).unwrap();
    let ds = synth_source_localization(&g, 16_000, 15, GsoKind::Adjacency, &mut rng::seeded(2)).unwrap();
    let mut counts = [0usize; 16];
    for l in ds.labels() {
        counts[l] += 1;
    }
    // 1000 expected per class, standard deviation about 31.
    assert!(counts.iter().all(|&c| (850..=1150).contains(&c)), "{counts:?}");
}

#[test]
fn noise_has_requested_variance_and_keeps_labels() {
    let g = Graph::path(100).unwrap();
    let clean = synth_source_localization(&g, 1000, 5, GsoKind::Adjacency, &mut rng::seeded(3)).unwrap();
    let noisy = add_noise(&clean, 0.1, &mut rng::seeded(4)).unwrap();
    assert_eq!(clean.labels(), noisy.labels());
    let diffs: Vec<f64> = clean
        .samples
        .iter()
        .zip(&noisy.samples)
        .flat_map(|(a, b)| (&b.x - &a.x).into_iter())
        .collect();
    assert_eq!(diffs.len(), 100_000);
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    assert!((var - 0.1).abs() <= 0.005, "{var}");

    let same = add_noise(&clean, 0.0, &mut rng::seeded(4)).unwrap();
    assert_eq!(same.samples, clean.samples);
    assert!(add_noise(&clean, -0.1, &mut rng::seeded(4)).is_err());
}

#[test]
fn thousand_sample_file_size() {
    let g = sbm_generate(&SbmSpec::new(16, 4, 0.8, 0.2, 8)).unwrap();
    let ds = synth_source_localization(&g, 1000, 15, GsoKind::Adjacency, &mut rng::seeded(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sl.gsds");
    ds.save(&path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len() as usize;
    let (n, q0, s, l) = (16, 1, 1000, ds.meta.len());
    assert_eq!(size, HEADER_LEN + l + s * q0 * (4 + 8 * n) + 8 * s);
    let back = Dataset::load(&path).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn short_rows_are_a_dimension_mismatch() {
    let ds = Dataset::new(
        16,
        1,
        16,
        vec![Sample { x: Array2::zeros((1, 16)), label: 3 }],
        String::new(),
    )
    .unwrap();
    let mut bytes = ds.to_bytes().unwrap();
    // Rewrite the row-length prefix to 15 and drop one value.
    let row = HEADER_LEN;
    bytes[row..row + 4].copy_from_slice(&15u32.to_le_bytes());
    bytes.drain(row + 4..row + 12);
    assert!(matches!(Dataset::from_bytes(&bytes), Err(Error::DimensionMismatch(_))));
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..12, any::<u64>()).prop_map(|(n, seed)| common::random_graph(n, 0.3, &mut rng::seeded(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diffusion_stays_within_t_hops(g in arb_graph(), src in 0usize..12, t in 0usize..6) {
        let src = src % g.node_count();
        let w = Gso::from_graph(&g, GsoKind::Adjacency).unwrap();
        let x = diffuse(&w, src, t);
        let dist = g.bfs_distances(src);
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                prop_assert!(matches!(dist[i], Some(d) if d <= t));
            }
        }
    }

    #[test]
    fn binary_round_trip_is_identity(n in 1usize..10, q0 in 1usize..4, count in 1usize..20, seed: u64) {
        let mut r = rng::seeded(seed);
        let samples = (0..count)
            .map(|i| Sample { x: common::random_matrix(q0, n, &mut r) * 1e3, label: i % 5 })
            .collect();
        let ds = Dataset::new(n, q0, 5, samples, format!("seed={seed}")).unwrap();
        let bytes = ds.to_bytes().unwrap();
        prop_assert_eq!(bytes.len(), ds.encoded_len());
        let back = Dataset::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        // Truncating anywhere is reported, never misread.
        let cut = (seed as usize) % bytes.len();
        prop_assert!(Dataset::from_bytes(&bytes[..cut]).is_err());
    }

    #[test]
    fn normalized_signals_peak_at_one(g in arb_graph(), seed: u64) {
        let ds = synth_source_localization(&g, 20, g.node_count() - 1, GsoKind::Adjacency, &mut rng::seeded(seed)).unwrap();
        let noisy = add_noise(&ds, 0.1, &mut rng::seeded(seed ^ 1)).unwrap();
        for s in &normalize_max_abs(&noisy).samples {
            let m = s.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!((m - 1.0).abs() <= 1e-15);
        }
    }
}
