//! Trains one network on a single source-localization graph and prints
//! per-epoch loss plus test accuracy.
//!
//! cargo run --release -p mimo-gcnn --example source_localization -- [structure] [n_train] [epochs] [seed]

use std::time::Instant;

use mimo_gcnn::data::{add_noise, normalize_max_abs, synth_source_localization};
use mimo_gcnn::graph::{sbm_generate, SbmSpec};
use mimo_gcnn::nn::{Network, NetworkSpec};
use mimo_gcnn::optim::{evaluate, train, TrainConfig};
use mimo_gcnn::{rng, Gso, GsoKind, Structure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let structure = args
        .first()
        .and_then(|s| Structure::parse(s))
        .unwrap_or(Structure::AggregateInputs);
    let n_train: usize = args.get(1).map_or(Ok(10_000), |s| s.parse())?;
    let epochs: usize = args.get(2).map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.get(3).map_or(Ok(1), |s| s.parse())?;

    let g = sbm_generate(&SbmSpec::new(16, 4, 0.8, 0.2, seed))?;
    let mut r = rng::seeded(seed + 100);
    let train_set = normalize_max_abs(&synth_source_localization(&g, n_train, 15, GsoKind::Adjacency, &mut r)?);
    let test_raw = synth_source_localization(&g, 200, 15, GsoKind::Adjacency, &mut r)?;
    let test = normalize_max_abs(&add_noise(&test_raw, 0.1, &mut r)?);
    let test_clean = normalize_max_abs(&test_raw);

    let spec = NetworkSpec::uniform(structure, 16, 1, &[32, 64], 5, 16, 0.75);
    let gso = Gso::from_graph(&g, GsoKind::ScaledAdjacency)?;
    let mut net = Network::random(spec, gso, &mut r)?;
    let cfg = TrainConfig {
        epochs,
        seed,
        ..Default::default()
    };
    let start = Instant::now();
    let history = train(&mut net, &train_set, &cfg)?;
    for h in &history {
        println!("epoch {:2}  loss {:.4}  train acc {:.3}", h.epoch, h.mean_loss, h.train_accuracy);
    }
    println!(
        "{} ({} conv params): test accuracy {:.3}, clean {:.3}, {:.1}s",
        structure.label(),
        net.conv_param_count(),
        evaluate(&net, &test)?,
        evaluate(&net, &test_clean)?,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
