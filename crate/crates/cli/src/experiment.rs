//! Runs every (realization, architecture, sweep value) cell of a config.
//!
//! Seeds fan out from `master_seed` with `derive_seed`:
//!
//! ```text
//! realization i   r     = derive(master, i)
//! graph                 = derive(r, 0)
//! training signals      = derive(r, 1)
//! clean test signals    = derive(r, 2)
//! test noise at σ²      = derive(derive(r, 3), bits(σ²))
//! init + training       = derive(derive(r, 16 + a), key)
//! ```
//!
//! `a` is the architecture's index in `Structure::ALL` and `key` is the bit
//! pattern of the sweep value when the sweep changes training, else 0. A
//! cell's outcome therefore depends only on its own coordinates, never on
//! which other cells the config lists or how they are scheduled.
//!
//! With an `n_train` sweep the training sets are nested: every size is a
//! prefix of the largest one.

use std::time::Instant;

use log::info;
use mimo_gcnn::data::{add_noise, normalize_max_abs, synth_source_localization, Dataset};
use mimo_gcnn::graph::sbm_generate;
use mimo_gcnn::nn::Network;
use mimo_gcnn::optim::{evaluate, train_with_rng};
use mimo_gcnn::rng::{derive_seed, seeded};
use mimo_gcnn::{Gso, Structure};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InputNormalization, SweepParam};

const STREAM_GRAPH: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_ARCH_BASE: u64 = 16;

/// One evaluated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub realization: usize,
    pub architecture: Structure,
    pub sweep_param: Option<SweepParam>,
    pub sweep_value: Option<f64>,
    pub accuracy: f64,
    pub conv_params: usize,
    pub total_params: usize,
    pub graph_seed: u64,
    pub train_seed: u64,
    pub first_epoch_loss: f64,
    pub final_epoch_loss: f64,
    /// Training plus evaluation time; shared by all cells that reuse one
    /// trained network.
    pub wall_seconds: f64,
}

pub fn realization_seed(master: u64, realization: usize) -> u64 {
    derive_seed(master, realization as u64)
}

pub fn train_seed(realization_seed: u64, structure: Structure, sweep_key: u64) -> u64 {
    let a = Structure::ALL
        .iter()
        .position(|&s| s == structure)
        .expect("listed in ALL") as u64;
    derive_seed(derive_seed(realization_seed, STREAM_ARCH_BASE + a), sweep_key)
}

struct Realization {
    index: usize,
    graph_seed: u64,
    gso: Gso,
    /// Raw training signals, as many as the largest training size needs.
    train: Dataset,
    /// Test sets ready for the network, one per evaluated noise level.
    tests: Vec<(f64, Dataset)>,
}

struct Job<'a> {
    real: &'a Realization,
    structure: Structure,
    /// Training-side sweep value, if any.
    train_point: Option<f64>,
}

fn prepare(ds: &Dataset, norm: InputNormalization) -> Dataset {
    match norm {
        InputNormalization::None => ds.clone(),
        InputNormalization::MaxAbs => normalize_max_abs(ds),
    }
}

fn noise_levels(cfg: &ExperimentConfig) -> Vec<f64> {
    match &cfg.sweep {
        Some(s) if s.param == SweepParam::TestNoise => s.values.clone(),
        _ => vec![cfg.test_noise],
    }
}

fn max_train(cfg: &ExperimentConfig) -> usize {
    match &cfg.sweep {
        Some(s) if s.param == SweepParam::NTrain => s.values.iter().fold(0, |m, &v| m.max(v as usize)),
        _ => cfg.n_train,
    }
}

fn build_realization(cfg: &ExperimentConfig, index: usize) -> anyhow::Result<Realization> {
    let r = realization_seed(cfg.master_seed, index);
    let graph_seed = derive_seed(r, STREAM_GRAPH);
    let g = sbm_generate(&cfg.graph_spec(graph_seed))?;
    let gso = Gso::from_graph(&g, cfg.gso)?;
    let train = synth_source_localization(
        &g,
        max_train(cfg),
        cfg.t_max,
        cfg.diffusion,
        &mut seeded(derive_seed(r, STREAM_TRAIN)),
    )?;
    let clean = synth_source_localization(
        &g,
        cfg.n_test,
        cfg.t_max,
        cfg.diffusion,
        &mut seeded(derive_seed(r, STREAM_TEST)),
    )?;
    let noise_root = derive_seed(r, STREAM_NOISE);
    let tests = noise_levels(cfg)
        .into_iter()
        .map(|s2| {
            let mut rng = seeded(derive_seed(noise_root, s2.to_bits()));
            let noisy = add_noise(&clean, s2, &mut rng)?;
            Ok((s2, prepare(&noisy, cfg.input_normalization)))
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(Realization {
        index,
        graph_seed,
        gso,
        train,
        tests,
    })
}

fn run_job(cfg: &ExperimentConfig, job: &Job<'_>) -> anyhow::Result<Vec<CellResult>> {
    let start = Instant::now();
    let real = job.real;
    let sweep_param = cfg.sweep.as_ref().map(|s| s.param);
    let (n_train, keep_prob) = match (sweep_param, job.train_point) {
        (Some(SweepParam::NTrain), Some(v)) => (v as usize, cfg.keep_prob),
        (Some(SweepParam::KeepProb), Some(v)) => (cfg.n_train, v),
        _ => (cfg.n_train, cfg.keep_prob),
    };
    let key = job.train_point.map_or(0, f64::to_bits);
    let seed = train_seed(
        realization_seed(cfg.master_seed, real.index),
        job.structure,
        key,
    );
    let train_set = prepare(&real.train.take(n_train), cfg.input_normalization);

    let mut rng = seeded(seed);
    let spec = cfg.network_spec(job.structure, keep_prob);
    let mut net = Network::random(spec, real.gso.clone(), &mut rng)?;
    let history = train_with_rng(&mut net, &train_set, &cfg.train_config(seed), &mut rng)?;
    let (first, last) = match (history.first(), history.last()) {
        (Some(f), Some(l)) => (f.mean_loss, l.mean_loss),
        _ => (f64::NAN, f64::NAN),
    };

    let mut out = Vec::new();
    for (s2, test) in &real.tests {
        let accuracy = evaluate(&net, test)?;
        let sweep_value = match sweep_param {
            Some(SweepParam::TestNoise) => Some(*s2),
            _ => job.train_point,
        };
        out.push(CellResult {
            realization: real.index,
            architecture: job.structure,
            sweep_param,
            sweep_value,
            accuracy,
            conv_params: net.conv_param_count(),
            total_params: net.param_count(),
            graph_seed: real.graph_seed,
            train_seed: seed,
            first_epoch_loss: first,
            final_epoch_loss: last,
            wall_seconds: 0.0,
        });
    }
    let elapsed = start.elapsed().as_secs_f64();
    for cell in &mut out {
        cell.wall_seconds = elapsed;
    }
    info!(
        "realization {} {} {}: accuracy {:.3} ({:.1}s)",
        real.index,
        job.structure.label(),
        job.train_point.map_or(String::new(), |v| format!("{}={v}", cfg.sweep.as_ref().unwrap().param)),
        out[0].accuracy,
        elapsed
    );
    Ok(out)
}

/// Runs every cell and returns them ordered by realization, then
/// architecture in config order, then sweep value in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Vec<CellResult>> {
    cfg.validate()?;
    let realizations = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| build_realization(cfg, i))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let train_points: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) if s.param.affects_training() => s.values.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let mut jobs = Vec::new();
    for real in &realizations {
        for &structure in &cfg.architectures {
            for &train_point in &train_points {
                jobs.push(Job {
                    real,
                    structure,
                    train_point,
                });
            }
        }
    }
    // Jobs come back in submission order, which is already canonical.
    let cells = jobs
        .par_iter()
        .map(|job| run_job(cfg, job))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(cells.into_iter().flatten().collect())
}
