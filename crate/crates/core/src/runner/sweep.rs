use rayon::prelude::*;

use super::config::TrainConfig;
use super::eval::predict_dump;
use super::report::{SweepRow, SweepTable};
use super::train::{prepare_data, train};
use super::variance::mean_shot_values;
use crate::error::{Error, Result};
use crate::loss::default_lambdas;
use crate::metrics::{diversity_by_group, shot_accuracy, Predictor, ShotValues};

/// Lambda triples studied for the three-expert model.
pub const TRIPLE_SWEEP: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0],
    [2.0, 2.0, 2.0],
    [0.0, 1.0, 2.0],
    [-0.5, 1.0, 2.5],
];

/// Single-expert lambda points spanning head- to tail-focused training.
pub const SINGLE_SWEEP: [f64; 9] = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

pub const ALPHA_SWEEP: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

fn seeds(config: &TrainConfig) -> Vec<u64> {
    (0..config.repeats as u64).map(|r| config.seed.wrapping_add(r)).collect()
}

/// Trains and evaluates one config; returns ensemble accuracy and diversity.
pub fn run_once(config: &TrainConfig) -> Result<(ShotValues, ShotValues)> {
    let data = prepare_data(config)?;
    let outcome = train(config, &data.train)?;
    let dump = predict_dump(outcome.model(), &data.test)?;
    Ok((
        shot_accuracy(&dump, &data.split, Predictor::Ensemble)?,
        diversity_by_group(&dump, &data.split)?,
    ))
}

fn run_settings(kind: &str, base: &TrainConfig, settings: Vec<(String, TrainConfig)>) -> Result<SweepTable> {
    if settings.len() < 2 {
        return Err(Error::invalid("a sweep needs at least two points"));
    }
    let seeds = seeds(base);
    let jobs: Vec<(usize, TrainConfig)> = settings
        .iter()
        .enumerate()
        .flat_map(|(i, (_, cfg))| {
            seeds.iter().map(move |&s| {
                let mut c = cfg.clone();
                c.seed = s;
                (i, c)
            })
        })
        .collect();
    let results: Vec<(ShotValues, ShotValues)> = jobs
        .par_iter()
        .map(|(_, cfg)| run_once(cfg))
        .collect::<Result<_>>()?;
    let rows = settings
        .iter()
        .enumerate()
        .map(|(i, (name, cfg))| {
            let (acc, div): (Vec<ShotValues>, Vec<ShotValues>) = jobs
                .iter()
                .zip(&results)
                .filter(|((j, _), _)| *j == i)
                .map(|(_, r)| *r)
                .unzip();
            SweepRow {
                setting: name.clone(),
                lambdas: cfg.lambdas.clone(),
                alpha: cfg.distill.alpha,
                accuracy: mean_shot_values(&acc),
                diversity: mean_shot_values(&div),
            }
        })
        .collect();
    Ok(SweepTable {
        kind: kind.to_string(),
        seeds,
        rows,
        config: base.echo(),
    })
}

fn lambda_label(lambdas: &[f64]) -> String {
    let parts: Vec<String> = lambdas.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(" "))
}

/// One run per lambda list (a single value trains a one-expert model).
pub fn lambda_sweep(config: &TrainConfig, points: &[Vec<f64>]) -> Result<SweepTable> {
    let settings = points
        .iter()
        .map(|p| {
            if p.is_empty() {
                return Err(Error::invalid("empty lambda point"));
            }
            let mut c = config.clone();
            c.lambdas = p.clone();
            Ok((format!("lambda={}", lambda_label(p)), c))
        })
        .collect::<Result<Vec<_>>>()?;
    run_settings("lambda", config, settings)
}

pub fn alpha_sweep(config: &TrainConfig, alphas: &[f64]) -> Result<SweepTable> {
    let settings = alphas
        .iter()
        .map(|&a| {
            let mut c = config.clone();
            c.distill.alpha = a;
            c.validate()?;
            Ok((format!("alpha={a}"), c))
        })
        .collect::<Result<Vec<_>>>()?;
    run_settings("alpha", config, settings)
}

/// Expert counts with lambdas assigned by [`default_lambdas`].
pub fn expert_count_sweep(config: &TrainConfig, counts: &[usize]) -> Result<SweepTable> {
    let settings = counts
        .iter()
        .map(|&m| {
            let mut c = config.clone();
            c.lambdas = default_lambdas(m)?;
            Ok((format!("M={m}"), c))
        })
        .collect::<Result<Vec<_>>>()?;
    run_settings("experts", config, settings)
}
