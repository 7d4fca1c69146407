use rayon::prelude::*;

use super::config::TrainConfig;
use super::eval::predict_dump;
use super::report::{VarianceColumn, VarianceReport};
use super::train::{train, PreparedData};
use crate::data::bootstrap_resample;
use crate::error::{Error, Result};
use crate::metrics::{
    ensemble_truth_probabilities, model_variance, shot_accuracy, variance_by_group, PredictionMatrix,
    Predictor, ShotValues,
};

/// Outcome of one trained member: truth probabilities on the probe set and
/// its ensemble accuracy.
struct Member {
    truth: Vec<f64>,
    accuracy: ShotValues,
}

fn run_member(config: &TrainConfig, data: &PreparedData, k: usize) -> Result<Member> {
    let resampled = bootstrap_resample(&data.train, config.seed.wrapping_add(k as u64))?;
    let outcome = train(config, &resampled)?;
    let dump = predict_dump(outcome.model(), &data.test)?;
    Ok(Member {
        truth: ensemble_truth_probabilities(&dump),
        accuracy: shot_accuracy(&dump, &data.split, Predictor::Ensemble)?,
    })
}

pub(crate) fn mean_shot_values(values: &[ShotValues]) -> ShotValues {
    let mean = |f: fn(&ShotValues) -> Option<f64>| {
        let xs: Vec<f64> = values.iter().filter_map(f).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    ShotValues {
        many: mean(|v| v.many),
        medium: mean(|v| v.medium),
        few: mean(|v| v.few),
        all: mean(|v| v.all),
    }
}

/// Trains `m` models on bootstrap resamples of the training set (resample
/// seeds `seed + 1 ..= seed + m`, shared init and batch seeds) and reports
/// the variance of their true-class probabilities on the test set.
pub fn variance_column(config: &TrainConfig, data: &PreparedData, m: usize, name: &str) -> Result<VarianceColumn> {
    if m < 2 {
        return Err(Error::invalid(format!("variance protocol needs m >= 2, got {m}")));
    }
    let members: Vec<Member> = (1..=m)
        .into_par_iter()
        .map(|k| {
            run_member(config, data, k).map_err(|e| Error::Member {
                member: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = members.iter().map(|m| m.truth.clone()).collect();
    let stats = model_variance(&PredictionMatrix::from_rows(&rows)?)?;
    let accuracies: Vec<ShotValues> = members.iter().map(|m| m.accuracy).collect();
    Ok(VarianceColumn {
        name: name.to_string(),
        alpha: config.distill.alpha,
        variance: variance_by_group(&stats.per_instance, data.test.labels(), &data.split)?,
        accuracy: mean_shot_values(&accuracies),
    })
}

/// Variance protocol for `config`; in paired mode the same protocol also runs
/// with `alpha = 0` and both columns are reported (without CS first).
pub fn variance_protocol(config: &TrainConfig, data: &PreparedData, m: usize, paired: bool) -> Result<VarianceReport> {
    let mut columns = Vec::new();
    if paired {
        let mut off = config.clone();
        off.distill.alpha = 0.0;
        columns.push(variance_column(&off, data, m, "w/o CS")?);
        columns.push(variance_column(config, data, m, "w/ CS")?);
    } else {
        let name = if config.distill.alpha > 0.0 { "w/ CS" } else { "w/o CS" };
        columns.push(variance_column(config, data, m, name)?);
    }
    Ok(VarianceReport {
        models: m,
        probes: data.test.len(),
        columns,
        config: config.echo(),
    })
}
