use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::config::{DataSource, TrainConfig};
use crate::data::{
    augment_in_place, exp_longtail_counts, shot_partition, synth_gaussians, AugmentPolicy,
    LabeledDataset, ShotSplit,
};
use crate::error::{Error, Result};
use crate::loss::{model_objective, DistributionWeight};
use crate::net::{Checkpoint, MultiExpertModel, SgdState};
use crate::seed::{self, tag};

/// Training and test data for a config, plus the shot split derived from the
/// training counts.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub split: ShotSplit,
}

pub fn prepare_data(config: &TrainConfig) -> Result<PreparedData> {
    let (train, test) = match &config.data {
        DataSource::Synthetic {
            profile,
            dim,
            separation,
            test_per_class,
        } => {
            let counts = exp_longtail_counts(profile)?;
            let train = synth_gaussians(
                profile.classes,
                *dim,
                &counts,
                *separation,
                seed::derive(config.seed, &[tag::TRAIN_DATA]),
            )?;
            let test = synth_gaussians(
                profile.classes,
                *dim,
                &vec![*test_per_class; profile.classes],
                *separation,
                seed::derive(config.seed, &[tag::TEST_DATA]),
            )?;
            (train, test)
        }
        DataSource::Files { train, test } => {
            (LabeledDataset::load(train)?, LabeledDataset::load(test)?)
        }
    };
    if train.dim() != test.dim() || train.num_classes() != test.num_classes() {
        return Err(Error::Dimension(format!(
            "train is {}-d with {} classes, test is {}-d with {} classes",
            train.dim(),
            train.num_classes(),
            test.dim(),
            test.num_classes()
        )));
    }
    let split = shot_partition(train.counts(), config.thresholds)?;
    Ok(PreparedData { train, test, split })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertEpochLog {
    pub dl: f64,
    pub cs: f64,
    /// Fraction of training instances in the confident set this epoch.
    pub confident_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub total: f64,
    pub experts: Vec<ExpertEpochLog>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn model(&self) -> &MultiExpertModel {
        &self.checkpoint.model
    }

    pub fn write_log<W: Write>(&self, mut w: W) -> Result<()> {
        let experts = self.log.first().map_or(0, |e| e.experts.len());
        let mut header = vec!["epoch".to_string(), "lr".into(), "total".into()];
        for mu in 0..experts {
            header.push(format!("dl_{mu}"));
            header.push(format!("cs_{mu}"));
            header.push(format!("confident_{mu}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for e in &self.log {
            let mut row = vec![e.epoch.to_string(), e.lr.to_string(), e.total.to_string()];
            for x in &e.experts {
                row.push(x.dl.to_string());
                row.push(x.cs.to_string());
                row.push(x.confident_fraction.to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fill_view(
    out: &mut Array2<f64>,
    data: &LabeledDataset,
    batch: &[usize],
    policy: &AugmentPolicy,
    run_seed: u64,
    view_tag: u64,
    epoch: usize,
) {
    for (r, &i) in batch.iter().enumerate() {
        let mut row = data.row(i).to_owned();
        augment_in_place(
            &mut row,
            policy,
            seed::derive(run_seed, &[view_tag, epoch as u64, i as u64]),
        );
        out.row_mut(r).assign(&row);
    }
}

/// Runs the full multi-expert training loop on `data`: per batch, a weak and
/// a strong view of every instance go through the shared backbone and all
/// heads, the combined objective is backpropagated and SGD takes a step.
pub fn train(config: &TrainConfig, data: &LabeledDataset) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let run_seed = config.seed;
    let mut model = MultiExpertModel::init(
        data.dim(),
        &config.hidden,
        data.num_classes(),
        &config.lambdas,
        config.scale,
        seed::derive(run_seed, &[tag::INIT]),
    )?;
    let weights = DistributionWeight::for_lambdas(&config.lambdas, data.counts())?;
    let mut optimizer = SgdState::new(config.sgd(), &model);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.sgd().lr_at(epoch)?;
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::derive(run_seed, &[tag::SHUFFLE, epoch as u64])));

        let mut epoch_total = 0.0;
        let mut experts = vec![
            ExpertEpochLog {
                dl: 0.0,
                cs: 0.0,
                confident_fraction: 0.0,
            };
            config.experts()
        ];
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut weak = Array2::zeros((batch.len(), data.dim()));
            let mut strong = Array2::zeros((batch.len(), data.dim()));
            fill_view(&mut weak, data, batch, &config.weak, run_seed, tag::WEAK_VIEW, epoch);
            fill_view(&mut strong, data, batch, &config.strong, run_seed, tag::STRONG_VIEW, epoch);
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels()[i]).collect();

            let (loss, grads) =
                model_objective(&model, weak.view(), strong.view(), &labels, &weights, &config.distill)?;
            for (mu, terms) in loss.experts.iter().enumerate() {
                if !terms.dl.is_finite() || !terms.cs.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch}, batch {b}, expert {mu} (dl {}, cs {})",
                        terms.dl, terms.cs
                    )));
                }
            }
            if !grads.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, batch {b}"
                )));
            }
            optimizer.step_with_lr(&mut model, &grads, lr)?;

            let weight = batch.len() as f64 / n as f64;
            epoch_total += loss.total * weight;
            for (log, terms) in experts.iter_mut().zip(&loss.experts) {
                log.dl += terms.dl * weight;
                log.cs += terms.cs * weight;
                log.confident_fraction += terms.confident as f64 / n as f64;
            }
        }
        log.push(EpochLog {
            epoch,
            lr,
            total: epoch_total,
            experts,
        });
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            optimizer: Some(optimizer),
        },
        log,
    })
}
