use super::config::TrainConfig;
use super::report::{ExperimentReport, ReportRow};
use crate::data::{LabeledDataset, ShotSplit};
use crate::error::{Error, Result};
use crate::metrics::{diversity_by_group, shot_accuracy, PredictionDump, Predictor};
use crate::net::MultiExpertModel;

/// Raw per-expert logits of `model` on un-augmented test data.
pub fn predict_dump(model: &MultiExpertModel, test: &LabeledDataset) -> Result<PredictionDump> {
    if model.input_dim() != test.dim() || model.num_classes() != test.num_classes() {
        return Err(Error::Dimension(format!(
            "model takes {}-d input over {} classes, test set is {}-d over {}",
            model.input_dim(),
            model.num_classes(),
            test.dim(),
            test.num_classes()
        )));
    }
    let logits = model.predict(test.features().view())?;
    PredictionDump::from_logits(test.labels(), &logits)
}

/// Builds the accuracy/diversity report from a dump. `evaluate` and the
/// `report` subcommand both go through here.
pub fn report_from_dump(dump: &PredictionDump, split: &ShotSplit, config: &TrainConfig) -> Result<ExperimentReport> {
    let experts = (0..dump.num_experts())
        .map(|mu| {
            Ok(ReportRow {
                name: format!("E{}", mu + 1),
                values: shot_accuracy(dump, split, Predictor::Expert(mu))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        experts,
        ensemble: shot_accuracy(dump, split, Predictor::Ensemble)?,
        diversity: diversity_by_group(dump, split)?,
        test_instances: dump.len(),
        config: config.echo(),
        wall_clock_secs: None,
    })
}

pub fn evaluate(
    model: &MultiExpertModel,
    test: &LabeledDataset,
    split: &ShotSplit,
    config: &TrainConfig,
) -> Result<(ExperimentReport, PredictionDump)> {
    let dump = predict_dump(model, test)?;
    let report = report_from_dump(&dump, split, config)?;
    Ok((report, dump))
}
