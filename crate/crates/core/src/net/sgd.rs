use serde::{Deserialize, Serialize};

use super::model::{Gradients, MultiExpertModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Linear,
    Cosine,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Linear => "linear",
            Schedule::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Schedule::Linear),
            "cosine" => Ok(Schedule::Cosine),
            other => Err(Error::invalid(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
    pub schedule: Schedule,
    pub total_epochs: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            nesterov: true,
            schedule: Schedule::Linear,
            total_epochs: 1,
        }
    }
}

impl SgdConfig {
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        lr_at(self.schedule, self.lr0, epoch, self.total_epochs)
    }
}

/// Per-epoch learning rate. Linear decays to zero at `total_epochs`; cosine
/// follows a half period.
pub fn lr_at(schedule: Schedule, lr0: f64, epoch: usize, total_epochs: usize) -> Result<f64> {
    if epoch >= total_epochs {
        return Err(Error::invalid(format!(
            "epoch {epoch} outside [0, {total_epochs})"
        )));
    }
    let progress = epoch as f64 / total_epochs as f64;
    Ok(match schedule {
        Schedule::Linear => lr0 * (1.0 - progress),
        Schedule::Cosine => lr0 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()),
    })
}

/// One momentum update on a flat tensor. With Nesterov the step uses the
/// look-ahead `g + wd*p + m*v` after `v` is refreshed.
pub fn sgd_update(params: &mut [f64], grads: &[f64], buffer: &mut [f64], config: &SgdConfig, lr: f64) {
    let SgdConfig {
        momentum: m,
        weight_decay: wd,
        nesterov,
        ..
    } = *config;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(buffer.iter_mut()) {
        let d = g + wd * *p;
        *v = m * *v + d;
        let step = if nesterov { d + m * *v } else { *v };
        *p -= lr * step;
    }
}

/// Optimizer state: hyperparameters plus one momentum buffer per tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub config: SgdConfig,
    buffers: Vec<Vec<f64>>,
}

impl SgdState {
    pub fn new(config: SgdConfig, model: &MultiExpertModel) -> Self {
        let buffers = model.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self { config, buffers }
    }

    pub fn from_buffers(config: SgdConfig, model: &MultiExpertModel, buffers: Vec<Vec<f64>>) -> Result<Self> {
        let shapes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
        let got: Vec<usize> = buffers.iter().map(Vec::len).collect();
        if shapes != got {
            return Err(Error::Dimension(format!(
                "momentum buffers {got:?} do not match parameters {shapes:?}"
            )));
        }
        Ok(Self { config, buffers })
    }

    pub fn buffers(&self) -> &[Vec<f64>] {
        &self.buffers
    }

    pub fn step(&mut self, model: &mut MultiExpertModel, grads: &Gradients, epoch: usize) -> Result<()> {
        let lr = self.config.lr_at(epoch)?;
        self.step_with_lr(model, grads, lr)
    }

    pub fn step_with_lr(&mut self, model: &mut MultiExpertModel, grads: &Gradients, lr: f64) -> Result<()> {
        let grad_slices = grads.slices();
        if grad_slices.len() != self.buffers.len() {
            return Err(Error::Dimension("gradient layout does not match optimizer".into()));
        }
        let config = self.config;
        for ((p, g), buf) in model
            .param_slices_mut()
            .into_iter()
            .zip(grad_slices)
            .zip(&mut self.buffers)
        {
            if p.len() != g.len() || p.len() != buf.len() {
                return Err(Error::Dimension("gradient shape does not match parameter".into()));
            }
            sgd_update(p, g, buf, &config, lr);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(momentum: f64, wd: f64, nesterov: bool) -> SgdConfig {
        SgdConfig {
            lr0: 0.1,
            momentum,
            weight_decay: wd,
            nesterov,
            schedule: Schedule::Linear,
            total_epochs: 10,
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(lr_at(Schedule::Linear, 0.1, 0, 200).unwrap(), 0.1);
        assert!((lr_at(Schedule::Linear, 0.1, 150, 200).unwrap() - 0.025).abs() < 1e-15);
        assert!((lr_at(Schedule::Cosine, 0.2, 50, 100).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(lr_at(Schedule::Cosine, 0.2, 0, 100).unwrap(), 0.2);
        assert!(lr_at(Schedule::Linear, 0.1, 200, 200).is_err());
    }

    #[test]
    fn plain_gradient_descent_without_momentum() {
        let mut p = [1.0, -2.0];
        let mut v = [0.0; 2];
        sgd_update(&mut p, &[0.5, 0.25], &mut v, &cfg(0.0, 0.0, false), 0.1);
        assert_eq!(p, [0.95, -2.025]);
        let mut p = [1.0, -2.0];
        let mut v = [0.0; 2];
        sgd_update(&mut p, &[0.5, 0.25], &mut v, &cfg(0.0, 0.0, true), 0.1);
        assert_eq!(p, [0.95, -2.025]);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = [3.0];
        let mut v = [0.0];
        sgd_update(&mut p, &[0.0], &mut v, &cfg(0.9, 0.0, true), 0.1);
        assert_eq!(p, [3.0]);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = [3.0, -1.0];
        let mut v = [0.4, 0.2];
        sgd_update(&mut p, &[1.0, 2.0], &mut v, &cfg(0.9, 5e-4, true), 0.0);
        assert_eq!(p, [3.0, -1.0]);
    }

    #[test]
    fn quadratic_trajectory_matches_recurrence() {
        // f(p) = p^2 / 2 so g = p.
        for nesterov in [false, true] {
            let c = cfg(0.9, 0.0, nesterov);
            let mut p = [1.0];
            let mut v = [0.0];
            let (mut pr, mut vr) = (1.0f64, 0.0f64);
            for _ in 0..2 {
                let g = [p[0]];
                sgd_update(&mut p, &g, &mut v, &c, 0.1);
                let gr = pr;
                vr = 0.9 * vr + gr;
                pr -= 0.1 * if nesterov { gr + 0.9 * vr } else { vr };
            }
            assert_eq!(p[0], pr);
        }
        // hand-evaluated: heavy ball gives 0.9, then 0.9 - 0.1*(0.9*1 + 0.9) = 0.72
        let c = cfg(0.9, 0.0, false);
        let mut p = [1.0];
        let mut v = [0.0];
        sgd_update(&mut p, &[1.0], &mut v, &c, 0.1);
        assert!((p[0] - 0.9).abs() < 1e-15);
        let g = [p[0]];
        sgd_update(&mut p, &g, &mut v, &c, 0.1);
        assert!((p[0] - 0.72).abs() < 1e-15);
        // Nesterov: v=1, p=1-0.1*(1+0.9)=0.81; g=0.81, v=1.71, p=0.81-0.1*(0.81+1.539)=0.5751
        let c = cfg(0.9, 0.0, true);
        let mut p = [1.0];
        let mut v = [0.0];
        sgd_update(&mut p, &[1.0], &mut v, &c, 0.1);
        assert!((p[0] - 0.81).abs() < 1e-15);
        let g = [p[0]];
        sgd_update(&mut p, &g, &mut v, &c, 0.1);
        assert!((p[0] - 0.5751).abs() < 1e-14);
    }

    #[test]
    fn weight_decay_enters_buffer() {
        let mut p = [2.0];
        let mut v = [0.0];
        sgd_update(&mut p, &[0.0], &mut v, &cfg(0.0, 0.5, false), 0.1);
        assert_eq!(v, [1.0]);
        assert!((p[0] - 1.9).abs() < 1e-15);
    }
}
