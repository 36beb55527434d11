//! Adam optimizer and the four front-end trainability settings.

use crate::error::{Error, Result};
use crate::mat::Mat;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Which front-end stages receive gradient updates. The classifier always
/// trains.
///
/// * `A` — neither the Mel bank nor the STFT kernels train.
/// * `B` — Mel trains, STFT is fixed.
/// * `C` — STFT trains, Mel is fixed.
/// * `D` — both train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrainSetting {
    A,
    B,
    C,
    D,
}

impl TrainSetting {
    pub fn mel_trainable(self) -> bool {
        matches!(self, TrainSetting::B | TrainSetting::D)
    }

    pub fn stft_trainable(self) -> bool {
        matches!(self, TrainSetting::C | TrainSetting::D)
    }
}

impl fmt::Display for TrainSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            TrainSetting::A => 'A',
            TrainSetting::B => 'B',
            TrainSetting::C => 'C',
            TrainSetting::D => 'D',
        };
        write!(f, "{c}")
    }
}

impl FromStr for TrainSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(TrainSetting::A),
            "B" | "b" => Ok(TrainSetting::B),
            "C" | "c" => Ok(TrainSetting::C),
            "D" | "d" => Ok(TrainSetting::D),
            other => Err(Error::Parse(format!("unknown setting `{other}`"))),
        }
    }
}

/// Parameter groups that a setting can freeze or train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamGroup {
    Classifier,
    Mel,
    Stft,
}

/// The set of groups that receive updates under a setting.
pub fn trainable_groups(setting: TrainSetting) -> Vec<ParamGroup> {
    let mut groups = vec![ParamGroup::Classifier];
    if setting.mel_trainable() {
        groups.push(ParamGroup::Mel);
    }
    if setting.stft_trainable() {
        groups.push(ParamGroup::Stft);
    }
    groups
}

/// Adam hyperparameters; per-group learning-rate overrides ride on top of
/// the shared rate.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with bias correction over named parameter tensors.
///
/// Call [`Adam::begin_step`] once per optimizer step, then
/// [`Adam::update`] for each trainable tensor. Moment buffers are created
/// lazily and keyed by tensor name, so frozen tensors carry no state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    lr_overrides: BTreeMap<ParamGroup, f64>,
    state: BTreeMap<String, Moments>,
    step_count: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            lr_overrides: BTreeMap::new(),
            state: BTreeMap::new(),
            step_count: 0,
        }
    }

    /// Override the learning rate for one group (e.g. a slower Mel rate).
    pub fn set_group_lr(&mut self, group: ParamGroup, lr: f64) {
        self.lr_overrides.insert(group, lr);
    }

    pub fn group_lr(&self, group: ParamGroup) -> f64 {
        *self.lr_overrides.get(&group).unwrap_or(&self.config.lr)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Advance the shared step counter used for bias correction.
    pub fn begin_step(&mut self) {
        self.step_count += 1;
    }

    /// One Adam update of `param` under `grad`, belonging to `group`.
    ///
    /// Rejects non-finite gradients so training aborts with diagnostics
    /// instead of silently corrupting parameters.
    pub fn update(
        &mut self,
        name: &str,
        group: ParamGroup,
        param: &mut [f64],
        grad: &[f64],
    ) -> Result<()> {
        if param.len() != grad.len() {
            return Err(Error::ContractViolation(format!(
                "adam update `{name}`: param length {} vs grad {}",
                param.len(),
                grad.len()
            )));
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite gradient for `{name}` at step {}",
                self.step_count
            )));
        }
        assert!(self.step_count > 0, "call begin_step before update");

        let lr = self.group_lr(group);
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        let moments = self.state.entry(name.to_string()).or_insert_with(|| Moments {
            m: vec![0.0; param.len()],
            v: vec![0.0; param.len()],
        });
        if moments.m.len() != param.len() {
            return Err(Error::ContractViolation(format!(
                "adam update `{name}`: moment length {} vs param {}",
                moments.m.len(),
                param.len()
            )));
        }

        for ((p, &g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(moments.m.iter_mut().zip(moments.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// [`Adam::update`] for matrix-shaped tensors.
    pub fn update_mat(
        &mut self,
        name: &str,
        group: ParamGroup,
        param: &mut Mat,
        grad: &Mat,
    ) -> Result<()> {
        if param.shape() != grad.shape() {
            return Err(Error::ContractViolation(format!(
                "adam update `{name}`: param {:?} vs grad {:?}",
                param.shape(),
                grad.shape()
            )));
        }
        let mut buf = std::mem::replace(param, Mat::zeros(0, 0));
        let result = self.update(name, group, buf.as_mut_slice(), grad.as_slice());
        *param = buf;
        result
    }
}
