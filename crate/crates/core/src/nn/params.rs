//! Named parameters, their gradients, and Adam state.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Name → tensor map with deterministic (sorted) iteration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    map: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Adds `delta` into the tensor called `name`.
    pub fn add(&mut self, name: &str, delta: &Tensor) -> Result<()> {
        let t = self.map.get_mut(name).ok_or_else(|| Error::invalid(format!("unknown parameter `{name}`")))?;
        if t.len() != delta.len() {
            return Err(Error::ShapeMismatch { op: "accumulate grad", left: t.shape().to_vec(), right: delta.shape().to_vec() });
        }
        t.add_assign(delta)
    }

    /// Elementwise sum of two maps with identical names and shapes.
    pub fn add_all(&mut self, other: &Params) -> Result<()> {
        for (name, t) in &other.map {
            self.add(name, t)?;
        }
        Ok(())
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Params {
        Params { map: self.map.iter().map(|(n, t)| (n.clone(), Tensor::zeros(t.shape()))).collect() }
    }

    fn insert(&mut self, name: String, t: Tensor) {
        self.map.insert(name, t);
    }
}

impl Index<&str> for Params {
    type Output = Tensor;

    fn index(&self, name: &str) -> &Tensor {
        self.map.get(name).unwrap_or_else(|| panic!("missing parameter `{name}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Parameters, gradients and Adam moments, all keyed by the same names and
/// shape-identical per name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub values: Params,
    pub grads: Params,
    m: Params,
    v: Params,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        let zeros = Tensor::zeros(value.shape());
        self.grads.insert(name.clone(), zeros.clone());
        self.m.insert(name.clone(), zeros.clone());
        self.v.insert(name.clone(), zeros);
        self.values.insert(name, value);
    }

    /// Uniform initialization in `[-1/√fan_in, 1/√fan_in]`.
    pub fn init_uniform<R: Rng>(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut R) {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data).expect("valid shape"));
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in self.grads.map.values_mut() {
            t.data_mut().fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, f: f64) {
        for t in self.grads.map.values_mut() {
            t.scale(f);
        }
    }

    /// Values (read) and gradients (write) at the same time.
    pub fn split_mut(&mut self) -> (&Params, &mut Params) {
        (&self.values, &mut self.grads)
    }

    /// One Adam update with bias correction over every parameter.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (name, value) in self.values.map.iter_mut() {
            let g = &self.grads.map[name];
            let m = self.m.map.get_mut(name).expect("moment m");
            let v = self.v.map.get_mut(name).expect("moment v");
            for (((p, &gi), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }

    pub fn moments(&self, name: &str) -> Option<(&Tensor, &Tensor)> {
        Some((self.m.get(name)?, self.v.get(name)?))
    }
}

pub const CHECKPOINT_FORMAT: &str = "betaflow-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Adam moments; empty in inference-only checkpoints.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v: Vec<f64>,
}

/// On-disk container: parameters with optimizer state, the model config
/// and the training config. JSON floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub config: serde_json::Value,
    #[serde(default)]
    pub train_config: Option<serde_json::Value>,
    pub step: u64,
    pub params: BTreeMap<String, ParamRecord>,
}

impl Checkpoint {
    pub fn from_store(model: &str, config: serde_json::Value, train_config: Option<serde_json::Value>, store: &ParamStore) -> Self {
        let params = store
            .values
            .iter()
            .map(|(name, t)| {
                let (m, v) = store.moments(name).expect("moments exist for every parameter");
                (
                    name.clone(),
                    ParamRecord { shape: t.shape().to_vec(), data: t.data().to_vec(), m: m.data().to_vec(), v: v.data().to_vec() },
                )
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: model.to_string(),
            config,
            train_config,
            step: store.step,
            params,
        }
    }

    pub fn to_store(&self) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for (name, rec) in &self.params {
            let value = Tensor::new(rec.shape.clone(), rec.data.clone())?;
            store.insert(name.clone(), value);
            if !rec.m.is_empty() || !rec.v.is_empty() {
                *store.m.get_mut(name).expect("inserted") = Tensor::new(rec.shape.clone(), rec.m.clone())?;
                *store.v.get_mut(name).expect("inserted") = Tensor::new(rec.shape.clone(), rec.v.clone())?;
            }
        }
        store.step = self.step;
        Ok(store)
    }

    /// Drops the optimizer moments; loading such a checkpoint restarts Adam
    /// from zero moments.
    pub fn without_optimizer_state(mut self) -> Self {
        for rec in self.params.values_mut() {
            rec.m.clear();
            rec.v.clear();
        }
        self
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(reader)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("not a checkpoint file (format `{}`)", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}
