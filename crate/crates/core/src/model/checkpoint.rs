use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sleepcast_kernel::{HasParams, Rng, Tensor};

use super::{Dims, HyperParams, Model, ModelKind};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "sleepcast-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    fn new(name: &str, t: &Tensor) -> Self {
        Self {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }

    fn tensor(&self) -> Result<Tensor> {
        Ok(Tensor::new(&self.shape, self.data.clone())?)
    }
}

/// JSON container with everything needed to rebuild a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub hyperparams: HyperParams,
    pub dims: Dims,
    pub feature_names: Vec<String>,
    pub params: Vec<NamedTensor>,
    pub buffers: Vec<NamedTensor>,
    /// Free-form run metadata (seed, config); not used to rebuild the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

impl Model {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let store = self.store();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: self.kind,
            hyperparams: self.hyperparams.clone(),
            dims: self.dims,
            feature_names: self.feature_names.clone(),
            params: store.params().iter().map(|p| NamedTensor::new(&p.name, &p.value)).collect(),
            buffers: store.buffers().iter().map(|b| NamedTensor::new(&b.name, &b.value)).collect(),
            provenance: None,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container {:?} version {} (expected {CHECKPOINT_FORMAT:?} version {CHECKPOINT_VERSION})",
                ck.format, ck.version
            )));
        }
        let mut model = Model::new(ck.kind, &ck.hyperparams, ck.dims, &mut Rng::new(0))?;
        model.feature_names = ck.feature_names.clone();
        let store = model.store_mut();
        if store.params().len() != ck.params.len() || store.buffers().len() != ck.buffers.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters and {} buffers, found {} and {}",
                store.params().len(),
                store.buffers().len(),
                ck.params.len(),
                ck.buffers.len()
            )));
        }
        let wrap = |e: sleepcast_kernel::KernelError| Error::Checkpoint(e.to_string());
        for p in &ck.params {
            store.set_value(&p.name, p.tensor()?).map_err(wrap)?;
        }
        for b in &ck.buffers {
            store.set_buffer(&b.name, b.tensor()?).map_err(wrap)?;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(&ck)
    }
}
