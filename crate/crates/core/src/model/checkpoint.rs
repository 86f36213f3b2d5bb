use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::ModelState;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "conda-tta-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON container for a [`ModelState`].
///
/// Reals are written in shortest round-trip form and parsed back exactly, so
/// save/load is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelState,
    /// Free-form run metadata (training seed, resolved config hash, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(model: ModelState) -> Self {
        Self { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, model, metadata: BTreeMap::new() }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Schema(format!("not a checkpoint: format tag {:?}", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        ckpt.model.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BnMode, ModelDims};
    use crate::numeric::{Matrix, SeededRng};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut model = ModelState::new(ModelDims { input: 5, proj_hidden: 7, proj_out: 3, cls_hidden: 4 }, 99).unwrap();
        let mut rng = SeededRng::new(1);
        let z = Matrix::new(6, 3, rng.gaussian_sample(18, 0.0, 3.0).unwrap()).unwrap();
        model.classify(&z).unwrap();
        model.set_bn_mode(BnMode::Eval);
        let ckpt = Checkpoint::new(model.clone()).with_metadata("seed", "99");
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        assert_eq!(back, ckpt);
        let bits = |m: &ModelState| -> Vec<u64> {
            let mut v: Vec<u64> = m.flatten_parameters().iter().map(|x| x.to_bits()).collect();
            for bn in m.bn_layers() {
                v.extend(bn.running_mean.iter().chain(&bn.running_var).map(|x| x.to_bits()));
            }
            v
        };
        assert_eq!(bits(&back.model), bits(&model));
    }

    #[test]
    fn wrong_format_is_a_schema_error() {
        let model = ModelState::new(ModelDims::compact(2), 0).unwrap();
        let mut ckpt = Checkpoint::new(model);
        ckpt.format = "other".into();
        let text = serde_json::to_string(&ckpt).unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(Error::Schema(_))));
    }
}
