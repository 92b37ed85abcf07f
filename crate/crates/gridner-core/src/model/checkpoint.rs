//! Versioned JSON checkpoint: model config, vocabulary, label inventory
//! and the flat parameter groups in declared order. Loading validates
//! every shape against the config.

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Parameters, Vocab};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub vocab: Vec<String>,
    pub labels: Vec<String>,
    pub params: Vec<ParamGroup>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn new(
        config: ModelConfig,
        vocab: &Vocab,
        labels: Vec<String>,
        params: &Parameters,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            vocab: vocab.tokens().to_vec(),
            labels,
            params: params
                .groups()
                .into_iter()
                .map(|(name, values)| ParamGroup {
                    name: name.to_string(),
                    values: values.to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string(self).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let ckpt: Checkpoint =
            serde_json::from_str(json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    /// Reassembles the parameter struct, rejecting unknown, missing,
    /// out-of-order or wrongly sized groups.
    pub fn into_parts(self) -> Result<(ModelConfig, Vocab, Vec<String>, Parameters), ModelError> {
        self.config.validate()?;
        if self.config.vocab_size != self.vocab.len() {
            return Err(ModelError::Checkpoint(format!(
                "config says vocab_size {} but {} tokens stored",
                self.config.vocab_size,
                self.vocab.len()
            )));
        }
        if self.config.classes != 2 + self.labels.len() {
            return Err(ModelError::Checkpoint(format!(
                "config says {} classes but {} labels stored",
                self.config.classes,
                self.labels.len()
            )));
        }
        let mut params = Parameters::zeros_like(&self.config);
        let mut groups = params.groups_mut();
        if groups.len() != self.params.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameter groups, found {}",
                groups.len(),
                self.params.len()
            )));
        }
        for (slot, stored) in groups.iter_mut().zip(self.params.iter()) {
            if slot.0 != stored.name {
                return Err(ModelError::Checkpoint(format!(
                    "parameter group `{}` out of order (expected `{}`)",
                    stored.name, slot.0
                )));
            }
            if slot.1.len() != stored.values.len() {
                return Err(ModelError::Checkpoint(format!(
                    "group `{}` has {} values, expected {}",
                    stored.name,
                    stored.values.len(),
                    slot.1.len()
                )));
            }
            slot.1.copy_from_slice(&stored.values);
        }
        drop(groups);
        let vocab = Vocab::from_tokens(self.vocab);
        Ok((self.config, vocab, self.labels, params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let cfg = ModelConfig {
            vocab_size: 3,
            d_embed: 4,
            d_context: 3,
            d_bi: 5,
            d_co: 4,
            classes: 3,
            conv_kernel: 3,
            seed: 5,
        };
        let params = init_params(&cfg).unwrap();
        let vocab = Vocab::from_tokens(vec!["a".into(), "b".into(), "c".into()]);
        let ckpt = Checkpoint::new(cfg.clone(), &vocab, vec!["ADR".into()], &params);
        let json = ckpt.to_json().unwrap();
        let (cfg2, vocab2, labels2, params2) =
            Checkpoint::from_json(&json).unwrap().into_parts().unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(vocab2.tokens(), vocab.tokens());
        assert_eq!(labels2, vec!["ADR".to_string()]);
        assert_eq!(params2, params);
    }

    #[test]
    fn checkpoint_rejects_wrong_shape() {
        let cfg = ModelConfig {
            vocab_size: 3,
            d_embed: 4,
            d_context: 3,
            d_bi: 5,
            d_co: 4,
            classes: 3,
            conv_kernel: 3,
            seed: 5,
        };
        let params = init_params(&cfg).unwrap();
        let vocab = Vocab::from_tokens(vec!["a".into(), "b".into(), "c".into()]);
        let mut ckpt = Checkpoint::new(cfg, &vocab, vec!["ADR".into()], &params);
        ckpt.params[0].values.pop();
        let err = ckpt.into_parts().unwrap_err();
        assert!(err.to_string().contains("embedding"));
    }
}
