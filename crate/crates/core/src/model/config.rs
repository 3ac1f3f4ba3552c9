use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gru,
    Lstm,
    Bilstm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Fc,
    GruFc,
    LstmFc,
}

/// How the decoder reduces `[b, s, h]` to `[b, h]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// The classification-token slot at position 0.
    First,
    /// Mean over the unpadded positions.
    Mean,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " {:?}; expected one of: ", $($name, " "),+),
                        other
                    ))),
                }
            }
        }
    };
}

str_enum!(EncoderKind { Gru => "gru", Lstm => "lstm", Bilstm => "bilstm" });
str_enum!(DecoderKind { Fc => "fc", GruFc => "gru_fc", LstmFc => "lstm_fc" });
str_enum!(Pooling { First => "first", Mean => "mean" });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    /// Longest sequence the encoder accepts; shorter inputs are zero-padded.
    pub max_seq_len: usize,
    pub encoder: EncoderKind,
    pub decoder: DecoderKind,
    pub cheb_order: usize,
    pub num_blocks: usize,
    pub residual: bool,
    pub dropout: f64,
    pub num_classes: usize,
    pub leaky_slope: f64,
    pub conv_kernel: usize,
    pub pooling: Pooling,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 768,
            max_seq_len: 128,
            encoder: EncoderKind::Gru,
            decoder: DecoderKind::Fc,
            cheb_order: 3,
            num_blocks: 1,
            residual: false,
            dropout: 0.0,
            num_classes: 3,
            leaky_slope: 0.01,
            conv_kernel: 3,
            pooling: Pooling::First,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.hidden_dim == 0 || self.max_seq_len == 0 {
            return fail("hidden_dim and max_seq_len must be positive".into());
        }
        if self.cheb_order == 0 || self.num_blocks == 0 {
            return fail("cheb_order and num_blocks must be positive".into());
        }
        if self.num_classes != 3 {
            return fail(format!("num_classes must be 3, got {}", self.num_classes));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.conv_kernel % 2 == 0 {
            return fail(format!("conv_kernel {} must be odd", self.conv_kernel));
        }
        Ok(())
    }

    /// Short model label such as `STGNN-GRU`.
    pub fn label(&self) -> String {
        format!("STGNN-{}", self.encoder.as_str().to_uppercase())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_and_print() {
        for k in [EncoderKind::Gru, EncoderKind::Lstm, EncoderKind::Bilstm] {
            assert_eq!(k.as_str().parse::<EncoderKind>().unwrap(), k);
        }
        assert_eq!("gru_fc".parse::<DecoderKind>().unwrap(), DecoderKind::GruFc);
        assert!("rnn".parse::<EncoderKind>().is_err());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok: ModelConfig = serde_json::from_str(r#"{"hidden_dim": 16, "encoder": "lstm"}"#).unwrap();
        assert_eq!(ok.hidden_dim, 16);
        assert_eq!(ok.encoder, EncoderKind::Lstm);
        assert_eq!(ok.cheb_order, 3);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"hidden": 16}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig { num_classes: 2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { conv_kernel: 4, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
