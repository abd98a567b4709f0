//! Plain-text checkpoints. Reals are stored as the hex of their bit
//! patterns, so a reload reproduces the model exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::model::Model;
use crate::autodiff::{BatchNormState, Param};
use crate::dense::Matrix;
use crate::error::{Error, Result};

const HEADER: &str = "dropedge-checkpoint 1";

fn hex_line(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 17);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{:016x}", v.to_bits()).unwrap();
    }
    out
}

/// Serializes `model` to the checkpoint text format.
pub fn write_checkpoint(model: &Model) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "config {}", serde_json::to_string(model.config())?).unwrap();
    writeln!(out, "shape {} {}", model.n_features(), model.n_classes()).unwrap();
    for p in model.params() {
        let (r, c) = p.value.shape();
        writeln!(out, "param {} {r} {c} {}", p.name, u8::from(p.decay)).unwrap();
        writeln!(out, "{}", hex_line(p.value.as_slice())).unwrap();
    }
    for s in model.bn_states() {
        writeln!(out, "batchnorm {}", s.width()).unwrap();
        writeln!(out, "{}", hex_line(&s.running_mean)).unwrap();
        writeln!(out, "{}", hex_line(&s.running_var)).unwrap();
    }
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        let (idx, text) = self.inner.next()?;
        self.line = idx + 1;
        Some(text)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Contract(format!("checkpoint line {}: {}", self.line, message.into()))
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        match self.next() {
            Some(l) => Ok(l),
            None => Err(self.err(format!("unexpected end of input, expected {what}"))),
        }
    }

    fn reals(&mut self, count: usize) -> Result<Vec<f64>> {
        let text = self.expect("a row of reals")?;
        let values = text
            .split_whitespace()
            .map(|tok| {
                u64::from_str_radix(tok, 16)
                    .map(f64::from_bits)
                    .map_err(|e| self.err(format!("bad real `{tok}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != count {
            return Err(self.err(format!("expected {count} reals, found {}", values.len())));
        }
        Ok(values)
    }

    fn usize_field(&self, tok: Option<&str>, what: &str) -> Result<usize> {
        tok.ok_or_else(|| self.err(format!("missing {what}")))?
            .parse()
            .map_err(|e| self.err(format!("bad {what}: {e}")))
    }
}

/// Parses the checkpoint text format.
pub fn read_checkpoint(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.expect("header")? != HEADER {
        return Err(lines.err(format!("expected `{HEADER}`")));
    }
    let config_line = lines.expect("config")?;
    let json = config_line
        .strip_prefix("config ")
        .ok_or_else(|| lines.err("expected `config <json>`"))?;
    let config: ModelConfig = serde_json::from_str(json)?;

    let shape = lines.expect("shape")?;
    let mut toks = shape.split_whitespace();
    if toks.next() != Some("shape") {
        return Err(lines.err("expected `shape <features> <classes>`"));
    }
    let n_features = lines.usize_field(toks.next(), "feature count")?;
    let n_classes = lines.usize_field(toks.next(), "class count")?;

    let mut params = Vec::new();
    let mut bn_states = Vec::new();
    while let Some(line) = lines.next() {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("param") => {
                let name = toks
                    .next()
                    .ok_or_else(|| lines.err("missing parameter name"))?
                    .to_string();
                let rows = lines.usize_field(toks.next(), "row count")?;
                let cols = lines.usize_field(toks.next(), "column count")?;
                let decay = lines.usize_field(toks.next(), "decay flag")? != 0;
                let data = lines.reals(rows * cols)?;
                params.push(Param::new(name, Matrix::from_vec(rows, cols, data)?, decay));
            }
            Some("batchnorm") => {
                let width = lines.usize_field(toks.next(), "width")?;
                let running_mean = lines.reals(width)?;
                let running_var = lines.reals(width)?;
                bn_states.push(BatchNormState {
                    running_mean,
                    running_var,
                });
            }
            None => continue,
            Some(other) => return Err(lines.err(format!("unknown record `{other}`"))),
        }
    }
    Model::from_parts(config, n_features, n_classes, params, bn_states)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbones::Backbone;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let cfg = ModelConfig {
            backbone: Backbone::IncepGcn,
            n_layers: 4,
            hidden_dim: 3,
            withbn: true,
            withloop: true,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = Model::new(cfg, 4, 2, &mut rng).unwrap();
        model.bn_states_mut()[0].running_mean[1] = -1.0 / 3.0;
        let text = write_checkpoint(&model).unwrap();
        let back = read_checkpoint(&text).unwrap();
        assert_eq!(back.params(), model.params());
        assert_eq!(back.bn_states(), model.bn_states());
        assert_eq!(back.config(), model.config());
        assert_eq!(write_checkpoint(&back).unwrap(), text);
    }

    #[test]
    fn truncated_input_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::new(ModelConfig::default(), 3, 2, &mut rng).unwrap();
        let text = write_checkpoint(&model).unwrap();
        let cut: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(read_checkpoint(&cut).is_err());
        assert!(read_checkpoint("garbage").is_err());
    }
}
