//! Plain-text checkpoint format.
//!
//! ```text
//! MDCS-CKPT v1
//! <name> <dim>...
//! <values, whitespace separated, 17 significant digits>
//! ...
//! ```
//!
//! Records: `experts`, `backbone.layers`, `backbone.<i>.weight|bias`,
//! `heads.<mu>.weight|scale|lambda`, `lambda` (all experts), and when an
//! optimizer is present `optim.hyper` plus `optim.buffer.<k>`.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{Affine, CosineHead, MultiExpertModel};
use super::sgd::{Schedule, SgdConfig, SgdState};
use crate::data::format_f64;
use crate::error::{Error, Result};

pub const HEADER: &str = "MDCS-CKPT v1";
const KIND: &str = "checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MultiExpertModel,
    pub optimizer: Option<SgdState>,
}

struct Record {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn write_record<W: Write>(w: &mut W, name: &str, shape: &[usize], values: &[f64]) -> Result<()> {
    write!(w, "{name}")?;
    for d in shape {
        write!(w, " {d}")?;
    }
    writeln!(w)?;
    let row = shape.last().copied().unwrap_or(1).max(1);
    for chunk in values.chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let model = &self.model;
        writeln!(w, "{HEADER}")?;
        write_record(&mut w, "experts", &[1], &[model.num_experts() as f64])?;
        write_record(&mut w, "backbone.layers", &[1], &[model.backbone().len() as f64])?;
        for (i, layer) in model.backbone().iter().enumerate() {
            let (o, n) = layer.weight.dim();
            write_record(
                &mut w,
                &format!("backbone.{i}.weight"),
                &[o, n],
                layer.weight.as_slice().expect("standard layout"),
            )?;
            write_record(
                &mut w,
                &format!("backbone.{i}.bias"),
                &[o],
                layer.bias.as_slice().expect("standard layout"),
            )?;
        }
        write_record(&mut w, "lambda", &[model.num_experts()], &model.lambdas())?;
        for (mu, head) in model.heads().iter().enumerate() {
            let (c, h) = head.weight.dim();
            write_record(
                &mut w,
                &format!("heads.{mu}.weight"),
                &[c, h],
                head.weight.as_slice().expect("standard layout"),
            )?;
            write_record(&mut w, &format!("heads.{mu}.scale"), &[1], &[head.scale])?;
            write_record(&mut w, &format!("heads.{mu}.lambda"), &[1], &[head.lambda])?;
        }
        if let Some(opt) = &self.optimizer {
            let c = &opt.config;
            let hyper = [
                c.lr0,
                c.momentum,
                c.weight_decay,
                if c.nesterov { 1.0 } else { 0.0 },
                match c.schedule {
                    Schedule::Linear => 0.0,
                    Schedule::Cosine => 1.0,
                },
                c.total_epochs as f64,
            ];
            write_record(&mut w, "optim.hyper", &[hyper.len()], &hyper)?;
            for (k, buf) in opt.buffers().iter().enumerate() {
                write_record(&mut w, &format!("optim.buffer.{k}"), &[buf.len()], buf)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(first)) if first.trim() == HEADER => {}
            _ => return Err(Error::format(KIND, format!("missing `{HEADER}` header"))),
        }
        let mut records = Vec::new();
        let mut pending: Option<Record> = None;
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            match pending.as_mut() {
                Some(rec) if rec.values.len() < rec.shape.iter().product() => {
                    for tok in trimmed.split_whitespace() {
                        rec.values.push(crate::data::parse_field(KIND, tok)?);
                    }
                }
                _ => {
                    if let Some(done) = pending.take() {
                        records.push(done);
                    }
                    let mut toks = trimmed.split_whitespace();
                    let name = toks.next().expect("non-empty line").to_string();
                    let shape = toks
                        .map(|t| crate::data::parse_field::<usize>(KIND, t))
                        .collect::<Result<Vec<_>>>()?;
                    pending = Some(Record {
                        name,
                        shape,
                        values: Vec::new(),
                    });
                }
            }
        }
        records.extend(pending);
        for rec in &records {
            let want: usize = rec.shape.iter().product();
            if rec.values.len() != want {
                return Err(Error::format(
                    KIND,
                    format!("record `{}` has {} values, expected {want}", rec.name, rec.values.len()),
                ));
            }
        }
        Self::assemble(records)
    }

    fn assemble(records: Vec<Record>) -> Result<Self> {
        let mut map: std::collections::HashMap<String, Record> = std::collections::HashMap::new();
        for rec in records {
            if map.contains_key(&rec.name) {
                return Err(Error::format(KIND, format!("duplicate record `{}`", rec.name)));
            }
            map.insert(rec.name.clone(), rec);
        }
        let mut take = |name: &str| {
            map.remove(name)
                .ok_or_else(|| Error::format(KIND, format!("missing record `{name}`")))
        };
        let scalar = |rec: Record| -> Result<f64> {
            if rec.values.len() != 1 {
                return Err(Error::format(KIND, format!("`{}` must be a scalar", rec.name)));
            }
            Ok(rec.values[0])
        };
        let matrix = |rec: Record| -> Result<Array2<f64>> {
            if rec.shape.len() != 2 {
                return Err(Error::format(KIND, format!("`{}` must be 2-d", rec.name)));
            }
            Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.values)
                .map_err(|e| Error::format(KIND, e.to_string()))
        };
        let experts = scalar(take("experts")?)? as usize;
        let layers = scalar(take("backbone.layers")?)? as usize;
        let mut backbone = Vec::with_capacity(layers);
        for i in 0..layers {
            let weight = matrix(take(&format!("backbone.{i}.weight"))?)?;
            let bias = Array1::from(take(&format!("backbone.{i}.bias"))?.values);
            backbone.push(Affine { weight, bias });
        }
        let lambdas = take("lambda")?.values;
        if lambdas.len() != experts {
            return Err(Error::format(KIND, "lambda list length differs from expert count"));
        }
        let mut heads = Vec::with_capacity(experts);
        for mu in 0..experts {
            let weight = matrix(take(&format!("heads.{mu}.weight"))?)?;
            let scale = scalar(take(&format!("heads.{mu}.scale"))?)?;
            let lambda = scalar(take(&format!("heads.{mu}.lambda"))?)?;
            if lambda.to_bits() != lambdas[mu].to_bits() {
                return Err(Error::format(KIND, format!("head {mu} lambda disagrees with list")));
            }
            heads.push(CosineHead {
                weight,
                scale,
                lambda,
            });
        }
        let model = MultiExpertModel::from_parts(backbone, heads)?;
        let optimizer = match take("optim.hyper") {
            Err(_) => None,
            Ok(rec) => {
                let h = rec.values;
                if h.len() != 6 {
                    return Err(Error::format(KIND, "optim.hyper must have 6 values"));
                }
                let config = SgdConfig {
                    lr0: h[0],
                    momentum: h[1],
                    weight_decay: h[2],
                    nesterov: h[3] != 0.0,
                    schedule: if h[4] == 0.0 { Schedule::Linear } else { Schedule::Cosine },
                    total_epochs: h[5] as usize,
                };
                let slots = model.param_slices().len();
                let buffers = (0..slots)
                    .map(|k| take(&format!("optim.buffer.{k}")).map(|r| r.values))
                    .collect::<Result<Vec<_>>>()?;
                Some(SgdState::from_buffers(config, &model, buffers)?)
            }
        };
        if let Some(extra) = map.keys().next() {
            return Err(Error::format(KIND, format!("unknown record `{extra}`")));
        }
        Ok(Self { model, optimizer })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_header_and_short_records() {
        assert!(Checkpoint::read("MDCS-CKPT v2\n".as_bytes()).is_err());
        let text = "MDCS-CKPT v1\nexperts 1\n1\nbackbone.layers 1\n0\nlambda 1\n";
        assert!(Checkpoint::read(text.as_bytes()).is_err());
    }

    #[test]
    fn round_trip_with_optimizer() {
        let model = MultiExpertModel::init(3, &[5, 4], 3, &[-0.5, 1.0, 2.5], 16.0, 4).unwrap();
        let opt = SgdState::new(SgdConfig::default(), &model);
        let ckpt = Checkpoint {
            model,
            optimizer: Some(opt),
        };
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::read(bytes.as_slice()).unwrap();
        assert_eq!(back.model.to_flat(), ckpt.model.to_flat());
        assert_eq!(back.optimizer, ckpt.optimizer);
        assert_eq!(back.to_bytes(), bytes);
    }
}
