use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::data::{format_f64, parse_field};
use crate::error::{Error, Result};

const KIND: &str = "prediction dump";

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub id: usize,
    pub label: usize,
    /// Raw logits, one vector per expert.
    pub logits: Vec<Array1<f64>>,
}

/// Raw per-expert logits for every test instance, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDump {
    num_classes: usize,
    num_experts: usize,
    records: Vec<DumpRecord>,
}

impl PredictionDump {
    pub fn new(num_classes: usize, num_experts: usize, mut records: Vec<DumpRecord>) -> Result<Self> {
        if num_classes == 0 || num_experts == 0 {
            return Err(Error::invalid("dump needs at least one class and one expert"));
        }
        records.sort_by_key(|r| r.id);
        for pair in records.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::invalid(format!("duplicate instance id {}", pair[0].id)));
            }
        }
        for r in &records {
            if r.label >= num_classes {
                return Err(Error::invalid(format!(
                    "instance {} has label {} outside [0, {num_classes})",
                    r.id, r.label
                )));
            }
            if r.logits.len() != num_experts || r.logits.iter().any(|v| v.len() != num_classes) {
                return Err(Error::Dimension(format!(
                    "instance {} does not carry {num_experts} logit vectors of length {num_classes}",
                    r.id
                )));
            }
        }
        Ok(Self {
            num_classes,
            num_experts,
            records,
        })
    }

    /// Builds a dump from per-expert `n x C` logit matrices; ids are row indices.
    pub fn from_logits(labels: &[usize], expert_logits: &[Array2<f64>]) -> Result<Self> {
        let num_experts = expert_logits.len();
        let num_classes = expert_logits.first().map(|m| m.ncols()).unwrap_or(0);
        if expert_logits.iter().any(|m| m.nrows() != labels.len()) {
            return Err(Error::Dimension("logit rows do not match labels".into()));
        }
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| DumpRecord {
                id: i,
                label,
                logits: expert_logits.iter().map(|m| m.row(i).to_owned()).collect(),
            })
            .collect();
        Self::new(num_classes, num_experts, records)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_experts(&self) -> usize {
        self.num_experts
    }

    pub fn records(&self) -> &[DumpRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// CSV with header `id,label,expert,logit_0,...`, one row per
    /// (instance, expert).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "label".to_string(), "expert".to_string()];
        header.extend((0..self.num_classes).map(|k| format!("logit_{k}")));
        w.write_record(&header)?;
        for r in &self.records {
            for (mu, v) in r.logits.iter().enumerate() {
                let mut row = vec![r.id.to_string(), r.label.to_string(), mu.to_string()];
                row.extend(v.iter().map(|x| format_f64(*x)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 4 || &header[0] != "id" || &header[1] != "label" || &header[2] != "expert" {
            return Err(Error::format(KIND, "header must be `id,label,expert,logit_0,...`"));
        }
        for (k, name) in header.iter().skip(3).enumerate() {
            if name != format!("logit_{k}") {
                return Err(Error::format(KIND, format!("unexpected column `{name}`")));
            }
        }
        let num_classes = header.len() - 3;
        let mut rows: BTreeMap<usize, (usize, BTreeMap<usize, Array1<f64>>)> = BTreeMap::new();
        for rec in r.records() {
            let rec = rec?;
            let id: usize = parse_field(KIND, &rec[0])?;
            let label: usize = parse_field(KIND, &rec[1])?;
            let expert: usize = parse_field(KIND, &rec[2])?;
            let logits = rec
                .iter()
                .skip(3)
                .map(|f| parse_field::<f64>(KIND, f))
                .collect::<Result<Vec<_>>>()?;
            let entry = rows.entry(id).or_insert_with(|| (label, BTreeMap::new()));
            if entry.0 != label {
                return Err(Error::format(KIND, format!("instance {id} has conflicting labels")));
            }
            if entry.1.insert(expert, Array1::from(logits)).is_some() {
                return Err(Error::format(KIND, format!("instance {id} repeats expert {expert}")));
            }
        }
        let num_experts = rows
            .values()
            .map(|(_, e)| e.keys().next_back().map_or(0, |k| k + 1))
            .max()
            .unwrap_or(0);
        let mut records = Vec::with_capacity(rows.len());
        for (id, (label, experts)) in rows {
            if experts.len() != num_experts {
                return Err(Error::format(
                    KIND,
                    format!("instance {id} has {} of {num_experts} experts", experts.len()),
                ));
            }
            records.push(DumpRecord {
                id,
                label,
                logits: experts.into_values().collect(),
            });
        }
        Self::new(num_classes, num_experts.max(1), records)
            .map_err(|e| Error::format(KIND, e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
