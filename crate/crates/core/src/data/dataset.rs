use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Feature rows with integer class labels and cached per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::invalid("dataset needs at least one class"));
        }
        let mut counts = vec![0; num_classes];
        for &y in &labels {
            if y >= num_classes {
                return Err(Error::invalid(format!(
                    "label {y} outside [0, {num_classes})"
                )));
            }
            counts[y] += 1;
        }
        Ok(Self {
            features,
            labels,
            counts,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Row indices grouped by class, each group in ascending order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for (i, &y) in self.labels.iter().enumerate() {
            groups[y].push(i);
        }
        groups
    }

    /// New dataset made of the given rows, in the given order. Rows may repeat.
    pub fn select(&self, indices: &[usize]) -> Self {
        let features = self.features.select(Axis(0), indices);
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        let mut counts = vec![0; self.num_classes()];
        for &y in &labels {
            counts[y] += 1;
        }
        Self {
            features,
            labels,
            counts,
        }
    }

    /// Writes the dataset CSV: `n,d,C`, the counts line, then one
    /// `f_1,...,f_d,label` row per instance with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record([
            self.len().to_string(),
            self.dim().to_string(),
            self.num_classes().to_string(),
        ])?;
        w.write_record(self.counts.iter().map(|c| c.to_string()))?;
        for (row, &y) in self.features.rows().into_iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            record.push(y.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        const KIND: &str = "dataset";
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| Error::format(KIND, "missing `n,d,C` line"))??;
        if header.len() != 3 {
            return Err(Error::format(KIND, "first line must be `n,d,C`"));
        }
        let n: usize = parse_field(KIND, &header[0])?;
        let d: usize = parse_field(KIND, &header[1])?;
        let c: usize = parse_field(KIND, &header[2])?;
        let counts_rec = records
            .next()
            .ok_or_else(|| Error::format(KIND, "missing counts line"))??;
        if counts_rec.len() != c {
            return Err(Error::format(
                KIND,
                format!("counts line has {} entries, expected {c}", counts_rec.len()),
            ));
        }
        let declared: Vec<usize> = counts_rec
            .iter()
            .map(|f| parse_field(KIND, f))
            .collect::<Result<_>>()?;

        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for rec in records {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(Error::format(
                    KIND,
                    format!("row {} has {} fields, expected {}", labels.len(), rec.len(), d + 1),
                ));
            }
            for f in rec.iter().take(d) {
                data.push(parse_field::<f64>(KIND, f)?);
            }
            labels.push(parse_field(KIND, &rec[d])?);
        }
        if labels.len() != n {
            return Err(Error::format(
                KIND,
                format!("declared {n} rows, found {}", labels.len()),
            ));
        }
        let features = Array2::from_shape_vec((n, d), data)
            .map_err(|e| Error::format(KIND, e.to_string()))?;
        let ds = Self::new(features, labels, c)?;
        if ds.counts != declared {
            return Err(Error::format(
                KIND,
                "counts line disagrees with the labels in the rows",
            ));
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// 17 significant digits, enough for an exact f64 round trip.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_field<T: std::str::FromStr>(kind: &'static str, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::format(kind, format!("cannot parse `{field}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn counts_follow_labels() {
        let ds = LabeledDataset::new(array![[0.0], [1.0], [2.0]], vec![1, 0, 1], 3).unwrap();
        assert_eq!(ds.counts(), &[1, 2, 0]);
        assert_eq!(ds.counts().iter().sum::<usize>(), ds.len());
    }

    #[test]
    fn rejects_out_of_range_label() {
        assert!(LabeledDataset::new(array![[0.0]], vec![2], 2).is_err());
    }

    #[test]
    fn csv_rejects_inconsistent_counts() {
        let text = "2,1,2\n1,0\n0.5,0\n1.5,1\n";
        assert!(LabeledDataset::read_csv(text.as_bytes()).is_err());
        let text = "2,1,2\n1,1\n0.5,0\n1.5,1\n";
        let ds = LabeledDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[0, 1]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = LabeledDataset::new(
            array![[0.1, -1.0 / 3.0], [f64::MIN_POSITIVE, 1e300], [std::f64::consts::PI, -0.0]],
            vec![0, 1, 1],
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = LabeledDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("3,2,2\n1,2\n"));
    }
}
