use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::ShotValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

const COLUMNS: [&str; 4] = ["Many", "Medium", "Few", "All"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub values: ShotValues,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn text_table(title: &str, rows: &[ReportRow], pct_values: bool) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{title}\n{:<width$}", "");
    for c in COLUMNS {
        out += &format!(" {c:>8}");
    }
    out.push('\n');
    for r in rows {
        out += &format!("{:<width$}", r.name);
        for v in r.values.columns() {
            let cell = if pct_values {
                pct(v)
            } else {
                v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
            };
            out += &format!(" {cell:>8}");
        }
        out.push('\n');
    }
    out
}

fn csv_table(first: &str, rows: &[ReportRow]) -> String {
    let mut out = format!("{first},many,medium,few,all\n");
    for r in rows {
        let cells: Vec<String> = r.values.columns().iter().map(|v| raw(*v)).collect();
        out += &format!("{},{}\n", r.name, cells.join(","));
    }
    out
}

fn config_block(config: &str) -> String {
    let mut out = String::from("# config (desk-scale defaults unless set)\n");
    out.extend(config.lines().map(|l| format!("# {l}\n")));
    out
}

fn config_lines(config: &str) -> Vec<String> {
    config.lines().map(str::to_string).collect()
}

/// Per-expert and ensemble accuracy with the diversity factor, by shot group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experts: Vec<ReportRow>,
    pub ensemble: ShotValues,
    pub diversity: ShotValues,
    pub test_instances: usize,
    /// Resolved config echo.
    pub config: String,
    /// Kept out of every rendering so reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_clock_secs: Option<f64>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = self.experts.clone();
        rows.push(ReportRow {
            name: "Ensemble".into(),
            values: self.ensemble,
        });
        rows.push(ReportRow {
            name: "sigma".into(),
            values: self.diversity,
        });
        rows
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => format!(
                "{}\n{}",
                text_table(
                    &format!(
                        "Recognition accuracy (%) and diversity factor sigma (%) on {} test instances",
                        self.test_instances
                    ),
                    &self.rows(),
                    true
                ),
                config_block(&self.config)
            ),
            Format::Csv => csv_table("row", &self.rows()),
            Format::Json => {
                #[derive(Serialize)]
                struct Json {
                    rows: Vec<ReportRow>,
                    test_instances: usize,
                    config: Vec<String>,
                }
                let j = Json {
                    rows: self.rows(),
                    test_instances: self.test_instances,
                    config: config_lines(&self.config),
                };
                serde_json::to_string_pretty(&j).expect("serializable") + "\n"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceColumn {
    pub name: String,
    pub alpha: f64,
    /// Mean model variance per shot group.
    pub variance: ShotValues,
    /// Ensemble accuracy averaged over the member models.
    pub accuracy: ShotValues,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub models: usize,
    pub probes: usize,
    pub columns: Vec<VarianceColumn>,
    pub config: String,
}

impl VarianceReport {
    pub fn render(&self, format: Format) -> String {
        let var_rows: Vec<ReportRow> = self
            .columns
            .iter()
            .map(|c| ReportRow {
                name: c.name.clone(),
                values: c.variance,
            })
            .collect();
        let acc_rows: Vec<ReportRow> = self
            .columns
            .iter()
            .map(|c| ReportRow {
                name: c.name.clone(),
                values: c.accuracy,
            })
            .collect();
        match format {
            Format::Text => format!(
                "{}\n{}\n{}",
                text_table(
                    &format!(
                        "Model variance over {} models, {} probe instances",
                        self.models, self.probes
                    ),
                    &var_rows,
                    false
                ),
                text_table("Mean member accuracy (%)", &acc_rows, true),
                config_block(&self.config)
            ),
            Format::Csv => {
                let mut out = String::from("method,metric,many,medium,few,all\n");
                for (metric, rows) in [("variance", &var_rows), ("accuracy", &acc_rows)] {
                    for r in rows {
                        let cells: Vec<String> = r.values.columns().iter().map(|v| raw(*v)).collect();
                        out += &format!("{},{metric},{}\n", r.name, cells.join(","));
                    }
                }
                out
            }
            Format::Json => {
                #[derive(Serialize)]
                struct Json<'a> {
                    models: usize,
                    probes: usize,
                    columns: &'a [VarianceColumn],
                    config: Vec<String>,
                }
                serde_json::to_string_pretty(&Json {
                    models: self.models,
                    probes: self.probes,
                    columns: &self.columns,
                    config: config_lines(&self.config),
                })
                .expect("serializable")
                    + "\n"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub setting: String,
    pub lambdas: Vec<f64>,
    pub alpha: f64,
    /// Ensemble accuracy, mean over seeds.
    pub accuracy: ShotValues,
    /// Diversity factor, mean over seeds.
    pub diversity: ShotValues,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub kind: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
    pub config: String,
}

impl SweepTable {
    /// Plot-ready CSV, one row per sweep point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,lambdas,alpha,many,medium,few,all,sigma_all\n");
        for r in &self.rows {
            let lambdas: Vec<String> = r.lambdas.iter().map(|l| l.to_string()).collect();
            let cells: Vec<String> = r.accuracy.columns().iter().map(|v| raw(*v)).collect();
            out += &format!(
                "{},{},{},{},{}\n",
                r.setting,
                lambdas.join(" "),
                r.alpha,
                cells.join(","),
                raw(r.diversity.all)
            );
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Text => {
                let mut rows: Vec<ReportRow> = self
                    .rows
                    .iter()
                    .map(|r| ReportRow {
                        name: r.setting.clone(),
                        values: r.accuracy,
                    })
                    .collect();
                rows.extend(self.rows.iter().map(|r| ReportRow {
                    name: format!("sigma {}", r.setting),
                    values: r.diversity,
                }));
                let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
                format!(
                    "{}\n{}",
                    text_table(
                        &format!(
                            "{} sweep: ensemble accuracy (%), mean over seeds {}",
                            self.kind,
                            seeds.join(",")
                        ),
                        &rows,
                        true
                    ),
                    config_block(&self.config)
                )
            }
            Format::Json => {
                #[derive(Serialize)]
                struct Json<'a> {
                    kind: &'a str,
                    seeds: &'a [u64],
                    rows: &'a [SweepRow],
                    config: Vec<String>,
                }
                serde_json::to_string_pretty(&Json {
                    kind: &self.kind,
                    seeds: &self.seeds,
                    rows: &self.rows,
                    config: config_lines(&self.config),
                })
                .expect("serializable")
                    + "\n"
            }
        }
    }
}
