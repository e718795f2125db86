//! Fetches and normalizes the benchmark datasets into the CSV schema the
//! runner reads, along with a default experiment config for each.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use debias_core::classifier::TrainConfig;
use debias_core::constraints::FairnessNotion;
use debias_core::data::{GroupRule, GroupSpec, ThresholdDirection};
use debias_core::reweigher::ReweighConfig;
use flate2::read::GzDecoder;

use crate::config::{CsvSource, DatasetSource, ExperimentConfig, Method, SplitSection};
use crate::error::CliError;

/// Overrides the raw-file cache directory.
pub const DATA_DIR_ENV: &str = "DEBIAS_DATA_DIR";
pub const DEFAULT_TEST_FRACTION: f64 = 1.0 / 3.0;
pub const BANK_AGE_BINS: usize = 5;
pub const GERMAN_AGE_CUTOFF: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DatasetName {
    Adult,
    German,
    Compas,
    Bank,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Adult => "adult",
            DatasetName::German => "german",
            DatasetName::Compas => "compas",
            DatasetName::Bank => "bank",
        }
    }
}

struct RawFile {
    name: &'static str,
    url: Option<&'static str>,
}

const ADULT_DATA: RawFile = RawFile {
    name: "adult.data",
    url: Some("https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data"),
};
const ADULT_TEST: RawFile = RawFile {
    name: "adult.test",
    url: Some("https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.test"),
};
const GERMAN_DATA: RawFile = RawFile {
    name: "german.data",
    url: Some("https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/german/german.data"),
};
const COMPAS_DATA: RawFile = RawFile {
    name: "compas-scores-two-years.csv",
    url: Some("https://raw.githubusercontent.com/propublica/compas-analysis/master/compas-scores-two-years.csv"),
};
// distributed only inside a zip archive
const BANK_DATA: RawFile = RawFile {
    name: "bank-full.csv",
    url: None,
};
const BANK_ARCHIVE_URL: &str = "https://archive.ics.uci.edu/static/public/222/bank+marketing.zip";

const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education_num",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
    "native_country",
    "income",
];

const GERMAN_COLUMNS: [&str; 21] = [
    "checking_status",
    "duration",
    "credit_history",
    "purpose",
    "credit_amount",
    "savings",
    "employment",
    "installment_rate",
    "personal_status_sex",
    "other_debtors",
    "residence_since",
    "property",
    "age",
    "other_installment_plans",
    "housing",
    "existing_credits",
    "job",
    "num_dependents",
    "telephone",
    "foreign_worker",
    "credit_risk",
];

const COMPAS_FEATURES: [&str; 8] = [
    "age",
    "sex",
    "race",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
    "c_charge_degree",
];

/// `$DEBIAS_DATA_DIR`, else `~/.cache/debias`.
pub fn default_data_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        return PathBuf::from(dir);
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join(".cache").join("debias")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prepared {
    pub csv_path: PathBuf,
    pub config_path: PathBuf,
}

/// Writes `<out>/<name>.csv` and `<out>/<name>.json`. Raw files are read from
/// `data_dir` (plain or `.gz`) and downloaded there when missing.
pub fn prepare(name: DatasetName, out_dir: &Path, data_dir: &Path) -> Result<Prepared, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let (header, rows) = match name {
        DatasetName::Adult => convert_adult(data_dir)?,
        DatasetName::German => convert_german(data_dir)?,
        DatasetName::Compas => convert_compas(data_dir)?,
        DatasetName::Bank => convert_bank(data_dir)?,
    };
    let csv_name = format!("{}.csv", name.as_str());
    let csv_path = out_dir.join(&csv_name);
    write_rows(&csv_path, &header, &rows)?;
    log::info!("wrote {} rows to {}", rows.len(), csv_path.display());

    let cfg = default_config(name, &csv_name);
    let config_path = out_dir.join(format!("{}.json", name.as_str()));
    let mut text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Prepare(e.to_string()))?;
    text.push('\n');
    std::fs::write(&config_path, text).map_err(|source| CliError::Io {
        path: config_path.clone(),
        source,
    })?;
    Ok(Prepared { csv_path, config_path })
}

fn categorical(name: &str, column: &str, value: &str) -> GroupSpec {
    GroupSpec {
        name: name.into(),
        rule: GroupRule::CategoricalEquals {
            column: column.into(),
            value: value.into(),
        },
    }
}

/// Group definitions and label column for each benchmark.
pub fn default_source(name: DatasetName, csv_path: &str) -> CsvSource {
    let (label_column, drop_columns, group_specs) = match name {
        DatasetName::Adult => (
            "income",
            vec!["fnlwgt".to_string(), "education".to_string()],
            vec![
                categorical("male", "sex", "Male"),
                categorical("female", "sex", "Female"),
                categorical("black", "race", "Black"),
                categorical("white", "race", "White"),
            ],
        ),
        DatasetName::German => (
            "credit_risk",
            vec![],
            vec![
                GroupSpec {
                    name: "age_below_30".into(),
                    rule: GroupRule::NumericThreshold {
                        column: "age".into(),
                        cutoff: GERMAN_AGE_CUTOFF,
                        direction: ThresholdDirection::Below,
                    },
                },
                GroupSpec {
                    name: "age_30_or_above".into(),
                    rule: GroupRule::NumericThreshold {
                        column: "age".into(),
                        cutoff: GERMAN_AGE_CUTOFF,
                        direction: ThresholdDirection::AtOrAbove,
                    },
                },
            ],
        ),
        DatasetName::Compas => (
            "two_year_recid",
            vec![],
            vec![
                categorical("black", "race", "African-American"),
                categorical("white", "race", "Caucasian"),
                categorical("male", "sex", "Male"),
                categorical("female", "sex", "Female"),
            ],
        ),
        DatasetName::Bank => (
            "y",
            vec![],
            (0..BANK_AGE_BINS)
                .map(|b| GroupSpec {
                    name: format!("age_q{}", b + 1),
                    rule: GroupRule::QuantileBin {
                        column: "age".into(),
                        num_bins: BANK_AGE_BINS,
                        bin_index: b,
                    },
                })
                .collect(),
        ),
    };
    CsvSource {
        path: PathBuf::from(csv_path),
        label_column: label_column.into(),
        drop_columns,
        group_specs,
    }
}

pub fn default_config(name: DatasetName, csv_path: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.as_str().into(),
        dataset: DatasetSource::Csv(default_source(name, csv_path)),
        notion: FairnessNotion::DemographicParity,
        masked_columns: vec![],
        methods: vec![Method::Unconstrained, Method::Calibration, Method::Reweigh],
        split: SplitSection {
            test_fraction: DEFAULT_TEST_FRACTION,
        },
        seed: 0,
        reweigh: ReweighConfig::default(),
        train: TrainConfig::default(),
        output_path: PathBuf::from(format!("{}_report.json", name.as_str())),
    }
}

/// Opens `<dir>/<name>` or `<dir>/<name>.gz`, downloading the plain file
/// first when neither exists.
fn open_raw(dir: &Path, file: &RawFile) -> Result<Box<dyn Read>, CliError> {
    let plain = dir.join(file.name);
    let gz = dir.join(format!("{}.gz", file.name));
    let open = |p: &Path| {
        File::open(p).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    if plain.exists() {
        return Ok(Box::new(open(&plain)?));
    }
    if gz.exists() {
        return Ok(Box::new(GzDecoder::new(open(&gz)?)));
    }
    let Some(url) = file.url else {
        return Err(CliError::Prepare(format!(
            "{} not found in {}; download {BANK_ARCHIVE_URL}, extract {} from the inner bank.zip \
             and place it there (or set {DATA_DIR_ENV})",
            file.name,
            dir.display(),
            file.name,
        )));
    };
    download(url, &plain)?;
    Ok(Box::new(open(&plain)?))
}

fn download(url: &str, dest: &Path) -> Result<(), CliError> {
    log::info!("downloading {url}");
    let fail = |e: &dyn std::fmt::Display| {
        CliError::Prepare(format!(
            "could not download {url}: {e}; place the file at {} manually (or set {DATA_DIR_ENV})",
            dest.display()
        ))
    };
    let bytes = ureq::get(url)
        .call()
        .map_err(|e| fail(&e))?
        .body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_vec()
        .map_err(|e| fail(&e))?;
    if let Some(parent) = dest.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(dest, bytes).map_err(|source| CliError::Io {
        path: dest.to_path_buf(),
        source,
    })
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn parse_error(file: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Prepare(format!("{file}, line {line}: {msg}"))
}

fn lines(reader: Box<dyn Read>, file: &str) -> Result<Vec<String>, CliError> {
    BufReader::new(reader)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::Prepare(format!("reading {file}: {e}")))
}

/// Train and test files merged; `>50K` is the positive class.
fn convert_adult(dir: &Path) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for file in [&ADULT_DATA, &ADULT_TEST] {
        for (i, line) in lines(open_raw(dir, file)?, file.name)?.iter().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('|') {
                continue;
            }
            let mut cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() != ADULT_COLUMNS.len() {
                return Err(parse_error(file.name, i + 1, format!("expected 15 fields, got {}", cells.len())));
            }
            let label = match cells[14].trim_end_matches('.') {
                ">50K" => "1",
                "<=50K" => "0",
                other => return Err(parse_error(file.name, i + 1, format!("unknown income `{other}`"))),
            };
            cells[14] = label.into();
            rows.push(cells);
        }
    }
    Ok((ADULT_COLUMNS.iter().map(|s| s.to_string()).collect(), rows))
}

/// Whitespace-separated Statlog file; credit risk 1 (good) is the positive class.
fn convert_german(dir: &Path) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for (i, line) in lines(open_raw(dir, &GERMAN_DATA)?, GERMAN_DATA.name)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if cells.len() != GERMAN_COLUMNS.len() {
            return Err(parse_error(GERMAN_DATA.name, i + 1, format!("expected 21 fields, got {}", cells.len())));
        }
        cells[20] = match cells[20].as_str() {
            "1" => "1".into(),
            "2" => "0".into(),
            other => return Err(parse_error(GERMAN_DATA.name, i + 1, format!("unknown credit risk `{other}`"))),
        };
        rows.push(cells);
    }
    Ok((GERMAN_COLUMNS.iter().map(|s| s.to_string()).collect(), rows))
}

/// Two-year recidivism with the customary screening filters: charge within 30
/// days of screening, known recidivism outcome, no ordinary traffic offenses,
/// a valid score. Adds jail length of stay in days.
fn convert_compas(dir: &Path) -> Result<Table, CliError> {
    let file = COMPAS_DATA.name;
    let mut reader = csv::Reader::from_reader(open_raw(dir, &COMPAS_DATA)?);
    let header = reader.headers().map_err(|e| parse_error(file, 1, e))?.clone();
    // the header repeats some names; the first occurrence is the one we want
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Prepare(format!("{file}: missing column `{name}`")))
    };
    let feature_idx: Vec<usize> = COMPAS_FEATURES.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let days_idx = col("days_b_screening_arrest")?;
    let is_recid_idx = col("is_recid")?;
    let degree_idx = col("c_charge_degree")?;
    let score_idx = col("score_text")?;
    let jail_in_idx = col("c_jail_in")?;
    let jail_out_idx = col("c_jail_out")?;
    let label_idx = col("two_year_recid")?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_error(file, line, e))?;
        let Ok(days) = record[days_idx].trim().parse::<f64>() else {
            continue;
        };
        if days.abs() > 30.0
            || record[is_recid_idx].trim() == "-1"
            || record[degree_idx].trim() == "O"
            || record[score_idx].trim() == "N/A"
        {
            continue;
        }
        let stay = length_of_stay(&record[jail_in_idx], &record[jail_out_idx])
            .ok_or_else(|| parse_error(file, line, "unparseable jail dates"))?;
        let mut cells: Vec<String> = feature_idx.iter().map(|&j| record[j].trim().to_string()).collect();
        cells.push(format!("{stay}"));
        cells.push(record[label_idx].trim().to_string());
        rows.push(cells);
    }
    let mut header: Vec<String> = COMPAS_FEATURES.iter().map(|s| s.to_string()).collect();
    header.push("length_of_stay".into());
    header.push("two_year_recid".into());
    Ok((header, rows))
}

fn length_of_stay(jail_in: &str, jail_out: &str) -> Option<f64> {
    let parse = |s: &str| chrono::NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S").ok();
    let hours = (parse(jail_out)? - parse(jail_in)?).num_hours();
    Some((hours as f64 / 24.0).round())
}

/// Semicolon-separated bank marketing file; `y = yes` is the positive class.
fn convert_bank(dir: &Path) -> Result<Table, CliError> {
    let file = BANK_DATA.name;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b';')
        .from_reader(open_raw(dir, &BANK_DATA)?);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(file, 1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| CliError::Prepare(format!("{file}: missing column `y`")))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(file, i + 2, e))?;
        let mut cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        cells[label_idx] = match cells[label_idx].as_str() {
            "yes" => "1".into(),
            "no" => "0".into(),
            other => return Err(parse_error(file, i + 2, format!("unknown outcome `{other}`"))),
        };
        rows.push(cells);
    }
    Ok((header, rows))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::Prepare(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
