//! Line-delimited JSON persistence for catalogs, observations, cases and
//! skip logs. One record per line, UTF-8, struct field order, so identical
//! data always serializes to identical bytes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    Catalog, CatalogError, EvaluationCase, MovieRecord, PopularityObservation, SkipEntry,
};

fn io_err(path: &Path, source: std::io::Error) -> CatalogError {
    CatalogError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<(), CatalogError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(&record).expect("serializable record");
        writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CatalogError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CatalogError::Parse {
            path: path.to_path_buf(),
            line: index + 1,
            source: e,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_catalog(path: &Path, catalog: &Catalog) -> Result<(), CatalogError> {
    write_jsonl(path, catalog.iter())
}

pub fn load_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let records: Vec<MovieRecord> = read_jsonl(path)?;
    Catalog::from_records(records)
}

pub fn save_observations(
    path: &Path,
    observations: &[PopularityObservation],
) -> Result<(), CatalogError> {
    write_jsonl(path, observations.iter())
}

pub fn load_observations(path: &Path) -> Result<Vec<PopularityObservation>, CatalogError> {
    read_jsonl(path)
}

pub fn save_cases(path: &Path, cases: &[EvaluationCase]) -> Result<(), CatalogError> {
    write_jsonl(path, cases.iter())
}

pub fn load_cases(path: &Path) -> Result<Vec<EvaluationCase>, CatalogError> {
    let cases: Vec<EvaluationCase> = read_jsonl(path)?;
    for case in &cases {
        case.validate()?;
    }
    Ok(cases)
}

pub fn save_skip_log(path: &Path, entries: &[SkipEntry]) -> Result<(), CatalogError> {
    write_jsonl(path, entries.iter())
}
