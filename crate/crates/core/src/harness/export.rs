use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

use super::record::{Row, RunLine, RunRecord, Summary, RUNS_CSV_HEADER, TRAJECTORY_CSV_HEADER};

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::config(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

/// Write `items` under an explicit header, so an empty list still yields the header line.
pub fn write_csv<T: Serialize, W: Write>(header: &str, items: &[T], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header.split(','))?;
    for item in items {
        out.serialize(item)?;
    }
    out.flush()?;
    Ok(())
}

/// Read rows written by [`write_csv`], checking the header.
pub fn read_csv<T: DeserializeOwned, R: Read>(header: &str, r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    let found = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(Error::config(format!("unexpected CSV header {found:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_runs_csv<W: Write>(summaries: &[Summary], w: W) -> Result<()> {
    let lines: Vec<RunLine> = summaries.iter().map(RunLine::from).collect();
    write_csv(RUNS_CSV_HEADER, &lines, w)
}

pub fn write_trajectory_csv<W: Write>(rows: &[Row], w: W) -> Result<()> {
    write_csv(TRAJECTORY_CSV_HEADER, rows, w)
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<Row>> {
    read_csv(TRAJECTORY_CSV_HEADER, r)
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_record_json<R: Read>(r: R) -> Result<RunRecord> {
    Ok(serde_json::from_reader(r)?)
}

/// Table rows with the header taken from the row type's field names.
pub fn write_table_csv<T: Serialize, W: Write>(items: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for item in items {
        out.serialize(item)?;
    }
    out.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}
