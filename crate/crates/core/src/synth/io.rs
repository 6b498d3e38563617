use std::io::{Read, Write};

use thiserror::Error;

use crate::model::{ExposureRecord, RECORD_COLUMNS};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
}

/// Writes a header row of the record column names and one line per record.
pub fn write_csv<W: Write>(records: &[ExposureRecord], out: W) -> Result<(), CsvError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    if records.is_empty() {
        writer.write_record(RECORD_COLUMNS)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExposureRecord>, CsvError> {
    let mut reader = csv::Reader::from_reader(input);
    let found: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if found != RECORD_COLUMNS {
        return Err(CsvError::Header { expected: RECORD_COLUMNS.map(str::to_owned).to_vec(), found });
    }
    reader.deserialize().map(|r| r.map_err(CsvError::from)).collect()
}
