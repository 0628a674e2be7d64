//! Reading and writing the 26-column whitespace-separated telemetry format,
//! plus a CSV export with a header row.

use std::io::{BufRead, Write};

use crate::data::{CycleRecord, Dataset, FEATURE_COUNT, OP_SETTING_COUNT, SENSOR_COUNT};
use crate::error::{Error, Result};

const FIELDS_PER_LINE: usize = 2 + FEATURE_COUNT;

/// Parse whitespace-separated telemetry: one record per non-empty line with
/// 26 fields (unit id, cycle, 3 settings, 21 sensors). Records come back in
/// file order with `rul` unset. Blank lines and trailing whitespace are
/// tolerated; line numbers in errors are 1-based over the raw stream.
pub fn parse_cmapss<R: BufRead>(reader: R, provenance: impl Into<String>) -> Result<Dataset> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != FIELDS_PER_LINE {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected {FIELDS_PER_LINE} fields, found {}",
                    fields.len()
                ),
            });
        }
        let unit_id = parse_u32(fields[0], line_no, "unit id")?;
        let cycle = parse_u32(fields[1], line_no, "cycle")?;
        if unit_id == 0 || cycle == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "unit id and cycle must be positive".into(),
            });
        }
        let mut op_settings = [0.0; OP_SETTING_COUNT];
        for (i, slot) in op_settings.iter_mut().enumerate() {
            *slot = parse_f64(fields[2 + i], line_no, &format!("op setting {}", i + 1))?;
        }
        let mut sensors = [0.0; SENSOR_COUNT];
        for (i, slot) in sensors.iter_mut().enumerate() {
            *slot = parse_f64(
                fields[2 + OP_SETTING_COUNT + i],
                line_no,
                &format!("sensor {}", i + 1),
            )?;
        }
        records.push(CycleRecord {
            unit_id,
            cycle,
            op_settings,
            sensors,
            rul: None,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset::new(records, provenance))
}

fn parse_u32(field: &str, line: usize, what: &str) -> Result<u32> {
    field.parse::<u32>().map_err(|_| Error::Parse {
        line,
        message: format!("{what} is not a positive integer: {field:?}"),
    })
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{what} is not numeric: {field:?}"),
    })
}

/// Write the dataset back to the 26-column text format. Floats use the
/// shortest representation that re-parses to the identical value, so
/// write-then-parse is a field-exact round trip (labels are not written).
pub fn write_cmapss<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    for r in ds.records() {
        write!(w, "{} {}", r.unit_id, r.cycle)?;
        for v in r.op_settings.iter().chain(r.sensors.iter()) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// CSV export: `unit_id,cycle,<24 feature names>,rul`. Unlabeled records get
/// an empty `rul` cell.
pub fn write_csv<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    write!(w, "unit_id,cycle")?;
    for name in ds.feature_names() {
        write!(w, ",{name}")?;
    }
    writeln!(w, ",rul")?;
    for r in ds.records() {
        write!(w, "{},{}", r.unit_id, r.cycle)?;
        for v in r.features() {
            write!(w, ",{v}")?;
        }
        match r.rul {
            Some(rul) => writeln!(w, ",{rul}")?,
            None => writeln!(w, ",")?,
        }
    }
    Ok(())
}
