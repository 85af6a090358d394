//! Small helpers shared by the CSV writers.

use std::io::Write;

use crate::error::Result;

/// Formats with 17 significant digits so that values round-trip exactly.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Writes a header and rows of floating point columns.
pub fn write_columns<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    writer.flush()?;
    Ok(())
}
