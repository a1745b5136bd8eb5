//! Minimal CSV writing with a leading schema comment.
//!
//! Floats use Rust's shortest round-trip scientific form, which is stable
//! across platforms and runs.

use std::io::Write;

use crate::error::Result;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_header<W: Write>(w: &mut W, schema: &str, columns: &[String]) -> Result<()> {
    writeln!(w, "# cim-schema: {schema}")?;
    writeln!(w, "{}", columns.join(","))?;
    Ok(())
}

pub fn write_row<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let row: Vec<String> = values.into_iter().map(fmt_f64).collect();
    writeln!(w, "{}", row.join(","))?;
    Ok(())
}

/// Row of preformatted fields.
pub fn write_fields<W: Write>(w: &mut W, fields: &[String]) -> Result<()> {
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}

pub(crate) fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}
