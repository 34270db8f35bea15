//! Text-serialization helpers shared by the file writers.
//!
//! Every real number written to disk goes through [`format_f64`] so that a
//! re-run of the same computation produces byte-identical files and a parse
//! of the written text recovers the exact bit pattern.

/// Formats with 17 significant digits in scientific notation, enough for an
/// exact f64 round-trip.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Quotes a CSV field per RFC 4180 when it contains a delimiter, quote, or
/// line break; returns it untouched otherwise.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
