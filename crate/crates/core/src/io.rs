//! Plain-text formats shared by the exporters.

use crate::{Error, Result, Scalar};

/// 17 significant digits; round-trips `f64` exactly.
pub fn fmt<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x)
}

pub fn parse<T: Scalar>(s: &str) -> Result<T> {
    s.trim().parse::<T>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

pub fn join_row<T: Scalar>(lead: &[String], values: &[T]) -> String {
    let mut row = lead.join(",");
    for v in values {
        if !row.is_empty() {
            row.push(',');
        }
        row.push_str(&fmt(*v));
    }
    row
}

/// Parses `key=value` pairs out of a `# k1=v1,k2=v2` header line.
pub(crate) fn header_fields(line: &str) -> Vec<(String, String)> {
    line.trim_start_matches('#')
        .split(',')
        .filter_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub(crate) fn field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("missing header field `{key}`")))
}
