//! Dataset ingestion and emission as CSV.
//!
//! Two layouts are supported and auto-detected on read:
//! - wide: a header of series names with an optional leading `time` column,
//!   one row per time step; all series share one grid.
//! - long: `series,time,value` rows; each series keeps its own grid.
//!
//! Times are exact decimals and become rationals, so mixed sampling rates
//! survive round trips. Spacing must be constant per series; the rate is the
//! reciprocal of the spacing.

use crate::error::{Error, Result};
use crate::series::{Dataset, Rat, TimeSeries};
use std::io::{Read, Write};
use std::path::Path;

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Exact decimal to rational, e.g. "2", "-0.25", "+3.5".
fn parse_decimal(s: &str) -> Result<Rat> {
    let t = s.trim();
    let (negative, rest) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((a, b)) => (a, b),
        None => (rest, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Csv(format!("bad time value {s:?}")));
    }
    let mut num: i64 = 0;
    let mut denom: i64 = 1;
    for c in int_part.chars().chain(frac_part.chars()) {
        let digit = c.to_digit(10).ok_or_else(|| Error::Csv(format!("bad time value {s:?}")))? as i64;
        num = num
            .checked_mul(10)
            .and_then(|n| n.checked_add(digit))
            .ok_or_else(|| Error::Csv(format!("time value {s:?} overflows")))?;
    }
    for _ in 0..frac_part.len() {
        denom = denom.checked_mul(10).ok_or_else(|| Error::Csv(format!("time value {s:?} overflows")))?;
    }
    Ok(Rat::new(if negative { -num } else { num }, denom))
}

/// Rational to exact decimal; None when the reduced denominator has prime
/// factors other than 2 and 5.
fn rat_to_decimal(r: Rat) -> Option<String> {
    let mut rest = *r.denom();
    let mut pow2 = 0u32;
    let mut pow5 = 0u32;
    while rest % 2 == 0 {
        rest /= 2;
        pow2 += 1;
    }
    while rest % 5 == 0 {
        rest /= 5;
        pow5 += 1;
    }
    if rest != 1 {
        return None;
    }
    let digits = pow2.max(pow5);
    let scale = 10i64.checked_pow(digits)? / r.denom();
    let scaled = r.numer().checked_mul(scale)?;
    if digits == 0 {
        return Some(scaled.to_string());
    }
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let base = 10u64.pow(digits);
    Some(format!("{sign}{}.{:0width$}", abs / base, abs % base, width = digits as usize))
}

fn parse_value(s: &str, context: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Csv(format!("bad value {s:?} for {context}")))?;
    if !v.is_finite() {
        return Err(Error::Csv(format!("non-finite value {s:?} for {context}")));
    }
    Ok(v)
}

/// Infers (start, rate) from a strictly increasing, equally spaced time
/// column.
fn grid_from_times(name: &str, times: &[Rat]) -> Result<(Rat, Rat)> {
    if times.len() < 2 {
        return Err(Error::Csv(format!("series {name} needs at least two rows to infer its rate")));
    }
    let delta = times[1] - times[0];
    if delta <= Rat::from_integer(0) {
        return Err(Error::Csv(format!("series {name} has non-increasing times")));
    }
    for w in times.windows(2) {
        if w[1] - w[0] != delta {
            return Err(Error::Csv(format!("series {name} is not equally spaced")));
        }
    }
    Ok((times[0], delta.recip()))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers == ["series", "time", "value"] {
        read_long(&mut rdr)
    } else {
        read_wide(&mut rdr, &headers)
    }
}

pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

fn read_wide<R: Read>(rdr: &mut csv::Reader<R>, headers: &[String]) -> Result<Dataset> {
    let has_time = headers.first().is_some_and(|h| h == "time");
    let names: Vec<String> = headers[usize::from(has_time)..].to_vec();
    if names.is_empty() {
        return Err(Error::Csv("no series columns".into()));
    }
    let mut times: Vec<Rat> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!("row {} has {} fields, expected {}", row + 2, record.len(), headers.len())));
        }
        let mut fields = record.iter();
        if has_time {
            times.push(parse_decimal(fields.next().unwrap())?);
        }
        for (col, f) in fields.enumerate() {
            columns[col].push(parse_value(f, &names[col])?);
        }
    }
    let (start, rate) = if has_time {
        grid_from_times("the shared grid", &times)?
    } else {
        (Rat::from_integer(0), Rat::from_integer(1))
    };
    let series = names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| TimeSeries::with_start(name, values, rate, start))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(series)
}

fn read_long<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Dataset> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: std::collections::HashMap<String, (Vec<Rat>, Vec<f64>)> = std::collections::HashMap::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != 3 {
            return Err(Error::Csv(format!("row {} has {} fields, expected 3", row + 2, record.len())));
        }
        let name = record[0].to_string();
        let time = parse_decimal(&record[1])?;
        let value = parse_value(&record[2], &name)?;
        let entry = acc.entry(name.clone()).or_insert_with(|| {
            order.push(name);
            (Vec::new(), Vec::new())
        });
        entry.0.push(time);
        entry.1.push(value);
    }
    if order.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    let series = order
        .into_iter()
        .map(|name| {
            let (times, values) = acc.remove(&name).unwrap();
            let (start, rate) = grid_from_times(&name, &times)?;
            TimeSeries::with_start(name, values, rate, start)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(series)
}

fn shares_one_grid(ds: &Dataset) -> bool {
    let first = ds.series(0);
    ds.all_series()
        .iter()
        .all(|s| s.rate == first.rate && s.start_time == first.start_time && s.len() == first.len())
}

fn time_string(t: Rat) -> Result<String> {
    rat_to_decimal(t).ok_or_else(|| {
        Error::Csv(format!("time {t} has no exact decimal form; cannot write it as CSV"))
    })
}

/// Wide layout with a leading time column; all series must share one grid.
pub fn write_wide<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    if !shares_one_grid(ds) {
        return Err(Error::InvalidDataset(
            "wide layout needs every series on one shared grid; use the long layout".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string()];
    header.extend(ds.names());
    w.write_record(&header).map_err(csv_err)?;
    let first = ds.series(0);
    for row in 0..first.len() {
        let mut record = vec![time_string(first.time_at(row))?];
        for s in ds.all_series() {
            record.push(s.values[row].to_string());
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long layout; handles per-series grids.
pub fn write_long<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "time", "value"]).map_err(csv_err)?;
    for s in ds.all_series() {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([s.name.as_str(), &time_string(s.time_at(i))?, &v.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Wide when the grid is shared, long otherwise.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    if shares_one_grid(ds) {
        write_wide(ds, writer)
    } else {
        write_long(ds, writer)
    }
}

pub fn write_csv_path(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, std::fs::File::create(path)?)
}
