//! CSV formats exchanged with the CLI.
//!
//! Floating-point fields are written with 17 significant digits
//! (`{:.16e}`), which round-trips every `f64` exactly. Infinite values are
//! written as `inf`. Lines starting with `#` are comments.
//!
//! - observation: `n,re,im`, antennas numbered from 1;
//! - PEB map: `u_x,u_y,peb_m` in row-major grid order;
//! - sweep: `noise_dbm,n_pas,estimator,trials_ok,trials_failed,mean_err_m,rmse_m,median_err_m,peb_mean_m`;
//! - error map: `u_x,u_y,estimator,mean_err_m,peb_m`.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::SignalVector;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::fisher::PebMap;
use crate::montecarlo::{MapRow, SweepRow};

pub const OBSERVATION_HEADER: [&str; 3] = ["n", "re", "im"];
pub const PEB_MAP_HEADER: [&str; 3] = ["u_x", "u_y", "peb_m"];
pub const SWEEP_HEADER: [&str; 9] = [
    "noise_dbm",
    "n_pas",
    "estimator",
    "trials_ok",
    "trials_failed",
    "mean_err_m",
    "rmse_m",
    "median_err_m",
    "peb_mean_m",
];
pub const MAP_HEADER: [&str; 5] = ["u_x", "u_y", "estimator", "mean_err_m", "peb_m"];

/// Full-precision decimal form of a double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn write_line(out: &mut String, fields: &[String]) {
    let _ = writeln!(out, "{}", fields.join(","));
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: header.position().map(|p| p.line() as usize).unwrap_or(1),
            reason: format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn field<T: FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        line,
        reason: format!("missing column `{name}`"),
    })?;
    raw.parse::<T>().map_err(|_| Error::Parse {
        line,
        reason: format!("cannot parse `{raw}` as {name}"),
    })
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

pub fn write_observation_csv(r: &SignalVector) -> String {
    let mut out = String::new();
    write_line(&mut out, &OBSERVATION_HEADER.map(String::from));
    for (k, z) in r.samples().iter().enumerate() {
        write_line(
            &mut out,
            &[(k + 1).to_string(), fmt_f64(z.re), fmt_f64(z.im)],
        );
    }
    out
}

/// Reads `n,re,im` rows; `n` must run 1, 2, ... without gaps and all samples
/// must be finite.
pub fn parse_observation_csv(text: &str) -> Result<SignalVector> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &OBSERVATION_HEADER)?;
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let n: usize = field(&record, 0, "n")?;
        let re: f64 = field(&record, 1, "re")?;
        let im: f64 = field(&record, 2, "im")?;
        if n != samples.len() + 1 {
            return Err(Error::Parse {
                line: line_of(&record),
                reason: format!("expected antenna {}, got {n}", samples.len() + 1),
            });
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::Parse {
                line: line_of(&record),
                reason: "sample is not finite".into(),
            });
        }
        samples.push(Complex64::new(re, im));
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            line: 1,
            reason: "observation has no samples".into(),
        });
    }
    Ok(SignalVector::new(samples))
}

/// PEB map CSV, preceded by `header_json` on a `#` comment line.
pub fn write_peb_map_csv(map: &PebMap, header_json: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {header_json}");
    write_line(&mut out, &PEB_MAP_HEADER.map(String::from));
    for (k, peb) in map.peb.iter().enumerate() {
        let u = map.grid.node(k);
        write_line(&mut out, &[fmt_f64(u.x), fmt_f64(u.y), fmt_f64(*peb)]);
    }
    out
}

/// `(u_x, u_y, peb_m)` triples of a PEB map file.
pub fn parse_peb_map_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &PEB_MAP_HEADER)?;
    rdr.records()
        .map(|record| {
            let record = record?;
            Ok((
                field(&record, 0, "u_x")?,
                field(&record, 1, "u_y")?,
                field(&record, 2, "peb_m")?,
            ))
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    write_line(&mut out, &SWEEP_HEADER.map(String::from));
    for r in rows {
        write_line(
            &mut out,
            &[
                fmt_f64(r.noise_dbm),
                r.n_pas.to_string(),
                r.estimator.name().to_string(),
                r.trials_ok.to_string(),
                r.trials_failed.to_string(),
                fmt_f64(r.mean_err_m),
                fmt_f64(r.rmse_m),
                fmt_f64(r.median_err_m),
                fmt_f64(r.peb_mean_m),
            ],
        );
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &SWEEP_HEADER)?;
    rdr.records()
        .map(|record| {
            let record = record?;
            Ok(SweepRow {
                noise_dbm: field(&record, 0, "noise_dbm")?,
                n_pas: field(&record, 1, "n_pas")?,
                estimator: field::<Estimator>(&record, 2, "estimator")?,
                trials_ok: field(&record, 3, "trials_ok")?,
                trials_failed: field(&record, 4, "trials_failed")?,
                mean_err_m: field(&record, 5, "mean_err_m")?,
                rmse_m: field(&record, 6, "rmse_m")?,
                median_err_m: field(&record, 7, "median_err_m")?,
                peb_mean_m: field(&record, 8, "peb_mean_m")?,
            })
        })
        .collect()
}

pub fn write_error_map_csv(rows: &[MapRow]) -> String {
    let mut out = String::new();
    write_line(&mut out, &MAP_HEADER.map(String::from));
    for r in rows {
        write_line(
            &mut out,
            &[
                fmt_f64(r.u_x),
                fmt_f64(r.u_y),
                r.estimator.name().to_string(),
                fmt_f64(r.mean_err_m),
                fmt_f64(r.peb_m),
            ],
        );
    }
    out
}

pub fn parse_error_map_csv(text: &str) -> Result<Vec<MapRow>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &MAP_HEADER)?;
    rdr.records()
        .map(|record| {
            let record = record?;
            Ok(MapRow {
                u_x: field(&record, 0, "u_x")?,
                u_y: field(&record, 1, "u_y")?,
                estimator: field::<Estimator>(&record, 2, "estimator")?,
                mean_err_m: field(&record, 3, "mean_err_m")?,
                peb_m: field(&record, 4, "peb_m")?,
            })
        })
        .collect()
}
