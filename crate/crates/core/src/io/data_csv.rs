//! `time,event[,arm][,component_truth]` files. Row numbers in errors count the
//! header as row 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::{Arm, Dataset, Observation};

struct Columns {
    time: usize,
    event: usize,
    arm: Option<usize>,
    truth: Option<usize>,
}

fn columns(headers: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    match (find("time"), find("event")) {
        (Some(time), Some(event)) => Ok(Columns {
            time,
            event,
            arm: find("arm"),
            truth: find("component_truth"),
        }),
        _ => Err(Error::Format(format!(
            "missing header: expected columns time,event[,arm], found '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        ))),
    }
}

fn flag(field: &str, what: &str, row: usize) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Data {
            row,
            reason: format!("{what} must be 0 or 1, got '{other}'"),
        }),
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Data {
            row: 1,
            reason: "the file is empty".into(),
        });
    }
    let cols = columns(&headers)?;
    let mut obs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let raw_time = field(cols.time);
        let time: f64 = raw_time.parse().map_err(|_| Error::Data {
            row,
            reason: format!("time '{raw_time}' is not a number"),
        })?;
        if !(time > 0.0 && time.is_finite()) {
            return Err(Error::Data {
                row,
                reason: format!("time must be finite and > 0, got {raw_time}"),
            });
        }
        let event = flag(field(cols.event), "event", row)?;
        let arm = match cols.arm {
            Some(c) => Some(if flag(field(c), "arm", row)? {
                Arm::Treated
            } else {
                Arm::Control
            }),
            None => None,
        };
        let component = match cols.truth {
            Some(c) => {
                let raw = field(c);
                match raw.parse::<usize>() {
                    Ok(k) if k >= 1 => Some(k - 1),
                    _ => {
                        return Err(Error::Data {
                            row,
                            reason: format!("component_truth must be a positive integer, got '{raw}'"),
                        })
                    }
                }
            }
            None => None,
        };
        obs.push(Observation {
            time,
            event,
            arm,
            component,
        });
    }
    if obs.is_empty() {
        return Err(Error::Data {
            row: 2,
            reason: "no observations".into(),
        });
    }
    Dataset::new(obs)
}

pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes the dataset; `arm` is included when every row has one and
/// `component_truth` (1-based) when `truth` is set and known for every row.
pub fn write_csv<W: Write>(data: &Dataset, writer: W, truth: bool) -> Result<()> {
    let with_arm = data.has_arms();
    let with_truth = truth && data.observations().iter().all(|o| o.component.is_some());
    if truth && !with_truth {
        return Err(Error::Usage("component truth is not known for every row".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time", "event"];
    if with_arm {
        header.push("arm");
    }
    if with_truth {
        header.push("component_truth");
    }
    w.write_record(&header)?;
    for o in data.observations() {
        let mut rec = vec![format!("{}", o.time), (o.event as u8).to_string()];
        if let (true, Some(a)) = (with_arm, o.arm) {
            rec.push(a.index().to_string());
        }
        if let (true, Some(k)) = (with_truth, o.component) {
            rec.push((k + 1).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
