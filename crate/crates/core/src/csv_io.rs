//! Two-column `t,value` CSV ingestion and emission.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::path::CadlagPath;

/// Reads a path from `t,value` records. A header line is accepted (and skipped)
/// only as the first line, recognised by a non-numeric first field.
pub fn read_path<R: Read>(reader: R) -> Result<CadlagPath> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Csv {
                line,
                message: format!("expected 2 fields (t,value), found {}", record.len()),
            });
        }
        let t = record[0].parse::<f64>();
        if first {
            first = false;
            if t.is_err() && record[1].parse::<f64>().is_err() {
                continue;
            }
        }
        let t = t.map_err(|_| Error::Csv {
            line,
            message: format!("cannot parse time {:?}", &record[0]),
        })?;
        let v = record[1].parse::<f64>().map_err(|_| Error::Csv {
            line,
            message: format!("cannot parse value {:?}", &record[1]),
        })?;
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::Csv {
                line,
                message: "non-finite number".into(),
            });
        }
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Csv {
                    line,
                    message: format!("time {t} does not increase (previous {prev})"),
                });
            }
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(Error::Csv {
            line: 0,
            message: "no data rows".into(),
        });
    }
    CadlagPath::new(times, values)
}

pub fn write_path<W: Write>(writer: W, path: &CadlagPath) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "value"])?;
    for (t, v) in path.times().iter().zip(path.values()) {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let with = read_path("t,value\n0,1\n1,2.5\n".as_bytes()).unwrap();
        let without = read_path("0,1\n1,2.5\n".as_bytes()).unwrap();
        assert_eq!(with, without);
        assert_eq!(with.values(), &[1.0, 2.5]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = read_path("t,value\n0,1\n1,abc\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            Error::Csv {
                line: 3,
                message: "cannot parse value \"abc\"".into()
            }
        );
        let err = read_path("0,1\n0,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }));
        let err = read_path("0,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 1, .. }));
        // a header is only allowed on the first line
        let err = read_path("0,1\nt,value\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }));
        assert!(read_path("t,value\n".as_bytes()).is_err());
    }

    #[test]
    fn write_then_read() {
        let p = CadlagPath::new(vec![0.0, 0.5, 1.25], vec![0.1, -0.7, 1e-300]).unwrap();
        let mut buf = Vec::new();
        write_path(&mut buf, &p).unwrap();
        assert_eq!(read_path(buf.as_slice()).unwrap(), p);
    }
}
