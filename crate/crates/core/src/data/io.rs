//! `fvecs` / `ivecs` readers and writers plus a CSV format for small
//! synthetic datasets.
//!
//! Both vecs formats are sequences of little-endian records
//! `[i32 d][d x payload]`, with `f32` payload for fvecs and `i32` for ivecs.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::binio::{Reader, Writer};
use crate::{Error, Result};

fn read_vecs<T>(bytes: &[u8], mut elem: impl FnMut(&mut Reader) -> Result<T>) -> Result<(Vec<T>, usize)> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::new();
    let mut dim: Option<usize> = None;
    while !r.is_empty() {
        let at = r.offset();
        let d = r.i32()?;
        if d <= 0 {
            return Err(Error::Format { offset: at, message: format!("record dimension {d} must be positive") });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(first) if first != d => {
                return Err(Error::Format {
                    offset: at,
                    message: format!("inconsistent dimension: expected {first}, found {d}"),
                })
            }
            Some(_) => {}
        }
        for _ in 0..d {
            out.push(elem(&mut r)?);
        }
    }
    match dim {
        Some(d) => Ok((out, d)),
        None => Err(Error::Format { offset: 0, message: "empty file: a dataset needs at least one record".into() }),
    }
}

pub fn read_fvecs_bytes(bytes: &[u8]) -> Result<Dataset> {
    let (values, d) = read_vecs(bytes, |r| {
        let at = r.offset();
        let v = r.f32()?;
        if v.is_finite() {
            Ok(f64::from(v))
        } else {
            Err(Error::Format { offset: at, message: format!("non-finite value {v}") })
        }
    })?;
    Dataset::new(values, d)
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    read_fvecs_bytes(&fs::read(path)?)
}

/// Writes the dataset as fvecs. Values are narrowed to f32.
pub fn write_fvecs(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = Writer::default();
    for row in ds.rows() {
        w.i32(ds.d() as i32);
        for &v in row {
            w.f32(v as f32);
        }
    }
    fs::write(path, w.buf)?;
    Ok(())
}

/// Returns the flattened rows and their common width.
pub fn read_ivecs_bytes(bytes: &[u8]) -> Result<(Vec<i32>, usize)> {
    read_vecs(bytes, |r| r.i32())
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<(Vec<i32>, usize)> {
    read_ivecs_bytes(&fs::read(path)?)
}

pub fn write_ivecs(path: impl AsRef<Path>, values: &[i32], d: usize) -> Result<()> {
    if d == 0 || !values.len().is_multiple_of(d) {
        return Err(Error::Parameter(format!("{} values do not split into rows of {d}", values.len())));
    }
    let mut w = Writer::default();
    for row in values.chunks_exact(d) {
        w.i32(d as i32);
        row.iter().for_each(|&v| w.i32(v));
    }
    fs::write(path, w.buf)?;
    Ok(())
}

/// CSV with header `x0,x1,...` and an optional trailing `label` column.
pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..ds.d()).map(|j| format!("x{j}")).collect();
    if ds.labels().is_some() {
        header.push("label".into());
    }
    wtr.write_record(&header)?;
    for (i, row) in ds.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = ds.labels() {
            rec.push(labels[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let has_label = header.iter().next_back() == Some("label");
    let d = header.len() - usize::from(has_label);
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x{j}") {
            return Err(Error::Input(format!("unexpected CSV column {name:?} at position {j}")));
        }
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err =
            |what: &str, field: &str| Error::Input(format!("row {}: cannot parse {what} {field:?}", line + 1));
        for field in rec.iter().take(d) {
            points.push(field.trim().parse::<f64>().map_err(|_| parse_err("value", field))?);
        }
        if has_label {
            let field = rec.get(d).unwrap_or("");
            labels.push(field.trim().parse::<u32>().map_err(|_| parse_err("label", field))?);
        }
    }
    let ds = Dataset::new(points, d)?;
    if has_label {
        ds.with_labels(labels)
    } else {
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_record() {
        let bytes = [2, 0, 0, 0, 0, 0, 0x80, 0x3F, 0, 0, 0, 0x40];
        let ds = read_fvecs_bytes(&bytes).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.points(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(read_fvecs_bytes(&[]), Err(Error::Format { .. })));
    }

    #[test]
    fn inconsistent_dimension_names_offset() {
        let mut bytes = vec![2, 0, 0, 0];
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        bytes.extend(3i32.to_le_bytes());
        bytes.extend([0u8; 12]);
        match read_fvecs_bytes(&bytes) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, 12);
                assert!(message.contains("inconsistent"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_and_bad_dimension() {
        let bytes = [2, 0, 0, 0, 0, 0, 0x80, 0x3F, 0, 0];
        assert!(matches!(read_fvecs_bytes(&bytes), Err(Error::Format { offset: 8, .. })));
        let bytes = [0, 0, 0, 0];
        assert!(matches!(read_fvecs_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn ivecs_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.ivecs");
        write_ivecs(&p, &[1, 2, 3, 4, 5, 6], 3).unwrap();
        assert_eq!(read_ivecs(&p).unwrap(), (vec![1, 2, 3, 4, 5, 6], 3));

        let ds = crate::data::generate_moons(9, 0.1, 3).unwrap();
        let p = dir.path().join("moons.csv");
        write_csv(&p, &ds).unwrap();
        let header = fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("x0,x1,label\n"));
        assert_eq!(read_csv(&p).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn fvecs_round_trip_is_bit_exact(
            d in 1usize..6,
            raw in prop::collection::vec(-1e6f32..1e6, 1..60),
        ) {
            let n = raw.len() / d;
            prop_assume!(n >= 1);
            let values: Vec<f64> = raw[..n * d].iter().map(|&v| f64::from(v)).collect();
            let ds = Dataset::new(values, d).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.fvecs");
            write_fvecs(&p, &ds).unwrap();
            let back = read_fvecs(&p).unwrap();
            prop_assert_eq!(back.points().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            ds.points().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back.d(), d);
        }
    }
}
