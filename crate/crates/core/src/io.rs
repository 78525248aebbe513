//! `CSC1` binary records and CSV signals.
//!
//! A `CSC1` file is the 4-byte magic `CSC1`, one kind byte (1 signal,
//! 2 dictionary, 3 code), the dimensions as little-endian `u64`
//! (`T, P` | `K, W, P` | `K, L`) and the values as row-major little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{CscError, Result};
use crate::scalar::Scalar;
use crate::signal::{Dictionary, MultivariateSignal, SparseCode};

pub const MAGIC: &[u8; 4] = b"CSC1";

const KIND_SIGNAL: u8 = 1;
const KIND_DICTIONARY: u8 = 2;
const KIND_CODE: u8 = 3;

/// Largest element count accepted from a header, to reject corrupt sizes
/// before allocating.
const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub enum Record<F> {
    Signal(MultivariateSignal<F>),
    Dictionary(Dictionary<F>),
    Code(SparseCode<F>),
}

impl<F: Scalar> Record<F> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Record::Signal(_) => "signal",
            Record::Dictionary(_) => "dictionary",
            Record::Code(_) => "code",
        }
    }
}

fn write_header<W: Write>(out: &mut W, kind: u8, dims: &[usize]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&[kind])?;
    for &d in dims {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn write_values<'a, F: Scalar, W: Write>(
    out: &mut W,
    values: impl Iterator<Item = &'a F>,
) -> Result<()> {
    for v in values {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_record<F: Scalar, W: Write>(mut out: W, record: &Record<F>) -> Result<()> {
    match record {
        Record::Signal(x) => {
            write_header(&mut out, KIND_SIGNAL, &[x.len(), x.n_channels()])?;
            write_values(&mut out, x.samples().iter())?;
        }
        Record::Dictionary(d) => {
            write_header(
                &mut out,
                KIND_DICTIONARY,
                &[d.n_atoms(), d.width(), d.n_channels()],
            )?;
            write_values(&mut out, d.to_array().iter())?;
        }
        Record::Code(z) => {
            write_header(&mut out, KIND_CODE, &[z.n_atoms(), z.len()])?;
            write_values(&mut out, z.codes().iter())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input
        .read_exact(&mut buf)
        .map_err(|_| CscError::Format("truncated CSC1 header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_values<F: Scalar, R: Read>(input: &mut R, dims: &[u64]) -> Result<Vec<F>> {
    let n = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n <= MAX_ELEMENTS)
        .ok_or_else(|| CscError::Format(format!("CSC1 dimensions {dims:?} too large")))?;
    let mut bytes = vec![0u8; n as usize * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|_| CscError::Format(format!("CSC1 payload shorter than {n} values")))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| F::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect())
}

fn shape_err(e: ndarray::ShapeError) -> CscError {
    CscError::Format(e.to_string())
}

pub fn read_record<F: Scalar, R: Read>(mut input: R) -> Result<Record<F>> {
    let mut head = [0u8; 5];
    input
        .read_exact(&mut head)
        .map_err(|_| CscError::Format("file shorter than a CSC1 header".into()))?;
    if &head[..4] != MAGIC {
        return Err(CscError::Format("missing CSC1 magic".into()));
    }
    let record = match head[4] {
        KIND_SIGNAL => {
            let dims = [read_u64(&mut input)?, read_u64(&mut input)?];
            let v = read_values(&mut input, &dims)?;
            let a = Array2::from_shape_vec((dims[0] as usize, dims[1] as usize), v)
                .map_err(shape_err)?;
            Record::Signal(MultivariateSignal::new(a)?)
        }
        KIND_DICTIONARY => {
            let dims = [
                read_u64(&mut input)?,
                read_u64(&mut input)?,
                read_u64(&mut input)?,
            ];
            let v = read_values(&mut input, &dims)?;
            let a =
                Array3::from_shape_vec((dims[0] as usize, dims[1] as usize, dims[2] as usize), v)
                    .map_err(shape_err)?;
            Record::Dictionary(Dictionary::from_array(&a)?)
        }
        KIND_CODE => {
            let dims = [read_u64(&mut input)?, read_u64(&mut input)?];
            let v = read_values(&mut input, &dims)?;
            let a = Array2::from_shape_vec((dims[0] as usize, dims[1] as usize), v)
                .map_err(shape_err)?;
            Record::Code(SparseCode::new(a))
        }
        other => {
            return Err(CscError::Format(format!(
                "unknown CSC1 record kind {other}"
            )))
        }
    };
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(CscError::Format("trailing bytes after CSC1 payload".into()));
    }
    Ok(record)
}

pub fn save<F: Scalar>(path: impl AsRef<Path>, record: &Record<F>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_record(std::io::BufWriter::new(file), record)
}

pub fn load<F: Scalar>(path: impl AsRef<Path>) -> Result<Record<F>> {
    read_record(std::io::BufReader::new(fs::File::open(path)?))
}

fn expect_kind<F: Scalar>(record: Record<F>, want: &str) -> Result<Record<F>> {
    if record.kind_name() == want {
        Ok(record)
    } else {
        Err(CscError::Format(format!(
            "expected a {want} record, found a {}",
            record.kind_name()
        )))
    }
}

pub fn load_signal<F: Scalar>(path: impl AsRef<Path>) -> Result<MultivariateSignal<F>> {
    match expect_kind(load(path)?, "signal")? {
        Record::Signal(x) => Ok(x),
        _ => unreachable!(),
    }
}

pub fn load_dictionary<F: Scalar>(path: impl AsRef<Path>) -> Result<Dictionary<F>> {
    match expect_kind(load(path)?, "dictionary")? {
        Record::Dictionary(d) => Ok(d),
        _ => unreachable!(),
    }
}

pub fn load_code<F: Scalar>(path: impl AsRef<Path>) -> Result<SparseCode<F>> {
    match expect_kind(load(path)?, "code")? {
        Record::Code(z) => Ok(z),
        _ => unreachable!(),
    }
}

/// Writes `t,ch0,ch1,...` followed by one row per sample.
pub fn write_signal_csv<F: Scalar, W: Write>(mut out: W, x: &MultivariateSignal<F>) -> Result<()> {
    let header: Vec<String> = (0..x.n_channels()).map(|p| format!("ch{p}")).collect();
    writeln!(out, "t,{}", header.join(","))?;
    for (t, row) in x.samples().rows().into_iter().enumerate() {
        write!(out, "{t}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses the CSV written by [`write_signal_csv`]. Rows must be in time order
/// starting at 0.
pub fn read_signal_csv<F: Scalar>(text: &str) -> Result<MultivariateSignal<F>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CscError::Format("empty CSV".into()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let channels = cols.len().saturating_sub(1);
    let named = cols
        .iter()
        .skip(1)
        .enumerate()
        .all(|(p, c)| *c == format!("ch{p}"));
    if cols.first() != Some(&"t") || channels == 0 || !named {
        return Err(CscError::Format(format!(
            "CSV header must be `t,ch0,...`, got `{header}`"
        )));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != channels + 1 {
            return Err(CscError::Format(format!(
                "CSV row {n}: expected {} fields",
                channels + 1
            )));
        }
        if fields[0].parse::<usize>().ok() != Some(n) {
            return Err(CscError::Format(format!(
                "CSV row {n}: time index `{}` out of order",
                fields[0]
            )));
        }
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| CscError::Format(format!("CSV row {n}: bad value `{f}`")))?;
            values.push(F::lit(v));
        }
        rows += 1;
    }
    let a = Array2::from_shape_vec((rows, channels), values).map_err(shape_err)?;
    MultivariateSignal::new(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn signal_round_trips_through_csc1() {
        let x = MultivariateSignal::new(array![[1.0, -2.5], [0.125, 3.0], [1e-300, -0.0]]).unwrap();
        let mut buf = Vec::new();
        write_record(&mut buf, &Record::Signal(x.clone())).unwrap();
        assert_eq!(&buf[..4], b"CSC1");
        assert_eq!(buf[4], 1);
        assert_eq!(buf.len(), 5 + 16 + 6 * 8);
        assert_eq!(read_record::<f64, _>(&buf[..]).unwrap(), Record::Signal(x));
    }

    #[test]
    fn dictionary_and_code_round_trip() {
        let d = Dictionary::from_array(&Array3::from_shape_fn((2, 3, 2), |(k, w, p)| {
            (k + 2 * w + 3 * p) as f64 + 0.5
        }))
        .unwrap();
        let z = SparseCode::new(array![[0.0, 1.5, 0.0], [-2.0, 0.0, 0.25]]);
        for rec in [Record::Dictionary(d), Record::Code(z)] {
            let mut buf = Vec::new();
            write_record(&mut buf, &rec).unwrap();
            assert_eq!(read_record::<f64, _>(&buf[..]).unwrap(), rec);
        }
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(matches!(
            read_record::<f64, _>(&b"CSC2\x01"[..]),
            Err(CscError::Format(_))
        ));
        let mut buf = Vec::new();
        write_record(&mut buf, &Record::Code(SparseCode::new(array![[1.0, 2.0]]))).unwrap();
        assert!(matches!(
            read_record::<f64, _>(&buf[..buf.len() - 1]),
            Err(CscError::Format(_))
        ));
        buf.push(0);
        assert!(matches!(
            read_record::<f64, _>(&buf[..]),
            Err(CscError::Format(_))
        ));
        buf[4] = 9;
        assert!(matches!(
            read_record::<f64, _>(&buf[..]),
            Err(CscError::Format(_))
        ));
    }

    #[test]
    fn csv_round_trips() {
        let x = MultivariateSignal::new(array![[1.0, -2.5, 0.1], [0.125, 3.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_signal_csv(&mut buf, &x).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,ch0,ch1,ch2\n0,1,-2.5,0.1\n"));
        assert_eq!(read_signal_csv::<f64>(&text).unwrap(), x);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(read_signal_csv::<f64>("time,a\n0,1\n").is_err());
    }
}
