//! Feature-matrix files.
//!
//! `snrf` layout, all integers little-endian:
//!
//! ```text
//! "SNRF" | u32 version = 1 | u64 n | u64 d | n*d f64 row-major
//! [ u8 flag = 1 | n u32 labels ]  or  [ u8 flag = 0 ]  or nothing
//! ```
//!
//! CSV files are comma separated, one observation per line, with an optional
//! header row and an optional final integer `label` column.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const SNRF_MAGIC: &[u8; 4] = b"SNRF";
pub const FORMAT_VERSION: u32 = 1;
pub const SNRF_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Treat the last column as the integer class label.
    pub label_column: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv(CsvOptions),
    Snrf,
}

impl MatrixFormat {
    /// Picks a format from the file extension; `.csv` uses the given CSV options.
    pub fn from_path(path: &Path, csv: CsvOptions) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv(csv),
            _ => MatrixFormat::Snrf,
        }
    }
}

pub fn read_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix<f64>> {
    let bytes = fs::read(path)?;
    match format {
        MatrixFormat::Snrf => decode_snrf(&bytes),
        MatrixFormat::Csv(opts) => parse_csv(&bytes, opts),
    }
}

pub fn write_matrix(
    data: &DataMatrix<f64>,
    path: impl AsRef<Path>,
    format: MatrixFormat,
) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Snrf => encode_snrf(data),
        MatrixFormat::Csv(opts) => format_csv(data, opts),
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn write_header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::Format(format!(
                "truncated: need {len} bytes at offset {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    pub(crate) fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} too large")))
    }
}

pub fn encode_snrf(data: &DataMatrix<f64>) -> Vec<u8> {
    let (n, d) = (data.n(), data.d());
    let extra = data.labels().map_or(0, |_| 1 + 4 * n);
    let mut out = Vec::with_capacity(SNRF_HEADER_LEN + 8 * n * d + extra);
    write_header(&mut out, SNRF_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    let v = data.values();
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&v[(i, j)].to_le_bytes());
        }
    }
    if let Some(labels) = data.labels() {
        out.push(1);
        for l in labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    out
}

pub fn decode_snrf(bytes: &[u8]) -> Result<DataMatrix<f64>> {
    let mut r = Reader::new(bytes);
    r.header(SNRF_MAGIC)?;
    let n = r.dim("n")?;
    let d = r.dim("d")?;
    let count = n
        .checked_mul(d)
        .filter(|c| c.checked_mul(8).is_some_and(|b| b <= r.remaining()))
        .ok_or_else(|| {
            Error::Format(format!(
                "dimension mismatch: {n}x{d} does not fit the payload"
            ))
        })?;
    let mut vals = Vec::with_capacity(count);
    for k in 0..count {
        let v = r.f64()?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row: k / d,
                column: k % d,
                message: "non-finite value".into(),
            });
        }
        vals.push(v);
    }
    let labels = if r.remaining() == 0 {
        None
    } else {
        match r.u8()? {
            0 => None,
            1 => Some((0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?),
            f => return Err(Error::Format(format!("bad label flag {f}"))),
        }
    };
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
    }
    DataMatrix::from_rows(n, d, &vals, labels)
}

pub fn parse_csv(bytes: &[u8], opts: CsvOptions) -> Result<DataMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut width: Option<usize> = None;
    let mut vals = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                row,
                column: rec.len().min(w),
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        let feature_cols = if opts.label_column {
            w.saturating_sub(1)
        } else {
            w
        };
        if feature_cols == 0 {
            return Err(Error::Parse {
                row,
                column: 0,
                message: "no feature columns".into(),
            });
        }
        for (col, field) in rec.iter().enumerate().take(feature_cols) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: col,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col,
                    message: "non-finite value".into(),
                });
            }
            vals.push(v);
        }
        if opts.label_column {
            let field = &rec[feature_cols];
            let l: u32 = field.parse().map_err(|_| Error::Parse {
                row,
                column: feature_cols,
                message: format!("invalid label {field:?}"),
            })?;
            labels.push(l);
        }
        n += 1;
    }
    let w = width.ok_or_else(|| Error::Degenerate("empty csv".into()))?;
    let d = if opts.label_column { w - 1 } else { w };
    DataMatrix::from_rows(n, d, &vals, opts.label_column.then_some(labels))
}

pub fn format_csv(data: &DataMatrix<f64>, opts: CsvOptions) -> Vec<u8> {
    let mut out = Vec::new();
    let with_labels = opts.label_column && data.labels().is_some();
    if opts.has_header {
        let mut cols: Vec<String> = (0..data.d()).map(|j| format!("f{j}")).collect();
        if with_labels {
            cols.push("label".into());
        }
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    let v = data.values();
    for i in 0..data.n() {
        let mut line: Vec<String> = (0..data.d()).map(|j| format!("{:?}", v[(i, j)])).collect();
        if with_labels {
            line.push(data.labels().unwrap()[i].to_string());
        }
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snrf_size_is_header_plus_payload() {
        let m = DataMatrix::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0], None).unwrap();
        let b = encode_snrf(&m);
        assert_eq!(b.len(), 24 + 2 * 2 * 8);
        assert_eq!(&b[..4], b"SNRF");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(&b[24..32], &1.0f64.to_le_bytes());
        assert_eq!(&b[32..40], &2.0f64.to_le_bytes());
        assert_eq!(decode_snrf(&b).unwrap(), m);
    }

    #[test]
    fn snrf_label_block() {
        let m = DataMatrix::from_rows(3, 1, &[1.0, 2.0, 3.0], Some(vec![0, 2, 1])).unwrap();
        let b = encode_snrf(&m);
        assert_eq!(b.len(), 24 + 24 + 1 + 12);
        assert_eq!(decode_snrf(&b).unwrap(), m);

        let mut zero_flag = encode_snrf(&m.without_labels());
        zero_flag.push(0);
        assert_eq!(decode_snrf(&zero_flag).unwrap().labels(), None);
    }

    #[test]
    fn snrf_rejects_corruption() {
        let m = DataMatrix::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0], None).unwrap();
        let b = encode_snrf(&m);
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snrf(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_snrf(&b[..40]), Err(Error::Format(_))));
        let mut nan = b.clone();
        nan[32..40].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            decode_snrf(&nan),
            Err(Error::Parse {
                row: 0,
                column: 1,
                ..
            })
        ));
        let mut flag = b;
        flag.push(7);
        assert!(decode_snrf(&flag).is_err());
    }

    #[test]
    fn csv_basic() {
        let m = parse_csv(b"1.5,2.0\n3.0,4.0", CsvOptions::default()).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.values()[(0, 0)], 1.5);
        assert_eq!(m.values()[(1, 1)], 4.0);
    }

    #[test]
    fn csv_header_and_labels() {
        let opts = CsvOptions {
            has_header: true,
            label_column: true,
        };
        let m = parse_csv(b"a,b,label\n1,2,0\n3,4,1\n", opts).unwrap();
        assert_eq!(m.d(), 2);
        assert_eq!(m.labels(), Some(&[0, 1][..]));
        let again = parse_csv(&format_csv(&m, opts), opts).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn csv_errors_name_location() {
        let e = parse_csv(b"1,2\n3,x\n", CsvOptions::default()).unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    row: 1,
                    column: 1,
                    ..
                }
            ),
            "{e}"
        );
        let e = parse_csv(b"1,2\n3\n", CsvOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 1, .. }), "{e}");
        let e = parse_csv(b"1,inf\n", CsvOptions::default()).unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    row: 0,
                    column: 1,
                    ..
                }
            ),
            "{e}"
        );
    }

    #[test]
    fn file_round_trip_bit_identical() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..500)
            .map(|_| rng.random::<f64>() * 1e3 - 500.0)
            .collect();
        let m = DataMatrix::from_rows(50, 10, &v, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.snrf");
        write_matrix(&m, &p, MatrixFormat::Snrf).unwrap();
        let back = read_matrix(&p, MatrixFormat::Snrf).unwrap();
        for (a, b) in back.values().iter().zip(m.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let pc = dir.path().join("m.csv");
        write_matrix(&m, &pc, MatrixFormat::Csv(CsvOptions::default())).unwrap();
        let back = read_matrix(&pc, MatrixFormat::Csv(CsvOptions::default())).unwrap();
        assert!((back.values() - m.values()).amax() <= 1e-12);
    }

    proptest! {
        #[test]
        fn snrf_round_trip(n in 1usize..6, d in 1usize..6, seed in any::<u64>(), labeled in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() - 0.5).collect();
            let labels = labeled.then(|| (0..n as u32).collect());
            let m = DataMatrix::from_rows(n, d, &v, labels).unwrap();
            let bytes = encode_snrf(&m);
            prop_assert_eq!(encode_snrf(&decode_snrf(&bytes).unwrap()), bytes);
        }
    }
}
