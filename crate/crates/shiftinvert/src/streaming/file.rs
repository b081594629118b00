//! File-backed sample streams, read once front to back.
//!
//! CSV holds one dense sample per line. The binary format is the magic
//! `SIPMF64\0`, the dimension as a little-endian `u64`, then samples as
//! little-endian `f64` records of that length. Reaching the end of the
//! file is an error unless multi-epoch reading was requested, in which
//! case the stream rewinds and flags itself as no longer streaming.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::SampleOracle;
use crate::error::{Error, Result};
use crate::linalg::io::parse_csv_line;
use crate::rng::SeededRng;

pub const BINARY_MAGIC: &[u8; 8] = b"SIPMF64\0";
const HEADER_LEN: u64 = 16;

pub struct CsvFileOracle {
    path: PathBuf,
    reader: BufReader<File>,
    d: usize,
    line: usize,
    consumed: u64,
    multi_epoch: bool,
    rewound: bool,
    pending: Option<Vec<f64>>,
}

impl CsvFileOracle {
    pub fn open<P: AsRef<Path>>(path: P, multi_epoch: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let reader = BufReader::new(File::open(&path)?);
        let mut s = CsvFileOracle {
            path,
            reader,
            d: 0,
            line: 0,
            consumed: 0,
            multi_epoch,
            rewound: false,
            pending: None,
        };
        let first = s
            .next_record()?
            .ok_or_else(|| Error::InvalidInput(format!("{} has no samples", s.path.display())))?;
        s.d = first.len();
        s.pending = Some(first);
        Ok(s)
    }

    fn next_record(&mut self) -> Result<Option<Vec<f64>>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            if self.reader.read_line(&mut buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            if let Some(v) = parse_csv_line(&buf, self.line, self.consumed as usize)? {
                return Ok(Some(v));
            }
        }
    }

    fn rewind(&mut self) -> Result<()> {
        self.reader.seek(SeekFrom::Start(0))?;
        self.line = 0;
        self.rewound = true;
        Ok(())
    }
}

impl SampleOracle for CsvFileOracle {
    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&mut self, _rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        let rec = match self.pending.take() {
            Some(r) => r,
            None => match self.next_record()? {
                Some(r) => r,
                None if self.multi_epoch => {
                    self.rewind()?;
                    self.next_record()?
                        .ok_or(Error::StreamExhausted { consumed: self.consumed })?
                }
                None => return Err(Error::StreamExhausted { consumed: self.consumed }),
            },
        };
        if rec.len() != self.d {
            return Err(Error::Parse {
                line: self.line,
                message: format!("expected {} values, found {}", self.d, rec.len()),
            });
        }
        out.copy_from_slice(&rec);
        self.consumed += 1;
        Ok(())
    }

    fn non_streaming(&self) -> bool {
        self.rewound
    }
}

pub struct BinaryFileOracle {
    reader: BufReader<File>,
    d: usize,
    consumed: u64,
    multi_epoch: bool,
    rewound: bool,
    buf: Vec<u8>,
}

impl BinaryFileOracle {
    pub fn open<P: AsRef<Path>>(path: P, multi_epoch: bool) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut header = [0u8; HEADER_LEN as usize];
        reader.read_exact(&mut header).map_err(|_| Error::Parse {
            line: 0,
            message: "truncated binary header".into(),
        })?;
        if &header[..8] != BINARY_MAGIC {
            return Err(Error::Parse {
                line: 0,
                message: "bad magic in binary sample file".into(),
            });
        }
        let d = u64::from_le_bytes(header[8..].try_into().expect("8 bytes")) as usize;
        if d == 0 {
            return Err(Error::Parse {
                line: 0,
                message: "binary sample file declares dimension 0".into(),
            });
        }
        Ok(BinaryFileOracle {
            reader,
            d,
            consumed: 0,
            multi_epoch,
            rewound: false,
            buf: vec![0u8; 8 * d],
        })
    }

    /// `Ok(false)` at a clean end of file.
    fn read_record(&mut self) -> Result<bool> {
        let mut filled = 0;
        while filled < self.buf.len() {
            let k = self.reader.read(&mut self.buf[filled..])?;
            if k == 0 {
                break;
            }
            filled += k;
        }
        match filled {
            0 => Ok(false),
            f if f == self.buf.len() => Ok(true),
            _ => Err(Error::Parse {
                line: 0,
                message: format!("truncated record after {} samples", self.consumed),
            }),
        }
    }
}

impl SampleOracle for BinaryFileOracle {
    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&mut self, _rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        if !self.read_record()? {
            if !self.multi_epoch {
                return Err(Error::StreamExhausted { consumed: self.consumed });
            }
            self.reader.seek(SeekFrom::Start(HEADER_LEN))?;
            self.rewound = true;
            if !self.read_record()? {
                return Err(Error::StreamExhausted { consumed: self.consumed });
            }
        }
        for (j, (o, chunk)) in out.iter_mut().zip(self.buf.chunks_exact(8)).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: self.consumed as usize,
                    col: j,
                });
            }
            *o = v;
        }
        self.consumed += 1;
        Ok(())
    }

    fn non_streaming(&self) -> bool {
        self.rewound
    }
}

pub fn write_binary_samples<P: AsRef<Path>>(
    path: P,
    d: usize,
    samples: impl IntoIterator<Item = Vec<f64>>,
) -> Result<u64> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(d as u64).to_le_bytes())?;
    let mut count = 0;
    for s in samples {
        Error::check_dim(d, s.len())?;
        for v in s {
            w.write_all(&v.to_le_bytes())?;
        }
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::streaming::Stream;

    #[test]
    fn csv_one_pass() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "1,2\n# note\n\n3,4\n").unwrap();
        let mut o = CsvFileOracle::open(&p, false).unwrap();
        let mut s = Stream::new(&mut o, None);
        let mut rng = seeded(0);
        assert_eq!(s.draw(&mut rng).unwrap(), vec![1.0, 2.0]);
        assert_eq!(s.draw(&mut rng).unwrap(), vec![3.0, 4.0]);
        assert!(matches!(s.draw(&mut rng), Err(Error::StreamExhausted { consumed: 2 })));
        assert!(!s.non_streaming());
    }

    #[test]
    fn csv_multi_epoch_marks_non_streaming() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "1,2\n3,4\n").unwrap();
        let mut o = CsvFileOracle::open(&p, true).unwrap();
        let mut rng = seeded(0);
        let mut a = [0.0; 2];
        for _ in 0..3 {
            o.draw_into(&mut rng, &mut a).unwrap();
        }
        assert_eq!(a, [1.0, 2.0]);
        assert!(o.non_streaming());
    }

    #[test]
    fn csv_ragged_line_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        let mut o = CsvFileOracle::open(&p, false).unwrap();
        let mut a = [0.0; 2];
        o.draw_into(&mut seeded(0), &mut a).unwrap();
        assert!(matches!(o.draw_into(&mut seeded(0), &mut a), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn binary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_binary_samples(&p, 3, vec![vec![1.0, -2.0, 0.5], vec![0.0, 1e-300, 7.0]]).unwrap();
        let mut o = BinaryFileOracle::open(&p, false).unwrap();
        assert_eq!(o.dim(), 3);
        let mut a = [0.0; 3];
        o.draw_into(&mut seeded(0), &mut a).unwrap();
        assert_eq!(a, [1.0, -2.0, 0.5]);
        o.draw_into(&mut seeded(0), &mut a).unwrap();
        assert_eq!(a, [0.0, 1e-300, 7.0]);
        assert!(matches!(
            o.draw_into(&mut seeded(0), &mut a),
            Err(Error::StreamExhausted { consumed: 2 })
        ));
    }

    #[test]
    fn binary_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        std::fs::write(&p, b"NOTMAGIC\x01\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(BinaryFileOracle::open(&p, false), Err(Error::Parse { .. })));
    }
}
