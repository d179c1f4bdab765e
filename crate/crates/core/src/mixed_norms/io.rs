//! Grid signal files.
//!
//! A file is one line of UTF-8 JSON (the header) terminated by `\n`, then the
//! payload. Header fields:
//!
//! ```text
//! {"format":"lpq-grid-signal","version":1,"encoding":"f64le"|"csv",
//!  "cube":{"r":R,"s":S,"n":n},"spatial_points":P,"temporal_points":Q,"len":P^n*Q}
//! ```
//!
//! With `f64le` the payload is exactly `len` little-endian IEEE-754 doubles in
//! grid storage order (temporal index outermost, spatial axis 0 fastest).
//! With `csv` the payload is a CSV table with header `x1,..,xn,y,value` and
//! one row per node in the same order; numbers carry 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{Cube, Grid, GridSignal};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "lpq-grid-signal";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    F64le,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    encoding: Encoding,
    cube: Cube,
    spatial_points: usize,
    temporal_points: usize,
    len: usize,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_signal_to<W: Write>(mut w: W, f: &GridSignal, encoding: Encoding) -> Result<()> {
    let grid = f.grid();
    let header = Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        encoding,
        cube: *grid.cube(),
        spatial_points: grid.spatial_points(),
        temporal_points: grid.temporal_points(),
        len: grid.len(),
    };
    let io = |e| Error::io("<signal stream>", e);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    match encoding {
        Encoding::F64le => {
            for v in f.values() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Encoding::Csv => {
            let n = grid.n();
            let mut csv = csv::Writer::from_writer(&mut w);
            let mut names: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
            names.push("y".into());
            names.push("value".into());
            csv.write_record(&names)?;
            let mut coords = vec![0.0; n + 1];
            for (flat, v) in f.values().iter().enumerate() {
                grid.node_into(flat, &mut coords);
                let row: Vec<String> = coords
                    .iter()
                    .chain(std::iter::once(v))
                    .map(|&x| fmt_f64(x))
                    .collect();
                csv.write_record(&row)?;
            }
            csv.flush().map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_signal_from<R: Read>(r: R) -> Result<GridSignal> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::io("<signal stream>", e))?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    let cube = Cube::new(header.cube.r, header.cube.s, header.cube.n)?;
    let grid = Grid::new(cube, header.spatial_points, header.temporal_points)?;
    if grid.len() != header.len {
        return Err(Error::Format(format!(
            "header len {} disagrees with grid shape ({})",
            header.len,
            grid.len()
        )));
    }
    let values = match header.encoding {
        Encoding::F64le => {
            let mut bytes = Vec::new();
            reader
                .read_to_end(&mut bytes)
                .map_err(|e| Error::io("<signal stream>", e))?;
            if bytes.len() != 8 * header.len {
                return Err(Error::Format(format!(
                    "payload has {} bytes, expected {}",
                    bytes.len(),
                    8 * header.len
                )));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
        Encoding::Csv => {
            let mut csv = csv::Reader::from_reader(reader);
            let col = grid.n() + 1;
            let mut values = Vec::with_capacity(header.len);
            for record in csv.records() {
                let record = record?;
                let field = record
                    .get(col)
                    .ok_or_else(|| Error::Format("missing value column".into()))?;
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad number {field:?}")))?;
                values.push(v);
            }
            values
        }
    };
    GridSignal::new(grid, values)
}

pub fn write_signal(path: &Path, f: &GridSignal, encoding: Encoding) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_signal_to(BufWriter::new(file), f, encoding)
}

pub fn read_signal(path: &Path) -> Result<GridSignal> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_signal_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_line_is_json() {
        let grid = Grid::new(Cube::new(1.0, 2.0, 1).unwrap(), 2, 3).unwrap();
        let f = GridSignal::from_fn(grid, |p| p[0] * 10.0 + p[1]).unwrap();
        let mut buf = Vec::new();
        write_signal_to(&mut buf, &f, Encoding::F64le).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..nl]).unwrap();
        assert_eq!(header["encoding"], "f64le");
        assert_eq!(header["len"], 6);
        assert_eq!(buf.len() - nl - 1, 48);
        assert_eq!(read_signal_from(&buf[..]).unwrap(), f);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let grid = Grid::new(Cube::new(1.0, 1.0, 1).unwrap(), 2, 2).unwrap();
        let f = GridSignal::zeros(grid);
        let mut buf = Vec::new();
        write_signal_to(&mut buf, &f, Encoding::F64le).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_signal_from(&buf[..]), Err(Error::Format(_))));
    }
}
