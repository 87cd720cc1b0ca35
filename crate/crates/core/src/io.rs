//! Plain-text numeric formats. Every float is written in its shortest
//! round-trip representation, so reading a written file reproduces the
//! values bit for bit.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn parse_field(s: &str, line: usize, column: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("column '{column}': cannot parse '{}' as a number", s.trim()),
    })
}

/// Header line followed by one comma-separated row per record.
pub fn write_table<W, I>(mut w: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<f64>>,
{
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Inverse of [`write_table`]; returns the header and rows. Errors name the
/// 1-based line of the first malformed row.
pub fn read_table<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = r.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Parse { line: 1, msg: "empty file, expected a header row".into() }),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let row = fields
            .iter()
            .zip(&header)
            .map(|(f, h)| parse_field(f, lineno, h))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Pixel intensities for one or three channels on an `nx × ny` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub nx: usize,
    pub ny: usize,
    pub channels: Vec<DVector<f64>>,
}

impl Measurement {
    pub fn new(nx: usize, ny: usize, channels: Vec<DVector<f64>>) -> Result<Self> {
        if channels.len() != 1 && channels.len() != 3 {
            return Err(Error::domain(format!("measurement needs 1 or 3 channels, got {}", channels.len())));
        }
        for c in &channels {
            if c.len() != nx * ny {
                return Err(Error::Dimension { expected: nx * ny, got: c.len() });
            }
        }
        Ok(Self { nx, ny, channels })
    }

    fn channel_names(n: usize) -> &'static [&'static str] {
        if n == 1 {
            &["value"]
        } else {
            &["r", "g", "b"]
        }
    }

    /// Columns `ix,iy,value` or `ix,iy,r,g,b`, one row per pixel in index order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header = vec!["ix", "iy"];
        header.extend(Self::channel_names(self.channels.len()));
        let rows = (0..self.nx * self.ny).map(|m| {
            let mut row = vec![(m % self.nx) as f64, (m / self.nx) as f64];
            row.extend(self.channels.iter().map(|c| c[m]));
            row
        });
        write_table(w, &header, rows)
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = read_table(r)?;
        let nch = header.len().saturating_sub(2);
        if header.len() < 3 || header[0] != "ix" || header[1] != "iy" || (nch != 1 && nch != 3) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header 'ix,iy,value' or 'ix,iy,r,g,b', found '{}'", header.join(",")),
            });
        }
        let index = |v: f64, line: usize| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::Parse { line, msg: format!("pixel index {v} is not a nonnegative integer") })
            }
        };
        let mut nx = 0;
        let mut ny = 0;
        for (i, row) in rows.iter().enumerate() {
            nx = nx.max(index(row[0], i + 2)? + 1);
            ny = ny.max(index(row[1], i + 2)? + 1);
        }
        if rows.len() != nx * ny {
            return Err(Error::Parse {
                line: rows.len() + 1,
                msg: format!("{} rows do not fill a {nx}×{ny} grid", rows.len()),
            });
        }
        let mut channels = vec![DVector::from_element(nx * ny, f64::NAN); nch];
        for (i, row) in rows.iter().enumerate() {
            let m = row[1] as usize * nx + row[0] as usize;
            if !channels[0][m].is_nan() {
                return Err(Error::Parse { line: i + 2, msg: format!("duplicate pixel ({}, {})", row[0], row[1]) });
            }
            for (c, ch) in channels.iter_mut().enumerate() {
                let v = row[2 + c];
                if !v.is_finite() {
                    return Err(Error::Parse { line: i + 2, msg: "non-finite intensity".into() });
                }
                ch[m] = v;
            }
        }
        Self::new(nx, ny, channels)
    }
}

/// `# name rows cols` followed by the matrix rows.
pub fn write_matrix<W: Write>(mut w: W, name: &str, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "# {name} {} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read every matrix block written by [`write_matrix`].
pub fn read_matrices<R: BufRead>(r: R) -> Result<Vec<(String, DMatrix<f64>)>> {
    let mut out: Vec<(String, DMatrix<f64>)> = Vec::new();
    let mut pending: Option<(String, usize, usize, Vec<f64>)> = None;
    let finish = |p: (String, usize, usize, Vec<f64>), line: usize| -> Result<(String, DMatrix<f64>)> {
        let (name, rows, cols, data) = p;
        if data.len() != rows * cols {
            return Err(Error::Parse { line, msg: format!("matrix {name} has {} values, expected {}", data.len(), rows * cols) });
        }
        Ok((name, DMatrix::from_row_slice(rows, cols, &data)))
    };
    let mut lineno = 0;
    for line in r.lines() {
        let line = line?;
        lineno += 1;
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(p) = pending.take() {
                out.push(finish(p, lineno)?);
            }
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let bad = || Error::Parse { line: lineno, msg: format!("bad matrix header '{line}'") };
            if parts.len() != 3 {
                return Err(bad());
            }
            let rows = parts[1].parse().map_err(|_| bad())?;
            let cols = parts[2].parse().map_err(|_| bad())?;
            pending = Some((parts[0].to_string(), rows, cols, Vec::new()));
        } else if !line.trim().is_empty() {
            let p = pending.as_mut().ok_or(Error::Parse { line: lineno, msg: "data before header".into() })?;
            for f in line.split(',') {
                p.3.push(parse_field(f, lineno, &p.0)?);
            }
        }
    }
    if let Some(p) = pending.take() {
        out.push(finish(p, lineno)?);
    }
    Ok(out)
}
