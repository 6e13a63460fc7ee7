//! File formats: CSV sequences, measures and curves; JSON orbits, measures,
//! partitions and reports.
//!
//! JSON output goes through [`to_json`], which prints every float with 17
//! significant digits so that reports are byte-stable and round-trip exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nuhyp_core::cocycle::OrbitSegment;
use nuhyp_core::manifolds::{Branch, ManifoldCurve, Side};
use nuhyp_core::wstar::{Atom, EmpiricalMeasure};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{io_err, Error, Result};

/// Pretty-printing formatter writing floats as `{:.16e}`.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{:.16e}", value)
        } else {
            // JSON has no infinities; serde_json writes null as well.
            w.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

/// Single-line JSON (shortest round-trip floats), for logs and stdout.
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CompactFormatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

/// Numeric CSV rows with their 1-based line numbers. `#` starts a comment;
/// a first row whose fields are all non-numeric is taken as a header.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_numeric_rows(path, &text)
}

fn parse_numeric_rows(path: &Path, text: &str) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rows = Vec::new();
    let mut first = true;
    // One physical line per record keeps line numbers exact around comments
    // and blank lines.
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let record = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(raw.as_bytes())
            .records()
            .next()
            .transpose()
            .map_err(|e| parse_err(e.to_string()))?
            .unwrap_or_default();
        let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let header = first && fields.iter().all(|f| f.parse::<f64>().is_err());
        first = false;
        if header {
            continue;
        }
        let values = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("`{}` is not a number", f))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

/// A real sequence: every numeric field of every row, in reading order.
pub fn read_sequence(path: &Path) -> Result<Vec<f64>> {
    let rows = read_numeric_rows(path)?;
    let values: Vec<f64> = rows.into_iter().flat_map(|(_, v)| v).collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            message: format!("non-finite value {}", bad),
        });
    }
    Ok(values)
}

/// Phase space of a planar measure file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSpace {
    /// `T²`: coordinates are reduced to `[0, 1)`.
    Torus,
    /// Any other planar space; coordinates are kept.
    Plane,
}

/// A measure from CSV (`weight,x,y`) or JSON, chosen by extension.
pub fn read_measure(path: &Path, space: PhaseSpace) -> Result<EmpiricalMeasure<[f64; 2]>> {
    let atoms: Vec<Atom<[f64; 2]>> = if path.extension().is_some_and(|e| e == "json") {
        let m: EmpiricalMeasure<[f64; 2]> = read_json(path)?;
        m.atoms().to_vec()
    } else {
        read_numeric_rows(path)?
            .into_iter()
            .map(|(line, row)| match row[..] {
                [weight, x, y] => Ok(Atom { point: [x, y], weight }),
                _ => Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("expected 3 columns (weight, x, y), found {}", row.len()),
                }),
            })
            .collect::<Result<_>>()?
    };
    Ok(match space {
        PhaseSpace::Torus => EmpiricalMeasure::on_torus(atoms)?,
        PhaseSpace::Plane => EmpiricalMeasure::new(atoms)?,
    })
}

pub fn measure_csv(m: &EmpiricalMeasure<[f64; 2]>) -> String {
    let mut out = String::from("weight,x,y\n");
    for a in m.atoms() {
        out += &format!("{:.16e},{:.16e},{:.16e}\n", a.weight, a.point[0], a.point[1]);
    }
    out
}

pub fn read_orbit(path: &Path) -> Result<OrbitSegment> {
    read_json(path)
}

/// Curves as one CSV polyline table, one row per vertex of each patch piece.
pub fn curves_csv(curves: &[(usize, &ManifoldCurve)]) -> String {
    let mut out = String::from("saddle,branch,side,piece,patch,x,y\n");
    for (saddle, c) in curves {
        let branch = match c.branch {
            Branch::Stable => "stable",
            Branch::Unstable => "unstable",
        };
        let side = match c.side {
            Side::Plus => "+",
            Side::Minus => "-",
        };
        for (k, piece) in c.pieces.iter().enumerate() {
            for p in &piece.points {
                out += &format!(
                    "{},{},{},{},{},{:.16e},{:.16e}\n",
                    saddle, branch, side, k, piece.patch, p[0], p[1]
                );
            }
        }
    }
    out
}
