//! CSV and JSON files written by the experiments.
//!
//! A density file starts with two comment lines naming the frame and the
//! units, followed by a `t,rho` header and one row per sample:
//!
//! ```text
//! # frame: rest
//! # t: time [angstrom/c], rho: probability density [c/angstrom]
//! t,rho
//! -1.0000000000000000e0,0.0000000000000000e0
//! ```
//!
//! Numbers are written with 17 significant digits so a reloaded curve is
//! bit-identical to the one written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::density::{DensityCurve, Frame};
use crate::{Error, Result};

/// Text form of a frame, as used in the first comment line.
pub fn frame_label(frame: Frame) -> String {
    match frame {
        Frame::Proper => "proper".into(),
        Frame::Rest => "rest".into(),
        Frame::Boosted { v } => format!("boosted v={v:?}"),
    }
}

/// Inverse of [`frame_label`].
pub fn parse_frame(text: &str) -> Result<Frame> {
    match text.trim() {
        "proper" => Ok(Frame::Proper),
        "rest" => Ok(Frame::Rest),
        other => {
            let v = other
                .strip_prefix("boosted v=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("unknown frame `{other}`")))?;
            if !(v.abs() < 1.0) {
                return Err(Error::Parse(format!("frame velocity {v} must satisfy |v| < 1")));
            }
            Ok(Frame::Boosted { v })
        }
    }
}

/// Writes a density in the format described in the module documentation.
pub fn write_density_csv(curve: &DensityCurve, mut out: impl Write) -> Result<()> {
    let axis = match curve.frame() {
        Frame::Proper => "tau: proper time [angstrom/c]",
        _ => "t: time [angstrom/c]",
    };
    writeln!(out, "# frame: {}", frame_label(curve.frame()))?;
    writeln!(out, "# {axis}, rho: probability density [c/angstrom]")?;
    writeln!(out, "t,rho")?;
    for (t, v) in curve.abscissa().iter().zip(curve.values()) {
        writeln!(out, "{t:.16e},{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a density written by [`write_density_csv`].
pub fn read_density_csv(text: &str) -> Result<DensityCurve> {
    let mut frame = None;
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(f) = comment.trim().strip_prefix("frame:") {
                if frame.is_some() {
                    return Err(Error::Parse("frame given twice".into()));
                }
                frame = Some(parse_frame(f)?);
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let frame = frame.ok_or_else(|| Error::Parse("missing `# frame:` line".into()))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["t", "rho"] {
        return Err(Error::Parse("header must be `t,rho`".into()));
    }
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            row.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: column {} is not a number", i + 1, k + 1)))
        };
        t.push(num(0)?);
        v.push(num(1)?);
    }
    DensityCurve::new(t, v, frame).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes `value` as pretty-printed JSON.
pub fn write_json(value: &impl Serialize, out: impl Write) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Creates `path` (truncating) behind a buffered writer.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(frame: Frame) -> DensityCurve {
        let t: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 * 0.1 / 3.0).collect();
        let v = t.iter().map(|t| (-t * t).exp() / 7.0).collect();
        DensityCurve::new(t, v, frame).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for frame in [Frame::Proper, Frame::Rest, Frame::Boosted { v: -0.6 }] {
            let c = curve(frame);
            let mut buf = Vec::new();
            write_density_csv(&c, &mut buf).unwrap();
            let back = read_density_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.mean(), c.mean());
        }
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        for text in [
            "",
            "t,rho\n0,1\n1,1\n",
            "# frame: sideways\nt,rho\n0,1\n1,1\n",
            "# frame: boosted v=1.5\nt,rho\n0,1\n1,1\n",
            "# frame: rest\nx,y\n0,1\n1,1\n",
            "# frame: rest\nt,rho\n0,1\n",
            "# frame: rest\nt,rho\n0,1\n1,abc\n",
            "# frame: rest\nt,rho\n1,1\n0,1\n",
            "# frame: rest\nt,rho\n0,1\n1,-1\n",
            "# frame: rest\nt,rho\n0,1,2\n1,1\n",
        ] {
            assert!(matches!(read_density_csv(text), Err(Error::Parse(_))), "{text:?}");
        }
    }

    #[test]
    fn frame_labels_round_trip() {
        for f in [Frame::Proper, Frame::Rest, Frame::Boosted { v: 0.3 }] {
            assert_eq!(parse_frame(&frame_label(f)).unwrap(), f);
        }
    }
}
