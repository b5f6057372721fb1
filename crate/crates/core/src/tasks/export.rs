//! Long-format CSV dump of generated datasets.
//!
//! One row per `(sample, step)`: `sample, step, x0 .. x{F-1}, target`.
//! A per-step target fills every row; a per-sample target (classification
//! label or the adding sum) is written on the sample's last step and left
//! empty elsewhere.

use std::io::Write;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub struct ExportedSample<'a> {
    pub input: ArrayView2<'a, f64>,
    /// Length `T` for per-step targets, length 1 for one value per sample.
    pub target: &'a [f64],
}

pub fn write_dataset<W: Write>(writer: W, samples: &[ExportedSample<'_>]) -> Result<()> {
    let features = samples.first().map_or(1, |s| s.input.ncols());
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["sample".to_string(), "step".to_string()];
    header.extend((0..features).map(|f| format!("x{f}")));
    header.push("target".into());
    out.write_record(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let (steps, f) = s.input.dim();
        if f != features {
            return Err(Error::shape(
                format!("{features} features"),
                format!("{f} in sample {i}"),
            ));
        }
        if s.target.len() != steps && s.target.len() != 1 {
            return Err(Error::shape(
                format!("1 or {steps} targets"),
                format!("{}", s.target.len()),
            ));
        }
        for t in 0..steps {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(s.input.row(t).iter().map(f64::to_string));
            let target = if s.target.len() == steps {
                s.target[t].to_string()
            } else if t + 1 == steps {
                s.target[0].to_string()
            } else {
                String::new()
            };
            row.push(target);
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}
