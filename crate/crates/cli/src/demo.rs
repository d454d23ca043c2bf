//! Demonstration CSV files.
//!
//! One row per sample. Header cells name the channels, optionally with a
//! kind suffix: `x`, `u:surface_coord`, `fz:force`. Channels default to
//! positions. An optional `t` column gives the sample times, which must be
//! uniform.

use corrective_core::dmp::Demonstration;
use corrective_core::state::{ChannelKind, ChannelSpec, StateVector};
use std::path::Path;

fn kind(name: &str) -> Result<ChannelKind, String> {
    match name {
        "position" => Ok(ChannelKind::Position),
        "surface_coord" => Ok(ChannelKind::SurfaceCoord),
        "force" => Ok(ChannelKind::Force),
        other => Err(format!("unknown channel kind '{other}' (position, surface_coord or force)")),
    }
}

pub fn load_csv(path: &Path, dt: Option<f64>) -> Result<Demonstration, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let time_col = headers.iter().position(|h| h == "t");
    let mut channels = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if Some(i) == time_col {
            continue;
        }
        let spec = match h.split_once(':') {
            Some((name, k)) => ChannelSpec::new(name, kind(k)?),
            None => ChannelSpec::new(h, ChannelKind::Position),
        };
        channels.push(spec);
    }
    if channels.is_empty() {
        return Err("demonstration has no channels".into());
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let mut values = Vec::with_capacity(channels.len());
        for (i, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("row {}: '{cell}' is not a number", row + 2))?;
            if !v.is_finite() {
                return Err(format!("row {}: non-finite value", row + 2));
            }
            if Some(i) == time_col {
                times.push(v);
            } else {
                values.push(v);
            }
        }
        samples.push(StateVector(values));
    }

    let step = match (time_col, dt) {
        (Some(_), _) => {
            if times.len() < 2 {
                return Err("demonstration needs at least two samples".into());
            }
            let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
            let uneven = times.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs().max(1e-9));
            if uneven {
                return Err("sample times in column 't' are not uniform".into());
            }
            step
        }
        (None, Some(dt)) => dt,
        (None, None) => return Err("demonstration has no 't' column; pass --dt".into()),
    };
    Demonstration::new(channels, step, samples).map_err(|e| e.to_string())
}
