//! Long-format export of true and estimated trajectories of one run.
//!
//! One row per scan and per trajectory alive at that scan:
//! `run, scan, source, track_id, birth_time, x, y, p_d`. `source` is `truth`
//! or `estimate`; truth rows carry the true detection probability, estimate
//! rows the filter's. Estimate `track_id` is the rank of the trajectory in
//! that scan's estimate (heaviest first).

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{GroundTruth, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackFormat {
    Csv,
    Json,
}

impl FromStr for TrackFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TrackFormat::Csv),
            "json" => Ok(TrackFormat::Json),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for TrackFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackFormat::Csv => "csv",
            TrackFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSource {
    Truth,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub run: usize,
    pub scan: usize,
    pub source: TrackSource,
    pub track_id: usize,
    pub birth_time: usize,
    pub x: f64,
    pub y: f64,
    pub p_d: f64,
}

/// Rows for every scan of `record`, which must hold its per-scan estimates.
pub fn track_rows(
    record: &RunRecord,
    truth: &GroundTruth,
    position_index: [usize; 2],
    true_detection_probability: f64,
) -> Result<Vec<TrackRow>> {
    if record.estimates.len() != record.scans.len() {
        return Err(Error::Config(format!(
            "run {} has {} stored estimates for {} scans; rerun with estimates kept",
            record.run,
            record.estimates.len(),
            record.scans.len()
        )));
    }
    let [ix, iy] = position_index;
    let mut rows = Vec::new();
    for (i, est) in record.estimates.iter().enumerate() {
        let scan = i + 1;
        for (id, t) in truth.trajectories.iter().enumerate() {
            if let Some(x) = t.state_at(scan) {
                rows.push(TrackRow {
                    run: record.run,
                    scan,
                    source: TrackSource::Truth,
                    track_id: id,
                    birth_time: t.birth_time,
                    x: x[ix],
                    y: x[iy],
                    p_d: true_detection_probability,
                });
            }
        }
        for (id, t) in est.tracks.iter().enumerate() {
            let x = t.current_state();
            rows.push(TrackRow {
                run: record.run,
                scan,
                source: TrackSource::Estimate,
                track_id: id,
                birth_time: t.birth_time,
                x: x[ix],
                y: x[iy],
                p_d: t.detection_probability,
            });
        }
    }
    Ok(rows)
}

/// Writes `rows` to `path`; returns the number of rows written.
pub fn write_track_rows(rows: &[TrackRow], path: impl AsRef<Path>, format: TrackFormat) -> Result<usize> {
    match format {
        TrackFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        TrackFormat::Json => {
            let mut f = File::create(path)?;
            serde_json::to_writer_pretty(&mut f, rows)?;
            f.write_all(b"\n")?;
        }
    }
    Ok(rows.len())
}

pub fn read_track_csv(path: impl AsRef<Path>) -> Result<Vec<TrackRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Exports one run in the named format (`csv` or `json`).
pub fn export_tracks(
    record: &RunRecord,
    truth: &GroundTruth,
    position_index: [usize; 2],
    true_detection_probability: f64,
    path: impl AsRef<Path>,
    format: &str,
) -> Result<usize> {
    let format: TrackFormat = format.parse()?;
    let rows = track_rows(record, truth, position_index, true_detection_probability)?;
    write_track_rows(&rows, path, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_format_is_rejected() {
        assert!(matches!("xml".parse::<TrackFormat>(), Err(Error::UnknownFormat(f)) if f == "xml"));
        assert_eq!("CSV".parse::<TrackFormat>().unwrap(), TrackFormat::Csv);
    }
}
