//! CSV trajectories and JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use sdmgrad_core::TrajectoryRecord;
use serde::Serialize;

/// Renders records as CSV with one row per logged outer step.
///
/// Columns: `iteration, loss_1..loss_K, stationarity, direction_norm,
/// target_cosine, w_1..w_K` and, when snapshots were recorded, `theta_1..theta_m`.
pub fn trajectory_csv(
    records: &[TrajectoryRecord],
    k: usize,
    m: usize,
    with_theta: bool,
) -> String {
    let mut out = String::from("iteration");
    for i in 1..=k {
        let _ = write!(out, ",loss_{i}");
    }
    out.push_str(",stationarity,direction_norm,target_cosine");
    for i in 1..=k {
        let _ = write!(out, ",w_{i}");
    }
    if with_theta {
        for i in 1..=m {
            let _ = write!(out, ",theta_{i}");
        }
    }
    out.push('\n');

    for r in records {
        let _ = write!(out, "{}", r.iteration);
        for l in &r.losses {
            let _ = write!(out, ",{l}");
        }
        let _ = write!(
            out,
            ",{},{},{}",
            r.stationarity, r.direction_norm, r.target_cosine
        );
        for w in r.weight_snapshot.as_slice() {
            let _ = write!(out, ",{w}");
        }
        if with_theta {
            if let Some(theta) = &r.theta_snapshot {
                for x in theta.as_slice() {
                    let _ = write!(out, ",{x}");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
