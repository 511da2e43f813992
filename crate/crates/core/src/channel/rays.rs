//! Ray-trace ingestion.
//!
//! A ray tracer exports one CSV per transmitter/detector distance with the
//! header `ray_id,power_w,path_length_m`. A manifest CSV with header
//! `distance_m,file` lists those files; relative paths resolve against the
//! manifest's directory. Powers are normalised to a unit transmitter, so the
//! channel gain at a distance is the sum of its ray powers.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PathLossSample;
use crate::error::{Error, Result};

/// Speed of light used to convert path lengths into delays, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

pub const RAY_HEADER: [&str; 3] = ["ray_id", "power_w", "path_length_m"];
pub const MANIFEST_HEADER: [&str; 2] = ["distance_m", "file"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    /// Detected power, W (fraction of a unit transmitter).
    pub power: f64,
    /// Source to detector path length, m.
    pub path_length: f64,
}

impl RayRecord {
    pub fn delay(&self) -> f64 {
        self.path_length / SPEED_OF_LIGHT
    }
}

/// One Dirac tap of the impulse response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirTap {
    pub power: f64,
    /// Propagation delay, s.
    pub delay: f64,
}

pub fn impulse_response(rays: &[RayRecord]) -> Vec<CirTap> {
    rays.iter()
        .map(|r| CirTap {
            power: r.power,
            delay: r.delay(),
        })
        .collect()
}

fn check_ray(index: usize, r: &RayRecord) -> Result<()> {
    if !(r.power >= 0.0) || !r.power.is_finite() {
        return Err(Error::BadSample {
            index,
            reason: format!("ray power {} must be finite and >= 0", r.power),
        });
    }
    if !(r.path_length > 0.0) || !r.path_length.is_finite() {
        return Err(Error::BadSample {
            index,
            reason: format!("path length {} must be > 0", r.path_length),
        });
    }
    Ok(())
}

/// Integrated impulse response, i.e. the total detected fraction of the
/// transmitted power.
pub fn integrate_cir(rays: &[RayRecord]) -> Result<f64> {
    if rays.is_empty() {
        return Err(Error::EmptyInput("no rays reached the detector"));
    }
    let mut total = 0.0;
    for (i, r) in rays.iter().enumerate() {
        check_ray(i, r)?;
        total += r.power;
    }
    if total > 1.0 {
        return Err(Error::EnergyViolation { total });
    }
    Ok(total)
}

/// Path loss in dB (positive) for a channel gain.
pub fn gain_to_loss_db(gain: f64) -> f64 {
    -10.0 * gain.log10()
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| parse_err(path, line, format!("missing column `{name}`")))?;
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("`{name}`: cannot parse {raw:?}")))
}

fn records(
    path: &Path,
    rdr: &mut csv::Reader<File>,
    width: usize,
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        out.push((line, rec));
    }
    Ok(out)
}

pub fn read_ray_file(path: &Path) -> Result<Vec<RayRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &RAY_HEADER)?;
    let mut rays = Vec::new();
    for (line, rec) in records(path, &mut rdr, RAY_HEADER.len())? {
        let _id: u64 = field(path, line, &rec, 0, "ray_id")?;
        let ray = RayRecord {
            power: field(path, line, &rec, 1, "power_w")?,
            path_length: field(path, line, &rec, 2, "path_length_m")?,
        };
        check_ray(rays.len(), &ray).map_err(|e| parse_err(path, line, e.to_string()))?;
        rays.push(ray);
    }
    Ok(rays)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub distance: f64,
    pub file: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &MANIFEST_HEADER)?;
    let mut entries = Vec::new();
    for (line, rec) in records(path, &mut rdr, MANIFEST_HEADER.len())? {
        let distance: f64 = field(path, line, &rec, 0, "distance_m")?;
        if !(distance > 0.0) {
            return Err(parse_err(
                path,
                line,
                format!("distance {distance} must be > 0"),
            ));
        }
        let file = PathBuf::from(&rec[1]);
        let file = if file.is_absolute() {
            file
        } else {
            base.join(file)
        };
        entries.push(ManifestEntry { distance, file });
    }
    Ok(entries)
}

/// Reads every ray file listed in a manifest and converts each to a
/// path-loss sample.
pub fn path_loss_from_manifest(path: &Path) -> Result<Vec<PathLossSample>> {
    read_manifest(path)?
        .into_iter()
        .map(|entry| {
            let rays = read_ray_file(&entry.file)?;
            let gain = integrate_cir(&rays).map_err(|e| Error::InFile {
                path: entry.file.clone(),
                source: Box::new(e),
            })?;
            Ok(PathLossSample {
                distance: entry.distance,
                loss_db: gain_to_loss_db(gain),
            })
        })
        .collect()
}

pub fn write_ray_file(path: &Path, rays: &[RayRecord]) -> Result<()> {
    let mut out = String::from("ray_id,power_w,path_length_m\n");
    for (i, r) in rays.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i, r.power, r.path_length));
    }
    write_all(path, &out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from("distance_m,file\n");
    for e in entries {
        out.push_str(&format!("{},{}\n", e.distance, e.file.display()));
    }
    write_all(path, &out)
}

fn write_all(path: &Path, contents: &str) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ray_gain() {
        let rays = [RayRecord {
            power: 0.001,
            path_length: 10.0,
        }];
        let g = integrate_cir(&rays).unwrap();
        assert_eq!(g, 0.001);
        assert!((gain_to_loss_db(g) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn superposition_of_rays() {
        let rays = [
            RayRecord {
                power: 0.0005,
                path_length: 10.0,
            },
            RayRecord {
                power: 0.0005,
                path_length: 12.5,
            },
        ];
        assert!((integrate_cir(&rays).unwrap() - 0.001).abs() < 1e-18);
    }

    #[test]
    fn energy_and_emptiness_checks() {
        let rays = [
            RayRecord {
                power: 0.7,
                path_length: 1.0,
            },
            RayRecord {
                power: 0.4,
                path_length: 1.0,
            },
        ];
        assert!(matches!(
            integrate_cir(&rays),
            Err(Error::EnergyViolation { .. })
        ));
        assert!(matches!(integrate_cir(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn delays_follow_path_length() {
        let taps = impulse_response(&[RayRecord {
            power: 0.1,
            path_length: 2.998e8,
        }]);
        assert_eq!(taps[0].delay, 1.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rays.csv");
        std::fs::write(&path, "ray_id,power_w,path_length_m\n0,0.001,5\n1,abc,5\n").unwrap();
        match read_ray_file(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rays.csv");
        std::fs::write(&path, "id,power,len\n0,0.001,5\n").unwrap();
        assert!(matches!(
            read_ray_file(&path),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn manifest_resolves_relative_files() {
        let dir = tempfile::tempdir().unwrap();
        let rays = [RayRecord {
            power: 0.01,
            path_length: 3.0,
        }];
        write_ray_file(&dir.path().join("d3.csv"), &rays).unwrap();
        let manifest = dir.path().join("manifest.csv");
        write_manifest(
            &manifest,
            &[ManifestEntry {
                distance: 3.0,
                file: "d3.csv".into(),
            }],
        )
        .unwrap();
        let samples = path_loss_from_manifest(&manifest).unwrap();
        assert_eq!(samples.len(), 1);
        assert!((samples[0].loss_db - 20.0).abs() < 1e-12);
    }
}
