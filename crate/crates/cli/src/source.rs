//! Dataset sources: files on disk or seeded synthetic generators.

use std::path::{Path, PathBuf};

use serde::Serialize;
use uspann::data::{read_csv, read_fvecs, write_csv, write_fvecs};
use uspann::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Synthetic {
    Moons { n: usize, noise: f64 },
    Circles { n: usize, factor: f64, noise: f64 },
    Blobs { n: usize, d: usize, centers: usize, separation: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Fvecs(PathBuf),
    Csv(PathBuf),
    Synthetic { generator: Synthetic, seed: u64 },
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_param<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| usage(format!("bad value '{value}' for '{key}'")))
}

/// Parses `moons`, `blobs:n=500,d=8` and friends (the part after `synthetic:`).
pub fn parse_synthetic(generator: &str) -> Result<Synthetic> {
    let (kind, params) = generator.split_once(':').unwrap_or((generator, ""));
    let mut out = match kind {
        "moons" => Synthetic::Moons { n: 2000, noise: 0.05 },
        "circles" => Synthetic::Circles { n: 2000, factor: 0.5, noise: 0.05 },
        "blobs" => Synthetic::Blobs { n: 2000, d: 16, centers: 4, separation: 10.0, sigma: 1.0 },
        other => return Err(usage(format!("unknown generator '{other}' (moons, circles, blobs)"))),
    };
    for pair in params.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = pair.split_once('=').ok_or_else(|| usage(format!("expected key=value, got '{pair}'")))?;
        match (&mut out, key) {
            (Synthetic::Moons { n, .. } | Synthetic::Circles { n, .. } | Synthetic::Blobs { n, .. }, "n") => {
                *n = parse_param(key, value)?
            }
            (Synthetic::Moons { noise, .. } | Synthetic::Circles { noise, .. }, "noise") => {
                *noise = parse_param(key, value)?
            }
            (Synthetic::Circles { factor, .. }, "factor") => *factor = parse_param(key, value)?,
            (Synthetic::Blobs { d, .. }, "d") => *d = parse_param(key, value)?,
            (Synthetic::Blobs { centers, .. }, "centers" | "c") => *centers = parse_param(key, value)?,
            (Synthetic::Blobs { separation, .. }, "separation") => *separation = parse_param(key, value)?,
            (Synthetic::Blobs { sigma, .. }, "sigma") => *sigma = parse_param(key, value)?,
            _ => return Err(usage(format!("generator '{kind}' has no parameter '{key}'"))),
        }
    }
    Ok(out)
}

impl Synthetic {
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match *self {
            Synthetic::Moons { n, noise } => generate_moons(n, noise, seed),
            Synthetic::Circles { n, factor, noise } => generate_circles(n, factor, noise, seed),
            Synthetic::Blobs { n, d, centers, separation, sigma } => {
                generate_blobs(n, d, centers, separation, sigma, seed)
            }
        }
    }
}

fn by_extension(path: &Path) -> Option<&'static str> {
    match path.extension()?.to_str()? {
        "fvecs" => Some("fvecs"),
        "csv" => Some("csv"),
        _ => None,
    }
}

impl Source {
    /// Resolves `--format` (optional for files with a known extension) and
    /// `--dataset` into a source.
    pub fn resolve(format: Option<&str>, dataset: Option<&Path>, seed: u64) -> Result<Source> {
        if let Some(generator) = format.and_then(|f| f.strip_prefix("synthetic:")) {
            if dataset.is_some() {
                return Err(usage("--dataset cannot be combined with a synthetic --format"));
            }
            return Ok(Source::Synthetic { generator: parse_synthetic(generator)?, seed });
        }
        let path = dataset.ok_or_else(|| usage("--dataset is required unless --format synthetic:..."))?;
        match format.or_else(|| by_extension(path)) {
            Some("fvecs") => Ok(Source::Fvecs(path.to_path_buf())),
            Some("csv") => Ok(Source::Csv(path.to_path_buf())),
            Some(other) => Err(usage(format!("unknown format '{other}' (fvecs, csv, synthetic:...)"))),
            None => Err(usage(format!("cannot infer the format of {}; pass --format", path.display()))),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        let with_path = |p: &Path, e: Error| match e {
            Error::Io(io) => Error::Input(format!("{}: {io}", p.display())),
            Error::Csv(c) if c.is_io_error() => Error::Input(format!("{}: {c}", p.display())),
            other => other,
        };
        match self {
            Source::Fvecs(p) => read_fvecs(p).map_err(|e| with_path(p, e)),
            Source::Csv(p) => read_csv(p).map_err(|e| with_path(p, e)),
            Source::Synthetic { generator, seed } => generator.generate(*seed),
        }
    }
}

/// Writes by extension: `.fvecs` drops labels, anything else is CSV.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    match by_extension(path) {
        Some("fvecs") => write_fvecs(path, ds),
        _ => write_csv(path, ds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_specs() {
        assert_eq!(parse_synthetic("moons").unwrap(), Synthetic::Moons { n: 2000, noise: 0.05 });
        assert_eq!(
            parse_synthetic("blobs:n=300,d=4,c=3").unwrap(),
            Synthetic::Blobs { n: 300, d: 4, centers: 3, separation: 10.0, sigma: 1.0 }
        );
        assert!(parse_synthetic("moons:d=3").is_err());
        assert!(parse_synthetic("spirals").is_err());
        assert!(parse_synthetic("moons:n=abc").is_err());
    }

    #[test]
    fn formats_resolve() {
        let p = Path::new("x.fvecs");
        assert_eq!(Source::resolve(None, Some(p), 0).unwrap(), Source::Fvecs(p.into()));
        assert_eq!(Source::resolve(Some("csv"), Some(p), 0).unwrap(), Source::Csv(p.into()));
        assert!(Source::resolve(None, Some(Path::new("x.bin")), 0).is_err());
        assert!(Source::resolve(None, None, 0).is_err());
        assert!(Source::resolve(Some("synthetic:moons"), Some(p), 0).is_err());
    }
}
