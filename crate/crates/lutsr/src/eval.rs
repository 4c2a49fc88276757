//! Paired-image quality reports.

use std::fmt;
use std::path::{Path, PathBuf};

use lutsr_core::color::Image;
use lutsr_core::metrics::{psnr_b, psnr_y, ssim};
use serde::{Serialize, Serializer};

use crate::imageio::{load_image, ImageIoError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
    Psnrb,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psnr" => Ok(Metric::Psnr),
            "ssim" => Ok(Metric::Ssim),
            "psnrb" | "psnr-b" | "psnr_b" => Ok(Metric::Psnrb),
            other => Err(format!("unknown metric {other:?} (expected psnr, ssim or psnrb)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::Psnrb => "psnrb",
        })
    }
}

/// A metric value; infinite PSNR is written as `inf` in text and JSON.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score(pub f64);

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("nan")
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() && self.0 > 0.0 {
            f.write_str("inf")
        } else {
            write!(f, "{:.4}", self.0)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub name: String,
    pub scores: Vec<Score>,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub luma: &'static str,
    pub metrics: Vec<Metric>,
    pub images: Vec<Row>,
    pub mean: Vec<Score>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{name}: {source}")]
    Metric {
        name: String,
        #[source]
        source: lutsr_core::Error,
    },
    #[error("{0}: no PNG files found")]
    Empty(String),
    #[error("{pred} and {gt} must both be files or both be directories")]
    Mixed { pred: String, gt: String },
}

fn pngs(dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |source| EvalError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// `(name, prediction, ground truth)` pairs matched by file name.
pub fn pair_paths(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, EvalError> {
    match (pred.is_dir(), gt.is_dir()) {
        (false, false) => {
            let name = gt
                .file_name()
                .map_or_else(|| gt.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok(vec![(name, pred.to_path_buf(), gt.to_path_buf())])
        }
        (true, true) => {
            let gts = pngs(gt)?;
            if gts.is_empty() {
                return Err(EvalError::Empty(gt.display().to_string()));
            }
            Ok(gts
                .into_iter()
                .map(|g| {
                    let name = g.file_name().expect("listed file").to_string_lossy().into_owned();
                    (name.clone(), pred.join(&name), g)
                })
                .collect())
        }
        _ => Err(EvalError::Mixed {
            pred: pred.display().to_string(),
            gt: gt.display().to_string(),
        }),
    }
}

pub fn score(metric: Metric, pred: &Image, gt: &Image) -> lutsr_core::Result<f64> {
    match metric {
        Metric::Psnr => psnr_y(pred, gt),
        Metric::Ssim => ssim(pred, gt),
        Metric::Psnrb => psnr_b(gt, pred),
    }
}

pub fn evaluate(pred: &Path, gt: &Path, metrics: &[Metric]) -> Result<EvalReport, EvalError> {
    let mut images = Vec::new();
    for (name, p, g) in pair_paths(pred, gt)? {
        let (pi, gi) = (load_image(&p)?, load_image(&g)?);
        let scores = metrics
            .iter()
            .map(|&m| {
                score(m, &pi, &gi).map(Score).map_err(|source| EvalError::Metric {
                    name: name.clone(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        images.push(Row { name, scores });
    }
    let mean = (0..metrics.len())
        .map(|k| Score(images.iter().map(|r| r.scores[k].0).sum::<f64>() / images.len() as f64))
        .collect();
    Ok(EvalReport {
        luma: "BT.601 full-range",
        metrics: metrics.to_vec(),
        images,
        mean,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "luma: {}", self.luma)?;
        let width = self.images.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        write!(f, "{:width$}", "image")?;
        for m in &self.metrics {
            write!(f, " {:>10}", m.to_string())?;
        }
        writeln!(f)?;
        for row in self
            .images
            .iter()
            .map(|r| (&r.name, &r.scores))
            .chain([(&"mean".to_string(), &self.mean)])
        {
            write!(f, "{:width$}", row.0)?;
            for s in row.1 {
                write!(f, " {:>10}", s.to_string())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_rendering() {
        assert_eq!(Score(f64::INFINITY).to_string(), "inf");
        assert_eq!(Score(48.13080361).to_string(), "48.1308");
        assert_eq!(serde_json::to_string(&Score(f64::INFINITY)).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Score(1.5)).unwrap(), "1.5");
    }

    #[test]
    fn metric_names() {
        assert_eq!("PSNR".parse::<Metric>(), Ok(Metric::Psnr));
        assert_eq!("psnr-b".parse::<Metric>(), Ok(Metric::Psnrb));
        assert!("lpips".parse::<Metric>().is_err());
    }
}
