//! On-disk dataset layout: a directory holding `manifest.json`, the pixel,
//! endmember and abundance matrices, and `pure_pixels.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sdsomp_core::model::{load_matrix, save_matrix, EndmemberMatrix, MatrixFormat};
use sdsomp_core::{AbundanceMatrix, IndexSet, MixingInstance, PixelMatrix};

use crate::failure::{usage, Failure};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Files {
    pub pixels: String,
    pub endmembers: String,
    pub abundances: String,
    pub pure_pixels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// `"inf"` for noiseless scenes.
    pub snr_db: String,
    pub purity: f64,
    pub n_endmembers: usize,
    pub bands: usize,
    pub pixels: usize,
    pub pure_repeats: usize,
    pub endmember_source: String,
    /// `max_n ||v[n]||_2` of the drawn noise.
    pub noise_bound_true: f64,
    pub files: Files,
}

#[derive(Debug, Serialize, Deserialize)]
struct PureRow {
    index: usize,
    endmember: usize,
}

pub fn write_dataset(
    dir: &Path,
    instance: &MixingInstance,
    manifest_seed: u64,
    endmember_source: &str,
    pure_repeats: usize,
    format: MatrixFormat,
) -> Result<Manifest, Failure> {
    fs::create_dir_all(dir)?;
    let ext = format.extension();
    let files = Files {
        pixels: format!("pixels.{ext}"),
        endmembers: format!("endmembers.{ext}"),
        abundances: format!("abundances.{ext}"),
        pure_pixels: "pure_pixels.csv".into(),
    };
    save_matrix(instance.pixels.data(), &dir.join(&files.pixels), format)?;
    save_matrix(instance.endmembers.data(), &dir.join(&files.endmembers), format)?;
    save_matrix(instance.abundances.data(), &dir.join(&files.abundances), format)?;

    let mut w = csv::Writer::from_path(dir.join(&files.pure_pixels))?;
    for (index, &endmember) in instance.pure_pixel_set.iter().zip(&instance.pure_pixel_owner) {
        w.serialize(PureRow { index, endmember })?;
    }
    w.flush()?;

    let manifest = Manifest {
        seed: manifest_seed,
        snr_db: crate::args::fmt_extended(instance.snr_db),
        purity: instance.purity,
        n_endmembers: instance.endmember_count(),
        bands: instance.pixels.band_count(),
        pixels: instance.pixels.pixel_count(),
        pure_repeats,
        endmember_source: endmember_source.into(),
        noise_bound_true: instance.noise_bound_true,
        files,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, Failure> {
    let text = fs::read_to_string(dir.join(MANIFEST))
        .map_err(|e| usage(format!("{}: {e}", dir.join(MANIFEST).display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn load(path: &Path) -> Result<PixelMatrix, Failure> {
    load_matrix(path, MatrixFormat::from_path(path))
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Load a dataset directory with its ground truth.
pub fn read_dataset(dir: &Path) -> Result<(Manifest, MixingInstance), Failure> {
    let manifest = read_manifest(dir)?;
    let pixels = load(&dir.join(&manifest.files.pixels))?;
    let endmembers = EndmemberMatrix::new(load(&dir.join(&manifest.files.endmembers))?.into_inner())?;
    let abundances = AbundanceMatrix::new(load(&dir.join(&manifest.files.abundances))?.into_inner())?;
    let mut rdr = csv::Reader::from_path(dir.join(&manifest.files.pure_pixels))?;
    let mut pure = Vec::new();
    for row in rdr.deserialize::<PureRow>() {
        pure.push(row?.index);
    }
    let snr = crate::args::parse_extended(&manifest.snr_db).map_err(usage)?;
    let instance = MixingInstance::from_parts(pixels, endmembers, abundances, IndexSet::from_vec(pure)?, snr)?;
    Ok((manifest, instance))
}

/// Pixels from either a dataset directory (with ground truth) or a bare
/// matrix file.
pub enum Input {
    Dataset {
        dir: PathBuf,
        manifest: Box<Manifest>,
        instance: Box<MixingInstance>,
    },
    Matrix {
        path: PathBuf,
        pixels: PixelMatrix,
    },
}

impl Input {
    pub fn open(data: Option<&Path>, pixels: Option<&Path>) -> Result<Self, Failure> {
        match (data, pixels) {
            (Some(dir), None) => {
                let (manifest, instance) = read_dataset(dir)?;
                Ok(Input::Dataset {
                    dir: dir.to_path_buf(),
                    manifest: Box::new(manifest),
                    instance: Box::new(instance),
                })
            }
            (None, Some(path)) => Ok(Input::Matrix {
                path: path.to_path_buf(),
                pixels: load(path)?,
            }),
            _ => Err(usage("give exactly one of --data DIR or --pixels FILE")),
        }
    }

    pub fn pixels(&self) -> &PixelMatrix {
        match self {
            Input::Dataset { instance, .. } => &instance.pixels,
            Input::Matrix { pixels, .. } => pixels,
        }
    }

    pub fn instance(&self) -> Option<&MixingInstance> {
        match self {
            Input::Dataset { instance, .. } => Some(instance),
            Input::Matrix { .. } => None,
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            Input::Dataset { dir, manifest, .. } => serde_json::json!({
                "dataset": dir.display().to_string(),
                "manifest": manifest,
            }),
            Input::Matrix { path, .. } => serde_json::json!({
                "pixels": path.display().to_string(),
            }),
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Write rows as CSV (header from field names) or as a JSON array.
pub fn write_table<T: Serialize>(
    path_stem: &Path,
    rows: &[T],
    format: crate::args::TableFormat,
) -> Result<PathBuf, Failure> {
    match format {
        crate::args::TableFormat::Csv => {
            let path = path_stem.with_extension("csv");
            let mut w = csv::Writer::from_path(&path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(path)
        }
        crate::args::TableFormat::Json => {
            let path = path_stem.with_extension("json");
            write_json(&path, rows)?;
            Ok(path)
        }
    }
}
