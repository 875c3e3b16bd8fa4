//! On-disk dataset layout:
//!
//! ```text
//! <root>/paired/nir/<id>.png
//! <root>/paired/rgb/<id>.png
//! <root>/gray_only/rgb/<id>.png
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::image::{load_image, save_png};
use crate::data::sample::{Dataset, GraySample, PairedSample};
use crate::error::{Error, Result};

pub fn paired_nir_dir(root: &Path) -> PathBuf {
    root.join("paired").join("nir")
}

pub fn paired_rgb_dir(root: &Path) -> PathBuf {
    root.join("paired").join("rgb")
}

pub fn gray_only_dir(root: &Path) -> PathBuf {
    root.join("gray_only").join("rgb")
}

/// `stem -> path` for every `.png` in `dir`; an absent directory is empty.
pub fn list_pngs(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

/// Loads a dataset tree. Samples are ordered by id.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let nir = list_pngs(&paired_nir_dir(root))?;
    let rgb = list_pngs(&paired_rgb_dir(root))?;
    if let Some(id) = nir.keys().find(|k| !rgb.contains_key(*k)) {
        return Err(Error::Dataset(format!(
            "paired NIR image {id} has no RGB counterpart"
        )));
    }
    if let Some(id) = rgb.keys().find(|k| !nir.contains_key(*k)) {
        return Err(Error::Dataset(format!(
            "paired RGB image {id} has no NIR counterpart"
        )));
    }
    let paired = nir
        .iter()
        .map(|(id, p)| PairedSample::new(id.clone(), load_image(p)?, load_image(&rgb[id])?))
        .collect::<Result<Vec<_>>>()?;
    let gray_only = list_pngs(&gray_only_dir(root))?
        .iter()
        .map(|(id, p)| GraySample::new(id.clone(), load_image(p)?))
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset::new(paired, gray_only);
    if ds.is_empty() {
        return Err(Error::Dataset(format!(
            "{} contains no images",
            root.display()
        )));
    }
    Ok(ds)
}

pub fn write_dataset(root: &Path, ds: &Dataset) -> Result<()> {
    for s in &ds.paired {
        save_png(
            s.nir(),
            &paired_nir_dir(root).join(format!("{}.png", s.id())),
        )?;
        save_png(
            s.rgb(),
            &paired_rgb_dir(root).join(format!("{}.png", s.id())),
        )?;
    }
    for s in &ds.gray_only {
        save_png(
            s.rgb(),
            &gray_only_dir(root).join(format!("{}.png", s.id())),
        )?;
    }
    Ok(())
}
