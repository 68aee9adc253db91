//! Fat-mask slice ingestion.
//!
//! Ground-truth masks encode each fat class as a color: red epicardial,
//! green mediastinal, blue pericardium, grey other fat, black background.
//! Each slice becomes a [`SliceCounts`] tally. Counts can be rescaled to a
//! common in-plane pixel spacing and converted to physical volumes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FatClass {
    Epicardial,
    Mediastinal,
    Pericardium,
    OtherFat,
    Background,
}

impl FatClass {
    /// All classes in tie-breaking order.
    pub const ALL: [FatClass; 5] = [
        FatClass::Epicardial,
        FatClass::Mediastinal,
        FatClass::Pericardium,
        FatClass::OtherFat,
        FatClass::Background,
    ];

    pub fn canonical_rgb(self) -> [u8; 3] {
        match self {
            FatClass::Epicardial => [255, 0, 0],
            FatClass::Mediastinal => [0, 255, 0],
            FatClass::Pericardium => [0, 0, 255],
            FatClass::OtherFat => [128, 128, 128],
            FatClass::Background => [0, 0, 0],
        }
    }

    /// Dataset column holding this class's count.
    pub fn column(self) -> &'static str {
        match self {
            FatClass::Epicardial => "red",
            FatClass::Mediastinal => "green",
            FatClass::Pericardium => "blue",
            FatClass::OtherFat => "grey",
            FatClass::Background => "black",
        }
    }
}

/// Nearest canonical color by Euclidean RGB distance; ties go to the
/// class listed first in [`FatClass::ALL`].
pub fn classify_pixel(rgb: [u8; 3]) -> FatClass {
    let mut best = FatClass::ALL[0];
    let mut best_d = u32::MAX;
    for class in FatClass::ALL {
        let c = class.canonical_rgb();
        let d: u32 = (0..3)
            .map(|i| {
                let diff = rgb[i] as i32 - c[i] as i32;
                (diff * diff) as u32
            })
            .sum();
        if d < best_d {
            best_d = d;
            best = class;
        }
    }
    best
}

/// Physical voxel size in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelSpacing {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl VoxelSpacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        for (name, v) in [("dx", dx), ("dy", dy), ("dz", dz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpacing(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(VoxelSpacing { dx, dy, dz })
    }

    pub fn unit() -> Self {
        VoxelSpacing {
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
        }
    }

    /// Parses `dx,dy,dz`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidSpacing(format!(
                "expected dx,dy,dz but got '{s}'"
            )));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidSpacing(format!("'{p}' is not a number")))?;
        }
        VoxelSpacing::new(v[0], v[1], v[2])
    }
}

/// Per-slice class tallies plus the slice's position in its scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCounts {
    pub patient_id: String,
    /// 1-based, head to feet.
    pub slice_index: u32,
    pub images_qnt: u32,
    pub red: f64,
    pub green: f64,
    pub blue: f64,
    pub grey: f64,
    pub black: f64,
    pub spacing: VoxelSpacing,
}

impl SliceCounts {
    pub fn count(&self, class: FatClass) -> f64 {
        match class {
            FatClass::Epicardial => self.red,
            FatClass::Mediastinal => self.green,
            FatClass::Pericardium => self.blue,
            FatClass::OtherFat => self.grey,
            FatClass::Background => self.black,
        }
    }

    fn count_mut(&mut self, class: FatClass) -> &mut f64 {
        match class {
            FatClass::Epicardial => &mut self.red,
            FatClass::Mediastinal => &mut self.green,
            FatClass::Pericardium => &mut self.blue,
            FatClass::OtherFat => &mut self.grey,
            FatClass::Background => &mut self.black,
        }
    }

    pub fn total(&self) -> f64 {
        self.red + self.green + self.blue + self.grey + self.black
    }
}

/// Identifying metadata attached to one slice image.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeta {
    pub patient_id: String,
    pub slice_index: u32,
    pub images_qnt: u32,
    pub spacing: VoxelSpacing,
}

impl SliceMeta {
    fn validate(&self) -> Result<()> {
        if self.slice_index < 1 || self.slice_index > self.images_qnt {
            return Err(Error::InvalidMetadata(format!(
                "patient {}: slice_index {} outside 1..={}",
                self.patient_id, self.slice_index, self.images_qnt
            )));
        }
        VoxelSpacing::new(self.spacing.dx, self.spacing.dy, self.spacing.dz)?;
        Ok(())
    }
}

/// An RGB mask image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl MaskImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() as u64 != width as u64 * height as u64 {
            return Err(Error::InvalidImage(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width as u64 * height as u64,
                pixels.len()
            )));
        }
        Ok(MaskImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        MaskImage {
            width,
            height,
            pixels,
        }
    }

    /// Decodes a PNG; RGBA alpha and grayscale are accepted and converted.
    pub fn read_png(path: &Path) -> Result<Self> {
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::Io(e).at(path))?
            .with_guessed_format()
            .map_err(|e| Error::Io(e).at(path))?
            .decode()
            .map_err(|e| Error::InvalidImage(e.to_string()).at(path))?
            .into_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        MaskImage::new(w, h, pixels)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf = image::RgbImage::from_raw(self.width, self.height, flat)
            .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
        buf.save(path)
            .map_err(|e| Error::InvalidImage(e.to_string()).at(path))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

pub fn count_slice(image: &MaskImage, meta: &SliceMeta) -> Result<SliceCounts> {
    if image.pixels.is_empty() {
        return Err(Error::InvalidImage("image has no pixels".into()));
    }
    meta.validate()?;
    let mut tally = [0u64; 5];
    for &px in &image.pixels {
        tally[classify_pixel(px) as usize] += 1;
    }
    let mut counts = SliceCounts {
        patient_id: meta.patient_id.clone(),
        slice_index: meta.slice_index,
        images_qnt: meta.images_qnt,
        red: 0.0,
        green: 0.0,
        blue: 0.0,
        grey: 0.0,
        black: 0.0,
        spacing: meta.spacing,
    };
    for class in FatClass::ALL {
        *counts.count_mut(class) = tally[class as usize] as f64;
    }
    Ok(counts)
}

/// Rescales counts to equivalent pixel counts at `target` mm per pixel
/// in-plane. Slice thickness is carried through unchanged.
pub fn standardize_counts(c: &SliceCounts, target: f64) -> Result<SliceCounts> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidSpacing(format!(
            "target spacing {target} must be > 0"
        )));
    }
    let scale = (c.spacing.dx * c.spacing.dy) / (target * target);
    let mut out = c.clone();
    for class in FatClass::ALL {
        *out.count_mut(class) *= scale;
    }
    out.spacing = VoxelSpacing {
        dx: target,
        dy: target,
        dz: c.spacing.dz,
    };
    Ok(out)
}

/// Physical volume in mm³ of `count` voxels.
pub fn counts_to_volume(count: f64, spacing: &VoxelSpacing) -> Result<f64> {
    if !(count.is_finite() && count >= 0.0) {
        return Err(Error::InvalidCount(count));
    }
    Ok(count * spacing.dx * spacing.dy * spacing.dz)
}

/// One row of the per-patient sidecar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanMetadata {
    pub patient_id: String,
    pub images_qnt: u32,
    pub spacing: VoxelSpacing,
}

pub const METADATA_COLUMNS: [&str; 5] = ["patient_id", "images_qnt", "dx_mm", "dy_mm", "dz_mm"];

/// Reads a metadata CSV (`patient_id, images_qnt, dx_mm, dy_mm, dz_mm`).
/// A file may hold rows for one or several patients.
pub fn read_metadata(path: &Path) -> Result<Vec<ScanMetadata>> {
    let file = fs::File::open(path).map_err(|e| Error::Io(e).at(path))?;
    read_metadata_from(file).map_err(|e| e.at(path))
}

pub fn read_metadata_from<R: std::io::Read>(reader: R) -> Result<Vec<ScanMetadata>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != METADATA_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            column: "header".into(),
            message: format!(
                "expected columns {} but found {}",
                METADATA_COLUMNS.join(","),
                cols.join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| Error::Parse {
                    line,
                    column: METADATA_COLUMNS[i].into(),
                    message: format!("'{}' is not a number", rec.get(i).unwrap_or("")),
                })
        };
        let images_qnt = rec
            .get(1)
            .unwrap_or("")
            .parse::<u32>()
            .map_err(|_| Error::Parse {
                line,
                column: "images_qnt".into(),
                message: format!("'{}' is not a positive integer", rec.get(1).unwrap_or("")),
            })?;
        let spacing = VoxelSpacing::new(field(2)?, field(3)?, field(4)?)?;
        out.push(ScanMetadata {
            patient_id: rec.get(0).unwrap_or("").to_string(),
            images_qnt,
            spacing,
        });
    }
    Ok(out)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            column: "-".into(),
            message: format!("{other:?}"),
        },
    }
}

/// Name of the per-patient metadata file looked up inside each patient directory.
pub const PATIENT_METADATA_FILE: &str = "metadata.csv";

/// Walks `<root>/<patient_id>/<slice_index>.png`, counts every slice and
/// standardizes it to `target_mm`.
///
/// Metadata comes from `metadata` when given, otherwise from
/// `<root>/<patient_id>/metadata.csv`. Output is ordered by patient id then
/// slice index.
pub fn ingest_directory(
    root: &Path,
    metadata: Option<&Path>,
    target_mm: f64,
) -> Result<Vec<SliceCounts>> {
    let mut table: BTreeMap<String, ScanMetadata> = BTreeMap::new();
    if let Some(path) = metadata {
        for m in read_metadata(path)? {
            table.insert(m.patient_id.clone(), m);
        }
    }

    let mut patients: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::Io(e).at(root))? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            patients.push((
                entry.file_name().to_string_lossy().into_owned(),
                entry.path(),
            ));
        }
    }
    patients.sort();

    let mut jobs: Vec<(PathBuf, SliceMeta)> = Vec::new();
    for (pid, dir) in &patients {
        let meta = match table.get(pid) {
            Some(m) => m.clone(),
            None => {
                let local = dir.join(PATIENT_METADATA_FILE);
                if !local.exists() {
                    return Err(Error::MissingMetadata(pid.clone()));
                }
                read_metadata(&local)?
                    .into_iter()
                    .find(|m| &m.patient_id == pid)
                    .ok_or_else(|| Error::MissingMetadata(pid.clone()))?
            }
        };
        let mut slices: Vec<(u32, PathBuf)> = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::Io(e).at(dir))? {
            let path = entry?.path();
            let is_png = path
                .extension()
                .map(|e| e.eq_ignore_ascii_case("png"))
                .unwrap_or(false);
            if !is_png {
                continue;
            }
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let index: u32 = stem.parse().map_err(|_| {
                Error::InvalidMetadata(format!("slice file name '{stem}' is not a decimal index"))
                    .at(&path)
            })?;
            slices.push((index, path));
        }
        slices.sort();
        for (index, path) in slices {
            jobs.push((
                path,
                SliceMeta {
                    patient_id: pid.clone(),
                    slice_index: index,
                    images_qnt: meta.images_qnt,
                    spacing: meta.spacing,
                },
            ));
        }
    }

    jobs.par_iter()
        .map(|(path, meta)| {
            let img = MaskImage::read_png(path)?;
            let counts = count_slice(&img, meta).map_err(|e| e.at(path))?;
            standardize_counts(&counts, target_mm)
        })
        .collect()
}
