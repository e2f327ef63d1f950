//! Text band files: a six-line header (ncols, nrows, xllcorner, yllcorner,
//! cellsize, NODATA_value) followed by row-major values from the top row,
//! nine significant digits each. A JSON manifest names the role of each band
//! file so a directory round-trips as a [`MultibandRaster`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Band, Grid, MultibandRaster};

use super::{parse_error, read_to_string};

pub fn write_band(path: &Path, band: &Band) -> Result<()> {
    let g = band.grid();
    let mut out = String::new();
    writeln!(out, "ncols {}", g.ncols).unwrap();
    writeln!(out, "nrows {}", g.nrows).unwrap();
    writeln!(out, "xllcorner {}", g.origin_x).unwrap();
    writeln!(out, "yllcorner {}", g.origin_y).unwrap();
    writeln!(out, "cellsize {}", g.cellsize).unwrap();
    writeln!(out, "NODATA_value {}", g.nodata).unwrap();
    for row in 0..g.nrows {
        let mut line = String::new();
        for col in 0..g.ncols {
            if col > 0 {
                line.push(' ');
            }
            write!(line, "{:.8e}", band.get(g.index(row, col))).unwrap();
        }
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_band(path: &Path) -> Result<Band> {
    let text = read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let mut header: BTreeMap<String, f64> = BTreeMap::new();
    for _ in 0..6 {
        let key = tokens
            .next()
            .ok_or_else(|| parse_error(path, "truncated header"))?
            .to_ascii_lowercase();
        let value: f64 = tokens
            .next()
            .ok_or_else(|| parse_error(path, format!("missing value for {key}")))?
            .parse()
            .map_err(|e| parse_error(path, format!("bad header value for {key}: {e}")))?;
        header.insert(key, value);
    }
    let field = |k: &str| {
        header
            .get(k)
            .copied()
            .ok_or_else(|| parse_error(path, format!("missing header field {k}")))
    };
    let grid = Grid::new(
        field("ncols")? as usize,
        field("nrows")? as usize,
        field("xllcorner")?,
        field("yllcorner")?,
        field("cellsize")?,
        field("nodata_value")?,
    )?;
    let mut values = Vec::with_capacity(grid.cells());
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|e| parse_error(path, format!("bad cell value {tok:?}: {e}")))?;
        values.push(v);
    }
    if values.len() != grid.cells() {
        return Err(parse_error(
            path,
            format!("expected {} cells, found {}", grid.cells(), values.len()),
        ));
    }
    Band::from_values(grid, values)
}

/// Names the band file carrying each role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RasterManifest {
    pub grid: Grid,
    pub bands: BTreeMap<String, String>,
}

/// Write all bands of a raster as `<role>.asc` plus `manifest.json` in `dir`.
pub fn write_raster(dir: &Path, raster: &MultibandRaster) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut bands = BTreeMap::new();
    for name in raster.band_names() {
        let file = format!("{}.asc", name.to_ascii_lowercase());
        write_band(&dir.join(&file), raster.band(name)?)?;
        bands.insert(name.to_string(), file);
    }
    let manifest = RasterManifest { grid: raster.grid().clone(), bands };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Load a raster directory written by [`write_raster`].
pub fn read_raster(dir: &Path) -> Result<MultibandRaster> {
    let manifest_path = dir.join("manifest.json");
    let manifest: RasterManifest = serde_json::from_str(&read_to_string(&manifest_path)?)
        .map_err(|e| parse_error(&manifest_path, e.to_string()))?;
    let mut raster = MultibandRaster::new(manifest.grid.clone());
    for (name, file) in &manifest.bands {
        let band = read_band(&dir.join(file))?;
        if band.grid() != &manifest.grid {
            return Err(Error::GridMismatch(format!(
                "band {name} grid differs from manifest grid"
            )));
        }
        raster.insert(name, band)?;
    }
    Ok(raster)
}
