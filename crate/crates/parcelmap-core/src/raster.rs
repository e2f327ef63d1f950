//! The grid engine: multiband rasters, spectral index math, zonal statistics,
//! per-zone class proportions, and connected-component labeling with boundary
//! tracing.
//!
//! Cells are 64-bit floats addressed row-major from the top row. All
//! reductions accumulate in ascending cell-index order so results are
//! bit-stable across runs and worker counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PlanarPoint, SimplePolygon};
use crate::scheme::ClassId;

/// Default ceiling on grid size.
pub const MAX_CELLS: usize = 100_000_000;

/// Sentinel for "no class" in a [`ClassBand`].
pub const NODATA_CLASS: u16 = u16::MAX;

/// A georeferenced cell lattice. `origin_x`/`origin_y` locate the lower-left
/// corner; rows are stored top-down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ncols: usize,
    pub nrows: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl Grid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        origin_x: f64,
        origin_y: f64,
        cellsize: f64,
        nodata: f64,
    ) -> Result<Self> {
        Self::with_limit(ncols, nrows, origin_x, origin_y, cellsize, nodata, MAX_CELLS)
    }

    pub fn with_limit(
        ncols: usize,
        nrows: usize,
        origin_x: f64,
        origin_y: f64,
        cellsize: f64,
        nodata: f64,
        max_cells: usize,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidGrid("zero rows or columns".into()));
        }
        if !(cellsize > 0.0) || !cellsize.is_finite() {
            return Err(Error::InvalidGrid(format!("cellsize {cellsize} must be > 0")));
        }
        let cells = ncols
            .checked_mul(nrows)
            .ok_or(Error::GridTooLarge { cells: usize::MAX, limit: max_cells })?;
        if cells > max_cells {
            return Err(Error::GridTooLarge { cells, limit: max_cells });
        }
        Ok(Self { ncols, nrows, origin_x, origin_y, cellsize, nodata })
    }

    pub fn cells(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.nrows && col < self.ncols);
        row * self.ncols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.ncols, index % self.ncols)
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, index: usize) -> PlanarPoint {
        let (row, col) = self.row_col(index);
        PlanarPoint {
            x: self.origin_x + (col as f64 + 0.5) * self.cellsize,
            y: self.origin_y + (self.nrows - 1 - row) as f64 * self.cellsize
                + 0.5 * self.cellsize,
        }
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        let fx = (x - self.origin_x) / self.cellsize;
        let fy = (y - self.origin_y) / self.cellsize;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (col, row_up) = (fx as usize, fy as usize);
        if col >= self.ncols || row_up >= self.nrows {
            return None;
        }
        Some(self.index(self.nrows - 1 - row_up, col))
    }

    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.ncols as f64 * self.cellsize,
            self.origin_y + self.nrows as f64 * self.cellsize,
        )
    }
}

/// One raster layer on a grid. Every value is finite or equals the grid's
/// nodata sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    grid: Grid,
    values: Vec<f64>,
}

impl Band {
    pub fn filled(grid: Grid, value: f64) -> Self {
        let n = grid.cells();
        Self { grid, values: vec![value; n] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "value count {} does not match grid ({}x{})",
                values.len(),
                grid.ncols,
                grid.nrows
            )));
        }
        for &v in &values {
            if !v.is_finite() && v != grid.nodata {
                return Err(Error::InvalidGrid(format!("non-finite cell value {v}")));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }

    pub fn is_nodata(&self, value: f64) -> bool {
        value == self.grid.nodata
    }

    /// Min and max over non-nodata cells, if any exist.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut mm: Option<(f64, f64)> = None;
        for &v in &self.values {
            if self.is_nodata(v) {
                continue;
            }
            mm = Some(match mm {
                None => (v, v),
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
            });
        }
        mm
    }
}

/// Named spectral bands plus derived indices, all on one grid.
#[derive(Debug, Clone)]
pub struct MultibandRaster {
    grid: Grid,
    bands: BTreeMap<String, Band>,
}

/// The five source bands, in feature order.
pub const SPECTRAL_BANDS: [&str; 5] = ["RED", "GREEN", "BLUE", "NIR", "SWIR1"];
/// Source bands plus derived indices, in feature order.
pub const SPECTRAL_FEATURES: [&str; 7] = ["RED", "GREEN", "BLUE", "NIR", "SWIR1", "NDVI", "NDWI"];

impl MultibandRaster {
    pub fn new(grid: Grid) -> Self {
        Self { grid, bands: BTreeMap::new() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn insert(&mut self, name: &str, band: Band) -> Result<()> {
        if band.grid != self.grid {
            return Err(Error::GridMismatch(format!("band {name} on a different grid")));
        }
        self.bands.insert(name.to_string(), band);
        Ok(())
    }

    pub fn band(&self, name: &str) -> Result<&Band> {
        self.bands
            .get(name)
            .ok_or_else(|| Error::GridMismatch(format!("missing band {name}")))
    }

    pub fn band_names(&self) -> Vec<&str> {
        self.bands.keys().map(|s| s.as_str()).collect()
    }

    /// Compute and attach NDVI and NDWI from the source bands.
    pub fn derive_indices(&mut self) -> Result<()> {
        let ndvi = compute_ndvi(self.band("NIR")?, self.band("RED")?)?;
        let ndwi = compute_ndwi(self.band("GREEN")?, self.band("NIR")?)?;
        self.bands.insert("NDVI".into(), ndvi);
        self.bands.insert("NDWI".into(), ndwi);
        Ok(())
    }
}

/// Class ids (or nodata) per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBand {
    grid: Grid,
    values: Vec<u16>,
}

impl ClassBand {
    pub fn filled_nodata(grid: Grid) -> Self {
        let n = grid.cells();
        Self { grid, values: vec![NODATA_CLASS; n] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, index: usize) -> Option<ClassId> {
        let v = self.values[index];
        (v != NODATA_CLASS).then_some(ClassId(v))
    }

    pub fn set(&mut self, index: usize, class: Option<ClassId>) {
        self.values[index] = class.map_or(NODATA_CLASS, |c| c.0);
    }

    pub fn raw(&self) -> &[u16] {
        &self.values
    }

    /// View as a numeric band (ids as floats, nodata as the grid sentinel),
    /// for export in the band-file format.
    pub fn to_band(&self) -> Band {
        let nodata = self.grid.nodata;
        let values = self
            .values
            .iter()
            .map(|&v| if v == NODATA_CLASS { nodata } else { v as f64 })
            .collect();
        Band { grid: self.grid.clone(), values }
    }
}

fn normalized_difference(a: &Band, b: &Band) -> Result<Band> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("normalized difference inputs".into()));
    }
    let nodata = a.grid.nodata;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            if x == nodata || y == nodata {
                nodata
            } else if x + y == 0.0 {
                0.0
            } else {
                (x - y) / (x + y)
            }
        })
        .collect();
    Ok(Band { grid: a.grid.clone(), values })
}

/// NDVI = (NIR - RED) / (NIR + RED). Zero-denominator cells map to 0; nodata
/// propagates.
pub fn compute_ndvi(nir: &Band, red: &Band) -> Result<Band> {
    normalized_difference(nir, red)
}

/// NDWI = (GREEN - NIR) / (GREEN + NIR). Same degenerate handling as NDVI.
pub fn compute_ndwi(green: &Band, nir: &Band) -> Result<Band> {
    normalized_difference(green, nir)
}

/// Arithmetic mean over the non-nodata cells of `cells`, accumulated in
/// ascending cell-index order. `None` when every cell is nodata.
pub fn zonal_mean(band: &Band, cells: &[usize]) -> Result<Option<f64>> {
    if cells.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    let mut sum = 0.0;
    let mut count = 0usize;
    for &i in &sorted {
        if i >= band.values.len() {
            return Err(Error::CellOutOfRange { index: i, cells: band.values.len() });
        }
        let v = band.values[i];
        if !band.is_nodata(v) {
            sum += v;
            count += 1;
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Fraction of non-nodata cells carrying each class id. Fractions sum to 1
/// when any non-nodata cell exists.
pub fn class_proportions(
    class_band: &ClassBand,
    cells: &[usize],
) -> Result<BTreeMap<ClassId, f64>> {
    if cells.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    let mut counts: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut total = 0usize;
    for &i in &sorted {
        if i >= class_band.values.len() {
            return Err(Error::CellOutOfRange { index: i, cells: class_band.values.len() });
        }
        if let Some(c) = class_band.get(i) {
            *counts.entry(c).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(c, n)| (c, n as f64 / total as f64))
        .collect())
}

/// Connected components of the 1-cells of a binary mask.
#[derive(Debug, Clone)]
pub struct LabeledBand {
    grid: Grid,
    labels: Vec<u32>,
    count: u32,
}

impl LabeledBand {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    /// Cell indices of one component, ascending.
    pub fn component_cells(&self, component: u32) -> Result<Vec<usize>> {
        if component == 0 || component > self.count {
            return Err(Error::UnknownComponent(component));
        }
        Ok(self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == component)
            .map(|(i, _)| i)
            .collect())
    }
}

/// Label the 4-connected components of the mask's 1-cells. Labels start at 1
/// in raster-scan discovery order, so the result is independent of worker
/// count by construction.
pub fn connected_components(mask: &Band) -> Result<LabeledBand> {
    let grid = mask.grid.clone();
    let (ncols, nrows) = (grid.ncols, grid.nrows);
    let mut labels = vec![0u32; mask.values.len()];
    let mut next = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    for start in 0..mask.values.len() {
        if mask.values[start] != 1.0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / ncols, i % ncols);
            let mut visit = |j: usize| {
                if mask.values[j] == 1.0 && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - ncols);
            }
            if r + 1 < nrows {
                visit(i + ncols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < ncols {
                visit(i + 1);
            }
        }
    }
    Ok(LabeledBand { grid, labels, count: next })
}

/// Trace the cell-edge outline of one labeled component, holes included.
/// Exterior comes out counter-clockwise, holes clockwise, so the polygon's
/// area always equals the component's cell count times the cell area.
pub fn trace_boundary(labeled: &LabeledBand, component: u32) -> Result<SimplePolygon> {
    if component == 0 || component > self_count(labeled) {
        return Err(Error::UnknownComponent(component));
    }
    let grid = &labeled.grid;
    let (ncols, nrows) = (grid.ncols, grid.nrows);
    let inside = |r: isize, c: isize| -> bool {
        if r < 0 || c < 0 || r as usize >= nrows || c as usize >= ncols {
            return false;
        }
        labeled.labels[r as usize * ncols + c as usize] == component
    };

    // Directed boundary edges in corner coordinates (x right, y up from the
    // grid's lower-left corner), oriented with the component on the left.
    // Key: (corner, direction) so lookups are O(1) during chaining.
    use std::collections::HashMap;
    type Corner = (u32, u32);
    let mut outgoing: HashMap<Corner, Vec<(Corner, u8)>> = HashMap::new();
    let mut edge_count = 0usize;
    for r in 0..nrows as isize {
        for c in 0..ncols as isize {
            if !inside(r, c) {
                continue;
            }
            let (cx, by) = (c as u32, (nrows as isize - 1 - r) as u32);
            let mut push = |from: Corner, to: Corner, dir: u8| {
                outgoing.entry(from).or_default().push((to, dir));
                edge_count += 1;
            };
            // dir codes: 0=+x, 1=+y, 2=-x, 3=-y
            if !inside(r + 1, c) {
                push((cx, by), (cx + 1, by), 0); // south side, walking east
            }
            if !inside(r, c + 1) {
                push((cx + 1, by), (cx + 1, by + 1), 1); // east side, walking north
            }
            if !inside(r - 1, c) {
                push((cx + 1, by + 1), (cx, by + 1), 2); // north side, walking west
            }
            if !inside(r, c - 1) {
                push((cx, by + 1), (cx, by), 3); // west side, walking south
            }
        }
    }
    for v in outgoing.values_mut() {
        v.sort_unstable(); // deterministic iteration independent of hash order
    }

    // Chain edges into closed loops. At a corner where two cells of the
    // component touch diagonally there are two continuations; taking the
    // leftmost turn keeps each loop on one side of the pinch.
    let corner_point = |(cx, by): Corner| PlanarPoint {
        x: grid.origin_x + cx as f64 * grid.cellsize,
        y: grid.origin_y + by as f64 * grid.cellsize,
    };
    let mut rings: Vec<(f64, Vec<PlanarPoint>)> = Vec::new();
    let mut used = 0usize;
    // Deterministic loop starts: scan corners in sorted order.
    let mut starts: Vec<Corner> = outgoing.keys().copied().collect();
    starts.sort_unstable();
    for &start in &starts {
        loop {
            let first = {
                let out = outgoing.get_mut(&start).unwrap();
                match out.iter().position(|_| true) {
                    Some(_) if !out.is_empty() => out.remove(0),
                    _ => break,
                }
            };
            let mut ring = vec![start];
            let (mut at, mut dir) = first;
            while at != start {
                ring.push(at);
                let out = outgoing.get_mut(&at).expect("boundary edges form closed loops");
                // leftmost turn first: left, straight, right (never back)
                let prefer = [(dir + 1) % 4, dir, (dir + 3) % 4];
                let pick = prefer
                    .iter()
                    .find_map(|&d| out.iter().position(|&(_, ed)| ed == d))
                    .expect("open boundary chain");
                let (next, nd) = out.remove(pick);
                at = next;
                dir = nd;
            }
            used += ring.len();
            let merged = merge_collinear(&ring);
            let pts: Vec<PlanarPoint> = merged.into_iter().map(corner_point).collect();
            let area = signed_ring_area(&pts);
            rings.push((area, pts));
        }
    }
    debug_assert_eq!(used, edge_count);

    // Largest-magnitude ring is the exterior; the rest are holes.
    let (ext_idx, _) = rings
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.abs().partial_cmp(&b.1 .0.abs()).unwrap())
        .ok_or(Error::UnknownComponent(component))?;
    let exterior = rings.swap_remove(ext_idx).1;
    let holes: Vec<Vec<PlanarPoint>> = rings.into_iter().map(|(_, pts)| pts).collect();
    SimplePolygon::new(exterior, holes)
}

fn self_count(labeled: &LabeledBand) -> u32 {
    labeled.count
}

/// Drop corners that continue straight, keeping only direction changes.
fn merge_collinear(ring: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        let din = (cur.0 as i64 - prev.0 as i64, cur.1 as i64 - prev.1 as i64);
        let dout = (next.0 as i64 - cur.0 as i64, next.1 as i64 - cur.1 as i64);
        // axis-aligned unit steps: straight-through iff the sign pattern matches
        if din.0.signum() != dout.0.signum() || din.1.signum() != dout.1.signum() {
            out.push(cur);
        }
    }
    out
}

fn signed_ring_area(pts: &[PlanarPoint]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}
