//! Land-parcel generation: the admin area minus widened roads and water,
//! split into 4-connected components. Each parcel carries its cell set,
//! traced outline, and area through the rest of the pipeline.

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::geom::{rasterize_polygons, rasterize_roads, RoadPolyline, SimplePolygon};
use crate::raster::{connected_components, trace_boundary, Band, Grid, MultibandRaster};
use crate::raster::{zonal_mean, SPECTRAL_FEATURES};
use crate::scheme::{CategoryScheme, ClassId, Level};

/// A land unit assumed functionally homogeneous.
#[derive(Debug, Clone, PartialEq)]
pub struct Parcel {
    pub id: u32,
    /// Ascending cell indices.
    pub cells: Vec<usize>,
    pub outline: SimplePolygon,
    /// Square meters: cell count times cell area.
    pub area: f64,
    pub level0: Option<ClassId>,
    pub level1: Option<ClassId>,
    pub level2: Option<ClassId>,
    pub features: Option<FeatureVector>,
}

impl Parcel {
    /// Set the level-2 label and roll it up to levels 1 and 0.
    pub fn assign_l2(&mut self, scheme: &CategoryScheme, l2: ClassId) -> Result<()> {
        self.level2 = Some(l2);
        self.level1 = Some(scheme.ancestor_at(l2, Level::L1)?.id);
        self.level0 = Some(scheme.ancestor_at(l2, Level::L0)?.id);
        Ok(())
    }
}

/// Compose the parcel mask (admin minus roads minus water) and label its
/// 4-connected components. Components smaller than `min_cells` are dropped;
/// ids run 1.. over the survivors in raster-scan discovery order.
pub fn generate_parcels(
    admin: &SimplePolygon,
    roads: &[RoadPolyline],
    water: &[SimplePolygon],
    grid: &Grid,
    min_cells: usize,
) -> Result<Vec<Parcel>> {
    let mask = parcel_mask(admin, roads, water, grid);
    if mask.values().iter().all(|&v| v != 1.0) {
        return Err(Error::EmptyParcelMask);
    }
    let labeled = connected_components(&mask)?;
    let cell_area = grid.cellsize * grid.cellsize;
    let mut parcels = Vec::new();
    let mut next_id = 0u32;
    for component in 1..=labeled.count() {
        let cells = labeled.component_cells(component)?;
        if cells.len() < min_cells.max(1) {
            continue;
        }
        next_id += 1;
        let outline = trace_boundary(&labeled, component)?;
        parcels.push(Parcel {
            id: next_id,
            area: cells.len() as f64 * cell_area,
            cells,
            outline,
            level0: None,
            level1: None,
            level2: None,
            features: None,
        });
    }
    if parcels.is_empty() {
        return Err(Error::EmptyParcelMask);
    }
    Ok(parcels)
}

/// The composed binary mask: inside admin, not road space, not water space.
pub fn parcel_mask(
    admin: &SimplePolygon,
    roads: &[RoadPolyline],
    water: &[SimplePolygon],
    grid: &Grid,
) -> Band {
    let admin_mask = rasterize_polygons(std::slice::from_ref(admin), grid);
    let road_mask = rasterize_roads(roads, grid);
    let water_mask = rasterize_polygons(water, grid);
    let mut mask = Band::filled(grid.clone(), 0.0);
    for i in 0..grid.cells() {
        if admin_mask.get(i) == 1.0 && road_mask.get(i) != 1.0 && water_mask.get(i) != 1.0 {
            mask.set(i, 1.0);
        }
    }
    mask
}

/// Zonal means over the parcel in the fixed order RED, GREEN, BLUE, NIR,
/// SWIR1, NDVI, NDWI. A parcel with no raster coverage at all is an error.
pub fn parcel_spectral_features(parcel: &Parcel, raster: &MultibandRaster) -> Result<[f64; 7]> {
    let mut out = [0.0; 7];
    for (k, name) in SPECTRAL_FEATURES.iter().enumerate() {
        let band = raster.band(name)?;
        out[k] = zonal_mean(band, &parcel.cells)?
            .ok_or(Error::ParcelOutsideRaster(parcel.id))?;
    }
    Ok(out)
}
