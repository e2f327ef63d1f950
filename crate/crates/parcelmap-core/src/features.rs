//! Socio-economic features: POI kernel-density surfaces with min-max
//! normalization and per-parcel AOI area proportions, assembled together with
//! spectral means into parcel feature vectors.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{rasterize_polygons_impl, PlanarPoint, SimplePolygon};
use crate::raster::{zonal_mean, Band, Grid};
use crate::scheme::{CategoryScheme, ClassId, Level};

/// A point-of-interest with a built-up-subtree category.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiPoint {
    pub location: PlanarPoint,
    pub category: ClassId,
}

/// An area-of-interest footprint with a built-up-subtree category.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiFootprint {
    pub footprint: SimplePolygon,
    pub category: ClassId,
}

/// Ordered feature names; identical across every sample of one run.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeatureSchema(pub Vec<String>);

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

/// One sample's ordered numeric features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema: Arc<FeatureSchema>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: Arc<FeatureSchema>, values: Vec<f64>) -> Result<Self> {
        if schema.len() != values.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} features", schema.len()),
                got: format!("{} values", values.len()),
            });
        }
        Ok(Self { schema, values })
    }
}

/// Quartic-kernel density of one category's points: each cell center within
/// `bandwidth` of a point receives `(3/(pi h^2)) * (1 - (d/h)^2)^2`, summed in
/// point order.
pub fn kernel_density(points: &[PoiPoint], grid: &Grid, bandwidth: f64) -> Result<Band> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    let mut out = Band::filled(grid.clone(), 0.0);
    let h2 = bandwidth * bandwidth;
    let norm = 3.0 / (std::f64::consts::PI * h2);
    let cs = grid.cellsize;
    for p in points {
        // candidate window around the point, padded one cell
        let c0 = (((p.location.x - bandwidth - grid.origin_x) / cs).floor() as i64 - 1).max(0);
        let c1 = (((p.location.x + bandwidth - grid.origin_x) / cs).ceil() as i64 + 1)
            .min(grid.ncols as i64 - 1);
        let u0 = (((p.location.y - bandwidth - grid.origin_y) / cs).floor() as i64 - 1).max(0);
        let u1 = (((p.location.y + bandwidth - grid.origin_y) / cs).ceil() as i64 + 1)
            .min(grid.nrows as i64 - 1);
        if c1 < c0 || u1 < u0 {
            continue;
        }
        for up in u0..=u1 {
            let row = grid.nrows - 1 - up as usize;
            for col in c0..=c1 {
                let idx = grid.index(row, col as usize);
                let center = grid.cell_center(idx);
                let d2 = (center.x - p.location.x).powi(2) + (center.y - p.location.y).powi(2);
                if d2 <= h2 {
                    let w = 1.0 - d2 / h2;
                    out.set(idx, out.get(idx) + norm * w * w);
                }
            }
        }
    }
    Ok(out)
}

/// Min-max normalize a density surface to [0, 1] using its own extremes over
/// non-nodata cells. A constant surface maps to all zeros.
pub fn normalize_density(band: &Band) -> Band {
    let mut out = band.clone();
    let Some((lo, hi)) = band.min_max() else {
        return out;
    };
    let span = hi - lo;
    for i in 0..band.values().len() {
        let v = band.get(i);
        if band.is_nodata(v) {
            continue;
        }
        out.set(i, if span == 0.0 { 0.0 } else { (v - lo) / span });
    }
    out
}

/// Per-category occupancy masks for a set of AOI footprints: cell marked 1
/// iff its center lies inside any footprint of that category.
pub fn aoi_category_masks(aois: &[AoiFootprint], grid: &Grid) -> BTreeMap<ClassId, Band> {
    let mut by_cat: BTreeMap<ClassId, Vec<&SimplePolygon>> = BTreeMap::new();
    for a in aois {
        by_cat.entry(a.category).or_default().push(&a.footprint);
    }
    by_cat
        .into_iter()
        .map(|(cat, polys)| (cat, rasterize_polygons_impl(polys.into_iter(), grid)))
        .collect()
}

/// Area proportion of each AOI category within a parcel: covered parcel cells
/// over total parcel cells. Cell coverage rather than vector intersection, so
/// overlapping footprints never double count and every value stays in [0, 1].
pub fn aoi_proportions(
    aois: &[AoiFootprint],
    parcel_cells: &[usize],
    grid: &Grid,
) -> Result<BTreeMap<ClassId, f64>> {
    let masks = aoi_category_masks(aois, grid);
    aoi_proportions_from_masks(&masks, parcel_cells)
}

/// Same as [`aoi_proportions`], reusing precomputed category masks.
pub fn aoi_proportions_from_masks(
    masks: &BTreeMap<ClassId, Band>,
    parcel_cells: &[usize],
) -> Result<BTreeMap<ClassId, f64>> {
    if parcel_cells.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let total = parcel_cells.len() as f64;
    let mut out = BTreeMap::new();
    for (&cat, mask) in masks {
        let mut covered = 0usize;
        for &i in parcel_cells {
            if i >= mask.values().len() {
                return Err(Error::CellOutOfRange { index: i, cells: mask.values().len() });
            }
            if mask.get(i) == 1.0 {
                covered += 1;
            }
        }
        out.insert(cat, covered as f64 / total);
    }
    Ok(out)
}

/// Mean of a normalized density surface over a parcel's cells.
pub fn poi_density_feature(parcel_cells: &[usize], normalized: &Band) -> Result<f64> {
    Ok(zonal_mean(normalized, parcel_cells)?.unwrap_or(0.0))
}

/// Feature names in assembly order: 7 spectral means, POI densities per
/// category in scheme id order, then (when enabled) AOI proportions likewise.
pub fn feature_schema(
    categories: &[ClassId],
    include_aoi: bool,
    scheme: &CategoryScheme,
) -> Result<FeatureSchema> {
    let mut names: Vec<String> = crate::raster::SPECTRAL_FEATURES
        .iter()
        .map(|s| s.to_string())
        .collect();
    for &c in categories {
        names.push(format!("poi_den_{}", scheme.class(c)?.code));
    }
    if include_aoi {
        for &c in categories {
            names.push(format!("aoi_prop_{}", scheme.class(c)?.code));
        }
    }
    Ok(FeatureSchema(names))
}

/// The feature categories used for POI/AOI features: the built-up subtree at
/// the requested level, in id order.
pub fn feature_categories(scheme: &CategoryScheme, level: Level) -> Vec<ClassId> {
    scheme
        .subtree_at(crate::scheme::BUR, level)
        .into_iter()
        .map(|c| c.id)
        .collect()
}

/// Assemble one parcel's feature vector. Categories absent from the poi/aoi
/// maps contribute zero.
pub fn assemble_parcel_features(
    schema: &Arc<FeatureSchema>,
    spectral: &[f64; 7],
    poi: &BTreeMap<ClassId, f64>,
    aoi: &BTreeMap<ClassId, f64>,
    categories: &[ClassId],
    include_aoi: bool,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(schema.len());
    values.extend_from_slice(spectral);
    for c in categories {
        values.push(*poi.get(c).unwrap_or(&0.0));
    }
    if include_aoi {
        for c in categories {
            values.push(*aoi.get(c).unwrap_or(&0.0));
        }
    }
    FeatureVector::new(Arc::clone(schema), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::default_scheme;

    fn grid(ncols: usize, nrows: usize, cs: f64) -> Grid {
        Grid::new(ncols, nrows, 0.0, 0.0, cs, -9999.0).unwrap()
    }

    fn poi(x: f64, y: f64) -> PoiPoint {
        PoiPoint { location: PlanarPoint::new(x, y), category: ClassId(17) }
    }

    #[test]
    fn kde_empty() {
        let g = grid(5, 5, 10.0);
        let b = kernel_density(&[], &g, 100.0).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kde_point_at_center() {
        let g = grid(5, 5, 10.0);
        let h = 20.0;
        // center of cell (row 2, col 2) is (25, 25)
        let b = kernel_density(&[poi(25.0, 25.0)], &g, h).unwrap();
        let expect = 3.0 / (std::f64::consts::PI * h * h);
        assert!((b.get(g.index(2, 2)) - expect).abs() < 1e-12);
    }

    #[test]
    fn kde_at_half_bandwidth() {
        let g = grid(5, 5, 10.0);
        let h = 20.0;
        let b = kernel_density(&[poi(25.0, 25.0)], &g, h).unwrap();
        // neighbor center 10 m away = h/2: kernel factor (1 - 0.25)^2
        let expect = 3.0 / (std::f64::consts::PI * h * h) * 0.5625;
        assert!((b.get(g.index(2, 3)) - expect).abs() < 1e-12);
        // beyond the bandwidth: zero
        assert_eq!(b.get(g.index(2, 0)), 0.0);
    }

    #[test]
    fn kde_rejects_bad_bandwidth() {
        let g = grid(2, 2, 10.0);
        assert!(kernel_density(&[], &g, 0.0).is_err());
        assert!(kernel_density(&[], &g, -5.0).is_err());
    }

    #[test]
    fn kde_additive_over_point_sets() {
        let g = grid(8, 8, 10.0);
        let p1 = vec![poi(15.0, 25.0), poi(71.0, 12.0)];
        let p2 = vec![poi(44.0, 60.0)];
        let mut all = p1.clone();
        all.extend(p2.clone());
        let da = kernel_density(&all, &g, 35.0).unwrap();
        let d1 = kernel_density(&p1, &g, 35.0).unwrap();
        let d2 = kernel_density(&p2, &g, 35.0).unwrap();
        for i in 0..g.cells() {
            assert!((da.get(i) - (d1.get(i) + d2.get(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_cases() {
        let g = grid(3, 1, 10.0);
        let b = Band::from_values(g.clone(), vec![0.0, 5.0, 10.0]).unwrap();
        assert_eq!(normalize_density(&b).values(), &[0.0, 0.5, 1.0]);

        let b = Band::from_values(g.clone(), vec![7.0, 7.0, 7.0]).unwrap();
        assert_eq!(normalize_density(&b).values(), &[0.0, 0.0, 0.0]);

        let g2 = grid(2, 1, 10.0);
        let b = Band::from_values(g2, vec![2.0, 4.0]).unwrap();
        assert_eq!(normalize_density(&b).values(), &[0.0, 1.0]);
    }

    #[test]
    fn normalize_attains_bounds_when_nonconstant() {
        let g = grid(4, 1, 10.0);
        let b = Band::from_values(g, vec![3.0, -1.0, 2.0, 8.5]).unwrap();
        let n = normalize_density(&b);
        assert!(n.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(n.values().contains(&0.0));
        assert!(n.values().contains(&1.0));
    }

    fn aoi_rect(x0: f64, y0: f64, x1: f64, y1: f64, cat: u16) -> AoiFootprint {
        AoiFootprint {
            footprint: SimplePolygon::rectangle(x0, y0, x1, y1).unwrap(),
            category: ClassId(cat),
        }
    }

    #[test]
    fn aoi_proportions_cases() {
        let g = grid(10, 10, 10.0);
        let cells: Vec<usize> = (0..100).collect();

        let p = aoi_proportions(&[], &cells, &g).unwrap();
        assert!(p.is_empty());

        // bottom half of the grid
        let p = aoi_proportions(&[aoi_rect(0.0, 0.0, 100.0, 50.0, 17)], &cells, &g).unwrap();
        assert_eq!(p[&ClassId(17)], 0.5);

        // 30 + 20 disjoint cells of the same category
        let a = aoi_rect(0.0, 0.0, 100.0, 30.0, 17); // 3 rows = 30 cells
        let b = aoi_rect(0.0, 80.0, 100.0, 100.0, 17); // 2 rows = 20 cells
        let p = aoi_proportions(&[a, b], &cells, &g).unwrap();
        assert_eq!(p[&ClassId(17)], 0.5);
    }

    #[test]
    fn aoi_overlap_not_double_counted() {
        let g = grid(10, 10, 10.0);
        let cells: Vec<usize> = (0..100).collect();
        let a = aoi_rect(0.0, 0.0, 100.0, 50.0, 17);
        let b = aoi_rect(0.0, 20.0, 100.0, 50.0, 17); // fully inside a's rows
        let p = aoi_proportions(&[a, b], &cells, &g).unwrap();
        assert_eq!(p[&ClassId(17)], 0.5);
    }

    #[test]
    fn aoi_monotone_and_split_invariant() {
        let g = grid(10, 10, 10.0);
        let cells: Vec<usize> = (0..100).collect();
        let small = aoi_proportions(&[aoi_rect(0.0, 0.0, 50.0, 50.0, 17)], &cells, &g).unwrap();
        let grown = aoi_proportions(&[aoi_rect(0.0, 0.0, 50.0, 80.0, 17)], &cells, &g).unwrap();
        assert!(grown[&ClassId(17)] >= small[&ClassId(17)]);

        let whole = aoi_proportions(&[aoi_rect(0.0, 0.0, 100.0, 40.0, 17)], &cells, &g).unwrap();
        let pieces = aoi_proportions(
            &[aoi_rect(0.0, 0.0, 60.0, 40.0, 17), aoi_rect(60.0, 0.0, 100.0, 40.0, 17)],
            &cells,
            &g,
        )
        .unwrap();
        assert!((whole[&ClassId(17)] - pieces[&ClassId(17)]).abs() < 1e-12);
    }

    #[test]
    fn density_feature_cases() {
        let g = grid(4, 1, 10.0);
        let zeros = Band::filled(g.clone(), 0.0);
        assert_eq!(poi_density_feature(&[0, 1], &zeros).unwrap(), 0.0);
        let ones = Band::filled(g.clone(), 1.0);
        assert_eq!(poi_density_feature(&[0, 1, 2], &ones).unwrap(), 1.0);
        let mixed = Band::from_values(g, vec![0.0, 0.8, 0.0, 0.8]).unwrap();
        assert_eq!(poi_density_feature(&[0, 1, 2, 3], &mixed).unwrap(), 0.4);
    }

    #[test]
    fn schema_lengths() {
        let scheme = default_scheme();
        let l2 = feature_categories(&scheme, Level::L2);
        assert_eq!(l2.len(), 9);
        assert_eq!(feature_schema(&l2, true, &scheme).unwrap().len(), 25);
        assert_eq!(feature_schema(&l2, false, &scheme).unwrap().len(), 16);
        let l1 = feature_categories(&scheme, Level::L1);
        assert_eq!(l1.len(), 4);
        assert_eq!(feature_schema(&l1, true, &scheme).unwrap().len(), 15);
    }

    #[test]
    fn assemble_orders_categories_and_fills_zeros() {
        let scheme = default_scheme();
        let cats = feature_categories(&scheme, Level::L2);
        let schema = Arc::new(feature_schema(&cats, true, &scheme).unwrap());
        let spectral = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let mut poi = BTreeMap::new();
        poi.insert(ClassId(17), 0.9); // Village
        let aoi = BTreeMap::new();
        let fv =
            assemble_parcel_features(&schema, &spectral, &poi, &aoi, &cats, true).unwrap();
        assert_eq!(fv.values.len(), 25);
        assert_eq!(fv.values[..7], spectral);
        let vil_pos = 7 + cats.iter().position(|&c| c == ClassId(17)).unwrap();
        assert_eq!(fv.values[vil_pos], 0.9);
        assert!(fv.values[7..].iter().filter(|&&v| v != 0.0).count() == 1);
    }
}
