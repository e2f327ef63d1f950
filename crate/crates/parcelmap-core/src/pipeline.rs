//! The two-stage mapping pipeline: a pixel-level spectral forest splits
//! parcels into built-up and non-built-up regions at an area-proportion
//! threshold, then non-built-up parcels take their pixel-majority class while
//! built-up parcels are classified by a parcel-level forest fusing spectral,
//! POI-density, and AOI-proportion features. A one-stage baseline classifies
//! every parcel with a single parcel-level forest over spectral + POI
//! features, for comparison.
//!
//! Sub-seeds are derived from the run seed with fixed stream tags (0 = pixel
//! model, 1 = two-stage parcel model, 3 = one-stage model), so adding stages
//! never perturbs earlier draws.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    aoi_category_masks, aoi_proportions_from_masks, assemble_parcel_features, feature_categories,
    feature_schema, kernel_density, normalize_density, poi_density_feature, AoiFootprint,
    FeatureSchema, FeatureVector, PoiPoint,
};
use crate::forest::{train, ForestModel, TrainConfig, TrainingSample};
use crate::geom::{
    rasterize_polygons, repair_topology, RoadPolyline, SimplePolygon, DEFAULT_EXTEND_MAX,
    DEFAULT_TRIM_MIN,
};
use crate::parcels::{generate_parcels, parcel_spectral_features, Parcel};
use crate::raster::{Band, ClassBand, MultibandRaster, SPECTRAL_FEATURES};
use crate::scheme::{CategoryScheme, ClassId, Level, BUR, NBUR};

/// Knobs of one mapping run. Serialized forms may omit fields; omissions
/// take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Built-up area proportion above which a parcel is built-up (strict).
    pub builtup_threshold: f64,
    /// Label level of the pixel model (block labels roll up when L1).
    pub pixel_train_level: Level,
    /// Kernel radius for POI density surfaces, meters.
    pub poi_bandwidth: f64,
    /// Include AOI proportion features in the parcel model.
    pub include_aoi: bool,
    /// Category granularity of POI/AOI features (built-up subtree at this level).
    pub category_level: Level,
    /// Drop parcels smaller than this many cells.
    pub min_cells: usize,
    pub pixel_forest: TrainConfig,
    pub parcel_forest: TrainConfig,
    /// Run seed; forest seeds are derived from it and the configured forest
    /// seeds are ignored.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            builtup_threshold: 0.37,
            pixel_train_level: Level::L2,
            poi_bandwidth: 1000.0,
            include_aoi: true,
            category_level: Level::L2,
            min_cells: 1,
            pixel_forest: TrainConfig::default(),
            parcel_forest: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.builtup_threshold > 0.0 && self.builtup_threshold < 1.0) {
            return Err(Error::Stage {
                stage: "config",
                message: format!("builtup_threshold {} not in (0, 1)", self.builtup_threshold),
            });
        }
        if !(self.poi_bandwidth > 0.0) {
            return Err(Error::InvalidBandwidth(self.poi_bandwidth));
        }
        if self.pixel_train_level == Level::L0 || self.category_level == Level::L0 {
            return Err(Error::Stage {
                stage: "config",
                message: "pixel_train_level and category_level must be L1 or L2".into(),
            });
        }
        Ok(())
    }
}

/// A coarse-stage training sample: a set of cells sharing one class.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTrainingBlock {
    pub id: u32,
    pub cells: Vec<usize>,
    /// Level-2 label.
    pub label: ClassId,
    pub note: String,
}

impl PixelTrainingBlock {
    pub fn from_cells(id: u32, cells: Vec<usize>, label: ClassId) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyCellSet);
        }
        Ok(Self { id, cells, label, note: String::new() })
    }

    /// Rasterize a polygon onto the grid and take its cells as the block.
    pub fn from_polygon(
        id: u32,
        polygon: &SimplePolygon,
        grid: &crate::raster::Grid,
        label: ClassId,
    ) -> Result<Self> {
        let mask = rasterize_polygons(std::slice::from_ref(polygon), grid);
        let cells: Vec<usize> = (0..grid.cells()).filter(|&i| mask.get(i) == 1.0).collect();
        Self::from_cells(id, cells, label)
    }
}

/// A fine-stage training sample: one parcel with its level-2 class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParcelTrainingSample {
    pub parcel_id: u32,
    pub label: ClassId,
}

/// Everything a run consumes.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub scheme: CategoryScheme,
    pub raster: MultibandRaster,
    pub admin: SimplePolygon,
    pub roads: Vec<RoadPolyline>,
    pub water: Vec<SimplePolygon>,
    pub pois: Vec<PoiPoint>,
    pub aois: Vec<AoiFootprint>,
    pub pixel_blocks: Vec<PixelTrainingBlock>,
    pub parcel_training: Vec<ParcelTrainingSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelStrategy {
    PixelMajority,
    ParcelForest,
}

/// One labeled output parcel.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelRecord {
    pub id: u32,
    pub cells: Vec<usize>,
    pub outline: SimplePolygon,
    pub area: f64,
    pub level0: ClassId,
    pub level1: ClassId,
    /// Absent only when the pixel model was trained at L1 (non-built-up
    /// parcels then have no level-2 majority to report).
    pub level2: Option<ClassId>,
    /// Built-up area proportion from the coarse stage (absent in the
    /// one-stage baseline, which has no pixel stage).
    pub builtup_proportion: Option<f64>,
    pub vote_fractions: Option<Vec<(ClassId, f64)>>,
    pub strategy: LabelStrategy,
}

/// The integrated map: labeled parcels plus the coarse pixel classification.
#[derive(Debug, Clone, PartialEq)]
pub struct LandUseMap {
    pub records: Vec<ParcelRecord>,
    pub pixel_class: Option<ClassBand>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageStats {
    pub roads_in: usize,
    pub roads_after_repair: usize,
    pub parcels: usize,
    pub builtup_parcels: usize,
    pub nonbuiltup_parcels: usize,
    pub pixel_training_samples: usize,
    pub parcel_training_samples: usize,
    pub feature_count: usize,
}

/// A finished run: the map, the trained models, and stage statistics.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub map: LandUseMap,
    pub pixel_model: Option<ForestModel>,
    pub parcel_model: Option<ForestModel>,
    pub stats: StageStats,
}

const SEED_PIXEL_MODEL: u64 = 0;
const SEED_PARCEL_MODEL: u64 = 1;
const SEED_ONE_STAGE_MODEL: u64 = 3;

/// Train the pixel-level spectral forest from training blocks. One sample per
/// block cell, labeled at `level` (block labels are L2 and roll up).
pub fn train_pixel_model(
    raster: &MultibandRaster,
    blocks: &[PixelTrainingBlock],
    scheme: &CategoryScheme,
    level: Level,
    config: &TrainConfig,
) -> Result<ForestModel> {
    if blocks.is_empty() {
        return Err(Error::Stage {
            stage: "train-pixel",
            message: "no pixel training blocks given".into(),
        });
    }
    let schema = FeatureSchema(SPECTRAL_FEATURES.iter().map(|s| s.to_string()).collect());
    let bands = spectral_band_refs(raster)?;
    let mut samples = Vec::new();
    for block in blocks {
        let label = scheme.ancestor_at(block.label, level)?.id;
        for &cell in &block.cells {
            if cell >= raster.grid().cells() {
                return Err(Error::Stage {
                    stage: "train-pixel",
                    message: format!("block {} cell {cell} outside the raster", block.id),
                });
            }
            let mut features = Vec::with_capacity(7);
            for band in &bands {
                let v = band.get(cell);
                if band.is_nodata(v) {
                    return Err(Error::Stage {
                        stage: "train-pixel",
                        message: format!("block {} cell {cell} has nodata spectra", block.id),
                    });
                }
                features.push(v);
            }
            samples.push(TrainingSample {
                id: ((block.id as u64) << 40) | cell as u64,
                features,
                label,
            });
        }
    }
    train(&samples, &schema, config)
}

fn spectral_band_refs(raster: &MultibandRaster) -> Result<Vec<&Band>> {
    SPECTRAL_FEATURES.iter().map(|name| raster.band(name)).collect()
}

/// Classify every cell inside the mask; cells outside, or with nodata in any
/// band, come out nodata.
pub fn classify_pixels(
    model: &ForestModel,
    raster: &MultibandRaster,
    admin_mask: &Band,
) -> Result<ClassBand> {
    if model.schema.len() != 7 {
        return Err(Error::SchemaMismatch {
            expected: "7 spectral features".into(),
            got: format!("{} features", model.schema.len()),
        });
    }
    let grid = raster.grid().clone();
    let bands = spectral_band_refs(raster)?;
    let ncols = grid.ncols;
    let rows: Vec<Vec<u16>> = (0..grid.nrows)
        .into_par_iter()
        .map(|row| {
            let mut out = vec![crate::raster::NODATA_CLASS; ncols];
            let mut features = [0.0f64; 7];
            'cells: for col in 0..ncols {
                let idx = row * ncols + col;
                if admin_mask.get(idx) != 1.0 {
                    continue;
                }
                for (k, band) in bands.iter().enumerate() {
                    let v = band.get(idx);
                    if band.is_nodata(v) {
                        continue 'cells;
                    }
                    features[k] = v;
                }
                let (class, _) =
                    model.predict_values(&features).expect("schema length verified above");
                out[col] = class.0;
            }
            out
        })
        .collect();
    let mut class_band = ClassBand::filled_nodata(grid);
    for (row, vals) in rows.into_iter().enumerate() {
        for (col, v) in vals.into_iter().enumerate() {
            if v != crate::raster::NODATA_CLASS {
                class_band.set(row * ncols + col, Some(ClassId(v)));
            }
        }
    }
    Ok(class_band)
}

/// Fraction of a parcel's classified cells whose class roots in the built-up
/// region.
pub fn builtup_proportion(
    class_band: &ClassBand,
    parcel: &Parcel,
    scheme: &CategoryScheme,
) -> Result<f64> {
    let mut builtup = 0usize;
    let mut classified = 0usize;
    for &cell in &parcel.cells {
        if let Some(class) = class_band.get(cell) {
            classified += 1;
            if scheme.is_builtup(class)? {
                builtup += 1;
            }
        }
    }
    if classified == 0 {
        return Err(Error::ParcelOutsideRaster(parcel.id));
    }
    Ok(builtup as f64 / classified as f64)
}

/// Level-0 split: strictly above the threshold is built-up.
pub fn split_region(proportion: f64, threshold: f64) -> ClassId {
    if proportion > threshold {
        BUR
    } else {
        NBUR
    }
}

/// Majority class of a non-built-up parcel among its NBUR-rooted pixel
/// predictions, rolled to `level`. Ties take the smaller class id; a parcel
/// with no NBUR-rooted cells falls back to Undeveloped.
pub fn label_nonbuiltup(
    parcel: &Parcel,
    class_band: &ClassBand,
    scheme: &CategoryScheme,
    level: Level,
) -> Result<ClassId> {
    let mut counts: BTreeMap<ClassId, usize> = BTreeMap::new();
    for &cell in &parcel.cells {
        if let Some(class) = class_band.get(cell) {
            if !scheme.is_builtup(class)? {
                let rolled = scheme.ancestor_at(class, level)?.id;
                *counts.entry(rolled).or_insert(0) += 1;
            }
        }
    }
    // ascending id iteration + strict > keeps the smallest id on ties
    let mut best: Option<(ClassId, usize)> = None;
    for (class, n) in counts {
        if best.is_none_or(|(_, bn)| n > bn) {
            best = Some((class, n));
        }
    }
    match best {
        Some((class, _)) => Ok(class),
        None => Ok(scheme
            .by_code(level, "U")
            .ok_or_else(|| Error::Stage {
                stage: "label-nonbuiltup",
                message: format!("no Undeveloped class at {}", level.name()),
            })?
            .id),
    }
}

/// Per-category normalized POI density surfaces.
pub fn poi_density_maps(
    pois: &[PoiPoint],
    categories: &[ClassId],
    grid: &crate::raster::Grid,
    bandwidth: f64,
) -> Result<BTreeMap<ClassId, Band>> {
    let maps: Vec<(ClassId, Band)> = categories
        .par_iter()
        .map(|&cat| {
            let points: Vec<PoiPoint> =
                pois.iter().filter(|p| p.category == cat).cloned().collect();
            let density = kernel_density(&points, grid, bandwidth)?;
            Ok((cat, normalize_density(&density)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(maps.into_iter().collect())
}

/// Assemble feature vectors for the given parcels (spectral means, POI
/// density means, and optionally AOI proportions).
fn build_parcel_features(
    parcels: &[&Parcel],
    raster: &MultibandRaster,
    ctx: &FeatureContext,
    include_aoi: bool,
) -> Result<BTreeMap<u32, FeatureVector>> {
    let rows: Vec<(u32, FeatureVector)> = parcels
        .par_iter()
        .map(|parcel| {
            let spectral = parcel_spectral_features(parcel, raster)?;
            let mut poi = BTreeMap::new();
            for (&cat, band) in &ctx.density_maps {
                poi.insert(cat, poi_density_feature(&parcel.cells, band)?);
            }
            let aoi = if include_aoi {
                aoi_proportions_from_masks(&ctx.aoi_masks, &parcel.cells)?
            } else {
                BTreeMap::new()
            };
            let fv = assemble_parcel_features(
                &ctx.schema,
                &spectral,
                &poi,
                &aoi,
                &ctx.categories,
                include_aoi,
            )?;
            Ok((parcel.id, fv))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().collect())
}

/// Category-grouped POI/AOI feature preparation shared by both runs.
pub struct FeatureContext {
    pub categories: Vec<ClassId>,
    pub schema: Arc<FeatureSchema>,
    pub density_maps: BTreeMap<ClassId, Band>,
    pub aoi_masks: BTreeMap<ClassId, Band>,
}

/// Build the shared feature context: category list, schema, density maps,
/// and AOI occupancy masks.
pub fn prepare_features(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
    include_aoi: bool,
) -> Result<FeatureContext> {
    let scheme = &inputs.scheme;
    let categories = feature_categories(scheme, config.category_level);
    let schema = Arc::new(feature_schema(&categories, include_aoi, scheme)?);
    // POIs and AOIs may be labeled at L2 while features run at L1: roll up.
    let mut pois = inputs.pois.clone();
    for p in &mut pois {
        p.category = scheme.ancestor_at(p.category, config.category_level)?.id;
    }
    let density_maps =
        poi_density_maps(&pois, &categories, inputs.raster.grid(), config.poi_bandwidth)?;
    let aoi_masks = if include_aoi {
        let mut aois = inputs.aois.clone();
        for a in &mut aois {
            a.category = scheme.ancestor_at(a.category, config.category_level)?.id;
        }
        aoi_category_masks(&aois, inputs.raster.grid())
    } else {
        BTreeMap::new()
    };
    Ok(FeatureContext { categories, schema, density_maps, aoi_masks })
}

/// Feature vectors for every parcel of the run (the per-parcel feature table
/// export).
pub fn build_all_parcel_features(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
) -> Result<(Vec<Parcel>, BTreeMap<u32, FeatureVector>)> {
    let Stage1 { parcels, raster, .. } = stage1(inputs, config)?;
    let ctx = prepare_features(inputs, config, config.include_aoi)?;
    let refs: Vec<&Parcel> = parcels.iter().collect();
    let features = build_parcel_features(&refs, &raster, &ctx, config.include_aoi)?;
    Ok((parcels, features))
}

/// Shared front half of both runs: topology repair, index derivation, and
/// parcel generation.
struct Stage1 {
    parcels: Vec<Parcel>,
    raster: MultibandRaster,
    admin_mask: Band,
    stats: StageStats,
}

fn stage1(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<Stage1> {
    config.validate()?;
    let roads = repair_topology(&inputs.roads, DEFAULT_EXTEND_MAX, DEFAULT_TRIM_MIN);
    let mut raster = inputs.raster.clone();
    raster.derive_indices()?;
    let grid = raster.grid().clone();
    let admin_mask = rasterize_polygons(std::slice::from_ref(&inputs.admin), &grid);
    let parcels =
        generate_parcels(&inputs.admin, &roads, &inputs.water, &grid, config.min_cells)?;
    let stats = StageStats {
        roads_in: inputs.roads.len(),
        roads_after_repair: roads.len(),
        parcels: parcels.len(),
        ..Default::default()
    };
    Ok(Stage1 { parcels, raster, admin_mask, stats })
}

/// The coarse-to-fine two-stage run.
pub fn run_two_stage(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<RunOutput> {
    let scheme = &inputs.scheme;
    let Stage1 { parcels, raster, admin_mask, mut stats } = stage1(inputs, config)?;

    // coarse stage: pixel model and pixel-level map
    let mut pixel_cfg = config.pixel_forest.clone();
    pixel_cfg.seed = crate::rng::derive(config.seed, SEED_PIXEL_MODEL);
    let pixel_model = train_pixel_model(
        &raster,
        &inputs.pixel_blocks,
        scheme,
        config.pixel_train_level,
        &pixel_cfg,
    )?;
    stats.pixel_training_samples = inputs.pixel_blocks.iter().map(|b| b.cells.len()).sum();
    let pixel_class = classify_pixels(&pixel_model, &raster, &admin_mask)?;

    // region split
    let mut proportions = Vec::with_capacity(parcels.len());
    for parcel in &parcels {
        proportions.push(builtup_proportion(&pixel_class, parcel, scheme)?);
    }
    let regions: Vec<ClassId> =
        proportions.iter().map(|&p| split_region(p, config.builtup_threshold)).collect();
    stats.builtup_parcels = regions.iter().filter(|&&r| r == BUR).count();
    stats.nonbuiltup_parcels = parcels.len() - stats.builtup_parcels;

    // fine stage, built-up side
    let mut bur_training: Vec<ParcelTrainingSample> = Vec::new();
    for s in &inputs.parcel_training {
        if scheme.is_builtup(s.label)? {
            bur_training.push(*s);
        }
    }
    let has_bur_parcels = regions.contains(&BUR);
    let (parcel_model, features) = if has_bur_parcels {
        if bur_training.is_empty() {
            return Err(Error::Stage {
                stage: "train-parcel",
                message: "built-up parcels exist but no built-up training samples given".into(),
            });
        }
        let ctx = prepare_features(inputs, config, config.include_aoi)?;
        stats.feature_count = ctx.schema.len();
        let by_id: BTreeMap<u32, &Parcel> = parcels.iter().map(|p| (p.id, p)).collect();
        let mut wanted: Vec<&Parcel> = parcels
            .iter()
            .zip(&regions)
            .filter(|(_, &r)| r == BUR)
            .map(|(p, _)| p)
            .collect();
        for s in &bur_training {
            let p = by_id.get(&s.parcel_id).ok_or_else(|| Error::Stage {
                stage: "train-parcel",
                message: format!("training sample names unknown parcel {}", s.parcel_id),
            })?;
            if !wanted.iter().any(|q| q.id == p.id) {
                wanted.push(p);
            }
        }
        let features = build_parcel_features(&wanted, &raster, &ctx, config.include_aoi)?;
        let samples: Vec<TrainingSample> = bur_training
            .iter()
            .map(|s| {
                let fv =
                    features.get(&s.parcel_id).expect("features built for training parcels");
                TrainingSample {
                    id: s.parcel_id as u64,
                    features: fv.values.clone(),
                    label: s.label,
                }
            })
            .collect();
        stats.parcel_training_samples = samples.len();
        let mut parcel_cfg = config.parcel_forest.clone();
        parcel_cfg.seed = crate::rng::derive(config.seed, SEED_PARCEL_MODEL);
        let model = train(&samples, &ctx.schema, &parcel_cfg)?;
        (Some(model), features)
    } else {
        (None, BTreeMap::new())
    };

    // merge
    let nbur_level2_available = config.pixel_train_level == Level::L2;
    let mut records = Vec::with_capacity(parcels.len());
    for ((parcel, &region), &proportion) in parcels.iter().zip(&regions).zip(&proportions) {
        let record = if region == NBUR {
            let (level1, level2) = if nbur_level2_available {
                let l2 = label_nonbuiltup(parcel, &pixel_class, scheme, Level::L2)?;
                (scheme.ancestor_at(l2, Level::L1)?.id, Some(l2))
            } else {
                (label_nonbuiltup(parcel, &pixel_class, scheme, Level::L1)?, None)
            };
            ParcelRecord {
                id: parcel.id,
                cells: parcel.cells.clone(),
                outline: parcel.outline.clone(),
                area: parcel.area,
                level0: NBUR,
                level1,
                level2,
                builtup_proportion: Some(proportion),
                vote_fractions: None,
                strategy: LabelStrategy::PixelMajority,
            }
        } else {
            let model = parcel_model.as_ref().expect("model exists when BUR parcels exist");
            let fv = features.get(&parcel.id).expect("features built for BUR parcels");
            let (l2, votes) = model.predict(fv)?;
            ParcelRecord {
                id: parcel.id,
                cells: parcel.cells.clone(),
                outline: parcel.outline.clone(),
                area: parcel.area,
                level0: BUR,
                level1: scheme.ancestor_at(l2, Level::L1)?.id,
                level2: Some(l2),
                builtup_proportion: Some(proportion),
                vote_fractions: Some(votes),
                strategy: LabelStrategy::ParcelForest,
            }
        };
        records.push(record);
    }
    let map = LandUseMap { records, pixel_class: Some(pixel_class) };
    map.check_label_consistency(scheme)?;
    Ok(RunOutput { map, pixel_model: Some(pixel_model), parcel_model, stats })
}

/// The one-stage baseline: one parcel-level forest over spectral + POI
/// features (no AOI), trained on all regions' samples, predicting every
/// parcel directly.
pub fn run_one_stage_baseline(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
) -> Result<RunOutput> {
    let scheme = &inputs.scheme;
    let Stage1 { parcels, raster, admin_mask: _, mut stats } = stage1(inputs, config)?;

    if inputs.parcel_training.is_empty() {
        return Err(Error::Stage {
            stage: "train-parcel",
            message: "no parcel training samples given".into(),
        });
    }
    let ctx = prepare_features(inputs, config, false)?;
    stats.feature_count = ctx.schema.len();
    let all: Vec<&Parcel> = parcels.iter().collect();
    let features = build_parcel_features(&all, &raster, &ctx, false)?;
    let samples: Vec<TrainingSample> = inputs
        .parcel_training
        .iter()
        .map(|s| {
            let fv = features.get(&s.parcel_id).ok_or_else(|| Error::Stage {
                stage: "train-parcel",
                message: format!("training sample names unknown parcel {}", s.parcel_id),
            })?;
            Ok(TrainingSample {
                id: s.parcel_id as u64,
                features: fv.values.clone(),
                label: s.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    stats.parcel_training_samples = samples.len();
    let mut cfg = config.parcel_forest.clone();
    cfg.seed = crate::rng::derive(config.seed, SEED_ONE_STAGE_MODEL);
    let model = train(&samples, &ctx.schema, &cfg)?;

    let mut records = Vec::with_capacity(parcels.len());
    for parcel in &parcels {
        let fv = features.get(&parcel.id).expect("features built for all parcels");
        let (l2, votes) = model.predict(fv)?;
        records.push(ParcelRecord {
            id: parcel.id,
            cells: parcel.cells.clone(),
            outline: parcel.outline.clone(),
            area: parcel.area,
            level0: scheme.ancestor_at(l2, Level::L0)?.id,
            level1: scheme.ancestor_at(l2, Level::L1)?.id,
            level2: Some(l2),
            builtup_proportion: None,
            vote_fractions: Some(votes),
            strategy: LabelStrategy::ParcelForest,
        });
    }
    stats.builtup_parcels = records.iter().filter(|r| r.level0 == BUR).count();
    stats.nonbuiltup_parcels = records.len() - stats.builtup_parcels;
    let map = LandUseMap { records, pixel_class: None };
    map.check_label_consistency(scheme)?;
    Ok(RunOutput { map, pixel_model: None, parcel_model: Some(model), stats })
}

impl LandUseMap {
    /// Every record's level-2 label must roll up to its level-1 and level-0.
    pub fn check_label_consistency(&self, scheme: &CategoryScheme) -> Result<()> {
        for r in &self.records {
            if scheme.ancestor_at(r.level1, Level::L0)?.id != r.level0 {
                return Err(Error::Stage {
                    stage: "merge",
                    message: format!("parcel {}: level-1 label outside its region", r.id),
                });
            }
            if let Some(l2) = r.level2 {
                if scheme.ancestor_at(l2, Level::L1)?.id != r.level1 {
                    return Err(Error::Stage {
                        stage: "merge",
                        message: format!("parcel {}: level-2 label outside its level-1", r.id),
                    });
                }
            }
        }
        Ok(())
    }

    /// Paint each parcel's label at `level` onto the grid; unlabeled space is
    /// nodata.
    pub fn rendered_class_band(
        &self,
        grid: &crate::raster::Grid,
        level: Level,
    ) -> Result<ClassBand> {
        let mut out = ClassBand::filled_nodata(grid.clone());
        for r in &self.records {
            let class = match level {
                Level::L0 => Some(r.level0),
                Level::L1 => Some(r.level1),
                Level::L2 => r.level2,
            };
            if let Some(c) = class {
                for &cell in &r.cells {
                    out.set(cell, Some(c));
                }
            }
        }
        Ok(out)
    }

    /// Per-parcel label rows (id, l0, l1, l2 codes) for the label table.
    pub fn label_rows(
        &self,
        scheme: &CategoryScheme,
    ) -> Result<Vec<(u32, String, String, String)>> {
        self.records
            .iter()
            .map(|r| {
                let l0 = scheme.class(r.level0)?.code.clone();
                let l1 = scheme.class(r.level1)?.code.clone();
                let l2 = match r.level2 {
                    Some(c) => scheme.class(c)?.code.clone(),
                    None => String::new(),
                };
                Ok((r.id, l0, l1, l2))
            })
            .collect()
    }

    /// GeoJSON export: parcel polygons with labels, proportions, and votes.
    pub fn write_geojson(&self, path: &std::path::Path, scheme: &CategoryScheme) -> Result<()> {
        use crate::io::geojson::{feature, feature_collection, polygon_geometry, write_json};
        use serde_json::{json, Map, Value};
        let features = self
            .records
            .iter()
            .map(|r| {
                let mut props = Map::new();
                props.insert("id".into(), json!(r.id));
                props.insert("area_m2".into(), json!(r.area));
                props.insert("l0".into(), json!(scheme.class(r.level0)?.code));
                props.insert("l1".into(), json!(scheme.class(r.level1)?.code));
                if let Some(l2) = r.level2 {
                    props.insert("l2".into(), json!(scheme.class(l2)?.code));
                }
                if let Some(p) = r.builtup_proportion {
                    props.insert("builtup_proportion".into(), json!(p));
                }
                props.insert(
                    "strategy".into(),
                    json!(match r.strategy {
                        LabelStrategy::PixelMajority => "pixel-majority",
                        LabelStrategy::ParcelForest => "parcel-forest",
                    }),
                );
                if let Some(votes) = &r.vote_fractions {
                    let mut v = Map::new();
                    for (class, frac) in votes {
                        v.insert(scheme.class(*class)?.code.clone(), json!(frac));
                    }
                    props.insert("votes".into(), Value::Object(v));
                }
                Ok(feature(polygon_geometry(&r.outline), props))
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(path, &feature_collection(features))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;
    use crate::scheme::default_scheme;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 0.0, 0.0, 10.0, -9999.0).unwrap()
    }

    fn toy_parcel(cells: Vec<usize>) -> Parcel {
        Parcel {
            id: 1,
            cells,
            outline: SimplePolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap(),
            area: 100.0,
            level0: None,
            level1: None,
            level2: None,
            features: None,
        }
    }

    #[test]
    fn split_region_threshold_is_strict() {
        assert_eq!(split_region(0.50, 0.37), BUR);
        assert_eq!(split_region(0.37, 0.37), NBUR);
        assert_eq!(split_region(0.0, 0.37), NBUR);
        assert_eq!(split_region(0.3700001, 0.37), BUR);
    }

    #[test]
    fn threshold_monotonicity() {
        // raising the threshold never moves a parcel from NBUR to BUR
        let proportions = [0.0, 0.2, 0.37, 0.4, 0.9];
        for &lo in &[0.1, 0.37, 0.5] {
            for &hi in &[0.6, 0.8] {
                for &p in &proportions {
                    let at_lo = split_region(p, lo);
                    let at_hi = split_region(p, hi);
                    assert!(!(at_lo == NBUR && at_hi == BUR), "p={p} lo={lo} hi={hi}");
                }
            }
        }
    }

    #[test]
    fn builtup_proportion_counts() {
        let scheme = default_scheme();
        let g = grid(10);
        let mut cb = ClassBand::filled_nodata(g);
        let village = scheme.by_code(Level::L2, "Vil").unwrap().id;
        let forest = scheme.by_code(Level::L2, "For").unwrap().id;
        for i in 0..100 {
            cb.set(i, Some(if i < 37 { village } else { forest }));
        }
        let parcel = toy_parcel((0..100).collect());
        let p = builtup_proportion(&cb, &parcel, &scheme).unwrap();
        assert!((p - 0.37).abs() < 1e-12);

        let all_vil = toy_parcel((0..37).collect());
        assert_eq!(builtup_proportion(&cb, &all_vil, &scheme).unwrap(), 1.0);

        let all_for = toy_parcel((37..100).collect());
        assert_eq!(builtup_proportion(&cb, &all_for, &scheme).unwrap(), 0.0);
    }

    #[test]
    fn builtup_proportion_needs_classified_cells() {
        let scheme = default_scheme();
        let cb = ClassBand::filled_nodata(grid(4));
        let parcel = toy_parcel(vec![0, 1, 2]);
        assert!(matches!(
            builtup_proportion(&cb, &parcel, &scheme),
            Err(Error::ParcelOutsideRaster(1))
        ));
    }

    #[test]
    fn nonbuiltup_majority_and_rollup() {
        let scheme = default_scheme();
        let g = grid(10);
        let mut cb = ClassBand::filled_nodata(g);
        let forest = scheme.by_code(Level::L2, "For").unwrap().id;
        let cropland = scheme.by_code(Level::L2, "Cro").unwrap().id;
        for i in 0..60 {
            cb.set(i, Some(forest));
        }
        for i in 60..100 {
            cb.set(i, Some(cropland));
        }
        let parcel = toy_parcel((0..100).collect());
        let l2 = label_nonbuiltup(&parcel, &cb, &scheme, Level::L2).unwrap();
        assert_eq!(l2, forest);
        let l1 = label_nonbuiltup(&parcel, &cb, &scheme, Level::L1).unwrap();
        assert_eq!(l1, scheme.by_code(Level::L1, "G").unwrap().id);
    }

    #[test]
    fn nonbuiltup_tie_takes_smaller_id() {
        let scheme = default_scheme();
        let g = grid(10);
        let mut cb = ClassBand::filled_nodata(g);
        let forest = scheme.by_code(Level::L2, "For").unwrap().id; // id 13
        let shrub = scheme.by_code(Level::L2, "Shr").unwrap().id; // id 14
        for i in 0..50 {
            cb.set(i, Some(shrub));
        }
        for i in 50..100 {
            cb.set(i, Some(forest));
        }
        let parcel = toy_parcel((0..100).collect());
        assert_eq!(label_nonbuiltup(&parcel, &cb, &scheme, Level::L2).unwrap(), forest);
    }

    #[test]
    fn nonbuiltup_excludes_builtup_pixels() {
        // 36% Village (excluded), 33% Cropland, 31% Forest -> Cropland
        let scheme = default_scheme();
        let g = grid(10);
        let mut cb = ClassBand::filled_nodata(g);
        let village = scheme.by_code(Level::L2, "Vil").unwrap().id;
        let cropland = scheme.by_code(Level::L2, "Cro").unwrap().id;
        let forest = scheme.by_code(Level::L2, "For").unwrap().id;
        for i in 0..36 {
            cb.set(i, Some(village));
        }
        for i in 36..69 {
            cb.set(i, Some(cropland));
        }
        for i in 69..100 {
            cb.set(i, Some(forest));
        }
        let parcel = toy_parcel((0..100).collect());
        assert_eq!(label_nonbuiltup(&parcel, &cb, &scheme, Level::L2).unwrap(), cropland);
    }

    #[test]
    fn nonbuiltup_fallback_is_undeveloped() {
        let scheme = default_scheme();
        let g = grid(10);
        let mut cb = ClassBand::filled_nodata(g);
        let village = scheme.by_code(Level::L2, "Vil").unwrap().id;
        for i in 0..100 {
            cb.set(i, Some(village));
        }
        let parcel = toy_parcel((0..100).collect());
        let l2 = label_nonbuiltup(&parcel, &cb, &scheme, Level::L2).unwrap();
        assert_eq!(l2, scheme.by_code(Level::L2, "U").unwrap().id);
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.builtup_threshold = 0.0;
        assert!(cfg.validate().is_err());
        cfg.builtup_threshold = 1.0;
        assert!(cfg.validate().is_err());
        cfg.builtup_threshold = 0.37;
        cfg.poi_bandwidth = 0.0;
        assert!(cfg.validate().is_err());
    }
}
