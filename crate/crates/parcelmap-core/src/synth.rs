//! Deterministic synthetic-city generator: mutually consistent roads (with
//! injected dangles), water, admin boundary, multiband imagery, POIs, AOIs,
//! training blocks and parcels, and full ground truth, at desk scale.
//!
//! Layout: an orthogonal road grid of k x k blocks centered in the admin
//! square, surrounded by a margin ring wide enough to host the dangling-road
//! fixtures. Three dangles are injected with known repair outcomes: one
//! extendable stub inside the center block (it splits that block after
//! repair), one isolated 400 m segment in the bottom margin (trimmed), and
//! one isolated 800 m segment in the top margin (kept). A lake sits strictly
//! inside one block. The closed-form parcel count is therefore
//! k^2 + 2: the blocks, plus one for the dangle split, plus the margin ring.
//!
//! Spectral design: class signatures are separated by at least four pixel
//! sigmas, NDVI splits vegetation from built classes and NDWI isolates water.
//! Built-up parcels are pixel mixtures of their own class with a forest
//! filler, and cropland's signature equals the village/forest blend, so
//! village and cropland parcel means coincide and only socio-economic
//! features can separate them. Classes inside the community/marketing,
//! service/industrial, and medical/educational/government groups are close
//! in band space relative to the per-parcel offset noise, leaving POI and
//! AOI features to tell them apart at parcel level.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AoiFootprint, PoiPoint};
use crate::geom::{repair_topology, PlanarPoint, RoadClass, RoadPolyline, SimplePolygon};
use crate::geom::{DEFAULT_EXTEND_MAX, DEFAULT_TRIM_MIN};
use crate::io::{bandfile, geojson, tables};
use crate::parcels::{generate_parcels, Parcel};
use crate::pipeline::{ParcelTrainingSample, PipelineInputs, PixelTrainingBlock};
use crate::raster::{Band, ClassBand, Grid, MultibandRaster, SPECTRAL_BANDS};
use crate::rng::{derive, SplitMix64};
use crate::scheme::{default_scheme, CategoryScheme, ClassId, Level};

/// Per-class band statistics: mean and noise sigma for RED, GREEN, BLUE,
/// NIR, SWIR1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    pub means: [f64; 5],
    pub sigmas: [f64; 5],
}

/// POI counts emitted by one parcel of a class: parcels alternate between
/// weak and strong along their within-class index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiIntensity {
    pub weak: u32,
    pub strong: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Cells per grid side.
    pub grid_side_cells: usize,
    /// Cell size, meters.
    pub cellsize: f64,
    /// Road grid pitch, cells.
    pub road_pitch_cells: usize,
    /// Minimum margin between the road grid and the admin edge, meters.
    pub min_margin_m: f64,
    /// Spectral signature table keyed by level-2 code.
    pub signatures: BTreeMap<String, ClassSignature>,
    /// Per-parcel spectral offset sigma (correlated within a parcel).
    pub parcel_offset_sigma: f64,
    /// Difficulty knob scaling all noise sigmas.
    pub noise_multiplier: f64,
    /// Fraction of core parcels assigned to the built-up side.
    pub builtup_fraction: f64,
    /// Own-class pixel share inside a built-up parcel (the rest is forest
    /// filler).
    pub builtup_main_fraction: f64,
    /// POI counts per built-up class.
    pub poi_intensity: BTreeMap<String, PoiIntensity>,
    /// Probability a POI carries its parcel's own category; the rest spread
    /// uniformly over the other built-up categories.
    pub poi_own_category_prob: f64,
    /// AOI footprint coverage per built-up class (fraction of parcel area;
    /// zero disables the class's AOIs).
    pub aoi_coverage: BTreeMap<String, f64>,
    /// Class mix weights for built-up core parcels.
    pub bur_class_weights: Vec<(String, u32)>,
    /// Class mix weights for non-built-up core parcels.
    pub nbur_class_weights: Vec<(String, u32)>,
    /// Training parcels drawn per level-2 class.
    pub train_per_class: usize,
    /// Ground-truth cells sampled per class for pixel training blocks.
    pub pixel_block_cells_per_class: usize,
}

fn default_signatures() -> BTreeMap<String, ClassSignature> {
    let sig = |means: [f64; 5]| ClassSignature { means, sigmas: [0.01; 5] };
    let mut t = BTreeMap::new();
    t.insert("For".into(), sig([0.040, 0.080, 0.040, 0.500, 0.150]));
    t.insert("Shr".into(), sig([0.070, 0.110, 0.060, 0.380, 0.180]));
    t.insert("Orc".into(), sig([0.060, 0.100, 0.050, 0.440, 0.130]));
    t.insert("Aqu".into(), sig([0.060, 0.140, 0.100, 0.100, 0.060]));
    t.insert("W".into(), sig([0.030, 0.080, 0.090, 0.020, 0.010]));
    t.insert("U".into(), sig([0.280, 0.260, 0.220, 0.300, 0.330]));
    t.insert("Vil".into(), sig([0.220, 0.200, 0.170, 0.260, 0.270]));
    t.insert("Com".into(), sig([0.300, 0.280, 0.260, 0.220, 0.300]));
    t.insert("Mar".into(), sig([0.324, 0.304, 0.284, 0.244, 0.324]));
    t.insert("Ser".into(), sig([0.360, 0.330, 0.320, 0.180, 0.360]));
    t.insert("I".into(), sig([0.384, 0.354, 0.344, 0.204, 0.384]));
    t.insert("Med".into(), sig([0.420, 0.390, 0.380, 0.140, 0.300]));
    t.insert("Edu".into(), sig([0.444, 0.414, 0.404, 0.164, 0.324]));
    t.insert("Gov".into(), sig([0.396, 0.366, 0.356, 0.116, 0.276]));
    t.insert("Tra".into(), sig([0.250, 0.240, 0.235, 0.120, 0.400]));
    // cropland lies exactly on the 70/30 village/forest blend: village and
    // cropland parcel means coincide, so spectra alone cannot separate them
    let vil = t["Vil"].means;
    let forest = t["For"].means;
    let mut cro = [0.0; 5];
    for i in 0..5 {
        cro[i] = 0.7 * vil[i] + 0.3 * forest[i];
    }
    t.insert("Cro".into(), sig(cro));
    t
}

impl Default for SynthConfig {
    fn default() -> Self {
        let intensity = PoiIntensity { weak: 1, strong: 40 };
        let bur_codes = ["Vil", "Com", "Mar", "Ser", "I", "Med", "Edu", "Gov", "Tra"];
        Self {
            seed: 0,
            grid_side_cells: 400,
            cellsize: 10.0,
            road_pitch_cells: 50,
            min_margin_m: 600.0,
            signatures: default_signatures(),
            parcel_offset_sigma: 0.012,
            noise_multiplier: 1.0,
            builtup_fraction: 0.5,
            builtup_main_fraction: 0.7,
            poi_intensity: bur_codes.iter().map(|c| (c.to_string(), intensity)).collect(),
            poi_own_category_prob: 0.6,
            aoi_coverage: bur_codes.iter().map(|c| (c.to_string(), 0.45)).collect(),
            bur_class_weights: vec![
                ("Vil".into(), 3),
                ("Com".into(), 2),
                ("I".into(), 2),
                ("Mar".into(), 1),
                ("Ser".into(), 1),
                ("Med".into(), 1),
                ("Edu".into(), 1),
                ("Gov".into(), 1),
                ("Tra".into(), 1),
            ],
            nbur_class_weights: vec![
                ("Cro".into(), 3),
                ("For".into(), 2),
                ("Orc".into(), 2),
                ("Aqu".into(), 2),
                ("Shr".into(), 2),
                ("U".into(), 2),
            ],
            train_per_class: 1,
            pixel_block_cells_per_class: 128,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self, scheme: &CategoryScheme) -> Result<()> {
        let err = |m: String| Err(Error::SynthConfig(m));
        if self.grid_side_cells < 40 {
            return err("grid side under 40 cells leaves no room for the layout".into());
        }
        if !(self.cellsize > 0.0) {
            return err(format!("cellsize {} must be positive", self.cellsize));
        }
        if self.road_pitch_cells < 8 {
            return err("road pitch under 8 cells makes blocks thinner than the roads".into());
        }
        if !(0.0..=1.0).contains(&self.builtup_fraction) {
            return err(format!("builtup_fraction {} outside [0,1]", self.builtup_fraction));
        }
        if !(self.builtup_main_fraction > 0.5 && self.builtup_main_fraction <= 1.0) {
            return err(format!(
                "builtup_main_fraction {} must be in (0.5, 1] so the own class keeps the majority",
                self.builtup_main_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.poi_own_category_prob) {
            return err(format!("poi_own_category_prob {}", self.poi_own_category_prob));
        }
        if self.noise_multiplier < 0.0 {
            return err(format!("noise_multiplier {} negative", self.noise_multiplier));
        }
        if self.train_per_class == 0 {
            return err("train_per_class must be at least 1".into());
        }
        for code in scheme.classes_at(Level::L2).iter().map(|c| &c.code) {
            if !self.signatures.contains_key(code) {
                return err(format!("signature table missing class {code:?}"));
            }
        }
        for (code, cov) in &self.aoi_coverage {
            if !(0.0..=1.0).contains(cov) {
                return err(format!("aoi_coverage[{code}] = {cov} outside [0,1]"));
            }
            if scheme.by_code(Level::L2, code).is_none() {
                return err(format!("aoi_coverage names unknown class {code:?}"));
            }
        }
        for (code, _) in self.bur_class_weights.iter().chain(&self.nbur_class_weights) {
            if scheme.by_code(Level::L2, code).is_none() {
                return err(format!("class weights name unknown class {code:?}"));
            }
        }
        Ok(())
    }

    fn extent(&self) -> f64 {
        self.grid_side_cells as f64 * self.cellsize
    }
}

/// Everything a pipeline run needs, plus ground truth for evaluation.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub inputs: PipelineInputs,
    /// The generator's own parcelization (identical to what the pipeline
    /// derives from the same layers).
    pub parcels: Vec<Parcel>,
    /// Ground-truth level-2 class per parcel id.
    pub truth_l2: Vec<(u32, ClassId)>,
    /// Ground-truth class per cell (roads are Transportation, the lake is
    /// Waterbody).
    pub truth_pixels: ClassBand,
    /// Parcel ids held out of training.
    pub validation_parcels: Vec<u32>,
    /// Closed-form parcel count for the configured layout.
    pub expected_parcel_count: usize,
}

struct Layout {
    k: usize,
    margin: f64,
    pitch: f64,
    roads: Vec<RoadPolyline>,
    lake: SimplePolygon,
    extendable_id: u64,
    trimmable_id: u64,
    keep_id: u64,
}

/// Snap a coordinate to the nearest cell-center line.
fn snap_center(v: f64, cs: f64) -> f64 {
    (v / cs).floor() * cs + 0.5 * cs
}

fn build_layout(config: &SynthConfig) -> Result<Layout> {
    let cs = config.cellsize;
    let extent = config.extent();
    let pitch = config.road_pitch_cells as f64 * cs;
    let k = ((extent - 2.0 * config.min_margin_m) / pitch).floor() as usize;
    if k < 2 {
        return Err(Error::SynthConfig(format!(
            "layout infeasible: extent {extent} m leaves {k} blocks at pitch {pitch} m"
        )));
    }
    let margin = (extent - k as f64 * pitch) / 2.0;
    let classes = [RoadClass::L1, RoadClass::L2, RoadClass::L3];
    let mut roads = Vec::new();
    let mut id = 1u64;
    for i in 0..=k {
        let pos = margin + i as f64 * pitch;
        let class = classes[i % classes.len()];
        roads.push(
            RoadPolyline::new(
                id,
                vec![PlanarPoint::new(pos, margin), PlanarPoint::new(pos, extent - margin)],
                class,
            )
            .expect("vertical road"),
        );
        id += 1;
        roads.push(
            RoadPolyline::new(
                id,
                vec![PlanarPoint::new(margin, pos), PlanarPoint::new(extent - margin, pos)],
                class,
            )
            .expect("horizontal road"),
        );
        id += 1;
    }

    // extendable stub: starts on the center block's left wall, stops short of
    // the right wall; its forward ray meets the wall within reach
    let bi = k / 2;
    let x_left = margin + (bi.saturating_sub(1)) as f64 * pitch;
    let gap = (0.6 * pitch).min(300.0);
    let y_dangle = snap_center(margin + (bi as f64 - 0.5) * pitch, cs);
    let extendable_id = 900;
    roads.push(
        RoadPolyline::new(
            extendable_id,
            vec![
                PlanarPoint::new(x_left, y_dangle),
                PlanarPoint::new(x_left + pitch - gap, y_dangle),
            ],
            RoadClass::L3,
        )
        .expect("extendable dangle"),
    );

    // isolated 400 m segment in the bottom margin: too short, gets trimmed
    let trimmable_id = 901;
    let y_trim = snap_center(margin / 2.0, cs);
    roads.push(
        RoadPolyline::new(
            trimmable_id,
            vec![
                PlanarPoint::new(extent / 2.0 - 200.0, y_trim),
                PlanarPoint::new(extent / 2.0 + 200.0, y_trim),
            ],
            RoadClass::L3,
        )
        .expect("trimmable dangle"),
    );

    // isolated 800 m segment in the top margin: long enough to stay
    let keep_id = 902;
    let y_keep = snap_center(extent - margin / 2.0, cs);
    roads.push(
        RoadPolyline::new(
            keep_id,
            vec![
                PlanarPoint::new(extent / 2.0 - 400.0, y_keep),
                PlanarPoint::new(extent / 2.0 + 400.0, y_keep),
            ],
            RoadClass::L3,
        )
        .expect("keep dangle"),
    );

    // lake strictly inside block (1, 1)
    let block_x = margin + pitch;
    let block_y = margin + pitch;
    let lx0 = snap_cell_edge(block_x + 0.35 * pitch, cs);
    let ly0 = snap_cell_edge(block_y + 0.35 * pitch, cs);
    let lx1 = snap_cell_edge(block_x + 0.65 * pitch, cs);
    let ly1 = snap_cell_edge(block_y + 0.60 * pitch, cs);
    let lake = SimplePolygon::rectangle(lx0, ly0, lx1, ly1).expect("lake rectangle");

    Ok(Layout { k, margin, pitch, roads, lake, extendable_id, trimmable_id, keep_id })
}

fn snap_cell_edge(v: f64, cs: f64) -> f64 {
    (v / cs).round() * cs
}

/// Generate the full dataset for one configuration. Deterministic per seed.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    let scheme = default_scheme();
    config.validate(&scheme)?;
    let layout = build_layout(config)?;
    let cs = config.cellsize;
    let extent = config.extent();
    let side = config.grid_side_cells;
    let grid = Grid::new(side, side, 0.0, 0.0, cs, -9999.0)?;
    let admin = SimplePolygon::rectangle(0.0, 0.0, extent, extent).expect("admin");

    let repaired = repair_topology(&layout.roads, DEFAULT_EXTEND_MAX, DEFAULT_TRIM_MIN);
    let water = vec![layout.lake.clone()];
    let parcels = generate_parcels(&admin, &repaired, &water, &grid, 1)?;
    let expected = layout.k * layout.k + 2;
    if parcels.len() != expected {
        return Err(Error::SynthConfig(format!(
            "layout produced {} parcels, closed form expects {expected}",
            parcels.len()
        )));
    }

    let assignment = assign_classes(&parcels, config, &scheme, &grid, &layout)?;
    let truth_pixels = paint_truth(&parcels, &assignment, config, &scheme, &grid, &repaired, &water)?;
    let raster = synth_bands(config, &scheme, &grid, &truth_pixels, &parcels)?;
    let (pois, aois) = socio_features(&parcels, &assignment, config, &scheme, &grid)?;
    let (train, validation) = split_train_validation(&parcels, &assignment, config);
    let blocks = pixel_blocks(&parcels, &train, config, &scheme, &truth_pixels)?;

    let truth_l2: Vec<(u32, ClassId)> =
        parcels.iter().map(|p| (p.id, assignment[&p.id])).collect();
    let inputs = PipelineInputs {
        scheme,
        raster,
        admin,
        roads: layout.roads.clone(),
        water,
        pois,
        aois,
        pixel_blocks: blocks,
        parcel_training: train,
    };
    Ok(SynthDataset {
        config: config.clone(),
        inputs,
        parcels,
        truth_l2,
        truth_pixels,
        validation_parcels: validation,
        expected_parcel_count: expected,
    })
}

/// Datasets identical except for the spectral noise scale.
pub fn difficulty_sweep(base: &SynthConfig, multipliers: &[f64]) -> Result<Vec<SynthDataset>> {
    multipliers
        .iter()
        .map(|&m| {
            if m < 0.0 {
                return Err(Error::SynthConfig(format!("negative multiplier {m}")));
            }
            let mut cfg = base.clone();
            cfg.noise_multiplier = m;
            generate(&cfg)
        })
        .collect()
}

/// Ground-truth class per parcel. The ring parcel (touching the admin edge)
/// is forest; core parcels split into built-up and non-built-up by block
/// parity, then cycle through the weighted class lists in seeded-shuffled
/// order.
fn assign_classes(
    parcels: &[Parcel],
    config: &SynthConfig,
    scheme: &CategoryScheme,
    grid: &Grid,
    layout: &Layout,
) -> Result<BTreeMap<u32, ClassId>> {
    let code = |c: &str| -> Result<ClassId> {
        Ok(scheme
            .by_code(Level::L2, c)
            .ok_or_else(|| Error::SynthConfig(format!("unknown class code {c:?}")))?
            .id)
    };
    let forest = code("For")?;

    // the ring is the parcel containing the top-left cell
    let ring_id = parcels
        .iter()
        .find(|p| p.cells.first() == Some(&0))
        .map(|p| p.id)
        .ok_or_else(|| Error::SynthConfig("no ring parcel found".into()))?;

    // block parity per core parcel, from the centroid
    let mut core: Vec<(u32, usize)> = Vec::new(); // (parcel id, parity)
    for p in parcels {
        if p.id == ring_id {
            continue;
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        for &cell in &p.cells {
            let c = grid.cell_center(cell);
            cx += c.x;
            cy += c.y;
        }
        let n = p.cells.len() as f64;
        cx /= n;
        cy /= n;
        let bi = (((cx - layout.margin) / layout.pitch).floor() as i64).clamp(0, layout.k as i64 - 1);
        let bj = (((cy - layout.margin) / layout.pitch).floor() as i64).clamp(0, layout.k as i64 - 1);
        core.push((p.id, ((bi + bj) % 2) as usize));
    }

    // built-up count: parity-0 blocks first, then parity-1, in id order
    let n_bur = (config.builtup_fraction * core.len() as f64).round() as usize;
    let mut ordered = core.clone();
    ordered.sort_by_key(|&(id, parity)| (parity, id));
    let bur_ids: Vec<u32> = ordered.iter().take(n_bur).map(|&(id, _)| id).collect();

    let expand = |weights: &[(String, u32)]| -> Result<Vec<ClassId>> {
        let mut list = Vec::new();
        for (c, w) in weights {
            let id = code(c)?;
            for _ in 0..*w {
                list.push(id);
            }
        }
        if list.is_empty() {
            return Err(Error::SynthConfig("empty class weight list".into()));
        }
        Ok(list)
    };
    let bur_list = expand(&config.bur_class_weights)?;
    let nbur_list = expand(&config.nbur_class_weights)?;

    let mut rng = SplitMix64::new(derive(config.seed, 20));
    let mut assignment = BTreeMap::new();
    assignment.insert(ring_id, forest);
    let mut assign_side = |ids: &[u32], list: &[ClassId], rng: &mut SplitMix64| {
        let mut pool: Vec<ClassId> = Vec::with_capacity(ids.len());
        while pool.len() < ids.len() {
            pool.extend_from_slice(list);
        }
        pool.truncate(ids.len());
        rng.shuffle(&mut pool);
        for (&id, &class) in ids.iter().zip(&pool) {
            assignment.insert(id, class);
        }
    };
    assign_side(&bur_ids, &bur_list, &mut rng);
    let nbur_ids: Vec<u32> = core
        .iter()
        .map(|&(id, _)| id)
        .filter(|id| !bur_ids.contains(id))
        .collect();
    assign_side(&nbur_ids, &nbur_list, &mut rng);
    Ok(assignment)
}

/// Ground-truth pixel raster: road cells are Transportation, lake cells are
/// Waterbody, non-built-up parcels carry their class, and built-up parcels
/// mix their own class with forest filler (own class clamped to a strict
/// majority).
fn paint_truth(
    parcels: &[Parcel],
    assignment: &BTreeMap<u32, ClassId>,
    config: &SynthConfig,
    scheme: &CategoryScheme,
    grid: &Grid,
    repaired_roads: &[RoadPolyline],
    water: &[SimplePolygon],
) -> Result<ClassBand> {
    let code = |c: &str| scheme.by_code(Level::L2, c).map(|x| x.id).unwrap();
    let tra = code("Tra");
    let wat = code("W");
    let forest = code("For");

    let mut truth = ClassBand::filled_nodata(grid.clone());
    let road_mask = crate::geom::rasterize_roads(repaired_roads, grid);
    let water_mask = crate::geom::rasterize_polygons(water, grid);
    for i in 0..grid.cells() {
        if road_mask.get(i) == 1.0 {
            truth.set(i, Some(tra));
        }
        if water_mask.get(i) == 1.0 {
            truth.set(i, Some(wat));
        }
    }
    let mut rng = SplitMix64::new(derive(config.seed, 21));
    for p in parcels {
        let class = assignment[&p.id];
        let builtup = scheme.is_builtup(class)?;
        if !builtup {
            for &cell in &p.cells {
                truth.set(cell, Some(class));
            }
            continue;
        }
        let mut filler: Vec<usize> = Vec::new();
        for &cell in &p.cells {
            if rng.next_f64() >= config.builtup_main_fraction {
                filler.push(cell);
            }
        }
        // keep the own class a strict majority
        let max_filler = (p.cells.len() - 1) / 2;
        filler.truncate(max_filler);
        let filler_set: std::collections::BTreeSet<usize> = filler.into_iter().collect();
        for &cell in &p.cells {
            let c = if filler_set.contains(&cell) { forest } else { class };
            truth.set(cell, Some(c));
        }
    }
    Ok(truth)
}

/// Bands sampled from the signature table plus per-parcel offsets and pixel
/// noise, clamped at zero.
fn synth_bands(
    config: &SynthConfig,
    scheme: &CategoryScheme,
    grid: &Grid,
    truth: &ClassBand,
    parcels: &[Parcel],
) -> Result<MultibandRaster> {
    let mult = config.noise_multiplier;
    // signature lookup by class id
    let mut by_id: BTreeMap<ClassId, &ClassSignature> = BTreeMap::new();
    for c in scheme.classes_at(Level::L2) {
        by_id.insert(c.id, &config.signatures[&c.code]);
    }

    // per-parcel band offsets
    let mut offset_rng = SplitMix64::new(derive(config.seed, 22));
    let mut cell_offset: Vec<[f64; 5]> = vec![[0.0; 5]; grid.cells()];
    for p in parcels {
        let mut off = [0.0; 5];
        for o in &mut off {
            *o = offset_rng.next_normal() * config.parcel_offset_sigma * mult;
        }
        for &cell in &p.cells {
            cell_offset[cell] = off;
        }
    }

    let mut values: Vec<Vec<f64>> = vec![vec![0.0; grid.cells()]; 5];
    let mut noise_rng = SplitMix64::new(derive(config.seed, 23));
    for cell in 0..grid.cells() {
        let class = truth.get(cell).ok_or_else(|| {
            Error::SynthConfig(format!("cell {cell} has no ground-truth class"))
        })?;
        let sig = by_id[&class];
        let off = cell_offset[cell];
        for band in 0..5 {
            let noise = noise_rng.next_normal() * sig.sigmas[band] * mult;
            values[band][cell] = (sig.means[band] + off[band] + noise).max(0.0);
        }
    }
    let mut raster = MultibandRaster::new(grid.clone());
    for (band, name) in SPECTRAL_BANDS.iter().enumerate() {
        raster.insert(name, Band::from_values(grid.clone(), std::mem::take(&mut values[band]))?)?;
    }
    raster.derive_indices()?;
    Ok(raster)
}

/// POIs and AOIs for built-up parcels. POI counts alternate weak/strong along
/// each class's parcels; the first POI of a parcel always carries the
/// parcel's own category. AOIs are centered sub-rectangles of the parcel's
/// bounding box scaled to the configured coverage.
fn socio_features(
    parcels: &[Parcel],
    assignment: &BTreeMap<u32, ClassId>,
    config: &SynthConfig,
    scheme: &CategoryScheme,
    grid: &Grid,
) -> Result<(Vec<PoiPoint>, Vec<AoiFootprint>)> {
    let bur_categories: Vec<ClassId> = scheme
        .subtree_at(crate::scheme::BUR, Level::L2)
        .iter()
        .map(|c| c.id)
        .collect();
    let mut within_class_index: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut rng = SplitMix64::new(derive(config.seed, 24));
    let mut pois = Vec::new();
    let mut aois = Vec::new();
    for p in parcels {
        let class = assignment[&p.id];
        if !scheme.is_builtup(class)? {
            continue;
        }
        let code = &scheme.class(class)?.code;
        let idx = within_class_index.entry(class).or_insert(0);
        let weak = *idx % 2 == 0;
        *idx += 1;

        let intensity = config
            .poi_intensity
            .get(code)
            .copied()
            .unwrap_or(PoiIntensity { weak: 0, strong: 0 });
        let count = if weak { intensity.weak } else { intensity.strong };
        for k in 0..count {
            let cell = p.cells[rng.next_below(p.cells.len() as u64) as usize];
            let center = grid.cell_center(cell);
            let jitter = 0.9 * grid.cellsize;
            let location = PlanarPoint::new(
                center.x + (rng.next_f64() - 0.5) * jitter,
                center.y + (rng.next_f64() - 0.5) * jitter,
            );
            let category = if k == 0 || rng.next_f64() < config.poi_own_category_prob {
                class
            } else {
                // uniform over the other built-up categories
                let others: Vec<ClassId> =
                    bur_categories.iter().copied().filter(|&c| c != class).collect();
                others[rng.next_below(others.len() as u64) as usize]
            };
            pois.push(PoiPoint { location, category });
        }

        let coverage = config.aoi_coverage.get(code).copied().unwrap_or(0.0);
        if coverage > 0.0 {
            let (x0, y0, x1, y1) = cell_bbox(p, grid);
            let (w, h) = (x1 - x0, y1 - y0);
            let target = coverage * p.cells.len() as f64 * grid.cellsize * grid.cellsize;
            let scale = (target / (w * h)).sqrt().min(0.95);
            let (cw, ch) = (w * scale, h * scale);
            let cx = (x0 + x1) / 2.0;
            let cy = (y0 + y1) / 2.0;
            let rect = SimplePolygon::rectangle(
                snap_cell_edge(cx - cw / 2.0, grid.cellsize),
                snap_cell_edge(cy - ch / 2.0, grid.cellsize),
                snap_cell_edge(cx + cw / 2.0, grid.cellsize),
                snap_cell_edge(cy + ch / 2.0, grid.cellsize),
            );
            if let Ok(rect) = rect {
                aois.push(AoiFootprint { footprint: rect, category: class });
            }
        }
    }
    Ok((pois, aois))
}

fn cell_bbox(p: &Parcel, grid: &Grid) -> (f64, f64, f64, f64) {
    let mut x0 = f64::INFINITY;
    let mut y0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    let half = grid.cellsize / 2.0;
    for &cell in &p.cells {
        let c = grid.cell_center(cell);
        x0 = x0.min(c.x - half);
        y0 = y0.min(c.y - half);
        x1 = x1.max(c.x + half);
        y1 = y1.max(c.y + half);
    }
    (x0, y0, x1, y1)
}

/// Pick `train_per_class` training parcels per present class (seeded,
/// without replacement); everything else validates.
fn split_train_validation(
    parcels: &[Parcel],
    assignment: &BTreeMap<u32, ClassId>,
    config: &SynthConfig,
) -> (Vec<ParcelTrainingSample>, Vec<u32>) {
    let mut by_class: BTreeMap<ClassId, Vec<u32>> = BTreeMap::new();
    for p in parcels {
        by_class.entry(assignment[&p.id]).or_default().push(p.id);
    }
    let mut rng = SplitMix64::new(derive(config.seed, 25));
    let mut train = Vec::new();
    for (&class, ids) in &by_class {
        let want = config.train_per_class.min(ids.len());
        for picked in rng.sample_indices(ids.len(), want) {
            train.push(ParcelTrainingSample { parcel_id: ids[picked], label: class });
        }
    }
    train.sort_by_key(|s| s.parcel_id);
    let train_ids: std::collections::BTreeSet<u32> =
        train.iter().map(|s| s.parcel_id).collect();
    let validation = parcels
        .iter()
        .map(|p| p.id)
        .filter(|id| !train_ids.contains(id))
        .collect();
    (train, validation)
}

/// Pixel training blocks: ground-truth cells of each class drawn from
/// training parcels (plus road cells for Transportation and lake cells for
/// Waterbody), split into two blocks per class.
fn pixel_blocks(
    parcels: &[Parcel],
    train: &[ParcelTrainingSample],
    config: &SynthConfig,
    scheme: &CategoryScheme,
    truth: &ClassBand,
) -> Result<Vec<PixelTrainingBlock>> {
    let by_id: BTreeMap<u32, &Parcel> = parcels.iter().map(|p| (p.id, p)).collect();
    let mut zone: Vec<bool> = vec![false; truth.grid().cells()];
    for s in train {
        for &cell in &by_id[&s.parcel_id].cells {
            zone[cell] = true;
        }
    }
    // roads and the lake are outside every parcel: mark all non-parcel cells
    let mut in_parcel = vec![false; truth.grid().cells()];
    for p in parcels {
        for &cell in &p.cells {
            in_parcel[cell] = true;
        }
    }
    for (cell, z) in zone.iter_mut().enumerate() {
        if !in_parcel[cell] {
            *z = true;
        }
    }

    let mut cells_by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for cell in 0..truth.grid().cells() {
        if !zone[cell] {
            continue;
        }
        if let Some(class) = truth.get(cell) {
            let list = cells_by_class.entry(class).or_default();
            if list.len() < config.pixel_block_cells_per_class {
                list.push(cell);
            }
        }
    }
    let mut blocks = Vec::new();
    let mut next_block = 1u32;
    for (&class, cells) in &cells_by_class {
        let half = (cells.len() / 2).max(1);
        for chunk in cells.chunks(half) {
            let mut block = PixelTrainingBlock::from_cells(next_block, chunk.to_vec(), class)?;
            block.note = format!("synthetic {} cells", scheme.class(class)?.code);
            blocks.push(block);
            next_block += 1;
        }
    }
    Ok(blocks)
}

/// Dangle fixture descriptors for tests: (extendable id, trimmable id,
/// keep id).
pub fn dangle_ids(config: &SynthConfig) -> Result<(u64, u64, u64)> {
    let layout = build_layout(config)?;
    Ok((layout.extendable_id, layout.trimmable_id, layout.keep_id))
}

/// The raw road layer of a configuration (core grid plus injected dangles),
/// without generating the full dataset.
pub fn layout_roads(config: &SynthConfig) -> Result<Vec<RoadPolyline>> {
    Ok(build_layout(config)?.roads)
}

/// Wall x-coordinate the extendable dangle must reach after repair.
pub fn expected_extension_x(config: &SynthConfig) -> Result<f64> {
    let layout = build_layout(config)?;
    Ok(layout.margin + (layout.k / 2) as f64 * layout.pitch)
}

impl SynthDataset {
    /// Write every pipeline input plus ground truth and a hash manifest.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let scheme = &self.inputs.scheme;
        std::fs::write(dir.join("scheme.json"), scheme.to_json()?)?;
        geojson::write_polygons(&dir.join("admin.geojson"), std::slice::from_ref(&self.inputs.admin))?;
        geojson::write_roads(&dir.join("roads.geojson"), &self.inputs.roads)?;
        geojson::write_polygons(&dir.join("water.geojson"), &self.inputs.water)?;
        geojson::write_pois(&dir.join("pois.geojson"), &self.inputs.pois, scheme)?;
        geojson::write_aois(&dir.join("aois.geojson"), &self.inputs.aois, scheme)?;
        bandfile::write_raster(&dir.join("raster"), &self.inputs.raster)?;
        let blocks: Vec<(u32, ClassId, Vec<usize>)> = self
            .inputs
            .pixel_blocks
            .iter()
            .map(|b| (b.id, b.label, b.cells.clone()))
            .collect();
        tables::write_blocks(&dir.join("blocks.csv"), &blocks, scheme)?;
        let train: Vec<(u32, ClassId)> = self
            .inputs
            .parcel_training
            .iter()
            .map(|s| (s.parcel_id, s.label))
            .collect();
        tables::write_labels(&dir.join("parcel_train.csv"), &train, scheme)?;
        tables::write_labels(&dir.join("truth_l2.csv"), &self.truth_l2, scheme)?;
        bandfile::write_band(&dir.join("truth_pixels.asc"), &self.truth_pixels.to_band())?;
        std::fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(&self.config)?,
        )?;

        let mut files: BTreeMap<String, String> = BTreeMap::new();
        for name in [
            "scheme.json",
            "admin.geojson",
            "roads.geojson",
            "water.geojson",
            "pois.geojson",
            "aois.geojson",
            "blocks.csv",
            "parcel_train.csv",
            "truth_l2.csv",
            "truth_pixels.asc",
            "config.json",
        ] {
            files.insert(name.to_string(), crate::io::sha256_file(&dir.join(name))?);
        }
        for entry in std::fs::read_dir(dir.join("raster"))? {
            let entry = entry?;
            let name = format!("raster/{}", entry.file_name().to_string_lossy());
            files.insert(name, crate::io::sha256_file(&entry.path())?);
        }
        let manifest = serde_json::json!({
            "expected_parcel_count": self.expected_parcel_count,
            "seed": self.config.seed,
            "validation_parcels": self.validation_parcels,
            "files": files,
        });
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(())
    }
}

/// Load a dataset directory written by [`SynthDataset::write_to_dir`] (or
/// assembled by hand in the same shape) into pipeline inputs plus ground
/// truth.
pub struct LoadedDataset {
    pub inputs: PipelineInputs,
    pub truth_l2: Vec<(u32, ClassId)>,
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let scheme_path = dir.join("scheme.json");
    let scheme = if scheme_path.exists() {
        CategoryScheme::from_json(&crate::io::read_to_string(&scheme_path)?)?
    } else {
        default_scheme()
    };
    let admins = geojson::read_polygons(&dir.join("admin.geojson"))?;
    let admin = admins
        .into_iter()
        .next()
        .ok_or_else(|| Error::Parse {
            path: dir.join("admin.geojson").display().to_string(),
            message: "no admin polygon".into(),
        })?;
    let roads = geojson::read_roads(&dir.join("roads.geojson"))?;
    let water_path = dir.join("water.geojson");
    let water =
        if water_path.exists() { geojson::read_polygons(&water_path)? } else { Vec::new() };
    let pois_path = dir.join("pois.geojson");
    let pois = if pois_path.exists() {
        geojson::read_pois(&pois_path, &scheme, Level::L2)?
    } else {
        Vec::new()
    };
    let aois_path = dir.join("aois.geojson");
    let aois = if aois_path.exists() {
        geojson::read_aois(&aois_path, &scheme, Level::L2)?
    } else {
        Vec::new()
    };
    let raster = bandfile::read_raster(&dir.join("raster"))?;
    let blocks_path = dir.join("blocks.csv");
    let blocks = if blocks_path.exists() {
        tables::read_blocks(&blocks_path, &scheme, Level::L2)?
            .into_iter()
            .map(|(id, label, cells)| PixelTrainingBlock::from_cells(id, cells, label))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let train_path = dir.join("parcel_train.csv");
    let parcel_training = if train_path.exists() {
        tables::read_labels(&train_path, &scheme, Level::L2)?
            .into_iter()
            .map(|(parcel_id, label)| ParcelTrainingSample { parcel_id, label })
            .collect()
    } else {
        Vec::new()
    };
    let truth_path = dir.join("truth_l2.csv");
    let truth_l2 = if truth_path.exists() {
        tables::read_labels(&truth_path, &scheme, Level::L2)?
    } else {
        Vec::new()
    };
    Ok(LoadedDataset {
        inputs: PipelineInputs {
            scheme,
            raster,
            admin,
            roads,
            water,
            pois,
            aois,
            pixel_blocks: blocks,
            parcel_training,
        },
        truth_l2,
    })
}
