//! Parcel-level urban land-use mapping from multisource geospatial data.
//!
//! The pipeline divides a city into land parcels bounded by roads and water,
//! splits the parcels into built-up and non-built-up regions with a pixel-level
//! spectral classifier, then labels each region with a strategy suited to it:
//! pixel majority voting for non-built-up parcels, and a parcel-level random
//! forest fusing spectral means, POI kernel densities, and AOI area proportions
//! for built-up parcels.
//!
//! Everything is deterministic: all randomness flows from explicit 64-bit
//! seeds through the [`rng`] module, reductions run in fixed order, and
//! re-running any stage with the same inputs produces byte-identical outputs
//! regardless of worker count.

pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod geom;
pub mod io;
pub mod parcels;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod scheme;
pub mod synth;

pub use error::Error;
pub use features::{AoiFootprint, FeatureSchema, FeatureVector, PoiPoint};
pub use forest::{ForestModel, TrainConfig};
pub use geom::{PlanarPoint, RoadClass, RoadPolyline, SimplePolygon};
pub use parcels::Parcel;
pub use pipeline::{LandUseMap, PipelineConfig, PipelineInputs};
pub use raster::{Band, ClassBand, Grid, MultibandRaster};
pub use scheme::{CategoryScheme, ClassId, LandUseClass, Level};
pub use synth::SynthConfig;
