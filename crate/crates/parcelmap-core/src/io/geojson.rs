//! GeoJSON readers and writers for the vector layers. Coordinates are
//! projected meters; no CRS handling is performed (or declared) here.
//!
//! Roads are LineString features with `id` and `road_class` (1, 2, 3)
//! properties; water and admin layers are Polygon/MultiPolygon features;
//! POIs are Point features and AOIs Polygon features, both carrying a
//! `category` property holding a scheme code.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::features::{AoiFootprint, PoiPoint};
use crate::geom::{PlanarPoint, RoadClass, RoadPolyline, SimplePolygon};
use crate::parcels::Parcel;
use crate::scheme::{CategoryScheme, ClassId, Level};

use super::{parse_error, read_to_string};

pub(crate) fn feature(geometry: Value, properties: Map<String, Value>) -> Value {
    json!({ "type": "Feature", "geometry": geometry, "properties": properties })
}

pub(crate) fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

pub(crate) fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_features(path: &Path) -> Result<Vec<(Value, Map<String, Value>)>> {
    let doc: Value = serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| parse_error(path, e.to_string()))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_error(path, "not a FeatureCollection"))?;
    features
        .iter()
        .map(|f| {
            let geometry = f
                .get("geometry")
                .cloned()
                .ok_or_else(|| parse_error(path, "feature without geometry"))?;
            let properties = f
                .get("properties")
                .and_then(Value::as_object)
                .cloned()
                .unwrap_or_default();
            Ok((geometry, properties))
        })
        .collect()
}

fn coord_pair(v: &Value, path: &Path) -> Result<PlanarPoint> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| parse_error(path, "coordinate is not an [x, y] pair"))?;
    let x = arr[0].as_f64().ok_or_else(|| parse_error(path, "non-numeric x"))?;
    let y = arr[1].as_f64().ok_or_else(|| parse_error(path, "non-numeric y"))?;
    Ok(PlanarPoint::new(x, y))
}

fn ring_coords(ring: &[PlanarPoint]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = pts.first().cloned() {
        pts.push(first); // close the ring
    }
    Value::Array(pts)
}

pub(crate) fn polygon_geometry(poly: &SimplePolygon) -> Value {
    let mut rings = vec![ring_coords(poly.exterior())];
    rings.extend(poly.holes().iter().map(|h| ring_coords(h)));
    json!({ "type": "Polygon", "coordinates": rings })
}

fn parse_ring(v: &Value, path: &Path) -> Result<Vec<PlanarPoint>> {
    v.as_array()
        .ok_or_else(|| parse_error(path, "ring is not an array"))?
        .iter()
        .map(|c| coord_pair(c, path))
        .collect()
}

fn parse_polygon(rings: &Value, path: &Path) -> Result<SimplePolygon> {
    let rings = rings
        .as_array()
        .ok_or_else(|| parse_error(path, "polygon coordinates not an array"))?;
    if rings.is_empty() {
        return Err(parse_error(path, "polygon with no rings"));
    }
    let exterior = parse_ring(&rings[0], path)?;
    let holes = rings[1..]
        .iter()
        .map(|r| parse_ring(r, path))
        .collect::<Result<Vec<_>>>()?;
    SimplePolygon::new(exterior, holes)
}

/// Polygons from Polygon or MultiPolygon geometry.
fn parse_polygons(geometry: &Value, path: &Path) -> Result<Vec<SimplePolygon>> {
    let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| parse_error(path, "geometry without coordinates"))?;
    match gtype {
        "Polygon" => Ok(vec![parse_polygon(coords, path)?]),
        "MultiPolygon" => coords
            .as_array()
            .ok_or_else(|| parse_error(path, "MultiPolygon coordinates not an array"))?
            .iter()
            .map(|p| parse_polygon(p, path))
            .collect(),
        other => Err(parse_error(path, format!("expected polygons, found {other:?}"))),
    }
}

pub fn write_polygons(path: &Path, polys: &[SimplePolygon]) -> Result<()> {
    let features = polys
        .iter()
        .map(|p| feature(polygon_geometry(p), Map::new()))
        .collect();
    write_json(path, &feature_collection(features))
}

pub fn read_polygons(path: &Path) -> Result<Vec<SimplePolygon>> {
    let mut out = Vec::new();
    for (geometry, _) in read_features(path)? {
        out.extend(parse_polygons(&geometry, path)?);
    }
    Ok(out)
}

pub fn write_roads(path: &Path, roads: &[RoadPolyline]) -> Result<()> {
    let features = roads
        .iter()
        .map(|r| {
            let coords: Vec<Value> = r.vertices.iter().map(|p| json!([p.x, p.y])).collect();
            let mut props = Map::new();
            props.insert("id".into(), json!(r.id));
            props.insert("road_class".into(), json!(r.road_class.number()));
            feature(json!({ "type": "LineString", "coordinates": coords }), props)
        })
        .collect();
    write_json(path, &feature_collection(features))
}

pub fn read_roads(path: &Path) -> Result<Vec<RoadPolyline>> {
    let mut out = Vec::new();
    for (i, (geometry, props)) in read_features(path)?.into_iter().enumerate() {
        let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
        if gtype != "LineString" {
            return Err(parse_error(path, format!("road feature {i} is {gtype:?}")));
        }
        let coords = geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_error(path, "LineString without coordinates"))?;
        let vertices = coords
            .iter()
            .map(|c| coord_pair(c, path))
            .collect::<Result<Vec<_>>>()?;
        let id = props
            .get("id")
            .and_then(Value::as_u64)
            .unwrap_or(i as u64 + 1);
        let class_num = props
            .get("road_class")
            .and_then(Value::as_u64)
            .ok_or_else(|| parse_error(path, format!("road {id} missing road_class")))?;
        let road_class = RoadClass::from_number(class_num as u8)
            .ok_or_else(|| parse_error(path, format!("road {id}: bad road_class {class_num}")))?;
        out.push(RoadPolyline::new(id, vertices, road_class)?);
    }
    Ok(out)
}

fn category_of(
    props: &Map<String, Value>,
    scheme: &CategoryScheme,
    level: Level,
    path: &Path,
    what: &str,
) -> Result<ClassId> {
    let code = props
        .get("category")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error(path, format!("{what} missing category property")))?;
    let class = scheme
        .by_code(level, code)
        .ok_or_else(|| parse_error(path, format!("unknown {} category {code:?}", level.name())))?;
    if !scheme.is_builtup(class.id)? {
        return Err(parse_error(path, format!("{what} category {code:?} is not built-up")));
    }
    Ok(class.id)
}

pub fn write_pois(path: &Path, pois: &[PoiPoint], scheme: &CategoryScheme) -> Result<()> {
    let features = pois
        .iter()
        .map(|p| {
            let mut props = Map::new();
            let code = scheme.class(p.category).map(|c| c.code.clone())?;
            props.insert("category".into(), json!(code));
            Ok(feature(
                json!({ "type": "Point", "coordinates": [p.location.x, p.location.y] }),
                props,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(path, &feature_collection(features))
}

pub fn read_pois(path: &Path, scheme: &CategoryScheme, level: Level) -> Result<Vec<PoiPoint>> {
    let mut out = Vec::new();
    for (geometry, props) in read_features(path)? {
        let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
        if gtype != "Point" {
            return Err(parse_error(path, format!("POI feature is {gtype:?}")));
        }
        let location = coord_pair(
            geometry
                .get("coordinates")
                .ok_or_else(|| parse_error(path, "Point without coordinates"))?,
            path,
        )?;
        let category = category_of(&props, scheme, level, path, "POI")?;
        out.push(PoiPoint { location, category });
    }
    Ok(out)
}

pub fn write_aois(path: &Path, aois: &[AoiFootprint], scheme: &CategoryScheme) -> Result<()> {
    let features = aois
        .iter()
        .map(|a| {
            let mut props = Map::new();
            let code = scheme.class(a.category).map(|c| c.code.clone())?;
            props.insert("category".into(), json!(code));
            Ok(feature(polygon_geometry(&a.footprint), props))
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(path, &feature_collection(features))
}

pub fn read_aois(path: &Path, scheme: &CategoryScheme, level: Level) -> Result<Vec<AoiFootprint>> {
    let mut out = Vec::new();
    for (geometry, props) in read_features(path)? {
        let category = category_of(&props, scheme, level, path, "AOI")?;
        for footprint in parse_polygons(&geometry, path)? {
            out.push(AoiFootprint { footprint, category });
        }
    }
    Ok(out)
}

/// Parcel outlines with id, area, and any assigned labels.
pub fn write_parcels(path: &Path, parcels: &[Parcel], scheme: &CategoryScheme) -> Result<()> {
    let features = parcels
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("id".into(), json!(p.id));
            props.insert("area_m2".into(), json!(p.area));
            props.insert("cells".into(), json!(p.cells.len()));
            for (key, label) in
                [("l0", p.level0), ("l1", p.level1), ("l2", p.level2)]
            {
                if let Some(c) = label {
                    props.insert(key.into(), json!(scheme.class(c)?.code));
                }
            }
            Ok(feature(polygon_geometry(&p.outline), props))
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(path, &feature_collection(features))
}
