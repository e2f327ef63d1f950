//! Planar vector primitives and the road-network conditioning steps that
//! precede parcel generation: topology repair of dangling road ends,
//! class-dependent road widening, and rasterization of vector layers onto the
//! analysis grid.
//!
//! Coordinates are projected meters. No geodetic handling happens here; inputs
//! must already be projected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Band, Grid};

/// Endpoints closer than this to another road count as connected.
pub const SNAP_TOLERANCE: f64 = 0.5;
/// Default reach when extending a dangling road end toward a neighbor.
pub const DEFAULT_EXTEND_MAX: f64 = 500.0;
/// Default length under which an unconnected road is discarded.
pub const DEFAULT_TRIM_MIN: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Road grade. First-level roads are motorways and trunks, second-level
/// national/regional roads, third-level local roads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoadClass {
    L1,
    L2,
    L3,
}

impl RoadClass {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(RoadClass::L1),
            2 => Some(RoadClass::L2),
            3 => Some(RoadClass::L3),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            RoadClass::L1 => 1,
            RoadClass::L2 => 2,
            RoadClass::L3 => 3,
        }
    }
}

/// Full widened width of a road, by class. Rasterization paints every cell
/// whose center lies within half this width of the centerline.
pub fn buffer_width(class: RoadClass) -> f64 {
    match class {
        RoadClass::L1 => 40.0,
        RoadClass::L2 => 20.0,
        RoadClass::L3 => 10.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadPolyline {
    pub id: u64,
    pub vertices: Vec<PlanarPoint>,
    pub road_class: RoadClass,
}

impl RoadPolyline {
    pub fn new(id: u64, vertices: Vec<PlanarPoint>, road_class: RoadClass) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidPolyline(format!("road {id}: fewer than 2 vertices")));
        }
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidPolyline(format!(
                    "road {id}: repeated consecutive vertex"
                )));
            }
        }
        for v in &vertices {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::InvalidPolyline(format!("road {id}: non-finite vertex")));
            }
        }
        Ok(Self { id, vertices, road_class })
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// A polygon with an exterior ring and optional holes. Rings are stored open
/// (no repeated terminal vertex); construction normalizes the exterior to
/// counter-clockwise and holes to clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplePolygon {
    exterior: Vec<PlanarPoint>,
    holes: Vec<Vec<PlanarPoint>>,
}

fn normalize_ring(mut ring: Vec<PlanarPoint>, want_ccw: bool) -> Result<Vec<PlanarPoint>> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::DegenerateRing);
    }
    let area = signed_area(&ring);
    if area == 0.0 {
        return Err(Error::DegenerateRing);
    }
    if (area > 0.0) != want_ccw {
        ring.reverse();
    }
    Ok(ring)
}

/// Signed shoelace area of an open ring (positive = counter-clockwise).
pub fn signed_area(ring: &[PlanarPoint]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

impl SimplePolygon {
    pub fn new(exterior: Vec<PlanarPoint>, holes: Vec<Vec<PlanarPoint>>) -> Result<Self> {
        let exterior = normalize_ring(exterior, true)?;
        let holes = holes
            .into_iter()
            .map(|h| normalize_ring(h, false))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { exterior, holes })
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        Self::new(
            vec![
                PlanarPoint::new(xa, ya),
                PlanarPoint::new(xb, ya),
                PlanarPoint::new(xb, yb),
                PlanarPoint::new(xa, yb),
            ],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[PlanarPoint] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<PlanarPoint>] {
        &self.holes
    }

    /// Shoelace area of the exterior minus the holes.
    pub fn area(&self) -> f64 {
        let ext = signed_area(&self.exterior).abs();
        let holes: f64 = self.holes.iter().map(|h| signed_area(h).abs()).sum();
        ext - holes
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for p in &self.exterior {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        (min_x, min_y, max_x, max_y)
    }

    /// Even-odd containment; points on any ring boundary count as inside.
    pub fn contains(&self, p: &PlanarPoint) -> bool {
        const EDGE_EPS: f64 = 1e-9;
        let on_ring = |ring: &[PlanarPoint]| {
            let n = ring.len();
            (0..n).any(|i| point_segment_distance(p, &ring[i], &ring[(i + 1) % n]) <= EDGE_EPS)
        };
        if on_ring(&self.exterior) || self.holes.iter().any(|h| on_ring(h)) {
            return true;
        }
        let mut inside = false;
        let mut cross = |ring: &[PlanarPoint]| {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if (a.y > p.y) != (b.y > p.y) {
                    let x_int = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if p.x < x_int {
                        inside = !inside;
                    }
                }
            }
        };
        cross(&self.exterior);
        for h in &self.holes {
            cross(h);
        }
        inside
    }
}

/// Shoelace area of a polygon (exterior minus holes). Errors on degenerate
/// rings, which `SimplePolygon` construction already rejects.
pub fn polygon_area(poly: &SimplePolygon) -> Result<f64> {
    let a = poly.area();
    if a <= 0.0 {
        return Err(Error::DegenerateRing);
    }
    Ok(a)
}

pub fn point_segment_distance(p: &PlanarPoint, a: &PlanarPoint, b: &PlanarPoint) -> f64 {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0);
    let q = PlanarPoint::new(a.x + t * ex, a.y + t * ey);
    p.distance(&q)
}

/// Repair dangling road ends. Each endpoint not within [`SNAP_TOLERANCE`] of
/// another road casts a ray along its final segment; if the ray meets another
/// road within `extend_max` the endpoint is moved to that intersection. All
/// extensions are computed against the original geometry, then applied. Any
/// polyline still dangling afterwards whose total length is under `trim_min`
/// is dropped. Output is sorted by road id.
pub fn repair_topology(
    roads: &[RoadPolyline],
    extend_max: f64,
    trim_min: f64,
) -> Vec<RoadPolyline> {
    #[derive(Clone, Copy)]
    enum End {
        Start,
        Finish,
    }

    let endpoint_dangles = |set: &[RoadPolyline], idx: usize, p: &PlanarPoint| -> bool {
        !set.iter().enumerate().any(|(j, other)| {
            j != idx
                && other
                    .vertices
                    .windows(2)
                    .any(|w| point_segment_distance(p, &w[0], &w[1]) <= SNAP_TOLERANCE)
        })
    };

    // Phase 1: collect extensions against the original geometry.
    let mut extensions: Vec<(usize, End, PlanarPoint)> = Vec::new();
    for (i, road) in roads.iter().enumerate() {
        let n = road.vertices.len();
        let ends = [
            (End::Start, road.vertices[0], road.vertices[1]),
            (End::Finish, road.vertices[n - 1], road.vertices[n - 2]),
        ];
        for (which, tip, prev) in ends {
            if !endpoint_dangles(roads, i, &tip) {
                continue;
            }
            let len = tip.distance(&prev);
            let dir = PlanarPoint::new((tip.x - prev.x) / len, (tip.y - prev.y) / len);
            let mut best_t = f64::INFINITY;
            for (j, other) in roads.iter().enumerate() {
                if j == i {
                    continue;
                }
                for w in other.vertices.windows(2) {
                    if let Some(t) = ray_segment_hit(&tip, &dir, &w[0], &w[1]) {
                        if t < best_t {
                            best_t = t;
                        }
                    }
                }
            }
            if best_t <= extend_max {
                let hit = PlanarPoint::new(tip.x + best_t * dir.x, tip.y + best_t * dir.y);
                extensions.push((i, which, hit));
            }
        }
    }

    let mut repaired: Vec<RoadPolyline> = roads.to_vec();
    for (i, which, hit) in extensions {
        match which {
            End::Start => repaired[i].vertices.insert(0, hit),
            End::Finish => repaired[i].vertices.push(hit),
        }
    }

    // Phase 2: drop short polylines that still dangle.
    let keep: Vec<bool> = repaired
        .iter()
        .enumerate()
        .map(|(i, road)| {
            if road.length() >= trim_min {
                return true;
            }
            let n = road.vertices.len();
            let start_ok = !endpoint_dangles(&repaired, i, &road.vertices[0]);
            let end_ok = !endpoint_dangles(&repaired, i, &road.vertices[n - 1]);
            start_ok && end_ok
        })
        .collect();
    let mut out: Vec<RoadPolyline> = repaired
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    out.sort_by_key(|r| r.id);
    out
}

/// Distance along the ray (origin `p`, unit direction `d`) to segment `ab`,
/// if they intersect ahead of the origin.
fn ray_segment_hit(p: &PlanarPoint, d: &PlanarPoint, a: &PlanarPoint, b: &PlanarPoint) -> Option<f64> {
    const EPS: f64 = 1e-12;
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let denom = d.x * ey - d.y * ex;
    if denom.abs() < EPS {
        return None; // parallel (collinear overlap not treated as a hit)
    }
    let (wx, wy) = (a.x - p.x, a.y - p.y);
    let t = (wx * ey - wy * ex) / denom;
    let u = (wx * d.y - wy * d.x) / denom;
    (t > 1e-9 && (-EPS..=1.0 + EPS).contains(&u)).then_some(t)
}

/// Mark every cell whose center lies within half the class buffer width of a
/// road centerline.
pub fn rasterize_roads(roads: &[RoadPolyline], grid: &Grid) -> Band {
    let mut mask = Band::filled(grid.clone(), 0.0);
    for road in roads {
        let half = buffer_width(road.road_class) / 2.0;
        for w in road.vertices.windows(2) {
            stamp_segment(&mut mask, grid, &w[0], &w[1], half);
        }
    }
    mask
}

fn stamp_segment(mask: &mut Band, grid: &Grid, a: &PlanarPoint, b: &PlanarPoint, half: f64) {
    let min_x = a.x.min(b.x) - half;
    let max_x = a.x.max(b.x) + half;
    let min_y = a.y.min(b.y) - half;
    let max_y = a.y.max(b.y) + half;
    let Some((c0, c1, r0, r1)) = cell_window(grid, min_x, min_y, max_x, max_y) else {
        return;
    };
    for row in r0..=r1 {
        for col in c0..=c1 {
            let idx = grid.index(row, col);
            if mask.get(idx) == 1.0 {
                continue;
            }
            let center = grid.cell_center(idx);
            if point_segment_distance(&center, a, b) <= half {
                mask.set(idx, 1.0);
            }
        }
    }
}

/// Mark every cell whose center falls inside any of the polygons (even-odd
/// rule, boundary inclusive).
pub fn rasterize_polygons(polys: &[SimplePolygon], grid: &Grid) -> Band {
    rasterize_polygons_impl(polys.iter(), grid)
}

pub fn rasterize_polygons_impl<'a>(
    polys: impl Iterator<Item = &'a SimplePolygon>,
    grid: &Grid,
) -> Band {
    let mut mask = Band::filled(grid.clone(), 0.0);
    for poly in polys {
        let (min_x, min_y, max_x, max_y) = poly.bbox();
        let Some((c0, c1, r0, r1)) = cell_window(grid, min_x, min_y, max_x, max_y) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let idx = grid.index(row, col);
                if mask.get(idx) == 1.0 {
                    continue;
                }
                if poly.contains(&grid.cell_center(idx)) {
                    mask.set(idx, 1.0);
                }
            }
        }
    }
    mask
}

/// Clamp a world-coordinate box to (col, row) index ranges, padded one cell.
fn cell_window(
    grid: &Grid,
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
) -> Option<(usize, usize, usize, usize)> {
    let cs = grid.cellsize;
    let c0 = (((min_x - grid.origin_x) / cs).floor() as i64 - 1).max(0) as usize;
    let c1 = (((max_x - grid.origin_x) / cs).ceil() as i64 + 1).min(grid.ncols as i64 - 1);
    let up0 = (((min_y - grid.origin_y) / cs).floor() as i64 - 1).max(0);
    let up1 = (((max_y - grid.origin_y) / cs).ceil() as i64 + 1).min(grid.nrows as i64 - 1);
    if c1 < 0 || up1 < 0 || c0 >= grid.ncols || up0 >= grid.nrows as i64 {
        return None;
    }
    let r0 = (grid.nrows as i64 - 1 - up1).max(0) as usize;
    let r1 = (grid.nrows as i64 - 1 - up0).min(grid.nrows as i64 - 1) as usize;
    Some((c0, c1 as usize, r0, r1))
}
