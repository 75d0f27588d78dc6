//! Adaptive partition of the earth into classification cells.
//!
//! The partition is a quadtree over the lat/lon rectangle
//! `[-90, 90] x [-180, 180)`: a node is split into four equal sub-rectangles
//! while it holds more than `max_count` training points, and leaves holding
//! fewer than `min_count` points are dropped. Each retained leaf becomes a
//! [`Cell`] whose location is the mean of its member points.
//!
//! Cell ids encode the quadtree path, so a cell's bounds and depth can be
//! recovered from the id alone.

use std::collections::HashSet;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geodesy::{gcd, normalize_lon, DistanceKm, GeoPoint, EARTH_RADIUS_KM};

/// Deepest quadtree level a [`CellId`] can encode.
pub const MAX_ENCODABLE_DEPTH: u32 = 31;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("empty input: no training points")]
    EmptyInput,
    #[error("every cell fell below min_count; {discarded} points discarded, zero retained cells")]
    NoRetainedCells { discarded: usize },
    #[error("invalid partition parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("unknown cell id {0}")]
    UnknownCell(CellId),
    #[error("duplicate cell id {0}")]
    DuplicateCell(CellId),
    #[error("cell id {0} is not a valid quadtree path")]
    MalformedId(u64),
    #[error("cell {id}: depth {depth} does not match the id's depth")]
    DepthMismatch { id: CellId, depth: u32 },
    #[error("cell {id}: count {count} below min_count {min_count}")]
    CountBelowMinimum {
        id: CellId,
        count: usize,
        min_count: usize,
    },
    #[error("cell {id}: center {center} lies outside the cell bounds")]
    CenterOutsideBounds { id: CellId, center: GeoPoint },
    #[error("grid has no cells")]
    Empty,
    #[error(transparent)]
    Params(#[from] PartitionError),
}

/// Quadtree-path cell identifier: a leading sentinel bit followed by two
/// bits per level (bit 1 = north half, bit 0 = east half).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(u64);

impl CellId {
    pub const ROOT: CellId = CellId(1);

    pub fn from_raw(raw: u64) -> Result<Self, GridError> {
        if raw == 0 || !(63 - raw.leading_zeros()).is_multiple_of(2) {
            return Err(GridError::MalformedId(raw));
        }
        Ok(CellId(raw))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn depth(self) -> u32 {
        (63 - self.0.leading_zeros()) / 2
    }

    fn child(self, quadrant: u64) -> CellId {
        CellId((self.0 << 2) | quadrant)
    }

    /// Lat/lon rectangle covered by this cell.
    pub fn bounds(self) -> LatLonRect {
        let mut rect = LatLonRect::GLOBE;
        for level in (0..self.depth()).rev() {
            rect = rect.quadrant((self.0 >> (2 * level)) & 0b11);
        }
        rect
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Half-open rectangle `[lat_lo, lat_hi) x [lon_lo, lon_hi)`; the row
/// touching the north pole also contains `lat == 90`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLonRect {
    pub lat_lo: f64,
    pub lat_hi: f64,
    pub lon_lo: f64,
    pub lon_hi: f64,
}

impl LatLonRect {
    pub const GLOBE: LatLonRect = LatLonRect {
        lat_lo: -90.0,
        lat_hi: 90.0,
        lon_lo: -180.0,
        lon_hi: 180.0,
    };

    fn mid(&self) -> (f64, f64) {
        (
            0.5 * (self.lat_lo + self.lat_hi),
            0.5 * (self.lon_lo + self.lon_hi),
        )
    }

    fn quadrant(&self, q: u64) -> LatLonRect {
        let (mid_lat, mid_lon) = self.mid();
        let (lat_lo, lat_hi) = if q & 0b10 != 0 {
            (mid_lat, self.lat_hi)
        } else {
            (self.lat_lo, mid_lat)
        };
        let (lon_lo, lon_hi) = if q & 0b01 != 0 {
            (mid_lon, self.lon_hi)
        } else {
            (self.lon_lo, mid_lon)
        };
        LatLonRect {
            lat_lo,
            lat_hi,
            lon_lo,
            lon_hi,
        }
    }

    fn quadrant_of(&self, p: &GeoPoint) -> u64 {
        let (mid_lat, mid_lon) = self.mid();
        (u64::from(p.lat() >= mid_lat) << 1) | u64::from(p.lon() >= mid_lon)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        let lat_ok = (p.lat() >= self.lat_lo && p.lat() < self.lat_hi)
            || (p.lat() == 90.0 && self.lat_hi == 90.0);
        lat_ok && p.lon() >= self.lon_lo && p.lon() < self.lon_hi
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &LatLonRect) -> bool {
        self.lat_lo < other.lat_hi
            && other.lat_lo < self.lat_hi
            && self.lon_lo < other.lon_hi
            && other.lon_lo < self.lon_hi
    }

    /// Extent in square degrees.
    pub fn area_deg2(&self) -> f64 {
        (self.lat_hi - self.lat_lo) * (self.lon_hi - self.lon_lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionParams {
    pub min_count: usize,
    pub max_count: usize,
    pub max_depth: u32,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            min_count: 50,
            max_count: 1000,
            max_depth: 16,
        }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.min_count == 0 {
            return Err(PartitionError::InvalidParams(
                "min_count must be > 0".into(),
            ));
        }
        if self.min_count > self.max_count {
            return Err(PartitionError::InvalidParams(format!(
                "min_count {} exceeds max_count {}",
                self.min_count, self.max_count
            )));
        }
        if self.max_depth > MAX_ENCODABLE_DEPTH {
            return Err(PartitionError::InvalidParams(format!(
                "max_depth {} exceeds {}",
                self.max_depth, MAX_ENCODABLE_DEPTH
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub center: GeoPoint,
    pub count: usize,
    pub depth: u32,
}

/// Short content hash identifying a grid; prediction files carry it so a
/// mismatched grid is caught on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridFingerprint([u8; 8]);

impl GridFingerprint {
    pub fn parse(hex_str: &str) -> Option<Self> {
        let bytes = hex::decode(hex_str).ok()?;
        Some(GridFingerprint(bytes.try_into().ok()?))
    }
}

impl fmt::Display for GridFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// Immutable set of cells with a radius-query index over their centers.
#[derive(Debug, Clone)]
pub struct CellGrid {
    cells: Vec<Cell>,
    params: PartitionParams,
    index: LatBandIndex,
    fingerprint: GridFingerprint,
}

impl PartialEq for CellGrid {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells && self.params == other.params
    }
}

impl CellGrid {
    /// Assembles a grid from already-built cells (e.g. read from a file).
    pub fn from_cells(mut cells: Vec<Cell>, params: PartitionParams) -> Result<Self, GridError> {
        params.validate()?;
        if cells.is_empty() {
            return Err(GridError::Empty);
        }
        cells.sort_by_key(|c| c.id);
        let mut seen = HashSet::with_capacity(cells.len());
        for cell in &cells {
            if !seen.insert(cell.id) {
                return Err(GridError::DuplicateCell(cell.id));
            }
            if cell.id.depth() != cell.depth {
                return Err(GridError::DepthMismatch {
                    id: cell.id,
                    depth: cell.depth,
                });
            }
            if cell.count < params.min_count {
                return Err(GridError::CountBelowMinimum {
                    id: cell.id,
                    count: cell.count,
                    min_count: params.min_count,
                });
            }
            if !cell.id.bounds().contains(&cell.center) {
                return Err(GridError::CenterOutsideBounds {
                    id: cell.id,
                    center: cell.center,
                });
            }
        }
        let index = LatBandIndex::new(&cells);
        let fingerprint = fingerprint_of(&cells);
        Ok(Self {
            cells,
            params,
            index,
            fingerprint,
        })
    }

    /// Cells sorted by id.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn params(&self) -> PartitionParams {
        self.params
    }

    pub fn fingerprint(&self) -> GridFingerprint {
        self.fingerprint
    }

    /// Position of `id` in [`cells`](Self::cells).
    pub fn index_of(&self, id: CellId) -> Option<usize> {
        self.cells.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn get(&self, id: CellId) -> Option<&Cell> {
        self.index_of(id).map(|i| &self.cells[i])
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.index_of(id).is_some()
    }

    pub fn cell_center(&self, id: CellId) -> Result<GeoPoint, GridError> {
        self.get(id)
            .map(|c| c.center)
            .ok_or(GridError::UnknownCell(id))
    }

    /// Ids (ascending) of every cell whose center is within `d` of the
    /// center of `origin`, the origin included.
    pub fn cells_within(&self, origin: CellId, d: DistanceKm) -> Result<Vec<CellId>, GridError> {
        let center = self.cell_center(origin)?;
        Ok(self.cells_near(center, d))
    }

    /// Ids (ascending) of every cell whose center is within `d` of `point`.
    pub fn cells_near(&self, point: GeoPoint, d: DistanceKm) -> Vec<CellId> {
        let mut ids: Vec<CellId> = self
            .index
            .candidates(point, d)
            .map(|i| &self.cells[i])
            .filter(|c| gcd(point, c.center) <= d)
            .map(|c| c.id)
            .collect();
        ids.sort_unstable();
        ids
    }
}

fn fingerprint_of(cells: &[Cell]) -> GridFingerprint {
    let mut hasher = Sha256::new();
    for c in cells {
        hasher.update(
            format!(
                "{},{},{},{},{}\n",
                c.id,
                c.center.lat(),
                c.center.lon(),
                c.count,
                c.depth
            )
            .as_bytes(),
        );
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    GridFingerprint(out)
}

/// Cell centers sorted by latitude; a query scans the latitude band of the
/// search radius and prunes by longitude extent where the band stays clear
/// of the poles.
#[derive(Debug, Clone)]
struct LatBandIndex {
    order: Vec<usize>,
    lats: Vec<f64>,
    lons: Vec<f64>,
}

/// Slack added to the pruning bounds, degrees. The exact distance test runs
/// afterwards, so the bounds only need to be conservative.
const PRUNE_MARGIN_DEG: f64 = 1e-6;

impl LatBandIndex {
    fn new(cells: &[Cell]) -> Self {
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| {
            cells[a]
                .center
                .lat()
                .total_cmp(&cells[b].center.lat())
                .then(cells[a].id.cmp(&cells[b].id))
        });
        let lats = order.iter().map(|&i| cells[i].center.lat()).collect();
        let lons = order.iter().map(|&i| cells[i].center.lon()).collect();
        Self { order, lats, lons }
    }

    fn candidates(&self, point: GeoPoint, d: DistanceKm) -> Box<dyn Iterator<Item = usize> + '_> {
        if d.covers_globe() {
            return Box::new(self.order.iter().copied());
        }
        let delta = d.value() / EARTH_RADIUS_KM;
        let delta_deg = delta.to_degrees() + PRUNE_MARGIN_DEG;
        let lat_min = point.lat() - delta_deg;
        let lat_max = point.lat() + delta_deg;
        let start = self.lats.partition_point(|&la| la < lat_min);
        let end = self.lats.partition_point(|&la| la <= lat_max);

        let lon_extent = if lat_max >= 90.0 || lat_min <= -90.0 {
            None
        } else {
            let ratio = delta.sin() / point.lat().to_radians().cos();
            (ratio < 1.0).then(|| ratio.asin().to_degrees() + PRUNE_MARGIN_DEG)
        };
        let lon0 = point.lon();
        Box::new((start..end).filter_map(move |k| match lon_extent {
            Some(ext) => {
                let dlon = normalize_lon(self.lons[k] - lon0).expect("finite").abs();
                (dlon <= ext).then_some(self.order[k])
            }
            None => Some(self.order[k]),
        }))
    }
}

/// Result of [`build_partition`].
#[derive(Debug, Clone)]
pub struct Partition {
    pub grid: CellGrid,
    /// Training points that fell into dropped leaves.
    pub discarded_points: usize,
    /// Leaves dropped for holding fewer than `min_count` points (including
    /// empty ones); together with the retained cells they tile the globe.
    pub dropped_leaves: Vec<CellId>,
}

/// Builds the adaptive quadtree partition over `points`.
pub fn build_partition(
    points: &[GeoPoint],
    params: PartitionParams,
) -> Result<Partition, PartitionError> {
    params.validate()?;
    if points.is_empty() {
        return Err(PartitionError::EmptyInput);
    }
    let mut builder = Builder {
        params,
        cells: Vec::new(),
        dropped: Vec::new(),
        discarded: 0,
    };
    builder.split(CellId::ROOT, LatLonRect::GLOBE, points.to_vec());
    if builder.cells.is_empty() {
        return Err(PartitionError::NoRetainedCells {
            discarded: builder.discarded,
        });
    }
    let grid = CellGrid::from_cells(builder.cells, params)
        .expect("quadtree leaves satisfy the grid invariants");
    Ok(Partition {
        grid,
        discarded_points: builder.discarded,
        dropped_leaves: builder.dropped,
    })
}

struct Builder {
    params: PartitionParams,
    cells: Vec<Cell>,
    dropped: Vec<CellId>,
    discarded: usize,
}

impl Builder {
    fn split(&mut self, id: CellId, rect: LatLonRect, points: Vec<GeoPoint>) {
        let depth = id.depth();
        if points.len() > self.params.max_count && depth < self.params.max_depth {
            let mut children: [Vec<GeoPoint>; 4] = Default::default();
            for p in points {
                children[rect.quadrant_of(&p) as usize].push(p);
            }
            for (q, child_points) in children.into_iter().enumerate() {
                let q = q as u64;
                self.split(id.child(q), rect.quadrant(q), child_points);
            }
        } else if points.len() >= self.params.min_count {
            self.cells.push(Cell {
                id,
                center: mean_location(&points, depth == 0),
                count: points.len(),
                depth,
            });
        } else {
            self.discarded += points.len();
            self.dropped.push(id);
        }
    }
}

/// Arithmetic mean of latitudes and longitudes.
///
/// Longitudes are averaged as offsets from a reference direction so that
/// points straddling the antimeridian average correctly. Below the root no
/// cell crosses the antimeridian, and the first point serves as reference;
/// at the root the reference is the circular mean direction.
fn mean_location(points: &[GeoPoint], wraps: bool) -> GeoPoint {
    let n = points.len() as f64;
    let first = points[0];

    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;
    let mut lat_offset = 0.0;
    for p in points {
        lat_offset += p.lat() - first.lat();
        lat_min = lat_min.min(p.lat());
        lat_max = lat_max.max(p.lat());
    }
    let lat = (first.lat() + lat_offset / n).clamp(lat_min, lat_max);

    let lon = if wraps {
        let (s, c) = points.iter().fold((0.0, 0.0), |(s, c), p| {
            let r = p.lon().to_radians();
            (s + r.sin(), c + r.cos())
        });
        let reference = normalize_lon(s.atan2(c).to_degrees()).expect("finite");
        let offset: f64 = points
            .iter()
            .map(|p| normalize_lon(p.lon() - reference).expect("finite"))
            .sum();
        normalize_lon(reference + offset / n).expect("finite")
    } else {
        let mut lon_min = f64::INFINITY;
        let mut lon_max = f64::NEG_INFINITY;
        let mut offset = 0.0;
        for p in points {
            offset += p.lon() - first.lon();
            lon_min = lon_min.min(p.lon());
            lon_max = lon_max.max(p.lon());
        }
        (first.lon() + offset / n).clamp(lon_min, lon_max)
    };
    GeoPoint::new(lat, lon).expect("mean of valid points")
}
