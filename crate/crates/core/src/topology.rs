//! Access-point grid geometry.
//!
//! An `rows x cols` grid of access points sits inside a `(rows+1) x (cols+1)`
//! grid of square regions. Every AP lies on the shared corner of four
//! regions; a region therefore holds between one (grid corner) and four
//! (interior) APs. Both grids are numbered row-major from the top-left.

use std::fmt;

use crate::error::{PmmsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApId(pub u16);

impl ApId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(pub u16);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A position on the floor plan, in meters. `y` grows downwards with the
/// row index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Linear interpolation towards `other`; `t = 0` is `self`.
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology {
    ap_rows: usize,
    ap_cols: usize,
    ap_spacing: f64,
    ap_positions: Vec<Point>,
    region_aps: Vec<Vec<ApId>>,
    ap_regions: Vec<Vec<RegionId>>,
    ap_neighbors: Vec<Vec<ApId>>,
}

pub const DEFAULT_AP_ROWS: usize = 5;
pub const DEFAULT_AP_COLS: usize = 5;
pub const DEFAULT_AP_SPACING_M: f64 = 100.0;

impl Default for GridTopology {
    fn default() -> Self {
        GridTopology::build_grid(DEFAULT_AP_ROWS, DEFAULT_AP_COLS, DEFAULT_AP_SPACING_M)
            .expect("default grid dimensions are valid")
    }
}

impl GridTopology {
    pub fn build_grid(ap_rows: usize, ap_cols: usize, ap_spacing: f64) -> Result<Self> {
        if ap_rows < 2 || ap_cols < 2 {
            return Err(PmmsError::config(format!(
                "AP grid must be at least 2x2, got {ap_rows}x{ap_cols}"
            )));
        }
        if !(ap_spacing.is_finite() && ap_spacing > 0.0) {
            return Err(PmmsError::config(format!(
                "AP spacing must be positive, got {ap_spacing}"
            )));
        }
        if (ap_rows + 1) * (ap_cols + 1) > u16::MAX as usize {
            return Err(PmmsError::config("AP grid too large"));
        }

        let region_cols = ap_cols + 1;
        let region_rows = ap_rows + 1;
        let ap_count = ap_rows * ap_cols;

        let ap_positions = (0..ap_count)
            .map(|i| {
                let (r, c) = (i / ap_cols, i % ap_cols);
                Point::new((c + 1) as f64 * ap_spacing, (r + 1) as f64 * ap_spacing)
            })
            .collect();

        let mut region_aps = vec![Vec::new(); region_rows * region_cols];
        let mut ap_regions = vec![Vec::new(); ap_count];
        for i in 0..region_rows {
            for j in 0..region_cols {
                let region = RegionId((i * region_cols + j) as u16);
                // Region (i, j) holds the APs at (i-1, j-1), (i-1, j), (i, j-1), (i, j).
                for r in i.saturating_sub(1)..=i.min(ap_rows - 1) {
                    for c in j.saturating_sub(1)..=j.min(ap_cols - 1) {
                        let ap = ApId((r * ap_cols + c) as u16);
                        region_aps[region.index()].push(ap);
                        ap_regions[ap.index()].push(region);
                    }
                }
            }
        }

        let ap_neighbors = (0..ap_count)
            .map(|i| {
                let (r, c) = ((i / ap_cols) as isize, (i % ap_cols) as isize);
                let mut out = Vec::with_capacity(8);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if (dr, dc) != (0, 0)
                            && (0..ap_rows as isize).contains(&nr)
                            && (0..ap_cols as isize).contains(&nc)
                        {
                            out.push(ApId((nr as usize * ap_cols + nc as usize) as u16));
                        }
                    }
                }
                out
            })
            .collect();

        Ok(GridTopology {
            ap_rows,
            ap_cols,
            ap_spacing,
            ap_positions,
            region_aps,
            ap_regions,
            ap_neighbors,
        })
    }

    pub fn ap_rows(&self) -> usize {
        self.ap_rows
    }

    pub fn ap_cols(&self) -> usize {
        self.ap_cols
    }

    pub fn ap_spacing(&self) -> f64 {
        self.ap_spacing
    }

    pub fn ap_count(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn region_rows(&self) -> usize {
        self.ap_rows + 1
    }

    pub fn region_cols(&self) -> usize {
        self.ap_cols + 1
    }

    pub fn region_count(&self) -> usize {
        self.region_aps.len()
    }

    pub fn aps(&self) -> impl Iterator<Item = ApId> + '_ {
        (0..self.ap_count()).map(|i| ApId(i as u16))
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        (0..self.region_count()).map(|i| RegionId(i as u16))
    }

    pub fn contains_ap(&self, ap: ApId) -> bool {
        ap.index() < self.ap_count()
    }

    pub fn contains_region(&self, region: RegionId) -> bool {
        region.index() < self.region_count()
    }

    /// Grid (row, col) of an AP.
    pub fn ap_cell(&self, ap: ApId) -> (usize, usize) {
        (ap.index() / self.ap_cols, ap.index() % self.ap_cols)
    }

    pub fn region_cell(&self, region: RegionId) -> (usize, usize) {
        let cols = self.region_cols();
        (region.index() / cols, region.index() % cols)
    }

    pub fn ap_at(&self, row: usize, col: usize) -> Option<ApId> {
        (row < self.ap_rows && col < self.ap_cols).then(|| ApId((row * self.ap_cols + col) as u16))
    }

    pub fn region_at(&self, row: usize, col: usize) -> Option<RegionId> {
        (row < self.region_rows() && col < self.region_cols())
            .then(|| RegionId((row * self.region_cols() + col) as u16))
    }

    pub fn ap_position(&self, ap: ApId) -> Point {
        self.ap_positions[ap.index()]
    }

    /// APs on the corners of `region`, ascending.
    pub fn region_aps(&self, region: RegionId) -> &[ApId] {
        &self.region_aps[region.index()]
    }

    /// The four regions surrounding `ap`, ascending.
    pub fn ap_regions(&self, ap: ApId) -> &[RegionId] {
        &self.ap_regions[ap.index()]
    }

    /// 8-neighborhood of `ap`, ascending.
    pub fn neighbors(&self, ap: ApId) -> &[ApId] {
        &self.ap_neighbors[ap.index()]
    }

    pub fn are_neighbors(&self, a: ApId, b: ApId) -> bool {
        self.neighbors(a).contains(&b)
    }

    /// The region whose bottom-right corner is `ap`; the region an AP is
    /// written against in `ap(region)` path notation.
    pub fn home_region(&self, ap: ApId) -> RegionId {
        let (r, c) = self.ap_cell(ap);
        self.region_at(r, c)
            .expect("AP cell is inside the region grid")
    }

    /// Regions that have both APs on their corners.
    pub fn shared_regions(&self, a: ApId, b: ApId) -> Vec<RegionId> {
        let theirs = self.ap_regions(b);
        self.ap_regions(a)
            .iter()
            .copied()
            .filter(|r| theirs.contains(r))
            .collect()
    }

    /// Edge- or corner-adjacent, and distinct.
    pub fn regions_adjacent(&self, a: RegionId, b: RegionId) -> bool {
        let (ar, ac) = self.region_cell(a);
        let (br, bc) = self.region_cell(b);
        a != b && ar.abs_diff(br) <= 1 && ac.abs_diff(bc) <= 1
    }

    pub fn region_neighbors(&self, region: RegionId) -> Vec<RegionId> {
        self.regions()
            .filter(|&r| self.regions_adjacent(region, r))
            .collect()
    }

    pub fn region_center(&self, region: RegionId) -> Point {
        let (i, j) = self.region_cell(region);
        Point::new(
            (j as f64 + 0.5) * self.ap_spacing,
            (i as f64 + 0.5) * self.ap_spacing,
        )
    }

    /// `(min, max)` corners of the region square.
    pub fn region_bounds(&self, region: RegionId) -> (Point, Point) {
        let (i, j) = self.region_cell(region);
        let s = self.ap_spacing;
        (
            Point::new(j as f64 * s, i as f64 * s),
            Point::new((j + 1) as f64 * s, (i + 1) as f64 * s),
        )
    }

    pub fn region_containing(&self, p: Point) -> Option<RegionId> {
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let j = (p.x / self.ap_spacing) as usize;
        let i = (p.y / self.ap_spacing) as usize;
        self.region_at(i, j)
    }

    /// Probable next APs when a node attached to `current` enters
    /// `next_region`: `({current} ∪ neighbors(current)) ∩ region_aps(next_region)`.
    ///
    /// A result of exactly `{current}` means the move needs no handoff.
    pub fn candidate_next_aps(&self, current: ApId, next_region: RegionId) -> Vec<ApId> {
        self.region_aps(next_region)
            .iter()
            .copied()
            .filter(|&ap| ap == current || self.are_neighbors(current, ap))
            .collect()
    }

    pub fn distance(&self, mn_pos: Point, ap: ApId) -> f64 {
        mn_pos.distance(self.ap_position(ap))
    }
}
