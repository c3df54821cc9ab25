//! Mobile-node path generation and the path-history corpus.
//!
//! Paths come from a waypoint walk over the AP grid. Each node repeatedly
//! picks a waypoint, either an AP at the grid center or an AP on the grid
//! sides, and heads for it one handoff at a time. With probability
//! `waypoint_pull` a hop greedily closes the distance to the waypoint;
//! otherwise it goes to a uniformly chosen neighbor. Every hop crosses
//! into a region shared by the two APs, so consecutive steps always change
//! region as well as AP.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PmmsError, Result};
use crate::topology::{ApId, GridTopology, RegionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub ap: ApId,
    pub region: RegionId,
    /// Pause before the next movement, in ticks.
    pub dwell: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilePath {
    pub id: u64,
    pub steps: Vec<PathStep>,
}

impl MobilePath {
    pub fn aps(&self) -> Vec<ApId> {
        self.steps.iter().map(|s| s.ap).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of handoffs along the path.
    pub fn transitions(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// Checks incidence, adjacency and length constraints.
    pub fn validate(&self, topo: &GridTopology) -> Result<()> {
        let fail = |msg: String| Err(PmmsError::InvalidPath(format!("path {}: {msg}", self.id)));
        if self.steps.len() < 2 {
            return fail(format!("needs at least 2 steps, has {}", self.steps.len()));
        }
        for s in &self.steps {
            if !topo.contains_ap(s.ap) || !topo.contains_region(s.region) {
                return fail(format!("unknown id in {}({})", s.ap, s.region));
            }
            if !topo.region_aps(s.region).contains(&s.ap) {
                return fail(format!("AP {} is not in region {}", s.ap, s.region));
            }
            if s.dwell < 1 {
                return fail("dwell must be at least 1 tick".into());
            }
        }
        for w in self.steps.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !topo.are_neighbors(a.ap, b.ap) {
                return fail(format!("APs {} and {} are not adjacent", a.ap, b.ap));
            }
            if !topo.regions_adjacent(a.region, b.region) {
                return fail(format!(
                    "regions {} and {} are not adjacent",
                    a.region, b.region
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    pub min_aps: usize,
    pub max_aps: usize,
    /// Probability that a hop moves greedily towards the current waypoint.
    pub waypoint_pull: f64,
    /// Probability that a fresh waypoint is the grid center rather than a
    /// side AP.
    pub center_bias: f64,
    pub dwell_min: u32,
    pub dwell_max: u32,
}

impl MobilityConfig {
    /// Test-set paths: 3 to 6 APs.
    pub fn test_set() -> Self {
        MobilityConfig {
            min_aps: 3,
            ..MobilityConfig::history()
        }
    }

    /// History paths: 2 to 6 APs.
    pub fn history() -> Self {
        MobilityConfig {
            min_aps: 2,
            max_aps: 6,
            waypoint_pull: 0.9,
            center_bias: 0.8,
            dwell_min: 1,
            dwell_max: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_aps < 2 || self.max_aps < self.min_aps {
            return Err(PmmsError::config(format!(
                "path length range {}..={} is impossible (need 2 <= min <= max)",
                self.min_aps, self.max_aps
            )));
        }
        if self.dwell_min < 1 || self.dwell_max < self.dwell_min {
            return Err(PmmsError::config(format!(
                "dwell range {}..={} is invalid",
                self.dwell_min, self.dwell_max
            )));
        }
        for (name, p) in [
            ("waypoint_pull", self.waypoint_pull),
            ("center_bias", self.center_bias),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(PmmsError::config(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig::test_set()
    }
}

/// APs nearest the geometric center of the grid (one for odd dimensions).
pub fn center_aps(topo: &GridTopology) -> Vec<ApId> {
    let rows = center_indices(topo.ap_rows());
    let cols = center_indices(topo.ap_cols());
    rows.iter()
        .flat_map(|&r| cols.iter().filter_map(move |&c| topo.ap_at(r, c)))
        .collect()
}

fn center_indices(n: usize) -> Vec<usize> {
    if n % 2 == 1 {
        vec![n / 2]
    } else {
        vec![n / 2 - 1, n / 2]
    }
}

/// APs on the outer ring of the grid.
pub fn side_aps(topo: &GridTopology) -> Vec<ApId> {
    topo.aps()
        .filter(|&ap| {
            let (r, c) = topo.ap_cell(ap);
            r == 0 || c == 0 || r + 1 == topo.ap_rows() || c + 1 == topo.ap_cols()
        })
        .collect()
}

fn pick_waypoint<R: Rng + ?Sized>(
    current: ApId,
    centers: &[ApId],
    sides: &[ApId],
    cfg: &MobilityConfig,
    rng: &mut R,
) -> ApId {
    let (first, second) = if rng.random_bool(cfg.center_bias) {
        (centers, sides)
    } else {
        (sides, centers)
    };
    let others =
        |pool: &[ApId]| -> Vec<ApId> { pool.iter().copied().filter(|&a| a != current).collect() };
    let mut pool = others(first);
    if pool.is_empty() {
        pool = others(second);
    }
    *pool
        .choose(rng)
        .expect("a grid with neighbors has another AP")
}

/// Chebyshev hop count with a small Euclidean tie-break, in grid units.
fn grid_distance(topo: &GridTopology, a: ApId, b: ApId) -> f64 {
    let (ar, ac) = topo.ap_cell(a);
    let (br, bc) = topo.ap_cell(b);
    let (dr, dc) = (ar.abs_diff(br) as f64, ac.abs_diff(bc) as f64);
    dr.max(dc) + 0.01 * dr.hypot(dc)
}

pub fn generate_path<R: Rng + ?Sized>(
    topo: &GridTopology,
    cfg: &MobilityConfig,
    id: u64,
    rng: &mut R,
) -> Result<MobilePath> {
    cfg.validate()?;
    let centers = center_aps(topo);
    let sides = side_aps(topo);
    let target_len = rng.random_range(cfg.min_aps..=cfg.max_aps);

    let mut current = ApId(rng.random_range(0..topo.ap_count()) as u16);
    let mut region = *topo
        .ap_regions(current)
        .choose(rng)
        .expect("every AP has four regions");
    let mut waypoint = pick_waypoint(current, &centers, &sides, cfg, rng);
    let mut steps = vec![PathStep {
        ap: current,
        region,
        dwell: rng.random_range(cfg.dwell_min..=cfg.dwell_max),
    }];

    while steps.len() < target_len {
        if current == waypoint {
            waypoint = pick_waypoint(current, &centers, &sides, cfg, rng);
        }
        // A hop must leave the region the node is in.
        let options: Vec<(ApId, Vec<RegionId>)> = topo
            .neighbors(current)
            .iter()
            .map(|&n| {
                let regions: Vec<_> = topo
                    .shared_regions(current, n)
                    .into_iter()
                    .filter(|&r| r != region)
                    .collect();
                (n, regions)
            })
            .filter(|(_, regions)| !regions.is_empty())
            .collect();

        let chosen = if rng.random_bool(cfg.waypoint_pull) {
            let best = options
                .iter()
                .map(|(n, _)| grid_distance(topo, *n, waypoint))
                .fold(f64::INFINITY, f64::min);
            let closest: Vec<_> = options
                .iter()
                .filter(|(n, _)| grid_distance(topo, *n, waypoint) <= best + 1e-9)
                .collect();
            *closest.choose(rng).expect("options are never empty")
        } else {
            options.choose(rng).expect("options are never empty")
        };

        current = chosen.0;
        region = *chosen.1.choose(rng).expect("filtered non-empty");
        steps.push(PathStep {
            ap: current,
            region,
            dwell: rng.random_range(cfg.dwell_min..=cfg.dwell_max),
        });
    }

    Ok(MobilePath { id, steps })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathHistory {
    pub seed: Option<u64>,
    pub paths: Vec<MobilePath>,
}

impl PathHistory {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn generate(
        n: usize,
        topo: &GridTopology,
        cfg: &MobilityConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = generate_history(n, topo, cfg, &mut rng)?;
        h.seed = Some(seed);
        Ok(h)
    }

    pub fn validate(&self, topo: &GridTopology) -> Result<()> {
        self.paths.iter().try_for_each(|p| p.validate(topo))
    }
}

/// `n` independent paths with ids `1..=n`.
pub fn generate_history<R: Rng + ?Sized>(
    n: usize,
    topo: &GridTopology,
    cfg: &MobilityConfig,
    rng: &mut R,
) -> Result<PathHistory> {
    if n < 1 {
        return Err(PmmsError::config("history size must be at least 1"));
    }
    let paths = (1..=n as u64)
        .map(|id| generate_path(topo, cfg, id, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathHistory { seed: None, paths })
}

/// Writes one path per line as `id;ap(region)->ap(region)->...`. A step
/// with a dwell other than one tick carries an `@dwell` suffix. A known
/// generation seed is recorded in a leading `# seed=` comment.
pub fn save_history<W: Write>(h: &PathHistory, mut sink: W) -> std::io::Result<()> {
    if let Some(seed) = h.seed {
        writeln!(sink, "# seed={seed}")?;
    }
    for p in &h.paths {
        write!(sink, "{};", p.id)?;
        for (i, s) in p.steps.iter().enumerate() {
            if i > 0 {
                sink.write_all(b"->")?;
            }
            write!(sink, "{}({})", s.ap, s.region)?;
            if s.dwell != 1 {
                write!(sink, "@{}", s.dwell)?;
            }
        }
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

pub fn load_history<R: BufRead>(source: R, topo: &GridTopology) -> Result<PathHistory> {
    let mut history = PathHistory::default();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| PmmsError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(seed) = comment.trim().strip_prefix("seed=") {
                history.seed = Some(seed.parse().map_err(|_| PmmsError::Parse {
                    line: line_no,
                    msg: format!("bad seed {seed:?}"),
                })?);
            }
            continue;
        }
        let path = parse_path_line(line, line_no)?;
        path.validate(topo).map_err(|e| PmmsError::Validation {
            line: line_no,
            msg: e.to_string(),
        })?;
        history.paths.push(path);
    }
    Ok(history)
}

fn parse_path_line(line: &str, line_no: usize) -> Result<MobilePath> {
    let err = |msg: String| PmmsError::Parse { line: line_no, msg };
    let (id, body) = line
        .split_once(';')
        .ok_or_else(|| err("missing ';' after path id".into()))?;
    let id: u64 = id.parse().map_err(|_| err(format!("bad path id {id:?}")))?;
    let steps = body
        .split("->")
        .map(|tok| parse_step(tok).ok_or_else(|| err(format!("bad step {tok:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(MobilePath { id, steps })
}

fn parse_step(tok: &str) -> Option<PathStep> {
    let (ap, rest) = tok.split_once('(')?;
    let (region, rest) = rest.split_once(')')?;
    let dwell = match rest {
        "" => 1,
        r => r.strip_prefix('@')?.parse().ok()?,
    };
    Some(PathStep {
        ap: ApId(ap.parse().ok()?),
        region: RegionId(region.parse().ok()?),
        dwell,
    })
}

pub fn save_history_file(h: &PathHistory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| PmmsError::io(path, e))?;
    save_history(h, std::io::BufWriter::new(file)).map_err(|e| PmmsError::io(path, e))
}

pub fn load_history_file(path: &Path, topo: &GridTopology) -> Result<PathHistory> {
    let file = std::fs::File::open(path).map_err(|e| PmmsError::io(path, e))?;
    load_history(std::io::BufReader::new(file), topo)
}
