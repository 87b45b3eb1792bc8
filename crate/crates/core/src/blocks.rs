//! Block-pair catalog: every split of the 3×3 square into two edge-connected
//! polyomino pieces, their mating offsets, and the seen/unseen split.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{CompoundPolygon, Polygon, Pose2, Vec2};
use crate::{Error, Result};

/// Side of one cube, in meters.
pub const CELL_SIZE: f64 = 0.05;
/// Cells per side of the assembled square.
pub const SQUARE: i32 = 3;

pub type Cell = (i32, i32);

/// A polyomino piece. Cells are integer grid coordinates; the local frame is
/// centred on the mean of the cell centres.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockShape {
    cells: Vec<Cell>,
}

impl BlockShape {
    pub fn new(cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let set: BTreeSet<Cell> = cells.into_iter().collect();
        let cells: Vec<Cell> = set.into_iter().collect();
        if cells.is_empty() {
            return Err(Error::InvalidShape("empty cell set".into()));
        }
        if !is_connected(&cells) {
            return Err(Error::InvalidShape(format!("cells {cells:?} are not edge-connected")));
        }
        Ok(Self { cells })
    }

    fn from_mask(mask: u16) -> Self {
        let mut cells: Vec<Cell> = (0..9)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| (i % SQUARE, i / SQUARE))
            .collect();
        cells.sort();
        Self { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mean of the cell centres, in cell units.
    pub fn centroid(&self) -> Vec2 {
        let n = self.cells.len() as f64;
        let (sx, sy) = self
            .cells
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64 + 0.5, sy + y as f64 + 0.5));
        Vec2::new(sx / n, sy / n)
    }

    /// Cell centres in the local frame, in meters.
    pub fn local_centers(&self, cell_size: f64) -> Vec<Vec2> {
        let c = self.centroid();
        self.cells
            .iter()
            .map(|&(x, y)| (Vec2::new(x as f64 + 0.5, y as f64 + 0.5) - c) * cell_size)
            .collect()
    }

    /// Largest distance from the local origin to any outline vertex.
    pub fn circumradius(&self, cell_size: f64) -> f64 {
        let h = cell_size / 2.0;
        self.local_centers(cell_size)
            .iter()
            .flat_map(|c| {
                [(-h, -h), (h, -h), (h, h), (-h, h)]
                    .into_iter()
                    .map(move |(dx, dy)| (*c + Vec2::new(dx, dy)).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Convex decomposition: one square per cell.
    pub fn compound(&self, cell_size: f64) -> CompoundPolygon {
        CompoundPolygon {
            outline: shape_polygon(self, cell_size),
            parts: self
                .local_centers(cell_size)
                .into_iter()
                .map(|c| Polygon::rect(c, cell_size, cell_size))
                .collect(),
        }
    }

    /// 3×3 occupancy of the piece anchored at its bounding-box corner, row-major.
    pub fn bitmap(&self) -> [f64; 9] {
        let minx = self.cells.iter().map(|c| c.0).min().unwrap_or(0);
        let miny = self.cells.iter().map(|c| c.1).min().unwrap_or(0);
        let mut out = [0.0; 9];
        for &(x, y) in &self.cells {
            let (u, v) = (x - minx, y - miny);
            if (0..SQUARE).contains(&u) && (0..SQUARE).contains(&v) {
                out[(v * SQUARE + u) as usize] = 1.0;
            }
        }
        out
    }
}

fn is_connected(cells: &[Cell]) -> bool {
    if cells.is_empty() {
        return false;
    }
    let set: BTreeSet<Cell> = cells.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![cells[0]];
    while let Some((x, y)) = stack.pop() {
        if !seen.insert((x, y)) {
            continue;
        }
        for n in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            if set.contains(&n) && !seen.contains(&n) {
                stack.push(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Rotates a cell a quarter turn counterclockwise about the grid origin.
fn rot90(c: Cell) -> Cell {
    (-c.1 - 1, c.0)
}

fn rotate_cells(cells: &[Cell], quarter_turns: u8) -> Vec<Cell> {
    cells
        .iter()
        .map(|&c| (0..quarter_turns).fold(c, |c, _| rot90(c)))
        .collect()
}

/// Rectilinear outer boundary of the union of cells, counterclockwise,
/// centred on the shape's local origin.
pub fn shape_polygon(shape: &BlockShape, cell_size: f64) -> Polygon {
    let set: BTreeSet<Cell> = shape.cells.iter().copied().collect();
    // directed unit edges of each cell (CCW), dropping those shared with a neighbour
    let mut out: HashMap<(i32, i32), Vec<(i32, i32)>> = HashMap::new();
    let mut count = 0usize;
    for &(x, y) in &shape.cells {
        let edges = [
            ((x, y), (x + 1, y), (x, y - 1)),
            ((x + 1, y), (x + 1, y + 1), (x + 1, y)),
            ((x + 1, y + 1), (x, y + 1), (x, y + 1)),
            ((x, y + 1), (x, y), (x - 1, y)),
        ];
        for (a, b, neighbour) in edges {
            if !set.contains(&neighbour) {
                out.entry(a).or_default().push(b);
                count += 1;
            }
        }
    }
    let start = *out.keys().min().expect("non-empty shape");
    let mut loop_pts = vec![start];
    let mut prev_dir = (1, 0);
    let mut cur = start;
    for _ in 0..count {
        let nexts = out.get_mut(&cur).expect("closed boundary");
        // at pinch vertices take the most clockwise continuation
        let pick = (0..nexts.len())
            .min_by_key(|&i| {
                let d = (nexts[i].0 - cur.0, nexts[i].1 - cur.1);
                let cross = prev_dir.0 * d.1 - prev_dir.1 * d.0;
                let dot = prev_dir.0 * d.0 + prev_dir.1 * d.1;
                // right turn < straight < left turn
                match (cross.signum(), dot.signum()) {
                    (-1, _) => 0,
                    (0, 1) => 1,
                    (1, _) => 2,
                    _ => 3,
                }
            })
            .expect("boundary edge");
        let next = nexts.swap_remove(pick);
        prev_dir = (next.0 - cur.0, next.1 - cur.1);
        cur = next;
        loop_pts.push(cur);
        if cur == start && out.values().all(Vec::is_empty) {
            break;
        }
    }
    loop_pts.pop();
    // drop collinear vertices
    let n = loop_pts.len();
    let mut corners = Vec::new();
    for i in 0..n {
        let p = loop_pts[(i + n - 1) % n];
        let c = loop_pts[i];
        let q = loop_pts[(i + 1) % n];
        let cross = (c.0 - p.0) * (q.1 - c.1) - (c.1 - p.1) * (q.0 - c.0);
        if cross != 0 {
            corners.push(c);
        }
    }
    let centroid = shape.centroid();
    Polygon::new(
        corners
            .into_iter()
            .map(|(x, y)| (Vec2::new(x as f64, y as f64) - centroid) * cell_size)
            .collect(),
    )
}

/// All poses (quarter-turn rotation, whole-cell translation) of `male` in the
/// frame of `female` such that the two pieces tile a 3×3 square.
pub fn mating_offsets(female: &BlockShape, male: &BlockShape, cell_size: f64) -> Result<Vec<Pose2>> {
    let fset: BTreeSet<Cell> = female.cells.iter().copied().collect();
    let fc = female.centroid();
    let mc = male.centroid();
    let mut offsets = Vec::new();
    for k in 0..4u8 {
        let rotated = rotate_cells(&male.cells, k);
        let reach = 2 * SQUARE + 2;
        for ty in -reach..=reach {
            for tx in -reach..=reach {
                let placed: Vec<Cell> = rotated.iter().map(|&(x, y)| (x + tx, y + ty)).collect();
                if placed.iter().any(|c| fset.contains(c)) {
                    continue;
                }
                let union: BTreeSet<Cell> = fset.iter().chain(placed.iter()).copied().collect();
                if !is_square(&union) {
                    continue;
                }
                let theta = f64::from(k) * FRAC_PI_2;
                // male centroid after rotating about the grid origin and shifting
                let t = mc.rotate(theta) + Vec2::new(tx as f64, ty as f64) - fc;
                offsets.push(Pose2::new(t.x * cell_size, t.y * cell_size, theta));
            }
        }
    }
    if offsets.is_empty() {
        return Err(Error::InvalidPair(format!(
            "no placement of {:?} completes a square with {:?}",
            male.cells, female.cells
        )));
    }
    Ok(offsets)
}

fn is_square(cells: &BTreeSet<Cell>) -> bool {
    if cells.len() != (SQUARE * SQUARE) as usize {
        return false;
    }
    let minx = cells.iter().map(|c| c.0).min().unwrap();
    let miny = cells.iter().map(|c| c.1).min().unwrap();
    cells
        .iter()
        .all(|&(x, y)| (0..SQUARE).contains(&(x - minx)) && (0..SQUARE).contains(&(y - miny)))
}

/// Two pieces that complete a 3×3 square, with precomputed geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPair {
    pub id: String,
    pub female: BlockShape,
    pub male: BlockShape,
    /// Male pose in the female frame at which the pair is mated.
    pub mating_offsets: Vec<Pose2>,
    pub cell_size: f64,
    female_geom: CompoundPolygon,
    male_geom: CompoundPolygon,
    female_radius: f64,
    male_radius: f64,
}

impl BlockPair {
    pub fn new(id: impl Into<String>, female: BlockShape, male: BlockShape, cell_size: f64) -> Result<Self> {
        let mating_offsets = mating_offsets(&female, &male, cell_size)?;
        Ok(Self {
            id: id.into(),
            female_geom: female.compound(cell_size),
            male_geom: male.compound(cell_size),
            female_radius: female.circumradius(cell_size),
            male_radius: male.circumradius(cell_size),
            female,
            male,
            mating_offsets,
            cell_size,
        })
    }

    /// Local-frame geometry of piece 0 (female) or 1 (male).
    pub fn geometry(&self, piece: Piece) -> &CompoundPolygon {
        match piece {
            Piece::Female => &self.female_geom,
            Piece::Male => &self.male_geom,
        }
    }

    pub fn radius(&self, piece: Piece) -> f64 {
        match piece {
            Piece::Female => self.female_radius,
            Piece::Male => self.male_radius,
        }
    }

    pub fn shape(&self, piece: Piece) -> &BlockShape {
        match piece {
            Piece::Female => &self.female,
            Piece::Male => &self.male,
        }
    }

    /// Pose-independent descriptor of both pieces: two 3×3 occupancy bitmaps.
    pub fn shape_features(&self) -> [f64; 18] {
        let mut out = [0.0; 18];
        out[..9].copy_from_slice(&self.female.bitmap());
        out[9..].copy_from_slice(&self.male.bitmap());
        out
    }

    /// Largest centroid distance at which the pieces can still be mated.
    pub fn diameter(&self) -> f64 {
        self.mating_offsets
            .iter()
            .map(|g| g.translation().norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Piece {
    Female,
    Male,
}

impl Piece {
    pub const BOTH: [Piece; 2] = [Piece::Female, Piece::Male];

    pub fn other(self) -> Piece {
        match self {
            Piece::Female => Piece::Male,
            Piece::Male => Piece::Female,
        }
    }
}

/// Every unordered split of the 3×3 square into two edge-connected pieces of
/// at least `min_cells` cells. The larger piece is the female.
pub fn enumerate_pairs(min_cells: usize) -> Result<Vec<BlockPair>> {
    if !(3..=4).contains(&min_cells) {
        return Err(Error::InvalidArgument(format!("min_cells must be 3 or 4, got {min_cells}")));
    }
    let full: u16 = (1 << 9) - 1;
    let mut pairs = Vec::new();
    for mask in 1..full {
        let rest = full & !mask;
        let (a, b) = (BlockShape::from_mask(mask), BlockShape::from_mask(rest));
        if a.len() < min_cells || b.len() < min_cells {
            continue;
        }
        if !is_connected(&a.cells) || !is_connected(&b.cells) {
            continue;
        }
        // each unordered split is visited twice; keep the visit where `a` is female
        let a_is_female = a.len() > b.len() || (a.len() == b.len() && a.cells < b.cells);
        if !a_is_female {
            continue;
        }
        let id = format!("sq3-{:03x}", mask);
        pairs.push(BlockPair::new(id, a, b, CELL_SIZE)?);
    }
    pairs.sort_by(|p, q| p.id.cmp(&q.id));
    Ok(pairs)
}

/// Deterministic seen/unseen partition keyed by `(id, seed)`. Both halves keep
/// catalog order.
pub fn split_catalog(
    pairs: &[BlockPair],
    seed: u64,
    unseen_fraction: f64,
) -> Result<(Vec<BlockPair>, Vec<BlockPair>)> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two pairs to split".into()));
    }
    if !(unseen_fraction > 0.0 && unseen_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "unseen_fraction must be in (0, 1), got {unseen_fraction}"
        )));
    }
    let n_unseen = ((unseen_fraction * pairs.len() as f64).round() as usize).clamp(1, pairs.len() - 1);
    let mut keyed: Vec<([u8; 32], usize)> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(p.id.as_bytes());
            (h.finalize().into(), i)
        })
        .collect();
    keyed.sort();
    let unseen_idx: BTreeSet<usize> = keyed.iter().take(n_unseen).map(|&(_, i)| i).collect();
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for (i, p) in pairs.iter().enumerate() {
        if unseen_idx.contains(&i) {
            unseen.push(p.clone());
        } else {
            seen.push(p.clone());
        }
    }
    Ok((seen, unseen))
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogHeader {
    format: String,
    version: u32,
    cell_size: f64,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRecord {
    id: String,
    female: Vec<Cell>,
    male: Vec<Cell>,
    mating_offsets: Vec<Pose2>,
}

pub const CATALOG_FORMAT: &str = "trass-catalog";

/// One JSON object per line: a header, then one record per pair.
pub fn write_catalog<W: Write>(mut w: W, pairs: &[BlockPair]) -> Result<()> {
    let cell_size = pairs.first().map_or(CELL_SIZE, |p| p.cell_size);
    let header = CatalogHeader {
        format: CATALOG_FORMAT.into(),
        version: 1,
        cell_size,
        count: pairs.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for p in pairs {
        let rec = CatalogRecord {
            id: p.id.clone(),
            female: p.female.cells.clone(),
            male: p.male.cells.clone(),
            mating_offsets: p.mating_offsets.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

pub fn read_catalog<R: BufRead>(r: R) -> Result<Vec<BlockPair>> {
    let mut lines = r.lines();
    let header: CatalogHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(Error::Format("empty catalog".into())),
    };
    if header.format != CATALOG_FORMAT || header.version != 1 {
        return Err(Error::Format(format!("unsupported catalog {} v{}", header.format, header.version)));
    }
    let mut pairs = Vec::with_capacity(header.count);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CatalogRecord = serde_json::from_str(&line)?;
        let pair = BlockPair::new(
            rec.id,
            BlockShape::new(rec.female)?,
            BlockShape::new(rec.male)?,
            header.cell_size,
        )?;
        if pair.mating_offsets != rec.mating_offsets {
            return Err(Error::Format(format!("stored offsets of {} disagree with geometry", pair.id)));
        }
        pairs.push(pair);
    }
    if pairs.len() != header.count {
        return Err(Error::Format(format!("header says {} pairs, found {}", header.count, pairs.len())));
    }
    Ok(pairs)
}
