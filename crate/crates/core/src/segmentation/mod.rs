//! Superpixel segment maps and the segment adjacency graph.
//!
//! Segments and adjacency both use 4-connectivity: two pixels touch only if
//! they share an edge, so diagonal contact never creates a graph edge.

mod slic;

use std::collections::BTreeSet;
use std::path::Path;

pub use slic::{slic_segment, SlicParams};

use crate::error::{contract, Error, Result};
use crate::image::{GrayImage, RgbImage};
use crate::instance::BinaryMask;

/// Per-pixel segment labels, row-major. Labels are exactly `0..n_segments`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    n_segments: usize,
}

impl SegmentMap {
    /// Wraps gapless labels. Fails if some id in `0..=max` is unused.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return contract(format!(
                "label buffer of {} entries does not match {width}x{height}",
                labels.len()
            ));
        }
        let n_segments = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut seen = vec![false; n_segments];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(gap) = seen.iter().position(|&s| !s) {
            return contract(format!("segment label {gap} is unused (labels must be gapless)"));
        }
        Ok(Self {
            width,
            height,
            labels,
            n_segments,
        })
    }

    /// Renumbers arbitrary ids to `0..n` preserving their numeric order.
    pub fn from_raw_labels(width: usize, height: usize, raw: &[u32]) -> Result<Self> {
        let distinct: BTreeSet<u32> = raw.iter().copied().collect();
        let lookup: std::collections::HashMap<u32, u32> =
            distinct.into_iter().enumerate().map(|(i, l)| (l, i as u32)).collect();
        Self::new(width, height, raw.iter().map(|l| lookup[l]).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_segments];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// True iff every segment is a single 4-connected pixel region.
    pub fn is_four_connected(&self) -> bool {
        let (_, n_components) = connected_components(self.width, self.height, &self.labels);
        n_components == self.n_segments
    }

    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        if self.n_segments > 256 {
            return contract(format!(
                "PGM label maps hold at most 256 segments, this map has {}",
                self.n_segments
            ));
        }
        let gray = GrayImage {
            width: self.width,
            height: self.height,
            data: self.labels.iter().map(|&l| l as u8).collect(),
        };
        Ok(gray.to_pgm())
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let gray = GrayImage::from_pgm(bytes)?;
        let raw: Vec<u32> = gray.data.iter().map(|&v| u32::from(v)).collect();
        Self::from_raw_labels(gray.width, gray.height, &raw)
    }

    /// Rows of integer labels.
    pub fn to_json(&self) -> String {
        let rows: Vec<&[u32]> = self.labels.chunks(self.width).collect();
        serde_json::to_string(&rows).expect("label rows serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rows: Vec<Vec<u32>> = serde_json::from_str(text)?;
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if height == 0 || width == 0 {
            return Err(Error::Parse("label map JSON is empty".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Parse(format!("label map row {r} has a different length")));
        }
        let raw: Vec<u32> = rows.into_iter().flatten().collect();
        Self::from_raw_labels(width, height, &raw)
    }

    /// Loads a label map by extension (`.pgm` or `.json`) and checks that
    /// every segment is 4-connected.
    pub fn load(path: &Path) -> Result<Self> {
        let map = match extension(path).as_deref() {
            Some("pgm") => Self::from_pgm(&std::fs::read(path)?)?,
            Some("json") => Self::from_json(&std::fs::read_to_string(path)?)?,
            _ => return contract(format!("unsupported label map format: {}", path.display())),
        };
        if !map.is_four_connected() {
            return contract(format!(
                "label map {} contains a segment that is not 4-connected",
                path.display()
            ));
        }
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match extension(path).as_deref() {
            Some("pgm") => std::fs::write(path, self.to_pgm()?)?,
            Some("json") => std::fs::write(path, self.to_json())?,
            _ => return contract(format!("unsupported label map format: {}", path.display())),
        }
        Ok(())
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

/// 4-connected components of equal-label regions. Component ids follow
/// first appearance in a row-major scan.
pub(crate) fn connected_components(width: usize, height: usize, labels: &[u32]) -> (Vec<u32>, usize) {
    let mut comp = vec![u32::MAX; labels.len()];
    let mut stack = Vec::new();
    let mut next = 0u32;
    for seed in 0..labels.len() {
        if comp[seed] != u32::MAX {
            continue;
        }
        let label = labels[seed];
        comp[seed] = next;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for q in neighbors4(p, width, height) {
                if comp[q] == u32::MAX && labels[q] == label {
                    comp[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    (comp, next as usize)
}

#[inline]
pub(crate) fn neighbors4(p: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % width, p / width);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < width).then(|| p + 1);
    let up = (y > 0).then(|| p - width);
    let down = (y + 1 < height).then(|| p + width);
    [left, right, up, down].into_iter().flatten()
}

/// Tiles the image into `rows x cols` rectangles, row-major. Pixel `(x, y)`
/// belongs to column `floor(x * cols / width)` and row `floor(y * rows / height)`.
pub fn grid_segment(image: &RgbImage, rows: usize, cols: usize) -> Result<SegmentMap> {
    let (w, h) = (image.width(), image.height());
    if rows == 0 || cols == 0 {
        return contract("grid rows and cols must be at least 1");
    }
    if rows > h || cols > w {
        return contract(format!("grid {rows}x{cols} exceeds image dimensions {w}x{h}"));
    }
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        let r = y * rows / h;
        for x in 0..w {
            let c = x * cols / w;
            labels.push((r * cols + c) as u32);
        }
    }
    SegmentMap::new(w, h, labels)
}

/// Undirected simple graph over segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentGraph {
    adjacency: Vec<Vec<usize>>,
    n_edges: usize,
}

impl SegmentGraph {
    /// Builds a graph from unordered pairs; duplicates collapse, self-loops are rejected.
    pub fn from_edges(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n_vertices];
        for (a, b) in edges {
            if a == b {
                return contract(format!("self-loop on vertex {a}"));
            }
            if a >= n_vertices || b >= n_vertices {
                return contract(format!("edge ({a}, {b}) out of range for {n_vertices} vertices"));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        let adjacency: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let n_edges = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Self { adjacency, n_edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn is_connected(&self) -> bool {
        self.n_vertices() == 0 || self.induces_connected(&BinaryMask::ones(self.n_vertices()))
    }

    /// Whether the active vertices of `mask` induce a connected subgraph.
    /// The empty set counts as connected.
    pub fn induces_connected(&self, mask: &BinaryMask) -> bool {
        let Some(start) = mask.active().next() else {
            return true;
        };
        let mut seen = vec![false; self.n_vertices()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &u in self.neighbors(v) {
                if mask.is_set(u) && !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
        reached == mask.count_ones()
    }
}

/// Joins segments `a != b` whenever a pixel of `a` is a 4-neighbor of a pixel of `b`.
pub fn build_adjacency(segment_map: &SegmentMap) -> SegmentGraph {
    let (w, h) = (segment_map.width(), segment_map.height());
    let labels = segment_map.labels();
    let mut pairs = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let a = labels[y * w + x];
            if x + 1 < w {
                let b = labels[y * w + x + 1];
                if a != b {
                    pairs.push((a as usize, b as usize));
                }
            }
            if y + 1 < h {
                let b = labels[(y + 1) * w + x];
                if a != b {
                    pairs.push((a as usize, b as usize));
                }
            }
        }
    }
    SegmentGraph::from_edges(segment_map.n_segments(), pairs).expect("pairs are distinct in-range labels")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rgb;

    fn blank(w: usize, h: usize) -> RgbImage {
        RgbImage::filled(w, h, Rgb([9, 9, 9])).unwrap()
    }

    #[test]
    fn grid_exact_tiling() {
        let map = grid_segment(&blank(4, 4), 2, 2).unwrap();
        assert_eq!(map.n_segments(), 4);
        assert_eq!(map.segment_sizes(), vec![4; 4]);
        assert_eq!(map.label(1, 1), 0);
        assert_eq!(map.label(2, 1), 1);
        assert_eq!(map.label(1, 2), 2);
        assert_eq!(map.label(3, 3), 3);
    }

    #[test]
    fn grid_single_cell() {
        let map = grid_segment(&blank(5, 3), 1, 1).unwrap();
        assert_eq!(map.n_segments(), 1);
    }

    #[test]
    fn grid_floor_division() {
        // 5 wide, 3 tall: column of x is floor(2x/5), row of y is floor(2y/3)
        let map = grid_segment(&blank(5, 3), 2, 2).unwrap();
        let widths: Vec<usize> = (0..2)
            .map(|c| (0..5).filter(|&x| map.label(x, 0) as usize % 2 == c).count())
            .collect();
        let heights: Vec<usize> = (0..2)
            .map(|r| (0..3).filter(|&y| map.label(0, y) as usize / 2 == r).count())
            .collect();
        assert_eq!(widths, vec![3, 2]);
        assert_eq!(heights, vec![2, 1]);
    }

    #[test]
    fn grid_rejects_oversize() {
        assert!(grid_segment(&blank(3, 3), 4, 1).is_err());
        assert!(grid_segment(&blank(3, 3), 1, 4).is_err());
        assert!(grid_segment(&blank(3, 3), 0, 1).is_err());
    }

    #[test]
    fn adjacency_2x2_has_no_diagonals() {
        let g = build_adjacency(&grid_segment(&blank(4, 4), 2, 2).unwrap());
        assert_eq!(g.n_vertices(), 4);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert!(!g.has_edge(0, 3));
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn adjacency_single_segment() {
        let g = build_adjacency(&grid_segment(&blank(3, 2), 1, 1).unwrap());
        assert_eq!((g.n_vertices(), g.n_edges()), (1, 0));
    }

    #[test]
    fn gapless_labels_enforced() {
        assert!(SegmentMap::new(2, 1, vec![0, 2]).is_err());
        let m = SegmentMap::from_raw_labels(3, 1, &[7, 3, 7]).unwrap();
        assert_eq!(m.labels(), &[1, 0, 1]);
        assert!(!m.is_four_connected());
    }

    #[test]
    fn label_map_json_and_pgm() {
        let m = grid_segment(&blank(5, 3), 3, 2).unwrap();
        assert_eq!(SegmentMap::from_json(&m.to_json()).unwrap(), m);
        assert_eq!(SegmentMap::from_pgm(&m.to_pgm().unwrap()).unwrap(), m);
        assert!(SegmentMap::from_json("[[0,1],[0]]").is_err());
    }

    #[test]
    fn load_rejects_disconnected_segments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.json");
        std::fs::write(&path, "[[0,1,0]]").unwrap();
        assert!(SegmentMap::load(&path).is_err());
        std::fs::write(&path, "[[0,1,1]]").unwrap();
        assert_eq!(SegmentMap::load(&path).unwrap().n_segments(), 2);
    }

    #[test]
    fn induced_connectivity() {
        let path = SegmentGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let m = |b: Vec<u8>| BinaryMask::from_bits(b).unwrap();
        assert!(path.induces_connected(&m(vec![1, 1, 0])));
        assert!(!path.induces_connected(&m(vec![1, 0, 1])));
        assert!(SegmentGraph::from_edges(2, [(1, 1)]).is_err());
    }
}
