//! Perturbation masks whose active segments form connected regions of the
//! segment adjacency graph.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::instance::BinaryMask;
use crate::segmentation::SegmentGraph;

/// How the target number of active vertices is drawn for each mask.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeSampler {
    /// Uniform over `1..=d'`.
    #[default]
    Uniform,
    Fixed(usize),
    /// Relative weights for sizes `1, 2, ..`; missing tail sizes get weight 0.
    Weighted(Vec<f64>),
}

/// Growth rule for each mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthMode {
    /// Randomized depth-first growth; active sets are connected.
    #[default]
    Connected,
    /// Each added vertex must be adjacent to every vertex already chosen.
    Clique,
}

enum SizeDraw {
    Uniform(usize),
    Fixed(usize),
    Weighted(WeightedIndex<f64>),
}

impl SizeDraw {
    fn new(sampler: &SizeSampler, d_prime: usize) -> Result<Self> {
        Ok(match sampler {
            SizeSampler::Uniform => Self::Uniform(d_prime),
            SizeSampler::Fixed(s) => {
                if *s == 0 || *s > d_prime {
                    return contract(format!("fixed sample size {s} outside 1..={d_prime}"));
                }
                Self::Fixed(*s)
            }
            SizeSampler::Weighted(w) => {
                let w: Vec<f64> = w.iter().copied().take(d_prime).collect();
                Self::Weighted(
                    WeightedIndex::new(&w).map_err(|e| crate::Error::Contract(format!("size weights: {e}")))?,
                )
            }
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            Self::Uniform(d) => rng.random_range(1..=*d),
            Self::Fixed(s) => *s,
            Self::Weighted(w) => w.sample(rng) + 1,
        }
    }
}

/// Draws `n_samples` masks. For each: a target size `s`, a uniform start
/// vertex, then growth until `s` vertices are active or no admissible
/// neighbor remains. Disconnected graphs are sampled within the start
/// vertex's component.
pub fn sample_connected(
    graph: &SegmentGraph,
    n_samples: usize,
    sizes: &SizeSampler,
    seed: u64,
    mode: GrowthMode,
) -> Result<Vec<BinaryMask>> {
    let d = graph.n_vertices();
    if d == 0 {
        return contract("cannot sample from an empty graph");
    }
    let sizes = SizeDraw::new(sizes, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active = vec![false; d];
    let mut scratch = Vec::with_capacity(d);
    let mut masks = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let target = sizes.draw(&mut rng);
        let start = rng.random_range(0..d);
        active.fill(false);
        active[start] = true;
        match mode {
            GrowthMode::Connected => grow_dfs(graph, &mut active, start, target, &mut rng, &mut scratch),
            GrowthMode::Clique => grow_clique(graph, &mut active, start, target, &mut rng, &mut scratch),
        }
        masks.push(BinaryMask::from_bools(active.iter().copied()));
    }
    Ok(masks)
}

fn grow_dfs(
    graph: &SegmentGraph,
    active: &mut [bool],
    start: usize,
    target: usize,
    rng: &mut ChaCha8Rng,
    scratch: &mut Vec<usize>,
) {
    let mut stack = vec![start];
    let mut count = 1;
    while count < target {
        let Some(&v) = stack.last() else { break };
        scratch.clear();
        scratch.extend(graph.neighbors(v).iter().copied().filter(|&u| !active[u]));
        if scratch.is_empty() {
            stack.pop();
            continue;
        }
        let u = scratch[rng.random_range(0..scratch.len())];
        active[u] = true;
        count += 1;
        stack.push(u);
    }
}

fn grow_clique(
    graph: &SegmentGraph,
    active: &mut [bool],
    start: usize,
    target: usize,
    rng: &mut ChaCha8Rng,
    candidates: &mut Vec<usize>,
) {
    candidates.clear();
    candidates.extend_from_slice(graph.neighbors(start));
    let mut count = 1;
    while count < target && !candidates.is_empty() {
        let u = candidates.swap_remove(rng.random_range(0..candidates.len()));
        active[u] = true;
        count += 1;
        candidates.retain(|&c| graph.has_edge(c, u));
        // keep the candidate order independent of swap_remove history
        candidates.sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn path3() -> SegmentGraph {
        SegmentGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    /// All vertex subsets that induce a connected subgraph, by brute force.
    fn connected_subsets(g: &SegmentGraph) -> BTreeSet<Vec<u8>> {
        let d = g.n_vertices();
        (1u32..(1 << d))
            .map(|bits| BinaryMask::from_bools((0..d).map(|i| bits >> i & 1 == 1)))
            .filter(|m| g.induces_connected(m))
            .map(|m| m.bits().to_vec())
            .collect()
    }

    #[test]
    fn path_graph_never_yields_endpoints_alone() {
        let g = path3();
        let allowed = connected_subsets(&g);
        assert_eq!(allowed.len(), 6);
        assert!(!allowed.contains(&vec![1, 0, 1]));
        let masks = sample_connected(&g, 5000, &SizeSampler::Uniform, 1, GrowthMode::Connected).unwrap();
        let seen: BTreeSet<Vec<u8>> = masks.iter().map(|m| m.bits().to_vec()).collect();
        assert!(seen.is_subset(&allowed));
        assert_eq!(seen, allowed, "every connected subset should eventually appear");
    }

    #[test]
    fn triangle_reaches_every_subset() {
        let k3 = SegmentGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let masks = sample_connected(&k3, 5000, &SizeSampler::Uniform, 2, GrowthMode::Connected).unwrap();
        let seen: BTreeSet<Vec<u8>> = masks.iter().map(|m| m.bits().to_vec()).collect();
        assert_eq!(seen.len(), 7);
    }

    #[test]
    fn single_vertex() {
        let g = SegmentGraph::from_edges(1, []).unwrap();
        let masks = sample_connected(&g, 10, &SizeSampler::Uniform, 0, GrowthMode::Connected).unwrap();
        assert!(masks.iter().all(|m| m.bits() == [1]));
    }

    #[test]
    fn disconnected_graph_stays_in_component() {
        let g = SegmentGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let masks = sample_connected(&g, 500, &SizeSampler::Fixed(4), 4, GrowthMode::Connected).unwrap();
        for m in masks {
            assert_eq!(m.count_ones(), 2);
            assert!(g.induces_connected(&m));
        }
    }

    #[test]
    fn clique_mode_yields_cliques() {
        // square with one diagonal: triangles {0,1,2} and {0,2,3}
        let g = SegmentGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let masks = sample_connected(&g, 2000, &SizeSampler::Uniform, 8, GrowthMode::Clique).unwrap();
        for m in &masks {
            let act: Vec<usize> = m.active().collect();
            for (i, &a) in act.iter().enumerate() {
                for &b in &act[i + 1..] {
                    assert!(g.has_edge(a, b), "{m:?}");
                }
            }
            assert!(m.count_ones() <= 3);
        }
    }

    #[test]
    fn fixed_and_weighted_sizes() {
        let g = SegmentGraph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let masks = sample_connected(&g, 100, &SizeSampler::Fixed(3), 5, GrowthMode::Connected).unwrap();
        assert!(masks.iter().all(|m| m.count_ones() == 3));
        let w = SizeSampler::Weighted(vec![0.0, 1.0]);
        let masks = sample_connected(&g, 100, &w, 5, GrowthMode::Connected).unwrap();
        assert!(masks.iter().all(|m| m.count_ones() == 2));
        assert!(sample_connected(&g, 1, &SizeSampler::Fixed(6), 0, GrowthMode::Connected).is_err());
    }

    #[test]
    fn determinism() {
        let g = path3();
        let a = sample_connected(&g, 100, &SizeSampler::Uniform, 42, GrowthMode::Connected).unwrap();
        let b = sample_connected(&g, 100, &SizeSampler::Uniform, 42, GrowthMode::Connected).unwrap();
        assert_eq!(a, b);
    }
}
