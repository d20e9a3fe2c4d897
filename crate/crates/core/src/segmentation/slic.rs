//! SLIC superpixels: local k-means in CIELAB + xy, followed by a
//! connectivity pass that folds stray fragments into their largest neighbor.

use serde::{Deserialize, Serialize};

use super::{connected_components, neighbors4, SegmentMap};
use crate::error::{contract, Result};
use crate::image::{Rgb, RgbImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    /// Target number of segments.
    pub k: usize,
    /// Weight of spatial distance relative to color distance.
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            k: 50,
            compactness: 10.0,
            iterations: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Center {
    l: f64,
    a: f64,
    b: f64,
    x: f64,
    y: f64,
}

pub fn slic_segment(image: &RgbImage, params: SlicParams) -> Result<SegmentMap> {
    let SlicParams {
        k,
        compactness,
        iterations,
    } = params;
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    if k == 0 || k > n {
        return contract(format!("SLIC k must be in 1..={n}, got {k}"));
    }
    if !(compactness > 0.0 && compactness.is_finite()) {
        return contract(format!("SLIC compactness must be positive, got {compactness}"));
    }

    let lab: Vec<[f64; 3]> = image.pixels().map(rgb_to_lab).collect();

    let (nx, ny) = grid_shape(w, h, k);
    let step_x = w as f64 / nx as f64;
    let step_y = h as f64 / ny as f64;
    let spacing = (step_x * step_y).sqrt();
    let radius_x = step_x.ceil() as isize;
    let radius_y = step_y.ceil() as isize;

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * step_x) as usize).min(w - 1);
            let cy = (((j as f64 + 0.5) * step_y) as usize).min(h - 1);
            let (px, py) = lowest_gradient(&lab, w, h, cx, cy);
            let c = lab[py * w + px];
            centers.push(Center {
                l: c[0],
                a: c[1],
                b: c[2],
                x: px as f64,
                y: py as f64,
            });
        }
    }

    let spatial_weight = (compactness / spacing).powi(2);
    let mut assign = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..iterations.max(1) {
        dist.fill(f64::INFINITY);
        assign.fill(u32::MAX);
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x.round() as isize - radius_x).max(0) as usize;
            let x1 = (c.x.round() as isize + radius_x).min(w as isize - 1) as usize;
            let y0 = (c.y.round() as isize - radius_y).max(0) as usize;
            let y1 = (c.y.round() as isize + radius_y).min(h as isize - 1) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let d = distance(c, &lab[p], x, y, spatial_weight);
                    if d < dist[p] {
                        dist[p] = d;
                        assign[p] = ci as u32;
                    }
                }
            }
        }
        // pixels outside every search window fall back to a global search
        for p in 0..n {
            if assign[p] == u32::MAX {
                let (x, y) = (p % w, p / w);
                let (best, _) = centers
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| (ci, distance(c, &lab[p], x, y, spatial_weight)))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                assign[p] = best as u32;
            }
        }

        let mut sums = vec![(Center::default(), 0usize); centers.len()];
        for (p, &ci) in assign.iter().enumerate() {
            let (s, count) = &mut sums[ci as usize];
            s.l += lab[p][0];
            s.a += lab[p][1];
            s.b += lab[p][2];
            s.x += (p % w) as f64;
            s.y += (p / w) as f64;
            *count += 1;
        }
        for (c, (s, count)) in centers.iter_mut().zip(sums) {
            if count > 0 {
                let m = count as f64;
                *c = Center {
                    l: s.l / m,
                    a: s.a / m,
                    b: s.b / m,
                    x: s.x / m,
                    y: s.y / m,
                };
            }
        }
    }

    let labels = enforce_connectivity(w, h, &assign);
    SegmentMap::new(w, h, labels)
}

/// Number of seed columns and rows, close to `k` cells of roughly square
/// shape and never more than `2k`.
fn grid_shape(w: usize, h: usize, k: usize) -> (usize, usize) {
    let spacing = ((w * h) as f64 / k as f64).sqrt();
    let mut nx = ((w as f64 / spacing).round() as usize).clamp(1, w);
    let mut ny = ((h as f64 / spacing).round() as usize).clamp(1, h);
    while nx * ny > 2 * k {
        if nx >= ny && nx > 1 {
            nx -= 1;
        } else {
            ny -= 1;
        }
    }
    (nx, ny)
}

#[inline]
fn distance(c: &Center, lab: &[f64; 3], x: usize, y: usize, spatial_weight: f64) -> f64 {
    let dc = (c.l - lab[0]).powi(2) + (c.a - lab[1]).powi(2) + (c.b - lab[2]).powi(2);
    let ds = (c.x - x as f64).powi(2) + (c.y - y as f64).powi(2);
    dc + ds * spatial_weight
}

fn lowest_gradient(lab: &[[f64; 3]], w: usize, h: usize, cx: usize, cy: usize) -> (usize, usize) {
    let at = |x: usize, y: usize| lab[y * w + x];
    let sq = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let gradient = |x: usize, y: usize| {
        let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        sq(at(xr, y), at(xl, y)) + sq(at(x, yd), at(x, yu))
    };
    let mut best = (cx, cy);
    let mut best_g = gradient(cx, cy);
    for y in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
        for x in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
            let g = gradient(x, y);
            if g < best_g {
                best_g = g;
                best = (x, y);
            }
        }
    }
    best
}

/// Keeps the largest 4-connected component of each cluster and merges every
/// other fragment into the largest adjacent region, then renumbers labels by
/// first appearance.
fn enforce_connectivity(w: usize, h: usize, assign: &[u32]) -> Vec<u32> {
    let (comp, n_comp) = connected_components(w, h, assign);
    let mut size = vec![0usize; n_comp];
    let mut cluster = vec![0u32; n_comp];
    for (p, &c) in comp.iter().enumerate() {
        size[c as usize] += 1;
        cluster[c as usize] = assign[p];
    }
    let n_clusters = assign.iter().max().map_or(0, |&m| m as usize + 1);
    let mut keeper = vec![usize::MAX; n_clusters];
    for c in 0..n_comp {
        let k = &mut keeper[cluster[c] as usize];
        if *k == usize::MAX || size[c] > size[*k] {
            *k = c;
        }
    }

    let mut comp_neighbors = vec![Vec::new(); n_comp];
    for p in 0..assign.len() {
        for q in neighbors4(p, w, h) {
            let (a, b) = (comp[p] as usize, comp[q] as usize);
            if a != b {
                comp_neighbors[a].push(b);
            }
        }
    }
    for ns in &mut comp_neighbors {
        ns.sort_unstable();
        ns.dedup();
    }

    let mut parent: Vec<usize> = (0..n_comp).collect();
    let mut merged_size = size.clone();
    let mut members: Vec<Vec<usize>> = (0..n_comp).map(|c| vec![c]).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in 0..n_comp {
        if keeper[cluster[c] as usize] == c || find(&mut parent, c) != c {
            continue;
        }
        // neighbors of the whole merged set rooted at c
        let mut target: Option<usize> = None;
        for &m in &members[c] {
            for &nb in &comp_neighbors[m] {
                let r = find(&mut parent, nb);
                if r == c {
                    continue;
                }
                if target.is_none_or(|t| merged_size[r] > merged_size[t] || (merged_size[r] == merged_size[t] && r < t))
                {
                    target = Some(r);
                }
            }
        }
        if let Some(t) = target {
            parent[c] = t;
            merged_size[t] += merged_size[c];
            let moved = std::mem::take(&mut members[c]);
            members[t].extend(moved);
        }
    }

    let mut relabel = vec![u32::MAX; n_comp];
    let mut next = 0u32;
    comp.iter()
        .map(|&c| {
            let r = find(&mut parent, c as usize);
            if relabel[r] == u32::MAX {
                relabel[r] = next;
                next += 1;
            }
            relabel[r]
        })
        .collect()
}

fn rgb_to_lab(px: Rgb) -> [f64; 3] {
    fn linear(c: u8) -> f64 {
        let c = f64::from(c) / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        const DELTA: f64 = 6.0 / 29.0;
        if t > DELTA * DELTA * DELTA {
            t.cbrt()
        } else {
            t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
        }
    }
    let [r, g, b] = px.0.map(linear);
    // sRGB -> XYZ (D65), normalized by the reference white
    let x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}
