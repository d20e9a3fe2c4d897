//! Reference implementations used by the integration tests. Each one is the
//! slow, obvious version of something the library does faster.

#![allow(dead_code)]

use std::collections::BTreeSet;

/// Connectivity of `active` in the graph given by `edges`, by flood fill.
pub fn flood_fill_connected(n: usize, edges: &[(usize, usize)], active: &[bool]) -> bool {
    let Some(start) = active.iter().position(|&a| a) else {
        return false;
    };
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut frontier = vec![start];
    while let Some(v) = frontier.pop() {
        for &(a, b) in edges {
            let u = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if active[u] && !seen[u] {
                seen[u] = true;
                frontier.push(u);
            }
        }
    }
    (0..n).all(|i| !active[i] || seen[i])
}

/// Segment pairs joined by at least one 4-adjacent pixel pair, found by
/// comparing every pixel with every other pixel.
pub fn brute_adjacency(width: usize, labels: &[u32]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for p in 0..labels.len() {
        for q in p + 1..labels.len() {
            let (px, py) = ((p % width) as i64, (p / width) as i64);
            let (qx, qy) = ((q % width) as i64, (q / width) as i64);
            if (px - qx).abs() + (py - qy).abs() != 1 {
                continue;
            }
            let (a, b) = (labels[p] as usize, labels[q] as usize);
            if a != b {
                out.insert((a.min(b), a.max(b)));
            }
        }
    }
    out
}

/// `½ βᵀKβ + ε Σ|β| − fᵀβ`.
pub fn svr_dual_objective(k: &[Vec<f64>], f: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = beta.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * k[i][j] * beta[j];
        }
    }
    0.5 * quad + eps * beta.iter().map(|b| b.abs()).sum::<f64>() - f.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

#[derive(Clone, Copy)]
enum Face {
    Lower,
    NegFree,
    Zero,
    PosFree,
    Upper,
}

const FACES: [Face; 5] = [Face::Lower, Face::NegFree, Face::Zero, Face::PosFree, Face::Upper];

/// Global minimum of the ε-SVR dual
/// `min ½ βᵀKβ + ε Σ|β| − fᵀβ  s.t. Σβ = 0, |β_i| ≤ c_i`
/// by enumerating every face: each `β_i` is pinned to `−c_i`, `0` or `c_i`,
/// or free with a fixed sign. On a face the objective is a smooth quadratic
/// with one linear equality; its stationary point (when the KKT system is
/// nonsingular) is kept if it lies inside the face. The optimum lies on a
/// face whose restricted minimizer is unique, so it is always visited.
pub fn svr_dual_oracle(k: &[Vec<f64>], f: &[f64], eps: f64, c: &[f64]) -> (f64, Vec<f64>) {
    let n = f.len();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut faces = vec![0usize; n];
    loop {
        if let Some(beta) = solve_face(k, f, eps, c, &faces) {
            let obj = svr_dual_objective(k, f, eps, &beta);
            if obj < best.0 {
                best = (obj, beta);
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            faces[i] += 1;
            if faces[i] < FACES.len() {
                break;
            }
            faces[i] = 0;
            i += 1;
        }
    }
}

fn solve_face(k: &[Vec<f64>], f: &[f64], eps: f64, c: &[f64], faces: &[usize]) -> Option<Vec<f64>> {
    let n = f.len();
    let mut beta = vec![0.0; n];
    let mut free = Vec::new();
    let mut sign = vec![0.0; n];
    for i in 0..n {
        match FACES[faces[i]] {
            Face::Lower => beta[i] = -c[i],
            Face::Upper => beta[i] = c[i],
            Face::Zero => {}
            Face::NegFree => {
                sign[i] = -1.0;
                free.push(i);
            }
            Face::PosFree => {
                sign[i] = 1.0;
                free.push(i);
            }
        }
    }
    let fixed_sum: f64 = beta.iter().sum();
    if free.is_empty() {
        return (fixed_sum.abs() < 1e-12).then_some(beta);
    }
    // [K_FF 1; 1ᵀ 0] [β_F; ν] = [f_F − ε s_F − K_FB β_B; −Σβ_B]
    let m = free.len();
    let mut a = vec![vec![0.0; m + 2]; m + 1];
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            a[r][s] = k[i][j];
        }
        a[r][m] = 1.0;
        let kb: f64 = (0..n).map(|j| k[i][j] * beta[j]).sum();
        a[r][m + 1] = f[i] - eps * sign[i] - kb;
    }
    a[m][..m].fill(1.0);
    a[m][m + 1] = -fixed_sum;
    let x = gauss_solve(a)?;
    for (r, &i) in free.iter().enumerate() {
        let v = x[r];
        let inside = if sign[i] > 0.0 {
            (0.0..=c[i]).contains(&v)
        } else {
            (-c[i]..=0.0).contains(&v)
        };
        if !inside {
            return None;
        }
        beta[i] = v;
    }
    Some(beta)
}

/// Solves an augmented square system by Gaussian elimination with partial
/// pivoting; `None` when a pivot vanishes.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for row in lower {
            let factor = row[col] / pivot[col];
            if factor != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= factor * p;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Some(x)
}

/// Binary PPM bytes for a `width x height` image.
pub fn ppm(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        for x in 0..width {
            out.extend_from_slice(&f(x, y));
        }
    }
    out
}
