//! Earth Mover's distance between two unit-mass maps.
//!
//! Large maps are block-summed onto a coarse grid first (mass-preserving),
//! then the transportation problem between the positive and negative parts
//! of the difference is solved to optimality with successive shortest
//! paths under node potentials. Ground distance is Euclidean between cell
//! centers; the result is rescaled by the block size back to source-pixel
//! units.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::map::{Map2d, SaliencyMap};

/// Block-sums `map` into cells of `block x block` pixels (edge cells may be
/// smaller). Total mass is preserved exactly up to float addition.
fn block_sum(map: &Map2d, block: usize) -> Map2d {
    if block == 1 {
        return map.clone();
    }
    let oh = map.height.div_ceil(block);
    let ow = map.width.div_ceil(block);
    let mut out = Map2d::zeros(oh, ow);
    for y in 0..map.height {
        for x in 0..map.width {
            let v = out.at(y / block, x / block) + map.at(y, x);
            out.set(y / block, x / block, v);
        }
    }
    out
}

struct Endpoint {
    row: f64,
    col: f64,
    mass: f64,
}

fn distance(a: &Endpoint, b: &Endpoint) -> f64 {
    let (dr, dc) = (a.row - b.row, a.col - b.col);
    (dr * dr + dc * dc).sqrt()
}

/// Minimal transport cost moving `supplies` onto `demands` (equal total
/// mass up to float error). Exact: each augmentation follows a true
/// shortest path in the residual network.
fn min_cost_transport(supplies: &[Endpoint], demands: &[Endpoint]) -> f64 {
    let ns = supplies.len();
    let nd = demands.len();
    if ns == 0 || nd == 0 {
        return 0.0;
    }
    let mut rem_s: Vec<f64> = supplies.iter().map(|e| e.mass).collect();
    let mut rem_d: Vec<f64> = demands.iter().map(|e| e.mass).collect();
    let total: f64 = rem_s
        .iter()
        .sum::<f64>()
        .min(rem_d.iter().sum::<f64>());
    let mut pushed = 0.0;
    // Node order: supplies 0..ns, demands ns..ns+nd.
    let mut potential = vec![0.0; ns + nd];
    // flow[(i, j)] > 0 creates a residual arc demand j -> supply i.
    let mut flow: HashMap<(u32, u32), f64> = HashMap::new();
    let mut inflow: Vec<Vec<u32>> = vec![Vec::new(); nd];

    while total - pushed > 1e-12 * total.max(1.0) {
        // Dijkstra from all supplies with remaining mass.
        let n = ns + nd;
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut settled = vec![false; n];
        for (i, &r) in rem_s.iter().enumerate() {
            if r > 0.0 {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !settled[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            settled[u] = true;
            if u >= ns && rem_d[u - ns] > 0.0 {
                target = u;
                break;
            }
            if u < ns {
                for j in 0..nd {
                    let rc = (distance(&supplies[u], &demands[j]) + potential[u]
                        - potential[ns + j])
                        .max(0.0);
                    if dist[u] + rc < dist[ns + j] {
                        dist[ns + j] = dist[u] + rc;
                        prev[ns + j] = u;
                    }
                }
            } else {
                let j = u - ns;
                for &iu in &inflow[j] {
                    let i = iu as usize;
                    if flow.get(&(iu, j as u32)).copied().unwrap_or(0.0) <= 0.0 {
                        continue;
                    }
                    let rc = (-distance(&supplies[i], &demands[j]) + potential[u]
                        - potential[i])
                        .max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        prev[i] = u;
                    }
                }
            }
        }
        if target == usize::MAX {
            break; // numerically exhausted
        }
        for v in 0..n {
            if dist[v].is_finite() {
                potential[v] += dist[v].min(dist[target]);
            } else {
                potential[v] += dist[target];
            }
        }
        // Trace the augmenting path and find its bottleneck.
        let mut bottleneck = rem_d[target - ns];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if v >= ns {
                // forward arc u (supply) -> v (demand)
            } else {
                bottleneck = bottleneck.min(flow[&(v as u32, (u - ns) as u32)]);
            }
            v = u;
        }
        bottleneck = bottleneck.min(rem_s[v]);
        if bottleneck <= 1e-15 {
            break;
        }
        rem_s[v] -= bottleneck;
        rem_d[target - ns] -= bottleneck;
        let mut w = target;
        while prev[w] != usize::MAX {
            let u = prev[w];
            if w >= ns {
                let key = (u as u32, (w - ns) as u32);
                let entry = flow.entry(key).or_insert(0.0);
                if *entry == 0.0 {
                    inflow[w - ns].push(u as u32);
                }
                *entry += bottleneck;
            } else {
                let key = (w as u32, (u - ns) as u32);
                *flow.get_mut(&key).unwrap() -= bottleneck;
            }
            w = u;
        }
        pushed += bottleneck;
    }

    flow.iter()
        .map(|(&(i, j), &f)| f * distance(&supplies[i as usize], &demands[j as usize]))
        .sum()
}

/// Distance between two distributions on the same pixel grid, in
/// source-pixel units. `grid` caps the transport grid size; a grid at
/// least as large as the maps leaves them untouched.
pub fn emd(p: &SaliencyMap, q: &SaliencyMap, grid: (usize, usize)) -> Result<f64> {
    if !p.same_shape(q) {
        return Err(Error::ShapeMismatch {
            op: "emd",
            detail: format!(
                "{}x{} vs {}x{}",
                p.height, p.width, q.height, q.width
            ),
        });
    }
    if grid.0 == 0 || grid.1 == 0 {
        return Err(Error::InvalidConfig("emd grid must be positive".into()));
    }
    let block = p
        .height
        .div_ceil(grid.0)
        .max(p.width.div_ceil(grid.1))
        .max(1);
    let pd = block_sum(p, block);
    let qd = block_sum(q, block);

    let mut supplies = Vec::new();
    let mut demands = Vec::new();
    for y in 0..pd.height {
        for x in 0..pd.width {
            let diff = pd.at(y, x) - qd.at(y, x);
            let endpoint = Endpoint {
                row: y as f64,
                col: x as f64,
                mass: diff.abs(),
            };
            if diff > 0.0 {
                supplies.push(endpoint);
            } else if diff < 0.0 {
                demands.push(endpoint);
            }
        }
    }
    Ok(min_cost_transport(&supplies, &demands) * block as f64)
}
