//! Lloyd-style k-means in the kernel feature space.
//!
//! Distances to cluster means are expanded through the Gram matrix:
//! `‖φ(x_i) − μ_c‖² = K_ii − (2/|c|) Σ_{j∈c} K_ij + (1/|c|²) Σ_{j,l∈c} K_jl`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_symmetric;
use crate::error::{Error, Result};
use crate::gram::GramMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// Within-cluster feature-space scatter after initialization and after each update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

pub fn kernel_kmeans(k: &GramMatrix, n_clusters: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let m = k.point_count();
    if n_clusters == 0 || n_clusters > m {
        return Err(Error::Argument(format!(
            "cluster count must be in 1..={m}, got {n_clusters}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::Argument("max_iter must be >= 1".into()));
    }
    check_symmetric(k)?;
    let kv = k.values();
    let pair_dist = |i: usize, j: usize| (kv[(i, i)] - 2.0 * kv[(i, j)] + kv[(j, j)]).max(0.0);

    // k-means++ seeding on kernel distances.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![rng.gen_range(0..m)];
    let mut nearest: Vec<f64> = (0..m).map(|i| pair_dist(i, centers[0])).collect();
    while centers.len() < n_clusters {
        let total: f64 = nearest.iter().sum();
        let next = if total > 1e-15 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if u < d {
                        break;
                    }
                    u -= d;
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            let free: Vec<usize> = (0..m).filter(|i| !centers.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        centers.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(pair_dist(i, next));
        }
    }
    let mut assign: Vec<usize> = (0..m)
        .map(|i| {
            (0..n_clusters)
                .min_by(|&a, &b| pair_dist(i, centers[a]).total_cmp(&pair_dist(i, centers[b])))
                .expect("n_clusters >= 1")
        })
        .collect();
    for (c, &p) in centers.iter().enumerate() {
        assign[p] = c;
    }

    let mut state = Clusters::new(kv, n_clusters);
    state.refresh(&assign);
    reseed_empty(&mut state, &mut assign);
    let mut trace = vec![state.objective(&assign)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next: Vec<usize> = (0..m)
            .map(|i| {
                let current = assign[i];
                let mut best = current;
                let mut best_d = state.dist(i, current);
                for c in 0..n_clusters {
                    let d = state.dist(i, c);
                    if d < best_d - 1e-12 {
                        best = c;
                        best_d = d;
                    }
                }
                best
            })
            .collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
        state.refresh(&assign);
        reseed_empty(&mut state, &mut assign);
        trace.push(state.objective(&assign));
    }
    Ok(KMeansResult {
        assignments: assign,
        objective_trace: trace,
        iterations,
        converged,
    })
}

struct Clusters<'a> {
    k: &'a nalgebra::DMatrix<f64>,
    n_clusters: usize,
    members: Vec<Vec<usize>>,
    /// `Σ_{j,l∈c} K_jl / |c|²` per cluster.
    self_term: Vec<f64>,
}

impl<'a> Clusters<'a> {
    fn new(k: &'a nalgebra::DMatrix<f64>, n_clusters: usize) -> Self {
        Clusters {
            k,
            n_clusters,
            members: vec![Vec::new(); n_clusters],
            self_term: vec![0.0; n_clusters],
        }
    }

    fn refresh(&mut self, assign: &[usize]) {
        self.members = vec![Vec::new(); self.n_clusters];
        for (i, &c) in assign.iter().enumerate() {
            self.members[c].push(i);
        }
        self.self_term = self
            .members
            .iter()
            .map(|mem| {
                if mem.is_empty() {
                    return 0.0;
                }
                let s: f64 = mem
                    .iter()
                    .flat_map(|&j| mem.iter().map(move |&l| (j, l)))
                    .map(|(j, l)| self.k[(j, l)])
                    .sum();
                s / (mem.len() * mem.len()) as f64
            })
            .collect();
    }

    fn dist(&self, i: usize, c: usize) -> f64 {
        let mem = &self.members[c];
        if mem.is_empty() {
            return f64::INFINITY;
        }
        let cross: f64 = mem.iter().map(|&j| self.k[(i, j)]).sum();
        (self.k[(i, i)] - 2.0 * cross / mem.len() as f64 + self.self_term[c]).max(0.0)
    }

    fn objective(&self, assign: &[usize]) -> f64 {
        assign.iter().enumerate().map(|(i, &c)| self.dist(i, c)).sum()
    }
}

/// Moves the point farthest from its own cluster mean into each empty cluster.
fn reseed_empty(state: &mut Clusters<'_>, assign: &mut [usize]) {
    while let Some(empty) = state.members.iter().position(Vec::is_empty) {
        let donor = (0..assign.len())
            .filter(|&i| state.members[assign[i]].len() > 1)
            .max_by(|&a, &b| {
                state
                    .dist(a, assign[a])
                    .total_cmp(&state.dist(b, assign[b]))
                    .then(b.cmp(&a))
            })
            .expect("k <= m leaves a cluster with two or more points");
        assign[donor] = empty;
        state.refresh(assign);
    }
}
