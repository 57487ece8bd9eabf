//! Vietoris-Rips persistent homology over point clouds: β0 via
//! union-find, β1 via boundary-matrix reduction with the twist/clearing
//! optimization, and Betti curves over filtration grids.

mod reduce;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, TopologyError};
use crate::linalg::Mat;
use crate::Result;

/// A finite point cloud with optional per-point labels.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Mat<f64>,
    pub labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Mat<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::InvalidArgument(
                "a point cloud needs at least one point".into(),
            ));
        }
        if !points.all_finite() {
            return Err(Error::InvalidArgument(
                "point cloud contains non-finite coordinates".into(),
            ));
        }
        if let Some(l) = &labels {
            if l.len() != points.rows() {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.rows()
                )));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    /// Pairwise squared Euclidean distances (64-bit; comparisons stay in
    /// squared space to avoid square-root noise at tie boundaries).
    fn squared_distances(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            let ri = self.points.row(i);
            for j in (i + 1)..n {
                let rj = self.points.row(j);
                let s: f64 = ri
                    .iter()
                    .zip(rj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d[i][j] = s;
                d[j][i] = s;
            }
        }
        d
    }
}

/// One birth/death feature of the filtration. `death` is `INFINITY` for
/// classes that never die within the observed range (always the last
/// connected component; possibly unfilled 1-cycles when `max_epsilon` is
/// below the cloud diameter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
}

/// β at each point of a sorted filtration grid.
#[derive(Debug, Clone)]
pub struct BettiCurve {
    pub dim: usize,
    pub epsilons: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Number of connected components of the ε-neighborhood graph, by
/// union-find. Independent of the boundary-matrix pipeline, so the two
/// can cross-check each other.
pub fn betti0_at(cloud: &PointCloud, epsilon: f64) -> usize {
    let n = cloud.len();
    let eps_sq = epsilon * epsilon;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for i in 0..n {
        let ri = cloud.points.row(i);
        for j in (i + 1)..n {
            let rj = cloud.points.row(j);
            let d: f64 = ri.iter().zip(rj).map(|(a, b)| (a - b) * (a - b)).sum();
            if d <= eps_sq {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                    components -= 1;
                }
            }
        }
    }
    components
}

/// Default ceiling on the total simplex count (vertices + edges +
/// triangles). ~300 points fit under it with room to spare; beyond that
/// the triangle count grows cubically and the cloud should be
/// subsampled.
pub const DEFAULT_SIMPLEX_BUDGET: usize = 8_000_000;

/// Persistence diagram of the Vietoris-Rips filtration up to
/// `max_epsilon`. `max_dim` is the highest homology dimension reported
/// (0 or 1); simplices one dimension higher are enumerated so deaths are
/// seen. Zero-persistence pairs are dropped.
pub fn vr_persistence(
    cloud: &PointCloud,
    max_epsilon: f64,
    max_dim: usize,
) -> Result<Vec<PersistencePair>> {
    vr_persistence_budgeted(cloud, max_epsilon, max_dim, DEFAULT_SIMPLEX_BUDGET)
}

/// [`vr_persistence`] with an explicit simplex budget.
pub fn vr_persistence_budgeted(
    cloud: &PointCloud,
    max_epsilon: f64,
    max_dim: usize,
    budget: usize,
) -> Result<Vec<PersistencePair>> {
    if !(max_epsilon > 0.0) || !max_epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "max_epsilon must be positive and finite, got {max_epsilon}"
        )));
    }
    if max_dim > 1 {
        return Err(Error::InvalidArgument(format!(
            "homology dimension {max_dim} unsupported (cap is 1)"
        )));
    }
    let n = cloud.len();
    let dist_sq = cloud.squared_distances();
    let eps_sq = max_epsilon * max_epsilon;

    // Worst case first: if even the complete complex fits, skip the
    // counting pass. Otherwise count within the filtration, aborting as
    // soon as the budget is blown.
    let worst = n as u128
        + (n as u128 * (n as u128 - 1)) / 2
        + if max_dim >= 1 {
            n as u128 * (n as u128 - 1) * (n as u128 - 2) / 6
        } else {
            0
        };
    if worst > budget as u128 {
        let counted = reduce::count_simplices(&dist_sq, eps_sq, max_dim, budget);
        if counted > budget {
            return Err(Error::Topology(TopologyError::SimplexBudget {
                points: n,
                simplices: counted,
                budget,
            }));
        }
    }
    let simplices = reduce::enumerate_simplices(&dist_sq, eps_sq, max_dim);
    let mut pairs = reduce::reduce_and_pair(&simplices);
    if max_dim == 0 {
        pairs.retain(|p| p.dim == 0);
    }
    Ok(pairs)
}

/// Counts the pairs of dimension `dim` alive (birth ≤ ε < death) at each
/// grid point. The grid must be sorted ascending.
pub fn betti_curve(pairs: &[PersistencePair], dim: usize, eps_grid: &[f64]) -> Result<BettiCurve> {
    if eps_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "epsilon grid must be sorted ascending".into(),
        ));
    }
    let counts = eps_grid
        .iter()
        .map(|&eps| {
            pairs
                .iter()
                .filter(|p| p.dim == dim && p.birth <= eps && eps < p.death)
                .count()
        })
        .collect();
    Ok(BettiCurve {
        dim,
        epsilons: eps_grid.to_vec(),
        counts,
    })
}

/// Uniform subsample without replacement, deterministic per seed. Row
/// order of the result follows the original cloud.
pub fn subsample(cloud: &PointCloud, m: usize, seed: u64) -> Result<PointCloud> {
    let n = check_subsample_count(cloud, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(take_rows(cloud, &idx))
}

/// Maxmin (farthest-point) landmark selection: the first landmark is
/// random per seed, each later landmark maximizes its distance to the
/// chosen set. Spreads samples to preserve coarse shape.
pub fn subsample_maxmin(cloud: &PointCloud, m: usize, seed: u64) -> Result<PointCloud> {
    let n = check_subsample_count(cloud, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rand::seq::index::sample(&mut rng, n, 1).index(0);
    let mut chosen = vec![first];
    let mut min_dist_sq: Vec<f64> = (0..n)
        .map(|i| row_dist_sq(&cloud.points, i, first))
        .collect();
    while chosen.len() < m {
        let (next, _) = min_dist_sq
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        chosen.push(next);
        for i in 0..n {
            let d = row_dist_sq(&cloud.points, i, next);
            if d < min_dist_sq[i] {
                min_dist_sq[i] = d;
            }
        }
    }
    chosen.sort_unstable();
    Ok(take_rows(cloud, &chosen))
}

fn check_subsample_count(cloud: &PointCloud, m: usize) -> Result<usize> {
    let n = cloud.len();
    if m > n {
        return Err(Error::Topology(TopologyError::SubsampleTooLarge {
            requested: m,
            available: n,
        }));
    }
    if m == 0 {
        return Err(Error::InvalidArgument(
            "cannot subsample zero points".into(),
        ));
    }
    Ok(n)
}

fn row_dist_sq(points: &Mat<f64>, a: usize, b: usize) -> f64 {
    points
        .row(a)
        .iter()
        .zip(points.row(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn take_rows(cloud: &PointCloud, idx: &[usize]) -> PointCloud {
    PointCloud {
        points: cloud.points.select_rows(idx),
        labels: cloud
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect()),
    }
}
