//! Simplex enumeration and Z2 boundary-matrix reduction (twist/clearing)
//! for Vietoris-Rips filtrations up to dimension 2.

use super::PersistencePair;

/// A simplex in the global filtration order. `verts` holds 1, 2, or 3
/// point indices in ascending order; `filt` is the squared filtration
/// value (squared distances avoid square-root noise at tie boundaries).
#[derive(Debug, Clone)]
pub(super) struct Simplex {
    pub filt_sq: f64,
    pub verts: [u32; 3],
    pub dim: u8,
}

const NONE: u32 = u32::MAX;

/// Enumerates vertices, in-range edges, and (if `max_dim == 1`) in-range
/// triangles, sorted by (filtration, dimension, lexicographic vertices).
pub(super) fn enumerate_simplices(
    dist_sq: &[Vec<f64>],
    eps_max_sq: f64,
    max_dim: usize,
) -> Vec<Simplex> {
    let n = dist_sq.len();
    let mut simplices = Vec::with_capacity(n);
    for v in 0..n {
        simplices.push(Simplex {
            filt_sq: 0.0,
            verts: [v as u32, NONE, NONE],
            dim: 0,
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if dist_sq[i][j] <= eps_max_sq {
                simplices.push(Simplex {
                    filt_sq: dist_sq[i][j],
                    verts: [i as u32, j as u32, NONE],
                    dim: 1,
                });
            }
        }
    }
    if max_dim >= 1 {
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = dist_sq[i][j];
                if dij > eps_max_sq {
                    continue;
                }
                for k in (j + 1)..n {
                    let filt = dij.max(dist_sq[i][k]).max(dist_sq[j][k]);
                    if filt <= eps_max_sq {
                        simplices.push(Simplex {
                            filt_sq: filt,
                            verts: [i as u32, j as u32, k as u32],
                            dim: 2,
                        });
                    }
                }
            }
        }
    }
    // Faces sort before cofaces: filtration is monotone under inclusion
    // and the dimension tiebreak handles equal values; the lexicographic
    // vertex tiebreak makes reductions deterministic.
    simplices.sort_by(|a, b| {
        a.filt_sq
            .partial_cmp(&b.filt_sq)
            .expect("finite filtration")
            .then(a.dim.cmp(&b.dim))
            .then(a.verts.cmp(&b.verts))
    });
    simplices
}

/// Total simplex count for the budget check, aborting early once `budget`
/// is exceeded so the counting pass stays cheap.
pub(super) fn count_simplices(
    dist_sq: &[Vec<f64>],
    eps_max_sq: f64,
    max_dim: usize,
    budget: usize,
) -> usize {
    let n = dist_sq.len();
    let mut count = n;
    for i in 0..n {
        for j in (i + 1)..n {
            if dist_sq[i][j] <= eps_max_sq {
                count += 1;
            }
        }
        if count > budget {
            return count;
        }
    }
    if max_dim >= 1 {
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = dist_sq[i][j];
                if dij > eps_max_sq {
                    continue;
                }
                for k in (j + 1)..n {
                    let filt = dij.max(dist_sq[i][k]).max(dist_sq[j][k]);
                    if filt <= eps_max_sq {
                        count += 1;
                    }
                }
                if count > budget {
                    return count;
                }
            }
        }
    }
    count
}

/// Adds sorted Z2 columns: symmetric difference, result replaces `target`.
fn xor_into(target: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    let (mut a, mut b) = (0, 0);
    while a < target.len() && b < other.len() {
        match target[a].cmp(&other[b]) {
            std::cmp::Ordering::Less => {
                scratch.push(target[a]);
                a += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[b]);
                b += 1;
            }
            std::cmp::Ordering::Equal => {
                a += 1;
                b += 1;
            }
        }
    }
    scratch.extend_from_slice(&target[a..]);
    scratch.extend_from_slice(&other[b..]);
    std::mem::swap(target, scratch);
}

/// Reduces the boundary matrix with the twist/clearing optimization
/// (columns processed in decreasing dimension; an edge pivoted by a
/// triangle is cleared before the edge pass) and converts pivots into
/// persistence pairs. Zero-persistence pairs are dropped; classes that
/// never die within the filtration get `death = INFINITY`.
pub(super) fn reduce_and_pair(simplices: &[Simplex]) -> Vec<PersistencePair> {
    let m = simplices.len();
    let n = simplices.iter().filter(|s| s.dim == 0).count();
    // Boundary maps need face lookup: index vertices and edges by their
    // vertex keys to find their sorted positions.
    let mut vertex_pos: Vec<u32> = vec![NONE; n];
    let mut edge_pos = std::collections::HashMap::new();
    for (pos, s) in simplices.iter().enumerate() {
        match s.dim {
            0 => vertex_pos[s.verts[0] as usize] = pos as u32,
            1 => {
                edge_pos.insert((s.verts[0], s.verts[1]), pos as u32);
            }
            _ => {}
        }
    }

    let mut pivot_of: Vec<u32> = vec![NONE; m];
    let mut cleared: Vec<bool> = vec![false; m];
    let mut reduced: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut scratch: Vec<u32> = Vec::new();
    let mut pairs = Vec::new();

    // Pass 1: triangle columns (boundary = three edges).
    for (pos, s) in simplices.iter().enumerate() {
        if s.dim != 2 {
            continue;
        }
        let [i, j, k] = s.verts;
        let mut col = vec![
            edge_pos[&(i, j)],
            edge_pos[&(i, k)],
            edge_pos[&(j, k)],
        ];
        col.sort_unstable();
        loop {
            let Some(&low) = col.last() else { break };
            let other = pivot_of[low as usize];
            if other == NONE {
                break;
            }
            let donor = std::mem::take(&mut reduced[other as usize]);
            xor_into(&mut col, &donor, &mut scratch);
            reduced[other as usize] = donor;
        }
        if let Some(&low) = col.last() {
            pivot_of[low as usize] = pos as u32;
            cleared[low as usize] = true;
            let birth_sq = simplices[low as usize].filt_sq;
            if birth_sq < s.filt_sq {
                pairs.push(PersistencePair {
                    dim: 1,
                    birth: birth_sq.sqrt(),
                    death: s.filt_sq.sqrt(),
                });
            }
            reduced[pos] = col;
        }
    }

    // Pass 2: edge columns (boundary = two vertices). Cleared edges are
    // known creators already paired by pass 1.
    for (pos, s) in simplices.iter().enumerate() {
        if s.dim != 1 || cleared[pos] {
            continue;
        }
        let mut col = vec![
            vertex_pos[s.verts[0] as usize],
            vertex_pos[s.verts[1] as usize],
        ];
        col.sort_unstable();
        loop {
            let Some(&low) = col.last() else { break };
            let other = pivot_of[low as usize];
            if other == NONE {
                break;
            }
            let donor = std::mem::take(&mut reduced[other as usize]);
            xor_into(&mut col, &donor, &mut scratch);
            reduced[other as usize] = donor;
        }
        if let Some(&low) = col.last() {
            pivot_of[low as usize] = pos as u32;
            let birth_sq = simplices[low as usize].filt_sq;
            if birth_sq < s.filt_sq {
                pairs.push(PersistencePair {
                    dim: 0,
                    birth: birth_sq.sqrt(),
                    death: s.filt_sq.sqrt(),
                });
            }
            reduced[pos] = col;
        } else {
            // An uncleared edge column that reduces to zero creates a
            // 1-cycle no triangle ever fills: essential within [0, eps].
            pairs.push(PersistencePair {
                dim: 1,
                birth: s.filt_sq.sqrt(),
                death: f64::INFINITY,
            });
        }
    }

    // Vertices that are never a pivot's low survive the whole filtration.
    for (pos, s) in simplices.iter().enumerate() {
        if s.dim == 0 && pivot_of[pos] == NONE {
            pairs.push(PersistencePair {
                dim: 0,
                birth: 0.0,
                death: f64::INFINITY,
            });
        }
    }

    pairs.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(a.birth.partial_cmp(&b.birth).expect("finite birth"))
            .then(a.death.partial_cmp(&b.death).expect("comparable death"))
    });
    pairs
}
