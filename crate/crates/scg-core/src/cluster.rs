//! Density-based clustering of 2-D embeddings plus epsilon selection via
//! the k-distance knee.
//!
//! Conventions are pinned because they vary between DBSCAN
//! implementations: neighborhoods are inclusive (`dist <= eps`), a point
//! counts toward its own neighborhood, and border points join the first
//! core point that reaches them in scan order.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map_indexed;

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabels {
    /// Per-point label; -1 is noise, clusters are numbered from 0 in order
    /// of first core-point discovery.
    pub labels: Vec<i32>,
    pub eps: f64,
    pub min_samples: usize,
}

impl ClusterLabels {
    pub fn num_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn num_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

fn neighborhoods(points: &[[f64; 2]], eps: f64) -> Vec<Vec<usize>> {
    crate::exec::par_map(points, |p| {
        let mut neigh = Vec::new();
        for (j, q) in points.iter().enumerate() {
            let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
            if dist <= eps {
                neigh.push(j);
            }
        }
        neigh
    })
}

/// Standard DBSCAN over euclidean distance. Deterministic given input
/// order; brute-force O(N^2) neighborhoods (datasets are thousands of
/// scenes, not millions).
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_samples: usize) -> ClusterLabels {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_samples >= 1, "min_samples must be >= 1");
    const UNVISITED: i32 = -2;
    let n = points.len();
    let neigh = neighborhoods(points, eps);
    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0i32;
    for p in 0..n {
        if labels[p] != UNVISITED {
            continue;
        }
        if neigh[p].len() < min_samples {
            labels[p] = NOISE;
            continue;
        }
        labels[p] = cluster;
        let mut queue: VecDeque<usize> = neigh[p].iter().copied().filter(|&q| q != p).collect();
        while let Some(q) = queue.pop_front() {
            if labels[q] == NOISE {
                labels[q] = cluster; // border point adopted by this cluster
            }
            if labels[q] != UNVISITED {
                continue;
            }
            labels[q] = cluster;
            if neigh[q].len() >= min_samples {
                queue.extend(neigh[q].iter().copied());
            }
        }
        cluster += 1;
    }
    ClusterLabels {
        labels,
        eps,
        min_samples,
    }
}

/// Euclidean distance of every point to its k-th nearest *other* point,
/// returned ascending.
pub fn k_distance(points: &[[f64; 2]], k: usize) -> Result<Vec<f64>> {
    if k >= points.len() {
        return Err(Error::contract(format!(
            "k_distance needs k < N, got k={k}, N={}",
            points.len()
        )));
    }
    if k == 0 {
        return Err(Error::contract("k_distance needs k >= 1"));
    }
    let mut dists = par_map_indexed(points, |i, p| {
        let mut others: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .collect();
        others.sort_by(f64::total_cmp);
        others[k - 1]
    });
    dists.sort_by(f64::total_cmp);
    Ok(dists)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knee {
    pub index: usize,
    pub value: f64,
    /// Maximum normalized chord distance; values below ~1e-6 mean the
    /// curve has no usable elbow.
    pub prominence: f64,
}

/// Knee of an ascending k-distance curve: the point with maximum
/// perpendicular distance to the chord from first to last point, after
/// normalizing both axes to [0, 1]. Ties take the smaller index.
pub fn knee_point(sorted_kdist: &[f64]) -> Knee {
    assert!(sorted_kdist.len() >= 3, "knee needs at least 3 values");
    let n = sorted_kdist.len();
    let (y0, y1) = (sorted_kdist[0], sorted_kdist[n - 1]);
    if (y1 - y0).abs() < f64::EPSILON {
        return Knee {
            index: 0,
            value: sorted_kdist[0],
            prominence: 0.0,
        };
    }
    // Chord from (0, 0) to (1, 1) in normalized coordinates.
    let mut best = Knee {
        index: 0,
        value: sorted_kdist[0],
        prominence: 0.0,
    };
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for (i, &y) in sorted_kdist.iter().enumerate() {
        let xn = i as f64 / (n - 1) as f64;
        let yn = (y - y0) / (y1 - y0);
        let dist = (xn - yn).abs() * inv_sqrt2;
        if dist > best.prominence {
            best = Knee {
                index: i,
                value: y,
                prominence: dist,
            };
        }
    }
    best
}

/// The k-distance value at the knee; callers should treat a knee
/// prominence below 1e-6 (see [`knee_point`]) as "no elbow".
pub fn suggest_eps(sorted_kdist: &[f64]) -> f64 {
    knee_point(sorted_kdist).value
}

/// Writes `scene_id,label` rows.
pub fn write_labels_csv(
    path: impl AsRef<Path>,
    ids: &[String],
    labels: &ClusterLabels,
) -> Result<()> {
    if ids.len() != labels.labels.len() {
        return Err(Error::contract("id/label length mismatch"));
    }
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    writeln!(out, "scene_id,label")?;
    for (id, label) in ids.iter().zip(&labels.labels) {
        writeln!(out, "{id},{label}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(String, i32)>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = record
            .get(0)
            .ok_or_else(|| Error::validation("labels: missing scene_id"))?;
        let label: i32 = record
            .get(1)
            .ok_or_else(|| Error::validation("labels: missing label"))?
            .parse()
            .map_err(|e| Error::validation(format!("labels: bad label: {e}")))?;
        rows.push((id.to_string(), label));
    }
    Ok(rows)
}

#[cfg(test)]
pub mod reference {
    //! Brute-force DBSCAN oracle, deliberately structured differently from
    //! the production path: core points first, connected components of the
    //! core graph second, border assignment third.

    use super::NOISE;

    pub fn dbscan_reference(points: &[[f64; 2]], eps: f64, min_samples: usize) -> Vec<i32> {
        let n = points.len();
        let dist =
            |i: usize, j: usize| (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
        let is_core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| dist(i, j) <= eps).count() >= min_samples)
            .collect();

        // Union-find over core points within eps of each other.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for i in 0..n {
            for j in 0..n {
                if i < j && is_core[i] && is_core[j] && dist(i, j) <= eps {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut labels = vec![NOISE; n];
        let mut next = 0;
        let mut root_label = std::collections::BTreeMap::new();
        for i in 0..n {
            if is_core[i] {
                let root = find(&mut parent, i);
                let label = *root_label.entry(root).or_insert_with(|| {
                    let l = next;
                    next += 1;
                    l
                });
                labels[i] = label;
            }
        }
        // Border points join the earliest-discovered adjacent cluster.
        // Components are numbered by their minimal core index, which is the
        // scan-order discovery rule, so that is the smallest label among
        // adjacent cores.
        for i in 0..n {
            if !is_core[i] {
                let adjacent = (0..n)
                    .filter(|&j| is_core[j] && dist(i, j) <= eps)
                    .map(|j| labels[j])
                    .min();
                if let Some(label) = adjacent {
                    labels[i] = label;
                }
            }
        }
        labels
    }

    /// Canonical partition signature: sets of point indices keyed by their
    /// smallest member, plus the noise set.
    pub fn partition_signature(labels: &[i32]) -> Vec<Vec<usize>> {
        let mut groups: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        let mut sig: Vec<Vec<usize>> = groups.into_values().collect();
        sig.sort();
        sig
    }
}

#[cfg(test)]
mod tests {
    use super::reference::{dbscan_reference, partition_signature};
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_points_are_all_noise() {
        let points = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let got = dbscan(&points, 0.5, 5);
        assert!(got.labels.iter().all(|&l| l == NOISE));
        assert_eq!(got.num_clusters(), 0);
        assert_eq!(got.num_noise(), 4);
    }

    #[test]
    fn two_blobs_form_two_clusters() {
        let mut points = Vec::new();
        for i in 0..10 {
            points.push([i as f64 * 0.01, 0.0]);
        }
        for i in 0..10 {
            points.push([1.0 + i as f64 * 0.01, 0.0]);
        }
        let got = dbscan(&points, 0.05, 5);
        assert_eq!(got.num_clusters(), 2);
        assert_eq!(got.num_noise(), 0);
        assert!(got.labels[..10].iter().all(|&l| l == 0));
        assert!(got.labels[10..].iter().all(|&l| l == 1));

        let expect = dbscan_reference(&points, 0.05, 5);
        assert_eq!(
            partition_signature(&got.labels),
            partition_signature(&expect)
        );
    }

    #[test]
    fn coincident_points_form_one_cluster() {
        let points = [[0.3, 0.3]; 5];
        for eps in [1e-9, 0.05, 10.0] {
            let got = dbscan(&points, eps, 5);
            assert!(got.labels.iter().all(|&l| l == 0), "eps={eps}");
        }
    }

    #[test]
    fn matches_reference_on_random_instances() {
        // Smoke-scale version of the acceptance check.
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<[f64; 2]> = (0..120)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            for (eps, min_samples) in [(0.05, 3), (0.2, 5)] {
                let got = dbscan(&points, eps, min_samples);
                let expect = dbscan_reference(&points, eps, min_samples);
                assert_eq!(
                    partition_signature(&got.labels),
                    partition_signature(&expect),
                    "seed {seed}, eps {eps}, min {min_samples}"
                );
            }
        }
    }

    #[test]
    fn noise_points_have_low_density_and_no_core_reach() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<[f64; 2]> = (0..150)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let (eps, min_samples) = (0.1, 4);
        let got = dbscan(&points, eps, min_samples);
        let dist =
            |i: usize, j: usize| (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
        for i in 0..points.len() {
            if got.labels[i] != NOISE {
                continue;
            }
            let count = (0..points.len()).filter(|&j| dist(i, j) <= eps).count();
            assert!(count < min_samples);
            for j in 0..points.len() {
                let j_core =
                    (0..points.len()).filter(|&k| dist(j, k) <= eps).count() >= min_samples;
                assert!(!(j_core && dist(i, j) <= eps), "noise point {i} reached by core {j}");
            }
        }
    }

    #[test]
    fn relabeling_invariance_up_to_renumbering() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let points: Vec<[f64; 2]> = (0..80)
            .map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)])
            .collect();
        let mut permuted: Vec<(usize, [f64; 2])> = points.iter().copied().enumerate().collect();
        use rand::seq::SliceRandom;
        permuted.shuffle(&mut rng);
        let shuffled: Vec<[f64; 2]> = permuted.iter().map(|&(_, p)| p).collect();

        let a = dbscan(&points, 0.12, 4);
        let b = dbscan(&shuffled, 0.12, 4);
        // Map shuffled labels back to original indexing and compare
        // partitions (cluster numbers may differ).
        let mut b_in_original = vec![0i32; points.len()];
        for (pos, &(orig, _)) in permuted.iter().enumerate() {
            b_in_original[orig] = b.labels[pos];
        }
        assert_eq!(
            partition_signature(&a.labels),
            partition_signature(&b_in_original)
        );
    }

    #[test]
    fn k_distance_collinear_examples() {
        let points = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert_eq!(k_distance(&points, 1).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(k_distance(&points, 2).unwrap(), vec![1.0, 2.0, 2.0]);
        assert_eq!(k_distance(&points, 1).unwrap().len(), points.len());
        assert!(k_distance(&points, 3).is_err());
    }

    #[test]
    fn knee_on_hockey_stick_curve() {
        // 90 values at 0.01 then a ramp 0.5, 1.0, ..., 5.0. The chord
        // argmax lands at index 89 (frozen from the analytic computation),
        // i.e. right at the flat/ramp transition.
        let mut curve = vec![0.01; 90];
        curve.extend((1..=10).map(|k| 0.5 * k as f64));
        let knee = knee_point(&curve);
        assert_eq!(knee.index, 89);
        assert!((knee.value - 0.01).abs() < 1e-12);
        assert!((knee.prominence - 0.6356818537939669).abs() < 1e-9);
        assert_eq!(suggest_eps(&curve), 0.01);
    }

    #[test]
    fn knee_on_constant_curve_returns_first_value() {
        let curve = vec![0.7; 10];
        let knee = knee_point(&curve);
        assert_eq!(knee.index, 0);
        assert_eq!(knee.value, 0.7);
        assert!(knee.prominence < 1e-12);
    }

    #[test]
    fn knee_on_linear_ramp_has_no_prominence() {
        let curve: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let knee = knee_point(&curve);
        assert!(knee.prominence < 1e-6, "prominence {}", knee.prominence);
    }

    #[test]
    fn labels_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels = ClusterLabels {
            labels: vec![0, 1, NOISE],
            eps: 0.05,
            min_samples: 5,
        };
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        write_labels_csv(&path, &ids, &labels).unwrap();
        let rows = read_labels_csv(&path).unwrap();
        assert_eq!(
            rows,
            vec![
                ("a".to_string(), 0),
                ("b".to_string(), 1),
                ("c".to_string(), -1)
            ]
        );
    }
}
