//! Brute-force reference implementations used as test oracles. Nothing here
//! calls into the library's clustering or scoring code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

/// Davies-Bouldin index straight from its definition.
pub fn oracle_dbi(points: &[Vec<f64>], labels: &[i64]) -> f64 {
    let mut ids: Vec<i64> = labels.to_vec();
    ids.sort();
    ids.dedup();
    let dims = points[0].len();
    let mut centroids = Vec::new();
    let mut scatters = Vec::new();
    for id in &ids {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, l)| *l == id)
            .map(|(p, _)| p)
            .collect();
        let mut c = vec![0.0; dims];
        for p in &members {
            for d in 0..dims {
                c[d] += p[d];
            }
        }
        for v in c.iter_mut() {
            *v /= members.len() as f64;
        }
        let s = members.iter().map(|p| dist(p, &c)).sum::<f64>() / members.len() as f64;
        centroids.push(c);
        scatters.push(s);
    }
    let k = ids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i != j {
                let r = (scatters[i] + scatters[j]) / dist(&centroids[i], &centroids[j]);
                if r > worst {
                    worst = r;
                }
            }
        }
        total += worst;
    }
    total / k as f64
}

/// DBSCAN as connected components of the core-proximity graph, with each
/// border point attached to the component holding the lowest-indexed core
/// among its discoverers. Returns labels numbered by each component's lowest
/// core index.
pub fn oracle_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i64> {
    let n = points.len();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| dist(&points[i], &points[j]) < eps).collect())
        .collect();
    let core: Vec<bool> = (0..n)
        .map(|i| adj[i].iter().filter(|b| **b).count() >= min_pts)
        .collect();

    // Union-find over cores.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && adj[i][j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // Component key: its lowest core index.
    let mut comp_min = vec![usize::MAX; n];
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            comp_min[r] = comp_min[r].min(i);
        }
    }
    let mut key = vec![usize::MAX; n];
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            key[i] = comp_min[r];
        } else {
            for j in 0..n {
                if core[j] && adj[i][j] {
                    let r = find(&mut parent, j);
                    key[i] = key[i].min(comp_min[r]);
                }
            }
        }
    }
    let mut keys: Vec<usize> = key.iter().copied().filter(|k| *k != usize::MAX).collect();
    keys.sort();
    keys.dedup();
    key.iter()
        .map(|k| {
            if *k == usize::MAX {
                -1
            } else {
                keys.binary_search(k).unwrap() as i64
            }
        })
        .collect()
}

/// Canonical form of a partition: clusters as sorted index sets, sorted, and
/// the noise set.
pub fn canonical(labels: &[i64]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut clusters: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    let mut noise = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if *l < 0 {
            noise.push(i);
        } else {
            clusters.entry(*l).or_default().push(i);
        }
    }
    let mut sets: Vec<Vec<usize>> = clusters.into_values().collect();
    sets.sort();
    (sets, noise)
}

/// Points drawn around a few random centres, rounded to a coarse grid so
/// ties and duplicates occur.
pub fn blobs(
    rng: &mut ChaCha8Rng,
    n: usize,
    dims: usize,
    centres: usize,
    spread: f64,
) -> Vec<Vec<f64>> {
    let cs: Vec<Vec<f64>> = (0..centres)
        .map(|_| (0..dims).map(|_| rng.random_range(-20.0..20.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            let c = &cs[rng.random_range(0..centres)];
            c.iter()
                .map(|v| ((v + rng.random_range(-spread..spread)) * 4.0).round() / 4.0)
                .collect()
        })
        .collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, dims: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dims).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}
