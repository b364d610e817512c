//! Lloyd's k-means with k-means++ seeding.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 300,
            n_restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `k × d`, one center per row.
    pub centers: DMatrix<f64>,
    /// Within-cluster sum of squares of the returned solution.
    pub wcss: f64,
    /// WCSS after every assignment step of the returned restart.
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
}

/// Clusters the rows of `points` into `k` groups; best of `n_restarts` by WCSS.
pub fn kmeans(points: &DMatrix<f64>, k: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidK {
            k,
            reason: format!("k-means needs 1 <= k <= {n} points"),
        });
    }
    if opts.n_restarts == 0 || opts.max_iter == 0 {
        return Err(Error::invalid("k-means needs n_restarts >= 1 and max_iter >= 1"));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input contains non-finite values"));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..opts.n_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        let run = lloyd(points, seeding(points, k, &mut rng), opts.max_iter);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|j| (points[(i, j)] - centers[(c, j)]).powi(2))
        .sum()
}

/// k-means++: first center uniform, then proportional to squared distance.
fn seeding(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (n, d) = points.shape();
    let mut centers = DMatrix::zeros(k, d);
    let first = rng.random_range(0..n);
    centers.set_row(0, &points.row(first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(c, &points.row(pick));
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(points, i, &centers, c));
        }
    }
    centers
}

fn assign(points: &DMatrix<f64>, centers: &DMatrix<f64>, labels: &mut [usize]) -> (f64, bool) {
    let mut wcss = 0.0;
    let mut changed = false;
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for c in 0..centers.nrows() {
            let d = sq_dist(points, i, centers, c);
            if d < best.0 {
                best = (d, c);
            }
        }
        if *label != best.1 {
            *label = best.1;
            changed = true;
        }
        wcss += best.0;
    }
    (wcss, changed)
}

fn lloyd(points: &DMatrix<f64>, mut centers: DMatrix<f64>, max_iter: usize) -> KMeansResult {
    let (n, d) = points.shape();
    let k = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let (wcss, changed) = assign(points, &centers, &mut labels);
        trace.push(wcss);
        iterations += 1;
        if !changed || iterations >= max_iter {
            return KMeansResult {
                labels,
                centers,
                wcss,
                wcss_trace: trace,
                iterations,
            };
        }
        // Mean update; an emptied cluster keeps its previous center.
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut sizes = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sizes[l] += 1;
            for j in 0..d {
                sums[(l, j)] += points[(i, j)];
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                for j in 0..d {
                    centers[(c, j)] = sums[(c, j)] / sizes[c] as f64;
                }
            }
        }
    }
}

/// Index of the row of `centers` nearest to `point` (lowest index on ties).
pub fn nearest_center(point: &[f64], centers: &DMatrix<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for c in 0..centers.nrows() {
        let d: f64 = point
            .iter()
            .enumerate()
            .map(|(j, x)| (x - centers[(c, j)]).powi(2))
            .sum();
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_when_n_equals_k() {
        let p = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 5.0, 0.0, 0.0, 5.0]);
        let r = kmeans(&p, 3, &KMeansOptions::default()).unwrap();
        assert_eq!(r.wcss, 0.0);
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn separated_blobs() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let jitter = (i as f64) * 0.01;
            rows.extend_from_slice(&[jitter, -jitter]);
        }
        for i in 0..20 {
            let jitter = (i as f64) * 0.01;
            rows.extend_from_slice(&[100.0 + jitter, 100.0]);
        }
        let p = DMatrix::from_row_slice(40, 2, &rows);
        let r = kmeans(&p, 2, &KMeansOptions::default()).unwrap();
        assert!(r.labels[..20].iter().all(|&l| l == r.labels[0]));
        assert!(r.labels[20..].iter().all(|&l| l == r.labels[20]));
        assert_ne!(r.labels[0], r.labels[20]);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let p = DMatrix::zeros(2, 2);
        assert!(kmeans(&p, 3, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn identical_points() {
        let p = DMatrix::from_element(5, 2, 1.0);
        let r = kmeans(&p, 2, &KMeansOptions::default()).unwrap();
        assert_eq!(r.wcss, 0.0);
    }

    #[test]
    fn deterministic() {
        let p = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let opts = KMeansOptions {
            seed: 4,
            ..KMeansOptions::default()
        };
        assert_eq!(kmeans(&p, 4, &opts).unwrap(), kmeans(&p, 4, &opts).unwrap());
    }
}
