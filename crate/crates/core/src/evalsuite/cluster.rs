use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Points with a cluster label each; `p` is the norm order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub embeddings: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub p: f64,
}

impl ClusterSet {
    pub fn new(embeddings: Vec<Vec<f64>>, labels: Vec<String>) -> Self {
        Self {
            embeddings,
            labels,
            p: 2.0,
        }
    }
}

fn p_norm(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Davies-Bouldin index. Lower is better. Clusters are visited in label
/// order; a one-member cluster has zero scatter.
pub fn davies_bouldin(set: &ClusterSet) -> Result<f64> {
    if set.embeddings.len() != set.labels.len() {
        return Err(Error::DimMismatch {
            expected: set.embeddings.len(),
            actual: set.labels.len(),
        });
    }
    if set.p.is_nan() || set.p < 1.0 {
        return Err(Error::InvalidArgument(format!("norm order {} < 1", set.p)));
    }
    let dim = set.embeddings.first().map_or(0, Vec::len);
    if set.embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::InvalidArgument("embeddings differ in dimension".into()));
    }
    let mut members: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
    for (e, l) in set.embeddings.iter().zip(&set.labels) {
        members.entry(l.as_str()).or_default().push(e);
    }
    if members.len() < 2 {
        return Err(Error::DegenerateClusters(format!(
            "need at least 2 clusters, got {}",
            members.len()
        )));
    }
    let centroids: Vec<Vec<f64>> = members
        .values()
        .map(|pts| {
            let mut c = vec![0.0; dim];
            for x in pts {
                for (ci, xi) in c.iter_mut().zip(*x) {
                    *ci += xi;
                }
            }
            c.iter_mut().for_each(|ci| *ci /= pts.len() as f64);
            c
        })
        .collect();
    let scatter: Vec<f64> = members
        .values()
        .zip(&centroids)
        .map(|(pts, c)| {
            let mean = pts.iter().map(|x| p_norm(x, c, set.p).powf(set.p)).sum::<f64>()
                / pts.len() as f64;
            mean.powf(1.0 / set.p)
        })
        .collect();
    let names: Vec<&str> = members.keys().copied().collect();
    let k = centroids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in (0..k).filter(|&j| j != i) {
            let d = p_norm(&centroids[i], &centroids[j], set.p);
            if d == 0.0 {
                return Err(Error::DegenerateClusters(format!(
                    "clusters {} and {} share a centroid",
                    names[i], names[j]
                )));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn set(points: &[(f64, &str)]) -> ClusterSet {
        ClusterSet::new(
            points.iter().map(|&(x, _)| vec![x]).collect(),
            points.iter().map(|&(_, l)| l.to_string()).collect(),
        )
    }

    #[test]
    fn one_dimensional_hand_example() {
        let q = davies_bouldin(&set(&[(0.0, "a"), (2.0, "a"), (4.0, "b"), (6.0, "b")])).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singletons_score_zero() {
        assert_eq!(davies_bouldin(&set(&[(-3.0, "a"), (8.0, "b")])).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(davies_bouldin(&set(&[(1.0, "a"), (2.0, "a")])).is_err());
        assert!(davies_bouldin(&set(&[(1.0, "a")])).is_err());
        assert!(davies_bouldin(&set(&[(0.0, "a"), (2.0, "a"), (1.0, "b")])).is_err());
    }

    fn blobs(spread: f64, seed: u64) -> ClusterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)].iter().enumerate() {
            for _ in 0..50 {
                pts.push(vec![
                    centre.0 + spread * gaussian(&mut rng),
                    centre.1 + spread * gaussian(&mut rng),
                ]);
                labels.push(c.to_string());
            }
        }
        ClusterSet::new(pts, labels)
    }

    #[test]
    fn separated_beats_overlapping() {
        for seed in 0..10 {
            let tight = davies_bouldin(&blobs(0.5, seed)).unwrap();
            let loose = davies_bouldin(&blobs(3.0, seed)).unwrap();
            assert!(tight < loose, "{tight} vs {loose}");
        }
    }

    /// Straightforward reference: recompute everything per pair.
    fn reference(set: &ClusterSet) -> f64 {
        let mut labels: Vec<&String> = set.labels.iter().collect();
        labels.sort();
        labels.dedup();
        let centroid = |l: &String| {
            let pts: Vec<&Vec<f64>> =
                set.embeddings.iter().zip(&set.labels).filter(|(_, m)| *m == l).map(|(e, _)| e).collect();
            let d = pts[0].len();
            (0..d).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64).collect::<Vec<_>>()
        };
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scatter = |l: &String| {
            let c = centroid(l);
            let ds: Vec<f64> = set.embeddings.iter().zip(&set.labels).filter(|(_, m)| *m == l).map(|(e, _)| dist(e, &c).powi(2)).collect();
            (ds.iter().sum::<f64>() / ds.len() as f64).sqrt()
        };
        let mut q = 0.0;
        for a in &labels {
            let mut best = f64::MIN;
            for b in labels.iter().filter(|b| *b != a) {
                best = best.max((scatter(a) + scatter(b)) / dist(&centroid(a), &centroid(b)));
            }
            q += best;
        }
        q / labels.len() as f64
    }

    fn random_set() -> impl Strategy<Value = ClusterSet> {
        (2usize..5, 1usize..4).prop_flat_map(|(k, d)| {
            prop::collection::vec((prop::collection::vec(-10.0f64..10.0, d), 0..k), k + 1..30).prop_map(
                move |rows| {
                    // guarantee every label id in 0..k appears at least once
                    let mut emb = Vec::new();
                    let mut labels = Vec::new();
                    for (i, (e, l)) in rows.into_iter().enumerate() {
                        emb.push(e);
                        labels.push(if i < k { i } else { l }.to_string());
                    }
                    ClusterSet::new(emb, labels)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn matches_reference(s in random_set()) {
            let q = davies_bouldin(&s).unwrap();
            prop_assert!((q - reference(&s)).abs() < 1e-10);
        }

        #[test]
        fn translation_and_scale_invariant(s in random_set(), shift in -50.0f64..50.0, alpha in 0.01f64..100.0) {
            let q = davies_bouldin(&s).unwrap();
            let mut moved = s.clone();
            moved.embeddings.iter_mut().flatten().for_each(|x| *x += shift);
            let mut scaled = s.clone();
            scaled.embeddings.iter_mut().flatten().for_each(|x| *x *= alpha);
            prop_assert!((davies_bouldin(&moved).unwrap() - q).abs() < 1e-9 * q.max(1.0));
            prop_assert!((davies_bouldin(&scaled).unwrap() - q).abs() < 1e-9 * q.max(1.0));
        }
    }
}
