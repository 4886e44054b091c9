//! k-medoids (PAM, with the number of clusters chosen by average silhouette
//! width) and Ward agglomerative clustering, and their conversion into
//! middle levels of a hierarchy.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::distance::{dtw_matrix, euclidean_matrix, DistanceMatrix};
use crate::error::{Error, Result};
use crate::panel::Grouping;
use crate::represent::{build_representation, pca_reduce, RepresentationKind};

/// Share of variance the PCA projection must retain before Euclidean clustering.
pub const PCA_THRESHOLD: f64 = 0.8;

/// Largest number of clusters tried by [`select_k_by_asw`] in the pipeline.
pub const K_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Cluster of each point, in `1..=k`.
    pub labels: Vec<usize>,
    /// Medoid of each cluster, ascending.
    pub medoids: Vec<usize>,
    /// Average silhouette width.
    pub asw: f64,
    /// Total distance from points to their medoids.
    pub cost: f64,
    /// Total cost after BUILD and after every accepted swap.
    pub cost_history: Vec<f64>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }
}

/// Nearest medoid per point (ties to the earlier medoid) and the total cost.
fn assign(d: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let labels = (0..d.m())
        .map(|j| {
            let (mut best, mut at) = (f64::INFINITY, 0);
            for (c, &med) in medoids.iter().enumerate() {
                let v = d.get(j, med);
                if v < best {
                    best = v;
                    at = c;
                }
            }
            cost += best;
            at
        })
        .collect();
    (labels, cost)
}

fn total_cost(d: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..d.m())
        .map(|j| medoids.iter().map(|&c| d.get(j, c)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Partitioning around medoids: greedy BUILD, then best-improvement SWAP
/// until no swap lowers the total cost. Ties go to the lowest index.
pub fn pam(d: &DistanceMatrix, k: usize) -> Result<Partition> {
    let m = d.m();
    if k < 2 || k + 1 > m {
        return Err(Error::Argument(format!("k = {k} outside 2..={}", m.saturating_sub(1))));
    }
    // BUILD
    let mut medoids = Vec::with_capacity(k);
    let first = (0..m)
        .map(|i| (i, (0..m).map(|j| d.get(i, j)).sum::<f64>()))
        .fold((0, f64::INFINITY), |best, (i, s)| if s < best.1 { (i, s) } else { best });
    medoids.push(first.0);
    let mut nearest: Vec<f64> = (0..m).map(|j| d.get(j, first.0)).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for c in (0..m).filter(|c| !medoids.contains(c)) {
            let gain: f64 = (0..m).map(|j| (nearest[j] - d.get(j, c)).max(0.0)).sum();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        medoids.push(best.0);
        for (j, n) in nearest.iter_mut().enumerate() {
            *n = n.min(d.get(j, best.0));
        }
    }

    // SWAP
    let mut cost = total_cost(d, &medoids);
    let mut history = vec![cost];
    let scale = 1e-12 * (1.0 + cost.abs());
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for pos in 0..k {
            for h in (0..m).filter(|h| !medoids.contains(h)) {
                let mut trial = medoids.clone();
                trial[pos] = h;
                let c = total_cost(d, &trial);
                if best.is_none_or(|(_, _, b)| c < b) {
                    best = Some((pos, h, c));
                }
            }
        }
        match best {
            Some((pos, h, c)) if c < cost - scale => {
                medoids[pos] = h;
                cost = c;
                history.push(cost);
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let (labels, cost) = assign(d, &medoids);
    let labels: Vec<usize> = labels.into_iter().map(|l| l + 1).collect();
    let asw = silhouette(d, &labels, k);
    Ok(Partition {
        labels,
        medoids,
        asw,
        cost,
        cost_history: history,
    })
}

/// Average silhouette width of a labelling in `1..=k`; singletons score 0.
pub fn silhouette(d: &DistanceMatrix, labels: &[usize], k: usize) -> f64 {
    let m = d.m();
    let mut sizes = vec![0usize; k + 1];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    for i in 0..m {
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k + 1];
        for j in 0..m {
            if j != i {
                sums[labels[j]] += d.get(i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (1..=k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 && b.is_finite() {
            total += (b - a) / denom;
        }
    }
    total / m as f64
}

/// Run [`pam`] for `k = 2..=k_max` and keep the partition with the largest
/// average silhouette width (ties to the smaller `k`).
pub fn select_k_by_asw(d: &DistanceMatrix, k_max: usize) -> Result<Partition> {
    let m = d.m();
    if k_max < 2 || k_max + 1 > m {
        return Err(Error::Argument(format!(
            "k_max = {k_max} outside 2..={}",
            m.saturating_sub(1)
        )));
    }
    let mut best: Option<Partition> = None;
    for k in 2..=k_max {
        let p = pam(d, k)?;
        if best.as_ref().is_none_or(|b| p.asw > b.asw + 1e-12) {
            best = Some(p);
        }
    }
    Ok(best.expect("k range is non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Merge {
    /// Node ids: leaves are `0..m`, the merge at step `s` creates node `m + s`.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Binary agglomeration tree with `2m - 1` nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MergeTree {
    pub m: usize,
    pub merges: Vec<Merge>,
}

impl MergeTree {
    pub fn n_nodes(&self) -> usize {
        self.m + self.merges.len()
    }

    /// Leaf membership of every internal node, in merge order.
    pub fn internal_members(&self) -> Vec<Vec<bool>> {
        let mut members: Vec<Vec<bool>> = (0..self.m)
            .map(|i| {
                let mut r = vec![false; self.m];
                r[i] = true;
                r
            })
            .collect();
        for mg in &self.merges {
            let row = members[mg.left]
                .iter()
                .zip(&members[mg.right])
                .map(|(a, b)| *a || *b)
                .collect();
            members.push(row);
        }
        members.split_off(self.m)
    }
}

/// Ward agglomeration via the Lance-Williams recurrence on squared distances:
///
/// `d2(i+j, k) = [(n_i+n_k) d2(i,k) + (n_j+n_k) d2(j,k) - n_k d2(i,j)] / (n_i+n_j+n_k)`.
///
/// Merge heights are square roots of the merged pair's `d2`; ties go to the
/// lexicographically smallest pair of active slots.
pub fn ward_tree(d: &DistanceMatrix) -> Result<MergeTree> {
    let m = d.m();
    if m < 2 {
        return Err(Error::Argument("Ward clustering needs at least two points".into()));
    }
    let mut d2: DMatrix<f64> = d.matrix().map(|v| v * v);
    let mut active: Vec<bool> = vec![true; m];
    let mut node: Vec<usize> = (0..m).collect();
    let mut size: Vec<usize> = vec![1; m];
    let mut merges = Vec::with_capacity(m - 1);
    for step in 0..m - 1 {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..m {
            if !active[i] {
                continue;
            }
            for j in i + 1..m {
                if active[j] && d2[(i, j)] < best.2 {
                    best = (i, j, d2[(i, j)]);
                }
            }
        }
        let (i, j, dij) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..m {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((ni + nk) * d2[(i, k)] + (nj + nk) * d2[(j, k)] - nk * dij) / (ni + nj + nk);
            d2[(i, k)] = v;
            d2[(k, i)] = v;
        }
        merges.push(Merge {
            left: node[i].min(node[j]),
            right: node[i].max(node[j]),
            height: dij.max(0.0).sqrt(),
            size: size[i] + size[j],
        });
        active[j] = false;
        size[i] += size[j];
        node[i] = m + step;
    }
    Ok(MergeTree { m, merges })
}

/// One middle series per cluster; singleton and all-series clusters dropped.
pub fn grouping_from_partition(p: &Partition) -> Grouping {
    let m = p.labels.len();
    let k = p.labels.iter().copied().max().unwrap_or(0);
    let rows = (1..=k).map(|c| p.labels.iter().map(|&l| l == c).collect::<Vec<bool>>());
    Grouping::from_rows_pruned(m, rows)
}

/// One middle series per internal node except the root.
pub fn grouping_from_tree(t: &MergeTree) -> Grouping {
    Grouping::from_rows_pruned(t.m, t.internal_members())
}

/// Union of the rows of several groupings, without repeats.
pub fn grouped_hierarchy(groupings: &[Grouping]) -> Result<Grouping> {
    let Some(first) = groupings.first() else {
        return Err(Error::Argument("grouped hierarchy needs at least one grouping".into()));
    };
    let m = first.m();
    if let Some(g) = groupings.iter().find(|g| g.m() != m) {
        return Err(Error::Argument(format!(
            "groupings cover different bottom sets ({m} vs {})",
            g.m()
        )));
    }
    Ok(Grouping::from_rows_pruned(
        m,
        groupings.iter().flat_map(|g| g.rows().iter().cloned()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum DistanceKind {
    Euclidean,
    Dtw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Algorithm {
    Medoids,
    Hierarchical,
}

/// One of the twelve clustering approaches, e.g. `TSF-EUC-HC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClusterMethod {
    pub representation: RepresentationKind,
    pub distance: DistanceKind,
    pub algorithm: Algorithm,
}

impl ClusterMethod {
    pub const fn new(representation: RepresentationKind, distance: DistanceKind, algorithm: Algorithm) -> Self {
        ClusterMethod {
            representation,
            distance,
            algorithm,
        }
    }

    /// All twelve approaches in their conventional order.
    pub fn all() -> Vec<ClusterMethod> {
        use Algorithm::*;
        use DistanceKind::*;
        use RepresentationKind::*;
        let mut out = Vec::with_capacity(12);
        for alg in [Medoids, Hierarchical] {
            for rep in [Raw, Residual, RawFeatures, ResidualFeatures] {
                out.push(ClusterMethod::new(rep, Euclidean, alg));
            }
        }
        for rep in [Raw, Residual] {
            for alg in [Medoids, Hierarchical] {
                out.push(ClusterMethod::new(rep, Dtw, alg));
            }
        }
        out
    }

    pub fn name(&self) -> String {
        let dist = match self.distance {
            DistanceKind::Euclidean => "EUC",
            DistanceKind::Dtw => "DTW",
        };
        let alg = match self.algorithm {
            Algorithm::Medoids => "ME",
            Algorithm::Hierarchical => "HC",
        };
        format!("{}-{dist}-{alg}", self.representation.code())
    }

    /// Cluster the bottom series of a training window into a grouping.
    pub fn grouping(&self, bottom: &DMatrix<f64>, residuals: &DMatrix<f64>, s: usize) -> Result<Grouping> {
        let m = bottom.ncols();
        let rep = build_representation(self.representation, bottom, residuals, s)?;
        let d = match self.distance {
            DistanceKind::Euclidean => euclidean_matrix(&pca_reduce(&rep.data, PCA_THRESHOLD)?.scores),
            DistanceKind::Dtw => dtw_matrix(&rep.data)?,
        };
        match self.algorithm {
            Algorithm::Medoids if m < 3 => Ok(Grouping::two_level(m)),
            Algorithm::Medoids => Ok(grouping_from_partition(&select_k_by_asw(&d, K_MAX.min(m - 1))?)),
            Algorithm::Hierarchical => Ok(grouping_from_tree(&ward_tree(&d)?)),
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClusterMethod::all()
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown clustering approach '{s}'")))
    }
}

impl serde::Serialize for ClusterMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points_1d(x: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_pairs(x.len(), |i, j| (x[i] - x[j]).abs())
    }

    /// Best total cost over every medoid set of size k.
    fn best_cost_exhaustive(d: &DistanceMatrix, k: usize) -> f64 {
        fn rec(d: &DistanceMatrix, k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
            if chosen.len() == k {
                *best = best.min(total_cost(d, chosen));
                return;
            }
            for c in start..d.m() {
                chosen.push(c);
                rec(d, k, c + 1, chosen, best);
                chosen.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(d, k, 0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn pam_separates_two_pairs() {
        let d = points_1d(&[0.0, 0.1, 10.0, 10.1]);
        let p = pam(&d, 2).unwrap();
        assert_eq!(p.labels[0], p.labels[1]);
        assert_eq!(p.labels[2], p.labels[3]);
        assert_ne!(p.labels[0], p.labels[2]);
        assert!((p.cost - best_cost_exhaustive(&d, 2)).abs() < 1e-12);
    }

    #[test]
    fn pam_three_points() {
        let d = points_1d(&[0.0, 1.0, 2.0]);
        assert_eq!(pam(&d, 1).unwrap_err().kind(), "ArgumentError");
        assert_eq!(pam(&d, 3).unwrap_err().kind(), "ArgumentError");
        let p = pam(&d, 2).unwrap();
        assert_eq!(p.cost, 1.0);
        assert_eq!(best_cost_exhaustive(&d, 2), 1.0);
    }

    #[test]
    fn pam_duplicates_cost_zero() {
        let d = points_1d(&[3.0; 5]);
        for k in 2..5 {
            assert_eq!(pam(&d, k).unwrap().cost, 0.0);
        }
    }

    #[test]
    fn pam_matches_exhaustive_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..10.0)).collect();
            let d = points_1d(&x);
            let p = pam(&d, 3).unwrap();
            let oracle = best_cost_exhaustive(&d, 3);
            // local search: allow a modest gap to the global optimum
            assert!(p.cost <= oracle * 1.25 + 1e-12);
            assert!(p.cost_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn asw_picks_two_tight_groups() {
        let d = points_1d(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        let p = select_k_by_asw(&d, 5).unwrap();
        assert_eq!(p.k(), 2);
        assert!(p.asw >= 0.9);
        // direct silhouette of the known split
        let labels = [1, 1, 1, 2, 2, 2];
        assert!((silhouette(&d, &labels, 2) - p.asw).abs() < 1e-12);
    }

    #[test]
    fn singleton_silhouette_is_zero() {
        let d = points_1d(&[0.0, 1.0, 5.0]);
        // point 2 alone: contributes 0; points 0,1: a=1, b=5 and 4
        let s = silhouette(&d, &[1, 1, 2], 2);
        let expect = ((5.0 - 1.0) / 5.0 + (4.0 - 1.0) / 4.0) / 3.0;
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn equidistant_points_choose_smallest_k() {
        let d = DistanceMatrix::from_pairs(4, |_, _| 1.0);
        let p = select_k_by_asw(&d, 3).unwrap();
        assert_eq!(p.k(), 2);
    }

    #[test]
    fn ward_small_examples() {
        let t = ward_tree(&points_1d(&[0.0, 1.0, 10.0])).unwrap();
        assert_eq!(t.n_nodes(), 5);
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
        assert_eq!(t.merges[0].height, 1.0);
        // d2({0,1},2) = (2*100 + 2*81 - 1)/3 = 361/3
        assert!((t.merges[1].height - (361.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let g = grouping_from_tree(&t);
        assert_eq!(g.rows(), &[vec![true, true, false]]);

        let t2 = ward_tree(&points_1d(&[0.0, 1.0])).unwrap();
        assert_eq!(t2.merges.len(), 1);
        assert_eq!(grouping_from_tree(&t2).k(), 0);
    }

    #[test]
    fn ward_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [5usize, 17, 98] {
            let x = DMatrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0));
            let t = ward_tree(&euclidean_matrix(&x)).unwrap();
            assert_eq!(t.n_nodes(), 2 * m - 1);
            assert!(t.merges.windows(2).all(|w| w[1].height >= w[0].height - 1e-12));
            assert_eq!(t.merges.last().unwrap().size, m);
            let g = grouping_from_tree(&t);
            assert_eq!(g.k(), m - 2);
            assert!(g.row_sums().iter().all(|&s| s > 1 && s < m));
        }
    }

    #[test]
    fn partition_to_grouping() {
        let p = Partition {
            labels: vec![1, 1, 2, 2, 2],
            medoids: vec![0, 2],
            asw: 0.0,
            cost: 0.0,
            cost_history: vec![],
        };
        let g = grouping_from_partition(&p);
        assert_eq!(
            g.rows(),
            &[vec![true, true, false, false, false], vec![false, false, true, true, true]]
        );
        let single = Partition { labels: vec![1, 1, 1, 1, 2], ..p.clone() };
        assert_eq!(grouping_from_partition(&single).k(), 1);
        let all = Partition { labels: vec![1; 5], ..p };
        assert_eq!(grouping_from_partition(&all).k(), 0);
    }

    #[test]
    fn grouped_union() {
        let a = Grouping::from_members(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        let b = Grouping::from_members(4, &[vec![0, 2], vec![1, 3]]).unwrap();
        assert_eq!(grouped_hierarchy(&[a.clone(), a.clone()]).unwrap().rows(), a.rows());
        assert_eq!(grouped_hierarchy(&[a.clone(), b]).unwrap().k(), 4);
        let c = Grouping::two_level(5);
        assert_eq!(grouped_hierarchy(&[a, c]).unwrap_err().kind(), "ArgumentError");
    }

    #[test]
    fn method_names_round_trip() {
        let all = ClusterMethod::all();
        assert_eq!(all.len(), 12);
        let names: Vec<String> = all.iter().map(|c| c.name()).collect();
        assert_eq!(names[0], "TS-EUC-ME");
        assert_eq!(names[7], "ERF-EUC-HC");
        assert_eq!(names[9], "TS-DTW-HC");
        for n in &names {
            assert_eq!(&n.parse::<ClusterMethod>().unwrap().name(), n);
        }
        assert_eq!("TSF-DTW-ME".parse::<ClusterMethod>().unwrap_err().kind(), "ConfigError");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn asw_in_range(seed in 0u64..10_000, m in 3usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..m * m).map(|_| rng.random_range(0.0..1.0)).collect();
            let d = DistanceMatrix::from_pairs(m, |i, j| raw[i * m + j]);
            let p = select_k_by_asw(&d, (m - 1).min(6)).unwrap();
            proptest::prop_assert!((-1.0..=1.0).contains(&p.asw));
            proptest::prop_assert!(p.cost_history.windows(2).all(|w| w[1] <= w[0]));
            let full = pam(&d, m - 1).unwrap();
            proptest::prop_assert!(full.asw.is_finite());
        }
    }
}
