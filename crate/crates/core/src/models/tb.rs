//! Tuberculosis transmission: a birth, death and mutation process on
//! genotype clusters, summarised by the number of distinct genotypes and the
//! gene diversity of a sample.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use super::{Model, Output};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const TB_TARGET_POPULATION: u64 = 10_000;

/// Observed cluster table as `(cluster size, number of clusters)`.
pub const TB_OBSERVED_CLUSTERS: &[(u64, u64)] = &[
    (30, 1),
    (23, 1),
    (15, 1),
    (10, 1),
    (8, 1),
    (5, 2),
    (4, 4),
    (3, 13),
    (2, 20),
    (1, 282),
];

/// Fenwick tree of non-negative weights over positions `1..=len`.
#[derive(Clone, Debug)]
struct SizeIndex {
    tree: Vec<u64>,
}

impl SizeIndex {
    fn new(max_size: usize) -> Self {
        Self {
            tree: vec![0; max_size + 1],
        }
    }

    fn add(&mut self, size: usize, delta: i64) {
        let mut i = size;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta) as u64;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest position whose cumulative weight exceeds `target`.
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos + 1
    }
}

/// Multiset of cluster sizes, stored as a count per size.
#[derive(Clone, Debug)]
pub struct TbState {
    counts: Vec<u64>,
    population: u64,
    index: SizeIndex,
}

impl TbState {
    /// One bacterium of one genotype, with room for clusters up to `max_size`.
    pub fn founder(max_size: usize) -> Self {
        let mut s = Self {
            counts: vec![0; max_size + 2],
            population: 0,
            index: SizeIndex::new(max_size + 1),
        };
        s.insert(1);
        s
    }

    /// Builds a state from explicit cluster sizes.
    pub fn from_sizes(sizes: &[u64]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "cluster sizes must be positive".into(),
            ));
        }
        let max = sizes.iter().copied().max().unwrap_or(1) as usize;
        let mut s = Self {
            counts: vec![0; max + 2],
            population: 0,
            index: SizeIndex::new(max + 1),
        };
        for &size in sizes {
            s.insert(size as usize);
        }
        Ok(s)
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn cluster_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Cluster sizes in decreasing order.
    pub fn cluster_sizes(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for (size, &c) in self.counts.iter().enumerate().rev() {
            out.extend(std::iter::repeat_n(size as u64, c as usize));
        }
        out
    }

    fn insert(&mut self, size: usize) {
        self.counts[size] += 1;
        self.population += size as u64;
        self.index.add(size, size as i64);
    }

    fn remove(&mut self, size: usize) {
        self.counts[size] -= 1;
        self.population -= size as u64;
        self.index.add(size, -(size as i64));
    }

    /// Size of the cluster holding a uniformly chosen bacterium.
    fn pick_size(&self, rng: &mut RngStream) -> usize {
        let r = rng.random_range(0..self.population);
        self.index.find(r)
    }

    fn birth(&mut self, size: usize) {
        self.remove(size);
        self.insert(size + 1);
    }

    fn death(&mut self, size: usize) {
        self.remove(size);
        if size > 1 {
            self.insert(size - 1);
        }
    }

    fn mutation(&mut self, size: usize) {
        if size > 1 {
            self.remove(size);
            self.insert(size - 1);
            self.insert(1);
        }
    }
}

/// Runs the process from a single bacterium until the population reaches
/// `target_pop`, restarting after extinction with the stream continuing.
pub fn tb_simulate(a: f64, d: f64, target_pop: u64, rng: &mut RngStream) -> Result<TbState> {
    if !(a > 0.0 && d >= 0.0 && a + d <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "event probabilities out of range: a={a}, d={d}"
        )));
    }
    if target_pop == 0 {
        return Err(Error::InvalidArgument(
            "target population must be positive".into(),
        ));
    }
    let cap = target_pop as usize;
    let mut state = TbState::founder(cap);
    while state.population < target_pop {
        let size = state.pick_size(rng);
        let e: f64 = rng.random();
        if e < a {
            state.birth(size);
        } else if e < a + d {
            state.death(size);
            if state.population == 0 {
                state = TbState::founder(cap);
            }
        } else {
            state.mutation(size);
        }
    }
    Ok(state)
}

/// Samples `sample_size` bacteria without replacement and returns the number
/// of distinct genotypes and the gene diversity of the sample.
///
/// Draws are made one at a time from a Fenwick tree over clusters weighted by
/// their unsampled bacteria, so the per-cluster counts follow the
/// multivariate hypergeometric law.
pub fn tb_stats(state: &TbState, sample_size: u64, rng: &mut RngStream) -> Result<(u64, f64)> {
    if sample_size == 0 || sample_size > state.population {
        return Err(Error::InvalidArgument(format!(
            "sample size {sample_size} not in 1..={}",
            state.population
        )));
    }
    let sizes = state.cluster_sizes();
    let mut tree = SizeIndex::new(sizes.len());
    for (i, &s) in sizes.iter().enumerate() {
        tree.add(i + 1, s as i64);
    }
    let mut taken = vec![0u64; sizes.len()];
    let mut remaining = state.population;
    for _ in 0..sample_size {
        let c = tree.find(rng.random_range(0..remaining));
        tree.add(c, -1);
        taken[c - 1] += 1;
        remaining -= 1;
    }
    let distinct = taken.iter().filter(|&&t| t > 0).count() as u64;
    let sum_sq: u64 = taken.iter().map(|t| t * t).sum();
    let n = sample_size as f64;
    Ok((distinct, 1.0 - sum_sq as f64 / (n * n)))
}

/// Observed summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TbData {
    pub sample_size: u64,
    pub distinct: u64,
    pub diversity: f64,
}

impl TbData {
    pub fn from_clusters(table: &[(u64, u64)]) -> Result<Self> {
        let mut n = 0u64;
        let mut g = 0u64;
        let mut sq = 0u64;
        for &(size, count) in table {
            if size == 0 {
                return Err(Error::InvalidArgument(
                    "cluster size must be positive".into(),
                ));
            }
            n += size * count;
            g += count;
            sq += size * size * count;
        }
        if n == 0 {
            return Err(Error::Empty("cluster table"));
        }
        Ok(Self {
            sample_size: n,
            distinct: g,
            diversity: 1.0 - sq as f64 / (n * n) as f64,
        })
    }

    pub fn observed() -> Self {
        Self::from_clusters(TB_OBSERVED_CLUSTERS).expect("constant table is valid")
    }

    /// Reads a `cluster_size,count` CSV.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            cluster_size: u64,
            count: u64,
        }
        let mut rdr = csv::Reader::from_reader(input);
        let mut table = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            table.push((row.cluster_size, row.count));
        }
        Self::from_clusters(&table)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    /// Distance of simulated statistics to the observed ones.
    pub fn distance(&self, distinct: u64, diversity: f64) -> f64 {
        (distinct as f64 - self.distinct as f64).abs() / self.sample_size as f64
            + (diversity - self.diversity).abs()
    }
}

/// Parameters `(a, d)` are the birth and death probabilities; mutation takes
/// the remainder.
#[derive(Clone, Debug)]
pub struct TbModel {
    pub data: TbData,
    pub target_pop: u64,
}

pub fn tb_model() -> TbModel {
    TbModel {
        data: TbData::observed(),
        target_pop: TB_TARGET_POPULATION,
    }
}

impl TbModel {
    pub fn with_data(data: TbData) -> Self {
        Self {
            data,
            target_pop: TB_TARGET_POPULATION,
        }
    }

    fn inside(theta: &[f64]) -> bool {
        let (a, d) = (theta[0], theta[1]);
        d >= 0.0 && a > d && a + d <= 1.0
    }
}

impl Model for TbModel {
    fn name(&self) -> &str {
        "tuberculosis"
    }

    fn dim(&self) -> usize {
        2
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        loop {
            let theta = vec![rng.random::<f64>(), rng.random::<f64>()];
            if Self::inside(&theta) {
                return theta;
            }
        }
    }

    fn prior_potential(&self, theta: &[f64]) -> f64 {
        // The support is a triangle of area 1/4.
        if Self::inside(theta) {
            -(4.0f64).ln()
        } else {
            f64::INFINITY
        }
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Output {
        let dist = tb_simulate(theta[0], theta[1], self.target_pop, rng)
            .and_then(|s| tb_stats(&s, self.data.sample_size, rng))
            .map(|(g, h)| self.data.distance(g, h));
        Output::Distance(dist.unwrap_or(f64::INFINITY))
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn alpha(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn observed_statistics() {
        let d = TbData::observed();
        assert_eq!(d.sample_size, 473);
        assert_eq!(d.distinct, 326);
        assert_relative_eq!(d.diversity, 1.0 - 2411.0 / (473.0 * 473.0), epsilon = 1e-15);
        assert_relative_eq!(d.diversity, 0.98922, epsilon = 1e-5);
        assert_relative_eq!(
            d.distance(326 + 3, d.diversity),
            3.0 / 473.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn csv_table_matches_constant() {
        let text = "cluster_size,count\n30,1\n23,1\n15,1\n10,1\n8,1\n5,2\n4,4\n3,13\n2,20\n1,282\n";
        assert_eq!(
            TbData::from_csv(text.as_bytes()).unwrap(),
            TbData::observed()
        );
    }

    #[test]
    fn pure_birth_gives_one_cluster() {
        let mut rng = RngStream::new(3, 0);
        let s = tb_simulate(1.0, 0.0, 500, &mut rng).unwrap();
        assert_eq!(s.cluster_sizes(), vec![500]);
        let (g, h) = tb_stats(&s, 100, &mut rng).unwrap();
        assert_eq!((g, h), (1, 0.0));
    }

    #[test]
    fn population_and_sizes_consistent() {
        let mut rng = RngStream::new(4, 0);
        let s = tb_simulate(0.6, 0.2, 2000, &mut rng).unwrap();
        let sizes = s.cluster_sizes();
        assert_eq!(sizes.iter().sum::<u64>(), 2000);
        assert!(sizes.iter().all(|&x| x >= 1));
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn singletons_sample_all_distinct() {
        let s = TbState::from_sizes(&vec![1; 1000]).unwrap();
        let mut rng = RngStream::new(5, 0);
        let (g, h) = tb_stats(&s, 473, &mut rng).unwrap();
        assert_eq!(g, 473);
        assert_relative_eq!(h, 1.0 - 1.0 / 473.0, epsilon = 1e-15);
    }

    #[test]
    fn whole_population_sample_is_exact() {
        let sizes = [5, 3, 3, 1];
        let s = TbState::from_sizes(&sizes).unwrap();
        let mut rng = RngStream::new(6, 0);
        let (g, h) = tb_stats(&s, 12, &mut rng).unwrap();
        assert_eq!(g, 4);
        assert_relative_eq!(h, 1.0 - 44.0 / 144.0, epsilon = 1e-15);
    }

    #[test]
    fn large_dominant_cluster() {
        let mut sizes = vec![9000];
        sizes.extend(std::iter::repeat_n(1, 1000));
        let s = TbState::from_sizes(&sizes).unwrap();
        let mut rng = RngStream::new(9, 0);
        let (g, h) = tb_stats(&s, 473, &mut rng).unwrap();
        assert!(g > 1 && g < 120, "{g}");
        assert!(h > 0.0 && h < 0.5);
    }

    #[test]
    fn sampled_cluster_share_is_hypergeometric_mean() {
        // One cluster of 50 among 200 bacteria; sample 40: mean hits 10.
        let mut sizes = vec![50];
        sizes.extend(std::iter::repeat_n(1, 150));
        let s = TbState::from_sizes(&sizes).unwrap();
        let mut rng = RngStream::new(7, 0);
        let reps = 20_000;
        let mut total = 0.0;
        for _ in 0..reps {
            let (g, _) = tb_stats(&s, 40, &mut rng).unwrap();
            // g = singletons drawn + (1 if the big cluster was hit)
            total += 40.0 - g as f64;
        }
        // E[hits on big cluster] - P(hit) = 10 - (1 - P(miss)).
        let p_miss: f64 = (0..40)
            .map(|i| (150.0 - i as f64) / (200.0 - i as f64))
            .product();
        let expected = 10.0 - (1.0 - p_miss);
        assert!(
            (total / reps as f64 - expected).abs() < 0.05,
            "{}",
            total / reps as f64
        );
    }

    #[test]
    fn prior_support() {
        let m = tb_model();
        assert_relative_eq!(m.prior_potential(&[0.5, 0.2]), -(4.0f64).ln());
        assert!(m.prior_potential(&[0.2, 0.5]).is_infinite());
        assert!(m.prior_potential(&[0.7, 0.4]).is_infinite());
        let mut rng = RngStream::new(8, 0);
        for _ in 0..1000 {
            assert!(m.in_support(&m.sample_prior(&mut rng)));
        }
    }
}
