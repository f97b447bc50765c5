//! Binned record of attempted moves on the `(rho, nu)` plane.
//!
//! The stationary vector of the column-normalised count matrix discretises
//! the likelihood surface, so it can stand in for the prior sample once the
//! latter no longer has effective records at the current intensities.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::ensemble::PriorSample;
use crate::error::{Error, Result};

/// Uniform rectangular grid over a region of the `(rho, nu)` plane.
#[derive(Clone, Debug, PartialEq)]
pub struct BinGrid {
    pub rho_range: (f64, f64),
    pub nu_range: (f64, f64),
    pub n_rho: usize,
    pub n_nu: usize,
}

impl BinGrid {
    pub fn new(
        rho_range: (f64, f64),
        nu_range: (f64, f64),
        n_rho: usize,
        n_nu: usize,
    ) -> Result<Self> {
        if n_rho == 0 || n_nu == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one bin per axis".into(),
            ));
        }
        if !(rho_range.1 > rho_range.0) || !(nu_range.1 > nu_range.0) {
            return Err(Error::InvalidArgument(format!(
                "empty grid region {rho_range:?} x {nu_range:?}"
            )));
        }
        Ok(Self {
            rho_range,
            nu_range,
            n_rho,
            n_nu,
        })
    }

    /// `n_rho x n_nu` bins over `[0, rho_q99] x [nu_q01, nu_q99]` of the prior
    /// sample. A constant prior potential gets a unit-width band around it.
    pub fn from_prior(p: &PriorSample, n_rho: usize, n_nu: usize) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Empty("prior sample"));
        }
        let mut rhos = p.rhos();
        let mut nus: Vec<f64> = p
            .records
            .iter()
            .map(|r| r.nu)
            .filter(|v| v.is_finite())
            .collect();
        rhos.sort_by(f64::total_cmp);
        nus.sort_by(f64::total_cmp);
        let q = |v: &[f64], f: f64| v[((v.len() - 1) as f64 * f).round() as usize];
        let mut rho_hi = q(&rhos, 0.99);
        if !(rho_hi > 0.0) {
            rho_hi = rhos.last().copied().filter(|r| *r > 0.0).unwrap_or(1.0);
        }
        let (mut lo, mut hi) = (q(&nus, 0.01), q(&nus, 0.99));
        if !(hi > lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        Self::new((0.0, rho_hi), (lo, hi), n_rho, n_nu)
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_nu
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rho_width(&self) -> f64 {
        (self.rho_range.1 - self.rho_range.0) / self.n_rho as f64
    }

    pub fn nu_width(&self) -> f64 {
        (self.nu_range.1 - self.nu_range.0) / self.n_nu as f64
    }

    /// Bin index of a point, or `None` outside the region. The upper edges
    /// are closed.
    pub fn bin_of(&self, rho: f64, nu: f64) -> Option<usize> {
        let cell = |v: f64, (lo, hi): (f64, f64), n: usize| -> Option<usize> {
            if !(v >= lo && v <= hi) {
                return None;
            }
            let i = ((v - lo) / (hi - lo) * n as f64) as usize;
            Some(i.min(n - 1))
        };
        let i = cell(rho, self.rho_range, self.n_rho)?;
        let j = cell(nu, self.nu_range, self.n_nu)?;
        Some(i * self.n_nu + j)
    }

    pub fn center(&self, bin: usize) -> (f64, f64) {
        let (i, j) = (bin / self.n_nu, bin % self.n_nu);
        (
            self.rho_range.0 + (i as f64 + 0.5) * self.rho_width(),
            self.nu_range.0 + (j as f64 + 0.5) * self.nu_width(),
        )
    }
}

/// Counts of attempted moves, keyed by `(to, from)` bin.
#[derive(Clone, Debug)]
pub struct QMatrix {
    grid: BinGrid,
    counts: BTreeMap<(usize, usize), u64>,
    dropped: u64,
}

impl QMatrix {
    pub fn new(grid: BinGrid) -> Self {
        Self {
            grid,
            counts: BTreeMap::new(),
            dropped: 0,
        }
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    /// Attempts starting outside the region.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, to: usize, from: usize) -> u64 {
        self.counts.get(&(to, from)).copied().unwrap_or(0)
    }

    /// Records one attempt; `to = None` or a target outside the region counts
    /// as staying in the source bin.
    pub fn record_attempt(&mut self, from: (f64, f64), to: Option<(f64, f64)>) {
        let Some(b_from) = self.grid.bin_of(from.0, from.1) else {
            self.dropped += 1;
            return;
        };
        let b_to = to
            .and_then(|(r, n)| self.grid.bin_of(r, n))
            .unwrap_or(b_from);
        *self.counts.entry((b_to, b_from)).or_insert(0) += 1;
    }

    pub fn column_total(&self, from: usize) -> u64 {
        self.counts
            .iter()
            .filter(|((_, f), _)| *f == from)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn clear(&mut self) {
        self.counts.clear();
        self.dropped = 0;
    }

    /// Column-normalised chain on the bins that were attempted from.
    ///
    /// Moves into bins never used as a source are folded into the diagonal,
    /// like moves leaving the region.
    pub fn normalized(&self) -> Result<StochasticMatrix> {
        let mut totals: BTreeMap<usize, u64> = BTreeMap::new();
        for (&(_, from), &c) in &self.counts {
            *totals.entry(from).or_insert(0) += c;
        }
        if totals.is_empty() {
            return Err(Error::Empty("attempt counts"));
        }
        let states: Vec<usize> = totals.keys().copied().collect();
        let index: BTreeMap<usize, usize> =
            states.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
        let mut diag = vec![0u64; states.len()];
        for (&(to, from), &c) in &self.counts {
            let f = index[&from];
            match index.get(&to) {
                Some(&t) if t != f => cols[f].push((t, c as f64)),
                _ => diag[f] += c,
            }
        }
        for (f, col) in cols.iter_mut().enumerate() {
            if diag[f] > 0 {
                col.push((f, diag[f] as f64));
            }
            let total = totals[&states[f]] as f64;
            for e in col.iter_mut() {
                e.1 /= total;
            }
            col.sort_by_key(|e| e.0);
        }
        Ok(StochasticMatrix { states, cols })
    }

    /// Writes `from_bin,to_bin,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["from_bin", "to_bin", "count"])?;
        let mut rows: Vec<_> = self.counts.iter().map(|(&(t, f), &c)| (f, t, c)).collect();
        rows.sort();
        for (f, t, c) in rows {
            w.write_record([f.to_string(), t.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Estimates of `U(eps)` and the Onsager matrix from the recorded chain.
    /// `seeds` are points (typically the current ensemble) used to choose a
    /// closed class when the chain is reducible.
    pub fn moments(
        &self,
        eps: Vector2<f64>,
        seeds: &[(f64, f64)],
    ) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let q = self.normalized()?;
        let seed_bins: Vec<usize> = seeds
            .iter()
            .filter_map(|&(r, n)| self.grid.bin_of(r, n))
            .filter_map(|b| q.states.iter().position(|&s| s == b))
            .collect();
        let g = stationary_vector(&q, &seed_bins)?;
        moments_from_g(&g, &q, &self.grid, eps)
    }
}

/// Sparse column-stochastic matrix; `states[i]` is the grid bin of row and
/// column `i`.
#[derive(Clone, Debug)]
pub struct StochasticMatrix {
    pub states: Vec<usize>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl StochasticMatrix {
    /// From a dense column-stochastic matrix; state `i` is bin `i`.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut cols = vec![Vec::new(); n];
        for (j, col) in cols.iter_mut().enumerate() {
            let s: f64 = m.column(j).sum();
            if (s - 1.0).abs() > 1e-9 || m.column(j).iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "column {j} is not a distribution"
                )));
            }
            for i in 0..n {
                if m[(i, j)] > 0.0 {
                    col.push((i, m[(i, j)]));
                }
            }
        }
        Ok(Self {
            states: (0..n).collect(),
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.cols[j].iter().map(|e| e.1).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (j, col) in self.cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, q) in col {
                    y[i] += q * x[j];
                }
            }
        }
        y
    }

    /// Strongly connected components with no transitions leaving them.
    fn closed_classes(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, _) in col {
                rev[i].push(j);
            }
        }
        // Kosaraju: finishing order on the forward graph (edge j -> i).
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some((v, k)) = stack.pop() {
                if k < self.cols[v].len() {
                    stack.push((v, k + 1));
                    let w = self.cols[v][k].0;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut n_comp = 0;
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = n_comp;
            while let Some(v) = stack.pop() {
                for &w in &rev[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = n_comp;
                        stack.push(w);
                    }
                }
            }
            n_comp += 1;
        }
        let mut closed = vec![true; n_comp];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, _) in col {
                if comp[i] != comp[j] {
                    closed[comp[j]] = false;
                }
            }
        }
        let mut classes = vec![Vec::new(); n_comp];
        for v in 0..n {
            if closed[comp[v]] {
                classes[comp[v]].push(v);
            }
        }
        classes.retain(|c| !c.is_empty());
        classes
    }
}

/// Stationary vector of a column-stochastic chain by power iteration on the
/// lazy chain `(Q + I)/2`, iterated to an L1 residual below `1e-12`.
///
/// A reducible chain is restricted to its closed class; with several closed
/// classes the one holding the most `seeds` is used, and an error is returned
/// if that is still ambiguous.
pub fn stationary_vector(q: &StochasticMatrix, seeds: &[usize]) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(Error::Empty("transition matrix"));
    }
    let classes = q.closed_classes();
    let class = if classes.len() == 1 {
        &classes[0]
    } else {
        let hits: Vec<usize> = classes
            .iter()
            .map(|c| seeds.iter().filter(|s| c.contains(s)).count())
            .collect();
        let best = *hits.iter().max().unwrap_or(&0);
        let winners: Vec<usize> = (0..classes.len()).filter(|&i| hits[i] == best).collect();
        if best == 0 || winners.len() > 1 {
            let list: Vec<String> = classes
                .iter()
                .map(|c| format!("{:?}", c.iter().map(|&i| q.states[i]).collect::<Vec<_>>()))
                .collect();
            return Err(Error::Reducible(list.join(", ")));
        }
        &classes[winners[0]]
    };
    let n = q.len();
    let mut g = vec![0.0; n];
    for &i in class {
        g[i] = 1.0 / class.len() as f64;
    }
    const MAX_ITER: usize = 1_000_000;
    for _ in 0..MAX_ITER {
        let qg = q.apply(&g);
        let residual: f64 = qg.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum();
        if residual < 1e-12 {
            let s: f64 = qg.iter().sum();
            return Ok(qg.into_iter().map(|v| v / s).collect());
        }
        for (gi, qi) in g.iter_mut().zip(&qg) {
            *gi = 0.5 * (*gi + qi);
        }
    }
    Err(Error::NoConvergence {
        what: "stationary vector",
        iterations: MAX_ITER,
    })
}

/// Reweights `g` to intensities `eps` and returns the implied `(U1, U2)` and
/// Onsager matrix.
///
/// Attempted moves use the symmetric jump kernel without a prior factor, so
/// each bin is weighted by `exp(-rho/eps1 - (1 + eps2) nu)` at its centre.
pub fn moments_from_g(
    g: &[f64],
    q: &StochasticMatrix,
    grid: &BinGrid,
    eps: Vector2<f64>,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    if g.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: g.len(),
        });
    }
    let centers: Vec<(f64, f64)> = q.states.iter().map(|&b| grid.center(b)).collect();
    let logw: Vec<f64> = centers
        .iter()
        .zip(g)
        .map(|(&(r, n), &gi)| {
            if gi > 0.0 {
                gi.ln() - r / eps[0] - (1.0 + eps[1]) * n
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let p: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    let mut u = Vector2::zeros();
    let mut l = Matrix2::zeros();
    for (j, &pj) in p.iter().enumerate() {
        let pj = pj / total;
        let (r0, n0) = centers[j];
        u += Vector2::new(r0, n0) * pj;
        for &(i, qij) in q.column(j) {
            let (r1, n1) = centers[i];
            let (dr, dn) = (r0 - r1, n0 - n1);
            if dr / eps[0] + (1.0 + eps[1]) * dn >= 0.0 {
                let d = Vector2::new(dr, dn);
                l += d * d.transpose() * (pj * qij);
            }
        }
    }
    Ok((u, l))
}
