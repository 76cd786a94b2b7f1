//! Work-unit accounting. One work unit (WU) is the multiply count of a
//! single finest-level SpMV, i.e. `|A_0|`.

use serde::{Deserialize, Serialize};

use crate::hierarchy::Hierarchy;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bucket {
    /// Strength of connection (including its relaxation and eigenvalue
    /// estimates) and aggregation.
    Aggregation,
    /// Candidate relaxation and coarse candidate formation.
    Candidates,
    /// Tentative operator, constraint projection, energy minimization and
    /// filtering.
    P,
    /// Galerkin triple products.
    Rap,
    /// Everything else, e.g. smoother preparation.
    SolveOther,
}

impl Bucket {
    pub const ALL: [Bucket; 5] = [
        Bucket::Aggregation,
        Bucket::Candidates,
        Bucket::P,
        Bucket::Rap,
        Bucket::SolveOther,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Cumulative operation counts by category. Counts are stored raw and
/// normalized on read, so bucket sums are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkLedger {
    base_nnz: usize,
    ops: [f64; 5],
}

impl WorkLedger {
    pub fn new(base_nnz: usize) -> Self {
        Self {
            base_nnz: base_nnz.max(1),
            ops: [0.0; 5],
        }
    }

    pub fn base_nnz(&self) -> usize {
        self.base_nnz
    }

    /// Records `ops` multiply(-add)s against `bucket`.
    pub fn charge(&mut self, bucket: Bucket, ops: u64) {
        self.ops[bucket.index()] += ops as f64;
    }

    /// Records one SpMV with `a`.
    pub fn charge_spmv(&mut self, bucket: Bucket, a: &SparseMatrix) {
        self.charge(bucket, a.nnz() as u64);
    }

    /// Work units recorded in `bucket`.
    pub fn get(&self, bucket: Bucket) -> f64 {
        self.ops[bucket.index()] / self.base_nnz as f64
    }

    /// Sum over all buckets.
    pub fn total(&self) -> f64 {
        self.ops.iter().sum::<f64>() / self.base_nnz as f64
    }

    /// Setup complexity: Aggregation + Candidates + P + RAP.
    pub fn setup_complexity(&self) -> f64 {
        self.ops[..4].iter().sum::<f64>() / self.base_nnz as f64
    }

    pub fn merge(&mut self, other: &WorkLedger) {
        let scale = other.base_nnz as f64 / self.base_nnz as f64;
        for (a, b) in self.ops.iter_mut().zip(other.ops) {
            *a += b * scale;
        }
    }

    pub fn report(&self) -> SetupReport {
        SetupReport {
            aggregation: self.get(Bucket::Aggregation),
            candidates: self.get(Bucket::Candidates),
            p: self.get(Bucket::P),
            rap: self.get(Bucket::Rap),
            total_sc: self.setup_complexity(),
        }
    }
}

/// Setup cost breakdown in work units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupReport {
    pub aggregation: f64,
    pub candidates: f64,
    pub p: f64,
    pub rap: f64,
    pub total_sc: f64,
}

impl SetupReport {
    pub const CSV_HEADER: &'static str = "aggregation,candidates,p,rap,total_sc";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.aggregation, self.candidates, self.p, self.rap, self.total_sc
        )
    }
}

/// `sum_l |A_l| / |A_0|`.
pub fn operator_complexity_from(nnz_a: &[usize]) -> f64 {
    match nnz_a.first() {
        None | Some(0) => 1.0,
        Some(&base) => nnz_a.iter().sum::<usize>() as f64 / base as f64,
    }
}

/// `sum_{l<L} [(nu_pre + nu_post + 1)|A_l| + |P_l| + |R_l|] / |A_0|`, where
/// `levels[l] = (|A_l|, |P_l|, |R_l|)` and the last entry is the coarsest
/// level (whose P/R counts are ignored).
pub fn cycle_complexity_from(levels: &[(usize, usize, usize)], nu_pre: usize, nu_post: usize) -> f64 {
    let Some(&(base, _, _)) = levels.first() else {
        return 0.0;
    };
    let work: usize = levels[..levels.len() - 1]
        .iter()
        .map(|&(a, p, r)| (nu_pre + nu_post + 1) * a + p + r)
        .sum();
    work as f64 / base.max(1) as f64
}

pub fn operator_complexity(h: &Hierarchy) -> f64 {
    let nnz: Vec<usize> = h.levels.iter().map(|l| l.a.nnz()).collect();
    operator_complexity_from(&nnz)
}

pub fn cycle_complexity(h: &Hierarchy, nu_pre: usize, nu_post: usize) -> f64 {
    cycle_complexity_from(&level_counts(h), nu_pre, nu_post)
}

pub(crate) fn level_counts(h: &Hierarchy) -> Vec<(usize, usize, usize)> {
    h.levels
        .iter()
        .map(|l| {
            (
                l.a.nnz(),
                l.p.as_ref().map_or(0, |p| p.nnz()),
                l.r.as_ref().map_or(0, |r| r.nnz()),
            )
        })
        .collect()
}

pub fn setup_report(h: &Hierarchy) -> SetupReport {
    h.ledger.report()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        assert_eq!(operator_complexity_from(&[100]), 1.0);
        assert_eq!(operator_complexity_from(&[100, 25]), 1.25);
        assert_eq!(cycle_complexity_from(&[(100, 30, 30), (25, 0, 0)], 1, 1), 3.6);
        assert_eq!(cycle_complexity_from(&[(100, 0, 0)], 1, 1), 0.0);
    }

    #[test]
    fn ledger_buckets_sum() {
        let mut l = WorkLedger::new(10);
        l.charge(Bucket::Aggregation, 15);
        l.charge(Bucket::Candidates, 5);
        l.charge(Bucket::P, 20);
        l.charge(Bucket::Rap, 10);
        l.charge(Bucket::SolveOther, 7);
        let r = l.report();
        assert_eq!(r.total_sc, r.aggregation + r.candidates + r.p + r.rap);
        assert_eq!(r.total_sc, 5.0);
        assert_eq!(l.total(), 5.7);
    }
}
