//! Per-image probability distributions over the cell grid.

use std::cmp::Ordering;

use thiserror::Error;

use crate::cellgrid::{CellGrid, CellId, GridFingerprint};
use crate::geodesy::GeoPoint;

/// Largest accepted deviation of a raw distribution's total from 1.
pub const SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("empty distribution")]
    Empty,
    #[error("negative probability {p} for cell {cell}")]
    NegativeProbability { cell: CellId, p: f64 },
    #[error("non-finite probability for cell {cell}")]
    NonFinite { cell: CellId },
    #[error("probabilities sum to {sum}, outside 1 +/- {SUM_TOLERANCE}")]
    SumOutOfTolerance { sum: f64 },
    #[error("unknown cell id {0}")]
    UnknownCell(CellId),
    #[error("cell {0} listed twice")]
    DuplicateCell(CellId),
    #[error("distribution is bound to grid {found}, not {expected}")]
    GridMismatch {
        expected: GridFingerprint,
        found: GridFingerprint,
    },
    #[error("{0} Monte-Carlo passes given, at least 2 required")]
    TooFewPasses(usize),
}

/// A validated, normalized, sparse distribution over the cells of one grid.
///
/// Entries are sorted by cell id and their sequential sum in that order is
/// exactly `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDistribution {
    entries: Vec<(CellId, f64)>,
    grid: GridFingerprint,
}

impl CellDistribution {
    pub fn validate(
        raw: impl IntoIterator<Item = (CellId, f64)>,
        grid: &CellGrid,
    ) -> Result<Self, DistributionError> {
        let mut entries: Vec<(CellId, f64)> = raw.into_iter().collect();
        if entries.is_empty() {
            return Err(DistributionError::Empty);
        }
        for &(cell, p) in &entries {
            if !p.is_finite() {
                return Err(DistributionError::NonFinite { cell });
            }
            if p < 0.0 {
                return Err(DistributionError::NegativeProbability { cell, p });
            }
            if !grid.contains(cell) {
                return Err(DistributionError::UnknownCell(cell));
            }
        }
        entries.sort_by_key(|e| e.0);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(DistributionError::DuplicateCell(w[0].0));
        }
        let sum = sequential_sum(&entries);
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::SumOutOfTolerance { sum });
        }
        for e in &mut entries {
            e.1 /= sum;
        }
        settle_sum(&mut entries);
        Ok(Self {
            entries,
            grid: grid.fingerprint(),
        })
    }

    pub fn entries(&self) -> &[(CellId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grid_fingerprint(&self) -> GridFingerprint {
        self.grid
    }

    pub fn probability(&self, cell: CellId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&cell, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Most probable cell; ties go to the smallest id.
    pub fn argmax_cell(&self) -> CellId {
        self.entries[argmax_index(&self.entries)].0
    }

    pub fn max_probability(&self) -> f64 {
        self.entries[argmax_index(&self.entries)].1
    }

    pub fn check_grid(&self, grid: &CellGrid) -> Result<(), DistributionError> {
        if self.grid != grid.fingerprint() {
            return Err(DistributionError::GridMismatch {
                expected: grid.fingerprint(),
                found: self.grid,
            });
        }
        Ok(())
    }

    /// The model's point estimate: the center of the most probable cell.
    pub fn predict_location(&self, grid: &CellGrid) -> Result<GeoPoint, DistributionError> {
        self.check_grid(grid)?;
        let cell = self.argmax_cell();
        grid.cell_center(cell)
            .map_err(|_| DistributionError::UnknownCell(cell))
    }
}

fn sequential_sum(entries: &[(CellId, f64)]) -> f64 {
    entries.iter().fold(0.0, |acc, e| acc + e.1)
}

fn argmax_index(entries: &[(CellId, f64)]) -> usize {
    let mut best = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        if e.1 > entries[best].1 {
            best = i;
        }
    }
    best
}

/// Adjusts the normalized entries by at most a few ulps so that their
/// id-ordered sequential sum is exactly 1, without changing the argmax.
fn settle_sum(entries: &mut [(CellId, f64)]) {
    if sequential_sum(entries) == 1.0 {
        return;
    }
    let winner = argmax_index(entries);
    let try_set = |entries: &mut [(CellId, f64)], i: usize, value: f64| {
        if value < 0.0 {
            return false;
        }
        let old = entries[i].1;
        entries[i].1 = value;
        if sequential_sum(entries) == 1.0 && argmax_index(entries) == winner {
            return true;
        }
        entries[i].1 = old;
        false
    };

    // Closing the sum with the last entry: 1 - head is exact whenever the
    // head is at least 0.5, which makes the final addition land on 1.
    let last = entries.len() - 1;
    let head = sequential_sum(&entries[..last]);
    if try_set(entries, last, 1.0 - head) {
        return;
    }
    let mut by_mass: Vec<usize> = (0..entries.len()).collect();
    by_mass.sort_by(|&a, &b| {
        entries[b]
            .1
            .partial_cmp(&entries[a].1)
            .unwrap_or(Ordering::Equal)
    });
    for _ in 0..4 {
        let residual = 1.0 - sequential_sum(entries);
        for &i in &by_mass {
            if try_set(entries, i, entries[i].1 + residual) {
                return;
            }
        }
        // no single nudge closes the gap; move the largest entry and retry
        let top = by_mass[0];
        if by_mass.len() > 1 && entries[top].1 + residual > entries[by_mass[1]].1 {
            entries[top].1 += residual;
        }
    }
}

/// One evaluated image: ground truth plus the model's output distribution,
/// optionally with several stochastic forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub image_id: String,
    pub truth: GeoPoint,
    pub dist: CellDistribution,
    pub mc_dists: Option<Vec<CellDistribution>>,
}

impl EvalRecord {
    pub fn new(
        image_id: impl Into<String>,
        truth: GeoPoint,
        dist: CellDistribution,
        mc_dists: Option<Vec<CellDistribution>>,
    ) -> Result<Self, DistributionError> {
        if let Some(passes) = &mc_dists {
            if passes.len() < 2 {
                return Err(DistributionError::TooFewPasses(passes.len()));
            }
            if let Some(bad) = passes.iter().find(|m| m.grid != dist.grid) {
                return Err(DistributionError::GridMismatch {
                    expected: dist.grid,
                    found: bad.grid,
                });
            }
        }
        Ok(Self {
            image_id: image_id.into(),
            truth,
            dist,
            mc_dists,
        })
    }
}
