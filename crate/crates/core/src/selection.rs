//! Confidence functions over cell distributions and the gates built on them.
//!
//! Two functions look at where the probability mass sits on the globe:
//!
//! * [`spatial_entropy`] greedily merges cells into super-cells of radius
//!   `d` around successive most-probable seeds until 90% of the mass is
//!   covered, then takes the base-2 entropy of the super-cell masses. Low
//!   values mean concentrated confidence.
//! * [`prediction_density`] sums the mass within `d` of the most probable
//!   cell. High values mean concentrated confidence.
//!
//! [`softmax_response`] and [`mc_variance`] are the scale-free baselines;
//! [`ideal_rank`] and [`random_select`] are the reference selectors.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cellgrid::{CellGrid, CellId, GridError};
use crate::distribution::{CellDistribution, DistributionError};
use crate::geodesy::DistanceKm;

/// Fraction of the total mass the super-cells must account for.
pub const MASS_CUTOFF: f64 = 0.9;

/// Absolute slack on the cutoff comparison, so that e.g. `0.6 + 0.3`
/// (which rounds to `0.8999999999999999`) counts as reaching 90%.
pub const CUTOFF_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0} Monte-Carlo passes given, at least 2 required")]
    TooFewPasses(usize),
    #[error("acceptance probability {0} outside [0, 1]")]
    InvalidProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Spatial entropy of super-cells.
    Se,
    /// Prediction density around the argmax cell.
    Pd,
    /// Softmax response: the maximum cell probability.
    Sr,
    /// Variance of the softmax response across stochastic passes.
    Mc,
    Random,
    Ideal,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Se,
        Method::Pd,
        Method::Sr,
        Method::Mc,
        Method::Random,
        Method::Ideal,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            Method::Se | Method::Mc => Orientation::LowerIsConfident,
            Method::Pd | Method::Sr | Method::Random | Method::Ideal => {
                Orientation::HigherIsConfident
            }
        }
    }

    /// Whether the score depends on the scale `d`.
    pub fn uses_scale(self) -> bool {
        matches!(self, Method::Se | Method::Pd | Method::Ideal)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Se => "se",
            Method::Pd => "pd",
            Method::Sr => "sr",
            Method::Mc => "mc",
            Method::Random => "random",
            Method::Ideal => "ideal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method '{s}' (expected se, pd, sr, mc, random, ideal)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    HigherIsConfident,
    LowerIsConfident,
}

impl Orientation {
    /// Acceptance test of the gate; equality always accepts.
    pub fn accepts(self, value: f64, theta: f64) -> bool {
        match self {
            Orientation::HigherIsConfident => value >= theta,
            Orientation::LowerIsConfident => value <= theta,
        }
    }

    /// Orders `a` before `b` when `a` is the more confident value.
    pub fn cmp_confidence(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Orientation::HigherIsConfident => b.total_cmp(&a),
            Orientation::LowerIsConfident => a.total_cmp(&b),
        }
    }

    /// A threshold no finite score passes.
    pub fn reject_all(self) -> f64 {
        match self {
            Orientation::HigherIsConfident => f64::INFINITY,
            Orientation::LowerIsConfident => f64::NEG_INFINITY,
        }
    }

    /// A threshold every finite score passes.
    pub fn accept_all(self) -> f64 {
        -self.reject_all()
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::HigherIsConfident => "higher",
            Orientation::LowerIsConfident => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceScore {
    pub value: f64,
    pub orientation: Orientation,
    pub method: Method,
    pub scale: Option<DistanceKm>,
}

impl ConfidenceScore {
    fn new(method: Method, value: f64, scale: Option<DistanceKm>) -> Self {
        Self {
            value,
            orientation: method.orientation(),
            method,
            scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Abstain,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

/// Selection function `g`: accept when the score is at least as confident
/// as `theta`.
pub fn gate(score: &ConfidenceScore, theta: f64) -> Decision {
    if score.orientation.accepts(score.value, theta) {
        Decision::Accept
    } else {
        Decision::Abstain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperCell {
    /// Member cells, ascending id; the seed is one of them.
    pub members: Vec<CellId>,
    pub seed: CellId,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperCellSet {
    pub cells: Vec<SuperCell>,
    pub cumulative_mass: f64,
}

impl SuperCellSet {
    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|s| s.mass)
    }
}

/// Greedy super-cell construction.
///
/// Seeds are taken in order of decreasing probability (ties: smallest id).
/// Each seed absorbs every not-yet-consumed cell of the distribution whose
/// center lies within `d` of the seed's center. Construction stops once the
/// accumulated mass reaches [`MASS_CUTOFF`]; the super-cell that crosses it
/// is kept.
pub fn build_supercells(
    dist: &CellDistribution,
    grid: &CellGrid,
    d: DistanceKm,
) -> Result<SuperCellSet, SelectionError> {
    dist.check_grid(grid)?;
    let entries = dist.entries();
    let mut seeds: Vec<usize> = (0..entries.len()).collect();
    // stable sort keeps ascending id among equal probabilities
    seeds.sort_by(|&a, &b| entries[b].1.total_cmp(&entries[a].1));

    let mut consumed = vec![false; entries.len()];
    let mut cells = Vec::new();
    let mut cumulative = 0.0;
    for seed in seeds {
        if consumed[seed] {
            continue;
        }
        let neighbours = grid.cells_within(entries[seed].0, d)?;
        let mut members = Vec::new();
        let mut mass = 0.0;
        // both lists ascend by id
        let mut k = 0;
        for id in neighbours {
            while k < entries.len() && entries[k].0 < id {
                k += 1;
            }
            if k < entries.len() && entries[k].0 == id && !consumed[k] {
                consumed[k] = true;
                members.push(id);
                mass += entries[k].1;
            }
        }
        cells.push(SuperCell {
            members,
            seed: entries[seed].0,
            mass,
        });
        cumulative += mass;
        if cumulative + CUTOFF_SLACK >= MASS_CUTOFF {
            break;
        }
    }
    Ok(SuperCellSet {
        cells,
        cumulative_mass: cumulative,
    })
}

/// How super-cell masses enter the entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyMode {
    /// Entropy of the raw super-cell masses, which sum to somewhere in
    /// `[0.9, 1]` after the cutoff.
    #[default]
    Unnormalized,
    /// Masses rescaled to sum to 1 before taking the entropy.
    Renormalized,
}

fn entropy_bits(masses: impl Iterator<Item = f64>) -> f64 {
    masses
        .filter(|&p| p > 0.0)
        .fold(0.0, |acc, p| acc - p * p.log2())
}

pub fn spatial_entropy(
    dist: &CellDistribution,
    grid: &CellGrid,
    d: DistanceKm,
) -> Result<ConfidenceScore, SelectionError> {
    spatial_entropy_with(dist, grid, d, EntropyMode::Unnormalized)
}

pub fn spatial_entropy_with(
    dist: &CellDistribution,
    grid: &CellGrid,
    d: DistanceKm,
    mode: EntropyMode,
) -> Result<ConfidenceScore, SelectionError> {
    let set = build_supercells(dist, grid, d)?;
    let value = match mode {
        EntropyMode::Unnormalized => entropy_bits(set.masses()),
        EntropyMode::Renormalized => {
            let total = set.cumulative_mass;
            entropy_bits(set.masses().map(|m| m / total))
        }
    };
    Ok(ConfidenceScore::new(Method::Se, value, Some(d)))
}

/// Mass of every cell within `d` of the most probable cell.
pub fn prediction_density(
    dist: &CellDistribution,
    grid: &CellGrid,
    d: DistanceKm,
) -> Result<ConfidenceScore, SelectionError> {
    dist.check_grid(grid)?;
    let neighbours = grid.cells_within(dist.argmax_cell(), d)?;
    let entries = dist.entries();
    let mut value = 0.0;
    let mut k = 0;
    for id in neighbours {
        while k < entries.len() && entries[k].0 < id {
            k += 1;
        }
        if k < entries.len() && entries[k].0 == id {
            value += entries[k].1;
        }
    }
    Ok(ConfidenceScore::new(Method::Pd, value, Some(d)))
}

pub fn softmax_response(dist: &CellDistribution) -> ConfidenceScore {
    ConfidenceScore::new(Method::Sr, dist.max_probability(), None)
}

/// Population variance of the per-pass softmax responses.
pub fn mc_variance(passes: &[CellDistribution]) -> Result<ConfidenceScore, SelectionError> {
    if passes.len() < 2 {
        return Err(SelectionError::TooFewPasses(passes.len()));
    }
    let n = passes.len() as f64;
    let responses: Vec<f64> = passes.iter().map(|p| p.max_probability()).collect();
    let mean = responses.iter().sum::<f64>() / n;
    let var = responses
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / n;
    Ok(ConfidenceScore::new(Method::Mc, var, None))
}

/// Score of the ideal selector: 1 for localizable records, 0 otherwise.
pub fn ideal_score(localizable: bool, d: DistanceKm) -> ConfidenceScore {
    ConfidenceScore::new(Method::Ideal, if localizable { 1.0 } else { 0.0 }, Some(d))
}

/// Indices with every localizable record first, input order kept within
/// each group.
pub fn ideal_rank(localizable: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..localizable.len()).collect();
    order.sort_by_key(|&i| !localizable[i]);
    order
}

/// One uniform draw in `[0, 1)` per record from a generator seeded with
/// `seed`. The random selector accepts record `i` at acceptance probability
/// `p` iff `draw_i >= 1 - p`, so the draws act as its confidence scores.
pub fn random_scores(n: usize, seed: u64) -> Vec<ConfidenceScore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ConfidenceScore::new(Method::Random, rng.random::<f64>(), None))
        .collect()
}

/// Threshold on [`random_scores`] equivalent to acceptance probability `p`.
pub fn random_threshold(p_accept: f64) -> Result<f64, SelectionError> {
    if !(0.0..=1.0).contains(&p_accept) {
        return Err(SelectionError::InvalidProbability(p_accept));
    }
    Ok(1.0 - p_accept)
}

/// Independent Bernoulli(`p_accept`) decisions, reproducible under `seed`.
pub fn random_select(n: usize, p_accept: f64, seed: u64) -> Result<Vec<Decision>, SelectionError> {
    let theta = random_threshold(p_accept)?;
    Ok(random_scores(n, seed)
        .iter()
        .map(|s| gate(s, theta))
        .collect())
}
