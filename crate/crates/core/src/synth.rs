//! Seeded synthetic prediction corpora with a known localizability label.
//!
//! A *localizable* record puts its largest weight on a focal cell, adds
//! smaller weights on a few cells within the planted scale of it, and
//! places the true location within half the planted scale of the focal
//! center. A *dispersed* record spreads comparable weight over five cells
//! that are pairwise farther apart than the planted scale and draws its
//! true location uniformly on the sphere. Both kinds get a sprinkling of
//! low-weight noise cells.
//!
//! `concentration` sharpens every random weight `u ~ U(0,1)` to `u^c`.
//! At `c = inf` the side and noise weights vanish: localizable records
//! become single-cell distributions and dispersed records become exact
//! fifths.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::cellgrid::{CellGrid, CellId};
use crate::distribution::{CellDistribution, EvalRecord};
use crate::geodesy::{gcd, DistanceKm, GeoPoint};

/// Number of mutually distant cells in a dispersed record.
pub const DISPERSED_REGIONS: usize = 5;
const NEAR_CELLS: usize = 4;
const NOISE_CELLS: usize = 10;
const NOISE_WEIGHT: f64 = 0.1;
const MC_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("grid too small: found only {found} cells pairwise farther apart than {scale}, need {DISPERSED_REGIONS}")]
    GridTooSmall { found: usize, scale: DistanceKm },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_localizable: usize,
    pub n_nonlocalizable: usize,
    /// Sharpness of planted distributions, `> 0`; `f64::INFINITY` allowed.
    pub concentration: f64,
    pub scale: DistanceKm,
    /// Monte-Carlo passes per record; 0 for none, otherwise at least 2.
    pub mc_passes: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_localizable: 1000,
            n_nonlocalizable: 1000,
            concentration: 1.0,
            scale: DistanceKm::new(25.0).expect("positive"),
            mc_passes: 5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.concentration.is_nan() || self.concentration <= 0.0 {
            return Err(SynthError::InvalidSpec(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        if self.mc_passes == 1 {
            return Err(SynthError::InvalidSpec(
                "mc_passes must be 0 or at least 2".into(),
            ));
        }
        if self.n_localizable + self.n_nonlocalizable == 0 {
            return Err(SynthError::InvalidSpec("no records requested".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<EvalRecord>,
    /// `planted[i]` is true when `records[i]` was built localizable.
    pub planted: Vec<bool>,
}

struct Generator<'g> {
    grid: &'g CellGrid,
    spec: &'g SynthSpec,
    rng: ChaCha8Rng,
    ids: Vec<CellId>,
}

impl Generator<'_> {
    fn sharpened(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        if self.spec.concentration.is_infinite() {
            0.0
        } else {
            u.powf(self.spec.concentration)
        }
    }

    fn add_noise(&mut self, weights: &mut Vec<(CellId, f64)>) {
        for _ in 0..NOISE_CELLS {
            let id = self.ids[self.rng.random_range(0..self.ids.len())];
            let w = NOISE_WEIGHT * self.sharpened();
            if w > 0.0 && !weights.iter().any(|e| e.0 == id) {
                weights.push((id, w));
            }
        }
    }

    fn localizable(&mut self) -> (GeoPoint, Vec<(CellId, f64)>) {
        let focal = self.ids[self.rng.random_range(0..self.ids.len())];
        let mut weights = vec![(focal, 1.0)];
        let mut near = self
            .grid
            .cells_within(focal, self.spec.scale)
            .expect("focal cell is in the grid");
        near.retain(|&id| id != focal);
        near.shuffle(&mut self.rng);
        for &id in near.iter().take(NEAR_CELLS) {
            let w = self.sharpened();
            if w > 0.0 {
                weights.push((id, w));
            }
        }
        self.add_noise(&mut weights);
        let center = self
            .grid
            .cell_center(focal)
            .expect("focal cell is in the grid");
        let bearing = self.rng.random_range(0.0..360.0);
        let offset = DistanceKm::new(self.rng.random_range(0.0..0.5) * self.spec.scale.value())
            .expect("non-negative");
        (center.destination(bearing, offset), weights)
    }

    fn distant_cells(&mut self) -> Result<Vec<CellId>, SynthError> {
        let mut order = self.ids.clone();
        order.shuffle(&mut self.rng);
        let mut chosen: Vec<(CellId, GeoPoint)> = Vec::with_capacity(DISPERSED_REGIONS);
        for id in order {
            let c = self.grid.cell_center(id).expect("grid cell");
            if chosen.iter().all(|&(_, o)| gcd(o, c) > self.spec.scale) {
                chosen.push((id, c));
                if chosen.len() == DISPERSED_REGIONS {
                    return Ok(chosen.into_iter().map(|e| e.0).collect());
                }
            }
        }
        Err(SynthError::GridTooSmall {
            found: chosen.len(),
            scale: self.spec.scale,
        })
    }

    fn dispersed(&mut self) -> Result<(GeoPoint, Vec<(CellId, f64)>), SynthError> {
        let regions = self.distant_cells()?;
        let mut weights = Vec::with_capacity(DISPERSED_REGIONS + NOISE_CELLS);
        for id in regions {
            let w = 1.0 - 0.5 * self.sharpened();
            weights.push((id, w));
        }
        self.add_noise(&mut weights);
        let z: f64 = self.rng.random_range(-1.0..=1.0);
        let lon = self.rng.random_range(-180.0..180.0);
        let truth = GeoPoint::new(z.asin().to_degrees(), lon).expect("valid coordinates");
        Ok((truth, weights))
    }

    fn distribution(&self, weights: &[(CellId, f64)]) -> CellDistribution {
        let total: f64 = weights.iter().map(|e| e.1).sum();
        CellDistribution::validate(weights.iter().map(|&(id, w)| (id, w / total)), self.grid)
            .expect("normalized weights over grid cells")
    }

    fn mc_passes(&mut self, weights: &[(CellId, f64)]) -> Option<Vec<CellDistribution>> {
        if self.spec.mc_passes == 0 {
            return None;
        }
        let normal = Normal::new(0.0, MC_SIGMA).expect("finite sigma");
        let passes = (0..self.spec.mc_passes)
            .map(|_| {
                let perturbed: Vec<(CellId, f64)> = weights
                    .iter()
                    .map(|&(id, w)| (id, w * normal.sample(&mut self.rng).exp()))
                    .collect();
                self.distribution(&perturbed)
            })
            .collect();
        Some(passes)
    }
}

/// Generates a corpus over `grid`. Records are shuffled and named
/// `img-000000`, `img-000001`, ... in output order.
pub fn generate(grid: &CellGrid, spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut gen = Generator {
        grid,
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        ids: grid.cells().iter().map(|c| c.id).collect(),
    };
    let mut kinds: Vec<bool> = std::iter::repeat_n(true, spec.n_localizable)
        .chain(std::iter::repeat_n(false, spec.n_nonlocalizable))
        .collect();
    kinds.shuffle(&mut gen.rng);

    let mut records = Vec::with_capacity(kinds.len());
    for (i, &planted) in kinds.iter().enumerate() {
        let (truth, weights) = if planted {
            gen.localizable()
        } else {
            gen.dispersed()?
        };
        let dist = gen.distribution(&weights);
        let mc = gen.mc_passes(&weights);
        let record =
            EvalRecord::new(format!("img-{i:06}"), truth, dist, mc).expect("passes share the grid");
        records.push(record);
    }
    Ok(SynthCorpus {
        records,
        planted: kinds,
    })
}
