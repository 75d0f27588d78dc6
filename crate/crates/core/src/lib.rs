//! Localizability scoring for classification-based image geolocation.
//!
//! A geolocation model that classifies images into geographic cells emits a
//! probability distribution over those cells. This crate decides, at a
//! given distance scale, whether such a prediction should be trusted, and
//! evaluates the resulting selective predictor with risk-coverage analysis.
//!
//! * [`geodesy`]: coordinates and great-circle distance.
//! * [`cellgrid`]: adaptive quadtree partition and radius queries.
//! * [`distribution`]: validated per-image cell distributions.
//! * [`selection`]: confidence functions and gates.
//! * [`selective`]: labels, coverage, risk, RC curves, calibration, reports.
//! * [`io`]: text file formats.
//! * [`synth`]: seeded synthetic prediction corpora.

pub mod cellgrid;
pub mod distribution;
pub mod geodesy;
pub mod io;
pub mod selection;
pub mod selective;
pub mod synth;

pub use cellgrid::{build_partition, Cell, CellGrid, CellId, PartitionParams};
pub use distribution::{CellDistribution, EvalRecord};
pub use geodesy::{gcd, DistanceKm, GeoPoint};
pub use selection::{ConfidenceScore, Decision, Method, Orientation};
