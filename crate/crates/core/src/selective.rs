//! Selective-prediction evaluation at a distance scale.
//!
//! Two comparators are in play and are kept distinct: a record is
//! *localizable* at scale `d` when its prediction lies strictly closer than
//! `d` to the truth, while the loss counts an error only when the distance
//! strictly exceeds `d`. A prediction exactly `d` away is therefore accurate
//! but not localizable.

use thiserror::Error;

use crate::cellgrid::CellGrid;
use crate::distribution::{DistributionError, EvalRecord};
use crate::geodesy::{gcd, DistanceKm, GeoPoint};
use crate::selection::{
    self, gate, ConfidenceScore, Decision, EntropyMode, Method, Orientation, SelectionError,
};

/// Scales at which reports break down geolocation accuracy, km.
pub const REPORT_SCALES_KM: [f64; 5] = [1.0, 25.0, 200.0, 750.0, 2500.0];

pub fn report_scales() -> Vec<DistanceKm> {
    REPORT_SCALES_KM
        .iter()
        .map(|&km| DistanceKm::new(km).expect("positive"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("{decisions} decisions for {records} records")]
    Misaligned { records: usize, decisions: usize },
    #[error("record {image_id} has no Monte-Carlo passes")]
    MissingPasses { image_id: String },
    #[error("method {0} has no threshold to calibrate")]
    NotCalibratable(Method),
    #[error("record {image_id}: {source}")]
    Record {
        image_id: String,
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

fn for_record(image_id: &str, err: impl Into<EvalError>) -> EvalError {
    EvalError::Record {
        image_id: image_id.to_string(),
        source: Box::new(err.into()),
    }
}

/// Strict comparison: localizable iff `gcd(pred, truth) < d`.
pub fn is_localizable(pred: GeoPoint, truth: GeoPoint, d: DistanceKm) -> bool {
    gcd(pred, truth) < d
}

/// 0/1 geolocation loss: 1 iff `gcd(l1, l2) > d`.
pub fn loss(l1: GeoPoint, l2: GeoPoint, d: DistanceKm) -> u8 {
    u8::from(gcd(l1, l2) > d)
}

/// Distance from each record's predicted location to its truth.
pub fn prediction_distances(
    records: &[EvalRecord],
    grid: &CellGrid,
) -> Result<Vec<DistanceKm>, EvalError> {
    records
        .iter()
        .map(|r| {
            let pred = r
                .dist
                .predict_location(grid)
                .map_err(|e| for_record(&r.image_id, e))?;
            Ok(gcd(pred, r.truth))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizabilityLabel {
    pub image_id: String,
    pub scale: DistanceKm,
    pub localizable: bool,
}

pub fn label_localizability(
    records: &[EvalRecord],
    grid: &CellGrid,
    d: DistanceKm,
) -> Result<Vec<LocalizabilityLabel>, EvalError> {
    let distances = prediction_distances(records, grid)?;
    Ok(records
        .iter()
        .zip(distances)
        .map(|(r, dist)| LocalizabilityLabel {
            image_id: r.image_id.clone(),
            scale: d,
            localizable: dist < d,
        })
        .collect())
}

/// Drives one confidence function over a record set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scorer {
    pub method: Method,
    /// Seed of the random selector's draws.
    pub seed: u64,
    pub entropy: EntropyMode,
}

impl Scorer {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            seed: 0,
            entropy: EntropyMode::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_entropy(mut self, entropy: EntropyMode) -> Self {
        self.entropy = entropy;
        self
    }

    pub fn orientation(&self) -> Orientation {
        self.method.orientation()
    }

    /// One score per record, in record order.
    pub fn score(
        &self,
        records: &[EvalRecord],
        grid: &CellGrid,
        d: DistanceKm,
    ) -> Result<Vec<ConfidenceScore>, EvalError> {
        match self.method {
            Method::Random => Ok(selection::random_scores(records.len(), self.seed)),
            Method::Ideal => Ok(prediction_distances(records, grid)?
                .into_iter()
                .map(|dist| selection::ideal_score(dist < d, d))
                .collect()),
            _ => records.iter().map(|r| self.score_one(r, grid, d)).collect(),
        }
    }

    fn score_one(
        &self,
        record: &EvalRecord,
        grid: &CellGrid,
        d: DistanceKm,
    ) -> Result<ConfidenceScore, EvalError> {
        let wrap = |e: SelectionError| for_record(&record.image_id, e);
        match self.method {
            Method::Se => {
                selection::spatial_entropy_with(&record.dist, grid, d, self.entropy).map_err(wrap)
            }
            Method::Pd => selection::prediction_density(&record.dist, grid, d).map_err(wrap),
            Method::Sr => {
                record
                    .dist
                    .check_grid(grid)
                    .map_err(|e| for_record(&record.image_id, e))?;
                Ok(selection::softmax_response(&record.dist))
            }
            Method::Mc => {
                let passes =
                    record
                        .mc_dists
                        .as_deref()
                        .ok_or_else(|| EvalError::MissingPasses {
                            image_id: record.image_id.clone(),
                        })?;
                selection::mc_variance(passes).map_err(wrap)
            }
            Method::Random | Method::Ideal => unreachable!("scored over the whole set"),
        }
    }
}

pub fn decide(scores: &[ConfidenceScore], theta: f64) -> Vec<Decision> {
    scores.iter().map(|s| gate(s, theta)).collect()
}

/// Fraction of accepted inputs.
pub fn coverage(decisions: &[Decision]) -> Result<f64, EvalError> {
    if decisions.is_empty() {
        return Err(EvalError::Empty);
    }
    let accepted = decisions.iter().filter(|d| d.is_accept()).count();
    Ok(accepted as f64 / decisions.len() as f64)
}

/// Selective risk; undefined when nothing is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Risk {
    Defined(f64),
    NoCoverage,
}

impl Risk {
    fn from_counts(errors: usize, accepted: usize) -> Self {
        if accepted == 0 {
            Risk::NoCoverage
        } else {
            Risk::Defined(errors as f64 / accepted as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Risk::Defined(v) => Some(v),
            Risk::NoCoverage => None,
        }
    }
}

/// Error rate among accepted records at scale `d`.
pub fn risk(
    records: &[EvalRecord],
    decisions: &[Decision],
    grid: &CellGrid,
    d: DistanceKm,
) -> Result<Risk, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    if records.len() != decisions.len() {
        return Err(EvalError::Misaligned {
            records: records.len(),
            decisions: decisions.len(),
        });
    }
    let distances = prediction_distances(records, grid)?;
    let (mut accepted, mut errors) = (0, 0);
    for (dist, decision) in distances.iter().zip(decisions) {
        if decision.is_accept() {
            accepted += 1;
            errors += usize::from(*dist > d);
        }
    }
    Ok(Risk::from_counts(errors, accepted))
}

/// One knot of a risk-coverage curve, kept as integer counts so identities
/// between coverage, risk and error counts can be checked exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcPoint {
    pub theta: f64,
    pub accepted: usize,
    pub errors: usize,
    pub total: usize,
}

impl RcPoint {
    pub fn coverage(&self) -> f64 {
        self.accepted as f64 / self.total as f64
    }

    pub fn risk(&self) -> Risk {
        Risk::from_counts(self.errors, self.accepted)
    }
}

/// Sweeps the threshold over every distinct observed score, most confident
/// first, after a leading reject-all point at coverage 0.
pub fn rc_curve_from_scores(scores: &[ConfidenceScore], errors: &[bool]) -> Vec<RcPoint> {
    assert_eq!(scores.len(), errors.len(), "scores and errors must align");
    let total = scores.len();
    let Some(orientation) = scores.first().map(|s| s.orientation) else {
        return Vec::new();
    };
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| orientation.cmp_confidence(scores[a].value, scores[b].value));

    let mut points = vec![RcPoint {
        theta: orientation.reject_all(),
        accepted: 0,
        errors: 0,
        total,
    }];
    let (mut accepted, mut wrong) = (0, 0);
    let mut k = 0;
    while k < total {
        let theta = scores[order[k]].value;
        while k < total && scores[order[k]].value == theta {
            accepted += 1;
            wrong += usize::from(errors[order[k]]);
            k += 1;
        }
        points.push(RcPoint {
            theta,
            accepted,
            errors: wrong,
            total,
        });
    }
    points
}

/// Curve of the ideal selector: one knot per prefix of [`selection::ideal_rank`].
/// `theta` carries the ideal score (1 or 0) of the last accepted record.
pub fn ideal_curve(localizable: &[bool], errors: &[bool]) -> Vec<RcPoint> {
    assert_eq!(
        localizable.len(),
        errors.len(),
        "labels and errors must align"
    );
    let total = localizable.len();
    if total == 0 {
        return Vec::new();
    }
    let mut points = vec![RcPoint {
        theta: f64::INFINITY,
        accepted: 0,
        errors: 0,
        total,
    }];
    let mut wrong = 0;
    for (k, i) in selection::ideal_rank(localizable).into_iter().enumerate() {
        wrong += usize::from(errors[i]);
        points.push(RcPoint {
            theta: if localizable[i] { 1.0 } else { 0.0 },
            accepted: k + 1,
            errors: wrong,
            total,
        });
    }
    points
}

pub fn rc_curve(
    records: &[EvalRecord],
    grid: &CellGrid,
    d: DistanceKm,
    scorer: &Scorer,
) -> Result<Vec<RcPoint>, EvalError> {
    let distances = prediction_distances(records, grid)?;
    let errors: Vec<bool> = distances.iter().map(|&x| x > d).collect();
    if scorer.method == Method::Ideal {
        let labels: Vec<bool> = distances.iter().map(|&x| x < d).collect();
        return Ok(ideal_curve(&labels, &errors));
    }
    let scores = scorer.score(records, grid, d)?;
    Ok(rc_curve_from_scores(&scores, &errors))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub method: Method,
    pub scale: DistanceKm,
    pub theta_star: f64,
    pub target_coverage: f64,
    pub achieved_coverage: f64,
    pub n_validation: usize,
}

/// Threshold whose coverage matches the fraction of records the base model
/// places within `d`.
///
/// With `k` such records, the threshold is the score of the `k`-th most
/// confident record, so ties at the threshold can only widen coverage. When
/// `k == 0` nothing should be accepted and the reject-all sentinel is used.
pub fn calibrate_from_scores(
    scores: &[ConfidenceScore],
    errors: &[bool],
) -> Result<(f64, usize), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    assert_eq!(scores.len(), errors.len(), "scores and errors must align");
    let orientation = scores[0].orientation;
    let correct = errors.iter().filter(|&&e| !e).count();
    let theta = if correct == 0 {
        orientation.reject_all()
    } else {
        let mut values: Vec<f64> = scores.iter().map(|s| s.value).collect();
        values.sort_by(|&a, &b| orientation.cmp_confidence(a, b));
        values[correct - 1]
    };
    Ok((theta, correct))
}

pub fn calibrate_threshold(
    validation: &[EvalRecord],
    grid: &CellGrid,
    d: DistanceKm,
    scorer: &Scorer,
) -> Result<CalibrationResult, EvalError> {
    if scorer.method == Method::Random {
        return Err(EvalError::NotCalibratable(Method::Random));
    }
    if validation.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = validation.len();
    let errors: Vec<bool> = prediction_distances(validation, grid)?
        .into_iter()
        .map(|x| x > d)
        .collect();
    let scores = scorer.score(validation, grid, d)?;
    let (theta_star, correct) = calibrate_from_scores(&scores, &errors)?;
    let accepted = decide(&scores, theta_star)
        .iter()
        .filter(|x| x.is_accept())
        .count();
    Ok(CalibrationResult {
        method: scorer.method,
        scale: d,
        theta_star,
        target_coverage: correct as f64 / n as f64,
        achieved_coverage: accepted as f64 / n as f64,
        n_validation: n,
    })
}

/// Gate decisions against localizability labels, accept = positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn tally(decisions: &[Decision], localizable: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (d, &l) in decisions.iter().zip(localizable) {
            match (d.is_accept(), l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// F1 of the positive class; 0 when there are no positives at all.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveReport {
    pub method: Method,
    pub scale: DistanceKm,
    pub theta: f64,
    pub n: usize,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub f1: f64,
    pub optimal_risk: Risk,
    pub optimal_coverage: f64,
    pub scales: Vec<DistanceKm>,
    pub accuracy_all: Vec<f64>,
    /// `None` when the accepted subset is empty.
    pub accuracy_accepted: Option<Vec<f64>>,
    /// `None` when the rejected subset is empty.
    pub accuracy_rejected: Option<Vec<f64>>,
}

pub fn selective_report(
    records: &[EvalRecord],
    grid: &CellGrid,
    d: DistanceKm,
    scorer: &Scorer,
    theta: f64,
) -> Result<SelectiveReport, EvalError> {
    selective_report_at_scales(records, grid, d, scorer, theta, &report_scales())
}

pub fn selective_report_at_scales(
    records: &[EvalRecord],
    grid: &CellGrid,
    d: DistanceKm,
    scorer: &Scorer,
    theta: f64,
    scales: &[DistanceKm],
) -> Result<SelectiveReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let distances = prediction_distances(records, grid)?;
    let scores = scorer.score(records, grid, d)?;
    let decisions = decide(&scores, theta);
    let labels: Vec<bool> = distances.iter().map(|&x| x < d).collect();
    let confusion = Confusion::tally(&decisions, &labels);

    let accepted = decisions.iter().filter(|x| x.is_accept()).count();
    let errors = distances
        .iter()
        .zip(&decisions)
        .filter(|(&x, dec)| dec.is_accept() && x > d)
        .count();

    let subset = |keep: bool| -> Vec<DistanceKm> {
        distances
            .iter()
            .zip(&decisions)
            .filter(|(_, dec)| dec.is_accept() == keep)
            .map(|(&x, _)| x)
            .collect()
    };
    let accepted_distances = subset(true);
    let rejected_distances = subset(false);

    Ok(SelectiveReport {
        method: scorer.method,
        scale: d,
        theta,
        n: records.len(),
        confusion,
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        optimal_risk: Risk::from_counts(errors, accepted),
        optimal_coverage: accepted as f64 / records.len() as f64,
        scales: scales.to_vec(),
        accuracy_all: accuracy_from_distances(&distances, scales),
        accuracy_accepted: (!accepted_distances.is_empty())
            .then(|| accuracy_from_distances(&accepted_distances, scales)),
        accuracy_rejected: (!rejected_distances.is_empty())
            .then(|| accuracy_from_distances(&rejected_distances, scales)),
    })
}

fn accuracy_from_distances(distances: &[DistanceKm], scales: &[DistanceKm]) -> Vec<f64> {
    scales
        .iter()
        .map(|&d| distances.iter().filter(|&&x| x <= d).count() as f64 / distances.len() as f64)
        .collect()
}

/// Fraction of records predicted within `d` (inclusive) of the truth, per
/// scale.
pub fn geolocation_accuracy(
    records: &[EvalRecord],
    grid: &CellGrid,
    scales: &[DistanceKm],
) -> Result<Vec<f64>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(accuracy_from_distances(
        &prediction_distances(records, grid)?,
        scales,
    ))
}

/// Partitions records by the gate: accepted (localizable) first, rejected
/// second, each in input order.
pub fn split_dataset<'a>(
    records: &'a [EvalRecord],
    grid: &CellGrid,
    d: DistanceKm,
    scorer: &Scorer,
    theta: f64,
) -> Result<(Vec<&'a EvalRecord>, Vec<&'a EvalRecord>), EvalError> {
    let scores = scorer.score(records, grid, d)?;
    Ok(records.iter().zip(decide(&scores, theta)).fold(
        (Vec::new(), Vec::new()),
        |(mut l, mut n), (r, dec)| {
            if dec.is_accept() {
                l.push(r);
            } else {
                n.push(r);
            }
            (l, n)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellgrid::{build_partition, CellId, PartitionParams};
    use crate::distribution::CellDistribution;

    fn km(v: f64) -> DistanceKm {
        DistanceKm::new(v).unwrap()
    }

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn one_cell_grid() -> (CellGrid, CellId) {
        let params = PartitionParams {
            min_count: 1,
            max_count: 10,
            max_depth: 4,
        };
        let g = build_partition(&[pt(10.0, 20.0)], params).unwrap().grid;
        let id = g.cells()[0].id;
        (g, id)
    }

    /// Records predicted at (10, 20) with truths at the given distances due
    /// north.
    fn records_at(distances_km: &[f64]) -> (CellGrid, Vec<EvalRecord>) {
        let (g, id) = one_cell_grid();
        let origin = pt(10.0, 20.0);
        let recs = distances_km
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let truth = origin.destination(0.0, km(x));
                let dist = CellDistribution::validate([(id, 1.0)], &g).unwrap();
                EvalRecord::new(format!("r{i}"), truth, dist, None).unwrap()
            })
            .collect();
        (g, recs)
    }

    #[test]
    fn labels_use_strict_comparison() {
        let (g, recs) = records_at(&[0.0, 26.0]);
        let at25 = label_localizability(&recs, &g, km(25.0)).unwrap();
        assert!(at25[0].localizable);
        assert!(!at25[1].localizable);
        let at200 = label_localizability(&recs, &g, km(200.0)).unwrap();
        assert!(at200[1].localizable);

        let a = pt(0.0, 0.0);
        let b = pt(0.0, 1.0);
        let exact = gcd(a, b);
        assert!(!is_localizable(a, b, exact));
        assert_eq!(loss(a, b, exact), 0);
        assert_eq!(loss(a, a, km(0.0)), 0);
        assert_eq!(loss(a, pt(0.0, 180.0), km(25.0)), 1);
    }

    #[test]
    fn coverage_examples() {
        use Decision::*;
        assert_eq!(coverage(&[Accept, Accept]).unwrap(), 1.0);
        assert_eq!(coverage(&[Abstain, Abstain]).unwrap(), 0.0);
        assert_eq!(coverage(&[Accept, Accept, Abstain, Accept]).unwrap(), 0.75);
        assert_eq!(coverage(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn risk_examples() {
        use Decision::*;
        let (g, recs) = records_at(&[0.0, 100.0, 0.0, 100.0]);
        let d = km(25.0);
        assert_eq!(
            risk(&recs[..1], &[Accept], &g, d).unwrap(),
            Risk::Defined(0.0)
        );
        assert_eq!(
            risk(&recs, &[Accept, Accept, Abstain, Abstain], &g, d).unwrap(),
            Risk::Defined(0.5)
        );
        assert_eq!(risk(&recs, &[Abstain; 4], &g, d).unwrap(), Risk::NoCoverage);
        assert!(matches!(
            risk(&recs, &[Accept], &g, d),
            Err(EvalError::Misaligned { .. })
        ));
        assert_eq!(risk(&[], &[], &g, d), Err(EvalError::Empty));
    }

    fn scores(method: Method, values: &[f64]) -> Vec<ConfidenceScore> {
        values
            .iter()
            .map(|&value| ConfidenceScore {
                value,
                orientation: method.orientation(),
                method,
                scale: None,
            })
            .collect()
    }

    #[test]
    fn rc_curve_single_record() {
        let pts = rc_curve_from_scores(&scores(Method::Pd, &[0.8]), &[false]);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].coverage(), 0.0);
        assert_eq!(pts[0].risk(), Risk::NoCoverage);
        assert_eq!(pts[1].coverage(), 1.0);
        assert_eq!(pts[1].risk(), Risk::Defined(0.0));
    }

    #[test]
    fn rc_curve_perfect_separator() {
        // score == correctness indicator
        let errors = [true, false, false, true, false, true, true, true];
        let values: Vec<f64> = errors.iter().map(|&e| if e { 0.0 } else { 1.0 }).collect();
        let pts = rc_curve_from_scores(&scores(Method::Pd, &values), &errors);
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[1].accepted, 3);
        assert_eq!(pts[1].risk(), Risk::Defined(0.0));
        assert_eq!(pts[2].errors, 5);

        // lower-is-confident orientation mirrors it
        let flipped: Vec<f64> = values.iter().map(|v| 1.0 - v).collect();
        let pts2 = rc_curve_from_scores(&scores(Method::Se, &flipped), &errors);
        assert_eq!(pts2[1].accepted, 3);
        assert_eq!(pts2[0].theta, f64::NEG_INFINITY);
    }

    #[test]
    fn ideal_curve_matches_closed_form() {
        let labels = [false, true, false, true, true, false, false];
        let errors: Vec<bool> = labels.iter().map(|l| !l).collect();
        let acc = 3.0 / 7.0;
        for p in ideal_curve(&labels, &errors).iter().skip(1) {
            let c = p.coverage();
            let expect = f64::max(0.0, (c - acc) / c);
            assert!((p.risk().value().unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_order_statistic() {
        // 4 of 10 correct, distinct scores
        let errors = [
            true, false, true, false, true, true, false, true, false, true,
        ];
        let values = [0.1, 0.9, 0.35, 0.7, 0.2, 0.4, 0.8, 0.3, 0.6, 0.5];
        let s = scores(Method::Pd, &values);
        let (theta, k) = calibrate_from_scores(&s, &errors).unwrap();
        assert_eq!(k, 4);
        assert_eq!(theta, 0.6);
        assert_eq!(coverage(&decide(&s, theta)).unwrap(), 0.4);

        let (theta, _) = calibrate_from_scores(&s, &[false; 10]).unwrap();
        assert_eq!(theta, 0.1);

        let same = scores(Method::Pd, &[0.5; 10]);
        let (theta, _) = calibrate_from_scores(&same, &errors).unwrap();
        assert_eq!(coverage(&decide(&same, theta)).unwrap(), 1.0);

        let (theta, _) = calibrate_from_scores(&s, &[true; 10]).unwrap();
        assert_eq!(coverage(&decide(&s, theta)).unwrap(), 0.0);
        assert_eq!(calibrate_from_scores(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn calibrate_rejects_random() {
        let (g, recs) = records_at(&[0.0]);
        assert_eq!(
            calibrate_threshold(&recs, &g, km(25.0), &Scorer::new(Method::Random)),
            Err(EvalError::NotCalibratable(Method::Random))
        );
        assert_eq!(
            calibrate_threshold(&[], &g, km(25.0), &Scorer::new(Method::Sr)),
            Err(EvalError::Empty)
        );
    }

    #[test]
    fn confusion_metrics() {
        let c = Confusion {
            tp: 2,
            fp: 1,
            tn: 4,
            fn_: 1,
        };
        assert_eq!(c.total(), 8);
        assert_eq!(c.accuracy(), 0.75);
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(Confusion::default().f1(), 0.0);
    }

    #[test]
    fn accuracy_by_scale() {
        let (g, recs) = records_at(&[0.0, 30.0, 300.0, 3000.0]);
        let acc =
            geolocation_accuracy(&recs, &g, &[km(25.0), km(200.0), km(750.0), km(2500.0)]).unwrap();
        assert_eq!(acc, vec![0.25, 0.5, 0.75, 0.75]);
        assert_eq!(
            geolocation_accuracy(&[], &g, &[km(1.0)]),
            Err(EvalError::Empty)
        );
    }

    #[test]
    fn report_with_accept_all() {
        let (g, recs) = records_at(&[0.0, 30.0, 300.0, 3000.0, 5.0]);
        let scorer = Scorer::new(Method::Sr);
        let r = selective_report(&recs, &g, km(25.0), &scorer, f64::NEG_INFINITY).unwrap();
        let a = 2.0 / 5.0;
        assert_eq!(r.optimal_coverage, 1.0);
        assert!((r.optimal_risk.value().unwrap() - (1.0 - a)).abs() < 1e-15);
        assert!((r.f1 - 2.0 * a / (1.0 + a)).abs() < 1e-15);
        assert_eq!(r.confusion.total(), 5);
        assert!(r.accuracy_rejected.is_none());
        assert_eq!(r.accuracy_accepted.as_ref().unwrap(), &r.accuracy_all);

        let none = selective_report(&recs, &g, km(25.0), &scorer, f64::INFINITY).unwrap();
        assert_eq!(none.optimal_risk, Risk::NoCoverage);
        assert!(none.accuracy_accepted.is_none());
    }

    #[test]
    fn split_extremes() {
        let (g, recs) = records_at(&[0.0, 30.0, 300.0]);
        let scorer = Scorer::new(Method::Pd);
        let (l, n) = split_dataset(&recs, &g, km(25.0), &scorer, f64::NEG_INFINITY).unwrap();
        assert_eq!((l.len(), n.len()), (3, 0));
        let (l, n) = split_dataset(&recs, &g, km(25.0), &scorer, f64::INFINITY).unwrap();
        assert_eq!((l.len(), n.len()), (0, 3));
    }

    #[test]
    fn mc_without_passes_names_the_record() {
        let (g, recs) = records_at(&[0.0]);
        assert_eq!(
            Scorer::new(Method::Mc).score(&recs, &g, km(25.0)),
            Err(EvalError::MissingPasses {
                image_id: "r0".into()
            })
        );
    }
}
