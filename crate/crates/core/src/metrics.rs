//! Verification metrics: same/different pair sets, acceptance and rejection
//! rates per threshold, the equal error rate, and distance histograms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{io_err, Error, Result};
use crate::ops::euclidean_distance;
use crate::textfmt::format_f64;

/// A scored unordered record pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub a: (String, String),
    pub b: (String, String),
    pub distance: f64,
}

/// All unordered cross-record pairs of a dataset, split by subject equality.
#[derive(Debug, Clone)]
pub struct PairSet {
    same: Vec<ScoredPair>,
    diff: Vec<ScoredPair>,
}

impl PairSet {
    /// Pairs of records that share a subject.
    pub fn same_pairs(&self) -> &[ScoredPair] {
        &self.same
    }

    /// Pairs of records with different subjects.
    pub fn diff_pairs(&self) -> &[ScoredPair] {
        &self.diff
    }

    /// Builds a pair set from bare distances, for synthetic evaluations
    /// where no records exist. Keys are fabricated accordingly.
    pub fn from_distances(same: Vec<f64>, diff: Vec<f64>) -> Result<Self> {
        for d in same.iter().chain(&diff) {
            if !d.is_finite() || *d < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "pair distances must be finite and non-negative, got {d}"
                )));
            }
        }
        let same = same
            .into_iter()
            .enumerate()
            .map(|(k, distance)| ScoredPair {
                a: (format!("s{k}"), "a".into()),
                b: (format!("s{k}"), "b".into()),
                distance,
            })
            .collect();
        let diff = diff
            .into_iter()
            .enumerate()
            .map(|(k, distance)| ScoredPair {
                a: (format!("da{k}"), "a".into()),
                b: (format!("db{k}"), "a".into()),
                distance,
            })
            .collect();
        Ok(Self { same, diff })
    }
}

/// Enumerates every unordered pair of distinct records, classifying by
/// subject equality. Quadratic in the dataset size.
pub fn build_pairs(dataset: &Dataset) -> Result<PairSet> {
    let records = dataset.records();
    if records.len() < 2 {
        return Err(Error::TooFewRecords {
            need: 2,
            found: records.len(),
        });
    }
    let mut same = Vec::new();
    let mut diff = Vec::new();
    for i in 0..records.len() {
        for j in (i + 1)..records.len() {
            let pair = ScoredPair {
                a: (records[i].subject_id.clone(), records[i].image_id.clone()),
                b: (records[j].subject_id.clone(), records[j].image_id.clone()),
                distance: euclidean_distance(&records[i].vector, &records[j].vector)?,
            };
            if records[i].subject_id == records[j].subject_id {
                same.push(pair);
            } else {
                diff.push(pair);
            }
        }
    }
    Ok(PairSet { same, diff })
}

/// False accept rate: the fraction of different-subject pairs at distance
/// less than or equal to the threshold.
pub fn far_at(pairs: &PairSet, threshold: f64) -> Result<f64> {
    if pairs.diff.is_empty() {
        return Err(Error::EmptyPairs {
            which: "different-subject",
        });
    }
    let accepted = pairs
        .diff
        .iter()
        .filter(|p| p.distance <= threshold)
        .count();
    Ok(accepted as f64 / pairs.diff.len() as f64)
}

/// False reject rate: the fraction of same-subject pairs at distance
/// strictly greater than the threshold.
pub fn frr_at(pairs: &PairSet, threshold: f64) -> Result<f64> {
    if pairs.same.is_empty() {
        return Err(Error::EmptyPairs {
            which: "same-subject",
        });
    }
    let rejected = pairs.same.iter().filter(|p| p.distance > threshold).count();
    Ok(rejected as f64 / pairs.same.len() as f64)
}

/// FAR and FRR sampled over a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    thresholds: Vec<f64>,
    far: Vec<f64>,
    frr: Vec<f64>,
}

impl EvalCurve {
    /// Validates the grid (finite, strictly increasing, non-empty) and the
    /// rate sequences (inside [0, 1], far non-decreasing, frr
    /// non-increasing).
    pub fn new(thresholds: Vec<f64>, far: Vec<f64>, frr: Vec<f64>) -> Result<Self> {
        check_grid(&thresholds)?;
        if far.len() != thresholds.len() || frr.len() != thresholds.len() {
            return Err(Error::DimensionMismatch {
                expected: thresholds.len(),
                got: far.len().min(frr.len()),
            });
        }
        for rates in [&far, &frr] {
            if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::InvalidConfig("rates must lie inside [0, 1]".into()));
            }
        }
        if far.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig(
                "far must be non-decreasing in the threshold".into(),
            ));
        }
        if frr.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(
                "frr must be non-increasing in the threshold".into(),
            ));
        }
        Ok(Self {
            thresholds,
            far,
            frr,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn far(&self) -> &[f64] {
        &self.far
    }

    pub fn frr(&self) -> &[f64] {
        &self.frr
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

fn check_grid(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty()
        || thresholds.iter().any(|t| !t.is_finite())
        || thresholds.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// `size` evenly spaced thresholds from 0 to `max` inclusive.
pub fn linear_grid(max: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid size must be at least 2, got {size}"
        )));
    }
    if !max.is_finite() || max <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "grid upper end must be positive and finite, got {max}"
        )));
    }
    Ok((0..size)
        .map(|i| max * i as f64 / (size - 1) as f64)
        .collect())
}

/// Samples FAR and FRR over a strictly increasing threshold grid.
pub fn curve(pairs: &PairSet, thresholds: &[f64]) -> Result<EvalCurve> {
    check_grid(thresholds)?;
    let mut far = Vec::with_capacity(thresholds.len());
    let mut frr = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        far.push(far_at(pairs, t)?);
        frr.push(frr_at(pairs, t)?);
    }
    EvalCurve::new(thresholds.to_vec(), far, frr)
}

/// The equal error rate and the threshold it occurs at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate by linear interpolation at the sign change of
/// far - frr, which is non-decreasing along the grid.
///
/// An exact zero at a grid point is returned as-is. If the difference never
/// reaches zero inside the grid, or is already positive at its left end,
/// the crossing lies outside and an error asks for a wider grid.
pub fn eer(curve: &EvalCurve) -> Result<EerResult> {
    let (thresholds, far, frr) = (curve.thresholds(), curve.far(), curve.frr());
    let mut hi = None;
    for i in 0..curve.len() {
        let d = far[i] - frr[i];
        if d == 0.0 {
            return Ok(EerResult {
                eer: far[i],
                threshold: thresholds[i],
            });
        }
        if d > 0.0 {
            hi = Some(i);
            break;
        }
    }
    let hi = hi.ok_or(Error::NoEerCrossing)?;
    if hi == 0 {
        return Err(Error::NoEerCrossing);
    }
    let lo = hi - 1;
    let d_lo = far[lo] - frr[lo]; // < 0
    let d_hi = far[hi] - frr[hi]; // > 0
    let t = d_lo / (d_lo - d_hi); // in (0, 1)
    let threshold = thresholds[lo] + t * (thresholds[hi] - thresholds[lo]);
    // the interpolated far and frr agree up to rounding; average them out
    let far_x = far[lo] + t * (far[hi] - far[lo]);
    let frr_x = frr[lo] + t * (frr[hi] - frr[lo]);
    Ok(EerResult {
        eer: 0.5 * (far_x + frr_x),
        threshold,
    })
}

/// Same-subject and different-subject distance counts over shared
/// equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHistograms {
    /// `bins + 1` edges spanning the combined distance range.
    pub bin_edges: Vec<f64>,
    pub intra: Vec<u64>,
    pub inter: Vec<u64>,
}

/// Bins all pair distances into `bins` equal-width bins over the combined
/// range. When every distance is identical the range is a point and
/// everything lands in the first bin. The top edge is inclusive.
pub fn distance_histograms(pairs: &PairSet, bins: usize) -> Result<DistanceHistograms> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be at least 1".into()));
    }
    let all = || pairs.same.iter().chain(&pairs.diff).map(|p| p.distance);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut count = 0usize;
    for d in all() {
        lo = lo.min(d);
        hi = hi.max(d);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyPairs { which: "any" });
    }
    let bin_edges: Vec<f64> = (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect();
    let index = |d: f64| -> usize {
        if hi == lo {
            return 0;
        }
        let raw = ((d - lo) / (hi - lo) * bins as f64).floor() as usize;
        raw.min(bins - 1)
    };
    let mut intra = vec![0u64; bins];
    let mut inter = vec![0u64; bins];
    for p in &pairs.same {
        intra[index(p.distance)] += 1;
    }
    for p in &pairs.diff {
        inter[index(p.distance)] += 1;
    }
    Ok(DistanceHistograms {
        bin_edges,
        intra,
        inter,
    })
}

/// Writes `threshold,far,frr` rows in grid order.
pub fn write_curve_csv(curve: &EvalCurve, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "threshold,far,frr")?;
        for i in 0..curve.len() {
            writeln!(
                w,
                "{},{},{}",
                format_f64(curve.thresholds[i]),
                format_f64(curve.far[i]),
                format_f64(curve.frr[i])
            )?;
        }
        w.flush()
    };
    inner(&mut w).map_err(io_err(path))
}

/// Writes the equal error rate summary together with the pair counts it was
/// measured over.
pub fn write_eer_json(result: &EerResult, n_same: usize, n_diff: usize, path: &Path) -> Result<()> {
    let json = format!(
        "{{\n  \"eer\": {},\n  \"threshold\": {},\n  \"n_same\": {},\n  \"n_diff\": {}\n}}\n",
        format_f64(result.eer),
        format_f64(result.threshold),
        n_same,
        n_diff
    );
    std::fs::write(path, json).map_err(io_err(path))
}

/// Writes `bin_lo,bin_hi,intra_count,inter_count` rows in bin order.
pub fn write_histograms_csv(hist: &DistanceHistograms, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,intra_count,inter_count")?;
        for i in 0..hist.intra.len() {
            writeln!(
                w,
                "{},{},{},{}",
                format_f64(hist.bin_edges[i]),
                format_f64(hist.bin_edges[i + 1]),
                hist.intra[i],
                hist.inter[i]
            )?;
        }
        w.flush()
    };
    inner(&mut w).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use crate::dataset::EmbeddingRecord;

    use super::*;

    fn two_by_two() -> Dataset {
        Dataset::new(vec![
            EmbeddingRecord::new("a", "1", vec![0.0, 0.0]).unwrap(),
            EmbeddingRecord::new("a", "2", vec![1.0, 0.0]).unwrap(),
            EmbeddingRecord::new("b", "1", vec![0.0, 3.0]).unwrap(),
            EmbeddingRecord::new("b", "2", vec![0.0, 4.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn pair_enumeration_matches_hand_count() {
        // 4 records: C(4,2) = 6 pairs, 2 same-subject, 4 cross-subject
        let pairs = build_pairs(&two_by_two()).unwrap();
        assert_eq!(pairs.same_pairs().len(), 2);
        assert_eq!(pairs.diff_pairs().len(), 4);

        let same_dists: Vec<f64> = pairs.same_pairs().iter().map(|p| p.distance).collect();
        assert_eq!(same_dists, vec![1.0, 1.0]);
    }

    #[test]
    fn single_record_has_no_pairs() {
        let ds = Dataset::new(vec![EmbeddingRecord::new("a", "1", vec![0.0]).unwrap()]).unwrap();
        assert!(matches!(
            build_pairs(&ds),
            Err(Error::TooFewRecords { need: 2, found: 1 })
        ));
    }

    #[test]
    fn rates_at_boundary_thresholds_saturate() {
        let pairs = PairSet::from_distances(vec![0.5, 1.5], vec![1.0, 2.0]).unwrap();
        // below every distance
        assert_eq!(far_at(&pairs, 0.1).unwrap(), 0.0);
        assert_eq!(frr_at(&pairs, 0.1).unwrap(), 1.0);
        // at or above every distance
        assert_eq!(far_at(&pairs, 2.0).unwrap(), 1.0);
        assert_eq!(frr_at(&pairs, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn rates_match_two_point_oracles() {
        let pairs = PairSet::from_distances(vec![0.5, 1.5], vec![1.0, 2.0]).unwrap();
        assert_eq!(far_at(&pairs, 1.2).unwrap(), 0.5);
        assert_eq!(frr_at(&pairs, 1.2).unwrap(), 0.5);
    }

    #[test]
    fn rates_are_exact_count_ratios() {
        let mut rng = StdRng::seed_from_u64(41);
        let diff: Vec<f64> = (0..97).map(|_| rng.random_range(0.0..3.0)).collect();
        let pairs = PairSet::from_distances(vec![1.0], diff.clone()).unwrap();
        for t in [0.3, 1.1, 2.5] {
            let expected = diff.iter().filter(|d| **d <= t).count();
            let far = far_at(&pairs, t).unwrap();
            assert_eq!((far * 97.0).round() as usize, expected);
            assert!((far - expected as f64 / 97.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sides_are_rejected() {
        let pairs = PairSet::from_distances(vec![1.0], vec![]).unwrap();
        assert!(matches!(far_at(&pairs, 1.0), Err(Error::EmptyPairs { .. })));
        let pairs = PairSet::from_distances(vec![], vec![1.0]).unwrap();
        assert!(matches!(frr_at(&pairs, 1.0), Err(Error::EmptyPairs { .. })));
    }

    #[test]
    fn negative_or_non_finite_distances_are_rejected() {
        assert!(PairSet::from_distances(vec![-0.1], vec![]).is_err());
        assert!(PairSet::from_distances(vec![], vec![f64::NAN]).is_err());
    }

    #[test]
    fn curve_spanning_the_range_saturates_at_the_ends() {
        let pairs = PairSet::from_distances(vec![0.5, 0.7], vec![1.5, 2.0]).unwrap();
        let grid = linear_grid(3.0, 7).unwrap();
        let cv = curve(&pairs, &grid).unwrap();
        assert_eq!(cv.far()[0], 0.0);
        assert_eq!(cv.frr()[0], 1.0);
        assert_eq!(*cv.far().last().unwrap(), 1.0);
        assert_eq!(*cv.frr().last().unwrap(), 0.0);
    }

    #[test]
    fn single_threshold_grid_yields_length_one_curve() {
        let pairs = PairSet::from_distances(vec![0.5], vec![1.5]).unwrap();
        let cv = curve(&pairs, &[1.0]).unwrap();
        assert_eq!(cv.len(), 1);
        assert_eq!(cv.far()[0], 0.0);
        assert_eq!(cv.frr()[0], 0.0);
    }

    #[test]
    fn curve_rejects_unsorted_grids() {
        let pairs = PairSet::from_distances(vec![0.5], vec![1.5]).unwrap();
        assert!(matches!(curve(&pairs, &[1.0, 0.5]), Err(Error::BadGrid)));
        assert!(matches!(curve(&pairs, &[1.0, 1.0]), Err(Error::BadGrid)));
        assert!(matches!(curve(&pairs, &[]), Err(Error::BadGrid)));
        assert!(matches!(
            curve(&pairs, &[0.0, f64::NAN]),
            Err(Error::BadGrid)
        ));
    }

    #[test]
    fn curve_recount_matches_on_a_large_grid() {
        let mut rng = StdRng::seed_from_u64(42);
        let same: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..2.0)).collect();
        let diff: Vec<f64> = (0..600).map(|_| rng.random_range(0.5..3.0)).collect();
        let pairs = PairSet::from_distances(same.clone(), diff.clone()).unwrap();
        let grid = linear_grid(3.5, 1000).unwrap();
        let cv = curve(&pairs, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let fa = diff.iter().filter(|d| **d <= t).count() as f64 / diff.len() as f64;
            let fr = same.iter().filter(|d| **d > t).count() as f64 / same.len() as f64;
            assert_eq!(cv.far()[i], fa, "far at threshold {t}");
            assert_eq!(cv.frr()[i], fr, "frr at threshold {t}");
        }
    }

    #[test]
    fn linear_grid_spans_zero_to_max() {
        let grid = linear_grid(2.0, 5).unwrap();
        assert_eq!(grid, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(linear_grid(2.0, 1).is_err());
        assert!(linear_grid(0.0, 5).is_err());
        assert!(linear_grid(-1.0, 5).is_err());
    }

    #[test]
    fn eer_returns_exact_grid_point_when_rates_meet() {
        let cv = EvalCurve::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.5, 1.0],
            vec![1.0, 0.5, 0.0],
        )
        .unwrap();
        let r = eer(&cv).unwrap();
        assert_eq!(r.eer, 0.5);
        assert_eq!(r.threshold, 1.0);
    }

    #[test]
    fn eer_interpolates_symmetric_crossing_at_half() {
        let cv = EvalCurve::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let r = eer(&cv).unwrap();
        assert!((r.eer - 0.5).abs() < 1e-15);
        assert!((r.threshold - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eer_interpolates_asymmetric_crossing() {
        // far - frr goes from -0.6 to +0.2: crossing three quarters in
        let cv = EvalCurve::new(vec![1.0, 2.0], vec![0.2, 0.6], vec![0.8, 0.4]).unwrap();
        let r = eer(&cv).unwrap();
        let t = 0.6 / 0.8;
        assert!((r.threshold - (1.0 + t)).abs() < 1e-15);
        assert!((r.eer - (0.2 + t * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn eer_without_a_crossing_is_an_error() {
        // far stays below frr across the whole grid
        let cv = EvalCurve::new(vec![0.0, 1.0], vec![0.0, 0.1], vec![0.9, 0.8]).unwrap();
        assert!(matches!(eer(&cv), Err(Error::NoEerCrossing)));

        // already crossed before the grid: far > frr at the left end
        let cv = EvalCurve::new(vec![0.0, 1.0], vec![0.5, 0.9], vec![0.2, 0.1]).unwrap();
        assert!(matches!(eer(&cv), Err(Error::NoEerCrossing)));
    }

    #[test]
    fn eer_matches_exhaustive_sweep_on_gaussian_scores() {
        use rand_distr::{Distribution, Normal};

        let mut rng = StdRng::seed_from_u64(43);
        let same_d: Normal<f64> = Normal::new(1.0, 0.2).unwrap();
        let diff_d: Normal<f64> = Normal::new(2.0, 0.2).unwrap();
        let same: Vec<f64> = (0..2000).map(|_| same_d.sample(&mut rng).abs()).collect();
        let diff: Vec<f64> = (0..2000).map(|_| diff_d.sample(&mut rng).abs()).collect();
        let pairs = PairSet::from_distances(same.clone(), diff.clone()).unwrap();

        let max = same.iter().chain(&diff).fold(0.0f64, |acc, d| acc.max(*d));
        let grid = linear_grid(max, 512).unwrap();
        let cv = curve(&pairs, &grid).unwrap();
        let r = eer(&cv).unwrap();

        // oracle: evaluate both rates at every observed distance and take
        // the threshold where they come closest
        let mut candidates: Vec<f64> = same.iter().chain(&diff).copied().collect();
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rates = |t: f64| {
            let fa = diff.iter().filter(|d| **d <= t).count() as f64 / diff.len() as f64;
            let fr = same.iter().filter(|d| **d > t).count() as f64 / same.len() as f64;
            (fa, fr)
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &t in &candidates {
            let (fa, fr) = rates(t);
            if (fa - fr).abs() < best.0 {
                best = ((fa - fr).abs(), t, (fa + fr) / 2.0);
            }
        }
        let (_, sweep_t, sweep_eer) = best;

        let step = grid[1] - grid[0];
        // the sweep threshold sits on an observed distance, the interpolated
        // one inside a grid cell; both bracket the same crossing
        assert!(
            (r.threshold - sweep_t).abs() <= 2.0 * step,
            "interpolated threshold {} vs sweep {sweep_t}, step {step}",
            r.threshold
        );
        // tolerance: the probability mass a single grid step can hide
        let (fa_lo, fr_lo) = rates(sweep_t - step);
        let (fa_hi, fr_hi) = rates(sweep_t + step);
        let tol = (fa_hi - fa_lo) + (fr_lo - fr_hi) + 1e-12;
        assert!(
            (r.eer - sweep_eer).abs() <= tol,
            "eer {} vs sweep {sweep_eer}, tol {tol}",
            r.eer
        );
    }

    #[test]
    fn eer_is_stable_under_grid_refinement() {
        use rand_distr::{Distribution, Normal};

        let mut rng = StdRng::seed_from_u64(44);
        let same_d: Normal<f64> = Normal::new(1.0, 0.3).unwrap();
        let diff_d: Normal<f64> = Normal::new(2.0, 0.3).unwrap();
        let same: Vec<f64> = (0..1500).map(|_| same_d.sample(&mut rng).abs()).collect();
        let diff: Vec<f64> = (0..1500).map(|_| diff_d.sample(&mut rng).abs()).collect();
        let pairs = PairSet::from_distances(same.clone(), diff.clone()).unwrap();
        let max = same.iter().chain(&diff).fold(0.0f64, |acc, d| acc.max(*d));

        let coarse = eer(&curve(&pairs, &linear_grid(max, 512).unwrap()).unwrap()).unwrap();
        let fine = eer(&curve(&pairs, &linear_grid(max, 2048).unwrap()).unwrap()).unwrap();

        // the coarse estimate may be off by at most the rate mass inside
        // one coarse step around the crossing
        let step = max / 511.0;
        let mass = |t: f64| {
            let fa = |x: f64| diff.iter().filter(|d| **d <= x).count() as f64 / 1500.0;
            let fr = |x: f64| same.iter().filter(|d| **d > x).count() as f64 / 1500.0;
            (fa(t + step) - fa(t - step)) + (fr(t - step) - fr(t + step))
        };
        assert!(
            (coarse.eer - fine.eer).abs() <= mass(fine.threshold) + 1e-12,
            "coarse {} vs fine {}",
            coarse.eer,
            fine.eer
        );
        assert!((coarse.threshold - fine.threshold).abs() <= 2.0 * step);
    }

    #[test]
    fn histograms_cover_all_pairs_and_respect_edges() {
        let same = vec![0.0, 0.5, 1.0];
        let diff = vec![2.0, 3.0, 4.0];
        let pairs = PairSet::from_distances(same, diff).unwrap();
        let h = distance_histograms(&pairs, 4).unwrap();
        assert_eq!(h.bin_edges, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        // bins are half-open below the top: 1.0 falls into bin 1, 2.0 into
        // bin 2, and the maximum 4.0 clamps into the last bin
        assert_eq!(h.intra, vec![2, 1, 0, 0]);
        assert_eq!(h.inter, vec![0, 0, 1, 2]);
        let total: u64 = h.intra.iter().chain(&h.inter).sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn histograms_match_brute_force_binning() {
        let mut rng = StdRng::seed_from_u64(45);
        let same: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..2.0)).collect();
        let diff: Vec<f64> = (0..500).map(|_| rng.random_range(1.0..4.0)).collect();
        let pairs = PairSet::from_distances(same.clone(), diff.clone()).unwrap();
        let bins = 17;
        let h = distance_histograms(&pairs, bins).unwrap();

        let lo = same
            .iter()
            .chain(&diff)
            .fold(f64::INFINITY, |a, d| a.min(*d));
        let hi = same
            .iter()
            .chain(&diff)
            .fold(f64::NEG_INFINITY, |a, d| a.max(*d));
        let mut intra = vec![0u64; bins];
        let mut inter = vec![0u64; bins];
        for d in &same {
            let i = (((d - lo) / (hi - lo)) * bins as f64).floor() as usize;
            intra[i.min(bins - 1)] += 1;
        }
        for d in &diff {
            let i = (((d - lo) / (hi - lo)) * bins as f64).floor() as usize;
            inter[i.min(bins - 1)] += 1;
        }
        assert_eq!(h.intra, intra);
        assert_eq!(h.inter, inter);
        assert_eq!(h.intra.iter().sum::<u64>(), 300);
        assert_eq!(h.inter.iter().sum::<u64>(), 500);
    }

    #[test]
    fn degenerate_range_lands_everything_in_the_first_bin() {
        let pairs = PairSet::from_distances(vec![1.0, 1.0], vec![1.0]).unwrap();
        let h = distance_histograms(&pairs, 8).unwrap();
        assert_eq!(h.intra[0], 2);
        assert_eq!(h.inter[0], 1);
        assert_eq!(h.intra.iter().sum::<u64>(), 2);
        assert_eq!(h.inter.iter().sum::<u64>(), 1);
    }

    #[test]
    fn histograms_require_pairs_and_bins() {
        let empty = PairSet::from_distances(vec![], vec![]).unwrap();
        assert!(matches!(
            distance_histograms(&empty, 4),
            Err(Error::EmptyPairs { .. })
        ));
        let pairs = PairSet::from_distances(vec![1.0], vec![2.0]).unwrap();
        assert!(matches!(
            distance_histograms(&pairs, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn far_is_monotone_and_frr_antitone(
            same in prop::collection::vec(0.0f64..5.0, 1..40),
            diff in prop::collection::vec(0.0f64..5.0, 1..40),
            mut ts in prop::collection::vec(-1.0f64..6.0, 2..20),
        ) {
            let pairs = PairSet::from_distances(same, diff).unwrap();
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev_far = -1.0;
            let mut prev_frr = 2.0;
            for &t in &ts {
                let fa = far_at(&pairs, t).unwrap();
                let fr = frr_at(&pairs, t).unwrap();
                prop_assert!(fa >= prev_far);
                prop_assert!(fr <= prev_frr);
                prop_assert!((0.0..=1.0).contains(&fa));
                prop_assert!((0.0..=1.0).contains(&fr));
                prev_far = fa;
                prev_frr = fr;
            }
        }
    }
}
