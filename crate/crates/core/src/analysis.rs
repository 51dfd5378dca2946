//! Post-run analysis: histograms, the forager/loafer split, the binomial
//! comparison of forager counts and the capability preference map.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::allocation::ObjectType;
use crate::experiment::RunResult;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("no run results to analyse")]
    NoResults,
    #[error("no forager counts to compare")]
    EmptyCounts,
    #[error("forager count {count} exceeds robot count {robot_count}")]
    CountOutOfRange { count: usize, robot_count: usize },
    #[error("histogram needs at least 2 bins and low < high")]
    BadHistogram,
}

/// Equal-width histogram over `[low, high]`; values outside the range are
/// counted in the edge bins.
pub fn histogram<S: Scalar>(values: &[S], bin_count: usize, low: S, high: S) -> Result<Vec<usize>, AnalysisError> {
    if bin_count < 2 || !(low < high) {
        return Err(AnalysisError::BadHistogram);
    }
    let mut bins = vec![0usize; bin_count];
    let n = S::lit(bin_count as f64);
    for &v in values {
        let pos = ((v - low) / (high - low) * n).floor();
        let idx = if pos.is_nan() || pos < S::zero() {
            0
        } else {
            (pos.as_f64() as usize).min(bin_count - 1)
        };
        bins[idx] += 1;
    }
    Ok(bins)
}

/// Fraction of histogram mass in the lowest and highest bins.
pub fn bimodality_score(bins: &[usize]) -> f64 {
    let total: usize = bins.iter().sum();
    if total == 0 || bins.is_empty() {
        return 0.0;
    }
    let ends = if bins.len() == 1 {
        bins[0]
    } else {
        bins[0] + bins[bins.len() - 1]
    };
    ends as f64 / total as f64
}

/// Midpoint between the smallest and largest value.
pub fn midpoint<S: Scalar>(values: &[S]) -> Option<S> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Some((lo + hi) / S::lit(2.0))
}

/// Final-preference label in the capability map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    /// Both pickup probabilities below their run midpoints: a loafer.
    Yellow,
    /// Prefers type 1.
    Green,
    /// Prefers type 2.
    Purple,
}

impl Preference {
    pub fn name(self) -> &'static str {
        match self {
            Preference::Yellow => "yellow",
            Preference::Green => "green",
            Preference::Purple => "purple",
        }
    }
}

/// Where a robot is expected to end up given its mechanical capabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    LoaferRegion,
    Type1Region,
    Type2Region,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::LoaferRegion => "loafer",
            Region::Type1Region => "type1",
            Region::Type2Region => "type2",
        }
    }

    /// The preference label a robot in this region should end up with.
    pub fn expected_label(self) -> Preference {
        match self {
            Region::LoaferRegion => Preference::Yellow,
            Region::Type1Region => Preference::Green,
            Region::Type2Region => Preference::Purple,
        }
    }
}

/// Both capabilities below one half is the loafer square; the rest of the
/// unit square is split along the diagonal, ties going to type 1.
pub fn expected_region<S: Scalar>(capability: [S; 2]) -> Region {
    let half = S::lit(0.5);
    if capability[0] < half && capability[1] < half {
        Region::LoaferRegion
    } else if capability[0] >= capability[1] {
        Region::Type1Region
    } else {
        Region::Type2Region
    }
}

/// Labels every robot of a modified-mode run by its final pickup
/// probabilities, using per-run min/max midpoints.
pub fn classify_preferences<S: Scalar>(result: &RunResult<S>) -> Vec<Preference> {
    let p1 = result.final_pobj_of(ObjectType::Type1);
    let p2 = result.final_pobj_of(ObjectType::Type2);
    let (Some(m1), Some(m2)) = (midpoint(&p1), midpoint(&p2)) else {
        return Vec::new();
    };
    p1.iter().zip(&p2).map(|(&a, &b)| label(a, b, m1, m2)).collect()
}

fn label<S: Scalar>(p1: S, p2: S, mid1: S, mid2: S) -> Preference {
    if p1 < mid1 && p2 < mid2 {
        Preference::Yellow
    } else if p2 > p1 {
        Preference::Purple
    } else {
        Preference::Green
    }
}

/// Forager/loafer split of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunClassification<S> {
    pub replication: usize,
    pub threshold_p1: S,
    pub forager_ids: BTreeSet<usize>,
    pub loafer_ids: BTreeSet<usize>,
    /// Every robot had the same final P1.
    pub degenerate: bool,
    /// Modified-mode runs only.
    pub preference_labels: Option<Vec<Preference>>,
}

impl<S> RunClassification<S> {
    pub fn forager_count(&self) -> usize {
        self.forager_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport<S> {
    pub runs: Vec<RunClassification<S>>,
}

impl<S: Scalar> ClassificationReport<S> {
    pub fn forager_counts(&self) -> Vec<usize> {
        self.runs.iter().map(|r| r.forager_count()).collect()
    }

    pub fn degenerate_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.degenerate).count()
    }
}

/// Splits the robots of every run at the midpoint of that run's smallest and
/// largest final P1. Robots strictly above the midpoint are foragers.
pub fn classify_foragers<S: Scalar>(results: &[RunResult<S>]) -> Result<ClassificationReport<S>, AnalysisError> {
    if results.is_empty() {
        return Err(AnalysisError::NoResults);
    }
    let runs = results
        .iter()
        .map(|r| {
            let threshold = midpoint(&r.final_p1).unwrap_or_else(S::zero);
            let (lo, hi) = r
                .final_p1
                .iter()
                .fold((S::infinity(), S::neg_infinity()), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let (foragers, loafers): (Vec<_>, Vec<_>) = (0..r.robot_count()).partition(|&i| r.final_p1[i] > threshold);
            RunClassification {
                replication: r.replication,
                threshold_p1: threshold,
                forager_ids: foragers.into_iter().collect(),
                loafer_ids: loafers.into_iter().collect(),
                degenerate: lo == hi,
                preference_labels: match r.mode {
                    crate::allocation::Mode::Modified => Some(classify_preferences(r)),
                    crate::allocation::Mode::Original => None,
                },
            }
        })
        .collect();
    Ok(ClassificationReport { runs })
}

/// How well final preference labels agree with capability regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PreferenceAgreement {
    pub robots: usize,
    pub matched: usize,
    pub loafer_region: usize,
    pub loafer_yellow: usize,
}

impl PreferenceAgreement {
    pub fn match_rate(&self) -> f64 {
        ratio(self.matched, self.robots)
    }

    pub fn loafer_yellow_rate(&self) -> f64 {
        ratio(self.loafer_yellow, self.loafer_region)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Tallies label/region agreement over every labelled run of `report`.
pub fn preference_agreement<S: Scalar>(
    results: &[RunResult<S>],
    report: &ClassificationReport<S>,
) -> PreferenceAgreement {
    let mut a = PreferenceAgreement::default();
    for (r, run) in results.iter().zip(&report.runs) {
        let Some(labels) = &run.preference_labels else {
            continue;
        };
        for (cap, &label) in r.capabilities.iter().zip(labels) {
            let region = expected_region(*cap);
            a.robots += 1;
            a.matched += usize::from(label == region.expected_label());
            if region == Region::LoaferRegion {
                a.loafer_region += 1;
                a.loafer_yellow += usize::from(label == Preference::Yellow);
            }
        }
    }
    a
}

/// One row of the binomial comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialRow {
    pub k: usize,
    pub observed: f64,
    pub theoretical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomialComparison {
    pub robot_count: usize,
    pub samples: usize,
    pub p_hat: f64,
    pub rows: Vec<BinomialRow>,
    pub tv_distance: f64,
}

/// Probability mass function of Binomial(n, p).
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let mut coeff = 1.0f64;
    (0..=n)
        .map(|k| {
            if k > 0 {
                coeff = coeff * (n - k + 1) as f64 / k as f64;
            }
            coeff * p.powi(k as i32) * q.powi((n - k) as i32)
        })
        .collect()
}

/// Compares the empirical distribution of forager counts with a binomial
/// whose success probability matches the sample mean.
pub fn binomial_comparison(forager_counts: &[usize], robot_count: usize) -> Result<BinomialComparison, AnalysisError> {
    if forager_counts.is_empty() {
        return Err(AnalysisError::EmptyCounts);
    }
    if let Some(&count) = forager_counts.iter().find(|&&c| c > robot_count) {
        return Err(AnalysisError::CountOutOfRange { count, robot_count });
    }
    let samples = forager_counts.len();
    let mean = forager_counts.iter().sum::<usize>() as f64 / samples as f64;
    let p_hat = if robot_count == 0 {
        0.0
    } else {
        mean / robot_count as f64
    };
    let pmf = binomial_pmf(robot_count, p_hat);
    let mut observed = vec![0usize; robot_count + 1];
    for &c in forager_counts {
        observed[c] += 1;
    }
    let rows: Vec<BinomialRow> = (0..=robot_count)
        .map(|k| BinomialRow {
            k,
            observed: observed[k] as f64 / samples as f64,
            theoretical: pmf[k],
        })
        .collect();
    let tv_distance = 0.5 * rows.iter().map(|r| (r.observed - r.theoretical).abs()).sum::<f64>();
    Ok(BinomialComparison {
        robot_count,
        samples,
        p_hat,
        rows,
        tv_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::Mode;

    #[test]
    fn point_mass_histogram() {
        let v = vec![0.04f64; 15];
        let h = histogram(&v, 8, 0.0, 0.08).unwrap();
        assert_eq!(h, vec![0, 0, 0, 0, 15, 0, 0, 0]);
        assert_eq!(bimodality_score(&h), 0.0);
    }

    #[test]
    fn two_peak_histogram() {
        let mut v = vec![0.002f64; 7];
        v.extend(std::iter::repeat_n(0.08, 8));
        let h = histogram(&v, 8, 0.002, 0.08).unwrap();
        assert_eq!(h, vec![7, 0, 0, 0, 0, 0, 0, 8]);
        assert_eq!(bimodality_score(&h), 1.0);
    }

    #[test]
    fn uniform_grid_fills_bins_evenly() {
        let (lo, hi) = (0.002f64, 0.08);
        let v: Vec<f64> = (0..16).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / 16.0).collect();
        // counting oracle: value i belongs to bin floor(i / 2)
        let mut expect = vec![0usize; 8];
        for i in 0..16 {
            expect[i / 2] += 1;
        }
        assert_eq!(histogram(&v, 8, lo, hi).unwrap(), expect);
        assert_eq!(expect, vec![2; 8]);
    }

    #[test]
    fn histogram_clamps_out_of_range() {
        let h = histogram(&[-1.0f64, 2.0, f64::NAN], 4, 0.0, 1.0).unwrap();
        assert_eq!(h, vec![2, 0, 0, 1]);
        assert!(histogram(&[0.5f64], 1, 0.0, 1.0).is_err());
        assert!(histogram(&[0.5f64], 4, 1.0, 1.0).is_err());
    }

    fn result(p1: Vec<f64>, pobj: Vec<[f64; 2]>) -> RunResult<f64> {
        let n = p1.len();
        RunResult {
            replication: 0,
            seed: 0,
            mode: if pobj.is_empty() {
                Mode::Original
            } else {
                Mode::Modified
            },
            final_pobj: if pobj.is_empty() { vec![[0.075, 0.075]; n] } else { pobj },
            final_p1: p1,
            capabilities: vec![[0.5, 0.5]; n],
            trips: vec![Default::default(); n],
            retrieved: [0, 0],
            ticks: 0,
            invariant_checks: 0,
        }
    }

    #[test]
    fn midpoint_split() {
        let r = classify_foragers(&[result(vec![0.002, 0.08, 0.08], vec![])]).unwrap();
        let run = &r.runs[0];
        assert!((run.threshold_p1 - 0.041).abs() < 1e-15);
        assert_eq!(run.forager_count(), 2);
        assert_eq!(run.loafer_ids, BTreeSet::from([0]));
        assert!(!run.degenerate);
        assert!(run.preference_labels.is_none());
    }

    #[test]
    fn degenerate_run_has_no_foragers() {
        let r = classify_foragers(&[result(vec![0.04; 15], vec![])]).unwrap();
        assert_eq!(r.forager_counts(), vec![0]);
        assert_eq!(r.degenerate_runs(), 1);
        assert_eq!(r.runs[0].loafer_ids.len(), 15);
    }

    #[test]
    fn classify_requires_results() {
        assert_eq!(classify_foragers::<f64>(&[]), Err(AnalysisError::NoResults));
    }

    #[test]
    fn preference_labels() {
        // midpoints (0.002 + 0.15) / 2 = 0.076 for both types
        let r = result(
            vec![0.04; 4],
            vec![[0.002, 0.002], [0.15, 0.002], [0.10, 0.14], [0.002, 0.15]],
        );
        assert_eq!(
            classify_preferences(&r),
            vec![
                Preference::Yellow,
                Preference::Green,
                Preference::Purple,
                Preference::Purple
            ]
        );
        // tie above the midpoints goes to green
        assert_eq!(label(0.1, 0.1, 0.076, 0.076), Preference::Green);
    }

    #[test]
    fn agreement_counts_matches_and_loafers() {
        let mut r = result(
            vec![0.04; 4],
            vec![[0.002, 0.002], [0.15, 0.002], [0.10, 0.14], [0.002, 0.15]],
        );
        // loafer, type1, type2, loafer
        r.capabilities = vec![[0.1, 0.2], [0.9, 0.1], [0.3, 0.8], [0.4, 0.3]];
        let report = classify_foragers(&[r.clone()]).unwrap();
        let a = preference_agreement(&[r], &report);
        assert_eq!(
            a,
            PreferenceAgreement {
                robots: 4,
                matched: 3,
                loafer_region: 2,
                loafer_yellow: 1
            }
        );
        assert_eq!(a.match_rate(), 0.75);
        assert_eq!(a.loafer_yellow_rate(), 0.5);
        assert_eq!(PreferenceAgreement::default().match_rate(), 0.0);
    }

    #[test]
    fn regions() {
        assert_eq!(expected_region([0.3f64, 0.4]), Region::LoaferRegion);
        assert_eq!(expected_region([0.9f64, 0.2]), Region::Type1Region);
        assert_eq!(expected_region([0.5f64, 0.5]), Region::Type1Region);
        assert_eq!(expected_region([0.2f64, 0.7]), Region::Type2Region);
        assert_eq!(expected_region([0.6f64, 0.9]), Region::Type2Region);
    }

    #[test]
    fn binomial_degenerate_match() {
        let c = binomial_comparison(&[15; 20], 15).unwrap();
        assert_eq!(c.p_hat, 1.0);
        assert_eq!(c.tv_distance, 0.0);
    }

    #[test]
    fn binomial_split_extremes() {
        let counts: Vec<usize> = (0..20).map(|i| if i % 2 == 0 { 0 } else { 15 }).collect();
        let c = binomial_comparison(&counts, 15).unwrap();
        assert_eq!(c.p_hat, 0.5);
        // exact pmf: C(15,k) / 2^15
        let exact = |k: u64| {
            let mut num = 1u64;
            for j in 0..k {
                num = num * (15 - j) / (j + 1);
            }
            num as f64 / 32768.0
        };
        for row in &c.rows {
            assert!((row.theoretical - exact(row.k as u64)).abs() < 1e-15);
        }
        let peak = c
            .rows
            .iter()
            .max_by(|a, b| a.theoretical.total_cmp(&b.theoretical))
            .unwrap();
        assert!(peak.k == 7 || peak.k == 8);
        // TV = 1 - 2 * pmf(0) with pmf(0) = pmf(15) = 2^-15
        assert!((c.tv_distance - (1.0 - 2.0 / 32768.0)).abs() < 1e-12);
    }

    #[test]
    fn binomial_rejects_bad_input() {
        assert_eq!(binomial_comparison(&[], 15), Err(AnalysisError::EmptyCounts));
        assert_eq!(
            binomial_comparison(&[16], 15),
            Err(AnalysisError::CountOutOfRange {
                count: 16,
                robot_count: 15
            })
        );
    }
}
