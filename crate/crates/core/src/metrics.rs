//! Transient-time statistics: settling times, their empirical distribution over
//! a set of initial conditions, and the entropy of that distribution.
//!
//! A settling time is the earliest sample after which a deviation stays inside
//! its band up to the end of the horizon. Runs whose final sample is outside the
//! band have no settling time; they are excluded from the histogram and counted
//! separately, so the bin masses sum to the reached fraction.

use thiserror::Error;

use crate::dynamics::TimeGrid;
use crate::pendulum::{kappa, psi_norm, sigma, PendulumParams, State};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("deviation series is empty")]
    EmptySeries,
    #[error("no settling records to aggregate")]
    NoRecords,
    #[error("histogram needs at least one bin and a positive horizon")]
    InvalidBins,
    #[error("target radius {0} must lie in (0, sigma(delta_cap))")]
    LambdaOutOfRange(f64),
    #[error("local envelope check needs a run that ends in local mode")]
    NoLocalPhase,
}

/// Earliest grid time from which `deviation[i] ≤ tol` holds up to the last sample.
///
/// `None` when the final sample violates the band.
pub fn settling_time<T: Scalar>(
    deviation: &[T],
    tol: T,
    grid: &TimeGrid<T>,
) -> Result<Option<T>, MetricsError> {
    if deviation.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    match deviation.iter().rposition(|&d| !(d <= tol)) {
        None => Ok(Some(grid.time(0))),
        Some(last) if last + 1 == deviation.len() => Ok(None),
        Some(last) => Ok(Some(grid.time(last + 1))),
    }
}

/// Streaming form of [`settling_time`]: feed samples in order, read the result at the end.
#[derive(Debug, Clone, Copy, Default)]
pub struct SettlingTracker {
    first_inside: Option<usize>,
    seen: usize,
}

impl SettlingTracker {
    #[inline]
    pub fn push<T: Scalar>(&mut self, deviation: T, tol: T) {
        if deviation <= tol {
            self.first_inside.get_or_insert(self.seen);
        } else {
            self.first_inside = None;
        }
        self.seen += 1;
    }

    /// Index of the settling sample, if any.
    pub fn index(&self) -> Option<usize> {
        self.first_inside
    }

    pub fn time<T: Scalar>(&self, grid: &TimeGrid<T>) -> Option<T> {
        self.first_inside.map(|i| grid.time(i))
    }
}

/// Settling times of one initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlingRecord<T> {
    pub x0: State<T>,
    /// Angle settling time (distance of `x1` to the nearest upright target).
    pub t_x: Option<T>,
    /// Energy settling time (`|H − H*|`).
    pub t_h: Option<T>,
}

/// Empirical distribution of settling times on a uniform histogram over `[0, t_end]`.
///
/// Bin `i` covers `(i·w, (i+1)·w]` (bin 0 also takes `t = 0`); `cdf[i]` is the
/// fraction of all records with settling time at most the right edge of bin `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachDistribution<T> {
    pub t_end: T,
    pub bin_width: T,
    pub cdf_x: Vec<T>,
    pub cdf_h: Vec<T>,
    pub pdf_x: Vec<T>,
    pub pdf_h: Vec<T>,
    pub entropy_x: T,
    pub entropy_h: T,
    pub unreached_x: usize,
    pub unreached_h: usize,
    pub records: usize,
}

impl<T: Scalar> ReachDistribution<T> {
    pub fn n_bins(&self) -> usize {
        self.cdf_x.len()
    }

    /// Right edge of bin `i`.
    pub fn edge(&self, i: usize) -> T {
        T::from_index(i + 1) * self.bin_width
    }

    /// Earliest bin edge where the angle cdf reaches `level`.
    pub fn quantile_x(&self, level: T) -> Option<T> {
        quantile(&self.cdf_x, level).map(|i| self.edge(i))
    }

    pub fn quantile_h(&self, level: T) -> Option<T> {
        quantile(&self.cdf_h, level).map(|i| self.edge(i))
    }
}

fn quantile<T: Scalar>(cdf: &[T], level: T) -> Option<usize> {
    cdf.iter().position(|&c| c >= level)
}

/// Bin of a settling time, robust to `t` being an exact multiple of the bin width up to rounding.
fn bin_of<T: Scalar>(t: T, width: T, n_bins: usize) -> usize {
    let k = t / width;
    let r = k.round();
    let upper = if (k - r).abs() <= T::lit(1e-6) {
        r
    } else {
        k.ceil()
    };
    let idx = upper.to_i64().unwrap_or(i64::MAX) - 1;
    idx.clamp(0, n_bins as i64 - 1) as usize
}

fn histogram<T: Scalar>(
    times: impl Iterator<Item = Option<T>>,
    width: T,
    n_bins: usize,
    total: usize,
) -> (Vec<T>, Vec<T>, usize) {
    let mut counts = vec![0usize; n_bins];
    let mut unreached = 0;
    for t in times {
        match t {
            Some(t) => counts[bin_of(t, width, n_bins)] += 1,
            None => unreached += 1,
        }
    }
    let n = T::from_index(total);
    let mut cdf = Vec::with_capacity(n_bins);
    let mut pdf = Vec::with_capacity(n_bins);
    let mut acc = 0usize;
    for c in counts {
        acc += c;
        cdf.push(T::from_index(acc) / n);
        pdf.push(T::from_index(c) / n / width);
    }
    (cdf, pdf, unreached)
}

/// Aggregates settling records into cumulative distributions, densities and entropies.
pub fn build_distribution<T: Scalar>(
    records: &[SettlingRecord<T>],
    n_bins: usize,
    t_end: T,
) -> Result<ReachDistribution<T>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::NoRecords);
    }
    if n_bins == 0 || !(t_end > T::zero()) {
        return Err(MetricsError::InvalidBins);
    }
    let width = t_end / T::from_index(n_bins);
    let total = records.len();
    let (cdf_x, pdf_x, unreached_x) =
        histogram(records.iter().map(|r| r.t_x), width, n_bins, total);
    let (cdf_h, pdf_h, unreached_h) =
        histogram(records.iter().map(|r| r.t_h), width, n_bins, total);
    Ok(ReachDistribution {
        t_end,
        bin_width: width,
        entropy_x: reached_entropy(&pdf_x, width, total - unreached_x, total),
        entropy_h: reached_entropy(&pdf_h, width, total - unreached_h, total),
        cdf_x,
        cdf_h,
        pdf_x,
        pdf_h,
        unreached_x,
        unreached_h,
        records: total,
    })
}

/// Entropy of the settling times of the runs that settled: the bin masses are rescaled
/// by `total / reached` so they sum to one and the result stays within `[0, ln n_bins]`.
fn reached_entropy<T: Scalar>(pdf: &[T], width: T, reached: usize, total: usize) -> T {
    if reached == 0 {
        return T::zero();
    }
    let scale = T::from_index(total) / T::from_index(reached);
    let conditional: Vec<T> = pdf.iter().map(|&p| p * scale).collect();
    entropy(&conditional, width)
}

/// Shannon entropy (nats) of the bin masses `q_i = pdf_i · width`; empty bins contribute nothing.
pub fn entropy<T: Scalar>(pdf: &[T], bin_width: T) -> T {
    pdf.iter()
        .map(|&p| p * bin_width)
        .filter(|&q| q > T::zero())
        .map(|q| -q * q.ln())
        .sum()
}

/// Time for the local envelope `σ(Δ)e^{−0.5κt}` to shrink to `lambda`: `−2/κ · ln(λ/σ(Δ))`.
pub fn t_lambda<T: Scalar>(lambda: T, p: &PendulumParams<T>) -> Result<T, MetricsError> {
    let top = sigma(p.delta_cap);
    if !(lambda > T::zero() && lambda <= top) {
        return Err(MetricsError::LambdaOutOfRange(lambda.as_f64()));
    }
    let rate = kappa(p).map_err(|_| MetricsError::LambdaOutOfRange(lambda.as_f64()))?;
    Ok(-T::lit(2.0) / rate * (lambda / top).ln())
}

/// Largest `|ψ(t)| − σ(Δ)e^{−0.5κ(t − t_local)}` over the samples from `local_entry` on.
/// Non-positive means the run respects the local decay envelope.
pub fn local_envelope_check<T: Scalar>(
    states: &[State<T>],
    grid: &TimeGrid<T>,
    local_entry: usize,
    p: &PendulumParams<T>,
) -> Result<T, MetricsError> {
    if local_entry >= states.len() {
        return Err(MetricsError::NoLocalPhase);
    }
    let rate = kappa(p).map_err(|_| MetricsError::NoLocalPhase)?;
    let top = sigma(p.delta_cap);
    let t_local = grid.time(local_entry);
    let half = T::lit(0.5);
    Ok(states[local_entry..]
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let dt = grid.time(local_entry + j) - t_local;
            psi_norm(x) - top * (-half * rate * dt).exp()
        })
        .fold(T::neg_infinity(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> TimeGrid<f64> {
        TimeGrid::new(0.0, 1.0, n - 1).unwrap()
    }

    #[test]
    fn settling_examples() {
        let g = grid(30);
        let inside = vec![0.0; 30];
        assert_eq!(settling_time(&inside, 0.1, &g).unwrap(), Some(0.0));

        // entered at 10, left during [12,13], back from 15 on
        let series: Vec<f64> = (0..30)
            .map(|t| {
                if t < 10 || (12..=13).contains(&t) || t == 14 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        assert_eq!(settling_time(&series, 0.1, &g).unwrap(), Some(15.0));

        let mut late = vec![0.0; 30];
        late[29] = 1.0;
        assert_eq!(settling_time(&late, 0.1, &g).unwrap(), None);

        assert_eq!(
            settling_time::<f64>(&[], 0.1, &g),
            Err(MetricsError::EmptySeries)
        );
    }

    fn rec(t_x: Option<f64>, t_h: Option<f64>) -> SettlingRecord<f64> {
        SettlingRecord {
            x0: [0.0, 0.0],
            t_x,
            t_h,
        }
    }

    #[test]
    fn point_mass_distribution() {
        let records = vec![rec(Some(100.0), Some(100.0)); 50];
        let d = build_distribution(&records, 20_000, 200.0).unwrap();
        assert_eq!(d.entropy_x, 0.0);
        let step = d.cdf_x.iter().position(|&c| c > 0.0).unwrap();
        assert_eq!(d.cdf_x[step], 1.0);
        assert!(d.edge(step) >= 100.0 && d.edge(step) - 100.0 < d.bin_width * 1.0001);
        assert_eq!(d.quantile_x(0.99), Some(d.edge(step)));
    }

    #[test]
    fn uniform_distribution_entropy() {
        let n = 20_000;
        let records: Vec<_> = (0..n)
            .map(|i| rec(Some((i + 1) as f64 * 0.01), Some(0.0)))
            .collect();
        let d = build_distribution(&records, n, 200.0).unwrap();
        assert!(d
            .pdf_x
            .iter()
            .all(|&p| (p * d.bin_width - 1.0 / n as f64).abs() < 1e-15));
        assert_abs_diff_eq!(d.entropy_x, (2e4f64).ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(d.entropy_x, 9.903, epsilon = 5e-4);
        assert_eq!(d.entropy_h, 0.0);
    }

    #[test]
    fn half_unreached() {
        let mut records = vec![rec(Some(3.0), Some(1.0)); 10];
        records.extend(vec![rec(None, Some(1.0)); 10]);
        let d = build_distribution(&records, 100, 200.0).unwrap();
        assert_eq!(d.unreached_x, 10);
        assert_eq!(d.unreached_h, 0);
        assert_eq!(*d.cdf_x.last().unwrap(), 0.5);
        let mass: f64 = d.pdf_x.iter().map(|p| p * d.bin_width).sum();
        assert_abs_diff_eq!(mass, 0.5, epsilon = 1e-12);
        assert_eq!(d.quantile_x(0.99), None);
        // unreached runs are left out, so the settled half is a point mass
        assert_abs_diff_eq!(d.entropy_x, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn distribution_errors() {
        assert_eq!(
            build_distribution::<f64>(&[], 10, 1.0),
            Err(MetricsError::NoRecords)
        );
        assert_eq!(
            build_distribution(&[rec(None, None)], 0, 1.0),
            Err(MetricsError::InvalidBins)
        );
    }

    #[test]
    fn binning_at_grid_times() {
        // settling times are grid samples i·0.01; each must land in its own bin
        for i in 1..=20_000usize {
            let t = i as f64 * 0.01;
            assert_eq!(bin_of(t, 0.01, 20_000), i - 1, "t = {t}");
        }
        assert_eq!(bin_of(0.0, 0.01, 20_000), 0);
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&[0.5, 0.5, 0.0], 1.0), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(entropy(&[0.0, 100.0], 0.01), 0.0);
    }

    #[test]
    fn t_lambda_examples() {
        let p = PendulumParams::default();
        assert_abs_diff_eq!(t_lambda(sigma(0.2), &p).unwrap(), 0.0, epsilon = 1e-12);
        let t = t_lambda(0.1, &p).unwrap();
        assert_abs_diff_eq!(
            t,
            2.0 / 0.3125 * (sigma(0.2f64) / 0.1).ln(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(t, 19.77, epsilon = 0.02);
        let t2 = t_lambda(0.05, &p).unwrap();
        assert_abs_diff_eq!(t2 - t, 2.0 / 0.3125 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(t2 - t, 4.436, epsilon = 1e-3);
        assert!(t_lambda(0.0, &p).is_err());
        assert!(t_lambda(5.0, &p).is_err());
    }

    #[test]
    fn envelope_examples() {
        let p = PendulumParams::default();
        let g = TimeGrid::new(0.0, 0.01, 999).unwrap();
        let at_top = vec![[PI, 0.0]; 1000];
        let v = local_envelope_check(&at_top, &g, 10, &p).unwrap();
        let rate = kappa(&p).unwrap();
        let tail = sigma(0.2) * (-0.5 * rate * (g.t_end() - g.time(10))).exp();
        assert!(v < 0.0);
        assert_abs_diff_eq!(v, -tail, epsilon = 1e-15);

        // |ψ| tracking the envelope exactly (second component carries it)
        let exact: Vec<_> = (0..1000)
            .map(|i| {
                let dt = (g.time(i) - g.time(100)).max(0.0);
                [PI, sigma(0.2) * (-0.5 * rate * dt).exp()]
            })
            .collect();
        let v = local_envelope_check(&exact, &g, 100, &p).unwrap();
        assert!(v.abs() <= 1e-12, "{v}");
        assert!(local_envelope_check(&exact, &g, 1000, &p).is_err());
    }

    proptest! {
        #[test]
        fn tracker_matches_batch(series in prop::collection::vec(0.0f64..1.0, 2..200), tol in 0.0f64..1.0) {
            let g = grid(series.len());
            let mut tr = SettlingTracker::default();
            for &d in &series {
                tr.push(d, tol);
            }
            prop_assert_eq!(tr.time(&g), settling_time(&series, tol, &g).unwrap());
        }

        #[test]
        fn settling_monotone_in_tolerance(series in prop::collection::vec(0.0f64..1.0, 2..200), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let g = grid(series.len());
            let strict = settling_time(&series, lo, &g).unwrap();
            let loose = settling_time(&series, hi, &g).unwrap();
            match (strict, loose) {
                (Some(s), Some(l)) => prop_assert!(l <= s),
                (Some(_), None) => prop_assert!(false, "looser band lost settling"),
                _ => {}
            }
        }

        #[test]
        fn entropy_within_bounds(times in prop::collection::vec(prop::option::of(0.0f64..50.0), 1..300), n_bins in 1usize..500) {
            let records: Vec<_> = times.iter().map(|&t| rec(t, t)).collect();
            let d = build_distribution(&records, n_bins, 50.0).unwrap();
            prop_assert!(d.entropy_x >= 0.0);
            prop_assert!(d.entropy_x <= (n_bins as f64).ln() + 1e-12);
            prop_assert!(d.cdf_x.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(d.pdf_x.iter().all(|&p| p >= 0.0));
            let reached = (records.len() - d.unreached_x) as f64 / records.len() as f64;
            let mass: f64 = d.pdf_x.iter().map(|p| p * d.bin_width).sum();
            prop_assert!((mass - reached).abs() < 1e-9);
            prop_assert!((d.cdf_x.last().unwrap() - reached).abs() < 1e-12);
        }

        #[test]
        fn looser_band_dominates_cdf(series in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 50), 1..30), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let g = grid(50);
            let records = |tol: f64| -> Vec<_> {
                series.iter().map(|s| {
                    let t = settling_time(s, tol, &g).unwrap();
                    rec(t, t)
                }).collect()
            };
            let strict = build_distribution(&records(lo), 49, 49.0).unwrap();
            let loose = build_distribution(&records(hi), 49, 49.0).unwrap();
            prop_assert!(loose.cdf_h.iter().zip(&strict.cdf_h).all(|(l, s)| l >= s));
        }
    }
}
