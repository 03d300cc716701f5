//! Uniformly weighted empirical measures on a compact interval.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{fmt17, pairwise_sum, pairwise_sum_by, Real};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("degenerate interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// The reference state space `[-1, 1]`.
    pub fn symmetric_unit() -> Self {
        Self {
            lo: -T::one(),
            hi: T::one(),
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Interval grown by `fraction` of its width on each side.
    pub fn padded(&self, fraction: T) -> Self {
        let pad = self.width() * fraction;
        Self {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }
}

/// First and second moments of a measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary<T> {
    pub mean: T,
    pub second_moment: T,
    pub variance: T,
}

impl<T: Real> MomentSummary<T> {
    /// Moments of a Dirac mass at `y`.
    pub fn point(y: T) -> Self {
        Self {
            mean: y,
            second_moment: y * y,
            variance: T::zero(),
        }
    }

    /// Builds a summary from mean and second moment; `second_moment >= mean²` is required
    /// up to `1e-12·max(1, second_moment)`.
    pub fn from_raw(mean: T, second_moment: T) -> Result<Self> {
        let variance = second_moment - mean * mean;
        if variance < -Self::slack(second_moment) {
            return Err(Error::invalid(format!(
                "second moment {second_moment} below squared mean {}",
                mean * mean
            )));
        }
        Ok(Self {
            mean,
            second_moment,
            variance: variance.max(T::zero()),
        })
    }

    pub(crate) fn slack(second_moment: T) -> T {
        T::lit(1e-12) * second_moment.max(T::one())
    }
}

/// The measure `(1/M) Σ δ(x - x_i)` on a domain interval.
///
/// Particles are stored sorted; weights are implicit and uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure<T> {
    particles: Vec<T>,
    domain: Interval<T>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn new(mut particles: Vec<T>, domain: Interval<T>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid(
                "empirical measure needs at least one particle",
            ));
        }
        if let Some(bad) = particles.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite particle position {bad}"
            )));
        }
        particles.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { particles, domain })
    }

    /// Unchecked: `particles` must already be sorted, with finite entries.
    pub(crate) fn from_sorted_unchecked(particles: Vec<T>, domain: Interval<T>) -> Self {
        debug_assert!(!particles.is_empty());
        debug_assert!(particles.windows(2).all(|w| w[0] <= w[1]));
        Self { particles, domain }
    }

    pub fn particles(&self) -> &[T] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn domain(&self) -> Interval<T> {
        self.domain
    }

    /// Number of particles outside the domain. Positions are never clamped.
    pub fn excursions(&self) -> usize {
        // sorted, so only the two tails need scanning
        let below = self.particles.partition_point(|&x| x < self.domain.lo);
        let above = self.particles.len() - self.particles.partition_point(|&x| x <= self.domain.hi);
        below + above
    }

    pub fn within_domain(&self) -> bool {
        self.excursions() == 0
    }

    pub fn mean(&self) -> T {
        pairwise_sum(&self.particles) / T::from_usize_lossy(self.len())
    }

    pub fn moments(&self) -> MomentSummary<T> {
        let m = T::from_usize_lossy(self.len());
        let mean = pairwise_sum(&self.particles) / m;
        let second_moment = pairwise_sum_by(&self.particles, &|x| x * x) / m;
        let variance = pairwise_sum_by(&self.particles, &|x| (x - mean) * (x - mean)) / m;
        MomentSummary {
            mean,
            second_moment,
            variance,
        }
    }

    /// The measure translated by `c`, on the same domain.
    pub fn shifted(&self, c: T) -> Self {
        Self::from_sorted_unchecked(self.particles.iter().map(|&x| x + c).collect(), self.domain)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x")?;
        for &x in &self.particles {
            writeln!(out, "{}", fmt17(x.as_f64()))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, domain: Interval<T>) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?;
        if headers.len() != 1 || &headers[0] != "x" {
            return Err(Error::invalid(format!(
                "expected single column `x`, found {headers:?}"
            )));
        }
        let mut particles = Vec::new();
        for record in reader.records() {
            let record = record?;
            let x: f64 = record[0]
                .trim()
                .parse()
                .map_err(|e| Error::invalid(format!("bad particle `{}`: {e}", &record[0])))?;
            particles.push(T::lit(x));
        }
        Self::new(particles, domain)
    }

    pub fn to_json(&self) -> Result<String> {
        let xs: Vec<f64> = self.particles.iter().map(|x| x.as_f64()).collect();
        Ok(serde_json::to_string(&xs)?)
    }

    pub fn from_json(text: &str, domain: Interval<T>) -> Result<Self> {
        let xs: Vec<f64> = serde_json::from_str(text)?;
        Self::new(xs.into_iter().map(T::lit).collect(), domain)
    }
}

/// `M` i.i.d. uniform draws on `domain`, deterministic in `seed`.
pub fn sample_uniform<T: Real>(
    m: usize,
    domain: Interval<T>,
    seed: u64,
) -> Result<EmpiricalMeasure<T>> {
    if m == 0 {
        return Err(Error::invalid("particle count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, width) = (domain.lo().as_f64(), domain.width().as_f64());
    let particles = (0..m)
        .map(|_| {
            let u: f64 = rng.gen();
            T::lit(lo + width * u)
        })
        .collect();
    EmpiricalMeasure::new(particles, domain)
}

pub fn moments<T: Real>(f: &EmpiricalMeasure<T>) -> MomentSummary<T> {
    f.moments()
}

/// Wasserstein-1 distance `∫ |F_f(x) - F_g(x)| dx`, integrated exactly over the
/// merged breakpoints. Particle counts may differ.
pub fn wasserstein1<T: Real>(f: &EmpiricalMeasure<T>, g: &EmpiricalMeasure<T>) -> T {
    let (xs, ys) = (f.particles(), g.particles());
    let (m, k) = (xs.len(), ys.len());
    let scale = T::from_usize_lossy(m) * T::from_usize_lossy(k);

    // F_f = i/m, F_g = j/k just right of the current breakpoint;
    // |i/m - j/k| = |i·k - j·m| / (m·k) keeps the CDF gap exact.
    let (mut i, mut j) = (0usize, 0usize);
    let mut terms = Vec::with_capacity(m + k);
    let mut prev: Option<T> = None;
    while i < m || j < k {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            let gap = (i * k).abs_diff(j * m);
            if gap != 0 {
                terms.push(T::from_usize_lossy(gap) * (next - p));
            }
        }
        while i < m && xs[i] == next {
            i += 1;
        }
        while j < k && ys[j] == next {
            j += 1;
        }
        prev = Some(next);
    }
    pairwise_sum(&terms) / scale
}

/// Sorted-sample form `(1/M) Σ |x_(i) - y_(i)|`; requires equal particle counts.
pub fn wasserstein1_matched<T: Real>(
    f: &EmpiricalMeasure<T>,
    g: &EmpiricalMeasure<T>,
) -> Result<T> {
    if f.len() != g.len() {
        return Err(Error::invalid(format!(
            "matched Wasserstein needs equal counts, got {} and {}",
            f.len(),
            g.len()
        )));
    }
    let diffs: Vec<T> = f
        .particles()
        .iter()
        .zip(g.particles())
        .map(|(&x, &y)| (x - y).abs())
        .collect();
    Ok(pairwise_sum(&diffs) / T::from_usize_lossy(f.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval<f64> {
        Interval::symmetric_unit()
    }

    fn measure(xs: &[f64]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::new(xs.to_vec(), unit()).unwrap()
    }

    #[test]
    fn rejects_empty_and_degenerate_inputs() {
        assert!(EmpiricalMeasure::<f64>::new(vec![], unit()).is_err());
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(EmpiricalMeasure::new(vec![f64::NAN], unit()).is_err());
        assert!(sample_uniform::<f64>(0, unit(), 1).is_err());
    }

    #[test]
    fn single_sample_lies_in_domain() {
        let f = sample_uniform::<f64>(1, unit(), 42).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f.within_domain());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_uniform::<f64>(1000, unit(), 7).unwrap();
        let b = sample_uniform::<f64>(1000, unit(), 7).unwrap();
        assert_eq!(a.particles(), b.particles());
        let c = sample_uniform::<f64>(1000, unit(), 8).unwrap();
        assert_ne!(a.particles(), c.particles());
    }

    #[test]
    fn large_sample_mean_within_five_sigma() {
        let m = 100_000;
        let f = sample_uniform::<f64>(m, unit(), 2024).unwrap();
        let bound = 5.0 * (1.0 / (3.0 * m as f64)).sqrt();
        assert!(f.mean().abs() <= bound, "{} > {bound}", f.mean());
    }

    #[test]
    fn moments_of_simple_ensembles() {
        let s = measure(&[0.3]).moments();
        assert_eq!(s.mean, 0.3);
        assert!((s.second_moment - 0.09).abs() < 1e-16);
        assert_eq!(s.variance, 0.0);

        let s = measure(&[-1.0, 1.0]).moments();
        assert_eq!((s.mean, s.second_moment, s.variance), (0.0, 1.0, 1.0));

        let s = measure(&[0.1, 0.2, 0.6]).moments();
        let mean = (0.1 + 0.2 + 0.6) / 3.0;
        let second = (0.01 + 0.04 + 0.36) / 3.0;
        assert!((s.mean - mean).abs() < 1e-15);
        assert!((s.second_moment - second).abs() < 1e-15);
        assert!((s.variance - (second - mean * mean)).abs() < 1e-15);
    }

    #[test]
    fn raw_moments_reject_negative_variance() {
        assert!(MomentSummary::from_raw(1.0, 0.5).is_err());
        let s = MomentSummary::from_raw(0.5, 0.25).unwrap();
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn excursions_are_counted_not_clamped() {
        let f = EmpiricalMeasure::new(vec![-1.5, 0.0, 1.0, 1.2, 3.0], unit()).unwrap();
        assert_eq!(f.excursions(), 3);
        assert_eq!(f.particles()[0], -1.5);
        assert!(!f.within_domain());
    }

    #[test]
    fn wasserstein_examples() {
        let f = measure(&[0.0, 1.0]);
        assert_eq!(wasserstein1(&f, &f), 0.0);
        assert_eq!(wasserstein1(&measure(&[0.0]), &measure(&[0.7])), 0.7);
        assert_eq!(wasserstein1(&f, &measure(&[0.0, 0.0])), 0.5);
        // unequal counts: {0} vs {0, 1} -> CDF gap 1/2 on [0, 1)
        assert_eq!(wasserstein1(&measure(&[0.0]), &f), 0.5);
    }

    #[test]
    fn matched_form_rejects_unequal_counts() {
        assert!(wasserstein1_matched(&measure(&[0.0]), &measure(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let f = sample_uniform::<f64>(257, unit(), 99).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x\n"));
        let g = EmpiricalMeasure::read_csv(buf.as_slice(), unit()).unwrap();
        assert_eq!(f, g);
        let h = EmpiricalMeasure::from_json(&f.to_json().unwrap(), unit()).unwrap();
        assert_eq!(f, h);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        assert!(EmpiricalMeasure::<f64>::read_csv("y\n0.1\n".as_bytes(), unit()).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let f = EmpiricalMeasure::new(vec![-1.0f32, 1.0], Interval::symmetric_unit()).unwrap();
        assert_eq!(f.moments().variance, 1.0f32);
        assert_eq!(wasserstein1(&f, &f.shifted(0.25)), 0.25);
    }
}
