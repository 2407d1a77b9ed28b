//! Excitation signals: filtered random segments around several operating
//! points, concatenated and smoothed, plus output-noise injection.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::mean_std;
use crate::error::{Error, Result};
use crate::filter::{design_butterworth, FilterSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDesignSpec {
    /// Band edge of each segment, Hz.
    pub frequencies: Vec<f64>,
    pub segment_lengths: Vec<usize>,
    pub operating_points: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub sample_interval: f64,
    #[serde(default = "default_order")]
    pub filter_order: usize,
}

fn default_order() -> usize {
    5
}

impl InputDesignSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.frequencies.len();
        let v = self.operating_points.len();
        if n == 0 || self.segment_lengths.len() != n {
            return Err(Error::Parameter(
                "need one segment length per frequency and at least one segment".into(),
            ));
        }
        if v == 0 || self.amplitudes.len() != v {
            return Err(Error::Parameter(
                "need one amplitude per operating point and at least one point".into(),
            ));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::Parameter("sampling interval must be positive".into()));
        }
        if self.filter_order == 0 {
            return Err(Error::Parameter("filter order must be positive".into()));
        }
        let nyquist = 0.5 / self.sample_interval;
        for (i, &f) in self.frequencies.iter().enumerate() {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::Parameter(format!(
                    "frequency {} = {f} Hz must lie in (0, {nyquist}) Hz",
                    i + 1
                )));
            }
        }
        for (i, &len) in self.segment_lengths.iter().enumerate() {
            if len < v {
                return Err(Error::Parameter(format!(
                    "segment {} has {len} samples, fewer than the {v} operating points",
                    i + 1
                )));
            }
        }
        if let Some(g) = self.amplitudes.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::Parameter(format!("amplitude {g} must be positive")));
        }
        if self.operating_points.iter().any(|o| !o.is_finite()) {
            return Err(Error::Parameter("operating points must be finite".into()));
        }
        Ok(())
    }

    pub fn total_length(&self) -> usize {
        self.segment_lengths.iter().sum()
    }

    pub fn segment_filter(&self, i: usize) -> Result<FilterSpec> {
        let f = *self
            .frequencies
            .get(i)
            .ok_or_else(|| Error::Parameter(format!("no segment {}", i + 1)))?;
        design_butterworth(self.filter_order, f, 1.0 / self.sample_interval)
    }

    /// The smoothing filter applied to the concatenated signal.
    pub fn final_filter(&self) -> Result<FilterSpec> {
        let f = self.frequencies.iter().cloned().fold(f64::MIN, f64::max);
        design_butterworth(self.filter_order, f, 1.0 / self.sample_interval)
    }

    /// Lowest and highest level the operating points and amplitudes allow.
    pub fn envelope(&self) -> (f64, f64) {
        let lo = self
            .operating_points
            .iter()
            .zip(&self.amplitudes)
            .map(|(o, g)| o - g)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .operating_points
            .iter()
            .zip(&self.amplitudes)
            .map(|(o, g)| o + g)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Affine map onto `[-1, 1]`.
pub fn normalize_unit_range(e: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = e
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(hi > lo) {
        return Err(Error::DegenerateRange(
            "cannot normalize a constant sequence".into(),
        ));
    }
    let span = hi - lo;
    Ok(e
        .iter()
        .map(|v| {
            if *v == hi {
                1.0
            } else if *v == lo {
                -1.0
            } else {
                (2.0 * v - hi - lo) / span
            }
        })
        .collect())
}

/// One segment: filtered zero-mean normalized noise, split into one block per
/// operating point, each block scaled so its peak excursion is `G_j`.
pub fn design_segment<R: Rng + ?Sized>(
    i: usize,
    spec: &InputDesignSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let len = spec.segment_lengths[i];
    let e: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let mut e = normalize_unit_range(&e)?;
    // The unit-range map leaves a random offset that narrow-band filtering
    // would turn into the dominant component; recentre on zero.
    let mean = e.iter().sum::<f64>() / len as f64;
    e.iter_mut().for_each(|v| *v -= mean);
    let filtered = spec.segment_filter(i)?.apply(&e);
    let v = spec.operating_points.len();
    let mut out = Vec::with_capacity(len);
    for j in 0..v {
        let chunk = &filtered[block_start(len, v, j)..block_start(len, v, j + 1)];
        let peak = chunk.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if peak == 0.0 {
            return Err(Error::DegenerateRange(format!(
                "block {} of segment {} is identically zero",
                j + 1,
                i + 1
            )));
        }
        let alpha = spec.amplitudes[j] / peak;
        let o = spec.operating_points[j];
        out.extend(chunk.iter().map(|x| alpha * x + o));
    }
    Ok(out)
}

/// First sample of block `j` when `len` samples are split into `v` blocks.
/// Lengths that are not a multiple of `v` give blocks differing by one sample.
pub fn block_start(len: usize, v: usize, j: usize) -> usize {
    j * len / v
}

/// All segments concatenated and passed through the smoothing filter.
///
/// The smoothing filter starts settled at the first level. It can push the
/// signal past the operating envelope near level changes, by at most
/// `(‖h‖₁ − 1)` times the envelope half-width.
pub fn design_input<R: Rng + ?Sized>(spec: &InputDesignSpec, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut u = Vec::with_capacity(spec.total_length());
    for i in 0..spec.frequencies.len() {
        u.extend(design_segment(i, spec, rng)?);
    }
    Ok(spec.final_filter()?.apply_settled(&u))
}

/// Adds white Gaussian noise with standard deviation `ratio * std(y)`.
pub fn add_output_noise<R: Rng + ?Sized>(y: &[f64], ratio: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::Parameter(format!("noise ratio {ratio} must be non-negative")));
    }
    if ratio == 0.0 || y.is_empty() {
        return Ok(y.to_vec());
    }
    let (_, sd) = mean_std(y);
    let dist = Normal::new(0.0, ratio * sd)
        .map_err(|e| Error::Parameter(format!("noise distribution: {e}")))?;
    Ok(y.iter().map(|v| v + dist.sample(rng)).collect())
}

/// `A sin(2π f k Ts + phase) + offset` for `k = 0..n`.
pub fn sine_input(
    amplitude: f64,
    frequency: f64,
    phase: f64,
    offset: f64,
    n: usize,
    ts: f64,
) -> Vec<f64> {
    (0..n)
        .map(|k| {
            amplitude * (2.0 * std::f64::consts::PI * frequency * k as f64 * ts + phase).sin()
                + offset
        })
        .collect()
}
