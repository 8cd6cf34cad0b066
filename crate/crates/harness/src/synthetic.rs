//! Synthetic spot price histories for experiments without a recorded trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spotflow_core::cloud::{CloudError, InstanceType, SpotPriceTrace};

const DAY: f64 = 86_400.0;

/// Piecewise-constant prices: segments of random length carry a multiplier
/// drawn around 1, occasionally a spike well above it. Each series is then
/// rescaled so its time-weighted mean is `mean_fraction` of on-demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTraceSpec {
    pub training_days: f64,
    pub test_days: f64,
    pub mean_fraction: f64,
    pub spike_probability: f64,
    /// Segment lengths, seconds.
    pub min_segment: f64,
    pub max_segment: f64,
    pub seed: u64,
}

impl Default for SyntheticTraceSpec {
    fn default() -> Self {
        SyntheticTraceSpec {
            training_days: 60.0,
            test_days: 30.0,
            mean_fraction: 0.3,
            spike_probability: 0.02,
            min_segment: 600.0,
            max_segment: 7200.0,
            seed: 1,
        }
    }
}

impl SyntheticTraceSpec {
    /// First second of the test portion.
    pub fn split(&self) -> f64 {
        (self.training_days * DAY).round()
    }

    pub fn span(&self) -> f64 {
        ((self.training_days + self.test_days) * DAY).round()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.training_days > 0.0 && self.test_days > 0.0) {
            return Err("training and test spans must be positive".into());
        }
        if !(self.mean_fraction > 0.0) {
            return Err("mean fraction must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.spike_probability) {
            return Err("spike probability must lie in [0, 1]".into());
        }
        if !(self.min_segment >= 60.0 && self.max_segment >= self.min_segment) {
            return Err("segments must be at least 60 s and min <= max".into());
        }
        Ok(())
    }
}

fn multipliers(spec: &SyntheticTraceSpec, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let span = spec.span();
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < span {
        let m = if rng.gen_bool(spec.spike_probability) {
            rng.gen_range(3.5..8.0)
        } else {
            rng.gen_range(0.6..1.4)
        };
        out.push((t, m));
        let len = rng.gen_range(spec.min_segment..=spec.max_segment);
        t += (len / 60.0).round() * 60.0;
    }
    out
}

/// One series per catalog type covering `[0, span]`.
pub fn synthetic_trace(catalog: &[InstanceType], spec: &SyntheticTraceSpec) -> Result<SpotPriceTrace, CloudError> {
    let span = spec.span();
    let mut trace = SpotPriceTrace::new();
    for (i, it) in catalog.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let segments = multipliers(spec, &mut rng);
        let area: f64 = segments
            .iter()
            .enumerate()
            .map(|(k, &(t, m))| {
                let end = segments.get(k + 1).map_or(span, |s| s.0);
                m * (end - t)
            })
            .sum();
        let scale = spec.mean_fraction * it.on_demand_price * span / area;
        for (t, m) in segments {
            let price = ((m * scale) * 1e6).round().max(1.0) / 1e6;
            trace.push(&it.name, t, price)?;
        }
    }
    Ok(trace)
}
