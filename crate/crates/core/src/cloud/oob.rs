//! Out-of-bid probability curves estimated from historical spot prices with a
//! sliding window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CloudError, InstanceType, SpotPriceTrace};

pub const DEFAULT_WINDOW: f64 = 3600.0;
pub const DEFAULT_STEP: f64 = 300.0;
pub const DEFAULT_GRID_POINTS: usize = 50;

/// `P(bid)` sampled on an ascending bid grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobCurve {
    pub bids: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl OobCurve {
    /// Step interpolation: the probability of the largest grid bid not above
    /// `bid`; 1 below the grid and 0 above it.
    pub fn probability(&self, bid: f64) -> f64 {
        let (Some(&first), Some(&last)) = (self.bids.first(), self.bids.last()) else {
            return 1.0;
        };
        if bid < first {
            return 1.0;
        }
        if bid > last {
            return 0.0;
        }
        let idx = self.bids.partition_point(|&b| b <= bid);
        self.probabilities[idx - 1]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OobProbabilityModel {
    pub curves: BTreeMap<String, OobCurve>,
}

impl OobProbabilityModel {
    pub fn curve(&self, instance_type: &str) -> Option<&OobCurve> {
        self.curves.get(instance_type)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CloudError> {
        let model: OobProbabilityModel =
            serde_json::from_str(text).map_err(|e| CloudError::Parse(e.to_string()))?;
        for (name, curve) in &model.curves {
            validate_grid(name, &curve.bids)?;
            if curve.bids.len() != curve.probabilities.len()
                || curve.probabilities.iter().any(|p| !(0.0..=1.0).contains(p))
            {
                return Err(CloudError::Parse(format!("{name}: malformed probabilities")));
            }
        }
        Ok(model)
    }
}

pub fn lookup_oob_probability(
    model: &OobProbabilityModel,
    it: &InstanceType,
    bid: f64,
) -> Result<f64, CloudError> {
    model
        .curve(&it.name)
        .map(|c| c.probability(bid))
        .ok_or_else(|| CloudError::UnknownType(it.name.clone()))
}

fn validate_grid(name: &str, grid: &[f64]) -> Result<(), CloudError> {
    if grid.is_empty() {
        return Err(CloudError::EmptyGrid(name.to_string()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|b| !b.is_finite()) {
        return Err(CloudError::UnsortedGrid(name.to_string()));
    }
    Ok(())
}

/// Maximum price over each window `[s, s + window)` for start positions
/// `s = t0, t0 + step, ...` strictly before the last change point.
pub fn window_maxima(
    series: &[super::PricePoint],
    window: f64,
    step: f64,
) -> Vec<f64> {
    let Some((first, last)) = series.first().zip(series.last()) else {
        return Vec::new();
    };
    let mut maxima = Vec::new();
    let mut current = 0;
    let mut k = 0u64;
    loop {
        let s = first.time + k as f64 * step;
        if s >= last.time {
            break;
        }
        while current + 1 < series.len() && series[current + 1].time <= s {
            current += 1;
        }
        let mut peak = series[current].price;
        for p in &series[current + 1..] {
            if p.time >= s + window {
                break;
            }
            peak = peak.max(p.price);
        }
        maxima.push(peak);
        k += 1;
    }
    maxima
}

/// Estimates `P_i(b)`: the fraction of window positions whose maximum price
/// strictly exceeds `b`.
pub fn estimate_oob_model(
    training: &SpotPriceTrace,
    grids: &BTreeMap<String, Vec<f64>>,
    window: f64,
    step: f64,
) -> Result<OobProbabilityModel, CloudError> {
    if training.is_empty() {
        return Err(CloudError::EmptyTrace);
    }
    assert!(window > 0.0 && step > 0.0, "window and step must be positive");
    let mut curves = BTreeMap::new();
    for (name, grid) in grids {
        validate_grid(name, grid)?;
        let series = training
            .series(name)
            .ok_or_else(|| CloudError::MissingTrace(name.clone()))?;
        let span = series.last().unwrap().time - series[0].time;
        if span < window {
            return Err(CloudError::InsufficientSpan {
                instance_type: name.clone(),
                span,
                window,
            });
        }
        let mut maxima = window_maxima(series, window, step);
        maxima.sort_by(f64::total_cmp);
        let positions = maxima.len() as f64;
        let probabilities = grid
            .iter()
            .map(|&b| {
                let at_or_below = maxima.partition_point(|&m| m <= b);
                ((maxima.len() - at_or_below) as f64 / positions).clamp(0.0, 1.0)
            })
            .collect();
        curves.insert(
            name.clone(),
            OobCurve {
                bids: grid.clone(),
                probabilities,
            },
        );
    }
    Ok(OobProbabilityModel { curves })
}

/// `points` evenly spaced bids from `low` to `high` inclusive.
pub fn linear_grid(low: f64, high: f64, points: usize) -> Vec<f64> {
    assert!(points >= 1);
    if points == 1 || high <= low {
        return vec![low];
    }
    let step = (high - low) / (points - 1) as f64;
    (0..points).map(|i| low + step * i as f64).collect()
}

/// Per-type grid from the historical minimum spot price to the on-demand
/// price. Types absent from the training trace are skipped.
pub fn catalog_grids(
    training: &SpotPriceTrace,
    catalog: &[InstanceType],
    points: usize,
) -> BTreeMap<String, Vec<f64>> {
    catalog
        .iter()
        .filter_map(|it| {
            let series = training.series(&it.name)?;
            let low = series.iter().map(|p| p.price).fold(f64::INFINITY, f64::min);
            Some((it.name.clone(), linear_grid(low, it.on_demand_price.max(low), points)))
        })
        .collect()
}

/// Trains the model on the trace strictly before `split`.
pub fn estimate_for_catalog(
    trace: &SpotPriceTrace,
    split: f64,
    catalog: &[InstanceType],
    window: f64,
    step: f64,
    points: usize,
) -> Result<OobProbabilityModel, CloudError> {
    let training = trace.before(split);
    let grids = catalog_grids(&training, catalog, points);
    estimate_oob_model(&training, &grids, window, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_level_trace() -> SpotPriceTrace {
        let mut t = SpotPriceTrace::new();
        t.push("a", 0.0, 0.010).unwrap();
        t.push("a", 3600.0, 0.030).unwrap();
        t.push("a", 7200.0, 0.012).unwrap();
        t
    }

    /// Independent route: explicit window enumeration with a linear scan of
    /// the step function at every change point inside the window.
    fn brute_force(series: &[crate::cloud::PricePoint], window: f64, step: f64, bid: f64) -> f64 {
        let t0 = series[0].time;
        let t_last = series.last().unwrap().time;
        let price_at = |t: f64| {
            let mut p = None;
            for pt in series {
                if pt.time <= t {
                    p = Some(pt.price);
                }
            }
            p.unwrap()
        };
        let mut hits = 0;
        let mut total = 0;
        let mut s = t0;
        while s < t_last {
            let mut peak = price_at(s);
            for pt in series {
                if pt.time > s && pt.time < s + window {
                    peak = peak.max(pt.price);
                }
            }
            if peak > bid {
                hits += 1;
            }
            total += 1;
            s = t0 + total as f64 * step;
        }
        hits as f64 / total as f64
    }

    fn grid(bids: &[f64]) -> BTreeMap<String, Vec<f64>> {
        BTreeMap::from([("a".to_string(), bids.to_vec())])
    }

    #[test]
    fn sliding_window_examples() {
        let model = estimate_oob_model(&three_level_trace(), &grid(&[0.005, 0.020, 0.030]), 3600.0, 1800.0).unwrap();
        let curve = model.curve("a").unwrap();
        assert_eq!(curve.probabilities, vec![1.0, 0.75, 0.0]);
        assert_eq!(window_maxima(three_level_trace().series("a").unwrap(), 3600.0, 1800.0).len(), 4);
    }

    #[test]
    fn lookup_examples() {
        let curve = OobCurve {
            bids: vec![0.010, 0.015, 0.020],
            probabilities: vec![0.3, 0.08, 0.02],
        };
        assert_eq!(curve.probability(0.017), 0.08);
        assert_eq!(curve.probability(0.020), 0.02);
        assert_eq!(curve.probability(0.001), 1.0);
        assert_eq!(curve.probability(0.5), 0.0);
        let model = OobProbabilityModel {
            curves: BTreeMap::from([("t2.micro".to_string(), curve)]),
        };
        let cat = crate::cloud::catalog::default_catalog();
        assert_eq!(lookup_oob_probability(&model, &cat[0], 0.017).unwrap(), 0.08);
        assert!(lookup_oob_probability(&model, &cat[1], 0.017).is_err());
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            estimate_oob_model(&SpotPriceTrace::new(), &grid(&[0.1]), 3600.0, 300.0),
            Err(CloudError::EmptyTrace)
        ));
        assert!(matches!(
            estimate_oob_model(&three_level_trace(), &grid(&[]), 3600.0, 300.0),
            Err(CloudError::EmptyGrid(_))
        ));
        assert!(matches!(
            estimate_oob_model(&three_level_trace(), &grid(&[0.2, 0.1]), 3600.0, 300.0),
            Err(CloudError::UnsortedGrid(_))
        ));
        assert!(matches!(
            estimate_oob_model(&three_level_trace(), &grid(&[0.1]), 8000.0, 300.0),
            Err(CloudError::InsufficientSpan { .. })
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let model = estimate_oob_model(&three_level_trace(), &grid(&[0.005, 0.02]), 3600.0, 600.0).unwrap();
        assert_eq!(OobProbabilityModel::from_json(&model.to_json()).unwrap(), model);
    }

    #[test]
    fn training_ignores_data_after_split() {
        let mut a = three_level_trace();
        a.push("a", 20000.0, 0.015).unwrap();
        let mut b = three_level_trace();
        b.push("a", 20000.0, 9.0).unwrap();
        b.push("a", 20001.0, 0.001).unwrap();
        let cat = vec![InstanceType::new("a", 1, 1.0, 0.05)];
        let ma = estimate_for_catalog(&a, 20000.0, &cat, 3600.0, 300.0, 10).unwrap();
        let mb = estimate_for_catalog(&b, 20000.0, &cat, 3600.0, 300.0, 10).unwrap();
        assert_eq!(ma, mb);
    }

    fn arb_series() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1u32..2000, 1u32..100), 2..25).prop_map(|raw| {
            let mut t = 0.0;
            raw.into_iter()
                .map(|(gap, cents)| {
                    let point = (t, cents as f64 / 1000.0);
                    t += gap as f64 * 10.0;
                    point
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn estimate_matches_brute_force_and_is_monotone(
            raw in arb_series(),
            step in 60.0f64..2000.0,
            window in 600.0f64..5000.0,
        ) {
            let mut trace = SpotPriceTrace::new();
            for (t, p) in &raw {
                trace.push("a", *t, *p).unwrap();
            }
            let series = trace.series("a").unwrap();
            prop_assume!(series.last().unwrap().time - series[0].time >= window);
            let bids = linear_grid(0.0005, 0.11, 40);
            let model = estimate_oob_model(&trace, &grid(&bids), window, step).unwrap();
            let curve = model.curve("a").unwrap();
            for (b, p) in bids.iter().zip(&curve.probabilities) {
                prop_assert!((brute_force(series, window, step, *b) - p).abs() < 1e-12);
            }
            for w in curve.probabilities.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            let max_price = raw.iter().map(|r| r.1).fold(0.0, f64::max);
            let min_price = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            let edges = estimate_oob_model(&trace, &grid(&[min_price * 0.999, max_price]), window, step).unwrap();
            prop_assert_eq!(&edges.curve("a").unwrap().probabilities, &vec![1.0, 0.0]);
        }
    }
}
