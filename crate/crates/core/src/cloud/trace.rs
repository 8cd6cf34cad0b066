use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CloudError, InstanceType};

/// A price change point: from `time` on, the market price is `price` USD/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub time: f64,
    pub price: f64,
}

/// Spot price history per instance type, as right-continuous step functions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpotPriceTrace {
    series: BTreeMap<String, Vec<PricePoint>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TraceRow {
    timestamp: i64,
    instance_type: String,
    price: f64,
}

/// Parses a trace CSV with header `timestamp,instance_type,price`.
pub fn load_spot_trace(text: &str) -> Result<SpotPriceTrace, CloudError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CloudError::Parse(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "instance_type", "price"] {
        return Err(CloudError::Parse(format!(
            "expected header `timestamp,instance_type,price`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut trace = SpotPriceTrace::default();
    for (line, row) in reader.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| CloudError::Parse(format!("row {}: {e}", line + 2)))?;
        trace.push(&row.instance_type, row.timestamp as f64, row.price)?;
    }
    if trace.series.is_empty() {
        return Err(CloudError::EmptyTrace);
    }
    Ok(trace)
}

impl SpotPriceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a change point; timestamps must be strictly increasing per type.
    pub fn push(&mut self, instance_type: &str, time: f64, price: f64) -> Result<(), CloudError> {
        if !(price.is_finite() && price > 0.0) {
            return Err(CloudError::NonPositivePrice {
                instance_type: instance_type.to_string(),
                time,
            });
        }
        let series = self.series.entry(instance_type.to_string()).or_default();
        if let Some(last) = series.last() {
            if time <= last.time {
                return Err(CloudError::NonMonotone {
                    instance_type: instance_type.to_string(),
                    time,
                });
            }
        }
        series.push(PricePoint { time, price });
        Ok(())
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn series(&self, instance_type: &str) -> Option<&[PricePoint]> {
        self.series.get(instance_type).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Price of the latest change point at or before `t`.
    pub fn price_at(&self, instance_type: &str, t: f64) -> Result<f64, CloudError> {
        let series = self
            .series
            .get(instance_type)
            .ok_or_else(|| CloudError::UnknownType(instance_type.to_string()))?;
        let idx = series.partition_point(|p| p.time <= t);
        if idx == 0 {
            return Err(CloudError::BeforeTraceStart {
                instance_type: instance_type.to_string(),
                time: t,
            });
        }
        Ok(series[idx - 1].price)
    }

    /// Latest change-point timestamp over all types.
    pub fn end(&self) -> f64 {
        self.series
            .values()
            .filter_map(|s| s.last())
            .map(|p| p.time)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Earliest change-point timestamp over all types.
    pub fn start(&self) -> f64 {
        self.series
            .values()
            .filter_map(|s| s.first())
            .map(|p| p.time)
            .fold(f64::INFINITY, f64::min)
    }

    /// Only the change points strictly before `split`.
    pub fn before(&self, split: f64) -> SpotPriceTrace {
        let series = self
            .series
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().copied().filter(|p| p.time < split).collect::<Vec<_>>()))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        SpotPriceTrace { series }
    }

    /// The step function from `split` on: the price in force at `split` (if
    /// any) becomes a change point at `split`.
    pub fn from_time(&self, split: f64) -> SpotPriceTrace {
        let mut series = BTreeMap::new();
        for (k, v) in &self.series {
            let idx = v.partition_point(|p| p.time <= split);
            let mut out = Vec::with_capacity(v.len() - idx + 1);
            if idx > 0 {
                out.push(PricePoint {
                    time: split,
                    price: v[idx - 1].price,
                });
            }
            out.extend_from_slice(&v[idx..]);
            if !out.is_empty() {
                series.insert(k.clone(), out);
            }
        }
        SpotPriceTrace { series }
    }

    /// Serializes to the CSV trace format, rows ordered by time then type.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(i64, &str, f64)> = self
            .series
            .iter()
            .flat_map(|(k, v)| v.iter().map(move |p| (p.time as i64, k.as_str(), p.price)))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
        let mut out = String::from("timestamp,instance_type,price\n");
        for (t, k, p) in rows {
            out.push_str(&format!("{t},{k},{p:.6}\n"));
        }
        out
    }

    /// Time-weighted mean price of a type over `[from, to)`.
    pub fn mean_price(&self, instance_type: &str, from: f64, to: f64) -> Result<f64, CloudError> {
        let series = self
            .series(instance_type)
            .ok_or_else(|| CloudError::UnknownType(instance_type.to_string()))?;
        let mut area = 0.0;
        let mut t = from;
        let mut price = self.price_at(instance_type, from)?;
        for p in series.iter().filter(|p| p.time > from && p.time < to) {
            area += price * (p.time - t);
            t = p.time;
            price = p.price;
        }
        area += price * (to - t);
        Ok(area / (to - from))
    }
}

/// Market price of `it` at time `t`.
pub fn spot_price_at(trace: &SpotPriceTrace, it: &InstanceType, t: f64) -> Result<f64, CloudError> {
    trace.price_at(&it.name, t)
}
