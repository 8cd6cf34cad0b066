//! Two-sample rank tests and descriptive statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, Median, Statistics};
use thiserror::Error;

/// Pooled sizes up to this use the exact permutation distribution.
pub const EXACT_MAX_TOTAL: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
    #[error("sample `{0}` contains a non-finite value")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The first sample is significantly smaller.
    Better,
    /// The first sample is significantly larger.
    Worse,
    NotSignificant,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::NotSignificant => "not-significant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub verdict: Verdict,
    pub exact: bool,
}

/// Mid-ranks (1-based) of `values`, doubled so ties stay integral.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share rank ((i+1)+(j+1))/2
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p of the doubled rank sum `observed` under random relabelling.
fn exact_p(ranks: &[u64], n_a: usize, observed: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0u64; width]; n_a + 1];
    ways[0][0] = 1;
    for &r in ranks {
        for k in (1..=n_a).rev() {
            for s in (r as usize..width).rev() {
                ways[k][s] += ways[k - 1][s - r as usize];
            }
        }
    }
    let centre = (n_a as u64 * (ranks.len() as u64 + 1)) as i64;
    let dist = (observed as i64 - centre).abs();
    let (mut hit, mut total) = (0u64, 0u64);
    for (s, &count) in ways[n_a].iter().enumerate() {
        total += count;
        if (s as i64 - centre).abs() >= dist {
            hit += count;
        }
    }
    hit as f64 / total as f64
}

fn normal_p(values: &[f64], n_a: usize, n_b: usize, u: f64) -> f64 {
    let n = (n_a + n_b) as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * std.sf(z)).clamp(0.0, 1.0)
}

/// Two-sided Mann–Whitney U test of `a` against `b`.
///
/// The verdict is `Better` when `a` is significantly smaller at `alpha`.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alpha: f64) -> Result<MannWhitney, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("a"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("b"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let (n_a, n_b) = (a.len(), b.len());
    let w2: u64 = ranks[..n_a].iter().sum();
    let u = w2 as f64 / 2.0 - (n_a * (n_a + 1)) as f64 / 2.0;
    let exact = n_a + n_b <= EXACT_MAX_TOTAL;
    let p = if exact {
        exact_p(&ranks, n_a, w2)
    } else {
        normal_p(&pooled, n_a, n_b, u)
    };
    let mean = (n_a * n_b) as f64 / 2.0;
    let verdict = if p >= alpha {
        Verdict::NotSignificant
    } else if u < mean {
        Verdict::Better
    } else {
        Verdict::Worse
    };
    Ok(MannWhitney { u, p, verdict, exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn describe(values: &[f64]) -> Option<Descriptive> {
    if values.is_empty() {
        return None;
    }
    let sd = if values.len() > 1 { values.std_dev() } else { 0.0 };
    Some(Descriptive {
        n: values.len(),
        mean: values.mean(),
        median: Data::new(values.to_vec()).median(),
        sd,
        min: values.min(),
        max: values.max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u_by_pairs(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }

    /// Relabels the pooled data in every possible way.
    fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = pooled.len();
        let centre = (a.len() * b.len()) as f64 / 2.0;
        let observed = (u_by_pairs(a, b) - centre).abs();
        let (mut hit, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != a.len() {
                continue;
            }
            let (x, y): (Vec<_>, Vec<_>) = (0..n).partition(|&i| mask & (1 << i) != 0);
            let x: Vec<f64> = x.into_iter().map(|i| pooled[i]).collect();
            let y: Vec<f64> = y.into_iter().map(|i| pooled[i]).collect();
            total += 1;
            if (u_by_pairs(&x, &y) - centre).abs() >= observed {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn separated_pair() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], 0.001).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::NotSignificant);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 3.0, 3.0];
        let r = mann_whitney_u(&a, &a, 0.001).unwrap();
        assert_eq!(r.u, 4.5);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn maximal_separation_is_better() {
        let a: Vec<f64> = (1..=8).map(f64::from).collect();
        let b: Vec<f64> = (9..=16).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b, 0.001).unwrap();
        assert!(r.exact);
        assert!((r.p - 2.0 / 12870.0).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Better);
        assert_eq!(mann_whitney_u(&b, &a, 0.001).unwrap().verdict, Verdict::Worse);
    }

    #[test]
    fn interleaved_is_not_significant() {
        let a: Vec<f64> = (0..15).map(|i| (2 * i) as f64).collect();
        let b: Vec<f64> = (0..15).map(|i| (2 * i + 1) as f64).collect();
        let r = mann_whitney_u(&a, &b, 0.001).unwrap();
        assert!(!r.exact);
        assert_eq!(r.verdict, Verdict::NotSignificant);
    }

    #[test]
    fn large_separated_samples_use_normal_tail() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (100..130).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b, 0.001).unwrap();
        assert_eq!(r.u, 0.0);
        // z = (450 - 0.5) / sqrt(30*30*61/12)
        let z: f64 = 449.5 / (900.0f64 * 61.0 / 12.0).sqrt();
        let std = Normal::new(0.0, 1.0).unwrap();
        assert!((r.p - 2.0 * std.sf(z)).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Better);
    }

    #[test]
    fn empty_samples_fail() {
        assert_eq!(mann_whitney_u(&[], &[1.0], 0.1), Err(StatsError::EmptySample("a")));
        assert_eq!(mann_whitney_u(&[1.0], &[], 0.1), Err(StatsError::EmptySample("b")));
        assert_eq!(mann_whitney_u(&[f64::NAN], &[1.0], 0.1), Err(StatsError::NonFinite("a")));
    }

    #[test]
    fn midranks_of_ties() {
        assert_eq!(doubled_midranks(&[5.0, 1.0, 5.0, 2.0]), vec![7, 2, 7, 4]);
    }

    #[test]
    fn describe_values() {
        let d = describe(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((d.n, d.mean, d.median, d.min, d.max), (4, 2.5, 2.5, 1.0, 4.0));
        assert!((d.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(describe(&[7.0]).unwrap().sd, 0.0);
        assert!(describe(&[]).is_none());
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            a in prop::collection::vec(0u8..5, 1..6),
            b in prop::collection::vec(0u8..5, 1..6),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = mann_whitney_u(&a, &b, 0.05).unwrap();
            prop_assert_eq!(r.u, u_by_pairs(&a, &b));
            prop_assert!((r.p - enumerated_p(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn swapping_flips_verdict(
            a in prop::collection::vec(0u8..20, 1..25),
            b in prop::collection::vec(0u8..20, 1..25),
            alpha in 0.001f64..0.5,
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b, alpha).unwrap();
            let ba = mann_whitney_u(&b, &a, alpha).unwrap();
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
            prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
            let flipped = match ab.verdict {
                Verdict::Better => Verdict::Worse,
                Verdict::Worse => Verdict::Better,
                Verdict::NotSignificant => Verdict::NotSignificant,
            };
            prop_assert_eq!(ba.verdict, flipped);
        }
    }
}
