use crate::moea::Individual;

/// Min-max normalizes each objective over `points`; constant objectives map
/// to 0.
pub fn normalize_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(m) = points.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in points {
        for k in 0..m {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    points
        .iter()
        .map(|p| {
            (0..m)
                .map(|k| {
                    let range = hi[k] - lo[k];
                    if range > 0.0 && range.is_finite() {
                        (p[k] - lo[k]) / range
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Euclidean distance to the origin, the ideal point in normalized space.
pub fn ideal_distance(normalized: &[f64]) -> f64 {
    normalized.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index of the front member closest to the ideal point after
/// normalization; ties go to the lexicographically smallest raw objectives.
pub fn select_solution(front: &[Individual]) -> usize {
    assert!(!front.is_empty(), "selection from an empty front");
    let raw: Vec<Vec<f64>> = front.iter().map(|i| i.objectives.clone()).collect();
    let dist: Vec<f64> = normalize_front(&raw).iter().map(|p| ideal_distance(p)).collect();
    let lex = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    (0..front.len())
        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then_with(|| lex(&raw[a], &raw[b])))
        .unwrap()
}
