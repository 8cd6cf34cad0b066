use super::MoeaError;

/// Exact hypervolume (minimization) of the region dominated by `front` and
/// bounded by `reference`, by recursive slicing along the last objective.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64]) -> Result<f64, MoeaError> {
    let d = reference.len();
    for (index, p) in front.iter().enumerate() {
        if p.len() != d {
            return Err(MoeaError::DimensionMismatch { index, found: p.len(), expected: d });
        }
        if p.iter().zip(reference).any(|(x, r)| !x.is_finite() || x > r) {
            return Err(MoeaError::OutsideReference { index });
        }
    }
    if front.is_empty() || d == 0 {
        return Ok(0.0);
    }
    let pts: Vec<&[f64]> = front.iter().map(Vec::as_slice).collect();
    Ok(slice(pts, reference, d))
}

fn slice(mut pts: Vec<&[f64]>, reference: &[f64], d: usize) -> f64 {
    match d {
        1 => reference[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let mut area = 0.0;
            let mut floor = reference[1];
            for p in pts {
                if p[1] < floor {
                    area += (reference[0] - p[0]) * (floor - p[1]);
                    floor = p[1];
                }
            }
            area
        }
        _ => {
            let k = d - 1;
            pts.sort_by(|a, b| a[k].total_cmp(&b[k]));
            let mut volume = 0.0;
            for i in 0..pts.len() {
                let top = pts.get(i + 1).map_or(reference[k], |p| p[k]);
                let depth = top - pts[i][k];
                if depth > 0.0 {
                    volume += slice(pts[..=i].to_vec(), reference, k) * depth;
                }
            }
            volume
        }
    }
}
