use crate::error::{precondition, Result};

/// Euclidean projection onto `{x >= 0, sum x = mass}`.
///
/// Sort-and-threshold: the projection is `max(v - theta, 0)` where `theta`
/// is fixed by the largest prefix of the sorted values that stays active.
pub fn project_simplex(v: &[f64], mass: f64) -> Result<Vec<f64>> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(precondition(format!("simplex mass must be positive, got {mass}")));
    }
    if v.is_empty() {
        return Err(precondition("cannot project an empty vector onto the simplex"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(precondition("cannot project a vector containing non-finite values"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = 0.0;
    let mut theta = sorted[0] - mass;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - mass) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // Pull the sum back onto `mass` exactly up to one rounding.
    let total: f64 = out.iter().sum();
    if total > 0.0 && total != mass {
        let active = out.iter().filter(|&&x| x > 0.0).count() as f64;
        let shift = (total - mass) / active;
        for x in out.iter_mut().filter(|x| **x > 0.0) {
            *x = (*x - shift).max(0.0);
        }
    }
    Ok(out)
}

/// Euclidean projection onto the l1 ball of the given radius. Points already
/// inside are returned unchanged.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(precondition(format!("l1 radius must be positive, got {radius}")));
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return Ok(v.to_vec());
    }
    let magnitudes: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let shrunk = project_simplex(&magnitudes, radius)?;
    let mut out: Vec<f64> = v.iter().zip(&shrunk).map(|(x, m)| m.copysign(*x)).collect();
    // Rounding can leave the l1 norm a few ulps above the radius.
    let after: f64 = out.iter().map(|x| x.abs()).sum();
    if after > radius {
        let factor = radius / after;
        out.iter_mut().for_each(|x| *x *= factor);
    }
    Ok(out)
}
