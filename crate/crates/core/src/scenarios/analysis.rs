use std::f64::consts::{PI, TAU};

use crate::grid::TransverseGrid;

/// Mean spacing of the rising zero crossings of the mean-subtracted profile
/// within `|x - center| <= half_window`. Crossings are located by linear
/// interpolation. `None` unless at least `min_periods` periods are seen.
pub fn fringe_period(grid: &TransverseGrid, profile: &[f64], half_window: f64, min_periods: usize) -> Option<f64> {
    let c = grid.center();
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .samples()
        .zip(profile.iter().copied())
        .filter(|(x, _)| (x - c).abs() <= half_window)
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut crossings = Vec::new();
    for i in 0..xs.len() - 1 {
        let (a, b) = (ys[i] - mean, ys[i + 1] - mean);
        if a < 0.0 && b >= 0.0 {
            crossings.push(xs[i] - a * (xs[i + 1] - xs[i]) / (b - a));
        }
    }
    let periods = crossings.len().checked_sub(1)?;
    if periods < min_periods.max(1) {
        return None;
    }
    Some((crossings[periods] - crossings[0]) / periods as f64)
}

/// `(max - min) / (max + min)` within `|x - center| <= half_window`.
pub fn visibility(grid: &TransverseGrid, profile: &[f64], half_window: f64) -> f64 {
    let c = grid.center();
    let (lo, hi) = grid
        .samples()
        .zip(profile)
        .filter(|(x, _)| (x - c).abs() <= half_window)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &p)| {
            (lo.min(p), hi.max(p))
        });
    if hi + lo > 0.0 {
        (hi - lo) / (hi + lo)
    } else {
        0.0
    }
}

/// Removes 2π jumps between consecutive samples.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut shift = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d = p - phase[i - 1];
            if d > PI {
                shift -= TAU * ((d - PI) / TAU).ceil();
            } else if d < -PI {
                shift += TAU * ((-d - PI) / TAU).ceil();
            }
        }
        out.push(p + shift);
    }
    out
}

/// Least-squares coefficient `c2` of `c0 + c1 x + c2 x²`.
pub fn quadratic_coefficient(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 3 || x.len() != y.len() {
        return None;
    }
    // scale to [-1, 1] for conditioning
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    if !(half > 0.0) {
        return None;
    }
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (&xv, &yv) in x.iter().zip(y) {
        let u = (xv - mid) / half;
        let row = [1.0, u, u * u];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * yv;
        }
    }
    let c = solve3(ata, atb)?;
    Some(c[2] / (half * half))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// `min_α ‖α·measured − reference‖ / ‖reference‖`: relative L2 distance of
/// the shapes, insensitive to overall scale.
pub fn scale_fitted_l2(measured: &[f64], reference: &[f64]) -> f64 {
    let mm: f64 = measured.iter().map(|m| m * m).sum();
    let mr: f64 = measured.iter().zip(reference).map(|(m, r)| m * r).sum();
    let rr: f64 = reference.iter().map(|r| r * r).sum();
    let alpha = if mm > 0.0 { mr / mm } else { 0.0 };
    let err: f64 = measured
        .iter()
        .zip(reference)
        .map(|(m, r)| (alpha * m - r).powi(2))
        .sum();
    (err / rr).sqrt()
}
