//! Savitzky-Golay smoothing.
//!
//! The smoothed value at each sample is the center evaluation of the
//! least-squares polynomial fit over an odd window; because the fit is
//! linear in the data it reduces to a fixed convolution. Boundaries are
//! handled by mirror reflection of the signal about the edge sample.

use super::{ReflectanceCurve, R_MAX};
use crate::error::{Error, Result};

/// Solve a small dense symmetric system by Gaussian elimination with
/// partial pivoting. Sizes here are at most `degree + 1`.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::Domain("singular normal equations".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Convolution weights whose dot product with a window of samples equals the
/// center evaluation of the least-squares polynomial of `degree`.
pub fn savgol_weights(window: usize, degree: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::Parameter(format!("window {window} must be odd")));
    }
    if window <= degree {
        return Err(Error::Parameter(format!(
            "window {window} must exceed degree {degree}"
        )));
    }
    if window == 1 {
        return Ok(vec![1.0]);
    }
    let half = ((window - 1) / 2) as isize;
    let scale = half as f64;
    // Positions scaled to [-1, 1] keep the normal equations well conditioned.
    let positions: Vec<f64> = (-half..=half).map(|p| p as f64 / scale).collect();
    let n_coef = degree + 1;
    let mut gram = vec![vec![0.0; n_coef]; n_coef];
    for (a, row) in gram.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            *entry = positions.iter().map(|t| t.powi((a + b) as i32)).sum();
        }
    }
    let mut rhs = vec![0.0; n_coef];
    rhs[0] = 1.0;
    let z = solve_dense(gram, rhs)?;
    Ok(positions
        .iter()
        .map(|t| z.iter().enumerate().map(|(j, &zj)| zj * t.powi(j as i32)).sum())
        .collect())
}

fn mirror_index(j: isize, n: usize) -> usize {
    let n = n as isize;
    let m = if j < 0 {
        -j
    } else if j >= n {
        2 * (n - 1) - j
    } else {
        j
    };
    m as usize
}

/// Smooth a reflectance curve. Invalid channels are zeroed in the output and
/// the result is clamped to `[0, R_MAX]` like every reflectance curve.
pub fn savgol_smooth(
    curve: &ReflectanceCurve,
    window: usize,
    degree: usize,
) -> Result<ReflectanceCurve> {
    let n = curve.len();
    if window > n {
        return Err(Error::Parameter(format!(
            "window {window} exceeds curve length {n}"
        )));
    }
    let weights = savgol_weights(window, degree)?;
    let half = ((window - 1) / 2) as isize;
    let x = &curve.values;
    let values = (0..n as isize)
        .map(|c| {
            if !curve.valid_mask[c as usize] {
                return 0.0;
            }
            let mut acc = 0.0;
            for (wi, p) in (-half..=half).enumerate() {
                acc += weights[wi] * x[mirror_index(c + p, n)];
            }
            acc.clamp(0.0, R_MAX)
        })
        .collect();
    Ok(ReflectanceCurve {
        values,
        valid_mask: curve.valid_mask.clone(),
    })
}
