//! Shared helpers for the integration suites: golden data, an
//! independent KKT certificate checker, a brute-force simplex oracle, a
//! symmetric eigenvalue routine, and a quadrature oracle for option
//! prices. None of this shares code with the library's solvers.

#![allow(dead_code)]

use std::path::PathBuf;

use sheetlink::value::Matrix;

/// Six months of returns for the three funds, row-major fractions.
pub const RETURNS: [[f64; 3]; 6] = [
    [0.07125, 0.04125, 0.08375],
    [0.05125, 0.05125, 0.03875],
    [-0.01375, 0.05750, 0.10500],
    [0.07750, 0.06000, 0.14750],
    [0.08250, 0.06375, -0.03625],
    [0.12625, 0.06125, 0.09125],
];

/// The nine visible golden frontier rows: (risk, ror, weights),
/// fractions.
pub const GOLDEN_ROWS: [(f64, f64, [f64; 3]); 9] = [
    (0.00730, 0.05643, [0.003, 0.961, 0.035]),
    (0.00760, 0.05723, [0.040, 0.897, 0.063]),
    (0.00844, 0.05803, [0.077, 0.833, 0.090]),
    (0.00968, 0.05883, [0.113, 0.769, 0.118]),
    (0.01118, 0.05964, [0.150, 0.705, 0.145]),
    (0.01287, 0.06044, [0.187, 0.640, 0.173]),
    (0.01466, 0.06124, [0.223, 0.576, 0.200]),
    (0.01653, 0.06204, [0.260, 0.512, 0.228]),
    (0.01846, 0.06284, [0.297, 0.448, 0.255]),
];

pub const GOLDEN_TOL: f64 = 5e-4;

pub fn returns_matrix() -> Matrix {
    let data: Vec<f64> = RETURNS.iter().flatten().copied().collect();
    Matrix::new(6, 3, data).unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Independent first-order optimality certificate for
/// `min w' Sigma w` s.t. `sum w = 1`, optionally `mu . w = target`,
/// `w >= 0`. Multipliers come from least squares over the equations at
/// coordinates with strictly positive weight; all residuals must clear
/// `tol`.
pub fn check_kkt(mu: &[f64], sigma: &Matrix, w: &[f64], target: Option<f64>, tol: f64) -> Result<(), String> {
    let k = w.len();
    let feas_tol = 1e-9;

    let budget: f64 = w.iter().sum();
    if (budget - 1.0).abs() > feas_tol {
        return Err(format!("budget violated: sum w = {budget}"));
    }
    if let Some(t) = target {
        let ror: f64 = mu.iter().zip(w).map(|(m, x)| m * x).sum();
        if (ror - t).abs() > 1e-8 {
            return Err(format!("return constraint violated: {ror} vs target {t}"));
        }
    }
    for (i, &x) in w.iter().enumerate() {
        if x < -feas_tol {
            return Err(format!("negative weight w[{i}] = {x}"));
        }
    }

    let grad: Vec<f64> = (0..k)
        .map(|i| 2.0 * (0..k).map(|j| sigma.get(i, j) * w[j]).sum::<f64>())
        .collect();
    let free: Vec<usize> = (0..k).filter(|&i| w[i] > 1e-7).collect();

    // stationarity on free coordinates: grad_i = nu0 + nu1 * mu_i
    let (nu0, nu1) = if target.is_some() {
        let n = free.len() as f64;
        let sx: f64 = free.iter().map(|&i| mu[i]).sum();
        let sxx: f64 = free.iter().map(|&i| mu[i] * mu[i]).sum();
        let sy: f64 = free.iter().map(|&i| grad[i]).sum();
        let sxy: f64 = free.iter().map(|&i| mu[i] * grad[i]).sum();
        let det = n * sxx - sx * sx;
        if det.abs() > 1e-14 * (1.0 + sxx) {
            ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
        } else {
            // Underdetermined (one free coordinate, or equal free means):
            // any nu1 satisfies stationarity, so pick one inside the
            // interval the bound-multiplier inequalities allow.
            let mu_f = sx / n;
            let g_f = sy / n;
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for i in 0..k {
                if free.contains(&i) {
                    continue;
                }
                let denom = mu[i] - mu_f;
                let c = grad[i] - g_f;
                if denom.abs() < 1e-12 {
                    continue; // nu1-independent; the generic check below decides
                } else if denom > 0.0 {
                    hi = hi.min(c / denom);
                } else {
                    lo = lo.max(c / denom);
                }
            }
            let nu1 = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo.max(0.0),
                (false, true) => hi.min(0.0),
                (false, false) => 0.0,
            };
            (g_f - nu1 * mu_f, nu1)
        }
    } else {
        (free.iter().map(|&i| grad[i]).sum::<f64>() / free.len() as f64, 0.0)
    };

    for &i in &free {
        let r = grad[i] - nu0 - nu1 * mu[i];
        if r.abs() > tol {
            return Err(format!("stationarity residual {r} at free index {i}"));
        }
    }
    for i in 0..k {
        if free.contains(&i) {
            continue;
        }
        let lambda = grad[i] - nu0 - nu1 * mu[i];
        if lambda < -tol {
            return Err(format!("negative bound multiplier {lambda} at index {i}"));
        }
        if (lambda * w[i]).abs() > tol {
            return Err(format!("complementarity violated at index {i}"));
        }
    }
    Ok(())
}

/// Brute-force minimum variance over the 3-asset simplex at the given
/// weight resolution, restricted to the slice near the target return.
/// Returns the smallest variance found, or None if no grid point lands
/// in the slice.
pub fn brute_force_min_variance(
    mu: &[f64; 3],
    sigma: &Matrix,
    target: f64,
    step: f64,
    return_slack: f64,
) -> Option<f64> {
    let n = (1.0 / step).round() as usize;
    let mut best: Option<f64> = None;
    for i in 0..=n {
        for j in 0..=(n - i) {
            let w = [
                i as f64 / n as f64,
                j as f64 / n as f64,
                (n - i - j) as f64 / n as f64,
            ];
            let ror = mu[0] * w[0] + mu[1] * w[1] + mu[2] * w[2];
            if (ror - target).abs() > return_slack {
                continue;
            }
            let mut v = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    v += w[a] * sigma.get(a, b) * w[b];
                }
            }
            best = Some(match best {
                Some(b) if b <= v => b,
                _ => v,
            });
        }
    }
    best
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j)).collect())
        .collect();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Discounted risk-neutral expectation of the call payoff under a
/// lognormal terminal price, by Simpson's rule over the return density.
/// Accurate to well under 1e-8 for moderate parameters.
pub fn lognormal_call_oracle(spot: f64, strike: f64, rate: f64, sigma: f64, years: f64) -> f64 {
    let m = (rate - 0.5 * sigma * sigma) * years;
    let s = sigma * years.sqrt();
    // integrate over z in [-12, 12] standard deviations
    let lo = -12.0;
    let hi = 12.0;
    let steps = 40_000; // even
    let h = (hi - lo) / steps as f64;
    let integrand = |z: f64| -> f64 {
        let st = spot * (m + s * z).exp();
        let payoff = (st - strike).max(0.0);
        payoff * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut acc = integrand(lo) + integrand(hi);
    for i in 1..steps {
        let z = lo + i as f64 * h;
        acc += integrand(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (-rate * years).exp() * acc * h / 3.0
}
