//! Mean-variance efficient-frontier engine.
//!
//! Solves `min w' Sigma w` over the fully-invested long-only simplex,
//! optionally pinned to a target expected return, with an active-set
//! method: bound constraints at zero enter and leave a working set, and
//! each equality-restricted subproblem is solved in the null space of the
//! working constraints. Rank-deficient covariance matrices are permitted;
//! tiny pivots are regularized so the solver still lands on a
//! KKT-certified point.

use crate::error::{Error, Result};
use crate::value::Matrix;

const PIVOT_FLOOR: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
const MULTIPLIER_TOL: f64 = 1e-9;

/// One portfolio on the frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    /// Portfolio standard deviation, same units as the input returns.
    pub risk: f64,
    /// Expected portfolio return.
    pub ror: f64,
    pub weights: Vec<f64>,
}

/// The full frontier plus the inputs it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierResult {
    pub points: Vec<FrontierPoint>,
    pub mu: Vec<f64>,
    pub sigma: Matrix,
}

fn check_inputs(mu: &[f64], sigma: &Matrix) -> Result<()> {
    let k = mu.len();
    if k == 0 {
        return Err(Error::Eval("need at least one asset".into()));
    }
    if sigma.rows() != k || sigma.cols() != k {
        return Err(Error::TypeDim(format!(
            "covariance must be {k}x{k}, got {}x{}",
            sigma.rows(),
            sigma.cols()
        )));
    }
    for i in 0..k {
        for j in 0..k {
            if (sigma.get(i, j) - sigma.get(j, i)).abs() > 1e-9 {
                return Err(Error::Eval(format!(
                    "covariance not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Long-only fully-invested portfolio of minimum variance.
pub fn min_variance_portfolio(mu: &[f64], sigma: &Matrix) -> Result<Vec<f64>> {
    check_inputs(mu, sigma)?;
    let k = mu.len();
    let w0 = vec![1.0 / k as f64; k];
    active_set_qp(sigma, &[vec![1.0; k]], &[1.0], w0)
}

/// Minimum-variance portfolio with expected return pinned to `target`.
/// Feasible targets run from the minimum-variance portfolio's return up
/// to the largest single-asset mean.
pub fn solve_qp_target_return(mu: &[f64], sigma: &Matrix, target: f64) -> Result<Vec<f64>> {
    check_inputs(mu, sigma)?;
    let k = mu.len();
    let w_mv = min_variance_portfolio(mu, sigma)?;
    let r_mv: f64 = dot(mu, &w_mv);
    let (best, r_max) = argmax(mu);
    let scale = 1.0 + mu.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if target < r_mv - FEAS_TOL * scale || target > r_max + FEAS_TOL * scale {
        return Err(Error::Eval(format!(
            "infeasible target return {target}: achievable range [{r_mv}, {r_max}]"
        )));
    }
    let target = target.clamp(r_mv.min(r_max), r_max);
    // feasible start: slide from the min-variance point toward the
    // max-mean vertex until the return constraint holds
    let span = r_max - r_mv;
    let alpha = if span.abs() > 1e-15 {
        ((target - r_mv) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut w0 = vec![0.0; k];
    for i in 0..k {
        w0[i] = (1.0 - alpha) * w_mv[i];
    }
    w0[best] += alpha;
    active_set_qp(
        sigma,
        &[vec![1.0; k], mu.to_vec()],
        &[1.0, target],
        w0,
    )
}

/// Trace the efficient frontier at `npts` linearly spaced target returns
/// from the minimum-variance return to the maximum single-asset mean.
pub fn portopt(mu: &[f64], sigma: &Matrix, npts: usize) -> Result<FrontierResult> {
    check_inputs(mu, sigma)?;
    if npts < 2 {
        return Err(Error::Eval(format!("portopt needs npts >= 2, got {npts}")));
    }
    let w_mv = min_variance_portfolio(mu, sigma)?;
    let r_mv = dot(mu, &w_mv);
    let (_, r_max) = argmax(mu);
    let mut points = Vec::with_capacity(npts);
    for i in 0..npts {
        let t = i as f64 / (npts - 1) as f64;
        let target = r_mv + t * (r_max - r_mv);
        let weights = if i == 0 {
            w_mv.clone()
        } else {
            solve_qp_target_return(mu, sigma, target)?
        };
        let variance = quad_form(sigma, &weights).max(0.0);
        points.push(FrontierPoint {
            risk: variance.sqrt(),
            ror: target,
            weights,
        });
    }
    Ok(FrontierResult {
        points,
        mu: mu.to_vec(),
        sigma: sigma.clone(),
    })
}

pub fn quad_form(sigma: &Matrix, w: &[f64]) -> f64 {
    let k = w.len();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            acc += w[i] * sigma.get(i, j) * w[j];
        }
    }
    acc
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index and value of the first maximal entry (ties: lowest index).
fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    (best, v[best])
}

/// Active-set iteration for `min w' Sigma w` s.t. `constraints * w = rhs`,
/// `w >= 0`, starting from a feasible `w`.
fn active_set_qp(
    sigma: &Matrix,
    constraints: &[Vec<f64>],
    rhs: &[f64],
    mut w: Vec<f64>,
) -> Result<Vec<f64>> {
    let k = w.len();
    debug_assert_eq!(constraints.len(), rhs.len());
    let mut active = vec![false; k];
    for i in 0..k {
        if w[i] <= PIVOT_FLOOR {
            w[i] = 0.0;
            active[i] = true;
        }
    }
    let max_iters = 50 * (k + constraints.len() + 2);
    for _ in 0..max_iters {
        let free: Vec<usize> = (0..k).filter(|&i| !active[i]).collect();
        let grad: Vec<f64> = (0..k)
            .map(|i| 2.0 * (0..k).map(|j| sigma.get(i, j) * w[j]).sum::<f64>())
            .collect();

        // restricted constraint rows over the free coordinates
        let c_free: Vec<Vec<f64>> = constraints
            .iter()
            .map(|row| free.iter().map(|&i| row[i]).collect())
            .collect();
        let basis = nullspace(&c_free, free.len());

        // direction in the working-set subspace
        let mut step = vec![0.0; k];
        if !basis.is_empty() {
            let d = basis.len();
            let mut reduced = vec![vec![0.0; d]; d];
            let mut neg_grad = vec![0.0; d];
            for a in 0..d {
                for b in 0..d {
                    let mut acc = 0.0;
                    for (fi, &i) in free.iter().enumerate() {
                        for (fj, &j) in free.iter().enumerate() {
                            acc += basis[a][fi] * sigma.get(i, j) * basis[b][fj];
                        }
                    }
                    reduced[a][b] = acc;
                }
                neg_grad[a] = -free
                    .iter()
                    .enumerate()
                    .map(|(fi, &i)| basis[a][fi] * grad[i] / 2.0)
                    .sum::<f64>();
            }
            let z = solve_linear(reduced, neg_grad);
            for (fi, &i) in free.iter().enumerate() {
                step[i] = (0..d).map(|a| z[a] * basis[a][fi]).sum();
            }
        }
        let step_norm = step.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let w_norm = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));

        if step_norm <= 1e-11 * (1.0 + w_norm) {
            // stationary on the working set: check bound multipliers
            let nu = constraint_multipliers(&c_free, &free, &grad);
            let mut worst = (MULTIPLIER_TOL, None);
            for i in 0..k {
                if !active[i] {
                    continue;
                }
                let lambda = grad[i]
                    - constraints
                        .iter()
                        .enumerate()
                        .map(|(c, row)| nu[c] * row[i])
                        .sum::<f64>();
                if lambda < -worst.0 {
                    worst = (-lambda, Some(i));
                }
            }
            match worst.1 {
                None => return Ok(w),
                Some(i) => active[i] = false,
            }
            continue;
        }

        // longest feasible step toward the subspace minimizer
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            if step[i] < -1e-13 {
                let t = w[i] / -step[i];
                if t < alpha {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        for &i in &free {
            w[i] = (w[i] + alpha * step[i]).max(0.0);
        }
        if let Some(i) = blocking {
            w[i] = 0.0;
            active[i] = true;
        }
    }
    Err(Error::Eval(
        "active-set iteration failed to converge".into(),
    ))
}

/// Lagrange multipliers for the equality constraints by least squares on
/// the free-coordinate stationarity equations.
fn constraint_multipliers(c_free: &[Vec<f64>], free: &[usize], grad: &[f64]) -> Vec<f64> {
    let c = c_free.len();
    let mut normal = vec![vec![0.0; c]; c];
    let mut rhs = vec![0.0; c];
    for a in 0..c {
        for b in 0..c {
            normal[a][b] = dot(&c_free[a], &c_free[b]);
        }
        rhs[a] = free
            .iter()
            .enumerate()
            .map(|(fi, &i)| c_free[a][fi] * grad[i])
            .sum();
    }
    solve_linear(normal, rhs)
}

/// Basis of the null space of a small constraint matrix, via
/// row-reduction with a pivot threshold.
fn nullspace(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..n {
        // largest remaining entry in this column
        let (best, mag) = (r..m.len())
            .map(|i| (i, m[i][col].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= PIVOT_FLOOR {
            continue;
        }
        m.swap(r, best);
        let inv = 1.0 / m[r][col];
        for x in m[r].iter_mut() {
            *x *= inv;
        }
        for i in 0..m.len() {
            if i != r && m[i][col].abs() > 0.0 {
                let f = m[i][col];
                for c2 in 0..n {
                    m[i][c2] -= f * m[r][c2];
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    free_cols
        .iter()
        .map(|&fc| {
            let mut v = vec![0.0; n];
            v[fc] = 1.0;
            for (ri, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -m[ri][fc];
            }
            v
        })
        .collect()
}

/// Gaussian elimination with partial pivoting; pivots with magnitude
/// below the floor are regularized so consistent rank-deficient systems
/// still resolve.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let (best, mag) = (col..n)
            .map(|i| (i, a[i][col].abs()))
            .fold((col, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        a.swap(col, best);
        b.swap(col, best);
        if mag < PIVOT_FLOOR {
            a[col][col] = if a[col][col] < 0.0 {
                -PIVOT_FLOOR
            } else {
                PIVOT_FLOOR
            };
        }
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col][j] * x[j];
        }
        x[col] = acc / a[col][col];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(k: usize) -> Matrix {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Matrix::new(k, k, data).unwrap()
    }

    #[test]
    fn min_variance_identity_is_equal_weight() {
        let w = min_variance_portfolio(&[0.1, 0.2], &identity(2)).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-10);
        assert!((w[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn min_variance_single_asset() {
        let sigma = Matrix::scalar(0.04).unwrap();
        assert_eq!(min_variance_portfolio(&[0.1], &sigma).unwrap(), vec![1.0]);
    }

    #[test]
    fn rejects_asymmetric_sigma() {
        let sigma = Matrix::new(2, 2, vec![1.0, 0.5, 0.1, 1.0]).unwrap();
        assert!(matches!(
            min_variance_portfolio(&[0.1, 0.2], &sigma),
            Err(Error::Eval(_))
        ));
    }

    #[test]
    fn target_return_symmetric_case() {
        // hand-solved: identity covariance, mu = (0, 1), target 0.5
        let w = solve_qp_target_return(&[0.0, 1.0], &identity(2), 0.5).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-9);
        assert!((w[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn target_return_vertex() {
        let sigma = Matrix::new(
            3,
            3,
            vec![0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.16],
        )
        .unwrap();
        let mu = [0.05, 0.07, 0.11];
        let w = solve_qp_target_return(&mu, &sigma, 0.11).unwrap();
        assert!((w[2] - 1.0).abs() < 1e-8);
        assert!(w[0].abs() < 1e-8 && w[1].abs() < 1e-8);
    }

    #[test]
    fn infeasible_targets_rejected() {
        let mu = [0.05, 0.07];
        let err = solve_qp_target_return(&mu, &identity(2), 0.2).unwrap_err();
        assert!(err.to_string().contains("infeasible"), "{err}");
        assert!(solve_qp_target_return(&mu, &identity(2), 0.0).is_err());
    }

    #[test]
    fn frontier_shape_and_endpoints() {
        let sigma = Matrix::new(
            3,
            3,
            vec![0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.16],
        )
        .unwrap();
        let mu = [0.05, 0.07, 0.11];
        let f = portopt(&mu, &sigma, 10).unwrap();
        assert_eq!(f.points.len(), 10);
        let w_mv = min_variance_portfolio(&mu, &sigma).unwrap();
        for (a, b) in f.points[0].weights.iter().zip(&w_mv) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((f.points[9].weights[2] - 1.0).abs() < 1e-8);
        for pair in f.points.windows(2) {
            assert!(pair[1].ror > pair[0].ror);
            assert!(pair[1].risk >= pair[0].risk - 1e-12);
        }
        for p in &f.points {
            let total: f64 = p.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(p.weights.iter().all(|&x| x >= -1e-9));
            assert!((p.risk - quad_form(&sigma, &p.weights).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_zero_covariance() {
        let sigma = Matrix::new(2, 2, vec![0.0; 4]).unwrap();
        let f = portopt(&[0.02, 0.05], &sigma, 5).unwrap();
        for p in &f.points {
            assert_eq!(p.risk, 0.0);
        }
        assert!((f.points[4].weights[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_asset_frontier() {
        let sigma = Matrix::scalar(0.09).unwrap();
        let f = portopt(&[0.04], &sigma, 4).unwrap();
        for p in &f.points {
            assert_eq!(p.weights, vec![1.0]);
            assert!((p.risk - 0.3).abs() < 1e-12);
            assert!((p.ror - 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_invariant_under_covariance_scaling() {
        let sigma = Matrix::new(
            3,
            3,
            vec![0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.16],
        )
        .unwrap();
        let scaled = Matrix::new(3, 3, sigma.data().iter().map(|v| v * 4.0).collect()).unwrap();
        let mu = [0.05, 0.07, 0.11];
        let f1 = portopt(&mu, &sigma, 8).unwrap();
        let f2 = portopt(&mu, &scaled, 8).unwrap();
        for (p1, p2) in f1.points.iter().zip(&f2.points) {
            assert!((p1.ror - p2.ror).abs() < 1e-9);
            assert!((p2.risk - 2.0 * p1.risk).abs() < 1e-6);
            for (a, b) in p1.weights.iter().zip(&p2.weights) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
