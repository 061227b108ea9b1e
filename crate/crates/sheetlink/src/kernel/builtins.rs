//! Statistical and financial builtins exposed to the command language.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::value::Matrix;

/// Column means of an n x k matrix, as a 1 x k row.
pub fn mean(m: &Matrix) -> Result<Matrix> {
    let n = m.rows() as f64;
    let out: Vec<f64> = (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / n)
        .collect();
    Matrix::new(1, m.cols(), out)
}

/// Per-column sample variance (divisor n-1), as a 1 x k row.
pub fn var(m: &Matrix) -> Result<Matrix> {
    if m.rows() < 2 {
        return Err(Error::Eval(format!(
            "var needs at least 2 observations, got {}",
            m.rows()
        )));
    }
    let mu = mean(m)?;
    let n = m.rows() as f64;
    let out: Vec<f64> = (0..m.cols())
        .map(|c| {
            (0..m.rows())
                .map(|r| {
                    let d = m.get(r, c) - mu.get(0, c);
                    d * d
                })
                .sum::<f64>()
                / (n - 1.0)
        })
        .collect();
    Matrix::new(1, m.cols(), out)
}

/// Sample covariance matrix (divisor n-1): symmetric k x k.
pub fn cov(m: &Matrix) -> Result<Matrix> {
    if m.rows() < 2 {
        return Err(Error::Eval(format!(
            "cov needs at least 2 observations, got {}",
            m.rows()
        )));
    }
    let mu = mean(m)?;
    let n = m.rows() as f64;
    let k = m.cols();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let s: f64 = (0..m.rows())
                .map(|r| (m.get(r, i) - mu.get(0, i)) * (m.get(r, j) - mu.get(0, j)))
                .sum();
            let v = s / (n - 1.0);
            out[i * k + j] = v;
            out[j * k + i] = v;
        }
    }
    Matrix::new(k, k, out)
}

/// Exponentially weighted expected return and covariance of a return
/// series. Observation t of n gets weight proportional to decay^(n-t),
/// normalized to sum 1, so the most recent row weighs most when
/// decay < 1. With decay = 1 this is the equal-weight mean and the
/// population covariance (divisor n).
pub fn ewstats(returns: &Matrix, decay: f64) -> Result<(Matrix, Matrix)> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::Eval(format!(
            "ewstats decay must be in (0, 1], got {decay}"
        )));
    }
    let n = returns.rows();
    let k = returns.cols();
    let mut weights: Vec<f64> = (0..n).map(|t| decay.powi((n - 1 - t) as i32)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mu: Vec<f64> = (0..k)
        .map(|c| (0..n).map(|t| weights[t] * returns.get(t, c)).sum())
        .collect();
    let mut sigma = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let s: f64 = (0..n)
                .map(|t| weights[t] * (returns.get(t, i) - mu[i]) * (returns.get(t, j) - mu[j]))
                .sum();
            sigma[i * k + j] = s;
            sigma[j * k + i] = s;
        }
    }
    Ok((Matrix::new(1, k, mu)?, Matrix::new(k, k, sigma)?))
}

/// Standard normal CDF.
fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// European call and put under Black-Scholes-Merton. The sigma = 0 and
/// T-degenerate pieces reduce to discounted intrinsic value.
pub fn blackscholes(spot: f64, strike: f64, rate: f64, sigma: f64, years: f64) -> Result<(f64, f64)> {
    if !(spot > 0.0) || !(strike > 0.0) || !(years > 0.0) || !(sigma >= 0.0) {
        return Err(Error::Eval(format!(
            "blackscholes domain: need S>0, K>0, T>0, sigma>=0 \
             (got S={spot}, K={strike}, sigma={sigma}, T={years})"
        )));
    }
    let disc = (-rate * years).exp();
    let call = if sigma == 0.0 {
        (spot - strike * disc).max(0.0)
    } else {
        let vol = sigma * years.sqrt();
        let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * years) / vol;
        let d2 = d1 - vol;
        spot * norm_cdf(d1) - strike * disc * norm_cdf(d2)
    };
    let put = call - spot + strike * disc;
    Ok((call, put))
}

/// Sample quantile by linear interpolation between the order statistics,
/// with order statistic j sitting at plotting position (j-0.5)/n.
fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let pos = p * n - 0.5;
    if pos <= 0.0 {
        return sorted[0];
    }
    if pos >= n - 1.0 {
        return sorted[sorted.len() - 1];
    }
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
}

/// Quantile pairs of two samples at plotting positions (i-0.5)/p,
/// p = min(n, m). Row i is (quantile of x, quantile of y).
pub fn qqplot(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if x.cols() != 1 || y.cols() != 1 {
        return Err(Error::TypeDim("qqplot expects two column vectors".into()));
    }
    if x.rows() < 2 || y.rows() < 2 {
        return Err(Error::Eval("qqplot needs at least 2 points per sample".into()));
    }
    let mut xs = x.data().to_vec();
    let mut ys = y.data().to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let p = xs.len().min(ys.len());
    let mut out = Vec::with_capacity(2 * p);
    for i in 1..=p {
        // with equal lengths this is exactly the paired order statistics
        let prob = (i as f64 - 0.5) / p as f64;
        out.push(sample_quantile(&xs, prob));
        out.push(sample_quantile(&ys, prob));
    }
    Matrix::new(p, 2, out)
}
