//! Closed-form expected counts of additional request transmissions.
//!
//! Plain REST needs a whole round trip to succeed, so with round-trip loss
//! `p` it sends `n / (1 - p)` requests on average. The coded protocol only
//! has to replace requests lost on the way to the server, which happens with
//! probability `alpha * p`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AnalysisError {
    #[error("loss probability {0} outside [0, 1)")]
    LossOutOfDomain(f64),
    #[error("request loss share {0} outside [0, 1]")]
    AlphaOutOfDomain(f64),
    #[error("request loss rate alpha*p = {0} outside [0, 1)")]
    RequestLossOutOfDomain(f64),
}

fn check_p(p: f64) -> Result<(), AnalysisError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(AnalysisError::LossOutOfDomain(p))
    }
}

/// Expected additional requests without coding: `n / (1 - p) - n`.
pub fn a_wonc(n: u64, p: f64) -> Result<f64, AnalysisError> {
    check_p(p)?;
    let n = n as f64;
    Ok(n / (1.0 - p) - n)
}

/// Expected additional requests with coding: `n / (1 - alpha * p) - n`.
pub fn a_wnc(n: u64, p: f64, alpha: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnalysisError::AlphaOutOfDomain(alpha));
    }
    let q = alpha * p;
    if !(0.0..1.0).contains(&q) || p < 0.0 {
        return Err(AnalysisError::RequestLossOutOfDomain(q));
    }
    let n = n as f64;
    Ok(n / (1.0 - q) - n)
}

/// How much more REST sends than the coded protocol, in percent.
///
/// Zero when both counts are zero (lossless channel).
pub fn increase_percent(a_wonc: f64, a_wnc: f64) -> f64 {
    if a_wnc == 0.0 {
        if a_wonc == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (a_wonc - a_wnc) / a_wnc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisPoint {
    pub n: u64,
    pub p: f64,
    pub alpha: f64,
    pub a_wonc: f64,
    pub a_wnc: f64,
}

impl AnalysisPoint {
    pub fn evaluate(n: u64, p: f64, alpha: f64) -> Result<Self, AnalysisError> {
        Ok(AnalysisPoint {
            n,
            p,
            alpha,
            a_wonc: a_wonc(n, p)?,
            a_wnc: a_wnc(n, p, alpha)?,
        })
    }

    pub fn increase_percent(&self) -> f64 {
        increase_percent(self.a_wonc, self.a_wnc)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.alpha,
            self.p,
            self.a_wonc,
            self.a_wnc,
            self.increase_percent()
        )
    }
}

pub const CSV_HEADER: &str = "alpha,p,a_wonc,a_wnc,increase_percent";

/// Every `(alpha, p)` pair, alphas outermost.
pub fn sweep(n: u64, alphas: &[f64], p_grid: &[f64]) -> Result<Vec<AnalysisPoint>, AnalysisError> {
    alphas
        .iter()
        .flat_map(|&alpha| p_grid.iter().map(move |&p| AnalysisPoint::evaluate(n, p, alpha)))
        .collect()
}
