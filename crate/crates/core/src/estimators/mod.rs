//! Monte Carlo estimators for the verification suite.
//!
//! Every estimator takes a validated [`Experiment`](crate::config::Experiment),
//! runs paths `0..n_paths` in parallel and reduces them in index order.

pub mod mc;

mod checks;
mod heat;
mod residuals;

pub use checks::{
    cauchy_initial_check, contraction_check, dissipation_profile, energy_bound_check, energy_constant,
    hz_coupling_diagnostic, monotonicity_gap, CauchyCheck, ContractionReport, DissipationProfile, EnergyBound,
    ItoCorrectionBound,
};
pub use heat::{heat_convergence, HeatLevel};
pub use mc::{mc_expectation, summarize, McResult};
pub use residuals::{
    check_product_pair, check_renormalizer, ito_product_residual, renorm_residual, ResidualReport, TestFunction,
};

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [4e-3, 2e-3, 1e-3];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert!((log_log_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }
}
