//! Decoy-state BB84 performance from channel transmittance.
//!
//! The chain is: total efficiency `η = η_t·T·η_r`, detected mean photon number
//! `μ_det = μ·η·η_d`, gain `Q_μ = Y₀ + (1-Y₀)(1-e^{-μ_det})`, QBER
//! `E_μ = [e_err(1-Y₀)(1-e^{-μ_det}) + Y₀/2] / Q_μ` with `e_err = e_det + e_pol`, and the
//! asymptotic key rate `R = R_rep·P_sift·[Q₁(1-H₂(E₁)) - Q_μ f_EC H₂(E_μ)]`, clamped at 0.
//!
//! Single-photon quantities come from one of two estimators:
//!
//! * [`DecoyMode::Paper`]: `Q₁ = η·η_d` and `E₁ = (e_err·η·η_d + Y₀/2) / (Y₀ + η·η_d)`.
//! * [`DecoyMode::VacuumWeak`]: the vacuum + weak decoy bounds
//!   `Y₁ᴸ = μ/(μν-ν²)·[Q_ν e^ν - Q_μ e^μ ν²/μ² - (μ²-ν²)/μ²·Y₀]`, `Q₁ = Y₁ᴸ μ e^{-μ}`,
//!   `E₁ᵁ = (E_ν Q_ν e^ν - Y₀/2) / (Y₁ᴸ ν)`, where `Q_ν`, `E_ν` are the model values at the
//!   decoy intensity ν.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DecoyMode {
    #[default]
    Paper,
    VacuumWeak,
}

/// How per-realization transmittance feeds the gain/QBER formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QberAveraging {
    /// Apply the formulas to the mean transmittance.
    #[default]
    AverageThenCompute,
    /// Apply the formulas per realization, then average clicks and errors.
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QkdParams {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    /// Dark-count probability per coincidence window (all detectors).
    pub y0: f64,
    pub e_det: f64,
    pub e_pol: f64,
    pub eta_d: f64,
    pub eta_t_optical: f64,
    pub eta_r_optical: f64,
    /// Pulse repetition rate (Hz).
    pub rep_rate: f64,
    pub p_sift: f64,
    pub f_ec: f64,
}

impl Default for QkdParams {
    fn default() -> Self {
        Self {
            mu_signal: 0.5,
            mu_decoy: 0.1,
            y0: 1e-6,
            e_det: 0.015,
            e_pol: 0.01,
            eta_d: 1.0,
            eta_t_optical: 0.9,
            eta_r_optical: 0.9,
            rep_rate: 1e7,
            p_sift: 0.5,
            f_ec: 1.22,
        }
    }
}

impl QkdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_signal > 0.0) {
            return Err(Error::invalid("qkd.mu_signal", "must be positive"));
        }
        if !(self.mu_decoy > 0.0 && self.mu_decoy < self.mu_signal) {
            return Err(Error::invalid(
                "qkd.mu_decoy",
                "decoy ordering requires 0 < mu_decoy < mu_signal",
            ));
        }
        for (name, v) in [
            ("qkd.y0", self.y0),
            ("qkd.e_det", self.e_det),
            ("qkd.e_pol", self.e_pol),
            ("qkd.eta_d", self.eta_d),
            ("qkd.eta_t_optical", self.eta_t_optical),
            ("qkd.eta_r_optical", self.eta_r_optical),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, "probability must lie in [0, 1]"));
            }
        }
        if !(self.p_sift > 0.0 && self.p_sift <= 1.0) {
            return Err(Error::invalid("qkd.p_sift", "must lie in (0, 1]"));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::invalid("qkd.f_ec", "must be >= 1"));
        }
        if !(self.rep_rate > 0.0) {
            return Err(Error::invalid("qkd.rep_rate", "must be positive"));
        }
        Ok(())
    }

    /// `e_det + e_pol`.
    pub fn e_err(&self) -> f64 {
        self.e_det + self.e_pol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QkdMetrics {
    pub eta_total: f64,
    pub mu_det: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub q1: f64,
    pub e1: f64,
    /// bits/s
    pub sift_rate: f64,
    /// bits/s
    pub skr: f64,
}

pub fn total_efficiency(params: &QkdParams, t_path_avg: f64) -> f64 {
    params.eta_t_optical * t_path_avg * params.eta_r_optical
}

pub fn mean_detected_photons(params: &QkdParams, eta_total: f64) -> f64 {
    mean_detected_photons_at(params.mu_signal, params, eta_total)
}

fn mean_detected_photons_at(mu: f64, params: &QkdParams, eta_total: f64) -> f64 {
    mu * eta_total * params.eta_d
}

/// Probability of at least one click.
pub fn gain(params: &QkdParams, mu_det: f64) -> f64 {
    params.y0 + (1.0 - params.y0) * (-(-mu_det).exp_m1())
}

/// Error-click probability `E_μ·Q_μ`.
pub fn error_gain(params: &QkdParams, mu_det: f64) -> f64 {
    params.e_err() * (1.0 - params.y0) * (-(-mu_det).exp_m1()) + 0.5 * params.y0
}

pub fn qber(params: &QkdParams, mu_det: f64) -> Result<f64> {
    let q = gain(params, mu_det);
    if q <= 0.0 {
        return Err(Error::Domain("QBER undefined for zero gain".into()));
    }
    Ok(error_gain(params, mu_det) / q)
}

/// `H₂(x)`, with `H₂(0) = H₂(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// `(Q₁, E₁)` for the channel transmittance `t_path_avg`.
pub fn estimate_single_photon(params: &QkdParams, t_path_avg: f64, mode: DecoyMode) -> Result<(f64, f64)> {
    let eta = total_efficiency(params, t_path_avg) * params.eta_d;
    match mode {
        DecoyMode::Paper => {
            let denom = params.y0 + eta;
            let e1 = if denom > 0.0 {
                (params.e_err() * eta + 0.5 * params.y0) / denom
            } else {
                0.5
            };
            Ok((eta, e1))
        }
        DecoyMode::VacuumWeak => {
            let (mu, nu) = (params.mu_signal, params.mu_decoy);
            let denom = mu * nu - nu * nu;
            if !(denom > 0.0) {
                return Err(Error::Domain(
                    "decoy bound needs mu_signal > mu_decoy (mu·nu - nu² <= 0)".into(),
                ));
            }
            let q_mu = gain(params, mu * eta);
            let q_nu = gain(params, nu * eta);
            let eq_nu = error_gain(params, nu * eta);
            let ratio = nu * nu / (mu * mu);
            let y1 = (mu / denom
                * (q_nu * nu.exp() - q_mu * mu.exp() * ratio - (1.0 - ratio) * params.y0))
                .max(0.0);
            let q1 = y1 * mu * (-mu).exp();
            let e1 = if y1 > 0.0 {
                ((eq_nu * nu.exp() - 0.5 * params.y0) / (y1 * nu)).clamp(0.0, 0.5)
            } else {
                0.5
            };
            Ok((q1, e1))
        }
    }
}

/// Asymptotic decoy-state BB84 key rate (bits/s), clamped at zero.
pub fn secure_key_rate(params: &QkdParams, q_mu: f64, e_mu: f64, q1: f64, e1: f64) -> Result<f64> {
    let bracket = q1 * (1.0 - binary_entropy(e1)?) - q_mu * params.f_ec * binary_entropy(e_mu)?;
    Ok((params.rep_rate * params.p_sift * bracket).max(0.0))
}

/// Sifted key rate (bits/s) from signal-induced clicks, `R_rep·P_sift·(Q_μ - Y₀)`.
pub fn sift_rate(params: &QkdParams, q_mu: f64) -> f64 {
    params.rep_rate * params.p_sift * (q_mu - params.y0).max(0.0)
}

/// Full chain for a mean channel transmittance.
pub fn evaluate(params: &QkdParams, t_path_avg: f64, mode: DecoyMode) -> Result<QkdMetrics> {
    let eta_total = total_efficiency(params, t_path_avg);
    let mu_det = mean_detected_photons(params, eta_total);
    let q_mu = gain(params, mu_det);
    let e_mu = qber(params, mu_det)?;
    finish(params, t_path_avg, eta_total, mu_det, q_mu, e_mu, mode)
}

/// Gain and QBER averaged over per-realization transmittances; single-photon
/// estimates use the mean transmittance.
pub fn evaluate_per_sample(params: &QkdParams, samples: &[f64], mode: DecoyMode) -> Result<QkdMetrics> {
    if samples.is_empty() {
        return Err(Error::Domain("no transmittance samples".into()));
    }
    let count = samples.len() as f64;
    let t_avg = samples.iter().sum::<f64>() / count;
    let (mut q_sum, mut eq_sum) = (0.0, 0.0);
    for &t in samples {
        let mu_det = mean_detected_photons(params, total_efficiency(params, t));
        q_sum += gain(params, mu_det);
        eq_sum += error_gain(params, mu_det);
    }
    let q_mu = q_sum / count;
    let e_mu = eq_sum / q_sum;
    let eta_total = total_efficiency(params, t_avg);
    let mu_det = mean_detected_photons(params, eta_total);
    finish(params, t_avg, eta_total, mu_det, q_mu, e_mu, mode)
}

fn finish(
    params: &QkdParams,
    t_path_avg: f64,
    eta_total: f64,
    mu_det: f64,
    q_mu: f64,
    e_mu: f64,
    mode: DecoyMode,
) -> Result<QkdMetrics> {
    let (q1, e1) = estimate_single_photon(params, t_path_avg, mode)?;
    Ok(QkdMetrics {
        eta_total,
        mu_det,
        q_mu,
        e_mu,
        q1,
        e1,
        sift_rate: sift_rate(params, q_mu),
        skr: secure_key_rate(params, q_mu, e_mu, q1, e1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> QkdParams {
        QkdParams::default()
    }

    /// Channel transmittance that makes η_total·η_d equal `eta`.
    fn t_for(eta: f64) -> f64 {
        eta / (0.9 * 0.9)
    }

    #[test]
    fn efficiency_chain() {
        let mut unit = p();
        unit.eta_t_optical = 1.0;
        unit.eta_r_optical = 1.0;
        assert_eq!(total_efficiency(&unit, 1.0), 1.0);
        assert!((total_efficiency(&p(), 0.5) - 0.405).abs() < 1e-15);
        assert!((mean_detected_photons(&p(), 2.592e-3) - 1.296e-3).abs() < 1e-15);
        assert!((mean_detected_photons(&p(), 1.0802e-4) - 5.401e-5).abs() < 1e-15);
        let mut dark = p();
        dark.mu_signal = 0.0;
        assert_eq!(mean_detected_photons(&dark, 0.3), 0.0);
    }

    #[test]
    fn gain_limits() {
        assert_eq!(gain(&p(), 0.0), 1e-6);
        assert!((gain(&p(), 80.0) - 1.0).abs() < 1e-15);
        let q = gain(&p(), 1.296e-3);
        assert!((q - 1.2962e-3).abs() < 5e-8);
        assert!((1e7 * 0.5 * q / 1e3 - 6.481).abs() < 1e-3);
    }

    #[test]
    fn qber_rows() {
        assert_eq!(qber(&p(), 0.0).unwrap(), 0.5);
        assert!((qber(&p(), 1.296e-3).unwrap() * 100.0 - 2.5367).abs() < 5e-3);
        assert!((qber(&p(), 1.480e-4).unwrap() * 100.0 - 2.819).abs() < 1e-2);
        let mut no_dark = p();
        no_dark.y0 = 0.0;
        assert!(qber(&no_dark, 0.0).is_err());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.49999).abs() < 1e-4);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn default_decoy_mode_at_100km() {
        let (q1, e1) = estimate_single_photon(&p(), t_for(2.592e-3), DecoyMode::Paper).unwrap();
        assert!((q1 - 2.592e-3).abs() < 1e-12);
        assert!((e1 * 100.0 - 2.519).abs() < 1e-3);
        let (_, e1_dark) = estimate_single_photon(&p(), 0.0, DecoyMode::Paper).unwrap();
        assert_eq!(e1_dark, 0.5);
        let e_mu = qber(&p(), 1.296e-3).unwrap();
        assert!(e1 < e_mu);
    }

    #[test]
    fn vacuum_weak_on_lossless_channel() {
        let params = QkdParams {
            y0: 0.0,
            e_det: 0.0,
            e_pol: 0.0,
            eta_d: 1.0,
            eta_t_optical: 1.0,
            eta_r_optical: 1.0,
            ..p()
        };
        let (q1, e1) = estimate_single_photon(&params, 1.0, DecoyMode::VacuumWeak).unwrap();
        let (mu, nu) = (0.5f64, 0.1f64);
        let exact_single = mu * (-mu).exp();
        // Independent evaluation of the bound with Q = 1 - e^{-μ}, Q_ν = 1 - e^{-ν}:
        // Y₁ᴸ = μ/(μν-ν²)·[(e^ν - 1) - (e^μ - 1)ν²/μ²].
        let y1 = mu / (mu * nu - nu * nu) * ((nu.exp() - 1.0) - (mu.exp() - 1.0) * nu * nu / (mu * mu));
        assert!((q1 - y1 * exact_single).abs() < 1e-12);
        assert!(q1 <= exact_single);
        assert!((q1 - 0.30327).abs() / 0.30327 < 0.01);
        assert_eq!(e1, 0.0);
    }

    #[test]
    fn decoy_ordering_is_enforced() {
        let bad = QkdParams {
            mu_decoy: 0.5,
            ..p()
        };
        assert!(bad.validate().is_err());
        assert!(estimate_single_photon(&bad, 0.1, DecoyMode::VacuumWeak).is_err());
        assert!(p().validate().is_ok());
    }

    #[test]
    fn secure_rate_rows() {
        let r100 = secure_key_rate(&p(), 1.2962e-3, 0.025367, 2.592e-3, 0.025188).unwrap();
        assert!((r100 - 9413.0).abs() / 9413.0 < 0.01, "{r100}");
        assert_eq!(secure_key_rate(&p(), 1e-3, 0.5, 2e-3, 0.5).unwrap(), 0.0);
        let q300 = gain(&p(), 1.480e-4);
        let e300 = qber(&p(), 1.480e-4).unwrap();
        let r300 = secure_key_rate(&p(), q300, e300, 2.945e-4, 0.026655).unwrap();
        assert!((r300 - 1044.0).abs() / 1044.0 < 0.01, "{r300}");
    }

    #[test]
    fn sift_rate_rows() {
        assert_eq!(sift_rate(&p(), 0.0), 0.0);
        let s100 = sift_rate(&p(), gain(&p(), 1.296e-3)) / 1e3;
        assert!((s100 - 6.480).abs() / 6.480 < 0.005, "{s100}");
        let s500 = sift_rate(&p(), gain(&p(), 5.401e-5)) / 1e3;
        assert!((s500 - 0.270).abs() / 0.270 < 0.01, "{s500}");
    }

    #[test]
    fn per_sample_mode_equals_average_for_constant_channel() {
        let a = evaluate(&p(), 0.01, DecoyMode::Paper).unwrap();
        let b = evaluate_per_sample(&p(), &[0.01; 7], DecoyMode::Paper).unwrap();
        assert!((a.q_mu - b.q_mu).abs() < 1e-18);
        assert!((a.e_mu - b.e_mu).abs() < 1e-15);
        // Deep fades raise the averaged QBER.
        let c = evaluate_per_sample(&p(), &[0.0, 0.02], DecoyMode::Paper).unwrap();
        assert!(c.e_mu > a.e_mu);
    }

    /// `1 - (1-Y₀)(1-η)^n` summed against a Poisson(μ) photon-number distribution.
    fn poisson_mixture_gain(mu: f64, eta: f64, y0: f64) -> f64 {
        let mut pn = (-mu).exp();
        let mut total = 0.0;
        for n in 0..200 {
            if n > 0 {
                pn *= mu / n as f64;
            }
            total += pn * (1.0 - (1.0 - y0) * (1.0 - eta).powi(n));
        }
        total
    }

    #[test]
    fn gain_matches_poisson_mixture() {
        for &(mu, eta, y0) in &[(0.5, 0.3, 1e-3), (0.1, 1e-3, 1e-6), (0.8, 0.9, 0.0)] {
            let params = QkdParams {
                y0,
                eta_d: 1.0,
                ..p()
            };
            assert!((gain(&params, mu * eta) - poisson_mixture_gain(mu, eta, y0)).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuum_weak_bounds_hold_on_random_channels() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let eta: f64 = 10f64.powf(rng.random_range(-5.0..0.0));
            let params = QkdParams {
                y0: 10f64.powf(rng.random_range(-7.0..-4.0)),
                e_det: rng.random_range(0.0..0.03),
                e_pol: rng.random_range(0.0..0.02),
                mu_signal: rng.random_range(0.3..0.8),
                mu_decoy: rng.random_range(0.02..0.2),
                eta_t_optical: 1.0,
                eta_r_optical: 1.0,
                eta_d: 1.0,
                ..p()
            };
            let (q1, e1) = estimate_single_photon(&params, eta, DecoyMode::VacuumWeak).unwrap();
            let mu = params.mu_signal;
            // True single-photon yield/error of the same channel: Y₁ = 1 - (1-Y₀)(1-η).
            let y1_true = 1.0 - (1.0 - params.y0) * (1.0 - eta);
            let q1_true = y1_true * mu * (-mu).exp();
            let e1_true = (params.e_err() * (1.0 - params.y0) * eta + 0.5 * params.y0) / y1_true;
            assert!(q1 <= q1_true * (1.0 + 1e-12), "{q1} > {q1_true}");
            if q1 > 0.0 {
                assert!(e1 >= e1_true * (1.0 - 1e-9), "{e1} < {e1_true}");
            }
        }
    }

    proptest! {
        #[test]
        fn gain_up_qber_down(a in 1e-8f64..1.0, b in 1e-8f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(gain(&p(), hi) > gain(&p(), lo));
            prop_assert!(qber(&p(), hi).unwrap() < qber(&p(), lo).unwrap());
        }

        #[test]
        fn error_gain_identity(mu_det in 0.0f64..5.0) {
            let params = p();
            let lhs = qber(&params, mu_det).unwrap() * gain(&params, mu_det) - 0.5 * params.y0;
            let rhs = params.e_err() * (1.0 - params.y0) * (-(-mu_det).exp_m1());
            prop_assert!((lhs - rhs).abs() <= 1e-15 * rhs.abs().max(1e-300) + 1e-21);
        }

        #[test]
        fn skr_monotone_in_errors(e_mu in 0.0f64..0.5, e1 in 0.0f64..0.5, d in 0.0f64..0.1) {
            let base = secure_key_rate(&p(), 1e-3, e_mu, 2e-3, e1).unwrap();
            let worse_mu = secure_key_rate(&p(), 1e-3, (e_mu + d).min(0.5), 2e-3, e1).unwrap();
            let worse_1 = secure_key_rate(&p(), 1e-3, e_mu, 2e-3, (e1 + d).min(0.5)).unwrap();
            prop_assert!(worse_mu <= base + 1e-9);
            prop_assert!(worse_1 <= base + 1e-9);
        }

        #[test]
        fn metrics_invariants(t in 0.0f64..1.0) {
            let m = evaluate(&p(), t, DecoyMode::Paper).unwrap();
            prop_assert!(m.e_mu >= 0.0 && m.e_mu <= 0.5);
            prop_assert!(m.q_mu >= p().y0);
            prop_assert!(m.skr >= 0.0);
        }
    }
}
