//! The convergence bound, its step-size condition, and the `1/sqrt(K)` rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating rates at or below this value make the step-size condition
/// unsatisfiable: `4p - p^2 - 2 <= 0`.
pub const P_THRESHOLD: f64 = 2.0 - std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub l: f64,
    pub sigma_sq: f64,
    pub beta: f64,
    pub eta: f64,
    pub q: usize,
    pub tau: usize,
    /// Total steps `K`.
    pub steps: usize,
    pub zeta: f64,
    pub a: Vec<f64>,
    pub p: Vec<f64>,
    /// `F(x_1) - F_inf`.
    pub f_gap: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("L", self.l),
            ("sigma^2", self.sigma_sq),
            ("beta", self.beta),
            ("eta", self.eta),
            ("F gap", self.f_gap),
        ];
        for (name, v) in scalars {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Bound(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        check_zeta(self.zeta)?;
        if self.q == 0 || self.tau == 0 || self.steps == 0 {
            return Err(Error::Bound("q, tau and K must be positive".into()));
        }
        if !self.steps.is_multiple_of(self.q * self.tau) {
            return Err(Error::Bound(format!(
                "K = {} is not a multiple of q*tau = {}",
                self.steps,
                self.q * self.tau
            )));
        }
        if self.a.len() != self.p.len() || self.a.is_empty() {
            return Err(Error::Bound(format!(
                "{} weights for {} probabilities",
                self.a.len(),
                self.p.len()
            )));
        }
        if self
            .a
            .iter()
            .chain(&self.p)
            .any(|x| !(*x >= 0.0 && x.is_finite()))
        {
            return Err(Error::Bound(
                "weights and probabilities must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `sum_i a_i p_i`.
    pub fn p_bar(&self) -> f64 {
        self.a.iter().zip(&self.p).map(|(a, p)| a * p).sum()
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::Bound(format!("zeta = {zeta} outside [0, 1)")));
    }
    Ok(())
}

/// Both forms of `Gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gamma {
    /// `zeta/(1-zeta^2) + 2/(1-zeta) + zeta/(1-zeta)^2`.
    pub tight: f64,
    /// `1/(1-zeta^2) + 2/(1-zeta) + zeta/(1-zeta)^2`; used for feasibility.
    pub conservative: f64,
}

pub fn gamma(zeta: f64) -> Result<Gamma> {
    check_zeta(zeta)?;
    let tail = 2.0 / (1.0 - zeta) + zeta / ((1.0 - zeta) * (1.0 - zeta));
    let d = 1.0 - zeta * zeta;
    Ok(Gamma {
        tight: zeta / d + tail,
        conservative: 1.0 / d + tail,
    })
}

/// Left and right sides of the step-size condition for one worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub lhs: f64,
    pub rhs: f64,
    pub feasible: bool,
}

pub fn stepsize_condition(inputs: &BoundInputs) -> Result<Vec<Feasibility>> {
    inputs.validate()?;
    let g = gamma(inputs.zeta)?.conservative;
    let l = inputs.l;
    let eta = inputs.eta;
    let qt = (inputs.q * inputs.tau) as f64;
    let mixing = 8.0 * l * l * eta * eta * qt * qt * g;
    Ok(inputs
        .a
        .iter()
        .zip(&inputs.p)
        .map(|(&a, &p)| {
            let lhs = 4.0 * p - p * p - 2.0;
            let rhs = eta * l * (a * p * (inputs.beta + 1.0) - a * p * p + p * p) + mixing;
            Feasibility {
                lhs,
                rhs,
                // a non-positive left side never admits a positive step size
                feasible: lhs > 0.0 && lhs >= rhs,
            }
        })
        .collect())
}

pub fn stepsize_feasible(inputs: &BoundInputs) -> Result<Vec<bool>> {
    Ok(stepsize_condition(inputs)?
        .iter()
        .map(|f| f.feasible)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub term4: f64,
    pub total: f64,
    /// Limit of the total as `K -> infinity`.
    pub asymptotic_total: f64,
    pub feasible_per_worker: Vec<bool>,
    /// False when some worker violates the step-size condition; the terms
    /// are still evaluated.
    pub feasible: bool,
    pub p_bar: f64,
    pub gamma: Gamma,
}

pub fn convergence_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let feasible_per_worker = stepsize_feasible(inputs)?;
    let BoundInputs {
        l,
        sigma_sq,
        eta,
        zeta,
        f_gap,
        ..
    } = *inputs;
    let q = inputs.q as f64;
    let tau = inputs.tau as f64;
    let k = inputs.steps as f64;
    let qt = q * tau;
    let p_bar = inputs.p_bar();
    let sum_a2p: f64 = inputs.a.iter().zip(&inputs.p).map(|(a, p)| a * a * p).sum();

    let spectral = zeta * zeta / (1.0 - zeta * zeta)
        + 2.0 * zeta / (1.0 - zeta)
        + 1.0 / ((1.0 - zeta) * (1.0 - zeta));
    let prefactor = 4.0 * l * l * eta * eta * sigma_sq;
    let periods =
        tau * tau * (q - 1.0) * (2.0 * q + 1.0) / 6.0 + (tau - 1.0) * (2.0 * tau + 1.0) / 6.0;

    let term1 = if eta > 0.0 {
        2.0 * f_gap / (eta * k)
    } else {
        f64::INFINITY
    };
    let term2 = sigma_sq * eta * l * sum_a2p;
    let term3 = prefactor * qt.powi(3) * (1.0 / qt - 1.0 / k) * spectral * p_bar;
    let term4 = prefactor * ((2.0 - zeta) / (1.0 - zeta)) * periods * p_bar;
    let term3_limit = prefactor * qt * qt * spectral * p_bar;

    Ok(BoundReport {
        term1,
        term2,
        term3,
        term4,
        total: term1 + term2 + term3 + term4,
        asymptotic_total: term2 + term3_limit + term4,
        feasible: feasible_per_worker.iter().all(|&f| f),
        feasible_per_worker,
        p_bar,
        gamma: gamma(zeta)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateTerms {
    pub eta: f64,
    /// `L (F(x_1) - F_inf) / sqrt(K)`.
    pub gap_term: f64,
    /// `sigma^2 / sqrt(K)`.
    pub noise_term: f64,
}

/// Step size `1/(L sqrt(K))` and the two `O(1/sqrt(K))` terms with unit
/// constants. Requires `q^2 tau^2 <= sqrt(K)` and `q tau < K`.
pub fn tuned_rate(
    l: f64,
    steps: usize,
    q: usize,
    tau: usize,
    f_gap: f64,
    sigma_sq: f64,
) -> Result<RateTerms> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Bound(format!("L = {l} must be positive")));
    }
    let k = steps as f64;
    let qt = (q * tau) as f64;
    let root = k.sqrt();
    if qt * qt > root {
        return Err(Error::Bound(format!(
            "q^2 tau^2 = {} exceeds sqrt(K) = {root}",
            qt * qt
        )));
    }
    if q * tau >= steps {
        return Err(Error::Bound(format!(
            "q*tau = {} is not below K = {steps}",
            q * tau
        )));
    }
    Ok(RateTerms {
        eta: 1.0 / (l * root),
        gap_term: l * f_gap / root,
        noise_term: sigma_sq / root,
    })
}
