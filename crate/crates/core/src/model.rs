//! Model definitions: scaled parameters, Hill/sigmoid primitives, the full
//! 4D activator-inhibitor vector field, its protein-only quasi-steady-state
//! reduction, parameter normalization from raw rate constants, and the
//! Lie-derivative diagnostic that measures the invariance defect of the
//! quasi-steady-state graph near the switching manifold.
//!
//! All operations are pure functions of their arguments.

use crate::error::{Error, Result};

/// Threshold on `n * |ln(p/theta)|` above which Hill functions are evaluated
/// in log space. Below it, the direct power form is used.
const HILL_LOG_SWITCH: f64 = 30.0;

/// Raw (dimensional) parameters of the activator-inhibitor network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    /// Maximal transcription rates.
    pub m_a: f64,
    pub m_b: f64,
    /// mRNA decay rates.
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Translation rates.
    pub k_a: f64,
    pub k_b: f64,
    /// Protein decay rates.
    pub delta_a: f64,
    pub delta_b: f64,
    /// Switching thresholds.
    pub theta_a: f64,
    pub theta_b: f64,
    /// Time-scale ratio.
    pub eps_raw: f64,
    /// Shared Hill exponent.
    pub n: f64,
}

impl RawParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m_a: f64,
        m_b: f64,
        gamma_a: f64,
        gamma_b: f64,
        k_a: f64,
        k_b: f64,
        delta_a: f64,
        delta_b: f64,
        theta_a: f64,
        theta_b: f64,
        eps_raw: f64,
        n: f64,
    ) -> Result<Self> {
        let fields = [
            ("m_a", m_a),
            ("m_b", m_b),
            ("gamma_a", gamma_a),
            ("gamma_b", gamma_b),
            ("k_a", k_a),
            ("k_b", k_b),
            ("delta_a", delta_a),
            ("delta_b", delta_b),
            ("theta_a", theta_a),
            ("theta_b", theta_b),
            ("eps_raw", eps_raw),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        if !(n.is_finite() && n >= 1.0) {
            return Err(Error::InvalidParams(format!("n must satisfy n >= 1, got {n}")));
        }
        Ok(Self {
            m_a,
            m_b,
            gamma_a,
            gamma_b,
            k_a,
            k_b,
            delta_a,
            delta_b,
            theta_a,
            theta_b,
            eps_raw,
            n,
        })
    }
}

/// Scaled model parameters. Single source of truth for every module.
///
/// `sigma` is the inverse Hill exponent; `sigma == 0` denotes the switching
/// limit, which only the piecewise-linear module accepts. The derived ratio
/// `mu = eps / sigma` exists only for `sigma > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub delta: f64,
    pub xi_a: f64,
    pub xi_b: f64,
    pub sigma: f64,
    pub eps: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, delta: f64, xi_a: f64, xi_b: f64, sigma: f64, eps: f64) -> Result<Self> {
        for (name, v) in [
            ("gamma", gamma),
            ("delta", delta),
            ("xi_a", xi_a),
            ("xi_b", xi_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParams(format!("sigma must be >= 0, got {sigma}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParams(format!("eps must be >= 0, got {eps}")));
        }
        Ok(Self {
            gamma,
            delta,
            xi_a,
            xi_b,
            sigma,
            eps,
        })
    }

    /// Construct with `(sigma, mu)` instead of `(sigma, eps)`; `eps = mu * sigma`.
    pub fn with_mu(gamma: f64, delta: f64, xi_a: f64, xi_b: f64, sigma: f64, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidParams(format!("mu must be >= 0, got {mu}")));
        }
        Self::new(gamma, delta, xi_a, xi_b, sigma, mu * sigma)
    }

    /// Ratio `mu = eps / sigma`; defined only when `sigma > 0`.
    pub fn mu(&self) -> Option<f64> {
        (self.sigma > 0.0).then(|| self.eps / self.sigma)
    }

    /// Hill exponent `n = 1 / sigma`; requires `sigma > 0`.
    pub fn hill_exponent(&self) -> Result<f64> {
        if self.sigma > 0.0 {
            Ok(1.0 / self.sigma)
        } else {
            Err(Error::Domain(
                "sigma = 0 has no finite Hill exponent; use the pwl module".into(),
            ))
        }
    }

    /// Same parameters with a different `eps`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.gamma, self.delta, self.xi_a, self.xi_b, self.sigma, eps)
    }

    /// Same parameters with a different `sigma` (keeps `eps`).
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.gamma, self.delta, self.xi_a, self.xi_b, sigma, self.eps)
    }

    /// Same parameters with different bifurcation parameters `(xi_a, xi_b)`.
    pub fn with_xi(&self, xi_a: f64, xi_b: f64) -> Result<Self> {
        Self::new(self.gamma, self.delta, xi_a, xi_b, self.sigma, self.eps)
    }

    /// `G_a(x, y) = xi_a * x * e^{-y} - 1`.
    pub fn g_a(&self, x: f64, y: f64) -> f64 {
        self.xi_a * x * (-y).exp() - 1.0
    }

    /// `G_b(x, y) = delta * (xi_b * x * e^{-y} - 1)`.
    pub fn g_b(&self, x: f64, y: f64) -> f64 {
        self.delta * (self.xi_b * x * (-y).exp() - 1.0)
    }
}

/// A point of the full 4D phase space `(r_a, r_b, p_a, p_b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State4 {
    pub r_a: f64,
    pub r_b: f64,
    pub p_a: f64,
    pub p_b: f64,
}

impl State4 {
    pub fn new(r_a: f64, r_b: f64, p_a: f64, p_b: f64) -> Self {
        Self { r_a, r_b, p_a, p_b }
    }

    pub fn from_array(y: [f64; 4]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.r_a, self.r_b, self.p_a, self.p_b]
    }

    /// True if every component is `>= -slack` (the closed positive octant up
    /// to a numerical slack).
    pub fn in_octant(&self, slack: f64) -> bool {
        self.to_array().iter().all(|&v| v >= -slack)
    }
}

/// A point on the critical manifold: protein coordinates with the mRNA
/// coordinates slaved to their quasi-steady-state values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QssrPoint {
    pub p_a: f64,
    pub p_b: f64,
    pub r_a: f64,
    pub r_b: f64,
}

impl QssrPoint {
    /// Slave `(r_a, r_b)` to the given protein concentrations:
    /// `r_a = h+(p_b; 1, 1/sigma)`, `r_b = gamma^-1 h-(p_a; 1, 1/sigma)`.
    pub fn slaved(p_a: f64, p_b: f64, p: &ModelParams) -> Result<Self> {
        let n = p.hill_exponent()?;
        if p_a < 0.0 || p_b < 0.0 {
            return Err(Error::Domain("protein concentrations must be >= 0".into()));
        }
        let r_a = hill_plus(p_b, 1.0, n)?;
        let r_b = hill_minus(p_a, 1.0, n)? / p.gamma;
        Ok(Self { p_a, p_b, r_a, r_b })
    }

    pub fn state(&self) -> State4 {
        State4::new(self.r_a, self.r_b, self.p_a, self.p_b)
    }
}

/// Logistic sigmoid `phi(x) = e^x / (1 + e^x)`, evaluated with the
/// overflow-safe branch form. Total on finite reals and on +-infinity.
pub fn phi(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative `phi'(x) = phi(x) (1 - phi(x))`.
pub fn phi_prime(x: f64) -> f64 {
    // Evaluate on the decaying side so that neither factor saturates to 1.
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

fn check_hill_args(p: f64, theta: f64, n: f64) -> Result<()> {
    if p.is_nan() || p < 0.0 {
        return Err(Error::Domain(format!("hill: p must be >= 0, got {p}")));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("hill: theta must be > 0, got {theta}")));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("hill: n must be > 0, got {n}")));
    }
    Ok(())
}

/// Both Hill functions at once, with `h+ + h- = 1` exact to one rounding.
///
/// The pair is computed from a single shared denominator: in the power form
/// `(p^n / s, theta^n / s)` with `s = p^n + theta^n`, and in the log-space
/// form `(phi(x), phi(-x))` with `x = n ln(p/theta)`. Log space is selected
/// when `n |ln(p/theta)|` exceeds a switch threshold or when the raw powers
/// would overflow.
pub fn hill_pair(p: f64, theta: f64, n: f64) -> Result<(f64, f64)> {
    check_hill_args(p, theta, n)?;
    if p == 0.0 {
        return Ok((0.0, 1.0));
    }
    let x = n * (p / theta).ln();
    let overflow_risk = n * p.ln().abs().max(theta.ln().abs()) > 300.0;
    if x.abs() > HILL_LOG_SWITCH || overflow_risk {
        Ok((phi(x), phi(-x)))
    } else {
        let pn = p.powf(n);
        let tn = theta.powf(n);
        let s = pn + tn;
        Ok((pn / s, tn / s))
    }
}

/// Increasing Hill function `h+(p; theta, n) = p^n / (p^n + theta^n)`.
pub fn hill_plus(p: f64, theta: f64, n: f64) -> Result<f64> {
    hill_pair(p, theta, n).map(|(hp, _)| hp)
}

/// Decreasing Hill function `h-(p; theta, n) = theta^n / (p^n + theta^n)`.
pub fn hill_minus(p: f64, theta: f64, n: f64) -> Result<f64> {
    hill_pair(p, theta, n).map(|(_, hm)| hm)
}

/// Derivative of `h+` with respect to `p`: `(n/p) h+ (1 - h+)`.
///
/// At `p = 0` the one-sided limit is returned: `0` for `n > 1`, `1/theta`
/// for `n = 1` and `+inf` for `n < 1`.
pub fn hill_plus_dp(p: f64, theta: f64, n: f64) -> Result<f64> {
    check_hill_args(p, theta, n)?;
    if p == 0.0 {
        return Ok(if n > 1.0 {
            0.0
        } else if n == 1.0 {
            1.0 / theta
        } else {
            f64::INFINITY
        });
    }
    let x = n * (p / theta).ln();
    let slope = phi_prime(x);
    // Deep in the tails the sigmoid factor underflows before n/p can
    // overflow; returning 0 avoids inf * 0 for subnormal p.
    if slope == 0.0 {
        return Ok(0.0);
    }
    Ok(n / p * slope)
}

/// Right-hand side of the full 4D system:
///
/// ```text
/// r_a' = h+(p_b; 1, 1/sigma) - r_a
/// r_b' = h-(p_a; 1, 1/sigma) - gamma r_b
/// p_a' = eps (xi_a r_a - p_a)
/// p_b' = eps delta (xi_b r_b - p_b)
/// ```
///
/// Requires `sigma > 0`; the switching limit lives in the pwl module.
pub fn full_vector_field(s: &State4, p: &ModelParams) -> Result<[f64; 4]> {
    let n = p.hill_exponent()?;
    let hp_b = hill_plus(s.p_b, 1.0, n)?;
    let hm_a = hill_minus(s.p_a, 1.0, n)?;
    Ok([
        hp_b - s.r_a,
        hm_a - p.gamma * s.r_b,
        p.eps * (p.xi_a * s.r_a - s.p_a),
        p.eps * p.delta * (p.xi_b * s.r_b - s.p_b),
    ])
}

/// Analytic Jacobian of [`full_vector_field`] with respect to the state.
pub fn full_jacobian(s: &State4, p: &ModelParams) -> Result<[[f64; 4]; 4]> {
    let n = p.hill_exponent()?;
    let dhp_b = hill_plus_dp(s.p_b, 1.0, n)?;
    let dhp_a = hill_plus_dp(s.p_a, 1.0, n)?;
    Ok([
        [-1.0, 0.0, 0.0, dhp_b],
        [0.0, -p.gamma, -dhp_a, 0.0],
        [p.eps * p.xi_a, 0.0, -p.eps, 0.0],
        [0.0, p.eps * p.delta * p.xi_b, 0.0, -p.eps * p.delta],
    ])
}

/// Right-hand side of the protein-only quasi-steady-state system (slow time):
///
/// ```text
/// p_a' = xi_a h+(p_b; 1, 1/sigma) - p_a
/// p_b' = delta (xi_b gamma^-1 h-(p_a; 1, 1/sigma) - p_b)
/// ```
pub fn qssr_vector_field(p_a: f64, p_b: f64, p: &ModelParams) -> Result<[f64; 2]> {
    let n = p.hill_exponent()?;
    let hp_b = hill_plus(p_b, 1.0, n)?;
    let hm_a = hill_minus(p_a, 1.0, n)?;
    Ok([
        p.xi_a * hp_b - p_a,
        p.delta * (p.xi_b / p.gamma * hm_a - p_b),
    ])
}

/// Analytic Jacobian of [`qssr_vector_field`]. Its trace is identically
/// `-(1 + delta)`, which is why the reduced system cannot support limit
/// cycles for fixed `sigma > 0`.
pub fn qssr_jacobian(p_a: f64, p_b: f64, p: &ModelParams) -> Result<[[f64; 2]; 2]> {
    let n = p.hill_exponent()?;
    let dhp_b = hill_plus_dp(p_b, 1.0, n)?;
    let dhp_a = hill_plus_dp(p_a, 1.0, n)?;
    Ok([
        [-1.0, p.xi_a * dhp_b],
        [-p.delta * p.xi_b / p.gamma * dhp_a, -p.delta],
    ])
}

/// Normalize raw rate constants into the scaled parameter set, applying the
/// displayed rescaling formulas verbatim:
///
/// ```text
/// gamma = gamma_b / gamma_a        xi_a = k_a m_a / (gamma_a theta_a)
/// delta = delta_b / delta_a        xi_b = k_b m_b / (gamma_a theta_b)
/// eps   = (delta_a / gamma_a) eps_raw
/// sigma = 1 / n
/// ```
pub fn normalize_parameters(r: &RawParams) -> Result<ModelParams> {
    ModelParams::new(
        r.gamma_b / r.gamma_a,
        r.delta_b / r.delta_a,
        r.k_a * r.m_a / (r.gamma_a * r.theta_a),
        r.k_b * r.m_b / (r.gamma_a * r.theta_b),
        1.0 / r.n,
        r.delta_a / r.gamma_a * r.eps_raw,
    )
}

/// Right-hand side of the raw (dimensional) system, used by the round-trip
/// oracle that checks [`normalize_parameters`] against dual integration.
pub fn raw_vector_field(s: &State4, r: &RawParams) -> Result<[f64; 4]> {
    let hp_b = hill_plus(s.p_b, r.theta_b, r.n)?;
    let hm_a = hill_minus(s.p_a, r.theta_a, r.n)?;
    Ok([
        r.m_a * hp_b - r.gamma_a * s.r_a,
        r.m_b * hm_a - r.gamma_b * s.r_b,
        r.eps_raw * (r.k_a * s.r_a - r.delta_a * s.p_a),
        r.eps_raw * (r.k_b * s.r_b - r.delta_b * s.p_b),
    ])
}

/// Lie derivative of the graph defect `r_a - phi(sigma^-1 ln p_b)` along the
/// full vector field, evaluated at the slaved point with `p_b = 1` and
/// `p_a > 1`. For `sigma -> 0` this tends to `mu delta / 4`, which is the
/// computable obstruction to a quasi-steady-state reduction at fixed `mu`.
pub fn lie_derivative_defect(p_a: f64, p: &ModelParams) -> Result<f64> {
    if p.sigma <= 0.0 {
        return Err(Error::Domain("lie_derivative_defect requires sigma > 0".into()));
    }
    if p_a.is_nan() || p_a <= 1.0 {
        return Err(Error::Domain(format!(
            "lie_derivative_defect requires p_a > 1, got {p_a}"
        )));
    }
    let mu = p.mu().expect("sigma > 0");
    let p_b = 1.0;
    // Slaved point on the critical manifold.
    let r_b = (1.0 - phi(p_a.ln() / p.sigma)) / p.gamma;
    // d/dt of phi(sigma^-1 ln p_b) via the chain rule; r_a' vanishes on the
    // manifold, so the defect rate is the negative of this term.
    let pb_dot = mu * p.sigma * p.delta * (p.xi_b * r_b - p_b);
    let dphi = phi_prime(p_b.ln() / p.sigma) / p.sigma * (pb_dot / p_b);
    Ok(-dphi)
}
