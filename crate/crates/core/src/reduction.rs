//! Slow-manifold machinery in the scaling chart: first-order graph
//! corrections, the truncated reduced planar system, the Hamiltonian limit,
//! the reduced equilibrium and its continuation, trace asymptotics, the Hopf
//! threshold `mu_Hopf(sigma)` and the ray classification `mu = c sigma`.

use crate::error::{Error, Result};
use crate::model::{phi, phi_prime, ModelParams};

/// Slow variables `(u2, v2)` of the scaling chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub u2: f64,
    pub v2: f64,
}

impl ReducedState {
    pub fn new(u2: f64, v2: f64) -> Self {
        Self { u2, v2 }
    }
}

/// Truncation order of the slow-manifold graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphOrder {
    /// Critical slaving only.
    Zeroth,
    /// Critical slaving plus the `mu`-linear corrections.
    First,
}

/// The slow-manifold graph `(u2, v2) -> (r_a, r_b)` at a chosen truncation
/// order.
#[derive(Debug, Clone, Copy)]
pub struct SlowManifoldGraph {
    pub order: GraphOrder,
}

impl SlowManifoldGraph {
    pub fn new(order: GraphOrder) -> Self {
        Self { order }
    }

    /// Evaluate the graph. At `mu = 0` this is exactly the critical slaving
    /// `r_a = phi(v2)`, `r_b = gamma^-1 (1 - phi(u2))`.
    pub fn eval(&self, rs: &ReducedState, eta2: f64, mu: f64, p: &ModelParams) -> (f64, f64) {
        let r_a0 = phi(rs.v2);
        let r_b0 = (1.0 - phi(rs.u2)) / p.gamma;
        match self.order {
            GraphOrder::Zeroth => (r_a0, r_b0),
            GraphOrder::First => {
                let (oa, ob) = omega_corrections(rs, eta2, p);
                (r_a0 + mu * oa, r_b0 + mu * ob)
            }
        }
    }
}

/// First-order slow-manifold corrections:
///
/// ```text
/// Omega_a = -phi'(v2) G_b(gamma^-1 (1 - phi(u2)), eta2 v2)
/// Omega_b = gamma^-2 phi'(u2) G_a(phi(v2), eta2 u2)
/// ```
pub fn omega_corrections(rs: &ReducedState, eta2: f64, p: &ModelParams) -> (f64, f64) {
    let (u, v) = (rs.u2, rs.v2);
    let r_b0 = (1.0 - phi(u)) / p.gamma;
    let omega_a = -phi_prime(v) * p.g_b(r_b0, eta2 * v);
    let omega_b = phi_prime(u) * p.g_a(phi(v), eta2 * u) / (p.gamma * p.gamma);
    (omega_a, omega_b)
}

/// Partial derivatives of the corrections with respect to `(u2, v2)`.
/// Returns `(dOa/du, dOa/dv, dOb/du, dOb/dv)`.
fn omega_partials(rs: &ReducedState, eta2: f64, p: &ModelParams) -> (f64, f64, f64, f64) {
    let (u, v) = (rs.u2, rs.v2);
    let (gamma, delta, xi_a, xi_b) = (p.gamma, p.delta, p.xi_a, p.xi_b);
    let phi_u = phi(u);
    let phi_v = phi(v);
    let dphi_u = phi_prime(u);
    let dphi_v = phi_prime(v);
    // phi'' = phi' (1 - 2 phi)
    let ddphi_u = dphi_u * (1.0 - 2.0 * phi_u);
    let ddphi_v = dphi_v * (1.0 - 2.0 * phi_v);
    let r_b0 = (1.0 - phi_u) / gamma;

    let e_v = (-eta2 * v).exp();
    let e_u = (-eta2 * u).exp();
    let gb = p.g_b(r_b0, eta2 * v);
    let ga = p.g_a(phi_v, eta2 * u);

    let d_oa_du = dphi_v * delta * xi_b * e_v * dphi_u / gamma;
    let d_oa_dv = -ddphi_v * gb - dphi_v * (-eta2) * delta * xi_b * r_b0 * e_v;
    let d_ob_du = (ddphi_u * ga + dphi_u * (-eta2) * xi_a * phi_v * e_u) / (gamma * gamma);
    let d_ob_dv = dphi_u * xi_a * e_u * dphi_v / (gamma * gamma);
    (d_oa_du, d_oa_dv, d_ob_du, d_ob_dv)
}

/// Invariance defect of the truncated slow-manifold graph under the scaling
/// chart field; the Euclidean norm of the Lie derivatives of the two
/// graph-defect functions. Scales as `O(mu^2)` for the first-order graph and
/// `O(mu)` for the zeroth-order graph.
pub fn slow_manifold_residual_with_order(
    rs: &ReducedState,
    eta2: f64,
    mu: f64,
    p: &ModelParams,
    order: GraphOrder,
) -> f64 {
    let (u, v) = (rs.u2, rs.v2);
    let graph = SlowManifoldGraph::new(order);
    let (r_a, r_b) = graph.eval(rs, eta2, mu, p);

    // Chart field evaluated on the graph.
    let ra_dot = phi(v) - r_a;
    let rb_dot = 1.0 - phi(u) - p.gamma * r_b;
    let u_dot = mu * p.g_a(r_a, eta2 * u);
    let v_dot = mu * p.g_b(r_b, eta2 * v);

    // Gradients of the graph functions g_a(u, v), g_b(u, v).
    let (mut dga_du, mut dga_dv) = (0.0, phi_prime(v));
    let (mut dgb_du, mut dgb_dv) = (-phi_prime(u) / p.gamma, 0.0);
    if order == GraphOrder::First {
        let (d_oa_du, d_oa_dv, d_ob_du, d_ob_dv) = omega_partials(rs, eta2, p);
        dga_du += mu * d_oa_du;
        dga_dv += mu * d_oa_dv;
        dgb_du += mu * d_ob_du;
        dgb_dv += mu * d_ob_dv;
    }

    let lie_a = ra_dot - dga_du * u_dot - dga_dv * v_dot;
    let lie_b = rb_dot - dgb_du * u_dot - dgb_dv * v_dot;
    lie_a.hypot(lie_b)
}

/// Residual of the first-order graph (the graph the reduced system uses).
pub fn slow_manifold_residual(rs: &ReducedState, eta2: f64, mu: f64, p: &ModelParams) -> f64 {
    slow_manifold_residual_with_order(rs, eta2, mu, p, GraphOrder::First)
}

/// Truncated reduced planar system on the slow manifold:
///
/// ```text
/// u2' = G_a(phi(v2), sigma u2) + mu xi_a e^{-sigma u2} Omega_a
/// v2' = delta [ (xi_b gamma^-1 (1 - phi(u2)) e^{-sigma v2} - 1)
///               + mu xi_b e^{-sigma v2} Omega_b ]
/// ```
///
/// The `O(mu^2)` remainder is dropped.
pub fn reduced_field(rs: &ReducedState, sigma: f64, mu: f64, p: &ModelParams) -> [f64; 2] {
    let (u, v) = (rs.u2, rs.v2);
    let (oa, ob) = omega_corrections(rs, sigma, p);
    let e_u = (-sigma * u).exp();
    let e_v = (-sigma * v).exp();
    let r_b0 = (1.0 - phi(u)) / p.gamma;
    [
        (p.xi_a * phi(v) * e_u - 1.0) + mu * p.xi_a * e_u * oa,
        p.delta * ((p.xi_b * r_b0 * e_v - 1.0) + mu * p.xi_b * e_v * ob),
    ]
}

/// Analytic Jacobian of [`reduced_field`]; used by the stiff integrator.
/// Diagnostic traces use the finite-difference route instead.
pub fn reduced_field_jacobian(
    rs: &ReducedState,
    sigma: f64,
    mu: f64,
    p: &ModelParams,
) -> [[f64; 2]; 2] {
    let (u, v) = (rs.u2, rs.v2);
    let (oa, ob) = omega_corrections(rs, sigma, p);
    let (d_oa_du, d_oa_dv, d_ob_du, d_ob_dv) = omega_partials(rs, sigma, p);
    let e_u = (-sigma * u).exp();
    let e_v = (-sigma * v).exp();
    let phi_u = phi(u);
    let dphi_u = phi_prime(u);
    let dphi_v = phi_prime(v);
    let r_b0 = (1.0 - phi_u) / p.gamma;

    let du_du = -sigma * p.xi_a * phi(v) * e_u + mu * p.xi_a * e_u * (d_oa_du - sigma * oa);
    let du_dv = p.xi_a * dphi_v * e_u + mu * p.xi_a * e_u * d_oa_dv;
    let dv_du = p.delta * (-p.xi_b * dphi_u / p.gamma * e_v + mu * p.xi_b * e_v * d_ob_du);
    let dv_dv = p.delta
        * (-sigma * p.xi_b * r_b0 * e_v + mu * p.xi_b * e_v * (d_ob_dv - sigma * ob));
    [[du_du, du_dv], [dv_du, dv_dv]]
}

/// Hamiltonian of the `mu = sigma = 0` limit system:
/// `H = (delta xi_b / gamma) ln(1 + e^u) + xi_a ln(1 + e^v)
///      - delta (xi_b / gamma - 1) u - v`.
pub fn hamiltonian(rs: &ReducedState, p: &ModelParams) -> f64 {
    fn softplus(x: f64) -> f64 {
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    }
    let q = p.delta * p.xi_b / p.gamma;
    q * softplus(rs.u2) + p.xi_a * softplus(rs.v2) - (q - p.delta) * rs.u2 - rs.v2
}

fn require_equilibrium_params(p: &ModelParams) -> Result<()> {
    if p.xi_a <= 1.0 {
        return Err(Error::Existence(format!(
            "reduced equilibrium requires xi_a > 1, got {}",
            p.xi_a
        )));
    }
    if p.xi_b <= p.gamma {
        return Err(Error::Existence(format!(
            "reduced equilibrium requires xi_b > gamma, got xi_b = {}, gamma = {}",
            p.xi_b, p.gamma
        )));
    }
    Ok(())
}

/// Closed-form equilibrium of the limiting reduced system:
/// `q2 = (ln(xi_b - gamma) - ln gamma, -ln(xi_a - 1))`, which exists iff
/// `xi_a > 1` and `xi_b > gamma`.
pub fn q2_equilibrium(p: &ModelParams) -> Result<ReducedState> {
    require_equilibrium_params(p)?;
    Ok(ReducedState::new(
        (p.xi_b - p.gamma).ln() - p.gamma.ln(),
        -(p.xi_a - 1.0).ln(),
    ))
}

/// Finite-difference Jacobian of the reduced field (central differences).
fn reduced_jacobian_fd(rs: &ReducedState, sigma: f64, mu: f64, p: &ModelParams, h: f64) -> [[f64; 2]; 2] {
    let hu = h * rs.u2.abs().max(1.0);
    let hv = h * rs.v2.abs().max(1.0);
    let fu_p = reduced_field(&ReducedState::new(rs.u2 + hu, rs.v2), sigma, mu, p);
    let fu_m = reduced_field(&ReducedState::new(rs.u2 - hu, rs.v2), sigma, mu, p);
    let fv_p = reduced_field(&ReducedState::new(rs.u2, rs.v2 + hv), sigma, mu, p);
    let fv_m = reduced_field(&ReducedState::new(rs.u2, rs.v2 - hv), sigma, mu, p);
    [
        [
            (fu_p[0] - fu_m[0]) / (2.0 * hu),
            (fv_p[0] - fv_m[0]) / (2.0 * hv),
        ],
        [
            (fu_p[1] - fu_m[1]) / (2.0 * hu),
            (fv_p[1] - fv_m[1]) / (2.0 * hv),
        ],
    ]
}

/// Newton continuation of `q2` for small `(sigma, mu)`: damped Newton with
/// finite-difference Jacobians, seeded at the closed form.
pub fn q2_continued(p: &ModelParams, sigma: f64, mu: f64) -> Result<ReducedState> {
    let mut x = q2_equilibrium(p)?;
    let mut f = reduced_field(&x, sigma, mu, p);
    let mut res = f[0].abs().max(f[1].abs());
    for _ in 0..50 {
        if res < 1e-13 {
            return Ok(x);
        }
        let j = reduced_jacobian_fd(&x, sigma, mu, p, 1e-7);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return Err(Error::NonConvergence {
                what: "q2 continuation (singular Jacobian)".into(),
                iters: 50,
            });
        }
        let du = (-f[0] * j[1][1] + f[1] * j[0][1]) / det;
        let dv = (-f[1] * j[0][0] + f[0] * j[1][0]) / det;
        // Damp by halves while the residual does not decrease.
        let mut lambda = 1.0;
        loop {
            let trial = ReducedState::new(x.u2 + lambda * du, x.v2 + lambda * dv);
            let ft = reduced_field(&trial, sigma, mu, p);
            let rt = ft[0].abs().max(ft[1].abs());
            if rt < res || lambda < 1.0 / 1024.0 {
                x = trial;
                f = ft;
                res = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if res < 1e-12 {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            what: format!("q2 continuation (residual {res:.3e})"),
            iters: 50,
        })
    }
}

/// Trace of the finite-difference Jacobian of the reduced field at the
/// continued equilibrium.
pub fn trace_at_equilibrium(p: &ModelParams, sigma: f64, mu: f64) -> Result<f64> {
    let q = q2_continued(p, sigma, mu)?;
    let j = reduced_jacobian_fd(&q, sigma, mu, p, 1e-6);
    Ok(j[0][0] + j[1][1])
}

/// Determinant of the finite-difference Jacobian at the continued
/// equilibrium; positive at a genuine Hopf crossing.
pub fn det_at_equilibrium(p: &ModelParams, sigma: f64, mu: f64) -> Result<f64> {
    let q = q2_continued(p, sigma, mu)?;
    let j = reduced_jacobian_fd(&q, sigma, mu, p, 1e-6);
    Ok(j[0][0] * j[1][1] - j[0][1] * j[1][0])
}

/// First-order trace asymptotics:
/// `tr = -sigma (1 + delta)
///       + mu (xi_a - 1)(xi_b - gamma) / (xi_a xi_b) * delta (1 + gamma) / gamma`.
pub fn trace_asymptotic(p: &ModelParams, sigma: f64, mu: f64) -> f64 {
    -sigma * (1.0 + p.delta) + mu * mu_trace_slope(p)
}

/// Coefficient of `mu` in the trace asymptotics.
pub fn mu_trace_slope(p: &ModelParams) -> f64 {
    (p.xi_a - 1.0) * (p.xi_b - p.gamma) / (p.xi_a * p.xi_b) * p.delta * (1.0 + p.gamma) / p.gamma
}

/// Hopf threshold: the value of `mu` at which the trace of the reduced
/// Jacobian vanishes for the given `sigma`. `mu_hopf(0) = 0`, and the slope
/// at `sigma = 0` is `xi_a xi_b / ((xi_a - 1)(xi_b - gamma)) *
/// gamma (1 + delta) / (delta (1 + gamma))`.
pub fn mu_hopf(p: &ModelParams, sigma: f64) -> Result<f64> {
    require_equilibrium_params(p)?;
    if sigma < 0.0 {
        return Err(Error::Domain("mu_hopf requires sigma >= 0".into()));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let slope_est = sigma * (1.0 + p.delta) / mu_trace_slope(p);
    let mut lo = 0.0;
    let mut f_lo = trace_at_equilibrium(p, sigma, lo)?;
    if f_lo >= 0.0 {
        return Err(Error::RootNotBracketed(format!(
            "trace at mu = 0 is nonnegative ({f_lo:.3e})"
        )));
    }
    let mut hi = 2.0 * slope_est;
    let mut f_hi = trace_at_equilibrium(p, sigma, hi)?;
    let mut expansions = 0;
    while f_hi < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 40 {
            return Err(Error::RootNotBracketed(
                "trace does not change sign in mu".into(),
            ));
        }
        f_hi = trace_at_equilibrium(p, sigma, hi)?;
    }
    // Bisection with a secant refinement step each iteration.
    for _ in 0..200 {
        if hi - lo < 1e-12 * hi.max(1e-6) {
            break;
        }
        let mid = if (f_hi - f_lo).abs() > 0.0 {
            let sec = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            let safe_lo = lo + 0.1 * (hi - lo);
            let safe_hi = hi - 0.1 * (hi - lo);
            sec.clamp(safe_lo, safe_hi)
        } else {
            0.5 * (lo + hi)
        };
        let f_mid = trace_at_equilibrium(p, sigma, mid)?;
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The ray coefficient `alpha = gamma (1 + delta) / (delta (1 + gamma))`.
pub fn alpha(p: &ModelParams) -> f64 {
    p.gamma * (1.0 + p.delta) / (p.delta * (1.0 + p.gamma))
}

/// Which side of the ray `mu = alpha sigma` a ray `mu = c sigma` lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayClass {
    /// `c > alpha`: Hopf bifurcations occur for suitable `(xi_a, xi_b)`.
    HopfPossible,
    /// `c < alpha`: no Hopf bifurcations on compact parameter sets.
    HopfImpossible,
}

/// Classify the ray `mu = c sigma`. Errors within `1e-12` of the boundary
/// `c = alpha` instead of guessing a side.
pub fn classify_ray(c: f64, p: &ModelParams) -> Result<RayClass> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("ray coefficient must be > 0, got {c}")));
    }
    let a = alpha(p);
    if (c - a).abs() < 1e-12 {
        return Err(Error::Boundary(format!(
            "ray coefficient {c} is within 1e-12 of alpha = {a}"
        )));
    }
    Ok(if c > a {
        RayClass::HopfPossible
    } else {
        RayClass::HopfImpossible
    })
}

/// Summary of the Hopf diagnostics at a parameter point.
#[derive(Debug, Clone, Copy)]
pub struct HopfData {
    pub trace: f64,
    pub det: f64,
    pub mu_hopf: Option<f64>,
    pub alpha: f64,
}

/// Bundle trace, determinant, threshold and ray coefficient for the given
/// `(sigma, mu)`.
pub fn hopf_data(p: &ModelParams, sigma: f64, mu: f64) -> Result<HopfData> {
    Ok(HopfData {
        trace: trace_at_equilibrium(p, sigma, mu)?,
        det: det_at_equilibrium(p, sigma, mu)?,
        mu_hopf: mu_hopf(p, sigma).ok(),
        alpha: alpha(p),
    })
}
