//! Cross-module oracles: dual integration of the raw and rescaled systems,
//! the full field at the solved equilibrium, and reduction/equilibria
//! consistency at detected Hopf points.

use grnscale::equilibria::{
    continue_along_path, hopf_points_on_path, solve_equilibrium, ParamPath,
};
use grnscale::model::{
    full_vector_field, normalize_parameters, raw_vector_field, ModelParams, RawParams, State4,
};
use grnscale::reduction::trace_asymptotic;
use grnscale::sim::{integrate, FullSystem, IntegratorOptions, OdeSystem};
use nalgebra::DMatrix;

/// The raw (dimensional) system as an integrable object, with a
/// finite-difference Jacobian; it exists only to cross-check the rescaling.
struct RawSystem {
    r: RawParams,
}

impl OdeSystem for RawSystem {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let s = State4::new(y[0], y[1], y[2].max(0.0), y[3].max(0.0));
        let f = raw_vector_field(&s, &self.r).unwrap();
        dy.copy_from_slice(&f);
    }
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let mut fp = [0.0; 4];
        let mut fm = [0.0; 4];
        for c in 0..4 {
            let h = 1e-7 * y[c].abs().max(1.0);
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[c] += h;
            ym[c] = (ym[c] - h).max(0.0);
            self.rhs(&yp, &mut fp);
            self.rhs(&ym, &mut fm);
            for r in 0..4 {
                jac[(r, c)] = (fp[r] - fm[r]) / (yp[c] - ym[c]);
            }
        }
    }
}

#[test]
fn raw_and_rescaled_trajectories_agree() {
    // delta_a = delta_b = 1 keeps the displayed parameter formulas exact.
    let raw = RawParams::new(
        2.0, 3.0, // m_a, m_b
        2.0, 4.0, // gamma_a, gamma_b
        1.5, 2.5, // k_a, k_b
        1.0, 1.0, // delta_a, delta_b
        0.8, 1.2, // theta_a, theta_b
        1e-2, // eps_raw
        10.0, // n
    )
    .unwrap();
    let scaled = normalize_parameters(&raw).unwrap();
    assert!((scaled.gamma - 2.0).abs() < 1e-15);
    assert!((scaled.xi_a - 1.875).abs() < 1e-15);
    assert!((scaled.xi_b - 3.125).abs() < 1e-15);
    assert!((scaled.eps - 5e-3).abs() < 1e-18);
    assert!((scaled.sigma - 0.1).abs() < 1e-16);

    // Matched initial data: raw coordinates are the rescaled ones times
    // (m_a/gamma_a, m_b/gamma_a, theta_a, theta_b); raw time runs
    // gamma_a times slower.
    let y0_scaled = [0.1, 0.2, 0.6, 0.7];
    let y0_raw = [
        raw.m_a / raw.gamma_a * y0_scaled[0],
        raw.m_b / raw.gamma_a * y0_scaled[1],
        raw.theta_a * y0_scaled[2],
        raw.theta_b * y0_scaled[3],
    ];
    let t_scaled = 20.0;
    let t_raw = t_scaled / raw.gamma_a;

    let opts = IntegratorOptions::with_tol(1e-10);
    let sys_scaled = FullSystem::new(&scaled).unwrap();
    let tr_scaled = integrate(&sys_scaled, &y0_scaled, 0.0, t_scaled, &opts, &[]).unwrap();
    let sys_raw = RawSystem { r: raw };
    let tr_raw = integrate(&sys_raw, &y0_raw, 0.0, t_raw, &opts, &[]).unwrap();

    let end_scaled = tr_scaled.last_state();
    let end_raw = tr_raw.last_state();
    let mapped = [
        raw.gamma_a / raw.m_a * end_raw[0],
        raw.gamma_a / raw.m_b * end_raw[1],
        end_raw[2] / raw.theta_a,
        end_raw[3] / raw.theta_b,
    ];
    for k in 0..4 {
        assert!(
            (mapped[k] - end_scaled[k]).abs() < 1e-7,
            "component {k}: {} vs {}",
            mapped[k],
            end_scaled[k]
        );
    }
}

#[test]
fn full_field_vanishes_at_the_solved_equilibrium() {
    let p = ModelParams::new(2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3).unwrap();
    let eq = solve_equilibrium(&p).unwrap();
    let f = full_vector_field(&eq.state, &p).unwrap();
    for v in f {
        assert!(v.abs() <= 1e-12, "rate {v:.3e}");
    }
}

#[test]
fn detected_hopf_is_consistent_with_the_trace_asymptotics() {
    let p = ModelParams::new(2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3).unwrap();
    let mu = p.mu().unwrap();
    let path = ParamPath::circle((1.0, 2.0), 0.5, 720);
    let samples = continue_along_path(&path, &p).unwrap();
    let hopf = hopf_points_on_path(&samples, true, &p).unwrap();
    assert_eq!(hopf.len(), 2);
    let bound = mu.max(p.sigma).powi(2);
    for h in &hopf {
        let ph = p.with_xi(h.xi.0, h.xi.1).unwrap();
        let asym = trace_asymptotic(&ph, p.sigma, mu);
        assert!(
            asym.abs() <= bound,
            "trace asymptotic {asym:.3e} beyond O(max(mu, sigma)^2) = {bound:.3e} at {:?}",
            h.xi
        );
    }
}
