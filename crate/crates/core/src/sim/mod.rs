//! Stiff integration of the model systems, Poincare-section bookkeeping,
//! attractor classification and quasi-steady-state deviation measurement.

pub mod rosenbrock;

pub use rosenbrock::{integrate, IntegratorOptions};

use crate::error::{Error, Result};
use crate::model::{
    self, full_jacobian, full_vector_field, phi, phi_prime, qssr_jacobian, qssr_vector_field,
    ModelParams, State4,
};
use crate::reduction::{reduced_field, reduced_field_jacobian, ReducedState};
use nalgebra::DMatrix;

/// An autonomous ODE system with an analytic Jacobian.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>);

    /// Infinity norm of the right-hand side, used as an equilibrium residual.
    fn residual(&self, y: &[f64]) -> f64 {
        let mut dy = vec![0.0; self.dim()];
        self.rhs(y, &mut dy);
        dy.iter().fold(0.0, |m, v| v.abs().max(m))
    }
}

/// Crossing direction an event fires on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDirection {
    Up,
    Down,
    Any,
}

/// Scalar function of the state whose zero crossings are events.
pub type EventFn = Box<dyn Fn(&[f64]) -> f64>;

/// An event function watched during integration.
pub struct EventSpec {
    pub name: String,
    pub g: EventFn,
    pub direction: EventDirection,
    pub terminal: bool,
}

impl EventSpec {
    /// Section `{ y[index] = level }` crossed in the given direction.
    pub fn section(name: &str, index: usize, level: f64, direction: EventDirection) -> Self {
        Self {
            name: name.into(),
            g: Box::new(move |y: &[f64]| y[index] - level),
            direction,
            terminal: false,
        }
    }
}

/// A localized event occurrence.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub event: usize,
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub max_err_ratio: f64,
}

/// Time-stamped state samples with event annotations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<EventRecord>,
    pub stats: IntegratorStats,
    /// Index of the terminal event that stopped the run, if any.
    pub terminated_by: Option<usize>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: Vec::new(),
            events: Vec::new(),
            stats: IntegratorStats::default(),
            terminated_by: None,
        }
    }

    fn push_sample(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.states.push(y.to_vec());
    }

    fn push_event(&mut self, event: usize, t: f64, y: &[f64]) {
        self.events.push(EventRecord {
            event,
            t,
            state: y.to_vec(),
        });
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has samples")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }
}

/// The full 4D system `(r_a, r_b, p_a, p_b)`.
pub struct FullSystem {
    p: ModelParams,
}

impl FullSystem {
    pub fn new(p: &ModelParams) -> Result<Self> {
        if p.sigma <= 0.0 {
            return Err(Error::Domain("full system requires sigma > 0".into()));
        }
        Ok(Self { p: *p })
    }
}

impl OdeSystem for FullSystem {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let s = State4::new(y[0], y[1], y[2].max(0.0), y[3].max(0.0));
        let f = full_vector_field(&s, &self.p).expect("sigma > 0 checked at construction");
        dy.copy_from_slice(&f);
    }
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let s = State4::new(y[0], y[1], y[2].max(0.0), y[3].max(0.0));
        let j = full_jacobian(&s, &self.p).expect("sigma > 0 checked at construction");
        for r in 0..4 {
            for c in 0..4 {
                jac[(r, c)] = j[r][c];
            }
        }
    }
}

/// The protein-only quasi-steady-state system `(p_a, p_b)` in slow time.
pub struct QssrSystem {
    p: ModelParams,
}

impl QssrSystem {
    pub fn new(p: &ModelParams) -> Result<Self> {
        if p.sigma <= 0.0 {
            return Err(Error::Domain("qssr system requires sigma > 0".into()));
        }
        Ok(Self { p: *p })
    }
}

impl OdeSystem for QssrSystem {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let f = qssr_vector_field(y[0].max(0.0), y[1].max(0.0), &self.p)
            .expect("sigma > 0 checked at construction");
        dy.copy_from_slice(&f);
    }
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let j = qssr_jacobian(y[0].max(0.0), y[1].max(0.0), &self.p)
            .expect("sigma > 0 checked at construction");
        for r in 0..2 {
            for c in 0..2 {
                jac[(r, c)] = j[r][c];
            }
        }
    }
}

/// The truncated reduced planar system `(u2, v2)` of the scaling chart.
pub struct ReducedK2System {
    p: ModelParams,
    sigma: f64,
    mu: f64,
}

impl ReducedK2System {
    pub fn new(p: &ModelParams, sigma: f64, mu: f64) -> Self {
        Self { p: *p, sigma, mu }
    }
}

impl OdeSystem for ReducedK2System {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let f = reduced_field(&ReducedState::new(y[0], y[1]), self.sigma, self.mu, &self.p);
        dy.copy_from_slice(&f);
    }
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let j =
            reduced_field_jacobian(&ReducedState::new(y[0], y[1]), self.sigma, self.mu, &self.p);
        for r in 0..2 {
            for c in 0..2 {
                jac[(r, c)] = j[r][c];
            }
        }
    }
}

/// Logistic smoothing of the piecewise-linear protein system: each indicator
/// is replaced by a sigmoid of width `sigma` in the protein coordinate.
pub struct PwlSmoothedSystem {
    p: ModelParams,
}

impl PwlSmoothedSystem {
    pub fn new(p: &ModelParams) -> Result<Self> {
        if p.sigma <= 0.0 {
            return Err(Error::Domain(
                "smoothed pwl system requires sigma > 0".into(),
            ));
        }
        Ok(Self { p: *p })
    }
}

impl OdeSystem for PwlSmoothedSystem {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let p = &self.p;
        let ind_b = phi((y[1] - 1.0) / p.sigma);
        let ind_a = 1.0 - phi((y[0] - 1.0) / p.sigma);
        dy[0] = p.xi_a * ind_b - y[0];
        dy[1] = p.delta * (p.xi_b / p.gamma * ind_a - y[1]);
    }
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let p = &self.p;
        jac[(0, 0)] = -1.0;
        jac[(0, 1)] = p.xi_a * phi_prime((y[1] - 1.0) / p.sigma) / p.sigma;
        jac[(1, 0)] = -p.delta * p.xi_b / p.gamma * phi_prime((y[0] - 1.0) / p.sigma) / p.sigma;
        jac[(1, 1)] = -p.delta;
    }
}

/// Which model system to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Full,
    Qssr,
    ReducedK2,
    PwlSmoothed,
}

/// Instantiate the chosen system. For `ReducedK2` the `(sigma, mu)` pair is
/// taken from the parameters (`mu = eps / sigma`).
pub fn make_system(kind: SystemKind, p: &ModelParams) -> Result<Box<dyn OdeSystem>> {
    Ok(match kind {
        SystemKind::Full => Box::new(FullSystem::new(p)?),
        SystemKind::Qssr => Box::new(QssrSystem::new(p)?),
        SystemKind::ReducedK2 => {
            let mu = p
                .mu()
                .ok_or_else(|| Error::Domain("reduced system needs sigma > 0 to derive mu".into()))?;
            Box::new(ReducedK2System::new(p, p.sigma, mu))
        }
        SystemKind::PwlSmoothed => Box::new(PwlSmoothedSystem::new(p)?),
    })
}

/// Long-time verdict for a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum AttractorVerdict {
    Equilibrium { terminal_distance: f64 },
    LimitCycle { period: f64, amplitude: (f64, f64) },
    Undecided { reason: String },
}

/// Options for [`classify_attractor`].
pub struct ClassifyOptions {
    /// Index of the section event in the trajectory's event list.
    pub section_event: usize,
    /// State indices of `(p_a, p_b)` for the amplitude measurement.
    pub proj: (usize, usize),
    /// Known equilibrium location, if available.
    pub equilibrium: Option<Vec<f64>>,
    pub equilibrium_tol: f64,
    pub returns_tol: f64,
    pub amplitude_tol: f64,
    pub min_returns: usize,
}

impl ClassifyOptions {
    pub fn full_system(equilibrium: Option<[f64; 4]>) -> Self {
        Self {
            section_event: 0,
            proj: (2, 3),
            equilibrium: equilibrium.map(|q| q.to_vec()),
            equilibrium_tol: 1e-6,
            returns_tol: 1e-7,
            amplitude_tol: 1e-3,
            min_returns: 50,
        }
    }

    pub fn planar(equilibrium: Option<[f64; 2]>) -> Self {
        Self {
            section_event: 0,
            proj: (0, 1),
            equilibrium: equilibrium.map(|q| q.to_vec()),
            equilibrium_tol: 1e-6,
            returns_tol: 1e-7,
            amplitude_tol: 1e-3,
            min_returns: 50,
        }
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| (x - y).abs().max(m))
}

/// Classify the long-time behaviour of a trajectory. A limit-cycle verdict
/// requires converged section returns and an amplitude above threshold; an
/// equilibrium verdict requires proximity to the known equilibrium, a small
/// terminal field residual, or converged returns with negligible amplitude.
pub fn classify_attractor(
    tr: &Trajectory,
    sys: &dyn OdeSystem,
    opts: &ClassifyOptions,
) -> AttractorVerdict {
    let terminal = tr.last_state();
    let terminal_distance = opts
        .equilibrium
        .as_ref()
        .map(|q| inf_dist(terminal, q))
        .unwrap_or(f64::INFINITY);

    if terminal_distance <= opts.equilibrium_tol {
        return AttractorVerdict::Equilibrium { terminal_distance };
    }
    let residual = sys.residual(terminal);
    if residual <= 1e-9 {
        return AttractorVerdict::Equilibrium {
            terminal_distance: if terminal_distance.is_finite() {
                terminal_distance
            } else {
                residual
            },
        };
    }

    let crossings: Vec<&EventRecord> = tr
        .events
        .iter()
        .filter(|e| e.event == opts.section_event)
        .collect();
    if crossings.len() >= 3 {
        let k = crossings.len();
        let d1 = inf_dist(&crossings[k - 1].state, &crossings[k - 2].state);
        let d2 = inf_dist(&crossings[k - 2].state, &crossings[k - 3].state);
        if d1 <= opts.returns_tol && d2 <= opts.returns_tol {
            // Amplitude over the final return-to-return window.
            let (t_lo, t_hi) = (crossings[k - 2].t, crossings[k - 1].t);
            let (mut pa_min, mut pa_max) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut pb_min, mut pb_max) = (f64::INFINITY, f64::NEG_INFINITY);
            for (t, y) in tr.times.iter().zip(&tr.states) {
                if *t >= t_lo && *t <= t_hi {
                    pa_min = pa_min.min(y[opts.proj.0]);
                    pa_max = pa_max.max(y[opts.proj.0]);
                    pb_min = pb_min.min(y[opts.proj.1]);
                    pb_max = pb_max.max(y[opts.proj.1]);
                }
            }
            let amplitude = ((pa_max - pa_min).max(0.0), (pb_max - pb_min).max(0.0));
            if amplitude.0.max(amplitude.1) > opts.amplitude_tol {
                return AttractorVerdict::LimitCycle {
                    period: t_hi - t_lo,
                    amplitude,
                };
            }
            return AttractorVerdict::Equilibrium { terminal_distance };
        }
        if crossings.len() >= opts.min_returns {
            return AttractorVerdict::Undecided {
                reason: format!(
                    "{} section returns without convergence (last gap {d1:.3e})",
                    crossings.len()
                ),
            };
        }
    }
    AttractorVerdict::Undecided {
        reason: format!(
            "only {} section returns and terminal residual {residual:.3e}",
            crossings.len()
        ),
    }
}

/// Integrate the given system with the standard cycle-detection section
/// `{p_b = 1, p_b' > 0}` and (when an equilibrium is supplied) a terminal
/// stop once the state is within `1e-7` of it.
pub fn simulate_to_attractor(
    kind: SystemKind,
    p: &ModelParams,
    y0: &[f64],
    t_end: f64,
    tol: f64,
    equilibrium: Option<Vec<f64>>,
) -> Result<(Trajectory, AttractorVerdict)> {
    simulate_to_attractor_with_section(kind, p, y0, t_end, tol, equilibrium, 1.0)
}

/// As [`simulate_to_attractor`] with the section placed at
/// `{p_b = section_level, p_b' > 0}`. Small cycles born near a Hopf point
/// oscillate locally around the equilibrium's `p_b` and need the section
/// anchored there.
pub fn simulate_to_attractor_with_section(
    kind: SystemKind,
    p: &ModelParams,
    y0: &[f64],
    t_end: f64,
    tol: f64,
    equilibrium: Option<Vec<f64>>,
    section_level: f64,
) -> Result<(Trajectory, AttractorVerdict)> {
    let sys = make_system(kind, p)?;
    let pb_index = match kind {
        SystemKind::Full => 3,
        _ => 1,
    };
    let mut events = vec![EventSpec::section(
        "section-pb",
        pb_index,
        section_level,
        EventDirection::Up,
    )];
    if let Some(q) = equilibrium.clone() {
        events.push(EventSpec {
            name: "near-equilibrium".into(),
            g: Box::new(move |y: &[f64]| 1e-7 - inf_dist(y, &q)),
            direction: EventDirection::Up,
            terminal: true,
        });
    }
    let opts = IntegratorOptions::with_tol(tol);
    let tr = integrate(sys.as_ref(), y0, 0.0, t_end, &opts, &events)?;
    let copts = match kind {
        SystemKind::Full => ClassifyOptions {
            equilibrium: equilibrium.clone(),
            ..ClassifyOptions::full_system(None)
        },
        _ => ClassifyOptions {
            equilibrium: equilibrium.clone(),
            ..ClassifyOptions::planar(None)
        },
    };
    let verdict = classify_attractor(&tr, sys.as_ref(), &copts);
    Ok((tr, verdict))
}

/// Pointwise distance of a full-system trajectory from the quasi-steady-state
/// graph: `(t, |r_a - h+(p_b)|, |r_b - gamma^-1 h-(p_a)|)`.
pub fn qssr_deviation(tr: &Trajectory, p: &ModelParams) -> Result<Vec<(f64, f64, f64)>> {
    if tr.dim != 4 {
        return Err(Error::Domain(
            "qssr deviation is defined for full-system trajectories".into(),
        ));
    }
    let n = p.hill_exponent()?;
    let mut out = Vec::with_capacity(tr.times.len());
    for (t, y) in tr.times.iter().zip(&tr.states) {
        let slaved_a = model::hill_plus(y[3].max(0.0), 1.0, n)?;
        let slaved_b = model::hill_minus(y[2].max(0.0), 1.0, n)? / p.gamma;
        out.push((*t, (y[0] - slaved_a).abs(), (y[1] - slaved_b).abs()));
    }
    Ok(out)
}

/// Largest deviation from the quasi-steady-state graph after the transient
/// cutoff `t >= 5 / min(1, gamma)`.
pub fn max_qssr_deviation(tr: &Trajectory, p: &ModelParams) -> Result<f64> {
    let cutoff = 5.0 / p.gamma.min(1.0);
    Ok(qssr_deviation(tr, p)?
        .iter()
        .filter(|(t, _, _)| *t >= cutoff)
        .fold(0.0, |m, (_, da, db)| m.max(*da).max(*db)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria;

    fn paper(eps: f64) -> ModelParams {
        ModelParams::new(2.0, 3.0, 1.3536, 2.3536, 1e-2, eps).unwrap()
    }

    #[test]
    fn synthetic_damped_spiral_classifies_as_equilibrium() {
        // Spiral onto (1.5, 1.2), crossing p_b = 1 early on.
        struct Spiral;
        impl OdeSystem for Spiral {
            fn dim(&self) -> usize {
                2
            }
            fn rhs(&self, y: &[f64], dy: &mut [f64]) {
                let (x, z) = (y[0] - 1.5, y[1] - 1.2);
                dy[0] = -0.2 * x - z;
                dy[1] = x - 0.2 * z;
            }
            fn jacobian(&self, _y: &[f64], jac: &mut DMatrix<f64>) {
                jac[(0, 0)] = -0.2;
                jac[(0, 1)] = -1.0;
                jac[(1, 0)] = 1.0;
                jac[(1, 1)] = -0.2;
            }
        }
        let events = vec![EventSpec::section("section-pb", 1, 1.0, EventDirection::Up)];
        let tr = integrate(
            &Spiral,
            &[0.3, 0.1],
            0.0,
            150.0,
            &IntegratorOptions::with_tol(1e-10),
            &events,
        )
        .unwrap();
        let verdict = classify_attractor(&tr, &Spiral, &ClassifyOptions::planar(None));
        assert!(
            matches!(verdict, AttractorVerdict::Equilibrium { .. }),
            "{verdict:?}"
        );
    }

    #[test]
    fn synthetic_cycle_classifies_with_period() {
        // Attracting circular cycle of radius 0.5 around (1, 1): period
        // 2 pi, amplitude 1 in each coordinate.
        struct Hopf;
        impl OdeSystem for Hopf {
            fn dim(&self) -> usize {
                2
            }
            fn rhs(&self, y: &[f64], dy: &mut [f64]) {
                let (x, z) = (y[0] - 1.0, y[1] - 1.0);
                let a = 0.25 - (x * x + z * z);
                dy[0] = a * x - z;
                dy[1] = x + a * z;
            }
            fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
                let (x, z) = (y[0] - 1.0, y[1] - 1.0);
                let r2 = x * x + z * z;
                jac[(0, 0)] = 0.25 - r2 - 2.0 * x * x;
                jac[(0, 1)] = -1.0 - 2.0 * x * z;
                jac[(1, 0)] = 1.0 - 2.0 * x * z;
                jac[(1, 1)] = 0.25 - r2 - 2.0 * z * z;
            }
        }
        let events = vec![EventSpec::section("section-pb", 1, 1.0, EventDirection::Up)];
        let tr = integrate(
            &Hopf,
            &[1.4, 1.0],
            0.0,
            400.0,
            &IntegratorOptions::with_tol(1e-10),
            &events,
        )
        .unwrap();
        let verdict = classify_attractor(&tr, &Hopf, &ClassifyOptions::planar(None));
        match verdict {
            AttractorVerdict::LimitCycle { period, amplitude } => {
                assert!(
                    (period - 2.0 * std::f64::consts::PI).abs() < 0.06,
                    "{period}"
                );
                assert!((amplitude.0 - 1.0).abs() < 0.01);
                assert!((amplitude.1 - 1.0).abs() < 0.01);
            }
            other => panic!("expected limit cycle, got {other:?}"),
        }
    }

    #[test]
    fn full_system_dichotomy_in_eps() {
        // Small eps: steady state. Larger eps: limit cycle.
        let y0 = [0.0, 0.0, 0.5, 0.5];

        let p_small = paper(5e-5);
        let q = equilibria::solve_equilibrium(&p_small).unwrap();
        let (_, verdict) = simulate_to_attractor(
            SystemKind::Full,
            &p_small,
            &y0,
            4e7,
            1e-9,
            Some(q.state.to_array().to_vec()),
        )
        .unwrap();
        assert!(
            matches!(verdict, AttractorVerdict::Equilibrium { terminal_distance } if terminal_distance <= 1e-6),
            "{verdict:?}"
        );

        let p_large = paper(5e-3);
        let (_, verdict) =
            simulate_to_attractor(SystemKind::Full, &p_large, &y0, 3e4, 1e-9, None).unwrap();
        assert!(
            matches!(verdict, AttractorVerdict::LimitCycle { .. }),
            "{verdict:?}"
        );
    }

    #[test]
    fn qssr_never_cycles() {
        let p = paper(5e-3);
        let (_, verdict) =
            simulate_to_attractor(SystemKind::Qssr, &p, &[0.5, 0.5], 400.0, 1e-9, None).unwrap();
        assert!(
            matches!(verdict, AttractorVerdict::Equilibrium { .. }),
            "{verdict:?}"
        );
    }

    #[test]
    fn deviation_ordering_in_mu() {
        // sigma = 2e-3 with eps in {8e-4, 5e-3, 2e-2}: post-transient
        // deviation from the slaved graph increases with mu.
        let y0 = [0.0, 0.0, 0.5, 0.5];
        let mut devs = Vec::new();
        for eps in [8e-4, 5e-3, 2e-2] {
            let p = ModelParams::new(2.0, 3.0, 1.3536, 2.3536, 2e-3, eps).unwrap();
            let sys = FullSystem::new(&p).unwrap();
            let tr = integrate(
                &sys,
                &y0,
                0.0,
                4.0 / eps,
                &IntegratorOptions::with_tol(1e-9),
                &[],
            )
            .unwrap();
            devs.push(max_qssr_deviation(&tr, &p).unwrap());
        }
        assert!(
            devs[0] < devs[1] && devs[1] < devs[2],
            "deviations not ordered: {devs:?}"
        );
    }

    #[test]
    fn deviation_shrinks_linearly_in_mu() {
        let y0 = [0.0, 0.0, 0.5, 0.5];
        let mut devs = Vec::new();
        for mu in [0.2, 0.1] {
            let p = ModelParams::with_mu(2.0, 3.0, 1.3536, 2.3536, 2e-3, mu).unwrap();
            let sys = FullSystem::new(&p).unwrap();
            let tr = integrate(
                &sys,
                &y0,
                0.0,
                4.0 / p.eps,
                &IntegratorOptions::with_tol(1e-9),
                &[],
            )
            .unwrap();
            devs.push(max_qssr_deviation(&tr, &p).unwrap());
        }
        let ratio = devs[0] / devs[1];
        assert!(ratio > 1.4 && ratio < 2.9, "ratio {ratio}, devs {devs:?}");
    }

    #[test]
    fn deviation_peaks_near_the_switching_line() {
        // At mu = 2.5 the largest graph deviation sits where p_b crosses 1.
        let sigma = 2e-3;
        let p = ModelParams::new(2.0, 3.0, 1.3536, 2.3536, sigma, 5e-3).unwrap();
        let sys = FullSystem::new(&p).unwrap();
        let tr = integrate(
            &sys,
            &[0.0, 0.0, 0.5, 0.5],
            0.0,
            4.0 / p.eps,
            &IntegratorOptions::with_tol(1e-9),
            &[],
        )
        .unwrap();
        let cutoff = 5.0;
        let devs = qssr_deviation(&tr, &p).unwrap();
        let mut best = (0.0f64, 0.0f64);
        for ((t, da, _), y) in devs.iter().zip(&tr.states) {
            if *t >= cutoff && *da > best.0 {
                best = (*da, y[3]);
            }
        }
        let window = 10.0 * sigma * sigma.ln().abs();
        assert!(
            (best.1 - 1.0).abs() < window,
            "argmax of the deviation at p_b = {} (window {window})",
            best.1
        );
    }

    #[test]
    fn positive_octant_is_forward_invariant() {
        let p = paper(5e-3);
        let sys = FullSystem::new(&p).unwrap();
        let tol = 1e-9;
        for y0 in [
            [0.0, 0.0, 0.5, 0.5],
            [0.0, 0.0, 0.0, 0.0],
            [1.0, 0.5, 2.0, 0.1],
        ] {
            let tr =
                integrate(&sys, &y0, 0.0, 2e3, &IntegratorOptions::with_tol(tol), &[]).unwrap();
            for y in &tr.states {
                for &v in y {
                    assert!(v >= -10.0 * tol, "component {v} left the octant");
                }
            }
        }
    }
}
