//! Named experiment recipes. Each recipe turns a configuration into one or
//! more result tables; the `reproduce` subcommand maps figure names onto
//! them. Outputs are deterministic: sampled recipes seed their generators
//! explicitly, and grid sweeps keep grid order regardless of scheduling.

use super::config::{ExperimentConfig, GridConfig};
use super::table::{Cell, ResultTable};
use super::{CliError, CliResult};
use crate::charts::{
    blow_down_commutation_error, critical_manifold_eigenvalues, critical_slaving,
    field_pushforward_error, layer_eigenvalue_fd_error, ChartId, ChartPoint,
};
use crate::equilibria::{
    continue_along_path, hopf_points_on_path, solve_equilibrium, trace_hopf_curve,
    HopfCurveOptions, HopfPoint, ParamPath, Stability,
};
use crate::model::{lie_derivative_defect, ModelParams};
use crate::pwl::{
    flow_exact, poincare_corner_coefficient_formula, poincare_derivatives_at_one, poincare_map,
    poincare_second_derivative_formula, PwlState,
};
use crate::reduction::{
    alpha, classify_ray, hamiltonian, mu_hopf, mu_trace_slope, q2_equilibrium,
    slow_manifold_residual_with_order, trace_asymptotic, trace_at_equilibrium, GraphOrder,
    RayClass, ReducedState,
};
use crate::sim::{
    integrate, max_qssr_deviation, simulate_to_attractor, AttractorVerdict, FullSystem,
    IntegratorOptions, ReducedK2System, SystemKind, Trajectory,
};
use crate::util::SplitMix64;
use rayon::prelude::*;

/// All recipe names, in the order `list` prints them.
pub const RECIPES: &[&str] = &[
    "alpha-check",
    "fig3",
    "qssr-nocycle",
    "fig6-circle",
    "fig7-circle",
    "fig7-curve",
    "trace-consistency",
    "muhopf-slope",
    "pwl-poincare",
    "slow-manifold-order",
    "charts-coherence",
    "hamiltonian",
    "nonexistence",
    "fig8",
    "eps-independence",
    "parplane",
    "supercriticality",
];

/// Figure names accepted by `reproduce`, resolved to recipes.
pub fn reproduce_targets(fig: &str) -> Option<Vec<&'static str>> {
    match fig {
        "fig3" => Some(vec!["fig3"]),
        "fig4" => Some(vec!["parplane"]),
        "fig6" => Some(vec!["fig6-circle"]),
        "fig7" => Some(vec!["fig7-circle", "fig7-curve"]),
        "fig8" => Some(vec!["fig8"]),
        _ => None,
    }
}

/// Run one named recipe.
pub fn run_recipe(name: &str, cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let p = cfg.validate()?;
    let mut tables = match name {
        "alpha-check" => alpha_check(cfg, &p),
        "fig3" => fig3(cfg, &p),
        "qssr-nocycle" => qssr_nocycle(cfg),
        "fig6-circle" => circle_recipe(cfg, &p, 5e-5, "fig6"),
        "fig7-circle" => circle_recipe(cfg, &p, 5e-3, "fig7"),
        "fig7-curve" => fig7_curve(cfg, &p),
        "trace-consistency" => trace_consistency(cfg, &p),
        "muhopf-slope" => muhopf_slope(cfg, &p),
        "pwl-poincare" => pwl_poincare(cfg, &p),
        "slow-manifold-order" => slow_manifold_order(cfg, &p),
        "charts-coherence" => charts_coherence(cfg, &p),
        "hamiltonian" => hamiltonian_recipe(cfg, &p),
        "nonexistence" => nonexistence(cfg, &p),
        "fig8" => fig8(cfg, &p),
        "eps-independence" => eps_independence(cfg, &p),
        "parplane" => parplane(cfg),
        "supercriticality" => supercriticality(cfg, &p),
        other => Err(CliError::Validation {
            path: "recipe".into(),
            message: format!("unknown recipe {other:?}; known: {}", RECIPES.join(", ")),
        }),
    }?;
    let hash = cfg.hash();
    for t in &mut tables {
        t.provenance.push(("config".into(), hash.clone()));
    }
    Ok(tables)
}

/// `simulate`: integrate the full system from the configured initial state
/// and classify the attractor.
pub fn simulate_command(cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let p = cfg.validate()?;
    let y0 = cfg
        .initial
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.0, 0.5, 0.5]);
    if y0.len() != 4 {
        return Err(CliError::Validation {
            path: "initial".into(),
            message: "simulate drives the full system; 4 components required".into(),
        });
    }
    // Long enough for a cycle's section returns to converge at the slow
    // time scale; stable runs stop early at the equilibrium event.
    let t_end = cfg.t_end.unwrap_or(150.0 / p.eps.max(1e-8));
    let q = solve_equilibrium(&p).map_err(CliError::Library)?;
    let q_opt = (q.max_re() < 0.0).then(|| q.state.to_array().to_vec());
    let (tr, verdict) =
        simulate_to_attractor(SystemKind::Full, &p, &y0, t_end, cfg.tolerance(), q_opt)
            .map_err(CliError::Library)?;
    let mut traj = ResultTable::new("simulate-trajectory", &["t", "r_a", "r_b", "p_a", "p_b"]);
    push_trajectory(&mut traj, &tr, 4000)?;
    let mut summary = ResultTable::new(
        "simulate-verdict",
        &["eps", "verdict", "period", "amplitude", "terminal-distance"],
    );
    let [v, period, amp, dist] = verdict_cells(&verdict);
    summary.push(vec![p.eps.into(), v, period, amp, dist])?;
    let hash = cfg.hash();
    let mut tables = vec![traj, summary];
    for t in &mut tables {
        t.provenance.push(("config".into(), hash.clone()));
    }
    Ok(tables)
}

/// `equilibrium`: solve the unique equilibrium and report its spectrum.
pub fn equilibrium_command(cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let p = cfg.validate()?;
    let eq = solve_equilibrium(&p).map_err(CliError::Library)?;
    let mut table = ResultTable::new(
        "equilibrium",
        &[
            "r_a", "r_b", "p_a", "p_b", "eig1-re", "eig1-im", "eig2-re", "eig2-im", "eig3-re",
            "eig3-im", "eig4-re", "eig4-im", "stability",
        ],
    );
    let s = eq.state;
    let mut row: Vec<Cell> = vec![s.r_a.into(), s.r_b.into(), s.p_a.into(), s.p_b.into()];
    for l in &eq.eigenvalues {
        row.push(l.re.into());
        row.push(l.im.into());
    }
    row.push(
        match crate::equilibria::stability_of(eq.max_re()) {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
        .into(),
    );
    table.push(row)?;
    Ok(vec![table.with_provenance("config", cfg.hash())])
}

/// `continue`: natural-parameter continuation around the configured circle
/// at the configured `eps`.
pub fn continue_command(cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let p = cfg.validate()?;
    circle_recipe(cfg, &p, p.eps, "continue")
}

/// `hopf-curve`: two-parameter Hopf curve seeded from the configured circle
/// at the configured `eps`.
pub fn hopf_curve_command(cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let p = cfg.validate()?;
    let circle = cfg.circle.clone().unwrap_or(super::config::CircleConfig {
        center: [1.0, 2.0],
        radius: 0.5,
        samples: 720,
    });
    let path = ParamPath::circle(
        (circle.center[0], circle.center[1]),
        circle.radius,
        circle.samples,
    );
    let samples = continue_along_path(&path, &p).map_err(CliError::Library)?;
    let hopf = hopf_points_on_path(&samples, true, &p).map_err(CliError::Library)?;
    let seed = hopf.into_iter().next().ok_or_else(|| {
        CliError::Numeric("no Hopf point on the configured circle at these parameters".into())
    })?;
    let opts = HopfCurveOptions::for_params(&p);
    let curve = trace_hopf_curve(&p, &seed, &opts).map_err(CliError::Library)?;
    let mut table = ResultTable::new("hopf-curve", &["idx", "xi_a", "xi_b", "pair-re", "omega"]);
    for (k, pt) in curve.iter().enumerate() {
        table.push(vec![
            (k as f64).into(),
            pt.xi_a.into(),
            pt.xi_b.into(),
            pt.pair_re.into(),
            pt.omega.into(),
        ])?;
    }
    Ok(vec![table.with_provenance("config", cfg.hash())])
}

fn verdict_cells(verdict: &AttractorVerdict) -> [Cell; 4] {
    match verdict {
        AttractorVerdict::Equilibrium { terminal_distance } => [
            "equilibrium".into(),
            0.0.into(),
            0.0.into(),
            (*terminal_distance).into(),
        ],
        AttractorVerdict::LimitCycle { period, amplitude } => [
            "limit-cycle".into(),
            (*period).into(),
            amplitude.0.max(amplitude.1).into(),
            0.0.into(),
        ],
        AttractorVerdict::Undecided { reason } => {
            [format!("undecided: {reason}").into(), 0.0.into(), 0.0.into(), 0.0.into()]
        }
    }
}

fn push_trajectory(table: &mut ResultTable, tr: &Trajectory, max_rows: usize) -> CliResult<()> {
    let stride = (tr.times.len() / max_rows).max(1);
    for (k, (t, y)) in tr.times.iter().zip(&tr.states).enumerate() {
        if k % stride != 0 && k != tr.times.len() - 1 {
            continue;
        }
        let mut row: Vec<Cell> = vec![(*t).into()];
        row.extend(y.iter().map(|&v| Cell::from(v)));
        table.push(row)?;
    }
    Ok(())
}

fn alpha_check(_cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let mut t = ResultTable::new("alpha", &["gamma", "delta", "alpha", "mu", "sigma", "c", "ray-class"]);
    let c = p.mu().map(|mu| mu / p.sigma);
    let class = match c.map(|c| classify_ray(c, p)) {
        Some(Ok(RayClass::HopfPossible)) => "hopf-possible".to_string(),
        Some(Ok(RayClass::HopfImpossible)) => "hopf-impossible".to_string(),
        Some(Err(e)) => format!("error: {e}"),
        None => "undefined (sigma = 0)".to_string(),
    };
    t.push(vec![
        p.gamma.into(),
        p.delta.into(),
        alpha(p).into(),
        p.mu().unwrap_or(0.0).into(),
        p.sigma.into(),
        c.unwrap_or(0.0).into(),
        class.into(),
    ])?;
    Ok(vec![t])
}

fn fig3(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let y0 = cfg
        .initial
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.0, 0.5, 0.5]);
    let tol = cfg.tolerance();
    let mut verdicts = ResultTable::new(
        "fig3-verdicts",
        &["eps", "verdict", "period", "amplitude", "terminal-distance"],
    );
    let mut tables = Vec::new();
    for (label, eps, t_end) in [("fig3-low-eps", 5e-5, 4e7), ("fig3-high-eps", 5e-3, 3e4)] {
        let pp = p.with_eps(eps).map_err(CliError::Library)?;
        let q = solve_equilibrium(&pp).map_err(CliError::Library)?;
        // Only hand the classifier the equilibrium when it is stable;
        // otherwise the terminal stop would never fire anyway.
        let q_opt = (q.max_re() < 0.0).then(|| q.state.to_array().to_vec());
        let (tr, verdict) = simulate_to_attractor(SystemKind::Full, &pp, &y0, t_end, tol, q_opt)
            .map_err(CliError::Library)?;
        let mut traj = ResultTable::new(label, &["t", "r_a", "r_b", "p_a", "p_b"]);
        push_trajectory(&mut traj, &tr, 2000)?;
        tables.push(traj);
        let [v, period, amp, dist] = verdict_cells(&verdict);
        verdicts.push(vec![eps.into(), v, period, amp, dist])?;
    }
    tables.push(verdicts);
    Ok(tables)
}

fn qssr_nocycle(cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let tol = cfg.tolerance();
    let mut table = ResultTable::new(
        "qssr-nocycle",
        &[
            "draw", "start", "gamma", "delta", "xi_a", "xi_b", "sigma", "verdict",
            "divergence-error",
        ],
    );
    let mut rng = SplitMix64::new(0x515c1e);
    for draw in 0..5 {
        let gamma = rng.in_range(0.5, 4.0);
        let delta = rng.in_range(0.5, 4.0);
        let xi_a = rng.in_range(0.3, 4.0);
        let xi_b = rng.in_range(0.3, 4.0 * gamma);
        let sigma = rng.in_range(0.01, 0.5);
        let p = ModelParams::new(gamma, delta, xi_a, xi_b, sigma, 1e-3).map_err(CliError::Library)?;

        // Divergence of the protein-only field by central differences.
        let mut div_err = 0.0f64;
        for _ in 0..3 {
            let pa = rng.in_range(0.05, 1.5 * xi_a.max(1.0));
            let pb = rng.in_range(0.05, 1.5 * (xi_b / gamma).max(1.0));
            let h = 1e-6;
            let f = |a: f64, b: f64| crate::model::qssr_vector_field(a, b, &p).unwrap();
            let div = (f(pa + h, pb)[0] - f(pa - h, pb)[0]) / (2.0 * h)
                + (f(pa, pb + h)[1] - f(pa, pb - h)[1]) / (2.0 * h);
            div_err = div_err.max((div + 1.0 + delta).abs());
        }

        let t_end = 400.0 / delta.min(1.0);
        for start in 0..20 {
            let y0 = [
                rng.in_range(0.0, 1.5 * xi_a),
                rng.in_range(0.0, 1.5 * xi_b / gamma),
            ];
            let (_, verdict) = simulate_to_attractor(SystemKind::Qssr, &p, &y0, t_end, tol, None)
                .map_err(CliError::Library)?;
            let v = match &verdict {
                AttractorVerdict::Equilibrium { .. } => "equilibrium".to_string(),
                AttractorVerdict::LimitCycle { .. } => "limit-cycle".to_string(),
                AttractorVerdict::Undecided { reason } => format!("undecided: {reason}"),
            };
            table.push(vec![
                (draw as f64).into(),
                (start as f64).into(),
                gamma.into(),
                delta.into(),
                xi_a.into(),
                xi_b.into(),
                sigma.into(),
                v.into(),
                div_err.into(),
            ])?;
        }
    }
    Ok(vec![table])
}

fn circle_recipe(
    cfg: &ExperimentConfig,
    p: &ModelParams,
    eps: f64,
    prefix: &str,
) -> CliResult<Vec<ResultTable>> {
    let circle = cfg.circle.clone().unwrap_or(super::config::CircleConfig {
        center: [1.0, 2.0],
        radius: 0.5,
        samples: 720,
    });
    let pp = p.with_eps(eps).map_err(CliError::Library)?;
    let path = ParamPath::circle((circle.center[0], circle.center[1]), circle.radius, circle.samples);
    let samples = continue_along_path(&path, &pp).map_err(CliError::Library)?;
    let hopf = hopf_points_on_path(&samples, true, &pp).map_err(CliError::Library)?;

    let mut table = ResultTable::new(
        &format!("{prefix}-circle"),
        &[
            "idx", "theta", "xi_a", "xi_b", "r_a", "r_b", "p_a", "p_b", "max-re", "pair-re",
            "pair-im", "stability",
        ],
    );
    for (k, s) in samples.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / circle.samples as f64;
        let (pair_re, pair_im) = s.eq.leading_pair().unwrap_or((0.0, 0.0));
        let stab = match s.stability {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        };
        table.push(vec![
            (k as f64).into(),
            theta.into(),
            s.xi.0.into(),
            s.xi.1.into(),
            s.eq.state.r_a.into(),
            s.eq.state.r_b.into(),
            s.eq.state.p_a.into(),
            s.eq.state.p_b.into(),
            s.eq.max_re().into(),
            pair_re.into(),
            pair_im.into(),
            stab.into(),
        ])?;
    }

    let mut hopf_table = ResultTable::new(
        &format!("{prefix}-hopf"),
        &["idx", "xi_a", "xi_b", "omega", "pair-re"],
    );
    for (k, h) in hopf.iter().enumerate() {
        let (re, _) = h.eq.leading_pair().unwrap_or((0.0, 0.0));
        hopf_table.push(vec![
            (k as f64).into(),
            h.xi.0.into(),
            h.xi.1.into(),
            h.omega.into(),
            re.into(),
        ])?;
    }
    Ok(vec![table, hopf_table])
}

fn first_hopf_on_reference_circle(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<HopfPoint> {
    let circle = cfg.circle.clone().unwrap_or(super::config::CircleConfig {
        center: [1.0, 2.0],
        radius: 0.5,
        samples: 720,
    });
    let pp = p.with_eps(5e-3).map_err(CliError::Library)?;
    let path = ParamPath::circle((circle.center[0], circle.center[1]), circle.radius, circle.samples);
    let samples = continue_along_path(&path, &pp).map_err(CliError::Library)?;
    let hopf = hopf_points_on_path(&samples, true, &pp).map_err(CliError::Library)?;
    hopf.into_iter().next().ok_or_else(|| {
        CliError::Numeric("no Hopf point found on the reference circle".into())
    })
}

fn fig7_curve(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let seed = first_hopf_on_reference_circle(cfg, p)?;
    let pp = p.with_eps(5e-3).map_err(CliError::Library)?;
    let opts = HopfCurveOptions::for_params(&pp);
    let curve = trace_hopf_curve(&pp, &seed, &opts).map_err(CliError::Library)?;
    let mut table = ResultTable::new("fig7-curve", &["idx", "xi_a", "xi_b", "pair-re", "omega"]);
    for (k, pt) in curve.iter().enumerate() {
        table.push(vec![
            (k as f64).into(),
            pt.xi_a.into(),
            pt.xi_b.into(),
            pt.pair_re.into(),
            pt.omega.into(),
        ])?;
    }
    Ok(vec![table])
}

fn trace_consistency(_cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let mut table = ResultTable::new(
        "trace-consistency",
        &["t", "trace", "trace-asymptotic", "abs-diff", "diff-over-t2"],
    );
    for t in [1e-2, 5e-3, 2.5e-3] {
        let tr = trace_at_equilibrium(p, t, t).map_err(CliError::Library)?;
        let asym = trace_asymptotic(p, t, t);
        let diff = (tr - asym).abs();
        table.push(vec![
            t.into(),
            tr.into(),
            asym.into(),
            diff.into(),
            (diff / (2.0 * t * t)).into(),
        ])?;
    }
    Ok(vec![table])
}

fn muhopf_slope(_cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let formula = (1.0 + p.delta) / mu_trace_slope(p);
    let mut table = ResultTable::new(
        "muhopf-slope",
        &["sigma", "mu-hopf", "slope", "slope-formula", "rel-err"],
    );
    for sigma in [1e-4, 2e-4, 5e-4, 1e-3, 5e-3, 1e-2] {
        let mh = mu_hopf(p, sigma).map_err(CliError::Library)?;
        let slope = mh / sigma;
        table.push(vec![
            sigma.into(),
            mh.into(),
            slope.into(),
            formula.into(),
            ((slope - formula).abs() / formula).into(),
        ])?;
    }
    Ok(vec![table])
}

fn pwl_poincare(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let pb0s = cfg.pb0.clone().unwrap_or_else(|| vec![1.1, 1.5, 2.0, 5.0]);
    let mut map_table = ResultTable::new(
        "pwl-poincare",
        &["p_b0", "map-closed-form", "map-exact-flow", "abs-diff"],
    );
    for &pb0 in &pb0s {
        let closed = poincare_map(pb0, p).map_err(CliError::Library)?;
        let tr = flow_exact(
            &PwlState::new(1.0, pb0).map_err(CliError::Library)?,
            p,
            1e6,
        )
        .map_err(CliError::Library)?;
        let from_flow = tr
            .events
            .iter()
            .find(|e| e.on_sigma_a && e.state.p_b > 1.0)
            .map(|e| e.state.p_b)
            .ok_or_else(|| CliError::Numeric(format!("no section return from p_b0 = {pb0}")))?;
        map_table.push(vec![
            pb0.into(),
            closed.into(),
            from_flow.into(),
            (closed - from_flow).abs().into(),
        ])?;
    }
    let (p1, p2) = poincare_derivatives_at_one(p).map_err(CliError::Library)?;
    let mut deriv = ResultTable::new(
        "pwl-derivatives",
        &[
            "p1-numeric",
            "p2-numeric",
            "p2-formula",
            "corner-coefficient-formula",
            "p1-err",
            "p2-rel-err",
        ],
    );
    let p2f = poincare_second_derivative_formula(p);
    deriv.push(vec![
        p1.into(),
        p2.into(),
        p2f.into(),
        poincare_corner_coefficient_formula(p).into(),
        (p1 - 1.0).abs().into(),
        ((p2 - p2f).abs() / p2f.abs()).into(),
    ])?;
    Ok(vec![map_table, deriv])
}

fn slow_manifold_order(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let eta2 = cfg.params.sigma;
    let mut rng = SplitMix64::new(0x510);
    let points: Vec<ReducedState> = (0..20)
        .map(|_| ReducedState::new(rng.in_range(-1.5, 1.5), rng.in_range(-1.5, 1.5)))
        .collect();
    let mut table = ResultTable::new(
        "slow-manifold-order",
        &["mu", "residual-first-order", "residual-zeroth-order"],
    );
    for mu in [1e-2, 3e-3, 1e-3, 3e-4] {
        let r1 = points
            .iter()
            .map(|rs| slow_manifold_residual_with_order(rs, eta2, mu, p, GraphOrder::First))
            .fold(0.0, f64::max);
        let r0 = points
            .iter()
            .map(|rs| slow_manifold_residual_with_order(rs, eta2, mu, p, GraphOrder::Zeroth))
            .fold(0.0, f64::max);
        table.push(vec![mu.into(), r1.into(), r0.into()])?;
    }
    Ok(vec![table])
}

/// Random chart point with sign-symmetric draws for the non-radial
/// coordinates, so that every overlap sector is reachable.
pub fn random_chart_point(chart: ChartId, rng: &mut SplitMix64) -> crate::error::Result<ChartPoint> {
    // Moderate magnitudes keep the finite-difference pushforward oracle well
    // inside its accuracy budget.
    let radial = |rng: &mut SplitMix64, k: usize| {
        if k == 0 {
            rng.in_range(0.0, 0.02)
        } else {
            rng.in_range(0.5, 1.6)
        }
    };
    let mut coords = [0.0; 3];
    let mask = [
        true,
        !matches!(
            chart.family(),
            crate::charts::ChartFamily::Scaling
                | crate::charts::ChartFamily::CylinderB2
                | crate::charts::ChartFamily::CylinderA2
        ),
        !matches!(chart.family(), crate::charts::ChartFamily::Scaling),
    ];
    for k in 0..3 {
        let magnitude = radial(rng, k);
        coords[k] = if mask[k] || rng.next_f64() < 0.5 {
            magnitude
        } else {
            -magnitude
        };
    }
    ChartPoint::new(chart, rng.next_f64(), rng.next_f64(), coords, rng.in_range(0.0, 0.2))
}

fn charts_coherence(_cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let mut pair_table = ResultTable::new(
        "charts-coherence",
        &[
            "from",
            "to",
            "points",
            "max-blow-down-error",
            "max-field-error",
            "max-round-trip-error",
        ],
    );
    let mut rng = SplitMix64::new(0xa71a5);
    for &chart in &ChartId::ALL {
        for &target in chart.neighbors() {
            let mut n_ok = 0usize;
            let mut attempts = 0usize;
            let (mut worst_bd, mut worst_field, mut worst_rt) = (0.0f64, 0.0f64, 0.0f64);
            while n_ok < 100 {
                attempts += 1;
                if attempts > 100_000 {
                    return Err(CliError::Numeric(format!(
                        "no overlap samples found for {chart} -> {target}"
                    )));
                }
                let cp = random_chart_point(chart, &mut rng).map_err(CliError::Library)?;
                let Ok(moved) = crate::charts::change_chart(&cp, target) else {
                    continue;
                };
                n_ok += 1;
                worst_bd = worst_bd.max(
                    blow_down_commutation_error(&cp, target).map_err(CliError::Library)?,
                );
                worst_field = worst_field
                    .max(field_pushforward_error(&cp, target, p).map_err(CliError::Library)?);
                let back = crate::charts::change_chart(&moved, chart).map_err(CliError::Library)?;
                let rt = (0..3)
                    .map(|k| {
                        (back.coords[k] - cp.coords[k]).abs() / cp.coords[k].abs().max(1e-30)
                    })
                    .fold(0.0, f64::max);
                worst_rt = worst_rt.max(rt);
            }
            pair_table.push(vec![
                chart.to_string().into(),
                target.to_string().into(),
                (n_ok as f64).into(),
                worst_bd.into(),
                worst_field.into(),
                worst_rt.into(),
            ])?;
        }
    }

    let mut eig_table = ResultTable::new(
        "charts-eigenvalues",
        &["chart", "eig-1", "eig-2", "fd-error"],
    );
    for &chart in &ChartId::ALL {
        let coords = [0.02, 0.9, 0.7];
        let probe = ChartPoint::new(chart, 0.0, 0.0, coords, 0.0).map_err(CliError::Library)?;
        let (ra, rb) = critical_slaving(&probe, p);
        let on = ChartPoint::new(chart, ra, rb, coords, 0.0).map_err(CliError::Library)?;
        let eig = critical_manifold_eigenvalues(&on, p).map_err(CliError::Library)?;
        let fd = layer_eigenvalue_fd_error(chart, coords, p).map_err(CliError::Library)?;
        eig_table.push(vec![
            chart.to_string().into(),
            eig[0].into(),
            eig[1].into(),
            fd.into(),
        ])?;
    }
    Ok(vec![pair_table, eig_table])
}

fn hamiltonian_recipe(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let q2 = q2_equilibrium(p).map_err(CliError::Library)?;
    let y0 = [q2.u2 + 0.5, q2.v2 + 0.3];
    let sys = ReducedK2System::new(p, 0.0, 0.0);
    let opts = IntegratorOptions::with_tol(cfg.tol.unwrap_or(1e-10));
    let tr = integrate(&sys, &y0, 0.0, 100.0, &opts, &[]).map_err(CliError::Library)?;
    let h0 = hamiltonian(&ReducedState::new(y0[0], y0[1]), p);
    let mut table = ResultTable::new("hamiltonian", &["t", "u2", "v2", "H", "drift"]);
    let stride = (tr.times.len() / 1000).max(1);
    let mut max_drift = 0.0f64;
    for (k, (t, y)) in tr.times.iter().zip(&tr.states).enumerate() {
        let h = hamiltonian(&ReducedState::new(y[0], y[1]), p);
        max_drift = max_drift.max((h - h0).abs());
        if k % stride == 0 || k == tr.times.len() - 1 {
            table.push(vec![
                (*t).into(),
                y[0].into(),
                y[1].into(),
                h.into(),
                (h - h0).abs().into(),
            ])?;
        }
    }
    let mut summary = ResultTable::new("hamiltonian-summary", &["t-end", "tol", "max-drift"]);
    summary.push(vec![
        100.0.into(),
        cfg.tol.unwrap_or(1e-10).into(),
        max_drift.into(),
    ])?;
    Ok(vec![table, summary])
}

fn nonexistence(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let mut defect = ResultTable::new(
        "lie-defect",
        &["sigma", "mu", "defect", "defect-over-mu-delta", "gap-to-quarter"],
    );
    let mu = 1.0;
    for sigma in [1e-2, 1e-3, 1e-4] {
        let pp = ModelParams::with_mu(p.gamma, p.delta, p.xi_a, p.xi_b, sigma, mu)
            .map_err(CliError::Library)?;
        let d = lie_derivative_defect(2.0, &pp).map_err(CliError::Library)?;
        let scaled = d / (mu * p.delta);
        defect.push(vec![
            sigma.into(),
            mu.into(),
            d.into(),
            scaled.into(),
            (scaled - 0.25).abs().into(),
        ])?;
    }
    let mut tables = vec![defect];
    tables.extend(fig8_summary(cfg, p)?);
    Ok(tables)
}

fn fig8_summary(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let y0 = cfg
        .initial
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.0, 0.5, 0.5]);
    let tol = cfg.tolerance();
    let sigma = 2e-3;
    let mut table = ResultTable::new("fig8-deviations", &["eps", "mu", "max-deviation"]);
    for eps in [8e-4, 5e-3, 2e-2] {
        let pp = ModelParams::new(p.gamma, p.delta, p.xi_a, p.xi_b, sigma, eps)
            .map_err(CliError::Library)?;
        let sys = FullSystem::new(&pp).map_err(CliError::Library)?;
        let tr = integrate(
            &sys,
            &y0,
            0.0,
            4.0 / eps,
            &IntegratorOptions::with_tol(tol),
            &[],
        )
        .map_err(CliError::Library)?;
        let dev = max_qssr_deviation(&tr, &pp).map_err(CliError::Library)?;
        table.push(vec![eps.into(), (eps / sigma).into(), dev.into()])?;
    }
    Ok(vec![table])
}

fn fig8(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let y0 = cfg
        .initial
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.0, 0.5, 0.5]);
    let tol = cfg.tolerance();
    let sigma = 2e-3;
    let mut tables = Vec::new();
    for (label, eps) in [
        ("fig8-traj-mu-0p4", 8e-4),
        ("fig8-traj-mu-2p5", 5e-3),
        ("fig8-traj-mu-10", 2e-2),
    ] {
        let pp = ModelParams::new(p.gamma, p.delta, p.xi_a, p.xi_b, sigma, eps)
            .map_err(CliError::Library)?;
        let sys = FullSystem::new(&pp).map_err(CliError::Library)?;
        let tr = integrate(
            &sys,
            &y0,
            0.0,
            4.0 / eps,
            &IntegratorOptions::with_tol(tol),
            &[],
        )
        .map_err(CliError::Library)?;
        let devs = crate::sim::qssr_deviation(&tr, &pp).map_err(CliError::Library)?;
        let mut table = ResultTable::new(
            label,
            &["t", "r_a", "r_b", "p_a", "p_b", "dev-a", "dev-b"],
        );
        let stride = (tr.times.len() / 2000).max(1);
        for (k, ((t, y), (_, da, db))) in tr.times.iter().zip(&tr.states).zip(&devs).enumerate() {
            if k % stride != 0 && k != tr.times.len() - 1 {
                continue;
            }
            table.push(vec![
                (*t).into(),
                y[0].into(),
                y[1].into(),
                y[2].into(),
                y[3].into(),
                (*da).into(),
                (*db).into(),
            ])?;
        }
        tables.push(table);
    }
    tables.extend(fig8_summary(cfg, p)?);
    Ok(tables)
}

fn eps_independence(_cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let mut table = ResultTable::new(
        "eps-independence",
        &["eps", "r_a", "r_b", "p_a", "p_b", "shift-from-first"],
    );
    let mut reference: Option<[f64; 4]> = None;
    for eps in [1e-5, 1e-2] {
        let pp = p.with_eps(eps).map_err(CliError::Library)?;
        let eq = solve_equilibrium(&pp).map_err(CliError::Library)?;
        let arr = eq.state.to_array();
        let shift = reference
            .map(|r| {
                arr.iter()
                    .zip(&r)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .unwrap_or(0.0);
        reference.get_or_insert(arr);
        table.push(vec![
            eps.into(),
            arr[0].into(),
            arr[1].into(),
            arr[2].into(),
            arr[3].into(),
            shift.into(),
        ])?;
    }
    Ok(vec![table])
}

fn classify_parplane_point(sigma: f64, eps: f64, mu0: f64, p: &ModelParams) -> String {
    let mu = eps / sigma;
    if mu >= mu0 {
        return "no-manifold-guarantee".into();
    }
    match classify_ray(mu / sigma, p) {
        Ok(RayClass::HopfPossible) => "hopf-possible".into(),
        Ok(RayClass::HopfImpossible) => "hopf-impossible".into(),
        Err(_) => "boundary".into(),
    }
}

fn parplane(cfg: &ExperimentConfig) -> CliResult<Vec<ResultTable>> {
    let p = cfg.validate()?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let GridConfig {
        sigma_min,
        sigma_max,
        eps_min,
        eps_max,
        n_sigma,
        n_eps,
        mu0,
    } = grid;
    let log_space = |lo: f64, hi: f64, n: usize, k: usize| {
        lo * (hi / lo).powf(k as f64 / (n - 1) as f64)
    };
    let cells: Vec<(usize, usize)> = (0..n_sigma)
        .flat_map(|i| (0..n_eps).map(move |j| (i, j)))
        .collect();
    // Work items run in parallel; output order is grid order by construction.
    let rows: Vec<Vec<Cell>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let sigma = log_space(sigma_min, sigma_max, n_sigma, i);
            let eps = log_space(eps_min, eps_max, n_eps, j);
            let class = classify_parplane_point(sigma, eps, mu0, &p);
            vec![
                (i as f64).into(),
                (j as f64).into(),
                sigma.into(),
                eps.into(),
                (eps / sigma).into(),
                (eps / (sigma * sigma)).into(),
                Cell::Text(class),
            ]
        })
        .collect();
    let mut table = ResultTable::new(
        "parplane",
        &["i", "j", "sigma", "eps", "mu", "c", "class"],
    );
    for row in rows {
        table.push(row)?;
    }
    Ok(vec![table])
}

fn supercriticality(cfg: &ExperimentConfig, p: &ModelParams) -> CliResult<Vec<ResultTable>> {
    let tol = cfg.tolerance();
    let pp = p.with_eps(5e-3).map_err(CliError::Library)?;
    let hopf = first_hopf_on_reference_circle(cfg, p)?;
    let center = (1.0, 2.0);
    let radius = 0.5;
    let theta_h = (hopf.xi.1 - center.1).atan2(hopf.xi.0 - center.0);

    // Which angular side of the Hopf point is unstable.
    let probe = |theta: f64| -> CliResult<f64> {
        let xi = (
            center.0 + radius * theta.cos(),
            center.1 + radius * theta.sin(),
        );
        let pq = pp.with_xi(xi.0, xi.1).map_err(CliError::Library)?;
        Ok(solve_equilibrium(&pq).map_err(CliError::Library)?.max_re())
    };
    let side = if probe(theta_h + 0.05)? > probe(theta_h - 0.05)? {
        1.0
    } else {
        -1.0
    };

    let mut table = ResultTable::new(
        "supercriticality",
        &["offset", "xi_a", "xi_b", "pair-re", "verdict", "amplitude"],
    );
    for offset in [2e-3, 0.25] {
        let theta = theta_h + side * offset;
        let xi = (
            center.0 + radius * theta.cos(),
            center.1 + radius * theta.sin(),
        );
        let pq = pp.with_xi(xi.0, xi.1).map_err(CliError::Library)?;
        let eq = solve_equilibrium(&pq).map_err(CliError::Library)?;
        let y0 = {
            let mut y = eq.state.to_array();
            y[2] += 1e-3;
            y
        };
        // The cycle is born locally around the equilibrium; anchor the
        // section there and integrate long enough for the weak contraction
        // (rate ~ 2 Re lambda) to settle the section returns.
        let t_end = 3e4 + 14.0 / eq.max_re().max(1e-5);
        let (_, verdict) = crate::sim::simulate_to_attractor_with_section(
            SystemKind::Full,
            &pq,
            &y0,
            t_end,
            tol,
            None,
            eq.state.p_b,
        )
        .map_err(CliError::Library)?;
        let (v, amp) = match &verdict {
            AttractorVerdict::LimitCycle { amplitude, .. } => {
                ("limit-cycle".to_string(), amplitude.0.max(amplitude.1))
            }
            AttractorVerdict::Equilibrium { .. } => ("equilibrium".to_string(), 0.0),
            AttractorVerdict::Undecided { reason } => (format!("undecided: {reason}"), 0.0),
        };
        table.push(vec![
            offset.into(),
            xi.0.into(),
            xi.1.into(),
            eq.max_re().into(),
            v.into(),
            amp.into(),
        ])?;
    }
    Ok(vec![table])
}
