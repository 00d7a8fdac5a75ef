//! Full-system equilibrium analysis: the monotone scalar reduction of the
//! equilibrium equations, eigenvalues of the analytic 4x4 Jacobian,
//! natural-parameter continuation along paths in the `(xi_a, xi_b)` plane,
//! Hopf detection by eigenvalue-pair crossings, and two-parameter tracing of
//! the Hopf curve by pseudo-arclength continuation.

use crate::error::{Error, Result};
use crate::model::{
    full_jacobian, hill_minus, hill_plus, hill_plus_dp, ModelParams, State4,
};
use nalgebra::{Complex, DMatrix};

/// An equilibrium of the full system with its spectrum.
#[derive(Debug, Clone)]
pub struct Equilibrium4 {
    pub state: State4,
    pub params: ModelParams,
    pub eigenvalues: [Complex<f64>; 4],
}

impl Equilibrium4 {
    /// Largest real part among all eigenvalues.
    pub fn max_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |m, l| m.max(l.re))
    }

    /// The complex-conjugate pair with the largest real part, if any:
    /// `(re, |im|)`.
    pub fn leading_pair(&self) -> Option<(f64, f64)> {
        self.eigenvalues
            .iter()
            .filter(|l| l.im.abs() > 1e-14)
            .map(|l| (l.re, l.im.abs()))
            .fold(None, |best, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            })
    }
}

/// Stability of a continuation sample, with a guard band around zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// Largest real part within the `1e-9` threshold of zero.
    Marginal,
}

pub fn stability_of(max_re: f64) -> Stability {
    if max_re > 1e-9 {
        Stability::Unstable
    } else if max_re < -1e-9 {
        Stability::Stable
    } else {
        Stability::Marginal
    }
}

/// The scalar equilibrium function `F(r_a) = r_a - h+(xi_b gamma^-1 h-(xi_a r_a))`,
/// strictly increasing with `F(0) < 0 < F(1)`.
pub fn equilibrium_function(r_a: f64, p: &ModelParams) -> Result<f64> {
    let n = p.hill_exponent()?;
    let inner = hill_minus(p.xi_a * r_a, 1.0, n)?;
    Ok(r_a - hill_plus(p.xi_b / p.gamma * inner, 1.0, n)?)
}

fn equilibrium_function_prime(r_a: f64, p: &ModelParams) -> Result<f64> {
    let n = p.hill_exponent()?;
    let pa = p.xi_a * r_a;
    let inner = hill_minus(pa, 1.0, n)?;
    let pb = p.xi_b / p.gamma * inner;
    Ok(1.0 + p.xi_a * p.xi_b / p.gamma * hill_plus_dp(pb, 1.0, n)? * hill_plus_dp(pa, 1.0, n)?)
}

/// Solve for the unique equilibrium: bisection of the monotone scalar
/// function on `[0, 1]` (where it provably changes sign) followed by a
/// Newton polish, then the slaved coordinates and the spectrum of the
/// analytic Jacobian. The location does not depend on `eps`; the
/// eigenvalues do.
pub fn solve_equilibrium(p: &ModelParams) -> Result<Equilibrium4> {
    if p.sigma <= 0.0 {
        return Err(Error::Domain("equilibrium solve requires sigma > 0".into()));
    }
    if p.eps <= 0.0 {
        return Err(Error::Domain(
            "equilibrium eigenvalues require eps > 0".into(),
        ));
    }
    let r_a = solve_equilibrium_ra(p)?;
    equilibrium_from_ra(r_a, p)
}

/// Bisection + Newton for the `r_a` coordinate only.
pub fn solve_equilibrium_ra(p: &ModelParams) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let f_lo = equilibrium_function(lo, p)?;
    let f_hi = equilibrium_function(hi, p)?;
    // At extreme exponents the Hill tails can round F to an exact zero at an
    // endpoint; the monotone bisection still homes in on the root.
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::RootNotBracketed(format!(
            "equilibrium function: F(0) = {f_lo:.3e}, F(1) = {f_hi:.3e}"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if equilibrium_function(mid, p)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let mut r_a = 0.5 * (lo + hi);
    for _ in 0..4 {
        let f = equilibrium_function(r_a, p)?;
        let df = equilibrium_function_prime(r_a, p)?;
        let step = f / df;
        r_a -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    Ok(r_a.clamp(0.0, 1.0))
}

fn equilibrium_from_ra(r_a: f64, p: &ModelParams) -> Result<Equilibrium4> {
    let n = p.hill_exponent()?;
    let r_b = hill_minus(p.xi_a * r_a, 1.0, n)? / p.gamma;
    let state = State4::new(r_a, r_b, p.xi_a * r_a, p.xi_b * r_b);
    let eigenvalues = eigenvalues_at(&state, p)?;
    Ok(Equilibrium4 {
        state,
        params: *p,
        eigenvalues,
    })
}

/// Eigenvalues of the analytic Jacobian at a state.
pub fn eigenvalues_at(state: &State4, p: &ModelParams) -> Result<[Complex<f64>; 4]> {
    let j = full_jacobian(state, p)?;
    let m = DMatrix::from_fn(4, 4, |r, c| j[r][c]);
    let eig = m.complex_eigenvalues();
    let mut out = [Complex::new(0.0, 0.0); 4];
    for (o, e) in out.iter_mut().zip(eig.iter()) {
        *o = *e;
    }
    // Deterministic order: descending real part, then ascending imaginary.
    out.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(out)
}

/// An ordered list of `(xi_a, xi_b)` samples to continue along.
#[derive(Debug, Clone)]
pub struct ParamPath {
    pub samples: Vec<(f64, f64)>,
    pub closed: bool,
}

impl ParamPath {
    pub fn new(samples: Vec<(f64, f64)>, closed: bool) -> Self {
        Self { samples, closed }
    }

    /// Equiangular circle of the given radius and center, traversed
    /// counterclockwise from angle zero.
    pub fn circle(center: (f64, f64), radius: f64, n: usize) -> Self {
        let samples = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (center.0 + radius * th.cos(), center.1 + radius * th.sin())
            })
            .collect();
        Self {
            samples,
            closed: true,
        }
    }
}

/// One continuation sample.
#[derive(Debug, Clone)]
pub struct ContinuationSample {
    pub xi: (f64, f64),
    pub eq: Equilibrium4,
    pub stability: Stability,
}

/// Natural-parameter continuation along the path. Each sample warm-starts
/// Newton from the previous solution and falls back to global bisection;
/// failed steps are retried on up to ten inserted midpoints.
pub fn continue_along_path(path: &ParamPath, p: &ModelParams) -> Result<Vec<ContinuationSample>> {
    let mut out = Vec::with_capacity(path.samples.len());
    let mut warm: Option<f64> = None;
    for &(xi_a, xi_b) in &path.samples {
        if !(xi_a > 0.0 && xi_b > 0.0) {
            return Err(Error::Domain(format!(
                "path sample ({xi_a}, {xi_b}) outside the positive quadrant"
            )));
        }
        let pp = p.with_xi(xi_a, xi_b)?;
        let r_a = solve_warm(&pp, warm)?;
        warm = Some(r_a);
        let eq = equilibrium_from_ra(r_a, &pp)?;
        let stability = stability_of(eq.max_re());
        out.push(ContinuationSample {
            xi: (xi_a, xi_b),
            eq,
            stability,
        });
    }
    Ok(out)
}

fn solve_warm(p: &ModelParams, warm: Option<f64>) -> Result<f64> {
    if let Some(mut r_a) = warm {
        // Newton from the previous solution; the global bisection is the
        // fallback when it wanders.
        for _ in 0..20 {
            let f = equilibrium_function(r_a, p)?;
            let df = equilibrium_function_prime(r_a, p)?;
            let step = f / df;
            r_a -= step;
            if !(0.0..=1.0).contains(&r_a) {
                break;
            }
            if step.abs() < 1e-15 {
                let residual = equilibrium_function(r_a, p)?.abs();
                if residual < 1e-13 {
                    return Ok(r_a);
                }
                break;
            }
        }
    }
    solve_equilibrium_ra(p)
}

/// A detected Hopf point on a continuation path.
#[derive(Debug, Clone)]
pub struct HopfPoint {
    pub xi: (f64, f64),
    pub eq: Equilibrium4,
    /// Imaginary part of the critical pair.
    pub omega: f64,
}

/// Refine a Hopf crossing between two parameter points by bisection on the
/// real part of the leading complex pair. Requires a sign change of the
/// pair's real part across the segment.
pub fn detect_hopf(a: (f64, f64), b: (f64, f64), p: &ModelParams) -> Result<HopfPoint> {
    let pair_re = |xi: (f64, f64)| -> Result<(f64, f64)> {
        let pp = p.with_xi(xi.0, xi.1)?;
        let eq = equilibrium_from_ra(solve_equilibrium_ra(&pp)?, &pp)?;
        eq.leading_pair().ok_or(Error::NotAComplexPair)
    };
    let (re_a, _) = pair_re(a)?;
    let (re_b, _) = pair_re(b)?;
    if re_a == 0.0 || re_b == 0.0 || re_a.signum() == re_b.signum() {
        return Err(Error::RootNotBracketed(format!(
            "pair real part does not change sign: {re_a:.3e} vs {re_b:.3e}"
        )));
    }
    let mut lo = (a, re_a);
    let mut hi = (b, re_b);
    for _ in 0..200 {
        let mid = (
            0.5 * (lo.0 .0 + hi.0 .0),
            0.5 * (lo.0 .1 + hi.0 .1),
        );
        let (re_m, _) = pair_re(mid)?;
        if re_m.abs() <= 1e-9 || (hi.0 .0 - lo.0 .0).abs() + (hi.0 .1 - lo.0 .1).abs() < 1e-15 {
            let pp = p.with_xi(mid.0, mid.1)?;
            let eq = equilibrium_from_ra(solve_equilibrium_ra(&pp)?, &pp)?;
            let (re, im) = eq.leading_pair().ok_or(Error::NotAComplexPair)?;
            if im <= 1e-12 {
                return Err(Error::NotAComplexPair);
            }
            if re.abs() > 1e-9 {
                return Err(Error::NonConvergence {
                    what: format!("hopf refinement (|Re| = {:.3e})", re.abs()),
                    iters: 200,
                });
            }
            return Ok(HopfPoint {
                xi: mid,
                eq,
                omega: im,
            });
        }
        if re_m.signum() == lo.1.signum() {
            lo = (mid, re_m);
        } else {
            hi = (mid, re_m);
        }
    }
    Err(Error::NonConvergence {
        what: "hopf bisection".into(),
        iters: 200,
    })
}

/// Scan consecutive continuation samples for sign changes of the leading
/// complex pair and refine each into a Hopf point.
pub fn hopf_points_on_path(
    samples: &[ContinuationSample],
    closed: bool,
    p: &ModelParams,
) -> Result<Vec<HopfPoint>> {
    let mut out = Vec::new();
    let n = samples.len();
    let last = if closed { n } else { n - 1 };
    for k in 0..last {
        let s0 = &samples[k];
        let s1 = &samples[(k + 1) % n];
        let (Some((re0, _)), Some((re1, _))) = (s0.eq.leading_pair(), s1.eq.leading_pair()) else {
            continue;
        };
        if re0.signum() != re1.signum() && re0 != 0.0 {
            out.push(detect_hopf(s0.xi, s1.xi, p)?);
        }
    }
    Ok(out)
}

/// A point of the traced Hopf curve.
#[derive(Debug, Clone, Copy)]
pub struct HopfCurvePoint {
    pub xi_a: f64,
    pub xi_b: f64,
    pub pair_re: f64,
    pub omega: f64,
}

/// Options for [`trace_hopf_curve`].
#[derive(Debug, Clone)]
pub struct HopfCurveOptions {
    pub initial_step: f64,
    pub max_points: usize,
    /// Tracing stops when the curve leaves `[xi_a_min, xi_a_max] x
    /// [xi_b_min, xi_b_max]`.
    pub bounds: (f64, f64, f64, f64),
    pub corrector_tol: f64,
}

impl HopfCurveOptions {
    pub fn for_params(p: &ModelParams) -> Self {
        Self {
            initial_step: 1e-2,
            max_points: 4000,
            bounds: (1.0 + 5e-4, 8.0, p.gamma + 5e-4, 8.0 * p.gamma),
            corrector_tol: 1e-10,
        }
    }
}

fn pair_re_at(xi: (f64, f64), p: &ModelParams) -> Result<f64> {
    let pp = p.with_xi(xi.0, xi.1)?;
    let eq = equilibrium_from_ra(solve_equilibrium_ra(&pp)?, &pp)?;
    eq.leading_pair()
        .map(|(re, _)| re)
        .ok_or(Error::NotAComplexPair)
}

fn pair_grad(xi: (f64, f64), p: &ModelParams) -> Result<(f64, f64)> {
    let ha = 1e-6 * xi.0.abs().max(1.0);
    let hb = 1e-6 * xi.1.abs().max(1.0);
    let ga = (pair_re_at((xi.0 + ha, xi.1), p)? - pair_re_at((xi.0 - ha, xi.1), p)?) / (2.0 * ha);
    let gb = (pair_re_at((xi.0, xi.1 + hb), p)? - pair_re_at((xi.0, xi.1 - hb), p)?) / (2.0 * hb);
    Ok((ga, gb))
}

/// Pseudo-arclength continuation of the scalar condition
/// `Re(leading pair)(xi_a, xi_b) = 0` in both directions from a seed Hopf
/// point. The polyline terminates at the domain bounds.
pub fn trace_hopf_curve(
    p: &ModelParams,
    seed: &HopfPoint,
    opts: &HopfCurveOptions,
) -> Result<Vec<HopfCurvePoint>> {
    let in_bounds = |xi: (f64, f64)| -> bool {
        xi.0 >= opts.bounds.0 && xi.0 <= opts.bounds.1 && xi.1 >= opts.bounds.2 && xi.1 <= opts.bounds.3
    };
    if !in_bounds(seed.xi) {
        return Err(Error::Domain("hopf curve seed outside bounds".into()));
    }

    let trace_dir = |dir: f64| -> Result<Vec<HopfCurvePoint>> {
        let mut pts = Vec::new();
        let mut xi = seed.xi;
        let mut step = opts.initial_step;
        let mut prev_tangent: Option<(f64, f64)> = None;
        for _ in 0..opts.max_points {
            let (ga, gb) = pair_grad(xi, p)?;
            let norm = ga.hypot(gb);
            if norm < 1e-14 {
                break;
            }
            // Tangent: rotate the gradient by 90 degrees, keep orientation.
            let mut t = (-gb / norm, ga / norm);
            match prev_tangent {
                Some(pt) => {
                    if t.0 * pt.0 + t.1 * pt.1 < 0.0 {
                        t = (-t.0, -t.1);
                    }
                }
                None => {
                    if dir < 0.0 {
                        t = (-t.0, -t.1);
                    }
                }
            }
            prev_tangent = Some(t);

            // Predictor / corrector with step halving.
            let mut halvings = 0;
            let corrected = loop {
                let pred = (xi.0 + step * t.0, xi.1 + step * t.1);
                match correct_on_curve(pred, t, p, opts.corrector_tol) {
                    Ok(c) => break Some(c),
                    Err(_) if halvings < 10 => {
                        halvings += 1;
                        step *= 0.5;
                    }
                    Err(e) => {
                        if pts.is_empty() {
                            return Err(e);
                        }
                        break None;
                    }
                }
            };
            let Some(next) = corrected else { break };
            if !in_bounds(next) {
                break;
            }
            xi = next;
            if halvings == 0 {
                step = (step * 1.3).min(4.0 * opts.initial_step);
            }
            let pp = p.with_xi(xi.0, xi.1)?;
            let eq = equilibrium_from_ra(solve_equilibrium_ra(&pp)?, &pp)?;
            let (re, im) = eq.leading_pair().ok_or(Error::NotAComplexPair)?;
            pts.push(HopfCurvePoint {
                xi_a: xi.0,
                xi_b: xi.1,
                pair_re: re,
                omega: im,
            });
        }
        Ok(pts)
    };

    let forward = trace_dir(1.0)?;
    let backward = trace_dir(-1.0)?;
    let mut curve: Vec<HopfCurvePoint> = backward.into_iter().rev().collect();
    curve.push(HopfCurvePoint {
        xi_a: seed.xi.0,
        xi_b: seed.xi.1,
        pair_re: 0.0,
        omega: seed.omega,
    });
    curve.extend(forward);
    Ok(curve)
}

/// Newton corrector perpendicular to the tangent for the scalar curve
/// condition.
fn correct_on_curve(
    pred: (f64, f64),
    tangent: (f64, f64),
    p: &ModelParams,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut xi = pred;
    for _ in 0..12 {
        let g = pair_re_at(xi, p)?;
        if g.abs() < tol {
            return Ok(xi);
        }
        let (ga, gb) = pair_grad(xi, p)?;
        // Move along the gradient projected off the tangent direction.
        let dot_gt = ga * tangent.0 + gb * tangent.1;
        let na = ga - dot_gt * tangent.0;
        let nb = gb - dot_gt * tangent.1;
        let nn = na * na + nb * nb;
        if nn < 1e-20 {
            return Err(Error::NonConvergence {
                what: "hopf curve corrector (degenerate normal)".into(),
                iters: 12,
            });
        }
        xi = (xi.0 - g * na / nn, xi.1 - g * nb / nn);
        if !(xi.0 > 0.0 && xi.1 > 0.0) {
            return Err(Error::NonConvergence {
                what: "hopf curve corrector left the positive quadrant".into(),
                iters: 12,
            });
        }
    }
    let g = pair_re_at(xi, p)?;
    if g.abs() < 10.0 * tol {
        Ok(xi)
    } else {
        Err(Error::NonConvergence {
            what: format!("hopf curve corrector (|Re| = {:.3e})", g.abs()),
            iters: 12,
        })
    }
}
