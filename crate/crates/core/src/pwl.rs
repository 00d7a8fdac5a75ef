//! The switching-limit protein-only system: a piecewise-linear field defined
//! by the indicators `[p_b > 1]` and `[p_a < 1]`, exact event-driven flow
//! built from the region-wise exponential solutions, region equilibria and
//! their boundary collisions, and the closed-form first-return map on
//! `{p_a = 1, p_b > 1}` together with its derivatives at the corner.
//!
//! Crossings of the switching lines are always transversal here: the normal
//! rate does not depend on the indicator that switches, so sliding cannot
//! occur and the flow is defined by concatenating region solutions.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Snap distance to the switching lines.
const SIGMA_SNAP: f64 = 1e-13;

/// Capture radius around the degenerate corner `(1, 1)`. When every
/// equilibrium is virtual the orbit spirals into the corner with laps that
/// contract only quadratically (the return map behaves like
/// `g -> g - |c| g^2` in the gap `g = p_b - 1`), so the event count to reach
/// a gap `g` grows like `1/g`; orbits are declared captured at this radius.
const CORNER_CAPTURE: f64 = 1e-4;

/// Open quadrant of the `(p_a, p_b)` plane relative to the switching lines
/// `p_a = 1` and `p_b = 1`. Named by the sign pattern
/// `(sign(p_a - 1), sign(p_b - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `p_a > 1, p_b > 1`
    PlusPlus,
    /// `p_a > 1, p_b < 1`
    PlusMinus,
    /// `p_a < 1, p_b < 1`
    MinusMinus,
    /// `p_a < 1, p_b > 1`
    MinusPlus,
}

impl Region {
    pub const ALL: [Region; 4] = [
        Region::PlusPlus,
        Region::PlusMinus,
        Region::MinusMinus,
        Region::MinusPlus,
    ];

    fn indicators(self) -> (f64, f64) {
        // ([p_b > 1], [p_a < 1])
        match self {
            Region::PlusPlus => (1.0, 0.0),
            Region::PlusMinus => (0.0, 0.0),
            Region::MinusMinus => (0.0, 1.0),
            Region::MinusPlus => (1.0, 1.0),
        }
    }
}

/// Where a point sits relative to the switching set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Interior(Region),
    /// On `{p_a = 1}` away from the corner.
    OnSigmaA,
    /// On `{p_b = 1}` away from the corner.
    OnSigmaB,
    /// The degenerate corner `(1, 1)`.
    Corner,
}

/// A protein-plane state for the piecewise-linear system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwlState {
    pub p_a: f64,
    pub p_b: f64,
}

impl PwlState {
    pub fn new(p_a: f64, p_b: f64) -> Result<Self> {
        if !(p_a.is_finite() && p_b.is_finite() && p_a >= 0.0 && p_b >= 0.0) {
            return Err(Error::Domain(format!(
                "pwl state must be finite and nonnegative, got ({p_a}, {p_b})"
            )));
        }
        Ok(Self { p_a, p_b })
    }

    /// Classify against the switching lines, snapping within `1e-13`.
    pub fn location(&self) -> Location {
        let on_a = (self.p_a - 1.0).abs() <= SIGMA_SNAP;
        let on_b = (self.p_b - 1.0).abs() <= SIGMA_SNAP;
        match (on_a, on_b) {
            (true, true) => Location::Corner,
            (true, false) => Location::OnSigmaA,
            (false, true) => Location::OnSigmaB,
            (false, false) => {
                let region = match (self.p_a > 1.0, self.p_b > 1.0) {
                    (true, true) => Region::PlusPlus,
                    (true, false) => Region::PlusMinus,
                    (false, false) => Region::MinusMinus,
                    (false, true) => Region::MinusPlus,
                };
                Location::Interior(region)
            }
        }
    }
}

/// Field of one region: `p_a' = xi_a [p_b > 1] - p_a`,
/// `p_b' = delta (xi_b gamma^-1 [p_a < 1] - p_b)`. Both components relax
/// exponentially toward the region targets `(A, B)`.
pub fn region_targets(region: Region, p: &ModelParams) -> (f64, f64) {
    let (ind_b, ind_a) = region.indicators();
    (p.xi_a * ind_b, p.xi_b / p.gamma * ind_a)
}

/// The piecewise-linear field at an off-manifold state.
pub fn pwl_field(s: &PwlState, p: &ModelParams) -> Result<[f64; 2]> {
    match s.location() {
        Location::Interior(region) => {
            let (ta, tb) = region_targets(region, p);
            Ok([ta - s.p_a, p.delta * (tb - s.p_b)])
        }
        loc => Err(Error::Domain(format!(
            "pwl field is undefined on the switching set ({loc:?}); use flow_exact"
        ))),
    }
}

/// Region equilibrium `(A, B)` if it is real (lies inside its own region).
pub fn region_equilibrium(region: Region, p: &ModelParams) -> Option<(f64, f64)> {
    let (ta, tb) = region_targets(region, p);
    let inside = match region {
        Region::PlusPlus => ta > 1.0 && tb > 1.0,
        Region::PlusMinus => ta > 1.0 && tb < 1.0,
        Region::MinusMinus => ta < 1.0 && tb < 1.0,
        Region::MinusPlus => ta < 1.0 && tb > 1.0,
    };
    inside.then_some((ta, tb))
}

/// All real equilibria off the switching set.
pub fn real_equilibria(p: &ModelParams) -> Vec<(Region, (f64, f64))> {
    Region::ALL
        .iter()
        .filter_map(|&r| region_equilibrium(r, p).map(|q| (r, q)))
        .collect()
}

/// Boundary-equilibrium collision cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    /// `xi_a < 1` fixed, `xi_b -> gamma^-`: the low-low equilibrium
    /// `(0, xi_b/gamma)` collides with `{p_b = 1}` at `(0, 1)`.
    LowLowFromBelow,
    /// `xi_a < 1` fixed, `xi_b -> gamma^+`: `(xi_a, xi_b/gamma)` collides
    /// with `{p_b = 1}` at `(xi_a, 1)`.
    HighBFromAbove,
    /// `xi_b < gamma` fixed, `xi_a -> 1^-`: `(xi_a, xi_b/gamma)` collides
    /// with `{p_a = 1}` at `(1, xi_b/gamma)`.
    HighAFromBelow,
    /// `xi_a > 1` fixed, `xi_b -> gamma^-`: as `LowLowFromBelow` but from
    /// the other side of `xi_a = 1`.
    LowLowLargeXiA,
}

/// Limit point on the switching set for a boundary-equilibrium collision.
/// The parameter being sent to its boundary is ignored in `p`; the fixed
/// parameter must be on the case's side.
pub fn boundary_equilibrium_limits(p: &ModelParams, case: BoundaryCase) -> Result<(f64, f64)> {
    match case {
        BoundaryCase::LowLowFromBelow => {
            if p.xi_a >= 1.0 {
                return Err(Error::WrongSide(format!(
                    "case requires xi_a < 1, got {}",
                    p.xi_a
                )));
            }
            Ok((0.0, 1.0))
        }
        BoundaryCase::HighBFromAbove => {
            if p.xi_a >= 1.0 {
                return Err(Error::WrongSide(format!(
                    "case requires xi_a < 1, got {}",
                    p.xi_a
                )));
            }
            Ok((p.xi_a, 1.0))
        }
        BoundaryCase::HighAFromBelow => {
            if p.xi_b >= p.gamma {
                return Err(Error::WrongSide(format!(
                    "case requires xi_b < gamma, got xi_b = {}, gamma = {}",
                    p.xi_b, p.gamma
                )));
            }
            Ok((1.0, p.xi_b / p.gamma))
        }
        BoundaryCase::LowLowLargeXiA => {
            if p.xi_a <= 1.0 {
                return Err(Error::WrongSide(format!(
                    "case requires xi_a > 1, got {}",
                    p.xi_a
                )));
            }
            Ok((0.0, 1.0))
        }
    }
}

/// Why an exact flow stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowStatus {
    /// Integrated to `t_max`.
    ReachedTMax,
    /// Hit the degenerate corner `(1, 1)`.
    Corner { t: f64 },
}

/// A switching event of the exact flow.
#[derive(Debug, Clone, Copy)]
pub struct PwlEvent {
    pub t: f64,
    pub state: PwlState,
    /// True when the event is on `{p_a = 1}`, false for `{p_b = 1}`.
    pub on_sigma_a: bool,
    /// Rate of the crossing coordinate at the event; identical on both
    /// sides, hence crossing rather than sliding.
    pub normal_speed: f64,
}

/// One maximal smooth piece of the exact flow.
#[derive(Debug, Clone, Copy)]
pub struct PwlSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub start: PwlState,
    pub region: Region,
    /// Exponential relaxation targets of the active region.
    pub targets: (f64, f64),
}

impl PwlSegment {
    /// Closed-form state at `t` within the segment.
    pub fn state_at(&self, t: f64, p: &ModelParams) -> PwlState {
        let dt = t - self.t_start;
        let (ta, tb) = self.targets;
        PwlState {
            p_a: ta + (self.start.p_a - ta) * (-dt).exp(),
            p_b: tb + (self.start.p_b - tb) * (-p.delta * dt).exp(),
        }
    }
}

/// An exactly solved piecewise-linear trajectory.
#[derive(Debug, Clone)]
pub struct PwlTrajectory {
    pub segments: Vec<PwlSegment>,
    pub events: Vec<PwlEvent>,
    pub status: FlowStatus,
}

impl PwlTrajectory {
    /// Evaluate the trajectory at any `t` within its span.
    pub fn state_at(&self, t: f64, p: &ModelParams) -> Option<PwlState> {
        let seg = self
            .segments
            .iter()
            .find(|s| t >= s.t_start && t <= s.t_end)?;
        Some(seg.state_at(t, p))
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map(|s| s.t_end).unwrap_or(0.0)
    }
}

/// Time for `x(t) = target + (x0 - target) e^{-rate t}` to reach `level`,
/// if it does so in forward time.
fn hit_time(x0: f64, target: f64, rate: f64, level: f64) -> Option<f64> {
    let num = x0 - target;
    let den = level - target;
    // Reaching the level requires the ratio to be in (0, 1) strictly
    // after leaving, i.e. num/den > 1.
    if num == 0.0 || den == 0.0 || num.signum() != den.signum() {
        return None;
    }
    let ratio = num / den;
    (ratio > 1.0).then(|| ratio.ln() / rate)
}

/// Region entered from a point of the switching set, decided by the flow
/// direction. Errors when the normal rate vanishes (tangency) or at the
/// corner.
fn entering_region(s: &PwlState, p: &ModelParams, t: f64) -> Result<Region> {
    match s.location() {
        Location::Interior(r) => Ok(r),
        Location::Corner => Err(Error::DegenerateEvent {
            t,
            what: "reached the corner (1, 1)".into(),
        }),
        Location::OnSigmaA => {
            // p_a' = xi_a [p_b > 1] - 1 does not depend on [p_a < 1].
            let upper = s.p_b > 1.0;
            let pa_dot = if upper { p.xi_a - 1.0 } else { -1.0 };
            if pa_dot.abs() <= 1e-10 {
                return Err(Error::DegenerateEvent {
                    t,
                    what: "tangent crossing of {p_a = 1}".into(),
                });
            }
            Ok(match (pa_dot > 0.0, upper) {
                (true, true) => Region::PlusPlus,
                (true, false) => Region::PlusMinus,
                (false, true) => Region::MinusPlus,
                (false, false) => Region::MinusMinus,
            })
        }
        Location::OnSigmaB => {
            let right = s.p_a > 1.0;
            let pb_dot = p.delta * (if right { -1.0 } else { p.xi_b / p.gamma - 1.0 });
            if pb_dot.abs() <= 1e-10 {
                return Err(Error::DegenerateEvent {
                    t,
                    what: "tangent crossing of {p_b = 1}".into(),
                });
            }
            Ok(match (right, pb_dot > 0.0) {
                (true, true) => Region::PlusPlus,
                (true, false) => Region::PlusMinus,
                (false, true) => Region::MinusPlus,
                (false, false) => Region::MinusMinus,
            })
        }
    }
}

/// Event-driven exact flow: region-wise exponential solutions with event
/// times solved in closed form, concatenated across transversal crossings.
/// Terminates with a corner status when the orbit runs into `(1, 1)`.
pub fn flow_exact(s0: &PwlState, p: &ModelParams, t_max: f64) -> Result<PwlTrajectory> {
    let mut segments = Vec::new();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut state = *s0;

    // Snap near-manifold starts onto the manifold before dispatch.
    if (state.p_a - 1.0).abs() <= SIGMA_SNAP {
        state.p_a = 1.0;
    }
    if (state.p_b - 1.0).abs() <= SIGMA_SNAP {
        state.p_b = 1.0;
    }

    for _ in 0..1_000_000 {
        let region = match entering_region(&state, p, t) {
            Ok(r) => r,
            Err(Error::DegenerateEvent { what, .. }) if what.contains("corner") => {
                return Ok(PwlTrajectory {
                    segments,
                    events,
                    status: FlowStatus::Corner { t },
                });
            }
            Err(e) => return Err(e),
        };
        let targets = region_targets(region, p);
        let t_a = hit_time(state.p_a, targets.0, 1.0, 1.0);
        let t_b = hit_time(state.p_b, targets.1, p.delta, 1.0);

        let next = match (t_a, t_b) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-14 * a.abs().max(1.0) => {
                // Simultaneous double crossing: step into the corner and
                // let the next dispatch terminate there.
                Some((a.min(b), true, true))
            }
            (Some(a), Some(b)) => {
                if a < b {
                    Some((a, true, false))
                } else {
                    Some((b, false, true))
                }
            }
            (Some(a), None) => Some((a, true, false)),
            (None, Some(b)) => Some((b, false, true)),
            (None, None) => None,
        };

        match next {
            Some((dt, hit_a, hit_b)) if t + dt <= t_max => {
                let seg = PwlSegment {
                    t_start: t,
                    t_end: t + dt,
                    start: state,
                    region,
                    targets,
                };
                let mut s_next = seg.state_at(t + dt, p);
                if hit_a {
                    s_next.p_a = 1.0;
                }
                if hit_b {
                    s_next.p_b = 1.0;
                }
                segments.push(seg);
                t += dt;
                // Record the crossing with its normal speed.
                if hit_a && !hit_b {
                    let normal_speed = targets.0 - 1.0;
                    if normal_speed.abs() <= 1e-10 {
                        return Err(Error::DegenerateEvent {
                            t,
                            what: "vanishing normal speed on {p_a = 1}".into(),
                        });
                    }
                    events.push(PwlEvent {
                        t,
                        state: s_next,
                        on_sigma_a: true,
                        normal_speed,
                    });
                } else if hit_b && !hit_a {
                    let normal_speed = p.delta * (targets.1 - 1.0);
                    if normal_speed.abs() <= 1e-10 {
                        return Err(Error::DegenerateEvent {
                            t,
                            what: "vanishing normal speed on {p_b = 1}".into(),
                        });
                    }
                    events.push(PwlEvent {
                        t,
                        state: s_next,
                        on_sigma_a: false,
                        normal_speed,
                    });
                }
                state = s_next;
                if (state.p_a - 1.0).abs() <= CORNER_CAPTURE
                    && (state.p_b - 1.0).abs() <= CORNER_CAPTURE
                {
                    return Ok(PwlTrajectory {
                        segments,
                        events,
                        status: FlowStatus::Corner { t },
                    });
                }
            }
            _ => {
                // No further crossing before t_max: close the last segment.
                segments.push(PwlSegment {
                    t_start: t,
                    t_end: t_max,
                    start: state,
                    region,
                    targets,
                });
                return Ok(PwlTrajectory {
                    segments,
                    events,
                    status: FlowStatus::ReachedTMax,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        what: "exact pwl flow (event budget)".into(),
        iters: 1_000_000,
    })
}

fn require_return_map_params(p: &ModelParams) -> Result<()> {
    if p.xi_a <= 1.0 || p.xi_b <= p.gamma {
        return Err(Error::Domain(format!(
            "return map requires xi_a > 1 and xi_b > gamma, got ({}, {})",
            p.xi_a, p.xi_b
        )));
    }
    Ok(())
}

/// The four stages of the first-return map, with hitting times.
#[derive(Debug, Clone, Copy)]
pub struct PoincareRecord {
    pub p_b0: f64,
    /// `p_a` when `p_b` first reaches 1.
    pub p_a_t1: f64,
    /// `p_b` when `p_a` returns to 1 from above.
    pub p_b_t2: f64,
    /// `p_a` when `p_b` climbs back to 1.
    pub p_a_t3: f64,
    /// The return value `P(p_b0)`.
    pub p_b_t4: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

/// Closed-form evaluation of the four return-map stages from
/// `(p_a, p_b) = (1, p_b0)`, `p_b0 > 1`, valid for `xi_a > 1`,
/// `xi_b > gamma`:
///
/// ```text
/// p_a(T1) = xi_a + (1 - xi_a) p_b0^{-1/delta}
/// p_b(T2) = p_a(T1)^{-delta}
/// p_a(T3) = ((xi_b - gamma) / (xi_b - gamma p_b(T2)))^{1/delta}
/// p_b(T4) = xi_b/gamma + (1 - xi_b/gamma) ((xi_a - 1)/(xi_a - p_a(T3)))^delta
/// ```
pub fn poincare_record(p_b0: f64, p: &ModelParams) -> Result<PoincareRecord> {
    require_return_map_params(p)?;
    if p_b0.is_nan() || p_b0 <= 1.0 {
        return Err(Error::Domain(format!(
            "return map requires p_b0 > 1, got {p_b0}"
        )));
    }
    let (gamma, delta, xi_a, xi_b) = (p.gamma, p.delta, p.xi_a, p.xi_b);
    let qb = xi_b / gamma;

    let t1 = p_b0.ln() / delta;
    let p_a_t1 = xi_a + (1.0 - xi_a) * p_b0.powf(-1.0 / delta);

    let dt2 = p_a_t1.ln();
    let p_b_t2 = p_a_t1.powf(-delta);

    let dt3 = ((xi_b - gamma * p_b_t2) / (xi_b - gamma)).ln() / delta;
    let p_a_t3 = ((xi_b - gamma) / (xi_b - gamma * p_b_t2)).powf(1.0 / delta);

    let dt4 = ((xi_a - p_a_t3) / (xi_a - 1.0)).ln();
    let p_b_t4 = qb + (1.0 - qb) * ((xi_a - 1.0) / (xi_a - p_a_t3)).powf(delta);

    Ok(PoincareRecord {
        p_b0,
        p_a_t1,
        p_b_t2,
        p_a_t3,
        p_b_t4,
        t1,
        t2: t1 + dt2,
        t3: t1 + dt2 + dt3,
        t4: t1 + dt2 + dt3 + dt4,
    })
}

/// The first-return map `P(p_b0)` on `{p_a = 1, p_b > 1}`.
pub fn poincare_map(p_b0: f64, p: &ModelParams) -> Result<f64> {
    Ok(poincare_record(p_b0, p)?.p_b_t4)
}

/// Internal: closed form extended to `p_b0 = 1` (where `P(1) = 1`); the
/// public map keeps the strict domain.
fn poincare_closed(p_b0: f64, p: &ModelParams) -> f64 {
    if p_b0 == 1.0 {
        return 1.0;
    }
    poincare_record(p_b0, p)
        .map(|r| r.p_b_t4)
        .expect("closed form evaluated inside its domain")
}

/// Richardson-extrapolated one-sided derivatives of the return map at the
/// corner value 1: returns `(P'(1), P''(1))`. Analytically `P'(1) = 1` and
/// `P''(1) = -(delta + 1) xi_a xi_b / (2 delta (xi_b - gamma)) < 0`.
pub fn poincare_derivatives_at_one(p: &ModelParams) -> Result<(f64, f64)> {
    require_return_map_params(p)?;
    let f = |x: f64| poincare_closed(x, p);
    // Second-order one-sided first derivative.
    let d1 = |h: f64| (-3.0 * f(1.0) + 4.0 * f(1.0 + h) - f(1.0 + 2.0 * h)) / (2.0 * h);
    // Second-order one-sided second derivative.
    let d2 = |h: f64| {
        (2.0 * f(1.0) - 5.0 * f(1.0 + h) + 4.0 * f(1.0 + 2.0 * h) - f(1.0 + 3.0 * h)) / (h * h)
    };
    // The map's higher derivatives grow like inverse powers of the distance
    // to the existence boundary; scale the step accordingly.
    let scale = (p.xi_a - 1.0).min(p.xi_b - p.gamma).min(1.0);
    let h = 1e-3 * scale;
    let p1 = (4.0 * d1(h / 2.0) - d1(h)) / 3.0;
    let p2 = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
    Ok((p1, p2))
}

/// Closed form for the second derivative of the return map at the corner,
/// obtained by differentiating the four stages twice:
/// `P''(1) = -(delta + 1) xi_a xi_b / (delta (xi_b - gamma))`.
pub fn poincare_second_derivative_formula(p: &ModelParams) -> f64 {
    -(p.delta + 1.0) * p.xi_a * p.xi_b / (p.delta * (p.xi_b - p.gamma))
}

/// The quadratic corner coefficient `c2 = P''(1) / 2`, i.e. the coefficient
/// of `(x - 1)^2` in `P(x) = x + c2 (x - 1)^2 + O((x - 1)^3)`:
/// `c2 = -(delta + 1) xi_a xi_b / (2 delta (xi_b - gamma)) < 0`.
pub fn poincare_corner_coefficient_formula(p: &ModelParams) -> f64 {
    0.5 * poincare_second_derivative_formula(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::qssr_vector_field;
    use crate::testrng::SplitMix64;

    fn paper() -> ModelParams {
        ModelParams::new(2.0, 3.0, 1.3536, 2.3536, 0.0, 0.0).unwrap()
    }

    #[test]
    fn field_matches_region_systems() {
        let p = paper();
        let f = pwl_field(&PwlState::new(1.5, 1.5).unwrap(), &p).unwrap();
        assert_eq!(f, [p.xi_a - 1.5, -p.delta * 1.5]);

        let f = pwl_field(&PwlState::new(0.5, 0.5).unwrap(), &p).unwrap();
        assert_eq!(f, [-0.5, p.delta * (p.xi_b / p.gamma - 0.5)]);

        assert!(pwl_field(&PwlState::new(1.0, 0.5).unwrap(), &p).is_err());
    }

    #[test]
    fn region_equilibria_follow_indicator_logic() {
        // (0, xi_b/gamma) exists iff xi_b < gamma; (xi_a, xi_b/gamma) iff
        // xi_a < 1 and xi_b > gamma; none off the switching set iff
        // xi_a > 1 and xi_b > gamma.
        let gamma = 2.0;
        for xi_a in [0.3, 0.7, 1.2, 2.5] {
            for xi_b in [0.5, 1.5, 2.5, 4.0] {
                let p = ModelParams::new(gamma, 3.0, xi_a, xi_b, 0.0, 0.0).unwrap();
                let eqs = real_equilibria(&p);
                let has_low = eqs.iter().any(|(r, _)| *r == Region::MinusMinus);
                let has_high_b = eqs.iter().any(|(r, _)| *r == Region::MinusPlus);
                assert_eq!(has_low, xi_b < gamma, "low-low at ({xi_a}, {xi_b})");
                assert_eq!(
                    has_high_b,
                    xi_a < 1.0 && xi_b > gamma,
                    "high-b at ({xi_a}, {xi_b})"
                );
                if xi_a > 1.0 && xi_b > gamma {
                    assert!(eqs.is_empty());
                }
                // The two decaying regions never hold a real equilibrium.
                assert!(eqs
                    .iter()
                    .all(|(r, _)| *r != Region::PlusPlus && *r != Region::PlusMinus));
            }
        }
    }

    #[test]
    fn qssr_field_converges_to_pwl_field_in_the_switching_limit() {
        let points = [
            (0.5, 0.5),
            (0.75, 1.5),
            (1.3, 0.6),
            (1.5, 1.4),
            (2.0, 0.3),
        ];
        let pwl_params = paper();
        let mut prev_worst = f64::INFINITY;
        for sigma in [0.02, 0.01] {
            let p = ModelParams::new(2.0, 3.0, 1.3536, 2.3536, sigma, 0.0).unwrap();
            let mut worst = 0.0f64;
            for &(pa, pb) in &points {
                let smooth = qssr_vector_field(pa, pb, &p).unwrap();
                let limit = pwl_field(&PwlState::new(pa, pb).unwrap(), &pwl_params).unwrap();
                worst = worst
                    .max((smooth[0] - limit[0]).abs())
                    .max((smooth[1] - limit[1]).abs());
            }
            // Super-polynomial decay in sigma.
            assert!(worst < prev_worst / 10.0, "worst {worst:.3e}");
            prev_worst = worst;
        }
        assert!(prev_worst < 1e-7);
    }

    #[test]
    fn flow_event_sequence_matches_the_return_pattern() {
        // From (1, 1.5) with xi_a > 1, xi_b > gamma: hits p_b = 1 with
        // p_a > 1, then p_a = 1 with p_b < 1, then p_b = 1 with p_a < 1,
        // then p_a = 1 with p_b > 1.
        let p = paper();
        let tr = flow_exact(&PwlState::new(1.0, 1.5).unwrap(), &p, 50.0).unwrap();
        assert!(tr.events.len() >= 4);
        let e = &tr.events[..4];
        assert!(!e[0].on_sigma_a && e[0].state.p_a > 1.0);
        assert!(e[1].on_sigma_a && e[1].state.p_b < 1.0);
        assert!(!e[2].on_sigma_a && e[2].state.p_a < 1.0);
        assert!(e[3].on_sigma_a && e[3].state.p_b > 1.0);
        for ev in &tr.events {
            assert!(ev.normal_speed.abs() > 1e-10, "sliding-like event");
        }
    }

    #[test]
    fn orbits_spiral_into_the_corner() {
        let p = paper();
        for s0 in [(1.0, 1.5), (0.4, 0.7), (2.0, 2.0), (0.2, 1.8)] {
            let tr = flow_exact(&PwlState::new(s0.0, s0.1).unwrap(), &p, 500.0).unwrap();
            assert!(
                matches!(tr.status, FlowStatus::Corner { .. }),
                "orbit from {s0:?}: {:?}",
                tr.status
            );
            let end = tr.events.last().unwrap().state;
            assert!(
                (end.p_a - 1.0).abs() <= 1e-4 && (end.p_b - 1.0).abs() <= 1e-4,
                "orbit from {s0:?} captured at {end:?}"
            );
        }
    }

    #[test]
    fn poincare_record_inequality_pattern_and_events() {
        let p = paper();
        let rec = poincare_record(1.5, &p).unwrap();
        assert!(rec.p_a_t1 > 1.0);
        assert!(rec.p_b_t2 < 1.0);
        assert!(rec.p_a_t3 < 1.0);
        assert!(rec.p_b_t4 > 1.0);
        assert!(rec.t1 < rec.t2 && rec.t2 < rec.t3 && rec.t3 < rec.t4);

        // Events of the exact flow reproduce the stage values and times.
        let tr = flow_exact(&PwlState::new(1.0, 1.5).unwrap(), &p, 50.0).unwrap();
        let e = &tr.events[..4];
        assert!((e[0].t - rec.t1).abs() < 1e-12);
        assert!((e[1].t - rec.t2).abs() < 1e-12);
        assert!((e[2].t - rec.t3).abs() < 1e-12);
        assert!((e[3].t - rec.t4).abs() < 1e-12);
        assert!((e[0].state.p_a - rec.p_a_t1).abs() < 1e-12);
        assert!((e[1].state.p_b - rec.p_b_t2).abs() < 1e-12);
        assert!((e[2].state.p_a - rec.p_a_t3).abs() < 1e-12);
        assert!((e[3].state.p_b - rec.p_b_t4).abs() < 1e-12);
    }

    #[test]
    fn poincare_map_agrees_with_exact_flow() {
        let p = paper();
        for p_b0 in [1.1, 1.5, 2.0, 5.0] {
            let direct = poincare_map(p_b0, &p).unwrap();
            let tr = flow_exact(&PwlState::new(1.0, p_b0).unwrap(), &p, 100.0).unwrap();
            let ret = tr
                .events
                .iter()
                .find(|e| e.on_sigma_a && e.state.p_b > 1.0)
                .expect("return to the section");
            assert!(
                (direct - ret.state.p_b).abs() <= 1e-10,
                "p_b0 = {p_b0}: {direct} vs {}",
                ret.state.p_b
            );
        }
    }

    #[test]
    fn poincare_map_contracts_with_no_fixed_point() {
        let p = paper();
        let mut x = 5.0;
        for _ in 0..200 {
            let px = poincare_map(x, &p).unwrap();
            assert!(px > 1.0 && px < x, "P({x}) = {px}");
            x = px;
        }
        assert!(x < 1.0 + 1e-3);
        // Sign of P(x) - x is constant on a scan of (1, 10].
        for k in 1..=100 {
            let x = 1.0 + 9.0 * k as f64 / 100.0;
            assert!(poincare_map(x, &p).unwrap() < x);
        }
    }

    #[test]
    fn poincare_map_tends_to_one_at_the_corner() {
        let p = paper();
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let x = 1.0 + 10f64.powi(-k);
            let px = poincare_map(x, &p).unwrap();
            assert!(px > 1.0 && px - 1.0 < prev);
            prev = px - 1.0;
        }
        assert!(prev < 2e-6);
    }

    #[test]
    fn poincare_derivatives_match_the_closed_forms() {
        let p = paper();
        let (p1, p2) = poincare_derivatives_at_one(&p).unwrap();
        assert!((p1 - 1.0).abs() <= 1e-6, "P'(1) = {p1}");
        let expected = poincare_second_derivative_formula(&p);
        assert!(
            (p2 - expected).abs() <= 1e-4 * expected.abs(),
            "P''(1) = {p2} vs {expected}"
        );
        // The quadratic corner coefficient at the reference parameters:
        // -(4 * 1.3536 * 2.3536) / (6 * 0.3536).
        let c2 = poincare_corner_coefficient_formula(&p);
        assert!((c2 - (-6.00647)).abs() < 1e-4, "c2 = {c2}");
        assert!((p2 / 2.0 - c2).abs() <= 1e-4 * c2.abs());

        // Exact symbolic cross-check: gamma = 2, delta = 1, xi_a = 2,
        // xi_b = 4 collapses the four stages to P(x) = 2 - (3x-2)/(4x-3),
        // whose second derivative at 1 is -8.
        let pr = ModelParams::new(2.0, 1.0, 2.0, 4.0, 0.0, 0.0).unwrap();
        for x in [1.1, 1.3, 1.7, 2.4] {
            let direct = poincare_map(x, &pr).unwrap();
            let rational = 2.0 - (3.0 * x - 2.0) / (4.0 * x - 3.0);
            assert!((direct - rational).abs() < 1e-14, "x = {x}");
        }
        assert_eq!(poincare_second_derivative_formula(&pr), -8.0);
        let (_, p2r) = poincare_derivatives_at_one(&pr).unwrap();
        assert!((p2r + 8.0).abs() < 1e-4 * 8.0, "P''(1) = {p2r}");

        // P''(1) < 0 and P'(1) = 1 over random admissible parameters.
        let mut rng = SplitMix64::new(0xb0b);
        for _ in 0..50 {
            let gamma = rng.in_range(0.5, 3.0);
            let p = ModelParams::new(
                gamma,
                rng.in_range(0.5, 4.0),
                rng.in_range(1.0 + 1e-2, 3.0),
                rng.in_range(gamma + 1e-2, 3.0 * gamma),
                0.0,
                0.0,
            )
            .unwrap();
            let (p1, p2) = poincare_derivatives_at_one(&p).unwrap();
            assert!((p1 - 1.0).abs() <= 1e-6);
            assert!(p2 < 0.0);
            let formula = poincare_second_derivative_formula(&p);
            assert!((p2 - formula).abs() <= 1e-3 * formula.abs());
        }
    }

    #[test]
    fn boundary_limits_and_wrong_sides() {
        let gamma = 2.0;
        // xi_a = 0.5 fixed, xi_b -> gamma^-: limit (0, 1).
        let p = ModelParams::new(gamma, 3.0, 0.5, 1.99, 0.0, 0.0).unwrap();
        assert_eq!(
            boundary_equilibrium_limits(&p, BoundaryCase::LowLowFromBelow).unwrap(),
            (0.0, 1.0)
        );
        // xi_b = 1 fixed, xi_a -> 1^-: limit (1, 1/2).
        let p = ModelParams::new(gamma, 3.0, 0.99, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            boundary_equilibrium_limits(&p, BoundaryCase::HighAFromBelow).unwrap(),
            (1.0, 0.5)
        );
        let p = ModelParams::new(gamma, 3.0, 1.5, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            boundary_equilibrium_limits(&p, BoundaryCase::LowLowFromBelow),
            Err(Error::WrongSide(_))
        ));
        assert_eq!(
            boundary_equilibrium_limits(&p, BoundaryCase::LowLowLargeXiA).unwrap(),
            (0.0, 1.0)
        );

        // Linear approach of the region equilibrium to its limit along a
        // geometric parameter sequence.
        let mut gaps = Vec::new();
        for k in 1..=5 {
            let gap = 0.2 * 0.5f64.powi(k);
            let p = ModelParams::new(gamma, 3.0, 0.5, gamma - gap, 0.0, 0.0).unwrap();
            let q = region_equilibrium(Region::MinusMinus, &p).unwrap();
            let limit = boundary_equilibrium_limits(&p, BoundaryCase::LowLowFromBelow).unwrap();
            gaps.push(((q.0 - limit.0).hypot(q.1 - limit.1), gap));
        }
        for (dist, gap) in gaps {
            assert!(dist <= gap / gamma + 1e-12, "dist {dist} vs gap {gap}");
        }
    }

    #[test]
    fn corner_start_terminates_with_corner_status() {
        let p = paper();
        let tr = flow_exact(&PwlState::new(1.0, 1.0).unwrap(), &p, 10.0).unwrap();
        assert!(matches!(tr.status, FlowStatus::Corner { .. }));
    }
}
