//! Blow-up atlas over the switching set: one scaling chart and twelve
//! directional charts covering the spherical blow-up of the corner
//! `(p_a, p_b, sigma) = (1, 1, 0)` and the cylindrical blow-ups along the
//! two switching lines.
//!
//! The thirteen charts fall into five families. Every family parametrizes
//! `(ln p_a, ln p_b, sigma)` by monomials in the three chart coordinates
//! together with sign data `s` (first index) and `m` (second index), so the
//! blow-down maps, vector fields and chart changes are all generated from
//! one table of formulas per family.
//!
//! | family         | charts            | coords            | (ln p_a, ln p_b, sigma)      |
//! |----------------|-------------------|-------------------|------------------------------|
//! | `Scaling`      | K2                | (eta, u, v)       | (eta u, eta v, eta)          |
//! | `CylinderB2`   | K12 K32           | (eta, v, rho)     | (s eta, eta rho v, eta rho)  |
//! | `CylinderBDir` | K14 K15 K34 K35   | (eta, rho, sigc)  | (s eta, m eta rho, eta rho sigc) |
//! | `CylinderA2`   | K42 K52           | (eta, u, rho)     | (eta rho u, s eta, eta rho)  |
//! | `CylinderADir` | K41 K43 K51 K53   | (eta, rho, sigc)  | (m eta rho, s eta, eta rho sigc) |
//!
//! with `s = -1` for indices 1 and 4, `s = +1` for indices 3 and 5, and the
//! same convention for `m`.

use crate::error::{Error, Result};
use crate::model::{phi, ModelParams};

/// Margin for the strict sign inequalities deciding overlap membership.
const OVERLAP_MARGIN: f64 = 1e-12;

/// Identity of a chart in the atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[allow(clippy::upper_case_acronyms)]
pub enum ChartId {
    K2,
    K12,
    K14,
    K15,
    K32,
    K34,
    K35,
    K41,
    K42,
    K43,
    K51,
    K52,
    K53,
}

/// The five structural families of the atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartFamily {
    /// Scaling chart K2 over the blow-up sphere.
    Scaling,
    /// Cylinder charts K_i2 over the two branches of the `p_a = 1` blow-up
    /// (indices i in {1, 3}).
    CylinderB2,
    /// Directional cylinder charts K_i4, K_i5 (i in {1, 3}).
    CylinderBDir,
    /// Cylinder charts K_i2 over the two branches of the `p_b = 1` blow-up
    /// (indices i in {4, 5}).
    CylinderA2,
    /// Directional cylinder charts K_i1, K_i3 (i in {4, 5}).
    CylinderADir,
}

fn sign_of_index(i: u8) -> f64 {
    match i {
        1 | 4 => -1.0,
        3 | 5 => 1.0,
        _ => unreachable!("chart indices are 1, 3, 4, 5"),
    }
}

impl ChartId {
    pub const ALL: [ChartId; 13] = [
        ChartId::K2,
        ChartId::K12,
        ChartId::K14,
        ChartId::K15,
        ChartId::K32,
        ChartId::K34,
        ChartId::K35,
        ChartId::K41,
        ChartId::K42,
        ChartId::K43,
        ChartId::K51,
        ChartId::K52,
        ChartId::K53,
    ];

    /// `(i, j)` of a directional chart `K_ij`; `None` for the scaling chart.
    pub fn indices(self) -> Option<(u8, u8)> {
        match self {
            ChartId::K2 => None,
            ChartId::K12 => Some((1, 2)),
            ChartId::K14 => Some((1, 4)),
            ChartId::K15 => Some((1, 5)),
            ChartId::K32 => Some((3, 2)),
            ChartId::K34 => Some((3, 4)),
            ChartId::K35 => Some((3, 5)),
            ChartId::K41 => Some((4, 1)),
            ChartId::K42 => Some((4, 2)),
            ChartId::K43 => Some((4, 3)),
            ChartId::K51 => Some((5, 1)),
            ChartId::K52 => Some((5, 2)),
            ChartId::K53 => Some((5, 3)),
        }
    }

    pub fn family(self) -> ChartFamily {
        match self.indices() {
            None => ChartFamily::Scaling,
            Some((i, 2)) if i == 1 || i == 3 => ChartFamily::CylinderB2,
            Some((i, _)) if i == 1 || i == 3 => ChartFamily::CylinderBDir,
            Some((_, 2)) => ChartFamily::CylinderA2,
            Some(_) => ChartFamily::CylinderADir,
        }
    }

    /// Sign `s` attached to the first index.
    pub fn s(self) -> f64 {
        self.indices().map_or(0.0, |(i, _)| sign_of_index(i))
    }

    /// Sign `m` attached to the second index; 0 for charts whose second
    /// index is 2 (no directional sign).
    pub fn m(self) -> f64 {
        match self.indices() {
            Some((_, j)) if j != 2 => sign_of_index(j),
            _ => 0.0,
        }
    }

    /// Names of the three chart coordinates, for messages and table headers.
    pub fn coord_names(self) -> [&'static str; 3] {
        match self.family() {
            ChartFamily::Scaling => ["eta", "u", "v"],
            ChartFamily::CylinderB2 => ["eta", "v", "rho"],
            ChartFamily::CylinderA2 => ["eta", "u", "rho"],
            ChartFamily::CylinderBDir | ChartFamily::CylinderADir => ["eta", "rho", "sigc"],
        }
    }

    /// Which of the three coordinates are radial (constrained to `>= 0`).
    fn radial_mask(self) -> [bool; 3] {
        match self.family() {
            ChartFamily::Scaling => [true, false, false],
            ChartFamily::CylinderB2 | ChartFamily::CylinderA2 => [true, false, true],
            ChartFamily::CylinderBDir | ChartFamily::CylinderADir => [true, true, true],
        }
    }

    /// Charts reachable by one displayed (or blow-down-derived) chart change.
    pub fn neighbors(self) -> &'static [ChartId] {
        use ChartId::*;
        match self {
            K2 => &[K12, K14, K15, K32, K34, K35, K41, K42, K43, K51, K52, K53],
            K12 => &[K2, K14, K15],
            K14 => &[K2, K12, K41],
            K15 => &[K2, K12, K51],
            K32 => &[K2, K34, K35],
            K34 => &[K2, K32, K43],
            K35 => &[K2, K32, K53],
            K41 => &[K2, K42, K14],
            K42 => &[K2, K41, K43],
            K43 => &[K2, K42, K34],
            K51 => &[K2, K52, K15],
            K52 => &[K2, K51, K53],
            K53 => &[K2, K52, K35],
        }
    }
}

impl std::fmt::Display for ChartId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A point in one chart of the atlas, together with the slow-fast parameter
/// `mu` of the blown-up system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub chart: ChartId,
    pub r_a: f64,
    pub r_b: f64,
    /// The three chart coordinates in the order of [`ChartId::coord_names`].
    pub coords: [f64; 3],
    pub mu: f64,
}

impl ChartPoint {
    pub fn new(chart: ChartId, r_a: f64, r_b: f64, coords: [f64; 3], mu: f64) -> Result<Self> {
        for (&c, name) in coords.iter().zip(chart.coord_names()) {
            if !c.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{chart}: coordinate {name} must be finite, got {c}"
                )));
            }
        }
        for ((&c, &radial), name) in coords
            .iter()
            .zip(chart.radial_mask().iter())
            .zip(chart.coord_names())
        {
            if radial && c < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{chart}: radial coordinate {name} must be >= 0, got {c}"
                )));
            }
        }
        if !(r_a.is_finite() && r_b.is_finite()) {
            return Err(Error::InvalidParams("r_a, r_b must be finite".into()));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidParams(format!("mu must be >= 0, got {mu}")));
        }
        Ok(Self {
            chart,
            r_a,
            r_b,
            coords,
            mu,
        })
    }
}

/// Image of a chart point under the blow-down map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowDownImage {
    pub r_a: f64,
    pub r_b: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub sigma: f64,
}

/// `(ln p_a, ln p_b, sigma)` of a chart point.
fn log_coords(chart: ChartId, c: &[f64; 3]) -> (f64, f64, f64) {
    let (s, m) = (chart.s(), chart.m());
    match chart.family() {
        // (eta, u, v)
        ChartFamily::Scaling => (c[0] * c[1], c[0] * c[2], c[0]),
        // (eta, v, rho)
        ChartFamily::CylinderB2 => (s * c[0], c[0] * c[2] * c[1], c[0] * c[2]),
        // (eta, rho, sigc)
        ChartFamily::CylinderBDir => (s * c[0], m * c[0] * c[1], c[0] * c[1] * c[2]),
        // (eta, u, rho)
        ChartFamily::CylinderA2 => (c[0] * c[2] * c[1], s * c[0], c[0] * c[2]),
        // (eta, rho, sigc)
        ChartFamily::CylinderADir => (m * c[0] * c[1], s * c[0], c[0] * c[1] * c[2]),
    }
}

/// Apply the chart's exponential blow-down formulas.
pub fn blow_down(cp: &ChartPoint) -> BlowDownImage {
    let (la, lb, sigma) = log_coords(cp.chart, &cp.coords);
    BlowDownImage {
        r_a: cp.r_a,
        r_b: cp.r_b,
        p_a: la.exp(),
        p_b: lb.exp(),
        sigma,
    }
}

/// `phi(sign / x)` for radial `x >= 0`, using the smooth flat extension at
/// `x = 0` (limit 1 for `sign > 0`, limit 0 for `sign < 0`).
fn phi_over(sign: f64, x: f64) -> f64 {
    // IEEE division by zero produces the correct signed infinity, and `phi`
    // is total on infinities.
    phi(sign / x)
}

/// Slaved `(r_a, r_b)` values of the chart-local critical manifold.
pub fn critical_slaving(cp: &ChartPoint, p: &ModelParams) -> (f64, f64) {
    let (s, m) = (cp.chart.s(), cp.chart.m());
    let c = &cp.coords;
    let (arg_a, arg_b) = match cp.chart.family() {
        ChartFamily::Scaling => (c[2], c[1]),
        ChartFamily::CylinderB2 => (c[1], s / c[2]),
        ChartFamily::CylinderBDir => (m / c[2], s / (c[1] * c[2])),
        ChartFamily::CylinderA2 => (s / c[2], c[1]),
        ChartFamily::CylinderADir => (s / (c[1] * c[2]), m / c[2]),
    };
    (phi(arg_a), (1.0 - phi(arg_b)) / p.gamma)
}

/// Right-hand side of the blown-up system in the given chart, ordered as
/// `[r_a', r_b', c1', c2', c3']` with the coordinates of
/// [`ChartId::coord_names`]. The fields extend smoothly to vanishing radial
/// coordinates; the `mu` factor multiplies every chart-coordinate rate.
pub fn chart_vector_field(cp: &ChartPoint, p: &ModelParams) -> [f64; 5] {
    let (s, m) = (cp.chart.s(), cp.chart.m());
    let (r_a, r_b, mu) = (cp.r_a, cp.r_b, cp.mu);
    let [c1, c2, c3] = cp.coords;
    let (gamma,) = (p.gamma,);
    match cp.chart.family() {
        ChartFamily::Scaling => {
            let (eta, u, v) = (c1, c2, c3);
            [
                phi(v) - r_a,
                1.0 - phi(u) - gamma * r_b,
                0.0,
                mu * p.g_a(r_a, eta * u),
                mu * p.g_b(r_b, eta * v),
            ]
        }
        ChartFamily::CylinderB2 => {
            let (eta, v, rho) = (c1, c2, c3);
            let ga = p.g_a(r_a, s * eta);
            [
                phi(v) - r_a,
                1.0 - phi_over(s, rho) - gamma * r_b,
                mu * s * eta * rho * ga,
                mu * p.g_b(r_b, eta * rho * v),
                -mu * s * rho * rho * ga,
            ]
        }
        ChartFamily::CylinderBDir => {
            let (eta, rho, sigc) = (c1, c2, c3);
            let ga = p.g_a(r_a, s * eta);
            let gb = p.g_b(r_b, m * eta * rho);
            [
                phi_over(m, sigc) - r_a,
                1.0 - phi_over(s, rho * sigc) - gamma * r_b,
                mu * s * eta * rho * sigc * ga,
                mu * rho * sigc * (m * gb - s * rho * ga),
                -mu * m * sigc * sigc * gb,
            ]
        }
        ChartFamily::CylinderA2 => {
            let (eta, u, rho) = (c1, c2, c3);
            let gb = p.g_b(r_b, s * eta);
            [
                phi_over(s, rho) - r_a,
                1.0 - phi(u) - gamma * r_b,
                mu * s * eta * rho * gb,
                mu * p.g_a(r_a, eta * rho * u),
                -mu * s * rho * rho * gb,
            ]
        }
        ChartFamily::CylinderADir => {
            let (eta, rho, sigc) = (c1, c2, c3);
            let gb = p.g_b(r_b, s * eta);
            let ga = p.g_a(r_a, m * eta * rho);
            [
                phi_over(s, rho * sigc) - r_a,
                1.0 - phi_over(m, sigc) - gamma * r_b,
                mu * s * eta * rho * sigc * gb,
                mu * rho * sigc * (m * ga - s * rho * gb),
                -mu * m * sigc * sigc * ga,
            ]
        }
    }
}

/// The extended 5D system `(r_a, r_b, p_a, p_b, sigma)` with `eps = mu sigma`
/// and the trivial equation `sigma' = 0`; smooth for `sigma > 0`. This is the
/// system every chart field pushes down to away from the blow-up locus.
pub fn extended_vector_field(y: &[f64; 5], mu: f64, p: &ModelParams) -> Result<[f64; 5]> {
    let [r_a, r_b, p_a, p_b, sigma] = *y;
    if !(sigma > 0.0 && p_a > 0.0 && p_b > 0.0) {
        return Err(Error::Domain(
            "extended field requires sigma > 0 and positive proteins".into(),
        ));
    }
    Ok([
        phi(p_b.ln() / sigma) - r_a,
        1.0 - phi(p_a.ln() / sigma) - p.gamma * r_b,
        mu * sigma * p_a * p.g_a(r_a, p_a.ln()),
        mu * sigma * p_b * p.g_b(r_b, p_b.ln()),
        0.0,
    ])
}

/// The two nontrivial eigenvalues of the layer linearization transverse to
/// the chart-local critical manifold. Requires `mu = 0` and a point whose
/// `(r_a, r_b)` are slaved (residual at most 1e-10).
pub fn critical_manifold_eigenvalues(cp: &ChartPoint, p: &ModelParams) -> Result<[f64; 2]> {
    if cp.mu != 0.0 {
        return Err(Error::Domain(format!(
            "critical manifold eigenvalues are defined at mu = 0, got mu = {}",
            cp.mu
        )));
    }
    let (ra_s, rb_s) = critical_slaving(cp, p);
    let residual = (cp.r_a - ra_s).abs().max((cp.r_b - rb_s).abs());
    if residual > 1e-10 {
        return Err(Error::OffManifold { residual });
    }
    Ok([-1.0, -p.gamma])
}

/// The kinds of single chart changes the atlas supports directly.
#[derive(Debug, Clone, Copy)]
enum Edge {
    ScalingToB2,
    B2ToScaling,
    ScalingToBDir,
    BDirToScaling,
    ScalingToA2,
    A2ToScaling,
    ScalingToADir,
    ADirToScaling,
    B2ToBDir,
    BDirToB2,
    A2ToADir,
    ADirToA2,
    Corner,
}

fn edge_between(from: ChartId, to: ChartId) -> Option<Edge> {
    use ChartFamily::*;
    let (ff, tf) = (from.family(), to.family());
    match (ff, tf) {
        (Scaling, CylinderB2) => Some(Edge::ScalingToB2),
        (CylinderB2, Scaling) => Some(Edge::B2ToScaling),
        (Scaling, CylinderBDir) => Some(Edge::ScalingToBDir),
        (CylinderBDir, Scaling) => Some(Edge::BDirToScaling),
        (Scaling, CylinderA2) => Some(Edge::ScalingToA2),
        (CylinderA2, Scaling) => Some(Edge::A2ToScaling),
        (Scaling, CylinderADir) => Some(Edge::ScalingToADir),
        (CylinderADir, Scaling) => Some(Edge::ADirToScaling),
        (CylinderB2, CylinderBDir) | (CylinderA2, CylinderADir)
            if from.indices().unwrap().0 == to.indices().unwrap().0 =>
        {
            Some(if ff == CylinderB2 {
                Edge::B2ToBDir
            } else {
                Edge::A2ToADir
            })
        }
        (CylinderBDir, CylinderB2) | (CylinderADir, CylinderA2)
            if from.indices().unwrap().0 == to.indices().unwrap().0 =>
        {
            Some(if ff == CylinderBDir {
                Edge::BDirToB2
            } else {
                Edge::ADirToA2
            })
        }
        (CylinderBDir, CylinderADir) | (CylinderADir, CylinderBDir) => {
            let (fi, fj) = from.indices().unwrap();
            let (ti, tj) = to.indices().unwrap();
            (fi == tj && fj == ti).then_some(Edge::Corner)
        }
        _ => None,
    }
}

fn overlap_err(from: ChartId, to: ChartId, condition: String) -> Error {
    Error::OutOfOverlap { from, to, condition }
}

/// Apply one direct chart change; errors name the violated sign condition.
fn apply_edge(edge: Edge, cp: &ChartPoint, to: ChartId) -> Result<[f64; 3]> {
    let from = cp.chart;
    let [c1, c2, c3] = cp.coords;
    let check = |value: f64, desc: String| -> Result<f64> {
        if value > OVERLAP_MARGIN {
            Ok(value)
        } else {
            Err(overlap_err(from, to, format!("{desc} (value {value:.3e})")))
        }
    };
    match edge {
        Edge::ScalingToB2 => {
            // (eta, u, v) -> (eta_i = s eta u, v_i2 = v, rho_i2 = s / u)
            let (eta, u, v) = (c1, c2, c3);
            let s = to.s();
            let su = check(s * u, format!("requires s*u > 0 with s = {s:+}"))?;
            Ok([eta * su, v, 1.0 / su])
        }
        Edge::B2ToScaling => {
            // (eta, v, rho) -> (eta2 = eta rho, u = s / rho, v)
            let (eta, v, rho) = (c1, c2, c3);
            let s = from.s();
            let rho = check(rho, "requires rho > 0".into())?;
            Ok([eta * rho, s / rho, v])
        }
        Edge::ScalingToBDir => {
            // (eta, u, v) -> (eta_i = s eta u, rho = s m v / u, sigc = m / v)
            let (eta, u, v) = (c1, c2, c3);
            let (s, m) = (to.s(), to.m());
            let su = check(s * u, format!("requires s*u > 0 with s = {s:+}"))?;
            let mv = check(m * v, format!("requires m*v > 0 with m = {m:+}"))?;
            Ok([eta * su, mv / su, 1.0 / mv])
        }
        Edge::BDirToScaling => {
            // (eta, rho, sigc) -> (eta2 = eta rho sigc, u = s/(rho sigc), v = m/sigc)
            let (eta, rho, sigc) = (c1, c2, c3);
            let (s, m) = (from.s(), from.m());
            let rho = check(rho, "requires rho > 0".into())?;
            let sigc = check(sigc, "requires sigc > 0".into())?;
            Ok([eta * rho * sigc, s / (rho * sigc), m / sigc])
        }
        Edge::ScalingToA2 => {
            // (eta, u, v) -> (eta_i = s eta v, u_i2 = u, rho = s / v)
            let (eta, u, v) = (c1, c2, c3);
            let s = to.s();
            let sv = check(s * v, format!("requires s*v > 0 with s = {s:+}"))?;
            Ok([eta * sv, u, 1.0 / sv])
        }
        Edge::A2ToScaling => {
            // (eta, u, rho) -> (eta2 = eta rho, u, v = s / rho)
            let (eta, u, rho) = (c1, c2, c3);
            let s = from.s();
            let rho = check(rho, "requires rho > 0".into())?;
            Ok([eta * rho, u, s / rho])
        }
        Edge::ScalingToADir => {
            // (eta, u, v) -> (eta_i = s eta v, rho = s m u / v, sigc = m / u)
            let (eta, u, v) = (c1, c2, c3);
            let (s, m) = (to.s(), to.m());
            let sv = check(s * v, format!("requires s*v > 0 with s = {s:+}"))?;
            let mu_ = check(m * u, format!("requires m*u > 0 with m = {m:+}"))?;
            Ok([eta * sv, mu_ / sv, 1.0 / mu_])
        }
        Edge::ADirToScaling => {
            // (eta, rho, sigc) -> (eta2 = eta rho sigc, u = m/sigc, v = s/(rho sigc))
            let (eta, rho, sigc) = (c1, c2, c3);
            let (s, m) = (from.s(), from.m());
            let rho = check(rho, "requires rho > 0".into())?;
            let sigc = check(sigc, "requires sigc > 0".into())?;
            Ok([eta * rho * sigc, m / sigc, s / (rho * sigc)])
        }
        Edge::B2ToBDir => {
            // (eta, v, rho) -> (eta, rho' = m v rho, sigc' = m / v)
            let (eta, v, rho) = (c1, c2, c3);
            let m = to.m();
            let mv = check(m * v, format!("requires m*v > 0 with m = {m:+}"))?;
            Ok([eta, mv * rho, 1.0 / mv])
        }
        Edge::BDirToB2 => {
            // (eta, rho, sigc) -> (eta, v = m/sigc, rho' = rho sigc)
            let (eta, rho, sigc) = (c1, c2, c3);
            let m = from.m();
            let sigc = check(sigc, "requires sigc > 0".into())?;
            Ok([eta, m / sigc, rho * sigc])
        }
        Edge::A2ToADir => {
            // (eta, u, rho) -> (eta, rho' = m u rho, sigc' = m / u)
            let (eta, u, rho) = (c1, c2, c3);
            let m = to.m();
            let mu_ = check(m * u, format!("requires m*u > 0 with m = {m:+}"))?;
            Ok([eta, mu_ * rho, 1.0 / mu_])
        }
        Edge::ADirToA2 => {
            // (eta, rho, sigc) -> (eta, u = m/sigc, rho' = rho sigc)
            let (eta, rho, sigc) = (c1, c2, c3);
            let m = from.m();
            let sigc = check(sigc, "requires sigc > 0".into())?;
            Ok([eta, m / sigc, rho * sigc])
        }
        Edge::Corner => {
            // K_ij <-> K_ji across the sphere-cylinder corner:
            // (eta, rho, sigc) -> (eta rho, 1/rho, rho sigc)
            let (eta, rho, sigc) = (c1, c2, c3);
            let rho = check(rho, "requires rho > 0".into())?;
            Ok([eta * rho, 1.0 / rho, rho * sigc])
        }
    }
}

/// Change coordinates to `target`, routing through intermediate charts when
/// no single displayed map applies. Fails with the violated sign condition
/// when the point does not lie in the overlap.
pub fn change_chart(cp: &ChartPoint, target: ChartId) -> Result<ChartPoint> {
    if cp.chart == target {
        return Ok(*cp);
    }
    // Try the direct map first so that out-of-overlap errors report the
    // violated condition of the requested pair.
    let mut direct_err: Option<Error> = None;
    if let Some(edge) = edge_between(cp.chart, target) {
        match apply_edge(edge, cp, target) {
            Ok(coords) => return ChartPoint::new(target, cp.r_a, cp.r_b, coords, cp.mu),
            Err(e) => direct_err = Some(e),
        }
    }
    // Breadth-first over the supported chart changes; at most two
    // intermediate charts are ever needed.
    let mut visited = [false; 13];
    let idx = |c: ChartId| ChartId::ALL.iter().position(|&x| x == c).unwrap();
    visited[idx(cp.chart)] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(*cp);
    while let Some(point) = queue.pop_front() {
        for &next in point.chart.neighbors() {
            if visited[idx(next)] {
                continue;
            }
            let Some(edge) = edge_between(point.chart, next) else {
                continue;
            };
            if let Ok(coords) = apply_edge(edge, &point, next) {
                let moved = ChartPoint::new(next, point.r_a, point.r_b, coords, point.mu)?;
                if next == target {
                    return Ok(moved);
                }
                visited[idx(next)] = true;
                queue.push_back(moved);
            }
        }
    }
    Err(direct_err.unwrap_or_else(|| {
        overlap_err(
            cp.chart,
            target,
            "no chart-change route covers this point".into(),
        )
    }))
}

/// Relative blow-down mismatch after moving `cp` into `target`:
/// the commutation defect of `blow_down` with the chart change.
pub fn blow_down_commutation_error(cp: &ChartPoint, target: ChartId) -> Result<f64> {
    let before = blow_down(cp);
    let after = blow_down(&change_chart(cp, target)?);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    Ok(rel(before.p_a, after.p_a)
        .max(rel(before.p_b, after.p_b))
        .max(if before.sigma == 0.0 && after.sigma == 0.0 {
            0.0
        } else {
            rel(before.sigma, after.sigma)
        }))
}

/// Worst absolute mismatch between the pushforward of the source field
/// under the chart change (finite-difference Jacobian, central step
/// `1e-6 max(1, |x|)`) and the target field at the image point.
pub fn field_pushforward_error(cp: &ChartPoint, target: ChartId, p: &ModelParams) -> Result<f64> {
    let moved = change_chart(cp, target)?;
    let f_src = chart_vector_field(cp, p);
    let f_dst = chart_vector_field(&moved, p);
    let y0 = [cp.r_a, cp.r_b, cp.coords[0], cp.coords[1], cp.coords[2]];
    let map = |y: [f64; 5]| -> Result<[f64; 5]> {
        let q = ChartPoint::new(cp.chart, y[0], y[1], [y[2], y[3], y[4]], cp.mu)?;
        let out = change_chart(&q, target)?;
        Ok([out.r_a, out.r_b, out.coords[0], out.coords[1], out.coords[2]])
    };
    let radial = cp.chart.radial_mask();
    let mut push = [0.0; 5];
    for col in 0..5 {
        let h = 1e-6 * y0[col].abs().max(1.0);
        let boundary = col >= 2 && radial[col - 2] && y0[col] - h < 0.0;
        if boundary {
            // Second-order one-sided stencil keeps radial coordinates
            // nonnegative near the blow-up locus.
            let f0 = map(y0)?;
            let mut y1 = y0;
            let mut y2 = y0;
            y1[col] += h;
            y2[col] += 2.0 * h;
            let f1 = map(y1)?;
            let f2 = map(y2)?;
            for row in 0..5 {
                let d = (-3.0 * f0[row] + 4.0 * f1[row] - f2[row]) / (2.0 * h);
                push[row] += d * f_src[col];
            }
        } else {
            let mut yp = y0;
            let mut ym = y0;
            yp[col] += h;
            ym[col] -= h;
            let fp = map(yp)?;
            let fm = map(ym)?;
            for row in 0..5 {
                push[row] += (fp[row] - fm[row]) / (2.0 * h) * f_src[col];
            }
        }
    }
    Ok((0..5)
        .map(|row| (push[row] - f_dst[row]).abs())
        .fold(0.0, f64::max))
}

/// Worst deviation of the finite-difference layer Jacobian (in `(r_a, r_b)`
/// at the slaved point) from `diag(-1, -gamma)`.
pub fn layer_eigenvalue_fd_error(chart: ChartId, coords: [f64; 3], p: &ModelParams) -> Result<f64> {
    let probe = ChartPoint::new(chart, 0.0, 0.0, coords, 0.0)?;
    let (ra_s, rb_s) = critical_slaving(&probe, p);
    let mk = |ra: f64, rb: f64| ChartPoint::new(chart, ra, rb, coords, 0.0).expect("valid point");
    let h = 1e-6;
    let d = |i: usize, dra: f64, drb: f64| {
        (chart_vector_field(&mk(ra_s + dra * h, rb_s + drb * h), p)[i]
            - chart_vector_field(&mk(ra_s - dra * h, rb_s - drb * h), p)[i])
            / (2.0 * h)
    };
    let faa = d(0, 1.0, 0.0);
    let fab = d(0, 0.0, 1.0);
    let fba = d(1, 1.0, 0.0);
    let fbb = d(1, 0.0, 1.0);
    Ok((faa + 1.0)
        .abs()
        .max((fbb + p.gamma).abs())
        .max(fab.abs())
        .max(fba.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testrng::SplitMix64;

    fn params() -> ModelParams {
        ModelParams::new(2.0, 3.0, 1.3536, 2.3536, 1e-2, 5e-3).unwrap()
    }

    fn point(chart: ChartId, coords: [f64; 3], mu: f64) -> ChartPoint {
        ChartPoint::new(chart, 0.3, 0.2, coords, mu).unwrap()
    }

    /// Random point of a chart with all sign-relevant coordinates positive
    /// (the canonical overlap sector shared with K2's first quadrant).
    fn random_point(chart: ChartId, rng: &mut SplitMix64, mu: f64) -> ChartPoint {
        let c = [
            rng.in_range(0.0, 0.05),
            rng.in_range(0.2, 3.0),
            rng.in_range(0.2, 3.0),
        ];
        ChartPoint::new(chart, rng.next_f64(), rng.next_f64(), c, mu).unwrap()
    }

    #[test]
    fn blow_down_scaling_chart() {
        let bd = blow_down(&point(ChartId::K2, [0.01, 0.0, 0.0], 0.0));
        assert_eq!((bd.p_a, bd.p_b, bd.sigma), (1.0, 1.0, 0.01));

        let bd = blow_down(&point(ChartId::K2, [0.01, 5.0, -3.0], 0.0));
        assert!((bd.p_a - (0.05f64).exp()).abs() < 1e-16);
        assert!((bd.p_b - (-0.03f64).exp()).abs() < 1e-16);
        assert_eq!(bd.sigma, 0.01);
    }

    #[test]
    fn change_to_k32_matches_displayed_formula() {
        // (eta2, u2, v2) = (0.01, 2, 1) -> (eta3, rho32, v32) = (0.02, 0.5, 1)
        let k2 = point(ChartId::K2, [0.01, 2.0, 1.0], 0.0);
        let k32 = change_chart(&k2, ChartId::K32).unwrap();
        // K32 stores (eta, v, rho).
        assert!((k32.coords[0] - 0.02).abs() < 1e-16);
        assert!((k32.coords[1] - 1.0).abs() < 1e-16);
        assert!((k32.coords[2] - 0.5).abs() < 1e-16);
    }

    #[test]
    fn change_to_k15_matches_displayed_formula() {
        // (eta2, u2, v2) = (0.01, -2, 3) -> (eta1, rho15, sig15) = (0.02, 1.5, 1/3)
        let k2 = point(ChartId::K2, [0.01, -2.0, 3.0], 0.0);
        let k15 = change_chart(&k2, ChartId::K15).unwrap();
        assert!((k15.coords[0] - 0.02).abs() < 1e-16);
        assert!((k15.coords[1] - 1.5).abs() < 1e-15);
        assert!((k15.coords[2] - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn blow_down_commutes_with_chart_changes() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..50 {
            let k2 = ChartPoint::new(
                ChartId::K2,
                rng.next_f64(),
                rng.next_f64(),
                [rng.in_range(0.0, 0.05), rng.in_range(0.2, 3.0), rng.in_range(0.2, 3.0)],
                rng.in_range(0.0, 0.5),
            )
            .unwrap();
            let before = blow_down(&k2);
            for target in [ChartId::K32, ChartId::K35, ChartId::K52, ChartId::K53] {
                let moved = change_chart(&k2, target).unwrap();
                let after = blow_down(&moved);
                assert!(
                    (after.p_a - before.p_a).abs() <= 1e-13 * before.p_a.abs(),
                    "{target}: p_a {} vs {}",
                    after.p_a,
                    before.p_a
                );
                assert!((after.p_b - before.p_b).abs() <= 1e-13 * before.p_b.abs());
                assert!((after.sigma - before.sigma).abs() <= 1e-13 * before.sigma.abs().max(1e-30));
            }
        }
    }

    #[test]
    fn chart_change_round_trip_is_identity() {
        let mut rng = SplitMix64::new(7);
        // Every supported directed edge, exercised from the chart's own
        // positive sector and composed with its inverse.
        for &chart in &ChartId::ALL {
            for &next in chart.neighbors() {
                for _ in 0..100 {
                    let cp = random_point(chart, &mut rng, 0.1);
                    let Ok(moved) = change_chart(&cp, next) else {
                        continue;
                    };
                    let back = change_chart(&moved, chart).unwrap();
                    for k in 0..3 {
                        let scale = cp.coords[k].abs().max(1e-30);
                        assert!(
                            (back.coords[k] - cp.coords[k]).abs() <= 1e-14 * scale,
                            "{chart}->{next}: coord {k}: {} vs {}",
                            back.coords[k],
                            cp.coords[k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn out_of_overlap_names_the_condition() {
        let k2 = point(ChartId::K2, [0.01, -2.0, 1.0], 0.0);
        // K32 needs s*u > 0 with s = +1, but u = -2.
        let err = change_chart(&k2, ChartId::K32).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s*u > 0"), "unexpected message: {msg}");

        // Disjoint charts: K14 covers p_a < 1, p_b < 1; K53 covers p_a > 1, p_b > 1.
        let k14 = point(ChartId::K14, [0.3, 0.4, 0.2], 0.0);
        assert!(change_chart(&k14, ChartId::K53).is_err());
    }

    #[test]
    fn corner_route_works_on_the_blow_up_locus() {
        // sigma = 0 points are outside K2's domain but the corner map still
        // connects the two directional charts.
        let k14 = point(ChartId::K14, [0.3, 0.4, 0.0], 0.0);
        let k41 = change_chart(&k14, ChartId::K41).unwrap();
        assert_eq!(k41.chart, ChartId::K41);
        let bd_a = blow_down(&k14);
        let bd_b = blow_down(&k41);
        assert!((bd_a.p_a - bd_b.p_a).abs() < 1e-15);
        assert!((bd_a.p_b - bd_b.p_b).abs() < 1e-15);
        assert_eq!(bd_a.sigma, 0.0);
        assert_eq!(bd_b.sigma, 0.0);
    }

    #[test]
    fn k2_field_layer_structure_at_mu_zero() {
        let p = params();
        let cp = point(ChartId::K2, [0.02, 0.7, -0.4], 0.0);
        let f = chart_vector_field(&cp, &p);
        assert_eq!(&f[2..], &[0.0, 0.0, 0.0]);
        // (r_a, r_b) rates vanish exactly at the slaved values.
        let (ra_s, rb_s) = critical_slaving(&cp, &p);
        let on = ChartPoint::new(ChartId::K2, ra_s, rb_s, cp.coords, 0.0).unwrap();
        let f_on = chart_vector_field(&on, &p);
        assert!(f_on[0].abs() < 1e-16 && f_on[1].abs() < 1e-16);
        // And not at other values.
        assert!(f[0].abs() > 1e-3 || f[1].abs() > 1e-3);
    }

    #[test]
    fn k12_smooth_extension_at_rho_zero() {
        let p = params();
        // K12 stores (eta, v, rho); rho = 0 uses lim phi(s/rho) = 0 (s = -1),
        // so r_b' = 1 - gamma r_b.
        let cp = point(ChartId::K12, [0.3, 0.5, 0.0], 0.2);
        let f = chart_vector_field(&cp, &p);
        assert_eq!(f[1], 1.0 - p.gamma * cp.r_b);
        // The field converges to its rho = 0 value; the phi-limit in the
        // r_b component does so flatly (faster than any power of rho).
        let mut prev_total = f64::INFINITY;
        let mut phi_part = f64::INFINITY;
        for k in 4..=8 {
            let rho = 10f64.powi(-k);
            let nearby = point(ChartId::K12, [0.3, 0.5, rho], 0.2);
            let f_near = chart_vector_field(&nearby, &p);
            let total: f64 = (0..5).map(|i| (f_near[i] - f[i]).abs()).sum();
            assert!(total <= prev_total);
            prev_total = total;
            phi_part = (f_near[1] - f[1]).abs();
        }
        assert!(phi_part < 1e-300, "phi limit not flat: {phi_part:.3e}");
        assert!(prev_total < 1e-7);
    }

    #[test]
    fn pushforward_of_k2_field_matches_k35_field() {
        let p = params();
        let cp = point(ChartId::K2, [0.02, 1.3, 0.8], 0.3);
        let target = ChartId::K35;
        let moved = change_chart(&cp, target).unwrap();
        let f_src = chart_vector_field(&cp, &p);
        let f_dst = chart_vector_field(&moved, &p);

        // Finite-difference Jacobian of the full 5D map (identity in r_a, r_b).
        let full_map = |y: [f64; 5]| -> [f64; 5] {
            let q = ChartPoint::new(cp.chart, y[0], y[1], [y[2], y[3], y[4]], cp.mu).unwrap();
            let out = change_chart(&q, target).unwrap();
            [out.r_a, out.r_b, out.coords[0], out.coords[1], out.coords[2]]
        };
        let y0 = [cp.r_a, cp.r_b, cp.coords[0], cp.coords[1], cp.coords[2]];
        let mut push = [0.0; 5];
        for col in 0..5 {
            let h = 1e-6 * y0[col].abs().max(1.0);
            let mut yp = y0;
            let mut ym = y0;
            yp[col] += h;
            ym[col] -= h;
            let fp = full_map(yp);
            let fm = full_map(ym);
            for row in 0..5 {
                push[row] += (fp[row] - fm[row]) / (2.0 * h) * f_src[col];
            }
        }
        for row in 0..5 {
            assert!(
                (push[row] - f_dst[row]).abs() < 1e-10,
                "row {row}: {} vs {}",
                push[row],
                f_dst[row]
            );
        }
    }

    #[test]
    fn chart_fields_push_down_to_the_extended_system() {
        // d(blow_down) . chart field = extended field at the image, for
        // interior points (sigma > 0) of every chart.
        let p = params();
        let mut rng = SplitMix64::new(99);
        for &chart in &ChartId::ALL {
            for _ in 0..10 {
                let cp = {
                    let mut q = random_point(chart, &mut rng, 0.4);
                    q.coords[0] = q.coords[0].max(1e-3);
                    q
                };
                let f_chart = chart_vector_field(&cp, &p);
                let bd = blow_down(&cp);
                if bd.sigma <= 1e-12 {
                    continue;
                }
                let f_ext =
                    extended_vector_field(&[bd.r_a, bd.r_b, bd.p_a, bd.p_b, bd.sigma], cp.mu, &p)
                        .unwrap();
                let map = |y: [f64; 5]| -> [f64; 5] {
                    let q = ChartPoint::new(chart, y[0], y[1], [y[2], y[3], y[4]], cp.mu).unwrap();
                    let b = blow_down(&q);
                    [b.r_a, b.r_b, b.p_a, b.p_b, b.sigma]
                };
                let y0 = [cp.r_a, cp.r_b, cp.coords[0], cp.coords[1], cp.coords[2]];
                let mut push = [0.0; 5];
                for col in 0..5 {
                    let h = 1e-6 * y0[col].abs().max(1e-2);
                    let mut yp = y0;
                    let mut ym = y0;
                    yp[col] += h;
                    ym[col] -= h;
                    // Radial coordinates must stay nonnegative for the map.
                    if ym[col] < 0.0 {
                        ym[col] = 0.0;
                    }
                    let fp = map(yp);
                    let fm = map(ym);
                    for row in 0..5 {
                        push[row] += (fp[row] - fm[row]) / (yp[col] - ym[col]) * f_chart[col];
                    }
                }
                for row in 0..5 {
                    let scale = f_ext[row].abs().max(1.0);
                    assert!(
                        (push[row] - f_ext[row]).abs() < 1e-6 * scale,
                        "{chart} row {row}: {} vs {}",
                        push[row],
                        f_ext[row]
                    );
                }
            }
        }
    }

    #[test]
    fn eigenvalues_on_and_off_manifold() {
        let p = params();
        let cp = point(ChartId::K2, [0.01, 0.4, -0.2], 0.0);
        let (ra_s, rb_s) = critical_slaving(&cp, &p);
        let on = ChartPoint::new(ChartId::K2, ra_s, rb_s, cp.coords, 0.0).unwrap();
        assert_eq!(critical_manifold_eigenvalues(&on, &p).unwrap(), [-1.0, -2.0]);

        let gamma_one = ModelParams::new(1.0, 3.0, 1.3536, 2.3536, 1e-2, 0.0).unwrap();
        let (ra1, rb1) = critical_slaving(&cp, &gamma_one);
        let on1 = ChartPoint::new(ChartId::K2, ra1, rb1, cp.coords, 0.0).unwrap();
        assert_eq!(
            critical_manifold_eigenvalues(&on1, &gamma_one).unwrap(),
            [-1.0, -1.0]
        );

        let off = ChartPoint::new(ChartId::K2, ra_s + 1e-3, rb_s, cp.coords, 0.0).unwrap();
        assert!(matches!(
            critical_manifold_eigenvalues(&off, &p),
            Err(Error::OffManifold { .. })
        ));
        let mu_pos = ChartPoint::new(ChartId::K2, ra_s, rb_s, cp.coords, 0.1).unwrap();
        assert!(critical_manifold_eigenvalues(&mu_pos, &p).is_err());
    }

    #[test]
    fn layer_jacobian_confirms_eigenvalues_by_finite_differences() {
        let p = params();
        for &chart in &ChartId::ALL {
            let coords = [0.02, 0.9, 0.7];
            let probe = ChartPoint::new(chart, 0.0, 0.0, coords, 0.0).unwrap();
            let (ra_s, rb_s) = critical_slaving(&probe, &p);
            let mk = |ra: f64, rb: f64| ChartPoint::new(chart, ra, rb, coords, 0.0).unwrap();
            let h = 1e-6;
            // d(r_a')/d(r_a), d(r_b')/d(r_b) via central differences; the
            // off-diagonal terms vanish identically.
            let faa = (chart_vector_field(&mk(ra_s + h, rb_s), &p)[0]
                - chart_vector_field(&mk(ra_s - h, rb_s), &p)[0])
                / (2.0 * h);
            let fbb = (chart_vector_field(&mk(ra_s, rb_s + h), &p)[1]
                - chart_vector_field(&mk(ra_s, rb_s - h), &p)[1])
                / (2.0 * h);
            let fab = (chart_vector_field(&mk(ra_s, rb_s + h), &p)[0]
                - chart_vector_field(&mk(ra_s, rb_s - h), &p)[0])
                / (2.0 * h);
            let fba = (chart_vector_field(&mk(ra_s + h, rb_s), &p)[1]
                - chart_vector_field(&mk(ra_s - h, rb_s), &p)[1])
                / (2.0 * h);
            assert!((faa + 1.0).abs() < 1e-7, "{chart}: faa = {faa}");
            assert!((fbb + p.gamma).abs() < 1e-7, "{chart}: fbb = {fbb}");
            assert!(fab.abs() < 1e-9 && fba.abs() < 1e-9);
        }
    }

    #[test]
    fn chart_coordinate_rates_vanish_at_mu_zero_in_all_charts() {
        let p = params();
        let mut rng = SplitMix64::new(0x100);
        for &chart in &ChartId::ALL {
            for _ in 0..5 {
                let cp = random_point(chart, &mut rng, 0.0);
                let f = chart_vector_field(&cp, &p);
                assert_eq!(&f[2..], &[0.0, 0.0, 0.0], "{chart}: layer structure");
            }
        }
    }

    #[test]
    fn chart_point_validation() {
        assert!(ChartPoint::new(ChartId::K2, 0.1, 0.1, [-0.01, 1.0, 1.0], 0.0).is_err());
        assert!(ChartPoint::new(ChartId::K14, 0.1, 0.1, [0.01, -1.0, 1.0], 0.0).is_err());
        assert!(ChartPoint::new(ChartId::K2, 0.1, 0.1, [0.01, 1.0, 1.0], -0.5).is_err());
        assert!(ChartPoint::new(ChartId::K2, f64::NAN, 0.1, [0.01, 1.0, 1.0], 0.0).is_err());
        // u and v of K2 may be negative.
        assert!(ChartPoint::new(ChartId::K2, 0.1, 0.1, [0.01, -5.0, -3.0], 0.0).is_ok());
    }
}
