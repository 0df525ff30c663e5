//! Reference-arc geometry.
//!
//! The stationary curve is the circular arc
//! `Phi*(x) = (r* sin(x/r*), r* cos(x/r*) - r* cos(theta))` over the
//! arc-length interval `[-l*, l*]`, meeting the x-axis at both endpoints
//! with contact angle `theta`. Everything here is an analytic function of
//! the arc-length coordinate: the moving frame (N*, T*), the boundary
//! conormal, the cutoff tangential field tau*, the tube map Psi and its
//! jets, and the enclosed area of a perturbed curve.

use nalgebra::Vector2;

use crate::error::{LensError, Result};
use crate::grid::{Field, Grid};

pub type Vec2 = Vector2<f64>;

/// Fraction of `r*` used as the default tube radius for (w, r) offsets.
pub const TUBE_FRACTION: f64 = 0.3;

/// Degeneracy threshold for denominators of the form <Psi_w, R Psi_sigma>.
pub const DEGENERACY_EPS: f64 = 1e-8;

/// Anticlockwise rotation by pi/2.
#[inline]
pub fn rot(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Equilibrium configuration: contact angle, reference radius and the
/// derived arc half-length and curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensParams {
    pub theta: f64,
    pub r_star: f64,
    pub l_star: f64,
    pub kappa_star: f64,
}

impl LensParams {
    pub fn new(theta: f64, r_star: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) || !theta.is_finite() {
            return Err(LensError::Domain {
                what: "theta",
                value: theta,
                min: 0.0,
                max: std::f64::consts::PI,
            });
        }
        if !(r_star > 0.0) || !r_star.is_finite() {
            return Err(LensError::Domain {
                what: "r_star",
                value: r_star,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        Ok(Self {
            theta,
            r_star,
            l_star: theta * r_star,
            kappa_star: -1.0 / r_star,
        })
    }

    pub fn cot_theta(&self) -> f64 {
        1.0 / self.theta.tan()
    }

    pub fn tube_radius(&self) -> f64 {
        TUBE_FRACTION * self.r_star
    }

    fn check_x(&self, x: f64) -> Result<()> {
        // allow one-ulp slack at the endpoints for grids built from h
        let slack = 1e-12 * self.l_star.max(1.0);
        if x.abs() > self.l_star + slack {
            return Err(LensError::Domain {
                what: "x",
                value: x,
                min: -self.l_star,
                max: self.l_star,
            });
        }
        Ok(())
    }
}

/// k-th derivative (k <= 4) of the arc parametrization Phi*.
pub fn arc_derivative(params: &LensParams, x: f64, k: usize) -> Vec2 {
    let r = params.r_star;
    let u = x / r;
    let (s, c) = u.sin_cos();
    if k == 0 {
        return Vec2::new(r * s, r * c - r * params.theta.cos());
    }
    // derivatives cycle through (c,-s), (-s,-c), (-c,s), (s,c)
    let dir = match (k - 1) % 4 {
        0 => Vec2::new(c, -s),
        1 => Vec2::new(-s, -c),
        2 => Vec2::new(-c, s),
        _ => Vec2::new(s, c),
    };
    dir / r.powi(k as i32 - 1)
}

/// k-th derivative (k <= 4) of the outward unit normal N*.
pub fn normal_derivative(params: &LensParams, x: f64, k: usize) -> Vec2 {
    let r = params.r_star;
    let u = x / r;
    let (s, c) = u.sin_cos();
    let dir = match k % 4 {
        0 => Vec2::new(s, c),
        1 => Vec2::new(c, -s),
        2 => Vec2::new(-s, -c),
        _ => Vec2::new(-c, s),
    };
    dir / r.powi(k as i32)
}

/// Pointwise frame and second-order jets of the reference arc.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceJet {
    pub phi: Vec2,
    pub phi_x: Vec2,
    pub phi_xx: Vec2,
    pub normal: Vec2,
    pub normal_x: Vec2,
    pub normal_xx: Vec2,
    pub tangent: Vec2,
}

pub fn reference_jet(params: &LensParams, x: f64) -> Result<ReferenceJet> {
    params.check_x(x)?;
    Ok(ReferenceJet {
        phi: arc_derivative(params, x, 0),
        phi_x: arc_derivative(params, x, 1),
        phi_xx: arc_derivative(params, x, 2),
        normal: normal_derivative(params, x, 0),
        normal_x: normal_derivative(params, x, 1),
        normal_xx: normal_derivative(params, x, 2),
        tangent: arc_derivative(params, x, 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Minus,
    Plus,
}

impl Endpoint {
    pub fn from_coordinate(x: f64) -> Self {
        // pr(0) := +l* by convention; any consumer is cutoff-weighted there
        if x >= 0.0 {
            Endpoint::Plus
        } else {
            Endpoint::Minus
        }
    }

    pub fn coordinate(self, params: &LensParams) -> f64 {
        match self {
            Endpoint::Minus => -params.l_star,
            Endpoint::Plus => params.l_star,
        }
    }
}

/// Outer unit conormal of the arc at an endpoint. Satisfies
/// `<n, e2> = -sin(theta) = cos(pi/2 + theta)`.
pub fn conormal(params: &LensParams, end: Endpoint) -> Vec2 {
    let (s, c) = params.theta.sin_cos();
    match end {
        Endpoint::Plus => Vec2::new(c, -s),
        Endpoint::Minus => Vec2::new(-c, -s),
    }
}

/// Nearest-endpoint projection. Returns the arc-length coordinate of the
/// endpoint on the same side as `x`, with pr(0) = +l*.
pub fn pr(params: &LensParams, x: f64) -> f64 {
    Endpoint::from_coordinate(x).coordinate(params)
}

/// Cutoff profile for the tangential field: a C^6 polynomial smoothstep
/// supported on the outer band `l* - d <= |x| <= l*`.
#[derive(Debug, Clone, Copy)]
pub struct CutoffProfile {
    pub width: f64,
    l_star: f64,
}

/// Degree-13 smoothstep on [0, 1]: vanishes with six derivatives at 0 and
/// matches 1 with six vanishing derivatives at 1.
const SMOOTHSTEP: [f64; 14] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1716.0, -9009.0, 20020.0, -24024.0, 16380.0, -6006.0, 924.0,
];

impl CutoffProfile {
    pub fn new(params: &LensParams, width: f64) -> Result<Self> {
        if !(width > 0.0 && width < params.l_star) {
            return Err(LensError::Domain {
                what: "cutoff width",
                value: width,
                min: 0.0,
                max: params.l_star,
            });
        }
        Ok(Self {
            width,
            l_star: params.l_star,
        })
    }

    /// Default width d = l*/2.
    pub fn default_for(params: &LensParams) -> Self {
        Self {
            width: 0.5 * params.l_star,
            l_star: params.l_star,
        }
    }

    /// k-th derivative (k <= 4) of chi at x.
    pub fn chi(&self, x: f64, k: usize) -> f64 {
        let ax = x.abs();
        let start = self.l_star - self.width;
        if ax <= start {
            return 0.0;
        }
        let s = ((ax - start) / self.width).min(1.0);
        // differentiate the polynomial k times, then chain rule through
        // s = (|x| - (l*-d))/d with ds/dx = sign(x)/d
        let mut coeffs = SMOOTHSTEP;
        for _ in 0..k {
            let mut next = [0.0; 14];
            for (j, c) in coeffs.iter().enumerate().skip(1) {
                next[j - 1] = c * j as f64;
            }
            coeffs = next;
        }
        let mut q = 0.0;
        for &c in coeffs.iter().rev() {
            q = q * s + c;
        }
        let sign = if x >= 0.0 { 1.0 } else { -1.0 };
        q * (sign / self.width).powi(k as i32)
    }
}

const BINOMIAL: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

/// k-th derivative (k <= 4) of tau* = chi(x) sign(x) T*(x).
///
/// The normalization tau*(+-l*) = conormal comes for free: chi(+-l*) = 1
/// and sign(x) T*(x) equals the conormal at the endpoints.
pub fn tau_derivative(params: &LensParams, cutoff: &CutoffProfile, x: f64, k: usize) -> Vec2 {
    let start = params.l_star - cutoff.width;
    if x.abs() <= start {
        return Vec2::zeros();
    }
    let sign = if x >= 0.0 { 1.0 } else { -1.0 };
    let mut out = Vec2::zeros();
    for j in 0..=k {
        // T*^(m) = Phi*^(m+1)
        out += BINOMIAL[k][j] * cutoff.chi(x, j) * sign * arc_derivative(params, x, k - j + 1);
    }
    out
}

/// tau* and its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct TauJet {
    pub tau: Vec2,
    pub tau_x: Vec2,
    pub tau_xx: Vec2,
}

pub fn tau_jet(params: &LensParams, cutoff: &CutoffProfile, x: f64) -> Result<TauJet> {
    params.check_x(x)?;
    Ok(TauJet {
        tau: tau_derivative(params, cutoff, x, 0),
        tau_x: tau_derivative(params, cutoff, x, 1),
        tau_xx: tau_derivative(params, cutoff, x, 2),
    })
}

/// Jets of the tube map Psi(x, w, r) = Phi*(x) + w N*(x) + r tau*(x).
#[derive(Debug, Clone, Copy)]
pub struct PsiJet {
    pub psi: Vec2,
    pub psi_sigma: Vec2,
    pub psi_w: Vec2,
    pub psi_r: Vec2,
    pub psi_sigma_sigma: Vec2,
    pub psi_sigma_w: Vec2,
    pub psi_ww: Vec2,
}

pub fn psi_jet(params: &LensParams, cutoff: &CutoffProfile, x: f64, w: f64, r: f64) -> Result<PsiJet> {
    params.check_x(x)?;
    let tube = params.tube_radius();
    if w.abs() > tube {
        return Err(LensError::Domain {
            what: "w (normal offset)",
            value: w,
            min: -tube,
            max: tube,
        });
    }
    if r.abs() > tube {
        return Err(LensError::Domain {
            what: "r (tangential offset)",
            value: r,
            min: -tube,
            max: tube,
        });
    }
    let n0 = normal_derivative(params, x, 0);
    let n1 = normal_derivative(params, x, 1);
    let n2 = normal_derivative(params, x, 2);
    let t0 = tau_derivative(params, cutoff, x, 0);
    let t1 = tau_derivative(params, cutoff, x, 1);
    let t2 = tau_derivative(params, cutoff, x, 2);
    Ok(PsiJet {
        psi: arc_derivative(params, x, 0) + w * n0 + r * t0,
        psi_sigma: arc_derivative(params, x, 1) + w * n1 + r * t1,
        psi_w: n0,
        psi_r: t0,
        psi_sigma_sigma: arc_derivative(params, x, 2) + w * n2 + r * t2,
        psi_sigma_w: n1,
        psi_ww: Vec2::zeros(),
    })
}

/// Curve point Psi(x, rho(x), mu(pr x)) with mu = cot(theta) rho(pr x).
pub fn curve_point(
    params: &LensParams,
    cutoff: &CutoffProfile,
    x: f64,
    rho: f64,
    mu: f64,
) -> Vec2 {
    arc_derivative(params, x, 0)
        + rho * normal_derivative(params, x, 0)
        + mu * tau_derivative(params, cutoff, x, 0)
}

/// Exact area of the circular segment cut by the axis: A(r) = r^2 (theta - sin(theta) cos(theta)).
pub fn segment_area(theta: f64, r: f64) -> f64 {
    r * r * (theta - theta.sin() * theta.cos())
}

/// Signed area between the perturbed curve and the x-axis, by the shoelace
/// rule closed along the axis. The endpoints of the curve lie on the axis
/// identically (the mu = cot(theta) rho coupling is the contact condition),
/// so the closing segment contributes nothing.
pub fn enclosed_area(
    params: &LensParams,
    cutoff: &CutoffProfile,
    grid: &Grid,
    rho: &Field,
) -> Result<f64> {
    let n = grid.n;
    let ct = params.cot_theta();
    let mu_minus = ct * rho[0];
    let mu_plus = ct * rho[n - 1];
    let pts: Vec<Vec2> = (0..n)
        .map(|i| {
            let x = grid.nodes[i];
            let mu = if x >= 0.0 { mu_plus } else { mu_minus };
            curve_point(params, cutoff, x, rho[i], mu)
        })
        .collect();
    check_simple(&pts)?;
    let mut twice = 0.0;
    for i in 0..n - 1 {
        twice += pts[i].x * pts[i + 1].y - pts[i + 1].x * pts[i].y;
    }
    // orientation: the arc runs left to right above the axis, so the raw
    // shoelace value is negative for the reference configuration
    Ok(-0.5 * twice)
}

/// Reject self-intersecting polylines. Adjacent segments share a node and
/// are skipped.
fn check_simple(pts: &[Vec2]) -> Result<()> {
    let m = pts.len() - 1;
    for i in 0..m {
        for j in i + 2..m {
            if segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return Err(LensError::SelfIntersecting { seg_a: i, seg_b: j });
            }
        }
    }
    Ok(())
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let cross = |p: Vec2, q: Vec2| p.x * q.y - p.y * q.x;
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}
