//! Pointwise kinematics of the perturbed curve.
//!
//! The curve is Phi(x) = Psi(x, rho(x), mu) with mu frozen per evaluation
//! (the projection pr is locally constant where tau* is supported, so mu
//! carries no x-derivative). Two evaluation routes coexist:
//!
//! * the printed formulas for J, N, kappa, a, b in terms of the Psi jets,
//!   used for the boundary operators and as one side of the two-formula
//!   agreement checks;
//! * total x-derivatives of Phi up to fourth order (Leibniz on
//!   rho(x) N*(x)), from which kappa, its first two arc-length derivatives
//!   and the surface Laplacian of kappa follow pointwise. This is the
//!   route the evolution operator uses: it needs one pass of D1..D4 over
//!   rho and stays O(h^2) up to the boundary nodes, where composing
//!   one-sided first-derivative stencils would not.

use crate::error::{LensError, Result};
use crate::geometry::{
    arc_derivative, normal_derivative, rot, tau_derivative, CutoffProfile, LensParams, PsiJet,
    Vec2, DEGENERACY_EPS,
};
use crate::grid::{DiffOps, Field};

/// State of one node: arc-length coordinate, rho and its first two
/// derivatives, and the frozen nonlocal value mu = cot(theta) rho(pr x).
#[derive(Debug, Clone, Copy)]
pub struct PointState {
    pub x: f64,
    pub rho: f64,
    pub rho_x: f64,
    pub rho_xx: f64,
    pub mu: f64,
}

/// J = |Phi_sigma| per the metric formula
/// sqrt(|Psi_sigma|^2 + 2 <Psi_sigma, Psi_w> rho_x + |Psi_w|^2 rho_x^2).
pub fn metric_j(state: &PointState, psi: &PsiJet) -> Result<f64> {
    let j2 = psi.psi_sigma.norm_squared()
        + 2.0 * psi.psi_sigma.dot(&psi.psi_w) * state.rho_x
        + psi.psi_w.norm_squared() * state.rho_x * state.rho_x;
    if j2 <= DEGENERACY_EPS * DEGENERACY_EPS {
        return Err(LensError::DegenerateParametrization {
            what: "J",
            value: j2.max(0.0).sqrt(),
            x: state.x,
        });
    }
    Ok(j2.sqrt())
}

/// Unit normal N = (R Psi_sigma + R Psi_w rho_x) / J.
pub fn unit_normal(state: &PointState, psi: &PsiJet) -> Result<Vec2> {
    let j = metric_j(state, psi)?;
    Ok((rot(psi.psi_sigma) + rot(psi.psi_w) * state.rho_x) / j)
}

/// Curvature by the expanded bracket, exactly as printed: terms in
/// rho_xx, rho_x, rho_x^2, rho_x^3 plus the inhomogeneous part.
pub fn curvature(state: &PointState, psi: &PsiJet) -> Result<f64> {
    let j = metric_j(state, psi)?;
    let rx = state.rho_x;
    let bracket = psi.psi_w.dot(&rot(psi.psi_sigma)) * state.rho_xx
        + (2.0 * psi.psi_sigma_w.dot(&rot(psi.psi_sigma))
            + psi.psi_sigma_sigma.dot(&rot(psi.psi_w)))
            * rx
        + (psi.psi_ww.dot(&rot(psi.psi_sigma))
            + 2.0 * psi.psi_sigma_w.dot(&rot(psi.psi_w))
            + psi.psi_ww.dot(&rot(psi.psi_w)) * rx)
            * rx
            * rx
        + psi.psi_sigma_sigma.dot(&rot(psi.psi_sigma));
    Ok(bracket / (j * j * j))
}

/// Curvature by the compact form <Phi_sigma_sigma, R Phi_sigma> / J^3,
/// assembled by direct vector algebra. Agrees with [`curvature`] to
/// roundoff; kept as the independent route.
pub fn curvature_compact(state: &PointState, psi: &PsiJet) -> Result<f64> {
    let j = metric_j(state, psi)?;
    let phi_s = psi.psi_sigma + psi.psi_w * state.rho_x;
    let phi_ss = psi.psi_sigma_sigma
        + 2.0 * psi.psi_sigma_w * state.rho_x
        + psi.psi_ww * state.rho_x * state.rho_x
        + psi.psi_w * state.rho_xx;
    Ok(phi_ss.dot(&rot(phi_s)) / (j * j * j))
}

fn coupling_denominator(state: &PointState, psi: &PsiJet) -> Result<f64> {
    let den = psi.psi_w.dot(&rot(psi.psi_sigma));
    if den.abs() < DEGENERACY_EPS {
        return Err(LensError::DegenerateParametrization {
            what: "<Psi_w, R Psi_sigma>",
            value: den,
            x: state.x,
        });
    }
    Ok(den)
}

/// a = J / <Psi_w, R Psi_sigma>; equals 1 at rho == 0.
pub fn coeff_a(state: &PointState, psi: &PsiJet) -> Result<f64> {
    Ok(metric_j(state, psi)? / coupling_denominator(state, psi)?)
}

/// b = -(<Psi_r, R Psi_sigma> + <Psi_r, R Psi_w> rho_x) / <Psi_w, R Psi_sigma>;
/// vanishes wherever tau* does.
pub fn coeff_b(state: &PointState, psi: &PsiJet) -> Result<f64> {
    let den = coupling_denominator(state, psi)?;
    Ok(-(psi.psi_r.dot(&rot(psi.psi_sigma)) + psi.psi_r.dot(&rot(psi.psi_w)) * state.rho_x) / den)
}

/// Discrete surface Laplacian (1/J) d/dx ((1/J) d/dx v) by composed D1.
pub fn laplace_beltrami(v: &Field, j: &Field, ops: &DiffOps) -> Field {
    let inner = ops.apply(1, v).component_div(j);
    ops.apply(1, &inner).component_div(j)
}

/// Total derivatives Phi^(0..4) of the curve at one node, mu frozen.
#[derive(Debug, Clone, Copy)]
pub struct CurveJets {
    pub d: [Vec2; 5],
}

/// Leibniz assembly: Phi^(k) = Phi*^(k) + mu tau*^(k) + sum_j C(k,j) rho^(j) N*^(k-j).
pub fn curve_jets(
    params: &LensParams,
    cutoff: &CutoffProfile,
    x: f64,
    rho_jet: &[f64; 5],
    mu: f64,
) -> CurveJets {
    const C: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut d = [Vec2::zeros(); 5];
    for (k, dk) in d.iter_mut().enumerate() {
        let mut v = arc_derivative(params, x, k) + mu * tau_derivative(params, cutoff, x, k);
        for j in 0..=k {
            v += C[k][j] * rho_jet[j] * normal_derivative(params, x, k - j);
        }
        *dk = v;
    }
    CurveJets { d }
}

/// Curvature, its first two x-derivatives, the metric and the surface
/// Laplacian of curvature, all as pointwise functions of the curve jets.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureJet {
    pub j: f64,
    pub j_x: f64,
    pub kappa: f64,
    pub kappa_x: f64,
    pub kappa_xx: f64,
    pub lap_kappa: f64,
}

pub fn curvature_jet(x: f64, jets: &CurveJets) -> Result<CurvatureJet> {
    let [_, p1, p2, p3, p4] = jets.d;
    let j2 = p1.norm_squared();
    if j2 <= DEGENERACY_EPS * DEGENERACY_EPS {
        return Err(LensError::DegenerateParametrization {
            what: "J",
            value: j2.max(0.0).sqrt(),
            x,
        });
    }
    let j = j2.sqrt();
    let j_x = p1.dot(&p2) / j;
    let j_xx = (p2.norm_squared() + p1.dot(&p3) - j_x * j_x) / j;
    // S = <Phi'', R Phi'>; S' drops <Phi'', R Phi''> = 0
    let s = p2.dot(&rot(p1));
    let s_x = p3.dot(&rot(p1));
    let s_xx = p4.dot(&rot(p1)) + p3.dot(&rot(p2));
    let j3 = j * j * j;
    let j4 = j3 * j;
    let j5 = j4 * j;
    let kappa = s / j3;
    let kappa_x = s_x / j3 - 3.0 * s * j_x / j4;
    let kappa_xx =
        s_xx / j3 - 6.0 * s_x * j_x / j4 - 3.0 * s * j_xx / j4 + 12.0 * s * j_x * j_x / j5;
    let lap_kappa = kappa_xx / j2 - j_x * kappa_x / j3;
    Ok(CurvatureJet {
        j,
        j_x,
        kappa,
        kappa_x,
        kappa_xx,
        lap_kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::psi_jet;
    use crate::grid::{build_diff_ops, sup_norm, Grid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn setup() -> (LensParams, CutoffProfile) {
        let p = LensParams::new(PI / 3.0, 1.0).unwrap();
        let c = CutoffProfile::default_for(&p);
        (p, c)
    }

    fn state_at(p: &LensParams, c: &CutoffProfile, x: f64, rho: f64, rho_x: f64, rho_xx: f64, mu: f64) -> (PointState, PsiJet) {
        let st = PointState { x, rho, rho_x, rho_xx, mu };
        let psi = psi_jet(p, c, x, rho, mu).unwrap();
        (st, psi)
    }

    #[test]
    fn reference_values_at_zero_perturbation() {
        let (p, c) = setup();
        for &x in &[-p.l_star, -0.4, 0.0, 0.7, p.l_star] {
            let (st, psi) = state_at(&p, &c, x, 0.0, 0.0, 0.0, 0.0);
            assert!((metric_j(&st, &psi).unwrap() - 1.0).abs() < 1e-14);
            let n = unit_normal(&st, &psi).unwrap();
            assert!((n - normal_derivative(&p, x, 0)).norm() < 1e-14);
            assert!((curvature(&st, &psi).unwrap() - p.kappa_star).abs() < 1e-13);
            assert!((coeff_a(&st, &psi).unwrap() - 1.0).abs() < 1e-14);
        }
        // b vanishes on the interior where tau* = 0
        let (st, psi) = state_at(&p, &c, 0.3 * p.l_star, 0.01, 0.02, 0.1, 0.005);
        assert_eq!(coeff_b(&st, &psi).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_metric() {
        let (p, c) = setup();
        let cv = 0.05;
        let (st, psi) = state_at(&p, &c, 0.2, cv, 0.0, 0.0, 0.0);
        // interior: J = |T* + c N*'| = 1 + c/r* = 1 - c kappa*
        assert!((metric_j(&st, &psi).unwrap() - (1.0 - cv * p.kappa_star)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn two_curvature_routes_agree(
            xfrac in -0.99f64..0.99,
            rho in -0.2f64..0.2,
            rho_x in -0.5f64..0.5,
            rho_xx in -2.0f64..2.0,
            mu in -0.2f64..0.2,
        ) {
            let (p, c) = setup();
            let (st, psi) = state_at(&p, &c, xfrac * p.l_star, rho, rho_x, rho_xx, mu);
            let a = curvature(&st, &psi).unwrap();
            let b = curvature_compact(&st, &psi).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn normal_is_unit(
            xfrac in -0.99f64..0.99,
            rho in -0.2f64..0.2,
            rho_x in -0.5f64..0.5,
            mu in -0.2f64..0.2,
        ) {
            let (p, c) = setup();
            let (st, psi) = state_at(&p, &c, xfrac * p.l_star, rho, rho_x, 0.0, mu);
            let n = unit_normal(&st, &psi).unwrap();
            prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_against_direct_norm() {
        let (p, c) = setup();
        let (st, psi) = state_at(&p, &c, 0.8 * p.l_star, 0.08, -0.3, 0.5, 0.04);
        let direct = (psi.psi_sigma + psi.psi_w * st.rho_x).norm();
        assert!((metric_j(&st, &psi).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn reflection_symmetry_of_fields() {
        let (p, c) = setup();
        let grid = Grid::new(101, p.l_star).unwrap();
        let ops = build_diff_ops(&grid);
        // even rho => symmetric kappa and J fields
        let rho = grid.field_from_fn(|x| 0.02 * (PI * x / (2.0 * p.l_star)).cos());
        let d = ops.derivative_fields(&rho);
        let ct = p.cot_theta();
        let n = grid.n;
        let mut kap = vec![0.0; n];
        let mut jf = vec![0.0; n];
        for i in 0..n {
            let x = grid.nodes[i];
            let mu = ct * if x >= 0.0 { rho[n - 1] } else { rho[0] };
            let (st, psi) = state_at(&p, &c, x, rho[i], d[0][i], d[1][i], mu);
            kap[i] = curvature(&st, &psi).unwrap();
            jf[i] = metric_j(&st, &psi).unwrap();
        }
        for i in 0..n {
            assert!((kap[i] - kap[n - 1 - i]).abs() < 1e-12);
            assert!((jf[i] - jf[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_beltrami_flat_metric() {
        let (p, _) = setup();
        let grid = Grid::new(201, p.l_star).unwrap();
        let ops = build_diff_ops(&grid);
        let ones = grid.field_from_fn(|_| 1.0);

        let v = grid.field_from_fn(|x| x * x);
        let lap = laplace_beltrami(&v, &ones, &ops);
        for i in 2..grid.n - 2 {
            assert!((lap[i] - 2.0).abs() < 1e-8);
        }

        let kap = p.kappa_star;
        let v = grid.field_from_fn(|x| (kap * x).sin());
        let lap = laplace_beltrami(&v, &ones, &ops);
        let exact = grid.field_from_fn(|x| -kap * kap * (kap * x).sin());
        let err: f64 = (2..grid.n - 2)
            .map(|i| (lap[i] - exact[i]).abs())
            .fold(0.0, f64::max);
        assert!(err < 20.0 * grid.h * grid.h, "interior O(h^2): {err}");

        let v = grid.field_from_fn(|_| 4.2);
        assert!(sup_norm(&laplace_beltrami(&v, &ones, &ops)) < 1e-9);
    }

    #[test]
    fn curve_jets_reduce_to_reference() {
        let (p, c) = setup();
        let jets = curve_jets(&p, &c, 0.37, &[0.0; 5], 0.0);
        for k in 0..5 {
            assert!((jets.d[k] - arc_derivative(&p, 0.37, k)).norm() < 1e-15);
        }
        let cj = curvature_jet(0.37, &jets).unwrap();
        assert!((cj.kappa - p.kappa_star).abs() < 1e-14);
        assert!(cj.kappa_x.abs() < 1e-13);
        assert!(cj.kappa_xx.abs() < 1e-13);
        assert!(cj.lap_kappa.abs() < 1e-13);
    }

    #[test]
    fn curvature_jet_derivatives_match_finite_differences() {
        // analytic test profile rho(x) = A sin(3x) + B: all jets exact
        let (p, c) = setup();
        let (aa, bb) = (0.03, 0.01);
        let mu = 0.02;
        let jet_at = |x: f64| {
            let rj = [
                aa * (3.0 * x).sin() + bb,
                3.0 * aa * (3.0 * x).cos(),
                -9.0 * aa * (3.0 * x).sin(),
                -27.0 * aa * (3.0 * x).cos(),
                81.0 * aa * (3.0 * x).sin(),
            ];
            curvature_jet(x, &curve_jets(&p, &c, x, &rj, mu)).unwrap()
        };
        let x0 = 0.66 * p.l_star;
        let h = 1e-5;
        let c0 = jet_at(x0);
        let cp = jet_at(x0 + h);
        let cm = jet_at(x0 - h);
        let fd_kx = (cp.kappa - cm.kappa) / (2.0 * h);
        assert!((fd_kx - c0.kappa_x).abs() < 1e-7, "{fd_kx} vs {}", c0.kappa_x);
        let fd_kxx = (cp.kappa - 2.0 * c0.kappa + cm.kappa) / (h * h);
        assert!((fd_kxx - c0.kappa_xx).abs() < 1e-4);
        let fd_jx = (cp.j - cm.j) / (2.0 * h);
        assert!((fd_jx - c0.j_x).abs() < 1e-8);
        // surface Laplacian identity (1/J)((kappa_x/J))'
        let fd_lap = (cp.kappa_x / cp.j - cm.kappa_x / cm.j) / (2.0 * h) / c0.j;
        assert!((fd_lap - c0.lap_kappa).abs() < 1e-5);
    }
}
