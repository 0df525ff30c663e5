//! The reduced evolution system in rho alone.
//!
//! The normal-velocity law V = -Lap kappa, written through the tube
//! parametrization, gives
//!
//! ```text
//! rho_t = F(rho, rho o pr) + b(rho, rho o pr) mu_t,   mu = cot(theta) rho o pr,
//! ```
//!
//! with F = -a Lap kappa. Writing the equation at the endpoints closes the
//! boundary rate beta = F / (1 - cot(theta) b), and substituting back
//! yields the full nonlocal right-hand side. The boundary residuals are
//! the angle defect G1 = <N, e2> - cos(theta) and the no-flux defect
//! G2 = d/dx kappa at the endpoints.

use crate::error::{LensError, Result};
use crate::geometry::{psi_jet, CutoffProfile, LensParams};
use crate::grid::{DiffOps, Field, Grid};
use crate::kinematics::{
    coeff_b, curvature_jet, curve_jets, unit_normal, PointState,
};

/// Threshold on |1 - cot(theta) b| below which the nonlocal reduction is
/// declared invalid.
pub const SINGULAR_COUPLING_EPS: f64 = 1e-8;

/// Assembled right-hand side with its ingredients.
#[derive(Debug, Clone)]
pub struct RhsBundle {
    pub rhs: Field,
    pub frak_f: Field,
    pub frak_b: Field,
    pub beta_minus: f64,
    pub beta_plus: f64,
}

/// Boundary residuals of the nonlinear angle and no-flux conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcResiduals {
    pub g1_minus: f64,
    pub g1_plus: f64,
    pub g2_minus: f64,
    pub g2_plus: f64,
}

impl BcResiduals {
    pub fn max_abs(&self) -> f64 {
        self.g1_minus
            .abs()
            .max(self.g1_plus.abs())
            .max(self.g2_minus.abs())
            .max(self.g2_plus.abs())
    }
}

/// Nodewise F, b and kappa fields for a given rho.
#[derive(Debug, Clone)]
pub struct PointFields {
    pub frak_f: Field,
    pub frak_b: Field,
    pub kappa: Field,
}

/// Evaluate F = -a Lap kappa, b and kappa at every node. The nonlocal
/// argument mu = cot(theta) rho(pr x) is the frozen endpoint value on each
/// node's side; derivative fields of rho come from one D1..D4 pass.
pub fn point_fields(
    rho: &Field,
    grid: &Grid,
    ops: &DiffOps,
    params: &LensParams,
    cutoff: &CutoffProfile,
) -> Result<PointFields> {
    let n = grid.n;
    let [d1, d2, d3, d4] = ops.derivative_fields(rho);
    let ct = params.cot_theta();
    let mu_minus = ct * rho[0];
    let mu_plus = ct * rho[n - 1];
    let mut frak_f = Field::zeros(n);
    let mut frak_b = Field::zeros(n);
    let mut kappa = Field::zeros(n);
    for i in 0..n {
        let x = grid.nodes[i];
        let mu = if x >= 0.0 { mu_plus } else { mu_minus };
        let rho_jet = [rho[i], d1[i], d2[i], d3[i], d4[i]];
        let jets = curve_jets(params, cutoff, x, &rho_jet, mu);
        let cj = curvature_jet(x, &jets)?;
        let state = PointState {
            x,
            rho: rho[i],
            rho_x: d1[i],
            rho_xx: d2[i],
            mu,
        };
        let psi = psi_jet(params, cutoff, x, rho[i], mu)?;
        let den = psi.psi_w.dot(&crate::geometry::rot(psi.psi_sigma));
        if den.abs() < crate::geometry::DEGENERACY_EPS {
            return Err(LensError::DegenerateParametrization {
                what: "<Psi_w, R Psi_sigma>",
                value: den,
                x,
            });
        }
        let a = cj.j / den;
        frak_f[i] = -a * cj.lap_kappa;
        frak_b[i] = coeff_b(&state, &psi)?;
        kappa[i] = cj.kappa;
    }
    Ok(PointFields {
        frak_f,
        frak_b,
        kappa,
    })
}

/// F(rho, rho o pr) as a field.
pub fn frak_f(
    rho: &Field,
    grid: &Grid,
    ops: &DiffOps,
    params: &LensParams,
    cutoff: &CutoffProfile,
) -> Result<Field> {
    Ok(point_fields(rho, grid, ops, params, cutoff)?.frak_f)
}

fn rates_from(pf: &PointFields, n: usize, ct: f64, grid: &Grid) -> Result<(f64, f64)> {
    let mut out = [0.0; 2];
    for (slot, i) in [(0usize, 0usize), (1, n - 1)] {
        let den = 1.0 - ct * pf.frak_b[i];
        if den.abs() < SINGULAR_COUPLING_EPS {
            return Err(LensError::SingularCoupling {
                value: den,
                x: grid.nodes[i],
            });
        }
        out[slot] = pf.frak_f[i] / den;
    }
    Ok((out[0], out[1]))
}

/// Boundary evolution rates beta_- and beta_+.
pub fn boundary_rate(
    rho: &Field,
    grid: &Grid,
    ops: &DiffOps,
    params: &LensParams,
    cutoff: &CutoffProfile,
) -> Result<(f64, f64)> {
    let pf = point_fields(rho, grid, ops, params, cutoff)?;
    rates_from(&pf, grid.n, params.cot_theta(), grid)
}

/// Full nonlocal right-hand side
/// rhs = F + cot(theta) b * beta_{pr(x)}. At the endpoints this reduces
/// algebraically to beta itself.
pub fn full_rhs(
    rho: &Field,
    grid: &Grid,
    ops: &DiffOps,
    params: &LensParams,
    cutoff: &CutoffProfile,
) -> Result<RhsBundle> {
    let pf = point_fields(rho, grid, ops, params, cutoff)?;
    let ct = params.cot_theta();
    let (beta_minus, beta_plus) = rates_from(&pf, grid.n, ct, grid)?;
    let rhs = Field::from_iterator(
        grid.n,
        (0..grid.n).map(|i| {
            let beta = if grid.nodes[i] >= 0.0 {
                beta_plus
            } else {
                beta_minus
            };
            pf.frak_f[i] + ct * pf.frak_b[i] * beta
        }),
    );
    Ok(RhsBundle {
        rhs,
        frak_f: pf.frak_f,
        frak_b: pf.frak_b,
        beta_minus,
        beta_plus,
    })
}

/// G1 and G2 at both endpoints. G2 is the one-sided first derivative of
/// the discrete kappa field, consistent with the kappa used inside F.
pub fn bc_residuals(
    rho: &Field,
    grid: &Grid,
    ops: &DiffOps,
    params: &LensParams,
    cutoff: &CutoffProfile,
) -> Result<BcResiduals> {
    let pf = point_fields(rho, grid, ops, params, cutoff)?;
    bc_residuals_from(rho, &pf, grid, ops, params, cutoff)
}

/// Same, reusing already-computed point fields.
pub fn bc_residuals_from(
    rho: &Field,
    pf: &PointFields,
    grid: &Grid,
    ops: &DiffOps,
    params: &LensParams,
    cutoff: &CutoffProfile,
) -> Result<BcResiduals> {
    let n = grid.n;
    let ct = params.cot_theta();
    let d1 = ops.apply(1, rho);
    let cos_theta = params.theta.cos();
    let mut g1 = [0.0; 2];
    for (slot, i) in [(0usize, 0usize), (1, n - 1)] {
        let state = PointState {
            x: grid.nodes[i],
            rho: rho[i],
            rho_x: d1[i],
            rho_xx: 0.0,
            mu: ct * rho[i],
        };
        let psi = psi_jet(params, cutoff, grid.nodes[i], rho[i], state.mu)?;
        g1[slot] = unit_normal(&state, &psi)?.y - cos_theta;
    }
    let dk = ops.apply(1, &pf.kappa);
    Ok(BcResiduals {
        g1_minus: g1[0],
        g1_plus: g1[1],
        g2_minus: dk[0],
        g2_plus: dk[n - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_diff_ops, sup_norm, Grid};
    use crate::manifold::solve_rho;
    use std::f64::consts::PI;

    fn setup(n: usize) -> (LensParams, CutoffProfile, Grid, DiffOps) {
        let p = LensParams::new(PI / 3.0, 1.0).unwrap();
        let c = CutoffProfile::default_for(&p);
        let g = Grid::new(n, p.l_star).unwrap();
        let ops = build_diff_ops(&g);
        (p, c, g, ops)
    }

    #[test]
    fn equilibrium_is_a_zero() {
        let (p, c, g, ops) = setup(101);
        let rho = g.zeros();
        let bundle = full_rhs(&rho, &g, &ops, &p, &c).unwrap();
        assert!(sup_norm(&bundle.rhs) < 1e-10);
        assert!(sup_norm(&bundle.frak_f) < 1e-10);
        assert_eq!(bundle.beta_minus, 0.0);
        assert_eq!(bundle.beta_plus, 0.0);
        let bc = bc_residuals(&rho, &g, &ops, &p, &c).unwrap();
        assert!(bc.g1_minus.abs() < 1e-13 && bc.g1_plus.abs() < 1e-13);
        assert!(bc.g2_minus.abs() < 1e-9 && bc.g2_plus.abs() < 1e-9);
    }

    #[test]
    fn frak_f_vanishes_on_chart_points_under_refinement() {
        let (p, c, _, _) = setup(9);
        let mut prev = f64::NAN;
        for n in [101, 201, 401] {
            let g = Grid::new(n, p.l_star).unwrap();
            let ops = build_diff_ops(&g);
            let mp = solve_rho(0.05, 1.03, &g, &p, &c).unwrap();
            let f = frak_f(&mp.rho, &g, &ops, &p, &c).unwrap();
            let err = sup_norm(&f);
            if !prev.is_nan() {
                let ratio = prev / err;
                assert!(ratio > 2.6, "O(h^2)-ish decay, ratio {ratio}");
            }
            prev = err;
        }
        assert!(prev < 0.15, "n=401 sup F = {prev}");
    }

    #[test]
    fn rhs_equals_beta_at_endpoints() {
        let (p, c, g, ops) = setup(121);
        // random-ish admissible field: chart plus boundary-flat bump
        let mp = solve_rho(0.02, 1.01, &g, &p, &c).unwrap();
        let bump = g.field_from_fn(|x| {
            let s = x / p.l_star;
            2e-3 * (1.0 - s * s).powi(4) * (2.0 * x).sin()
        });
        let rho = &mp.rho + &bump;
        let bundle = full_rhs(&rho, &g, &ops, &p, &c).unwrap();
        let n = g.n;
        assert!(
            (bundle.rhs[0] - bundle.beta_minus).abs() <= 1e-12 * bundle.beta_minus.abs().max(1e-3),
            "identity at -l*"
        );
        assert!(
            (bundle.rhs[n - 1] - bundle.beta_plus).abs()
                <= 1e-12 * bundle.beta_plus.abs().max(1e-3),
            "identity at +l*"
        );
        // frak_b supported only in the cutoff band
        for i in 0..n {
            if g.nodes[i].abs() <= p.l_star - c.width {
                assert_eq!(bundle.frak_b[i], 0.0);
            }
        }
    }

    #[test]
    fn right_angle_decouples() {
        let p = LensParams::new(PI / 2.0, 1.0).unwrap();
        let c = CutoffProfile::default_for(&p);
        let g = Grid::new(101, p.l_star).unwrap();
        let ops = build_diff_ops(&g);
        let mp = solve_rho(0.02, 1.01, &g, &p, &c).unwrap();
        let bundle = full_rhs(&mp.rho, &g, &ops, &p, &c).unwrap();
        // cot(pi/2) = 0: rhs == F everywhere and beta = F at the ends
        assert!(sup_norm(&(&bundle.rhs - &bundle.frak_f)) < 1e-15);
        assert!((bundle.beta_minus - bundle.frak_f[0]).abs() < 1e-15);
    }

    #[test]
    fn chart_points_satisfy_both_bcs_under_refinement() {
        let (p, c, _, _) = setup(9);
        let mut prev = f64::NAN;
        for n in [101, 201] {
            let g = Grid::new(n, p.l_star).unwrap();
            let ops = build_diff_ops(&g);
            let mp = solve_rho(0.04, 1.02, &g, &p, &c).unwrap();
            let bc = bc_residuals(&mp.rho, &g, &ops, &p, &c).unwrap();
            let worst = bc.max_abs();
            if !prev.is_nan() {
                assert!(prev / worst > 2.5, "refinement ratio {}", prev / worst);
            }
            prev = worst;
        }
    }

    #[test]
    fn boundary_flat_bump_leaves_bc_residuals() {
        let (p, c, g, ops) = setup(201);
        let mp = solve_rho(0.01, 1.005, &g, &p, &c).unwrap();
        let bc0 = bc_residuals(&mp.rho, &g, &ops, &p, &c).unwrap();
        let bump = g.field_from_fn(|x| {
            let s = x / p.l_star;
            1e-3 * (1.0 - s * s).powi(4) * (PI * x / (2.0 * p.l_star)).cos()
        });
        let rho = &mp.rho + &bump;
        let bc1 = bc_residuals(&rho, &g, &ops, &p, &c).unwrap();
        let tol = 50.0 * g.h * g.h * 1e-3 + 1e-12;
        assert!((bc1.g1_minus - bc0.g1_minus).abs() < tol);
        assert!((bc1.g1_plus - bc0.g1_plus).abs() < tol);
        assert!((bc1.g2_minus - bc0.g2_minus).abs() < 60.0 * g.h * g.h);
        assert!((bc1.g2_plus - bc0.g2_plus).abs() < 60.0 * g.h * g.h);
    }

    #[test]
    fn equilibrium_characterization_both_directions() {
        let (p, c, g, ops) = setup(151);
        // chart point: rhs small, bc small, kappa constant
        let mp = solve_rho(0.03, 1.02, &g, &p, &c).unwrap();
        let bundle = full_rhs(&mp.rho, &g, &ops, &p, &c).unwrap();
        let pf = point_fields(&mp.rho, &g, &ops, &p, &c).unwrap();
        let kmin = pf.kappa.min();
        let kmax = pf.kappa.max();
        assert!(sup_norm(&bundle.rhs) < 1.0 && (kmax - kmin) < 1e-3);

        // non-equilibrium: kappa visibly non-constant and rhs large
        let rho = g.field_from_fn(|x| 0.02 * (2.0 * x).sin() + 0.01);
        let pf = point_fields(&rho, &g, &ops, &p, &c).unwrap();
        let spread = pf.kappa.max() - pf.kappa.min();
        assert!(spread > 1e-2);
        let bundle = full_rhs(&rho, &g, &ops, &p, &c).unwrap();
        assert!(sup_norm(&bundle.rhs) > 1.0);
    }
}
