//! Uniform grid and dense finite-difference machinery.
//!
//! Interior rows of `D1..D4` are the standard centered O(h^2) stencils;
//! rows within reach of a boundary switch to one-sided stencils of the
//! same order, generated by solving the small Vandermonde moment system.
//! Matrices are dense (n stays at desk scale) but applications go through
//! the per-row band windows, which is what the hot loops use.

use nalgebra::{DMatrix, DVector};

use crate::error::{LensError, Result};
use crate::par;

/// Nodal scalar field, one value per grid node.
pub type Field = DVector<f64>;

pub fn sup_norm(f: &Field) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub l_star: f64,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, l_star: f64) -> Result<Self> {
        if n < 9 {
            return Err(LensError::Config(format!("grid needs n >= 9, got {n}")));
        }
        let h = 2.0 * l_star / (n - 1) as f64;
        // center-symmetric form keeps x_i == -x_{n-1-i} exactly
        let c = (n - 1) as f64 / 2.0;
        let nodes = (0..n).map(|i| (i as f64 - c) * h).collect();
        Ok(Self { n, h, l_star, nodes })
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.n)
    }

    pub fn field_from_fn(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_iterator(self.n, self.nodes.iter().map(|&x| f(x)))
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Field {
        let mut w = Field::from_element(self.n, self.h);
        w[0] = 0.5 * self.h;
        w[self.n - 1] = 0.5 * self.h;
        w
    }
}

/// Stencil weights for the m-th derivative at evaluation offset 0,
/// given integer node offsets (in units of h). Exact on polynomials of
/// degree < offsets.len().
pub(crate) fn stencil_weights(offsets: &[i64], m: usize) -> DVector<f64> {
    let p = offsets.len();
    let mut vand = DMatrix::zeros(p, p);
    for (j, &o) in offsets.iter().enumerate() {
        let of = o as f64;
        let mut pw = 1.0;
        for k in 0..p {
            vand[(k, j)] = pw;
            pw *= of;
        }
    }
    let mut rhs = DVector::zeros(p);
    rhs[m] = (1..=m).product::<usize>() as f64;
    vand.lu().solve(&rhs).expect("vandermonde system is nonsingular")
}

/// One-sided row for the m-th derivative evaluated at the boundary node,
/// with `boost` extra points above the minimal O(h^2) width.
pub(crate) fn one_sided_row(n: usize, h: f64, m: usize, boost: usize, at_start: bool) -> DVector<f64> {
    let p = m + 2 + boost;
    let offsets: Vec<i64> = if at_start {
        (0..p as i64).collect()
    } else {
        (-(p as i64 - 1)..=0).collect()
    };
    let w = stencil_weights(&offsets, m);
    let mut row = DVector::zeros(n);
    let base = if at_start { 0i64 } else { (n - 1) as i64 };
    for (j, &o) in offsets.iter().enumerate() {
        row[(base + o) as usize] = w[j] / h.powi(m as i32);
    }
    row
}

/// Dense derivative matrices D1..D4 with per-row band windows.
#[derive(Debug, Clone)]
pub struct DiffOps {
    mats: [DMatrix<f64>; 4],
    windows: [Vec<(usize, usize)>; 4],
}

const CENTERED: [(&[f64], usize); 4] = [
    (&[-0.5, 0.0, 0.5], 1),
    (&[1.0, -2.0, 1.0], 1),
    (&[-0.5, 1.0, 0.0, -1.0, 0.5], 2),
    (&[1.0, -4.0, 6.0, -4.0, 1.0], 2),
];

pub fn build_diff_ops(grid: &Grid) -> DiffOps {
    let n = grid.n;
    let h = grid.h;
    let mut mats = [
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    ];
    let mut windows: [Vec<(usize, usize)>; 4] = Default::default();
    for m in 1..=4usize {
        let (coeffs, reach) = CENTERED[m - 1];
        let p = m + 2; // one-sided width for O(h^2)
        let mat = &mut mats[m - 1];
        let mut win = Vec::with_capacity(n);
        for i in 0..n {
            if i >= reach && i + reach < n {
                for (j, &c) in coeffs.iter().enumerate() {
                    mat[(i, i - reach + j)] = c / h.powi(m as i32);
                }
                win.push((i - reach, i + reach + 1));
            } else {
                // window anchored at the near boundary, evaluated at node i
                let start = if i < reach { 0usize } else { n - p };
                let offsets: Vec<i64> = (0..p).map(|j| (start + j) as i64 - i as i64).collect();
                let w = stencil_weights(&offsets, m);
                for j in 0..p {
                    mat[(i, start + j)] = w[j] / h.powi(m as i32);
                }
                win.push((start, start + p));
            }
        }
        windows[m - 1] = win;
    }
    DiffOps { mats, windows }
}

impl DiffOps {
    pub fn matrix(&self, m: usize) -> &DMatrix<f64> {
        &self.mats[m - 1]
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.mats[0]
    }
    pub fn d2(&self) -> &DMatrix<f64> {
        &self.mats[1]
    }
    pub fn d3(&self) -> &DMatrix<f64> {
        &self.mats[2]
    }
    pub fn d4(&self) -> &DMatrix<f64> {
        &self.mats[3]
    }

    /// Banded application of D_m, O(n * width).
    pub fn apply(&self, m: usize, f: &Field) -> Field {
        let mat = &self.mats[m - 1];
        let win = &self.windows[m - 1];
        Field::from_iterator(
            f.len(),
            (0..f.len()).map(|i| {
                let (a, b) = win[i];
                let mut s = 0.0;
                for j in a..b {
                    s += mat[(i, j)] * f[j];
                }
                s
            }),
        )
    }

    /// All four derivative fields of rho at once.
    pub fn derivative_fields(&self, rho: &Field) -> [Field; 4] {
        [
            self.apply(1, rho),
            self.apply(2, rho),
            self.apply(3, rho),
            self.apply(4, rho),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    Trapezoid,
    Simpson,
}

/// Composite trapezoid integral over the grid.
pub fn integrate(grid: &Grid, f: &Field) -> f64 {
    let n = grid.n;
    let mut s = 0.5 * (f[0] + f[n - 1]);
    for i in 1..n - 1 {
        s += f[i];
    }
    s * grid.h
}

/// Composite Simpson integral; requires an odd node count.
pub fn integrate_simpson(grid: &Grid, f: &Field) -> Result<f64> {
    let n = grid.n;
    if n % 2 == 0 {
        return Err(LensError::Config(format!(
            "simpson quadrature needs odd n, got {n}"
        )));
    }
    let mut s = f[0] + f[n - 1];
    for i in 1..n - 1 {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f[i];
    }
    Ok(s * grid.h / 3.0)
}

pub fn integrate_with(grid: &Grid, f: &Field, rule: QuadRule) -> Result<f64> {
    match rule {
        QuadRule::Trapezoid => Ok(integrate(grid, f)),
        QuadRule::Simpson => integrate_simpson(grid, f),
    }
}

/// Factored discrete Neumann problem -u'' = rho, u'(+-l*) = 0, with the
/// zero-mean gauge appended as a bordered row/column.
pub struct NeumannPoisson {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl NeumannPoisson {
    pub fn new(grid: &Grid, ops: &DiffOps) -> Result<Self> {
        let n = grid.n;
        let mut a = DMatrix::zeros(n + 1, n + 1);
        let d2 = ops.d2();
        for i in 1..n - 1 {
            for j in 0..n {
                a[(i, j)] = -d2[(i, j)];
            }
            a[(i, n)] = 1.0; // gauge multiplier acts on interior equations
        }
        let d1 = ops.d1();
        for j in 0..n {
            a[(0, j)] = d1[(0, j)];
            a[(n - 1, j)] = d1[(n - 1, j)];
        }
        let w = grid.weights();
        for j in 0..n {
            a[(n, j)] = w[j];
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(LensError::Numerical(
                "bordered Neumann-Poisson system is singular".into(),
            ));
        }
        Ok(Self { lu, n })
    }

    fn check_mean_zero(&self, grid: &Grid, rho: &Field) -> Result<()> {
        let mean = integrate(grid, rho);
        let tol = 1e-8 * (1.0 + sup_norm(rho) * 2.0 * grid.l_star);
        if mean.abs() > tol {
            return Err(LensError::Precondition(format!(
                "H^-1 inner product needs mean-zero input: integral = {mean:e} (tol {tol:e})"
            )));
        }
        Ok(())
    }

    /// Potential u with -u'' = rho, zero Neumann data, zero mean.
    pub fn potential(&self, grid: &Grid, rho: &Field) -> Result<Field> {
        self.check_mean_zero(grid, rho)?;
        let mut rhs = DVector::zeros(self.n + 1);
        for i in 1..self.n - 1 {
            rhs[i] = rho[i];
        }
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| LensError::Numerical("Neumann-Poisson solve failed".into()))?;
        Ok(Field::from_iterator(self.n, sol.iter().take(self.n).copied()))
    }
}

/// Discrete (rho1, rho2)_{-1} = integral of d/dx u1 * d/dx u2 over the
/// potentials of the two fields. Symmetric by construction, positive on
/// nonzero mean-zero input.
pub fn hminus1_inner(
    poisson: &NeumannPoisson,
    grid: &Grid,
    ops: &DiffOps,
    rho1: &Field,
    rho2: &Field,
) -> Result<f64> {
    let u1 = poisson.potential(grid, rho1)?;
    let u2 = poisson.potential(grid, rho2)?;
    let g1 = ops.apply(1, &u1);
    let g2 = ops.apply(1, &u2);
    Ok(integrate(grid, &g1.component_mul(&g2)))
}

/// Column-by-column central-difference Jacobian of a field map. The step
/// for column j is `eps * max(1, |rho_j|)`. Columns run in parallel.
pub fn fd_jacobian<F>(f: F, rho: &Field, eps: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&Field) -> Result<Field> + Sync,
{
    let n = rho.len();
    let cols = par::try_map_indexed(n, |j| {
        let step = eps * rho[j].abs().max(1.0);
        let mut plus = rho.clone();
        plus[j] += step;
        let mut minus = rho.clone();
        minus[j] -= step;
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        Ok((fp - fm) / (2.0 * step))
    })?;
    let mut jac = DMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        jac.set_column(j, col);
    }
    Ok(jac)
}
