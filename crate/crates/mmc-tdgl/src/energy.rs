//! The reticular free energy, its convex splitting, the discrete energy and
//! its variational derivatives, and the Hessian action used by Newton.
//!
//! The bulk density is `S(u) + H(u)` with the entropic part
//!
//! ```text
//! S(u) = (u/tau) ln(alpha u / tau) + (u/N) ln(beta u / tau) + (1 - rho u) ln(1 - rho u)
//! ```
//!
//! and the Huggins interaction term `H(u) = chi u (1 - rho u)`. The gradient
//! energy carries the de Gennes coefficient `kappa(u) = 1 / (36 u (1 - u))`.
//! `S` and `-H` are convex on `(0, 1/rho)`, which yields the splitting
//! `F = F_c - F_e` with both parts convex: `F_c` keeps `S` plus the gradient
//! term, `F_e = -sum H`.
//!
//! The first derivatives `S'` and `H'` drop their additive constants, exactly
//! as they enter the scheme (the chemical potential sits under a Laplacian,
//! so constants are irrelevant). Energy reporting uses the full `S`, `H`.

use crate::error::{Error, Result};
use crate::grid::{CellField, CompensatedSum, EdgeFieldEW, EdgeFieldNS};
use crate::params::ModelParams;

/// Half-width of the domain guard: pointwise evaluation requires
/// `phi in [DOMAIN_GUARD, 1/rho - DOMAIN_GUARD]`.
pub const DOMAIN_GUARD: f64 = 1e-12;

impl ModelParams {
    /// Admissible closed interval for concentrations, guard included.
    pub fn domain(&self) -> (f64, f64) {
        (DOMAIN_GUARD, self.phi_max() - DOMAIN_GUARD)
    }

    /// Entropic part of the reticular free energy density.
    pub fn entropy(&self, u: f64) -> f64 {
        (u / self.tau) * (self.alpha * u / self.tau).ln()
            + (u / self.polymerization) * (self.beta * u / self.tau).ln()
            + (1.0 - self.rho * u) * (1.0 - self.rho * u).ln()
    }

    /// `S'` with the additive constant dropped.
    pub fn entropy_d(&self, u: f64) -> f64 {
        (1.0 / self.tau + 1.0 / self.polymerization) * u.ln() - self.rho * (1.0 - self.rho * u).ln()
    }

    /// `S''`; strictly positive on the admissible interval.
    pub fn entropy_dd(&self, u: f64) -> f64 {
        (1.0 / self.tau + 1.0 / self.polymerization) / u
            + self.rho * self.rho / (1.0 - self.rho * u)
    }

    /// Huggins interaction term `H(u) = chi u (1 - rho u)`.
    pub fn huggins(&self, u: f64) -> f64 {
        self.chi * u * (1.0 - self.rho * u)
    }

    /// `H'` with the additive constant dropped.
    pub fn huggins_d(&self, u: f64) -> f64 {
        -2.0 * self.chi * self.rho * u
    }

    /// `H''`; the constant `-2 chi rho`.
    pub fn huggins_dd(&self, _u: f64) -> f64 {
        -2.0 * self.chi * self.rho
    }

    /// de Gennes gradient-energy coefficient `kappa(u) = 1/(36 u (1-u))`.
    pub fn de_gennes(&self, u: f64) -> f64 {
        1.0 / (36.0 * u * (1.0 - u))
    }

    pub fn de_gennes_d(&self, u: f64) -> f64 {
        let w = u * (1.0 - u);
        (2.0 * u - 1.0) / (36.0 * w * w)
    }

    /// Second derivative of the de Gennes coefficient, read off the (1,1)
    /// Hessian entry of `K(u, v) = kappa(u) v^2`.
    pub fn de_gennes_dd(&self, u: f64) -> f64 {
        let w = u * (1.0 - u);
        (3.0 * u * u - 3.0 * u + 1.0) / (18.0 * w * w * w)
    }
}

/// Rejects the first cell (row-major) outside the guarded interval.
pub fn check_domain(phi: &CellField, p: &ModelParams) -> Result<()> {
    let (lo, hi) = p.domain();
    let ny = phi.geometry().ny();
    for (k, &v) in phi.as_slice().iter().enumerate() {
        if !(v >= lo && v <= hi) {
            return Err(Error::DomainViolation {
                i: k / ny,
                j: k % ny,
                value: v,
                lo,
                hi,
            });
        }
    }
    Ok(())
}

/// Discrete energy together with its convex/expansive split,
/// `F = Fc - Fe` exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub f: f64,
    pub fc: f64,
    pub fe: f64,
}

/// Edge-averaged squared gradient `a_x((D_x phi)^2) + a_y((D_y phi)^2)`.
fn grad_sq(phi: &CellField) -> CellField {
    let dx2 = phi.diff_x().map(|v| v * v).avg_center();
    let dy2 = phi.diff_y().map(|v| v * v).avg_center();
    dx2.zip_with(&dy2, |a, b| a + b)
}

/// Evaluates the discrete energy `F` and the split parts `Fc`, `Fe`.
/// Sums run in fixed row-major order with compensated accumulation.
pub fn discrete_energy(phi: &CellField, p: &ModelParams) -> Result<EnergyReport> {
    check_domain(phi, p)?;
    let g = grad_sq(phi);
    let mut sum_c = CompensatedSum::new();
    let mut sum_h = CompensatedSum::new();
    for (&u, &gv) in phi.as_slice().iter().zip(g.as_slice().iter()) {
        sum_c.add(p.entropy(u) + p.de_gennes(u) * gv);
        sum_h.add(p.huggins(u));
    }
    let area = phi.geometry().cell_area();
    let fc = area * sum_c.total();
    let fe = -area * sum_h.total();
    Ok(EnergyReport { f: fc - fe, fc, fe })
}

/// Variational derivative of the convex part,
/// `S'(phi) + kappa'(phi) g - 2 d_x(A_x kappa D_x phi) - 2 d_y(A_y kappa D_y phi)`.
pub fn convex_potential(phi: &CellField, p: &ModelParams) -> Result<CellField> {
    check_domain(phi, p)?;
    let g = grad_sq(phi);
    let kap = phi.map(|u| p.de_gennes(u));

    let flux_x = kap.avg_x().zip_with(&phi.diff_x(), |a, b| a * b);
    let flux_y = kap.avg_y().zip_with(&phi.diff_y(), |a, b| a * b);
    let div_x = flux_x.diff_center();
    let div_y = flux_y.diff_center();

    let mut out = CellField::zeros(phi.geometry());
    let slices = (
        phi.as_slice(),
        g.as_slice(),
        div_x.as_slice(),
        div_y.as_slice(),
    );
    for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
        let u = slices.0[k];
        *v =
            p.entropy_d(u) + p.de_gennes_d(u) * slices.1[k] - 2.0 * slices.2[k] - 2.0 * slices.3[k];
    }
    Ok(out)
}

/// Variational derivative of the expansive part, `-H'(phi) = 2 chi rho phi`.
pub fn expansive_potential(phi: &CellField, p: &ModelParams) -> CellField {
    phi.map(|u| 2.0 * p.chi * p.rho * u)
}

/// Mixed-time chemical potential of a completed step,
/// `delta Fc(phi_new) - delta Fe(phi_old)`.
pub fn chemical_potential(
    phi_new: &CellField,
    phi_old: &CellField,
    p: &ModelParams,
) -> Result<CellField> {
    let mut mu = convex_potential(phi_new, p)?;
    mu.add_scaled(-1.0, &expansive_potential(phi_old, p));
    Ok(mu)
}

/// Precomputed state-dependent coefficients of the convex-part Hessian at a
/// fixed `phi`, so that repeated applications inside a Krylov solve only pay
/// for the direction-dependent terms.
pub struct ConvexHessian {
    /// `S''(phi) + kappa''(phi) (a_x((D_x phi)^2) + a_y((D_y phi)^2))`.
    diag: CellField,
    /// `kappa'(phi)`.
    kap_d: CellField,
    dphi_x: EdgeFieldEW,
    dphi_y: EdgeFieldNS,
    /// `A_x kappa(phi)`, `A_y kappa(phi)`.
    kap_edge_x: EdgeFieldEW,
    kap_edge_y: EdgeFieldNS,
}

impl ConvexHessian {
    pub fn new(phi: &CellField, p: &ModelParams) -> Result<Self> {
        check_domain(phi, p)?;
        let g = grad_sq(phi);
        let kap = phi.map(|u| p.de_gennes(u));
        let diag = CellField::from_fn(phi.geometry(), |i, j| {
            let u = phi.get(i, j);
            p.entropy_dd(u) + p.de_gennes_dd(u) * g.get(i, j)
        });
        Ok(ConvexHessian {
            diag,
            kap_d: phi.map(|u| p.de_gennes_d(u)),
            dphi_x: phi.diff_x(),
            dphi_y: phi.diff_y(),
            kap_edge_x: kap.avg_x(),
            kap_edge_y: kap.avg_y(),
        })
    }

    /// Applies the Hessian of `F_c` (scaled by `1/(hx hy)`) to a direction.
    pub fn apply(&self, psi: &CellField) -> CellField {
        let dpsi_x = psi.diff_x();
        let dpsi_y = psi.diff_y();

        // 2 kappa'(phi) (a_x(D_x phi D_x psi) + a_y(D_y phi D_y psi))
        let cross_x = self.dphi_x.zip_with(&dpsi_x, |a, b| a * b).avg_center();
        let cross_y = self.dphi_y.zip_with(&dpsi_y, |a, b| a * b).avg_center();

        // -2 d_x(A_x(kappa' psi) D_x phi + A_x kappa D_x psi), same in y
        let kd_psi = self.kap_d.zip_with(psi, |a, b| a * b);
        let edge_x = kd_psi
            .avg_x()
            .zip_with(&self.dphi_x, |a, b| a * b)
            .zip_with(&self.kap_edge_x.zip_with(&dpsi_x, |a, b| a * b), |a, b| {
                a + b
            });
        let edge_y = kd_psi
            .avg_y()
            .zip_with(&self.dphi_y, |a, b| a * b)
            .zip_with(&self.kap_edge_y.zip_with(&dpsi_y, |a, b| a * b), |a, b| {
                a + b
            });
        let div_x = edge_x.diff_center();
        let div_y = edge_y.diff_center();

        let mut out = CellField::zeros(psi.geometry());
        for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
            *v = self.diag.as_slice()[k] * psi.as_slice()[k]
                + 2.0 * self.kap_d.as_slice()[k] * (cross_x.as_slice()[k] + cross_y.as_slice()[k])
                - 2.0 * (div_x.as_slice()[k] + div_y.as_slice()[k]);
        }
        out
    }
}

/// One-shot Hessian action `H(phi) psi`.
pub fn hessian_action(phi: &CellField, psi: &CellField, p: &ModelParams) -> Result<CellField> {
    Ok(ConvexHessian::new(phi, p)?.apply(psi))
}
