//! Model constants and grid geometry.
//!
//! The reticular free energy is parameterized by the Huggins interaction
//! parameter `chi`, the relative microsphere volume (`microsphere_volume`),
//! and the degree of polymerization of the chains (`polymerization`). The
//! four derived constants follow from the latter two:
//!
//! ```text
//! alpha = pi (sqrt(M/pi) + N/2)^2
//! beta  = alpha / sqrt(pi M)
//! tau   = sqrt(pi M) N
//! rho   = 1 + M / tau
//! ```
//!
//! `rho` is slightly greater than one, so the admissible concentration
//! interval `(0, 1/rho)` is a strict subset of `(0, 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Model constants. Immutable after construction; derived values are
/// computed eagerly and never recomputed per grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Huggins interaction parameter.
    pub chi: f64,
    /// Relative volume of one macromolecular microsphere.
    pub microsphere_volume: f64,
    /// Degree of polymerization of the polymer chains.
    pub polymerization: f64,
    /// Strength of the conservative noise term (zero for deterministic runs).
    pub noise_strength: f64,
    /// Diffusion coefficient; fixed to 1 by normalization.
    pub diffusion: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub rho: f64,
}

impl ModelParams {
    /// Validates the inputs and computes the derived constants.
    pub fn new(
        microsphere_volume: f64,
        polymerization: f64,
        chi: f64,
        noise_strength: f64,
    ) -> Result<Self> {
        if !(microsphere_volume > 0.0) || !microsphere_volume.is_finite() {
            return Err(Error::invalid(
                "M",
                "relative microsphere volume must be positive",
            ));
        }
        if !(polymerization > 0.0) || !polymerization.is_finite() {
            return Err(Error::invalid(
                "N",
                "degree of polymerization must be positive",
            ));
        }
        if !(chi > 0.0) || !chi.is_finite() {
            return Err(Error::invalid("chi", "Huggins parameter must be positive"));
        }
        if !(noise_strength >= 0.0) || !noise_strength.is_finite() {
            return Err(Error::invalid(
                "epsilon",
                "noise strength must be nonnegative",
            ));
        }

        let m = microsphere_volume;
        let n = polymerization;
        let alpha = PI * (f64::sqrt(m / PI) + n / 2.0).powi(2);
        let beta = alpha / f64::sqrt(PI * m);
        let tau = f64::sqrt(PI * m) * n;
        let rho = 1.0 + m / tau;
        debug_assert!(rho > 1.0);

        Ok(ModelParams {
            chi,
            microsphere_volume: m,
            polymerization: n,
            noise_strength,
            diffusion: 1.0,
            alpha,
            beta,
            tau,
            rho,
        })
    }

    /// Upper end of the admissible concentration interval `(0, 1/rho)`.
    pub fn phi_max(&self) -> f64 {
        1.0 / self.rho
    }
}

/// Uniform periodic grid on `(0, lx) x (0, ly)` with `nx x ny` cells.
/// Cell centers sit at `x_i = (i + 1/2) hx`, `y_j = (j + 1/2) hy` for
/// zero-based `i`, `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl GridGeometry {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0) || !lx.is_finite() {
            return Err(Error::invalid("Lx", "domain edge must be positive"));
        }
        if !(ly > 0.0) || !ly.is_finite() {
            return Err(Error::invalid("Ly", "domain edge must be positive"));
        }
        if nx < 2 {
            return Err(Error::invalid("m", "need at least 2 cells per direction"));
        }
        if ny < 2 {
            return Err(Error::invalid("n", "need at least 2 cells per direction"));
        }
        Ok(GridGeometry {
            lx,
            ly,
            nx,
            ny,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    /// Cell-center x coordinate of column `i` (zero-based).
    pub fn cell_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }
    /// Cell-center y coordinate of row `j` (zero-based).
    pub fn cell_y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }
    /// Cell area `hx * hy`.
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn clean_inputs_give_exact_derived_values() {
        // M = pi makes all four closed forms collapse to simple numbers.
        let p = ModelParams::new(PI, 2.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(p.alpha, 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(p.beta, 4.0, max_relative = 1e-15);
        assert_relative_eq!(p.tau, 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(p.rho, 1.5, max_relative = 1e-15);
    }

    #[test]
    fn reference_parameter_set() {
        // Derived constants for M = 0.16, N = 4.34, evaluated with
        // extended-precision arithmetic and pinned here.
        let p = ModelParams::new(0.16, 4.34, 2.37, 0.0).unwrap();
        assert_relative_eq!(p.alpha, 18.030425531660953, max_relative = 1e-14);
        assert_relative_eq!(p.beta, 25.43144567974156, max_relative = 1e-14);
        assert_relative_eq!(p.tau, 3.076979885171976, max_relative = 1e-14);
        assert_relative_eq!(p.rho, 1.0519990399583186, max_relative = 1e-14);
    }

    #[test]
    fn chi_does_not_enter_derived_values() {
        let a = ModelParams::new(0.16, 4.34, 2.37, 0.0).unwrap();
        let b = ModelParams::new(0.16, 4.34, 1.975, 1e-4).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.beta, b.beta);
        assert_eq!(a.tau, b.tau);
        assert_eq!(a.rho, b.rho);
    }

    #[test]
    fn rejects_bad_inputs_naming_the_field() {
        let err = ModelParams::new(-1.0, 4.34, 2.37, 0.0).unwrap_err();
        assert!(err.to_string().contains("`M`"), "{err}");
        let err = ModelParams::new(0.16, 0.0, 2.37, 0.0).unwrap_err();
        assert!(err.to_string().contains("`N`"), "{err}");
        let err = ModelParams::new(0.16, 4.34, -2.37, 0.0).unwrap_err();
        assert!(err.to_string().contains("`chi`"), "{err}");
        let err = ModelParams::new(0.16, 4.34, 2.37, -1e-4).unwrap_err();
        assert!(err.to_string().contains("`epsilon`"), "{err}");
    }

    #[test]
    fn construction_is_pure() {
        let a = ModelParams::new(0.16, 4.34, 2.37, 1e-4).unwrap();
        let b = ModelParams::new(0.16, 4.34, 2.37, 1e-4).unwrap();
        assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
        assert_eq!(a.beta.to_bits(), b.beta.to_bits());
        assert_eq!(a.tau.to_bits(), b.tau.to_bits());
        assert_eq!(a.rho.to_bits(), b.rho.to_bits());
    }

    #[test]
    fn geometry_basics() {
        let g = GridGeometry::new(50.0, 25.0, 10, 5).unwrap();
        assert_eq!(g.hx(), 5.0);
        assert_eq!(g.hy(), 5.0);
        assert_eq!(g.cell_x(0), 2.5);
        assert_eq!(g.cell_y(4), 22.5);
        assert!(GridGeometry::new(50.0, 50.0, 1, 8).is_err());
        assert!(GridGeometry::new(0.0, 50.0, 8, 8).is_err());
    }

    proptest! {
        #[test]
        fn admissible_interval_is_proper(
            m in 1e-3f64..1e3,
            n in 1e-3f64..1e3,
        ) {
            let p = ModelParams::new(m, n, 1.0, 0.0).unwrap();
            prop_assert!(p.rho > 1.0);
            prop_assert!(p.phi_max() < 1.0);
            prop_assert!(p.alpha > 0.0 && p.beta > 0.0 && p.tau > 0.0);
        }
    }
}
