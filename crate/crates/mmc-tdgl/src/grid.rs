//! Cell- and edge-centered fields on a uniform periodic grid, the staggered
//! averaging/differencing operators, the discrete Laplacian, and the weighted
//! inner products.
//!
//! Storage is a flat row-major `Vec<f64>` with index `i * ny + j`, where `i`
//! runs over the x direction and `j` over y. Periodicity is implemented by
//! index wrap, not ghost cells. Edge fields store only the unique edges: the
//! east-west field keeps the east edge of every cell (the edge between cell
//! `i` and cell `i+1 mod nx`), the north-south field keeps the north edge.
//! The duplicated boundary edge of the usual `(m+1) x n` presentation is
//! identified by periodicity, so each edge family is exactly `nx x ny`.

use crate::params::GridGeometry;

/// Neumaier compensated accumulator. Energy sums and inner products use a
/// fixed row-major order so that repeated evaluation is bit-identical.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

macro_rules! field_common {
    ($name:ident) => {
        impl $name {
            pub fn zeros(geom: GridGeometry) -> Self {
                Self {
                    geom,
                    data: vec![0.0; geom.cells()],
                }
            }

            pub fn constant(geom: GridGeometry, value: f64) -> Self {
                Self {
                    geom,
                    data: vec![value; geom.cells()],
                }
            }

            /// Builds a field from a function of the zero-based indices (i, j).
            pub fn from_fn(geom: GridGeometry, mut f: impl FnMut(usize, usize) -> f64) -> Self {
                let (nx, ny) = (geom.nx(), geom.ny());
                let mut data = Vec::with_capacity(nx * ny);
                for i in 0..nx {
                    for j in 0..ny {
                        data.push(f(i, j));
                    }
                }
                Self { geom, data }
            }

            pub fn geometry(&self) -> GridGeometry {
                self.geom
            }

            #[inline]
            pub fn idx(&self, i: usize, j: usize) -> usize {
                i * self.geom.ny() + j
            }

            #[inline]
            pub fn get(&self, i: usize, j: usize) -> f64 {
                self.data[self.idx(i, j)]
            }

            #[inline]
            pub fn set(&mut self, i: usize, j: usize, value: f64) {
                let k = self.idx(i, j);
                self.data[k] = value;
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.data
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.data
            }

            /// Elementwise map into a new field.
            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                Self {
                    geom: self.geom,
                    data: self.data.iter().map(|&v| f(v)).collect(),
                }
            }

            /// Elementwise combination of two fields.
            pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                self.check_geometry(other);
                Self {
                    geom: self.geom,
                    data: self
                        .data
                        .iter()
                        .zip(other.data.iter())
                        .map(|(&a, &b)| f(a, b))
                        .collect(),
                }
            }

            /// `self += a * other`, in place.
            pub fn add_scaled(&mut self, a: f64, other: &Self) {
                self.check_geometry(other);
                for (x, &y) in self.data.iter_mut().zip(other.data.iter()) {
                    *x += a * y;
                }
            }

            pub fn scale(&mut self, a: f64) {
                for x in self.data.iter_mut() {
                    *x *= a;
                }
            }

            pub fn norm_inf(&self) -> f64 {
                self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
            }

            pub fn min_value(&self) -> f64 {
                self.data.iter().copied().fold(f64::INFINITY, f64::min)
            }

            pub fn max_value(&self) -> f64 {
                self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }

            /// Hard error on any non-finite entry; `what` names the field in
            /// the panic message.
            pub fn assert_finite(&self, what: &str) {
                for (k, &v) in self.data.iter().enumerate() {
                    assert!(
                        v.is_finite(),
                        "non-finite value {v} in {what} at cell ({}, {})",
                        k / self.geom.ny(),
                        k % self.geom.ny(),
                    );
                }
            }

            #[inline]
            fn check_geometry(&self, other: &Self) {
                assert_eq!(self.geom, other.geom, "geometry mismatch between operands");
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(
                    f,
                    "{}({}x{}, min={:.6e}, max={:.6e})",
                    stringify!($name),
                    self.geom.nx(),
                    self.geom.ny(),
                    self.min_value(),
                    self.max_value()
                )
            }
        }
    };
}

/// Cell-centered function on the periodic grid.
#[derive(Clone, PartialEq)]
pub struct CellField {
    geom: GridGeometry,
    data: Vec<f64>,
}

/// East-west edge-centered function; entry (i, j) lives on the east edge of
/// cell (i, j), between cells i and i+1 (mod nx).
#[derive(Clone, PartialEq)]
pub struct EdgeFieldEW {
    geom: GridGeometry,
    data: Vec<f64>,
}

/// North-south edge-centered function; entry (i, j) lives on the north edge
/// of cell (i, j), between cells j and j+1 (mod ny).
#[derive(Clone, PartialEq)]
pub struct EdgeFieldNS {
    geom: GridGeometry,
    data: Vec<f64>,
}

field_common!(CellField);
field_common!(EdgeFieldEW);
field_common!(EdgeFieldNS);

impl CellField {
    /// Center-to-edge difference in x: `(phi[i+1,j] - phi[i,j]) / hx` on the
    /// east edge of cell (i, j), with periodic wrap.
    pub fn diff_x(&self) -> EdgeFieldEW {
        let (nx, ny, hx) = (self.geom.nx(), self.geom.ny(), self.geom.hx());
        let mut out = EdgeFieldEW::zeros(self.geom);
        for i in 0..nx {
            let ip = if i + 1 == nx { 0 } else { i + 1 };
            for j in 0..ny {
                out.data[i * ny + j] = (self.data[ip * ny + j] - self.data[i * ny + j]) / hx;
            }
        }
        out
    }

    /// Center-to-edge average in x.
    pub fn avg_x(&self) -> EdgeFieldEW {
        let (nx, ny) = (self.geom.nx(), self.geom.ny());
        let mut out = EdgeFieldEW::zeros(self.geom);
        for i in 0..nx {
            let ip = if i + 1 == nx { 0 } else { i + 1 };
            for j in 0..ny {
                out.data[i * ny + j] = 0.5 * (self.data[ip * ny + j] + self.data[i * ny + j]);
            }
        }
        out
    }

    /// Center-to-edge difference in y.
    pub fn diff_y(&self) -> EdgeFieldNS {
        let (nx, ny, hy) = (self.geom.nx(), self.geom.ny(), self.geom.hy());
        let mut out = EdgeFieldNS::zeros(self.geom);
        for i in 0..nx {
            for j in 0..ny {
                let jp = if j + 1 == ny { 0 } else { j + 1 };
                out.data[i * ny + j] = (self.data[i * ny + jp] - self.data[i * ny + j]) / hy;
            }
        }
        out
    }

    /// Center-to-edge average in y.
    pub fn avg_y(&self) -> EdgeFieldNS {
        let (nx, ny) = (self.geom.nx(), self.geom.ny());
        let mut out = EdgeFieldNS::zeros(self.geom);
        for i in 0..nx {
            for j in 0..ny {
                let jp = if j + 1 == ny { 0 } else { j + 1 };
                out.data[i * ny + j] = 0.5 * (self.data[i * ny + jp] + self.data[i * ny + j]);
            }
        }
        out
    }

    /// Five-point discrete Laplacian, composed as
    /// `diff_center(diff_x) + diff_center(diff_y)`.
    pub fn laplacian(&self) -> CellField {
        let mut out = self.diff_x().diff_center();
        out.add_scaled(1.0, &self.diff_y().diff_center());
        out
    }

    /// Weighted inner product `hx hy sum(phi * psi)` over all cells.
    pub fn inner(&self, other: &CellField) -> f64 {
        self.check_geometry(other);
        let mut acc = CompensatedSum::new();
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            acc.add(a * b);
        }
        self.geom.cell_area() * acc.total()
    }

    /// Arithmetic mean over the cells.
    pub fn mean(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for &v in &self.data {
            acc.add(v);
        }
        acc.total() / self.geom.cells() as f64
    }

    /// Plain Euclidean norm of the flattened values (no `hx hy` weight).
    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|&v| v * v).sum::<f64>().sqrt()
    }
}

impl EdgeFieldEW {
    /// Edge-to-center difference: `(f[east] - f[west]) / hx` at cell (i, j).
    pub fn diff_center(&self) -> CellField {
        let (nx, ny, hx) = (self.geom.nx(), self.geom.ny(), self.geom.hx());
        let mut out = CellField::zeros(self.geom);
        for i in 0..nx {
            let im = if i == 0 { nx - 1 } else { i - 1 };
            for j in 0..ny {
                out.data[i * ny + j] = (self.data[i * ny + j] - self.data[im * ny + j]) / hx;
            }
        }
        out
    }

    /// Edge-to-center average.
    pub fn avg_center(&self) -> CellField {
        let (nx, ny) = (self.geom.nx(), self.geom.ny());
        let mut out = CellField::zeros(self.geom);
        for i in 0..nx {
            let im = if i == 0 { nx - 1 } else { i - 1 };
            for j in 0..ny {
                out.data[i * ny + j] = 0.5 * (self.data[i * ny + j] + self.data[im * ny + j]);
            }
        }
        out
    }

    /// Weighted edge inner product. With unique-edge storage and periodicity
    /// the average-of-products definition reduces to `hx hy sum(f * g)` over
    /// the unique edges.
    pub fn inner(&self, other: &EdgeFieldEW) -> f64 {
        self.check_geometry(other);
        let mut acc = CompensatedSum::new();
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            acc.add(a * b);
        }
        self.geom.cell_area() * acc.total()
    }
}

impl EdgeFieldNS {
    /// Edge-to-center difference: `(g[north] - g[south]) / hy` at cell (i, j).
    pub fn diff_center(&self) -> CellField {
        let (nx, ny, hy) = (self.geom.nx(), self.geom.ny(), self.geom.hy());
        let mut out = CellField::zeros(self.geom);
        for i in 0..nx {
            for j in 0..ny {
                let jm = if j == 0 { ny - 1 } else { j - 1 };
                out.data[i * ny + j] = (self.data[i * ny + j] - self.data[i * ny + jm]) / hy;
            }
        }
        out
    }

    /// Edge-to-center average.
    pub fn avg_center(&self) -> CellField {
        let (nx, ny) = (self.geom.nx(), self.geom.ny());
        let mut out = CellField::zeros(self.geom);
        for i in 0..nx {
            for j in 0..ny {
                let jm = if j == 0 { ny - 1 } else { j - 1 };
                out.data[i * ny + j] = 0.5 * (self.data[i * ny + j] + self.data[i * ny + jm]);
            }
        }
        out
    }

    /// Weighted edge inner product over the unique edges.
    pub fn inner(&self, other: &EdgeFieldNS) -> f64 {
        self.check_geometry(other);
        let mut acc = CompensatedSum::new();
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            acc.add(a * b);
        }
        self.geom.cell_area() * acc.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::GridGeometry;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn geom(nx: usize, ny: usize) -> GridGeometry {
        GridGeometry::new(nx as f64, ny as f64, nx, ny).unwrap()
    }

    fn rng_field(geom: GridGeometry, seed: u64) -> CellField {
        // Small xorshift so the tests do not depend on rand internals.
        let mut state = seed.wrapping_mul(2685821657736338717).max(1);
        CellField::from_fn(geom, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn constants_behave() {
        let g = geom(6, 5);
        let c = CellField::constant(g, 3.25);
        assert_eq!(c.diff_x().norm_inf(), 0.0);
        assert_eq!(c.diff_y().norm_inf(), 0.0);
        assert!(c.avg_x().as_slice().iter().all(|&v| v == 3.25));
        assert!(c.avg_y().as_slice().iter().all(|&v| v == 3.25));
        assert_eq!(c.laplacian().norm_inf(), 0.0);
        let e = EdgeFieldEW::constant(g, -1.5);
        assert_eq!(e.diff_center().norm_inf(), 0.0);
        assert!(e.avg_center().as_slice().iter().all(|&v| v == -1.5));
    }

    #[test]
    fn edge_to_center_difference_wraps() {
        // One row of unique east edges (1, 2, 3, 4) with hx = 1: the west
        // edge of cell 0 is edge 3, so the differences are (-3, 1, 1, 1).
        let g = GridGeometry::new(4.0, 2.0, 4, 2).unwrap();
        let f = EdgeFieldEW::from_fn(g, |i, _| (i + 1) as f64);
        let d = f.diff_center();
        for j in 0..2 {
            assert_eq!(d.get(0, j), -3.0);
            assert_eq!(d.get(1, j), 1.0);
            assert_eq!(d.get(2, j), 1.0);
            assert_eq!(d.get(3, j), 1.0);
        }
    }

    /// Hand-assembled periodic second-difference matrix in x, applied to the
    /// flattened field. Independent of the operator implementations.
    fn second_diff_x_matrix(g: GridGeometry, phi: &CellField) -> Vec<f64> {
        let (nx, ny, hx) = (g.nx(), g.ny(), g.hx());
        let n = nx * ny;
        let mut mat = vec![0.0; n * n];
        for i in 0..nx {
            for j in 0..ny {
                let r = i * ny + j;
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                mat[r * n + r] += -2.0 / (hx * hx);
                mat[r * n + ip * ny + j] += 1.0 / (hx * hx);
                mat[r * n + im * ny + j] += 1.0 / (hx * hx);
            }
        }
        let v = phi.as_slice();
        (0..n)
            .map(|r| (0..n).map(|c| mat[r * n + c] * v[c]).sum())
            .collect()
    }

    #[test]
    fn second_difference_matches_assembled_matrix_and_symbol() {
        let g = GridGeometry::new(8.0, 8.0, 8, 8).unwrap();
        let lx = g.lx();
        let phi = CellField::from_fn(g, |i, _| (2.0 * PI * g.cell_x(i) / lx).cos());
        let ddx = phi.diff_x().diff_center();

        let oracle = second_diff_x_matrix(g, &phi);
        for (a, b) in ddx.as_slice().iter().zip(oracle.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-13, epsilon = 1e-13);
        }

        // Discrete eigenvalue of the cosine mode.
        let lam = -(4.0 / (g.hx() * g.hx())) * (PI * g.hx() / lx).sin().powi(2);
        for i in 0..8 {
            for j in 0..8 {
                assert_relative_eq!(ddx.get(i, j), lam * phi.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_of_two_cosines() {
        let g = GridGeometry::new(8.0, 4.0, 8, 8).unwrap();
        let (lx, ly) = (g.lx(), g.ly());
        let phi = CellField::from_fn(g, |i, j| {
            (2.0 * PI * g.cell_x(i) / lx).cos() + (2.0 * PI * g.cell_y(j) / ly).cos()
        });
        let lam_x = -(4.0 / (g.hx() * g.hx())) * (PI * g.hx() / lx).sin().powi(2);
        let lam_y = -(4.0 / (g.hy() * g.hy())) * (PI * g.hy() / ly).sin().powi(2);
        let lap = phi.laplacian();
        for i in 0..8 {
            for j in 0..8 {
                let expect = lam_x * (2.0 * PI * g.cell_x(i) / lx).cos()
                    + lam_y * (2.0 * PI * g.cell_y(j) / ly).cos();
                assert_relative_eq!(lap.get(i, j), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_sums_to_zero() {
        let g = geom(9, 7);
        let phi = rng_field(g, 7);
        let lap = phi.laplacian();
        let sum: f64 = lap.as_slice().iter().sum();
        assert!(sum.abs() < 1e-12, "laplacian sum {sum}");
        assert!(lap.mean().abs() < 1e-13);
    }

    #[test]
    fn inner_product_basics() {
        let g = GridGeometry::new(5.0, 3.0, 10, 6).unwrap();
        let phi = rng_field(g, 3);
        let zero = CellField::zeros(g);
        assert_eq!(phi.inner(&zero), 0.0);
        let one = CellField::constant(g, 1.0);
        assert_relative_eq!(one.inner(&one), 15.0, max_relative = 1e-14);
    }

    #[test]
    fn mean_is_linear() {
        let g = geom(8, 8);
        let phi = rng_field(g, 11);
        let c = 0.37;
        let shifted = phi.map(|v| v + c);
        assert_relative_eq!(shifted.mean(), phi.mean() + c, epsilon = 1e-14);
        assert_eq!(CellField::constant(g, c).mean(), c);
    }

    /// The paper-style edge product sums the edge-to-center average of the
    /// pointwise product over cells; with periodicity it must equal the
    /// reduced unique-edge form.
    #[test]
    fn reduced_edge_inner_product_equals_average_of_products() {
        let g = GridGeometry::new(3.0, 5.0, 6, 10).unwrap();
        let phi = rng_field(g, 5);
        let psi = rng_field(g, 6);
        let (f, h) = (phi.diff_x(), psi.avg_x());
        let prod = f.zip_with(&h, |a, b| a * b);
        let avg_form = g.cell_area() * prod.avg_center().as_slice().iter().sum::<f64>();
        assert_relative_eq!(f.inner(&h), avg_form, max_relative = 1e-13);

        let (fy, hy) = (phi.diff_y(), psi.avg_y());
        let prod_y = fy.zip_with(&hy, |a, b| a * b);
        let avg_form_y = g.cell_area() * prod_y.avg_center().as_slice().iter().sum::<f64>();
        assert_relative_eq!(fy.inner(&hy), avg_form_y, max_relative = 1e-13);
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn adjoint_identities_on_random_fields() {
        for (nx, ny, seed) in [(8, 8, 1u64), (16, 16, 2), (33, 17, 3)] {
            let g = GridGeometry::new(2.7, 1.9, nx, ny).unwrap();
            for s in 0..20 {
                let phi = rng_field(g, seed * 100 + s);
                let psi = rng_field(g, seed * 100 + s + 50);
                let f = psi.diff_x();
                let gy = psi.diff_y();

                // [f, Ax phi]_ew = (ax f, phi)_h and [f, Dx phi]_ew = -(dx f, phi)_h
                assert!(rel(f.inner(&phi.avg_x()), f.avg_center().inner(&phi)) < 1e-12);
                assert!(rel(f.inner(&phi.diff_x()), -f.diff_center().inner(&phi)) < 1e-12);
                assert!(rel(gy.inner(&phi.avg_y()), gy.avg_center().inner(&phi)) < 1e-12);
                assert!(rel(gy.inner(&phi.diff_y()), -gy.diff_center().inner(&phi)) < 1e-12);

                // Summation by parts and Laplacian symmetry.
                let lhs = phi.inner(&psi.laplacian());
                let mid = -(phi.diff_x().inner(&psi.diff_x()) + phi.diff_y().inner(&psi.diff_y()));
                let rhs = phi.laplacian().inner(&psi);
                assert!(rel(lhs, mid) < 1e-12, "sbp {lhs} vs {mid}");
                assert!(rel(lhs, rhs) < 1e-12, "symmetry {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn laplacian_is_negative_semidefinite() {
        let g = GridGeometry::new(4.0, 4.0, 12, 12).unwrap();
        for s in 0..20 {
            let phi = rng_field(g, 1000 + s);
            let q = phi.inner(&phi.laplacian());
            let nrm = phi.inner(&phi);
            assert!(q <= 1e-12 * nrm, "quadratic form {q} vs norm {nrm}");
        }
        // Equality only for constants.
        let c = CellField::constant(g, 2.0);
        assert!(c.inner(&c.laplacian()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn operators_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let g = GridGeometry::new(1.3, 2.1, 7, 5).unwrap();
            let phi = rng_field(g, seed + 1);
            let psi = rng_field(g, seed + 7777);
            let comb = phi.zip_with(&psi, |x, y| a * x + b * y);

            let lhs = comb.diff_x();
            let mut rhs = phi.diff_x();
            rhs.scale(a);
            rhs.add_scaled(b, &psi.diff_x());
            for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }

            let lhs = comb.laplacian();
            let mut rhs = phi.laplacian();
            rhs.scale(a);
            rhs.add_scaled(b, &psi.laplacian());
            for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-11 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    #[should_panic(expected = "geometry mismatch")]
    fn geometry_mismatch_is_a_hard_error() {
        let a = CellField::zeros(geom(4, 4));
        let b = CellField::zeros(geom(4, 5));
        let _ = a.inner(&b);
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn non_finite_values_are_a_hard_error() {
        let mut a = CellField::zeros(geom(4, 4));
        a.set(2, 1, f64::NAN);
        a.assert_finite("test field");
    }
}
