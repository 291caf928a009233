//! Shared helpers for the integration suites: seeded field generators and
//! independent dense-algebra oracles. Nothing here goes through the grid
//! operators being tested.

use mmc_tdgl::{CellField, GridGeometry, ModelParams};

pub fn reference_params() -> ModelParams {
    ModelParams::new(0.16, 4.34, 2.37, 0.0).unwrap()
}

/// Deterministic xorshift field in `[lo, hi)`.
pub fn seeded_field(geom: GridGeometry, seed: u64, lo: f64, hi: f64) -> CellField {
    let mut state = seed.wrapping_mul(6364136223846793005).max(3);
    CellField::from_fn(geom, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    })
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Hand-assembled dense matrix of the operator `I - s c lap_h` on the
/// periodic grid, row-major over cells (i * ny + j). Coefficients are placed
/// from the five-point stencil directly.
pub fn helmholtz_dense(geom: GridGeometry, s: f64, c: f64) -> Vec<f64> {
    let (nx, ny) = (geom.nx(), geom.ny());
    let (hx2, hy2) = (geom.hx() * geom.hx(), geom.hy() * geom.hy());
    let n = nx * ny;
    let mut a = vec![0.0f64; n * n];
    for i in 0..nx {
        for j in 0..ny {
            let r = i * ny + j;
            a[r * n + r] += 1.0 + s * c * (2.0 / hx2 + 2.0 / hy2);
            let east = ((i + 1) % nx) * ny + j;
            let west = ((i + nx - 1) % nx) * ny + j;
            let north = i * ny + (j + 1) % ny;
            let south = i * ny + (j + ny - 1) % ny;
            a[r * n + east] -= s * c / hx2;
            a[r * n + west] -= s * c / hx2;
            a[r * n + north] -= s * c / hy2;
            a[r * n + south] -= s * c / hy2;
        }
    }
    a
}

/// Gaussian elimination with partial pivoting; `a` is n x n row-major,
/// consumed. Returns the solution of `a x = b`.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * n + col]
                    .abs()
                    .partial_cmp(&a[r2 * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        assert!(d.abs() > 0.0, "singular matrix");
        for row in (col + 1)..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in (row + 1)..n {
            s -= a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    x
}
