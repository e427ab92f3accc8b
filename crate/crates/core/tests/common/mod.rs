//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use asianfb::scheme::StepContext;
use asianfb::solver_newton::layer_residual;

/// Dense LU with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        assert!(a[col][col] != 0.0, "singular dense matrix");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(row);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Stacked residual `(F1, F2)` with the unknowns `(y_1, .., y_{N-1}, z)`.
pub fn stacked_residual(u: &[f64], ctx: &StepContext<'_, f64>) -> Vec<f64> {
    let n = u.len();
    let mut y = Vec::with_capacity(n + 1);
    y.push(-1.0);
    y.extend_from_slice(&u[..n - 1]);
    y.push(0.0);
    let (mut f1, f2) = layer_residual(&y, u[n - 1], ctx).unwrap();
    f1.push(f2);
    f1
}

/// Central difference Jacobian of [`stacked_residual`].
pub fn fd_jacobian(u: &[f64], ctx: &StepContext<'_, f64>, step: f64) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut jac = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut plus = u.to_vec();
        let mut minus = u.to_vec();
        plus[col] += step;
        minus[col] -= step;
        let fp = stacked_residual(&plus, ctx);
        let fm = stacked_residual(&minus, ctx);
        for row in 0..n {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * step);
        }
    }
    jac
}

/// Reproducible uniform numbers without extra dependencies.
pub struct Lcg(pub u64);

impl Lcg {
    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + ((hi_inclusive - lo + 1) as f64 * self.unit()) as usize
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
