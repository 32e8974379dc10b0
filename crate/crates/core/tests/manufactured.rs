//! Observed convergence orders of the discretization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use strom_core::banded::SparseLu;
use strom_core::fom::{assemble_1d_advdiff, assemble_2d_advdiff, fom_solve, ParametrizedIVP};

fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Final-state error of Crank–Nicolson against the exact semi-discrete flow
/// `u(T) = A⁻¹(e^{AT} − I) g`.
fn temporal_errors() -> Vec<f64> {
    let mu = [1.0, 0.015];
    let t_final = 1.0;
    let base = ParametrizedIVP::advection_diffusion_1d(31, 0.02, t_final, 1.0).unwrap();
    let a = base.op.evaluate(&mu).unwrap().to_dense();
    let e = (&a * t_final).exp() - DMatrix::identity(31, 31);
    let exact = a.lu().solve(&(e * &base.source)).unwrap();
    [0.02, 0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| {
            let ivp = ParametrizedIVP::advection_diffusion_1d(31, dt, t_final, 1.0).unwrap();
            let u = fom_solve(&ivp, &mu).unwrap().final_state();
            (u - &exact).amax()
        })
        .collect()
}

/// Steady error of `A u + g = 0` against `sin(πx)` on refined 1D grids.
fn spatial_errors_1d() -> Vec<f64> {
    let (c, nu) = (1.0, 0.015);
    [31, 63, 127, 255]
        .iter()
        .map(|&n| {
            let h = 1.0 / (n + 1) as f64;
            let x: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
            let exact = DVector::from_iterator(n, x.iter().map(|&x| (PI * x).sin()));
            let g = DVector::from_iterator(
                n,
                x.iter()
                    .map(|&x| c * PI * (PI * x).cos() + nu * PI * PI * (PI * x).sin()),
            );
            let a = assemble_1d_advdiff(n).unwrap().evaluate(&[c, nu]).unwrap();
            let u = -SparseLu::factor(&a).unwrap().solve(&g);
            (u - exact).amax()
        })
        .collect()
}

/// Steady 2D error against `sin(πx)sin(πy)`, measured on nodes in `[1/4, 3/4]²`.
fn spatial_errors_2d() -> Vec<f64> {
    let (b, sigma, nu) = (0.5, 0.004, 1.0);
    let (cx, cy) = ((PI / 3.0).cos(), (PI / 3.0).sin());
    [15, 31, 63, 127]
        .iter()
        .map(|&n| {
            let h = 1.0 / (n + 1) as f64;
            let mut exact = DVector::zeros(n * n);
            let mut g = DVector::zeros(n * n);
            for iy in 0..n {
                for ix in 0..n {
                    let (x, y) = ((ix + 1) as f64 * h, (iy + 1) as f64 * h);
                    let (sx, sy, kx, ky) = ((PI * x).sin(), (PI * y).sin(), (PI * x).cos(), (PI * y).cos());
                    let u = sx * sy;
                    let lu = -b * (cx * PI * kx * sy + cy * PI * sx * ky) - sigma * u - nu * 2.0 * PI * PI * u;
                    exact[iy * n + ix] = u;
                    g[iy * n + ix] = -lu;
                }
            }
            let a = assemble_2d_advdiff(n, n).unwrap().evaluate(&[b, sigma, nu]).unwrap();
            let u = -SparseLu::factor(&a).unwrap().solve(&g);
            let mut err: f64 = 0.0;
            for iy in 0..n {
                for ix in 0..n {
                    let (x, y) = ((ix + 1) as f64 * h, (iy + 1) as f64 * h);
                    if (0.25..=0.75).contains(&x) && (0.25..=0.75).contains(&y) {
                        err = err.max((u[iy * n + ix] - exact[iy * n + ix]).abs());
                    }
                }
            }
            err
        })
        .collect()
}

#[test]
fn crank_nicolson_is_second_order_in_time() {
    let orders = observed_orders(&temporal_errors());
    let last = *orders.last().unwrap();
    assert!((last - 2.0).abs() <= 0.2, "orders {orders:?}");
}

#[test]
fn upwind_1d_is_first_order_in_space() {
    let orders = observed_orders(&spatial_errors_1d());
    let last = *orders.last().unwrap();
    assert!((last - 1.0).abs() <= 0.2, "orders {orders:?}");
}

#[test]
fn second_order_upwind_2d_is_second_order_in_the_interior() {
    let orders = observed_orders(&spatial_errors_2d());
    let last = *orders.last().unwrap();
    assert!((last - 2.0).abs() <= 0.3, "orders {orders:?}");
}
