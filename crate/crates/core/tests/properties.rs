use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use greens_lab::linalg::{factor_symmetric, solve};
use greens_lab::positivity::{load_mean, quadratic_form, row_mass_field, total_mass};
use greens_lab::{
    apply_kernel, apply_operator, build_greens_kernel, discretize, integrate, make_grid, quadrature_weights,
    Bounds, DiscreteOperator, Family, Field, GreensKernel, Grid, Potential, ProblemSpec,
};

const N: usize = 24;

struct Fixture {
    op: Arc<DiscreteOperator>,
    kernel: GreensKernel,
}

fn fixtures() -> &'static Vec<Fixture> {
    static CELL: OnceLock<Vec<Fixture>> = OnceLock::new();
    CELL.get_or_init(|| {
        [Family::SecondOrder1D, Family::FourthOrder1D, Family::SixthOrder1D]
            .into_iter()
            .flat_map(|family| {
                [Potential::Zero, Potential::Constant { value: 3e4 }].map(|p| {
                    let grid = make_grid(1, Bounds::Interval { a: 0.0, b: 1.0 }, &[N]).unwrap();
                    let op = Arc::new(discretize(&ProblemSpec::new(family, p, grid).unwrap()).unwrap());
                    let kernel = build_greens_kernel(&op, 1e-10).unwrap();
                    Fixture { op, kernel }
                })
            })
            .collect()
    })
}

fn grid() -> Arc<Grid> {
    Arc::clone(fixtures()[0].op.grid())
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, N)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn integrate_is_linear(f in values(), g in values(), alpha in -5.0..5.0f64, beta in -5.0..5.0f64) {
        let w = quadrature_weights(&grid());
        let ff = Field::new(grid(), f).unwrap();
        let gg = Field::new(grid(), g).unwrap();
        let combo = ff.combine(alpha, &gg, beta).unwrap();
        let lhs = integrate(&combo, &w).unwrap();
        let rhs = alpha * integrate(&ff, &w).unwrap() + beta * integrate(&gg, &w).unwrap();
        let scale = (alpha.abs() + beta.abs()) * 10.0 * w.sum();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn kernel_reproduces_solver(f in values(), pick in 0usize..6) {
        let fx = &fixtures()[pick];
        let field = Field::new(Arc::clone(fx.op.grid()), f.clone()).unwrap();
        let via_kernel = apply_kernel(&fx.kernel, &field).unwrap();
        let fact = factor_symmetric(fx.op.matrix(), 1e-10).unwrap();
        let via_solve = solve(&fact, &f).unwrap();
        let scale = max_abs(&via_solve).max(f64::MIN_POSITIVE);
        for (a, b) in via_kernel.values().iter().zip(&via_solve) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn solve_inverts_apply(u in values(), pick in 0usize..6) {
        let fx = &fixtures()[pick];
        let field = Field::new(Arc::clone(fx.op.grid()), u.clone()).unwrap();
        let f = apply_operator(&fx.op, &field).unwrap();
        let fact = factor_symmetric(fx.op.matrix(), 1e-10).unwrap();
        let back = solve(&fact, f.values()).unwrap();
        let scale = max_abs(&u).max(1.0);
        for (a, b) in back.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn quadratic_form_nonnegative(z in values(), pick in 0usize..6) {
        let fx = &fixtures()[pick];
        let field = Field::new(Arc::clone(fx.op.grid()), z.clone()).unwrap();
        let q = quadratic_form(&fx.kernel, &field).unwrap();
        let norm2: f64 = z.iter().map(|v| v * v).sum();
        prop_assert!(q >= -1e-9 * norm2 * fx.kernel.weighted().max_abs());
    }

    #[test]
    fn mean_is_row_mass_weighted_load(f in prop::collection::vec(0.0..1.0f64, N), pick in 0usize..6) {
        // discrete Fubini: mean(G f) = sum_j w_j f_j rowmass_j
        let fx = &fixtures()[pick];
        let field = Field::new(Arc::clone(fx.op.grid()), f.clone()).unwrap();
        let mean = load_mean(&fx.kernel, &field).unwrap();
        let rm = row_mass_field(&fx.kernel);
        let w = fx.kernel.weights().values();
        let direct: f64 = (0..N).map(|j| w[j] * f[j] * rm.values()[j]).sum();
        prop_assert!((mean - direct).abs() <= 1e-12 * rm.max_abs().max(total_mass(&fx.kernel).abs()));
    }

    #[test]
    fn symmetric_kernel_entries(i in 0usize..N, j in 0usize..N, pick in 0usize..6) {
        let k = fixtures()[pick].kernel.matrix();
        prop_assert_eq!(k[(i, j)], k[(j, i)]);
    }
}
