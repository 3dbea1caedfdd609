use hawkes_dt::model::{erlang_moments, mean_count, mean_intensity, mean_loss};
use hawkes_dt::quadrature::integrate_adaptive;
use hawkes_dt::{HawkesParams, KernelSpec, MarkDistribution, ParamError};
use proptest::prelude::*;

fn exp_params(alpha: f64, beta: f64, lam: f64, x: f64, mean_mark: f64) -> HawkesParams {
    HawkesParams::new(
        KernelSpec::exponential(alpha, beta),
        lam,
        x,
        MarkDistribution::ExponentialRate(1.0 / mean_mark),
    )
}

/// Independent RK4 integration of the scalar moment equation
/// `dm/dt = beta (lambda_inf - m) + alpha E[mark] m` with a very small step.
fn rk4_mean(p: &HawkesParams, t: f64, steps: usize) -> f64 {
    let beta = p.kernel.beta;
    let load = p.load();
    let rhs = |m: f64| beta * (p.lambda_inf - m) + load * m;
    let dt = t / steps as f64;
    let mut m = p.x0;
    for _ in 0..steps {
        let k1 = rhs(m);
        let k2 = rhs(m + 0.5 * dt * k1);
        let k3 = rhs(m + 0.5 * dt * k2);
        let k4 = rhs(m + dt * k3);
        m += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    m
}

#[test]
fn exponential_closed_form_matches_numerical_ode() {
    let p = HawkesParams::fig4();
    for t in [0.1, 0.5, 1.0, 3.0] {
        let closed = mean_intensity(&p, t).unwrap();
        assert!((closed - rk4_mean(&p, t, 20_000)).abs() < 1e-8, "t = {t}");
    }
    let far = mean_intensity(&p, 50.0).unwrap();
    assert!((far - 5.0).abs() < 1e-12);
}

#[test]
fn mean_count_is_integral_of_mean_intensity() {
    let p = HawkesParams::fig4();
    for t in [0.25, 1.0, 4.0] {
        let quad = integrate_adaptive(|s| mean_intensity(&p, s).unwrap(), 0.0, t, 1e-13);
        assert!((mean_count(&p, t).unwrap() - quad).abs() < 1e-10, "t = {t}");
    }
    assert!((mean_count(&p, 1.0).unwrap() - 4.683_262).abs() < 1e-6);
    assert!((mean_loss(&p, 1.0).unwrap() - 4.683_262).abs() < 1e-6);
}

/// Closed-form solution of the Erlang moment system by eigen-decomposition:
/// the homogeneous matrix `[[-b, 1], [am, -b]]` has eigenvalues `-b +- sqrt(am)`.
fn erlang_closed_form(p: &HawkesParams, t: f64) -> (f64, f64) {
    let b = p.kernel.beta;
    let am = p.load();
    let r = am.sqrt();
    // Equilibrium: b (linf - l) + x = 0, -b x + am l = 0.
    let l_eq = b * b * p.lambda_inf / (b * b - am);
    let x_eq = am * l_eq / b;
    let (dl, dx) = (p.x0 - l_eq, -x_eq);
    // Eigenvectors (1, r) for -b + r and (1, -r) for -b - r.
    let c1 = 0.5 * (dl + dx / r);
    let c2 = 0.5 * (dl - dx / r);
    let e1 = ((-b + r) * t).exp();
    let e2 = ((-b - r) * t).exp();
    (l_eq + c1 * e1 + c2 * e2, x_eq + r * (c1 * e1 - c2 * e2))
}

#[test]
fn erlang_ode_matches_eigen_solution() {
    for (alpha, mark) in [(2.0, 1.0), (10.0, 0.5), (24.0, 1.0)] {
        let p = HawkesParams::new(
            KernelSpec::erlang(alpha, 5.0),
            3.0,
            4.0,
            MarkDistribution::Constant(mark),
        );
        for t in [0.1, 1.0, 2.5] {
            let m = erlang_moments(&p, t).unwrap();
            let (l, x) = erlang_closed_form(&p, t);
            assert!(
                (m.intensity - l).abs() < 1e-9 * l.max(1.0),
                "alpha {alpha}, t {t}"
            );
            assert!(
                (m.auxiliary - x).abs() < 1e-9 * x.max(1.0),
                "alpha {alpha}, t {t}"
            );
        }
    }
}

#[test]
fn erlang_count_is_integral_of_intensity() {
    let p = HawkesParams::new(
        KernelSpec::erlang(2.0, 5.0),
        3.0,
        4.0,
        MarkDistribution::Constant(1.0),
    );
    let t = 1.0;
    let quad = integrate_adaptive(|s| erlang_closed_form(&p, s).0, 0.0, t, 1e-13);
    assert!((erlang_moments(&p, t).unwrap().count - quad).abs() < 1e-9);
    assert!((mean_count(&p, t).unwrap() - quad).abs() < 1e-9);
}

#[test]
fn unstable_parameters_have_no_moments() {
    let p = exp_params(5.0, 5.0, 3.0, 4.0, 1.0);
    assert!(matches!(
        mean_intensity(&p, 1.0),
        Err(ParamError::Unstable { .. })
    ));
    assert!(matches!(
        mean_count(&p, 1.0),
        Err(ParamError::Unstable { .. })
    ));
}

fn stable_exp() -> impl Strategy<Value = HawkesParams> {
    (
        0.1f64..10.0,
        0.1f64..5.0,
        0.0f64..10.0,
        0.1f64..3.0,
        0.0f64..0.95,
    )
        .prop_map(|(beta, lam, x, mark, frac)| {
            let alpha = frac * beta / mark;
            exp_params(alpha, beta, lam, x, mark)
        })
}

proptest! {
    #[test]
    fn mean_intensity_is_monotone_and_bounded(p in stable_exp(), t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
        let t2 = t1 + dt;
        let m1 = mean_intensity(&p, t1).unwrap();
        let m2 = mean_intensity(&p, t2).unwrap();
        let limit = p.kernel.beta * p.lambda_inf / (p.kernel.beta - p.load());
        // Monotone toward the stationary mean.
        if p.x0 <= limit {
            prop_assert!(m2 >= m1 - 1e-12 * m1.abs().max(1.0));
        } else {
            prop_assert!(m2 <= m1 + 1e-12 * m1.abs().max(1.0));
        }
        let floor = p.x0.min(p.lambda_inf) * (-p.kernel.beta * t1).exp();
        prop_assert!(m1 >= floor - 1e-12 && m1 > 0.0);
    }

    #[test]
    fn count_derivative_is_intensity(p in stable_exp(), t in 0.01f64..5.0) {
        let step = 1e-5;
        let fd = (mean_count(&p, t + step).unwrap() - mean_count(&p, t - step).unwrap()) / (2.0 * step);
        let m = mean_intensity(&p, t).unwrap();
        prop_assert!((fd - m).abs() <= 1e-8 * m.abs().max(1.0), "fd {fd} vs {m}");
        prop_assert!(mean_count(&p, t).unwrap() >= mean_count(&p, t - step).unwrap());
        prop_assert_eq!(mean_count(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn stability_depends_on_product_only(alpha in 0.01f64..20.0, beta in 0.1f64..10.0, c in 0.1f64..10.0) {
        let base = exp_params(alpha, beta, 1.0, 1.0, 1.0);
        let scaled = HawkesParams::new(
            KernelSpec::exponential(alpha / c, beta),
            1.0,
            1.0,
            MarkDistribution::Constant(c),
        );
        let a = base.validate().is_ok();
        let b = scaled.validate().is_ok();
        // Borderline products may differ only by rounding.
        if (alpha - beta).abs() > 1e-9 * beta {
            prop_assert_eq!(a, b);
        }
    }
}
