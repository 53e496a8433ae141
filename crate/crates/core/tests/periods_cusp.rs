use folgal_core::periods::{
    build_cycles, holonomy_generators, monodromy_action, period_matrix, period_of, realize_constants,
};
use folgal_core::quasihomog::QuasiData;
use folgal_core::scalar::qi;
use folgal_core::series::{Series1, Series2, Weights, EXACT};
use num_complex::Complex64 as C;

fn hyperelliptic(n: u32) -> QuasiData {
    let w = if n.is_multiple_of(2) {
        Weights::new(1, n / 2)
    } else {
        Weights::new(2, n)
    };
    let h = Series2::from_terms(w, [(0, 2, qi(1)), (n, 0, qi(-1))], EXACT);
    QuasiData::new(&h, w).unwrap()
}

#[test]
fn cusp_period_system() {
    let qd = hyperelliptic(3);
    let z0 = C::new(1.0, 0.0);
    let ps = period_matrix(&qd, z0, build_cycles(&qd, z0).unwrap()).unwrap();
    assert!(ps.det().norm() > 1e-8, "det {}", ps.det());
    assert!(ps.error < 1e-10);
    for (i, cyc) in ps.cycles.iter().enumerate() {
        let moved = cyc.perturbed(0.05, 12);
        for j in 0..ps.mu() {
            let (v, _) = ps.integrate(&moved, j).unwrap();
            assert!((v - ps.m[(i, j)]).norm() < 1e-9, "homotopy {i} {j}");
        }
        let mr = monodromy_action(&ps, i).unwrap();
        assert!(mr.deviation < 1e-9, "rho deviation {}", mr.deviation);
        assert!(mr.rho_power_error < 1e-12);
    }
    let c = [C::new(0.3, -1.2), C::new(2.0, 0.5)];
    for (i, cyc) in ps.cycles.iter().enumerate() {
        let direct = direct_period(&qd, &ps, cyc, &c);
        assert!((direct - ps.periods_of(&c)[i]).norm() < 1e-8);
    }
    let t = ps.periods_of(&c);
    let r = realize_constants(&ps, &t).unwrap();
    for k in 0..2 {
        assert!((r.c[k] - c[k]).norm() < 1e-8 * c[k].norm());
    }
}

fn direct_period(
    qd: &QuasiData,
    ps: &folgal_core::periods::PeriodSystem,
    cyc: &folgal_core::periods::CyclePath,
    c: &[C],
) -> C {
    // f_c has complex coefficients; integrate its real and imaginary parts
    // (the test constants are exact decimals)
    let re = Series2::from_terms(
        qd.weights,
        (0..qd.mu()).map(|k| {
            let m = qd.cobasis[k].monomial;
            (
                m.i,
                m.j,
                folgal_core::scalar::q((c[k].re * 1e6).round() as i64, 1_000_000),
            )
        }),
        EXACT,
    );
    let im = Series2::from_terms(
        qd.weights,
        (0..qd.mu()).map(|k| {
            let m = qd.cobasis[k].monomial;
            (
                m.i,
                m.j,
                folgal_core::scalar::q((c[k].im * 1e6).round() as i64, 1_000_000),
            )
        }),
        EXACT,
    );
    let (a, _) = period_of(&ps.fiber, cyc, &re).unwrap();
    let (b, _) = period_of(&ps.fiber, cyc, &im).unwrap();
    a + C::new(0.0, 1.0) * b
}

#[test]
fn quintic_has_invertible_periods() {
    for n in [4, 5, 7] {
        let qd = hyperelliptic(n);
        let z0 = C::new(0.7, 0.4);
        let ps = period_matrix(&qd, z0, build_cycles(&qd, z0).unwrap()).unwrap();
        assert_eq!(ps.mu(), n as usize - 1);
        assert!(ps.det().norm() > 1e-8, "n={n} det {}", ps.det());
        for i in 0..ps.mu() {
            let mr = monodromy_action(&ps, i).unwrap();
            assert!(mr.deviation < 1e-9, "n={n} rho {}", mr.deviation);
        }
    }
}

#[test]
fn holonomy_of_z_squared() {
    let theta: Series1<C> = Series1::monomial(C::new(1.0, 0.0), 2, EXACT);
    let gens = holonomy_generators(&theta, &[C::new(1.0, 0.0), C::new(2.0, 0.0)], 15).unwrap();
    for (k, g) in gens.iter().enumerate() {
        let c = (k + 1) as f64;
        for e in 1..=15u32 {
            assert!((g.series().coeff(e) - C::new(c.powi(e as i32 - 1), 0.0)).norm() < 1e-10);
        }
    }
    let comm = gens[0].commutator(&gens[1]).unwrap();
    assert!(comm.series().max_abs_diff(&Series1::identity(EXACT), 15) < 1e-10);
    let zero = holonomy_generators(&theta, &[C::new(0.0, 0.0)], 15).unwrap();
    assert!(zero[0].is_identity());
}
