use proptest::prelude::*;

use pullwave_core::dynamics::{Grid, State};
use pullwave_core::noise::{generate_wiener, omega_m_check, ou_from_integral, shift_path};
use pullwave_core::pullback::{cutoff_rho, hausdorff_semidistance, tail_mass};

const DT: f64 = 0.01;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shifts_compose(seed in 0u64..1000, a in -300i64..300, b in -300i64..300) {
        let path = generate_wiener(seed, -10.0, 10.0, DT).unwrap();
        let (s1, s2) = (a as f64 * DT, b as f64 * DT);
        prop_assume!((s1 + s2).abs() < 9.0);
        let twice = shift_path(&shift_path(&path, s1).unwrap(), s2).unwrap();
        let once = shift_path(&path, s1 + s2).unwrap();
        prop_assert_eq!(twice.len(), once.len());
        for k in 0..once.len() {
            prop_assert!((twice.time(k) - once.time(k)).abs() < 1e-9);
            prop_assert!((twice.value(k) - once.value(k)).abs() < 1e-12);
        }
        prop_assert_eq!(once.at(0.0).unwrap(), 0.0);
    }

    #[test]
    fn ou_is_linear_in_the_path(s1 in 0u64..500, s2 in 500u64..1000) {
        let p = generate_wiener(s1, -45.0, 5.0, DT).unwrap();
        let q = generate_wiener(s2, -45.0, 5.0, DT).unwrap();
        let sum = p.add(&q).unwrap();
        let ou = |w| ou_from_integral(w, 1.0, 0.0, 5.0, 1e-6).unwrap();
        let (yp, yq, ys) = (ou(&p), ou(&q), ou(&sum));
        for k in 0..ys.len() {
            let lhs = ys.values()[k];
            let rhs = yp.values()[k] + yq.values()[k];
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn omega_m_membership_is_monotone(seed in 0u64..1000) {
        let path = generate_wiener(seed, -70.0, 30.0, DT).unwrap();
        let y = ou_from_integral(&path, 1.0, -30.0, 30.0, 1e-6).unwrap();
        let members: Vec<bool> = [1, 2, 5, 10, 20, 25]
            .iter()
            .map(|&m| omega_m_check(&path, &y, m).unwrap().member())
            .collect();
        prop_assert!(members.windows(2).all(|w| !w[0] || w[1]));
    }

    #[test]
    fn tail_mass_decreases_with_radius(
        amp in prop::collection::vec(-3.0f64..3.0, 4),
        k1 in 0.1f64..9.9,
        k2 in 0.1f64..9.9,
    ) {
        let grid = Grid::new(10.0, 101).unwrap();
        let s = State::from_fns(
            &grid,
            |x| amp[0] * (-x * x / 8.0).exp() + amp[1] * (0.3 * x).sin(),
            |x| amp[2] * (0.2 * x).cos() + amp[3],
        );
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let m_lo = tail_mass(&s, lo, &grid).unwrap();
        let m_hi = tail_mass(&s, hi, &grid).unwrap();
        prop_assert!(m_hi >= 0.0);
        prop_assert!(m_hi <= m_lo + 1e-12 * (1.0 + m_lo));
    }

    #[test]
    fn cutoff_stays_in_unit_interval(s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let (r, q) = (cutoff_rho(s), cutoff_rho(t));
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r, cutoff_rho(-s));
        if s.abs() <= t.abs() {
            prop_assert!(r <= q);
        }
    }
}

#[test]
fn semidistance_of_a_subset_vanishes() {
    let grid = Grid::new(5.0, 51).unwrap();
    let set: Vec<State> = (1..5)
        .map(|j| State::from_fns(&grid, |x| j as f64 * (-x * x).exp(), |x| 0.1 * j as f64 * x.sin()))
        .collect();
    assert_eq!(hausdorff_semidistance(&set[1..3], &set, &grid).unwrap(), 0.0);
    assert!(hausdorff_semidistance(&set, &set[1..3], &grid).unwrap() > 0.0);
}
