use std::f64::consts::PI;

use cf_extremal::lca::FiniteGroup;
use cf_extremal::seq::{is_pd_z, is_pd_zm, Sequence, SupportZ, SupportZm, PD_TOL};
use cf_extremal::solver_z::{cf_z, grid_sequence, k_grid};
use cf_extremal::solver_zm::{brute_group_oracle, cf_m, k_m, solve_zm, Mode};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn arb_zm(max_m: u64) -> impl Strategy<Value = SupportZm> {
    (2..=max_m, any::<u64>()).prop_map(|(m, mask)| {
        let half = std::iter::once(1).chain((2..=m / 2).filter(|k| mask >> (k % 64) & 1 == 1));
        SupportZm::from_half(m, half).unwrap()
    })
}

fn arb_z(max: u64) -> impl Strategy<Value = SupportZ> {
    (1..=max, any::<u32>()).prop_map(|(top, mask)| {
        SupportZ::new(std::iter::once(1).chain((2..=top).filter(|k| mask >> k & 1 == 1))).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn real_and_complex_values_are_sandwiched(h in arb_zm(40)) {
        let m = h.modulus() as f64;
        let k = k_m(&h, TOL).unwrap().value;
        let cf = cf_m(&h, TOL).unwrap().value;
        prop_assert!((PI / m).cos() * cf <= k + 1e-9, "{} {}", k, cf);
        prop_assert!(k <= cf + 1e-9);
        prop_assert!((0.5 - 1e-9..=1.0 + 1e-9).contains(&k));
    }

    #[test]
    fn extremal_sequences_are_certified(h in arb_zm(40), complex in any::<bool>()) {
        let mode = if complex { Mode::Complex } else { Mode::Real };
        let r = solve_zm(&h, mode, TOL).unwrap();
        let Sequence::Zm(psi) = &r.extremal else { panic!("cyclic extremal") };
        prop_assert!(is_pd_zm(psi, PD_TOL).is_pd);
        prop_assert_eq!(psi.get(0).re, 1.0);
        for k in 0..h.modulus() as i64 {
            if !h.contains(k) {
                prop_assert!(psi.get(k).norm() <= 1e-9);
            }
        }
        prop_assert!(r.enclosure[0] <= r.value && r.value <= r.enclosure[1]);
    }

    #[test]
    fn oracle_on_the_cyclic_group_agrees(h in arb_zm(24), complex in any::<bool>()) {
        let mode = if complex { Mode::Complex } else { Mode::Real };
        let g = FiniteGroup::new(vec![h.modulus()]).unwrap();
        let omega: Vec<Vec<u64>> = h.residues().iter().map(|r| vec![*r]).collect();
        let (oracle, _) = brute_group_oracle(&g, &omega, &[1], mode, TOL).unwrap();
        let direct = solve_zm(&h, mode, TOL).unwrap();
        prop_assert!((oracle.value - direct.value).abs() <= 1e-9);
    }

    #[test]
    fn cf_z_lies_in_range_with_certificate(h in arb_z(16)) {
        let r = cf_z(&h, TOL).unwrap();
        prop_assert!((0.5 - 1e-9..=1.0 + 1e-9).contains(&r.value));
        let Sequence::Z(psi) = &r.extremal else { panic!("extremal on Z") };
        prop_assert!(is_pd_z(psi, PD_TOL).is_pd);
        prop_assert_eq!(psi.get(0).re, 1.0);
        prop_assert!(psi.entries().all(|(k, _)| h.contains(k)));
    }

    #[test]
    fn cf_z_is_monotone_in_the_support(h in arb_z(12), extra in 2u64..=14) {
        let bigger = SupportZ::new(h.half().iter().copied().chain(std::iter::once(extra))).unwrap();
        let small = cf_z(&h, TOL).unwrap().value;
        let large = cf_z(&bigger, TOL).unwrap().value;
        prop_assert!(small <= large + 1e-9);
    }

    #[test]
    fn grids_are_nested_and_dominate(h in arb_z(10)) {
        let (seq, _) = grid_sequence(&h, 1e-9, 1 << 14).unwrap();
        let limit = cf_z(&h, TOL).unwrap().value;
        for w in seq.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-9);
        }
        for (_, v) in &seq {
            prop_assert!(*v >= limit - 1e-8);
        }
        let (last_m, last) = *seq.last().unwrap();
        let (again, _, _) = k_grid(&h, last_m, &[]).unwrap();
        prop_assert!((again - last).abs() <= 1e-12);
    }
}

#[test]
fn duality_trend_on_z() {
    // H = {0, ±1}: M(H) = 1 and H* truncated to [1, U] is an interval.
    let t = cf_extremal::solver_z::verify_duality_z(&SupportZ::interval(1), &[10, 20], 1e-9).unwrap();
    for s in &t.steps {
        assert!((s.m - 1.0).abs() < 1e-9);
        assert!((s.product - 2.0 * (PI / (s.universe + 2) as f64).cos()).abs() < 1e-8);
    }
    assert!(t.steps[1].product > t.steps[0].product);

    // Exchange and a 2^15 grid both give M(H*) = 1.4105190 at U = 40.
    let t = cf_extremal::solver_z::verify_duality_z(&SupportZ::interval(2), &[40], 1e-9).unwrap();
    assert!((t.steps[0].product - 1.994775106).abs() < 1e-7, "{:?}", t.steps);
}
