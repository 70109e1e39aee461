use std::f64::consts::PI;

use cf_extremal::lca::{
    extremal_zm, lift_witness, reduce, restrict, solve_group, Factor, FiniteGroup, GroupDescriptor, GroupElement,
    Interval, OmegaDescriptor, ReducedSupport,
};
use cf_extremal::seq::SeqZm;
use cf_extremal::solver_zm::Mode;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

#[derive(Debug)]
struct Instance {
    descriptor: GroupDescriptor,
    group: FiniteGroup,
    omega: OmegaDescriptor,
    points: Vec<Vec<u64>>,
    z: Vec<u64>,
}

fn element(d: &GroupDescriptor, x: &[u64]) -> GroupElement {
    d.element(x.iter().map(|a| BigRational::from_integer(BigInt::from(*a))).collect()).unwrap()
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    prop::collection::vec(2u64..=12, 1..=3).prop_flat_map(|moduli| {
        let order: u64 = moduli.iter().product();
        (Just(moduli), 1..order, prop::collection::vec(any::<bool>(), order as usize)).prop_map(
            |(moduli, z_index, mask)| {
                let group = FiniteGroup::new(moduli.clone()).unwrap();
                let descriptor = GroupDescriptor::new(moduli.iter().map(|m| Factor::Cyclic { m: *m }).collect()).unwrap();
                let z = group.element(z_index as usize);
                let mut inside = mask;
                inside[0] = true;
                inside[group.index(&z)] = true;
                for i in 0..inside.len() {
                    if inside[i] {
                        let neg = group.index(&group.neg(&group.element(i)));
                        inside[neg] = true;
                    }
                }
                let points: Vec<Vec<u64>> =
                    (0..inside.len()).filter(|i| inside[*i]).map(|i| group.element(i)).collect();
                let omega = OmegaDescriptor::Explicit(points.iter().map(|x| element(&descriptor, x)).collect());
                Instance { descriptor, group, omega, points, z }
            },
        )
    })
}

fn rational(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduced_supports_are_symmetric(inst in arb_instance()) {
        let z = element(&inst.descriptor, &inst.z);
        let r = reduce(&inst.descriptor, &inst.omega, &z, None).unwrap();
        let ReducedSupport::Zm(h) = &r.support else { panic!("finite order") };
        for k in h.residues() {
            prop_assert!(h.contains(-(*k as i64)));
        }
        prop_assert_eq!(h.modulus(), inst.group.element_order(&inst.z));
    }

    #[test]
    fn group_values_are_bounded_and_sandwiched(inst in arb_instance()) {
        let z = element(&inst.descriptor, &inst.z);
        let real = solve_group(&inst.descriptor, &inst.omega, &z, Mode::Real, 1e-10, None).unwrap().report.value;
        let complex = solve_group(&inst.descriptor, &inst.omega, &z, Mode::Complex, 1e-10, None).unwrap().report.value;
        let m = inst.group.element_order(&inst.z) as f64;
        prop_assert!(real >= 0.5 - 1e-9 && complex <= 1.0 + 1e-9);
        prop_assert!((PI / m).cos() * complex <= real + 1e-9 && real <= complex + 1e-9);
        if m == 2.0 {
            prop_assert!((real - 1.0).abs() <= 1e-9 && (complex - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn restrict_undoes_lift(inst in arb_instance()) {
        let z = element(&inst.descriptor, &inst.z);
        let r = solve_group(&inst.descriptor, &inst.omega, &z, Mode::Complex, 1e-10, None).unwrap();
        let psi: &SeqZm = extremal_zm(&r.report).unwrap();
        let f = lift_witness(psi, &inst.group, &inst.z, &inst.points).unwrap();
        prop_assert_eq!(&restrict(&f, &inst.z).unwrap(), psi);
        prop_assert!((f.get(&inst.z).norm() - r.report.value).abs() <= 1e-9);
        prop_assert_eq!(f.get(&vec![0; inst.z.len()]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn torus_boxes_reduce_like_arcs(p in 1i64..12, q in 2i64..24, a in 1i64..20) {
        prop_assume!(p < q);
        let t = GroupDescriptor::new(vec![Factor::Torus]).unwrap();
        let width = rational(a, 41);
        let omega = OmegaDescriptor::Boxes(vec![vec![Interval::new(-width.clone(), width.clone())]]);
        let z = t.element(vec![rational(p, q)]).unwrap();
        match reduce(&t, &omega, &z, None) {
            Ok(r) => {
                let ReducedSupport::Zm(h) = &r.support else { panic!("rational torus point") };
                let m = h.modulus() as i64;
                for k in 0..m {
                    // k·p/q reduced to (−½, ½] lies strictly inside the arc.
                    let frac = rational(k * p, q) - rational((k * p * 2 + q).div_euclid(2 * q), 1);
                    let expected = frac.clone() > -width.clone() && frac < width.clone();
                    prop_assert_eq!(h.contains(k), expected, "k = {}", k);
                }
            }
            Err(e) => prop_assert!(
                !omega.contains(&t, &z),
                "reduce failed although z lies in the arc: {}", e
            ),
        }
    }
}
