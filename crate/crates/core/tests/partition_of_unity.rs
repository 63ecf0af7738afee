//! Unit coefficients sum to one wherever the space covers the point.

use fcifem::experiments::{partition_of_unity_deviation, tokamak_space, TokamakConfig};
use fcifem::field::FieldModel;
use fcifem::mapping::MappingKind;
use fcifem::space::Discretization;
use fcifem::splines::Spline1D;
use proptest::prelude::*;

fn config(order: usize, kind: MappingKind) -> TokamakConfig {
    let field = match kind {
        MappingKind::AnalyticStraight => FieldModel::straight(0.3, 1.0),
        _ => FieldModel::divertor(1.0),
    };
    TokamakConfig {
        field,
        n_r: 20,
        n_z: 20,
        n_zeta: 4,
        order,
        mapping: kind,
        ghost_margin: 0.2,
        ..TokamakConfig::default()
    }
}

fn deviation(order: usize, kind: MappingKind, n: usize) -> (f64, f64) {
    let t = config(order, kind);
    let s = tokamak_space(&t, 1, kind).unwrap();
    partition_of_unity_deviation(
        s.fcifem(),
        [t.r_range.0, t.z_range.0, 0.0],
        [t.r_range.1, t.z_range.1, t.zeta_period],
        n,
        7,
    )
    .unwrap()
}

#[test]
fn unit_coefficients_sum_to_one_for_all_mappings() {
    for order in [1, 2] {
        for kind in [MappingKind::AnalyticStraight, MappingKind::TaylorSpline, MappingKind::ExactOde] {
            let (dev, covered) = deviation(order, kind, 10_000);
            assert!(dev <= 1e-12, "order {order} {kind:?}: deviation {dev:.2e}");
            assert!(covered > 0.5, "order {order} {kind:?}: only {covered:.2} of draws covered");
        }
    }
}

#[test]
fn blended_space_is_covered_everywhere_inside_with_identity_mapping() {
    let t = config(2, MappingKind::Identity);
    let s = tokamak_space(&t, 1, MappingKind::Identity).unwrap();
    let (dev, covered) = partition_of_unity_deviation(
        s.fcifem(),
        [t.r_range.0, t.z_range.0, 0.0],
        [t.r_range.1, t.z_range.1, t.zeta_period],
        2000,
        3,
    )
    .unwrap();
    assert!(dev <= 1e-12);
    assert_eq!(covered, 1.0);
}

fn spline(order: usize, periodic: bool, n: usize, h: f64, lo: f64) -> Spline1D {
    if periodic {
        Spline1D::periodic(order, h, n, lo).unwrap()
    } else {
        Spline1D::clamped(order, h, n.max(order + 1), lo).unwrap()
    }
}

proptest! {
    #[test]
    fn spline_values_sum_to_one(
        order in 1usize..=2,
        periodic in any::<bool>(),
        n in 1usize..12,
        h in 0.05f64..2.0,
        lo in -3.0f64..3.0,
        t in 0.0f64..1.0,
    ) {
        let s = spline(order, periodic, n, h, lo);
        let (a, b) = s.domain();
        let x = a + t * (b - a);
        let b = s.active(x).unwrap();
        let (sum, dsum) = b.iter().fold((0.0, 0.0), |acc, (_, v, d)| (acc.0 + v, acc.1 + d));
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(dsum.abs() < 1e-9 / h);
        prop_assert!(b.iter().all(|(_, v, _)| v >= -1e-15));
    }

    #[test]
    fn open_spline_sums_to_one_between_the_walls(
        order in 1usize..=2,
        n in 2usize..12,
        ghosts in 1usize..3,
        h in 0.05f64..2.0,
        t in 0.0f64..1.0,
    ) {
        let s = Spline1D::open(order, h, n, ghosts, 0.0).unwrap();
        let (a, b) = s.domain();
        let x = a + t * (b - a);
        let sum: f64 = s
            .active(x)
            .unwrap()
            .iter()
            .filter(|(i, _, _)| s.index(*i).is_some())
            .map(|(_, v, _)| v)
            .sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn straight_mapping_space_sums_to_one(
        order in 1usize..=2,
        r in 0.0f64..1.0,
        z in 0.0f64..1.0,
        zeta in 0.0f64..1.0,
    ) {
        let t = config(order, MappingKind::AnalyticStraight);
        let s = tokamak_space(&t, 1, MappingKind::AnalyticStraight).unwrap();
        let x = [
            t.r_range.0 + r * (t.r_range.1 - t.r_range.0),
            t.z_range.0 + z * (t.z_range.1 - t.z_range.0),
            zeta * t.zeta_period,
        ];
        let f = s.fcifem();
        prop_assume!(f.covers(x));
        let ones = vec![1.0; f.n_dofs()];
        prop_assert!((f.evaluate(&ones, x).unwrap() - 1.0).abs() < 1e-12);
    }
}
