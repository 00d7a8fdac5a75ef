//! Property tests for the algebraic invariants.

use grnscale::charts::{blow_down, change_chart, ChartId, ChartPoint};
use grnscale::cli::{OutputFormat, ResultTable};
use grnscale::model::{hill_minus, hill_pair, hill_plus, phi, ModelParams};
use grnscale::pwl::poincare_map;
use proptest::prelude::*;

proptest! {
    #[test]
    fn hill_pair_sums_to_one(
        p in 0.0f64..50.0,
        theta in 1e-3f64..10.0,
        n in 0.5f64..500.0,
    ) {
        let (hp, hm) = hill_pair(p, theta, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&hp));
        prop_assert!((hp + hm - 1.0).abs() <= f64::EPSILON);
        prop_assert_eq!(hill_plus(p, theta, n).unwrap(), hp);
        prop_assert_eq!(hill_minus(p, theta, n).unwrap(), hm);
    }

    #[test]
    fn phi_complement_identity(x in -700.0f64..700.0) {
        prop_assert!((phi(x) + phi(-x) - 1.0).abs() <= f64::EPSILON);
        prop_assert!((0.0..=1.0).contains(&phi(x)));
    }

    #[test]
    fn blow_down_commutes_from_scaling_chart(
        eta in 0.0f64..0.05,
        u in 0.3f64..2.5,
        v in 0.3f64..2.5,
        u_neg in proptest::bool::ANY,
        v_neg in proptest::bool::ANY,
        mu in 0.0f64..0.5,
    ) {
        let u = if u_neg { -u } else { u };
        let v = if v_neg { -v } else { v };
        let cp = ChartPoint::new(ChartId::K2, 0.4, 0.3, [eta, u, v], mu).unwrap();
        let before = blow_down(&cp);
        for target in ChartId::ALL {
            let Ok(moved) = change_chart(&cp, target) else { continue };
            let after = blow_down(&moved);
            prop_assert!((after.p_a - before.p_a).abs() <= 1e-13 * before.p_a);
            prop_assert!((after.p_b - before.p_b).abs() <= 1e-13 * before.p_b);
            let back = change_chart(&moved, ChartId::K2).unwrap();
            for k in 0..3 {
                let scale = cp.coords[k].abs().max(1e-30);
                prop_assert!((back.coords[k] - cp.coords[k]).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn return_map_contracts_strictly(
        pb0 in 1.001f64..20.0,
        xi_a in 1.05f64..3.0,
        xi_b_gap in 0.05f64..3.0,
        delta in 0.5f64..4.0,
    ) {
        let gamma = 2.0;
        let p = ModelParams::new(gamma, delta, xi_a, gamma + xi_b_gap, 0.0, 0.0).unwrap();
        let px = poincare_map(pb0, &p).unwrap();
        prop_assert!(px > 1.0 && px < pb0, "P({pb0}) = {px}");
    }

    #[test]
    fn csv_round_trip_is_byte_identical(
        values in proptest::collection::vec(
            prop_oneof![
                any::<f64>().prop_filter("finite", |x| x.is_finite()),
                (-1.0e-5f64..1.0e-5),
            ],
            1..40,
        ),
    ) {
        let mut t = ResultTable::new("prop", &["x", "y"]);
        for pair in values.chunks(2) {
            let a = pair[0];
            let b = pair.get(1).copied().unwrap_or(0.0);
            t.push(vec![a.into(), b.into()]).unwrap();
        }
        let csv = t.render(OutputFormat::Csv);
        let parsed = ResultTable::parse_csv("prop", &csv).unwrap();
        prop_assert_eq!(parsed.render(OutputFormat::Csv), csv);
    }
}
