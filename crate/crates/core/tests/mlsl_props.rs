mod common;

use common::{arb_snapshot, GridOracle};
use lanecheck::mlsl::{
    cc_formula, collision_formula, eval, eval_standard, exists_pc_formula, fast, hchop_witness, parse, pc_formula,
    Formula, Valuation, EGO,
};
use lanecheck::traffic::{CarId, TrafficSnapshot, View};
use proptest::prelude::*;

fn arb_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::Free),
        Just(Formula::re(EGO)),
        Just(Formula::cl(EGO)),
        Just(Formula::re("a")),
        Just(Formula::cl("a")),
        Just(Formula::eq(EGO, "a")),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.hchop(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::vchop(a, b)),
            inner.prop_map(|b| Formula::exists("a", b)),
        ]
    })
}

/// A snapshot, an ego car, a car for `a` and a horizon.
fn arb_setup(
    max_cars: usize,
    max_lanes: u32,
    max_pos: i64,
) -> impl Strategy<Value = (TrafficSnapshot, CarId, CarId, i64)> {
    arb_snapshot(max_cars, max_lanes, max_pos).prop_flat_map(|ts| {
        let n = ts.cars.len() as u32;
        (Just(ts), 0..n, 0..n, 1i64..20).prop_map(|(ts, e, a, h)| (ts, CarId(e), CarId(a), h))
    })
}

fn full_view(ts: &TrafficSnapshot, ego: CarId) -> View {
    ts.standard_view(ego, ts.covering_horizon()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eval_agrees_with_grid_oracle(
        (ts, e, a, h) in arb_setup(3, 3, 12),
        phi in arb_formula().prop_filter("shallow chops", |f| f.hchop_depth() <= 2),
    ) {
        let view = ts.standard_view(e, h.min(8)).unwrap();
        let nu = Valuation::ego(e).with_car("a", a);
        let fast_answer = eval(&ts, &view, &nu, &phi).unwrap();
        let scale = 1i64 << phi.hchop_depth();
        let slow_answer = GridOracle::new(&ts, scale).holds(&view, &[(EGO, e), ("a", a)], &phi);
        prop_assert_eq!(fast_answer, slow_answer, "{}", phi);
    }

    #[test]
    fn negation_flips((ts, e, a, h) in arb_setup(4, 4, 30), phi in arb_formula()) {
        let view = ts.standard_view(e, h).unwrap();
        let nu = Valuation::ego(e).with_car("a", a);
        let p = eval(&ts, &view, &nu, &phi).unwrap();
        prop_assert_eq!(eval(&ts, &view, &nu, &phi.clone().not()).unwrap(), !p);
        prop_assert_eq!(eval(&ts, &view, &nu, &phi.clone().not().not()).unwrap(), p);
    }

    #[test]
    fn printing_round_trips(phi in arb_formula()) {
        let text = phi.to_string();
        prop_assert_eq!(parse(&text).unwrap(), phi);
    }

    #[test]
    fn chopping_true_always_holds((ts, e, _a, h) in arb_setup(5, 6, 50)) {
        let view = ts.standard_view(e, h).unwrap();
        let nu = Valuation::ego(e);
        prop_assert!(eval(&ts, &view, &nu, &Formula::True.hchop(Formula::True)).unwrap());
        prop_assert!(eval(&ts, &view, &nu, &Formula::vchop(Formula::True, Formula::True)).unwrap());
    }

    #[test]
    fn free_space_is_never_reserved((ts, e, _a, h) in arb_setup(5, 6, 50)) {
        let view = ts.standard_view(e, h).unwrap();
        let nu = Valuation::ego(e);
        let f = Formula::Free.and(Formula::re(EGO)).somewhere();
        prop_assert!(!eval(&ts, &view, &nu, &f).unwrap());
        let g = Formula::Free.and(Formula::cl(EGO)).somewhere();
        prop_assert!(!eval(&ts, &view, &nu, &g).unwrap());
    }

    #[test]
    fn own_reservation_is_visible((ts, e, _a, h) in arb_setup(5, 6, 50)) {
        prop_assert!(eval_standard(&ts, e, h, &Formula::re(EGO).somewhere()).unwrap());
    }

    #[test]
    fn fast_checks_match_formulas((ts, e, a, _h) in arb_setup(5, 6, 50)) {
        let view = full_view(&ts, e);
        let nu = Valuation::ego(e);
        prop_assert_eq!(fast::cc(&ts, e).unwrap(), eval(&ts, &view, &nu, &cc_formula()).unwrap());
        prop_assert_eq!(fast::any_pc(&ts, e).unwrap(), eval(&ts, &view, &nu, &exists_pc_formula()).unwrap());
        let nu_a = nu.with_car("c", a);
        prop_assert_eq!(fast::pc(&ts, e, a).unwrap(), eval(&ts, &view, &nu_a, &pc_formula("c")).unwrap());
        prop_assert_eq!(fast::collision(&ts), eval(&ts, &view, &Valuation::ego(e), &collision_formula()).unwrap());
    }

    #[test]
    fn wider_views_see_more_collisions((ts, e, _a, h) in arb_setup(5, 4, 50), extra in 0i64..40) {
        let narrow = eval_standard(&ts, e, h, &cc_formula()).unwrap();
        let wide = eval_standard(&ts, e, h + extra, &cc_formula()).unwrap();
        prop_assert!(narrow || !wide, "collision seen at {} but not at {}", h, h + extra);
    }

    #[test]
    fn chop_witness_is_sound((ts, e, a, h) in arb_setup(4, 4, 30), l in arb_formula(), r in arb_formula()) {
        prop_assume!(l.hchop_depth() + r.hchop_depth() <= 3);
        let view = ts.standard_view(e, h).unwrap();
        let nu = Valuation::ego(e).with_car("a", a);
        let w = hchop_witness(&ts, &view, &nu, &l, &r).unwrap();
        prop_assert_eq!(w.is_some(), eval(&ts, &view, &nu, &l.clone().hchop(r.clone())).unwrap());
        if let Some(p) = w {
            let x = p.as_f64();
            prop_assert!(view.extent.lo as f64 <= x && x <= view.extent.hi as f64);
        }
    }
}
