use adaptsel::config::StrategyConfig;
use adaptsel::cost_model::{pack_concat, pack_ffd};
use adaptsel::io::{read_measurements, write_measurements};
use adaptsel::scaling_law::{two_point_fit, SaturationParams};
use adaptsel::selector::{
    adaptation_gain, band_of, partition_bands, pareto_frontier, select_per_band, CostBasis, ParetoPoint,
    ScorePolicy,
};
use adaptsel::{EstimateRow, EstimateTable, MeasurementPoint};
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<ParetoPoint>> {
    prop::collection::vec((0.0f64..50.0, 0.0f64..1.0), 1..60)
        .prop_map(|v| v.into_iter().map(|(c, p)| ParetoPoint::new(c, p)).collect())
}

proptest! {
    #[test]
    fn saturation_is_monotone_and_bounded(alpha in 0.0f64..0.5, beta in 0.01f64..3.0, pi0 in 0.0f64..0.5) {
        let p = SaturationParams::new(alpha, beta, pi0).unwrap();
        let mut prev = p.predict_raw(0.0);
        prop_assert!((prev - pi0).abs() < 1e-12);
        for d in 1..=64 {
            let v = p.predict_raw(f64::from(d));
            prop_assert!(v >= prev - 1e-15);
            prop_assert!(v <= pi0 + alpha + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn two_point_fit_passes_through_both(
        alpha in 0.05f64..0.4, beta in 0.05f64..2.0, pi0 in 0.1f64..0.5, d1 in 1u32..4, gap in 1u32..12
    ) {
        let truth = SaturationParams::new(alpha, beta, pi0).unwrap();
        let d2 = d1 + gap;
        let (x1, x2) = (f64::from(d1), f64::from(d2));
        let fit = two_point_fit((x1, truth.predict_raw(x1)), (x2, truth.predict_raw(x2)), pi0).unwrap();
        prop_assert!((fit.predict_raw(x1) - truth.predict_raw(x1)).abs() < 1e-9);
        prop_assert!((fit.predict_raw(x2) - truth.predict_raw(x2)).abs() < 1e-9);
    }

    #[test]
    fn ffd_bounds(lengths in prop::collection::vec(1u64..=512, 0..80)) {
        let total: u64 = lengths.iter().sum();
        let ffd = pack_ffd(&lengths, 512).unwrap() as u64;
        prop_assert!(ffd >= pack_concat(total, 512).unwrap());
        prop_assert!(ffd <= lengths.len() as u64);
    }

    #[test]
    fn frontier_is_nondominated_and_covers(pts in points()) {
        let front = pareto_frontier(&pts);
        prop_assert!(!front.is_empty());
        for w in front.windows(2) {
            prop_assert!(w[0].cost < w[1].cost && w[0].perf < w[1].perf);
        }
        for p in &pts {
            prop_assert!(front.iter().all(|f| !p.dominates(f)));
            prop_assert!(front.iter().any(|f| f.cost <= p.cost && f.perf >= p.perf));
        }
    }

    #[test]
    fn gain_is_nonnegative_and_zero_for_same_set(old in points(), extra in points()) {
        let lo = old.iter().map(|p| p.cost).fold(f64::INFINITY, f64::min);
        let same = adaptation_gain(&old, &old, (lo, 60.0)).unwrap();
        prop_assert_eq!(same, 0.0);
        let mut new = old.clone();
        new.extend(extra);
        prop_assert!(adaptation_gain(&old, &new, (lo, 60.0)).unwrap() >= 0.0);
    }

    #[test]
    fn every_cost_lands_in_exactly_one_band(costs in prop::collection::vec(0.0f64..100.0, 1..50), k in 1usize..6) {
        let bands = partition_bands(&costs, k).unwrap();
        let last = bands.len() - 1;
        for &c in &costs {
            let containing = bands
                .iter()
                .filter(|b| c >= b.lo && (c < b.hi || (b.index == last && c <= b.hi)))
                .count();
            let b = band_of(&bands, c);
            prop_assert!(b.is_some());
            if bands[0].lo < bands[0].hi {
                prop_assert_eq!(containing, 1);
            }
        }
    }

    #[test]
    fn chosen_row_maximizes_score(
        rows in prop::collection::vec((0.0f64..1.0, 0.01f64..10.0), 1..40), k in 1usize..5
    ) {
        let table = EstimateTable::new(
            "t",
            rows.iter()
                .enumerate()
                .map(|(i, &(p, c))| EstimateRow::predicted(StrategyConfig::icl(i as u32 + 1), p, c))
                .collect(),
        ).unwrap();
        let policy = ScorePolicy::new(1e-3).unwrap();
        let costs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let bands = partition_bands(&costs, k).unwrap();
        let picks = select_per_band(&table, &bands, &policy, CostBasis::Predicted).unwrap();
        let members: usize = picks.iter().map(|s| s.members.len()).sum();
        prop_assert_eq!(members, rows.len());
        for s in &picks {
            let Some(c) = s.chosen else {
                prop_assert!(s.members.is_empty());
                continue;
            };
            prop_assert!(s.members.contains(&c));
            let cmax = s.members.iter().map(|&i| rows[i].1).fold(0.0, f64::max);
            let sc = |i: usize| rows[i].0 - 1e-3 * rows[i].1 / cmax;
            prop_assert!(s.members.iter().all(|&i| sc(i) <= sc(c)));
        }
    }

    #[test]
    fn measurements_round_trip(
        rows in prop::collection::vec((0.0f64..1.0, 0.0f64..100.0, prop::option::of(0i64..5), 1u32..32), 1..20)
    ) {
        let pts: Vec<MeasurementPoint> = rows
            .iter()
            .map(|&(perf, cost, seed, shots)| {
                let mut p = MeasurementPoint::new(StrategyConfig::icl(shots), perf, cost).unwrap();
                p.seed = seed;
                p
            })
            .collect();
        let mut buf = Vec::new();
        write_measurements(&mut buf, &pts).unwrap();
        let back = read_measurements(buf.as_slice()).unwrap();
        prop_assert_eq!(back, pts);
    }
}
