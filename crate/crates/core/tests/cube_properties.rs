use crashcast::cube::{
    build_cube, chronological_split, load_cube, save_cube, synth_cube, CrashRecord, GridSpec,
    RegimeSpec, Severity, SeverityWeights,
};
use proptest::prelude::*;

const W: usize = 3;
const H: usize = 2;
const T: usize = 5;

fn weights() -> SeverityWeights {
    SeverityWeights::new(12.0, 12.0, 3.0, 3.0, 1.0).unwrap()
}

fn grid() -> GridSpec {
    GridSpec::new(W, H, 5.0, vec![1.0, 2.5, 0.0, 0.4, 1.0, 3.0]).unwrap()
}

fn severity() -> impl Strategy<Value = Severity> {
    prop_oneof![
        Just(Severity::K),
        Just(Severity::A),
        Just(Severity::B),
        Just(Severity::C),
        Just(Severity::O)
    ]
}

fn records() -> impl Strategy<Value = Vec<CrashRecord>> {
    prop::collection::vec(
        (0..T, 0..W, 0..H, severity(), any::<bool>()).prop_map(|(t, x, y, s, w)| CrashRecord {
            week_index: t,
            cell_x: x,
            cell_y: y,
            severity: s,
            inclement_weather: w,
        }),
        0..40,
    )
}

proptest! {
    #[test]
    fn build_is_additive(a in records(), b in records()) {
        let g = grid();
        let ca = build_cube(&a, &g, &weights(), T).unwrap();
        let cb = build_cube(&b, &g, &weights(), T).unwrap();
        let both: Vec<CrashRecord> = a.iter().chain(&b).copied().collect();
        let cab = build_cube(&both, &g, &weights(), T).unwrap();
        for c in g.road_cells() {
            for t in 0..T {
                let sum = ca.raw(c, t) + cb.raw(c, t);
                prop_assert!((cab.raw(c, t) - sum).abs() <= 1e-12 * sum.max(1.0));
            }
        }
    }

    #[test]
    fn scaling_weights_scales_targets(r in records(), alpha in 0.01..50.0f64) {
        let g = grid();
        let base = build_cube(&r, &g, &weights(), T).unwrap();
        let scaled = build_cube(&r, &g, &weights().scaled(alpha), T).unwrap();
        for c in 0..g.n_cells() {
            for t in 0..T {
                match (base.value(c, t), scaled.value(c, t)) {
                    (Some(v), Some(s)) => prop_assert!((s - alpha * v).abs() <= 1e-12 * (alpha * v).max(1.0)),
                    (None, None) => {}
                    _ => prop_assert!(false, "null mask changed"),
                }
            }
        }
    }

    #[test]
    fn noiseless_synth_matches_formula(
        level in 0.0..5.0f64,
        slope in -0.02..0.02f64,
        amplitude in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let g = GridSpec::uniform(2, 2, 1.0, 1.0).unwrap();
        let r = RegimeSpec {
            name: "r".into(), x0: 0, y0: 0, width: 2, height: 2,
            level, slope, amplitude, noise: 0.0, exposure: 1.0,
        };
        let (cube, _) = synth_cube(&g, 60, &[r], seed).unwrap();
        for c in 0..4 {
            for t in 0..60 {
                let tf = t as f64;
                let expected = (level + slope * tf
                    + amplitude * (2.0 * std::f64::consts::PI * tf / 52.0).sin()).max(0.0);
                prop_assert!((cube.raw(c, t) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn archive_round_trip(r in records()) {
        let cube = build_cube(&r, &grid(), &weights(), T).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_cube(dir.path(), &cube, None).unwrap();
        prop_assert_eq!(load_cube(dir.path()).unwrap(), cube);
    }

    #[test]
    fn split_is_a_chronological_partition(t in 2usize..400, test_frac in 0.0..1.0f64, vf in 0.0..0.99f64) {
        let test = ((t as f64 * test_frac) as usize).min(t - 1);
        let s = chronological_split(t, test, vf).unwrap();
        prop_assert_eq!(s.train.start, 0);
        prop_assert_eq!(s.train.end, s.validation.start);
        prop_assert_eq!(s.validation.end, s.test.start);
        prop_assert_eq!(s.test.end, t);
        prop_assert_eq!(s.test.len(), test);
        prop_assert_eq!(s.validation.len(), (vf * (t - test) as f64).floor() as usize);
    }
}

#[test]
fn empty_record_list_gives_zero_road_cells() {
    let cube = build_cube(&[], &grid(), &weights(), T).unwrap();
    assert_eq!(cube.value(0, 0), Some(0.0));
    assert_eq!(cube.value(2, 3), None);
}

#[test]
fn split_209_weeks_52_test() {
    let s = chronological_split(209, 52, 0.10).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (142, 15, 52));
    let s = chronological_split(209, 52, 0.0).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (157, 0, 52));
    assert!(chronological_split(10, 10, 0.0).is_err());
}
