//! Property checks over randomly generated images, masks and schedules.

use approx::assert_relative_eq;
use proptest::prelude::*;

use first_photon::cc;
use first_photon::confusion::LabelDistribution;
use first_photon::dataset::{self, BinaryPattern, Dataset, Mask, RawImageSet, NUM_LABELS, PIXELS};
use first_photon::optics::{
    encode_pure, fit_geometry, gaussian_beam, hg_mode, project_mixed, project_pure, FieldGrid, GridGeometry,
    ModeSpec,
};
use first_photon::qc::{self, first_photon_distribution, ModeBank, ModeSet, PhotonScheduleConfig};

const LOW_ORDERS: [(u32, u32); NUM_LABELS] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

fn image() -> impl Strategy<Value = [u8; PIXELS]> {
    prop::collection::vec(any::<u8>(), PIXELS).prop_map(|v| v.try_into().unwrap())
}

fn mask(density: f64) -> impl Strategy<Value = Mask> {
    prop::collection::vec(prop::bool::weighted(density), PIXELS).prop_map(|v| Mask::from_fn(|r, c| v[r * 28 + c]))
}

/// `per_label` random non-empty masks for every label.
fn dataset(per_label: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(mask(0.3), per_label * NUM_LABELS).prop_map(move |masks| {
        let patterns = masks
            .into_iter()
            .enumerate()
            .map(|(i, mut m)| {
                m.set(14, 14, true);
                BinaryPattern {
                    mask: m,
                    label: (i % NUM_LABELS) as u8,
                    source_index: i,
                }
            })
            .collect();
        Dataset::from_patterns(patterns)
    })
}

fn permutation() -> impl Strategy<Value = [usize; NUM_LABELS]> {
    Just((0..NUM_LABELS).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| v.try_into().unwrap())
}

fn small_setup() -> (ModeSet, FieldGrid) {
    let set = ModeSet::from_orders(&LOW_ORDERS, 3.0, [0.0, 0.0]).unwrap();
    let g = fit_geometry(set.entries(), &GridGeometry::pattern_window(2).unwrap()).unwrap();
    (set, gaussian_beam(6.0, [0.0, 0.0], &g).unwrap())
}

fn duplicated(ds: &Dataset) -> Dataset {
    let n = ds.len();
    let mut v = ds.patterns().to_vec();
    for p in ds.patterns() {
        v.push(BinaryPattern {
            source_index: p.source_index + n,
            ..p.clone()
        });
    }
    Dataset::from_patterns(v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn idx_round_trip(images in prop::collection::vec(image(), 1..6), seed in any::<u8>()) {
        let labels: Vec<u8> = (0..images.len()).map(|i| (i as u8).wrapping_add(seed) % 10).collect();
        let raw = RawImageSet::new(images, labels).unwrap();
        let (img, lab) = dataset::encode_idx(&raw);
        prop_assert_eq!(dataset::parse_idx(&img, &lab).unwrap(), raw);
    }

    #[test]
    fn binarize_is_strict_threshold(img in image(), t in any::<u8>()) {
        let m = dataset::binarize(&img, t);
        for i in 0..PIXELS {
            prop_assert_eq!(m.get(i / 28, i % 28), img[i] > t);
        }
    }

    #[test]
    fn mask_rle_round_trip(m in mask(0.4)) {
        prop_assert_eq!(Mask::from_rle(&m.to_rle()).unwrap(), m);
    }

    #[test]
    fn first_photon_sums_to_one(
        d in prop::array::uniform10(0.0f64..=1.0),
        order in permutation(),
    ) {
        prop_assume!(d.iter().any(|&x| x > 0.0));
        let s = PhotonScheduleConfig { mask_order: order, ..Default::default() };
        let p = first_photon_distribution(&d, &s).unwrap();
        prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.0.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn earlier_display_never_loses(d in 1e-6f64..1.0, order in permutation()) {
        let s = PhotonScheduleConfig { mask_order: order, ..Default::default() };
        let p = first_photon_distribution(&[d; NUM_LABELS], &s).unwrap();
        for w in order.windows(2) {
            prop_assert!(p.0[w[0]] >= p.0[w[1]]);
        }
    }

    #[test]
    fn low_rate_limit_is_normalized_q(q in prop::array::uniform10(0.01f64..1.0)) {
        let s = PhotonScheduleConfig::default();
        let total: f64 = q.iter().sum();
        let dist = |eps: f64| {
            let d = q.map(|x| eps * x);
            let p = first_photon_distribution(&d, &s).unwrap();
            (0..NUM_LABELS).map(|k| (p.0[k] - q[k] / total).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (dist(1e-3), dist(1e-4));
        prop_assert!(b < a);
        prop_assert!(a < 1e-3 * 10.0 * total);
        // linear shrinkage within a small factor
        prop_assert!((a / b - 10.0).abs() < 1.0, "{} {}", a, b);
    }

    #[test]
    fn label_distribution_from_weights_is_normalized(w in prop::array::uniform10(0.0f64..10.0)) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let p = LabelDistribution::from_weights(w).unwrap();
        assert_relative_eq!(p.0.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cc_classify_sums_to_one(m in mask(0.05)) {
        let px = cc::IndexPixelSet::new(cc::REFERENCE_INDEX_PIXELS).unwrap();
        let p = BinaryPattern { mask: m, label: 0, source_index: 0 };
        let d = cc::cc_classify(&p, &px);
        prop_assert!((d.0.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn duplicates_change_nothing(ds in dataset(3)) {
        let dd = duplicated(&ds);
        let beam = FieldGrid::uniform(GridGeometry::pattern_window(1).unwrap()).unwrap();
        let a = cc::select_index_pixels(&cc::pixel_label_counts(&ds));
        let b = cc::select_index_pixels(&cc::pixel_label_counts(&dd));
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(&a, &b);
            let (ma, mb) = (cc::cc_confusion(&ds, &a).unwrap(), cc::cc_confusion(&dd, &b).unwrap());
            for j in 0..NUM_LABELS {
                for k in 0..NUM_LABELS {
                    prop_assert!((ma.rows[j][k] - mb.rows[j][k]).abs() < 1e-12);
                }
            }
        }
        let (ta, tb) = (cc::map_threshold(&ds, &beam).unwrap(), cc::map_threshold(&dd, &beam).unwrap());
        prop_assert!((ta - tb).abs() < 1e-12);
    }

    #[test]
    fn map_threshold_beats_guessing(ds in dataset(4)) {
        let beam = FieldGrid::uniform(GridGeometry::pattern_window(1).unwrap()).unwrap();
        prop_assert!(cc::map_threshold(&ds, &beam).unwrap() >= 0.1 - 1e-12);
    }

    #[test]
    fn relabeling_permutes_cc(ds in dataset(3), perm in permutation()) {
        let perm8: [u8; NUM_LABELS] = perm.map(|x| x as u8);
        let Ok(px) = cc::select_index_pixels(&cc::pixel_label_counts(&ds)) else { return Ok(()) };
        let rds = ds.relabeled(&perm8);
        let rpx = px.relabeled(&perm8).unwrap();
        let (m, rm) = (cc::cc_confusion(&ds, &px).unwrap(), cc::cc_confusion(&rds, &rpx).unwrap());
        for j in 0..NUM_LABELS {
            for k in 0..NUM_LABELS {
                prop_assert!((m.rows[j][k] - rm.rows[perm[j]][perm[k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permuting_modes_permutes_columns(ds in dataset(1), perm in permutation()) {
        let (set, beam) = small_setup();
        let m = qc::qc_confusion(&ds, &set, &beam).unwrap();
        let pm = qc::qc_confusion(&ds, &set.permuted(&perm).unwrap(), &beam).unwrap();
        let orders = set.orders();
        let porders = set.permuted(&perm).unwrap().orders();
        for k in 0..NUM_LABELS {
            // column k of the permuted run uses the mode that sat at column c originally
            let c = orders.iter().position(|o| *o == porders[k]).unwrap();
            for j in 0..NUM_LABELS {
                prop_assert!((pm.rows[j][k] - m.rows[j][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projections_are_bounded_by_transmission(m in mask(0.3)) {
        prop_assume!(m.count_on() > 0);
        let (set, beam) = small_setup();
        let bank = ModeBank::new(&set, &beam).unwrap();
        let t = bank.transmission(&m);
        let q = bank.pure_probabilities(&m).unwrap();
        prop_assert!(q.iter().sum::<f64>() <= t + 1e-6);
        let mixed = bank.mixed_probabilities(&m).unwrap();
        prop_assert!(mixed.iter().sum::<f64>() <= t + 1e-6);
    }

    #[test]
    fn distribution_ignores_beam_power(m in mask(0.3), k in 0.1f64..10.0) {
        prop_assume!(m.count_on() > 0);
        let (set, beam) = small_setup();
        let p = BinaryPattern { mask: m, label: 0, source_index: 0 };
        let a = qc::qc_label_distribution(&p, &set, &beam).unwrap();
        let b = qc::qc_label_distribution(&p, &set, &beam.scaled(k)).unwrap();
        for i in 0..NUM_LABELS {
            prop_assert!((a.0[i] - b.0[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn coherence_can_help_or_hurt() {
    let specs = [ModeSpec::new(0, 0, 7.0), ModeSpec::new(1, 0, 7.0)];
    let g = fit_geometry(&specs, &GridGeometry::pattern_window(4).unwrap()).unwrap();
    let beam = gaussian_beam(7.0, [0.0, 0.0], &g).unwrap();
    let even = hg_mode(&specs[0], &g).unwrap();
    let odd = hg_mode(&specs[1], &g).unwrap();
    let centre = BinaryPattern {
        mask: Mask::from_fn(|r, c| (10..18).contains(&r) && (10..18).contains(&c)),
        label: 0,
        source_index: 0,
    };
    let psi = encode_pure(&centre, &beam).unwrap();
    // in-phase pixels add coherently
    assert!(project_pure(&psi, &even).unwrap() > project_mixed(&centre, &beam, &even).unwrap());
    // the odd mode's two lobes cancel
    assert!(project_pure(&psi, &odd).unwrap() < project_mixed(&centre, &beam, &odd).unwrap());
}

#[test]
fn monte_carlo_converges_at_binomial_rate() {
    let (set, beam) = small_setup();
    let bank = ModeBank::new(&set, &beam).unwrap();
    let m = Mask::from_fn(|r, c| (8..20).contains(&r) && (6..16).contains(&c));
    let schedule = PhotonScheduleConfig::with_rate(0.05);
    let q = bank.pure_probabilities(&m).unwrap();
    let pulse = schedule.pulse_probabilities(&q, bank.reference()).unwrap();
    let exact = first_photon_distribution(&schedule.display_probabilities(&pulse), &schedule).unwrap();
    let mut devs = Vec::new();
    for n in [1_000u64, 10_000, 100_000] {
        let (counts, missed) = qc::tally_pattern(&pulse, &schedule, 3, 0, n);
        assert_eq!(missed, 0);
        let mut worst: f64 = 0.0;
        for k in 0..NUM_LABELS {
            let p = exact.0[k];
            let sd = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
            let dev = (counts[k] as f64 / n as f64 - p).abs();
            assert!(dev < 5.0 * sd, "n={n} label {k}: {dev} vs sd {sd}");
            worst = worst.max(dev);
        }
        devs.push(worst);
    }
    println!("max deviations {devs:?}");
    assert!(devs[2] < devs[0]);
}
