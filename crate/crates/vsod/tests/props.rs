//! Property tests over randomized inputs.

mod common;

use proptest::prelude::*;

use common::*;
use vsod::flow::{flow_magnitude, warp_map, BinaryMask, FlowField};
use vsod::metrics::{contour_accuracy, jaccard, pr_curve, s_measure, MetricsConfig};
use vsod::nn::{ops, Tensor};
use vsod::pseudo::{build_pseudo_schedule, AnnotationSchedule, FrameLabel};

fn tensor1hw(h: usize, w: usize, vals: Vec<f64>) -> Tensor {
    Tensor::from_vec(&[1, h, w], vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_rows_are_distributions(vals in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let t = Tensor::from_vec(&[3, 4], vals).unwrap();
        let y = ops::softmax(&t, 1).unwrap();
        let d = y.to_vec();
        for row in 0..3 {
            let s: f64 = d[row * 4..(row + 1) * 4].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(d[row * 4..(row + 1) * 4].iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn warp_matches_brute_sampler(
        mask in proptest::collection::vec(0.0f64..1.0, 36),
        flow in proptest::collection::vec(-4.0f64..4.0, 72),
    ) {
        let (h, w) = (6usize, 6usize);
        let m = tensor1hw(h, w, mask.clone());
        let f = FlowField::new(Tensor::from_vec(&[2, h, w], flow.clone()).unwrap()).unwrap();
        let got = warp_map(&m, &f).unwrap().to_vec();
        let want = brute_warp(&mask, &flow[..h * w], &flow[h * w..], h, w);
        prop_assert!(max_abs_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn flow_magnitude_is_bounded(flow in proptest::collection::vec(-4.0f64..4.0, 32)) {
        // components up to the frame extent exceed the (extent - 1)
        // normalizer, so the clamp is exercised
        let f = FlowField::new(Tensor::from_vec(&[2, 4, 4], flow).unwrap()).unwrap();
        let m = flow_magnitude(&f);
        let cap = 2.0f64.sqrt() + 1e-12;
        prop_assert!(m.to_vec().iter().all(|&v| (0.0..=cap).contains(&v)));
    }

    #[test]
    fn schedule_accounting_closed_form(l in 1usize..12, m_frac in 0.0f64..1.0, n in 1usize..200) {
        let m = ((l - 1) as f64 * m_frac) as usize;
        let schedule = AnnotationSchedule::new(l, m).unwrap();
        let plan = build_pseudo_schedule(n, &schedule).unwrap();
        let gt = plan.iter().filter(|x| **x == FrameLabel::Gt).count();
        prop_assert_eq!(gt, n.div_ceil(l));
        let pseudo = plan.iter().filter(|x| **x == FrameLabel::Pseudo).count();
        if n % l == 0 {
            prop_assert_eq!(pseudo, m * n / l);
        } else {
            // within one interval's worth at the sequence end
            let complete = (n.saturating_sub(1)) / l;
            prop_assert!(pseudo >= m * complete.saturating_sub(1));
            prop_assert!(pseudo <= m * (complete + 1));
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval(
        pred in proptest::collection::vec(0.0f64..1.0, 64),
        seed in 0u64..1000,
    ) {
        let (h, w) = (8usize, 8usize);
        let mut rng = vsod::rng::Rng::new(seed);
        let gt_vals = rand_mask_values(h, w, 0.3, &mut rng);
        let p = tensor1hw(h, w, pred);
        let gt = BinaryMask::new(tensor1hw(h, w, gt_vals)).unwrap();
        let cfg = MetricsConfig::default();
        let s = s_measure(&p, &gt, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        let pm = BinaryMask::from_soft(&p, 0.5).unwrap();
        let j = jaccard(&pm, &gt).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
        let b = contour_accuracy(&pm, &gt, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        for point in pr_curve(&[(&p, &gt)], &cfg).unwrap().points {
            prop_assert!((0.0..=1.0).contains(&point.precision));
            prop_assert!((0.0..=1.0).contains(&point.recall));
        }
    }

    #[test]
    fn recall_never_increases_with_threshold(
        pred in proptest::collection::vec(0.0f64..1.0, 64),
        seed in 0u64..1000,
    ) {
        let (h, w) = (8usize, 8usize);
        let mut rng = vsod::rng::Rng::new(seed);
        let gt = BinaryMask::new(tensor1hw(h, w, rand_mask_values(h, w, 0.4, &mut rng))).unwrap();
        let p = tensor1hw(h, w, pred);
        let curve = pr_curve(&[(&p, &gt)], &MetricsConfig::default()).unwrap();
        for pair in curve.points.windows(2) {
            prop_assert!(pair[1].recall <= pair[0].recall + 1e-15);
        }
    }

    #[test]
    fn quantization_round_trip_bound(vals in proptest::collection::vec(0.0f64..=1.0, 16)) {
        for v in vals {
            let q = vsod::imageio::quantize(v);
            prop_assert!((v - q as f64 / 255.0).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn gru_state_is_convex_combination_inside_tanh_range(
        seed in 0u64..10_000,
        x_vals in proptest::collection::vec(-5.0f64..5.0, 18),
        h_vals in proptest::collection::vec(-0.999f64..0.999, 18),
    ) {
        // gates live in (0,1); with the previous state inside (-1,1) the new
        // state is a convex combination of two values inside (-1,1)
        let mut reg = vsod::nn::ParamRegistry::new();
        let mut rng = vsod::rng::Rng::new(seed);
        let cell = vsod::temporal::ConvGruParams::create(&mut reg, "g", 2, 2, false, &mut rng)
            .unwrap();
        let x = Tensor::from_vec(&[2, 3, 3], x_vals).unwrap();
        let h = Tensor::from_vec(&[2, 3, 3], h_vals).unwrap();
        let out = vsod::temporal::convgru_cell(&x, &h, &cell).unwrap();
        prop_assert!(out.to_vec().iter().all(|&v| v > -1.0 && v < 1.0));
    }
}
