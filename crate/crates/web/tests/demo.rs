use slr_web::{changed_fraction, heatmap, quantizer_curve, DEMO_WORDS};

#[test]
fn curve_is_a_monotone_staircase() {
    let pts = quantizer_curve(10, 1.0, 301).unwrap();
    assert_eq!(pts.len(), 602);
    let ys: Vec<f64> = pts.chunks(2).map(|p| p[1]).collect();
    assert!(ys.windows(2).all(|w| w[0] <= w[1]));
    let mut levels = ys.clone();
    levels.dedup();
    // ten bin centers plus the exact zero at the middle sample
    assert_eq!(levels.len(), 11);
    assert_eq!((ys[0], ys[300]), (-0.9, 0.9));
    assert!(quantizer_curve(1, 1.0, 10).is_err());
}

#[test]
fn heatmap_shape_and_fixed_channels() {
    let h = heatmap(3, 1, "rqe-sf").unwrap();
    assert_eq!(h.values().len(), h.frames() * h.channels());
    assert!(h.frames() >= 20);
    let raw = heatmap(3, 1, "raw").unwrap();
    assert_eq!(raw.frames(), h.frames());
    assert_ne!(raw.values(), h.values());
    assert!(heatmap(DEMO_WORDS, 1, "rqe").is_err());
    assert!(heatmap(0, 1, "fancy").is_err());
}

#[test]
fn rqe_shrugs_off_what_raw_does_not() {
    let raw = changed_fraction(5, 2, "raw", 1.3, 0.05, -0.04).unwrap();
    let rqe = changed_fraction(5, 2, "rqe", 1.3, 0.05, -0.04).unwrap();
    assert!(raw > 0.5, "{raw}");
    assert!(rqe < 0.05, "{rqe}");
    assert_eq!(changed_fraction(5, 2, "rqe", 1.0, 0.0, 0.0).unwrap(), 0.0);
}
