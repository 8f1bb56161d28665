use proptest::prelude::*;
use wavediag::matrix::RealMatrix;
use wavediag::pipeline::{render_image, TransformCode, TransformParams};
use wavediag::raster::{
    apply_colormap, downsample_area, encode_ppm, normalize_log, rasterize, read_ppm, write_ppm,
    IMAGE_BYTES, PPM_HEADER,
};
use wavediag::signal::{synth_signal, ConditionClass};

fn matrix() -> impl Strategy<Value = RealMatrix> {
    (32usize..80, 32usize..80).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0..1e3f64, r * c).prop_map(move |d| RealMatrix::from_vec(r, c, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_values_lie_in_unit_interval(m in matrix(), floor in -120.0..-1.0f64) {
        prop_assume!(m.max() > 0.0);
        let v = normalize_log(&m, floor).unwrap();
        prop_assert!(v.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(v.as_slice().contains(&1.0));
    }

    #[test]
    fn downsample_preserves_bounds_and_constants(m in matrix(), c in 0.0..5.0f64) {
        let d = downsample_area(&m, 32, 32).unwrap();
        let (lo, hi) = m.as_slice().iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
        prop_assert!(d.as_slice().iter().all(|&x| x >= lo - 1e-9 && x <= hi + 1e-9));
        let flat = RealMatrix::from_fn(m.rows(), m.cols(), |_, _| c);
        prop_assert!(downsample_area(&flat, 32, 32).unwrap().as_slice().iter().all(|&x| (x - c).abs() < 1e-12));
    }

    #[test]
    fn colormap_stays_between_neighbouring_control_points(v in 0.0..=1.0f64) {
        let rgb = apply_colormap(v).unwrap();
        let points = [[13, 8, 135], [126, 3, 168], [204, 71, 120], [248, 149, 64], [240, 249, 33]];
        let seg = ((v * 4.0).floor() as usize).min(3);
        for ch in 0..3 {
            let (a, b) = (points[seg][ch], points[seg + 1][ch]);
            prop_assert!(rgb[ch] >= a.min(b) && rgb[ch] <= a.max(b));
        }
    }
}

#[test]
fn reference_points() {
    let mut m = RealMatrix::from_fn(32, 32, |_, _| 1.0);
    m.set(0, 0, 1000.0);
    m.set(0, 1, 0.0);
    let v = normalize_log(&m, -60.0).unwrap();
    assert_eq!(v.get(0, 0), 1.0);
    assert_eq!(v.get(1, 1), 0.0); // max / 1000 sits exactly on the floor
    assert_eq!(v.get(0, 1), 0.0);
    assert!(normalize_log(&RealMatrix::zeros(32, 32), -60.0).is_err());
    let checker = RealMatrix::from_fn(64, 64, |r, c| ((r + c) % 2) as f64);
    assert!(downsample_area(&checker, 32, 32).unwrap().as_slice().iter().all(|&x| x == 0.5));
    assert!(downsample_area(&RealMatrix::zeros(31, 64), 32, 32).is_err());
    assert_eq!(apply_colormap(0.0).unwrap(), [13, 8, 135]);
    assert_eq!(apply_colormap(1.0).unwrap(), [240, 249, 33]);
    assert_eq!(apply_colormap(0.125).unwrap(), [70, 6, 152]);
    assert!(apply_colormap(1.0001).is_err());
    assert!(apply_colormap(f64::NAN).is_err());
}

#[test]
fn ppm_files_are_exact_and_round_trip() {
    let m = RealMatrix::from_fn(89, 500, |r, c| 1.0 + ((r * 31 + c * 7) % 97) as f64);
    let img = rasterize(&m, ConditionClass::OuterBearingFault, "x", -60.0).unwrap();
    let bytes = encode_ppm(&img);
    assert_eq!(PPM_HEADER.len(), 13);
    assert_eq!(bytes.len(), 13 + IMAGE_BYTES);
    assert!(bytes.starts_with(b"P6\n32 32\n255\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.ppm");
    write_ppm(&img, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(read_ppm(&path, img.label, "x").unwrap(), img);
    std::fs::write(&path, &bytes[..100]).unwrap();
    assert!(read_ppm(&path, img.label, "x").is_err());
}

#[test]
fn rendering_is_bit_exact() {
    let rec = synth_signal(ConditionClass::BearingAxisMisalignment, 25, 0.3, 10_000.0, 9).unwrap();
    let params = TransformParams::default();
    for code in TransformCode::ALL {
        let a = encode_ppm(&render_image(&rec, code, &params).unwrap());
        let b = encode_ppm(&render_image(&rec, code, &params).unwrap());
        assert_eq!(a, b, "{code}");
    }
}

#[test]
fn high_frequencies_sit_at_the_top() {
    // a 2 kHz tone must light the upper rows for both transform kinds
    let fs = 10_000.0;
    let mut rec = synth_signal(ConditionClass::Normal, 0, 0.5, fs, 1).unwrap();
    rec.samples = (0..5000).map(|i| (2.0 * std::f64::consts::PI * 2000.0 * i as f64 / fs).cos()).collect();
    for code in [TransformCode::WtAmor, TransformCode::WsstAmor] {
        let img = render_image(&rec, code, &TransformParams::default()).unwrap();
        let row_brightness = |r: usize| (0..32).map(|c| img.pixel(r, c)[1] as u32).sum::<u32>();
        let brightest = (0..32).max_by_key(|&r| row_brightness(r)).unwrap();
        assert!(brightest < 10, "{code}: brightest row {brightest}");
    }
}
