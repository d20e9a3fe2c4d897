use std::ffi::{c_int, c_void, CStr, CString};
use std::ptr;

use ledsna_ffi::*;

fn ppm(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        for x in 0..width {
            out.extend_from_slice(&f(x, y));
        }
    }
    out
}

fn last_error() -> String {
    let p = ledsna_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Fixture {
    image: *mut LedsnaImage,
    seg: *mut LedsnaSegmentation,
}

impl Fixture {
    fn new() -> Self {
        let bytes = ppm(8, 8, |x, y| [(x * 30) as u8, (y * 30) as u8, 90]);
        let mut image = ptr::null_mut();
        let mut seg = ptr::null_mut();
        unsafe {
            assert_eq!(
                ledsna_image_from_ppm(bytes.as_ptr(), bytes.len(), &mut image),
                LedsnaStatus::Ok
            );
            assert_eq!(ledsna_segment_grid(image, 2, 2, &mut seg), LedsnaStatus::Ok);
        }
        Self { image, seg }
    }
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe {
            ledsna_segmentation_free(self.seg);
            ledsna_image_free(self.image);
        }
    }
}

fn spec(s: &str) -> *mut LedsnaBlackBox {
    let s = CString::new(s).unwrap();
    let mut bb = ptr::null_mut();
    assert_eq!(
        unsafe { ledsna_blackbox_from_spec(s.as_ptr(), 0, &mut bb) },
        LedsnaStatus::Ok
    );
    bb
}

#[test]
fn constant_black_box_explains_to_zero() {
    let fx = Fixture::new();
    assert_eq!(unsafe { ledsna_segmentation_count(fx.seg) }, 4);
    let bb = spec("builtin:constant:0.7");
    let mut cfg = ledsna_config_default();
    cfg.n_samples = 64;
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(
            ledsna_explain_image(fx.image, fx.seg, bb, &cfg, &mut e),
            LedsnaStatus::Ok
        );
        assert_eq!(ledsna_explanation_n_features(e), 4);
        let mut attrs = [f64::NAN; 4];
        assert_eq!(ledsna_explanation_attributions(e, attrs.as_mut_ptr(), 4), 4);
        assert!(attrs.iter().all(|a| a.abs() < 1e-9), "{attrs:?}");
        assert!(ledsna_explanation_err(e) < 1e-3);
        assert!((ledsna_explanation_f_at_x(e) - 0.7).abs() < 1e-15);
        let json = ledsna_explanation_to_json(e);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        ledsna_string_free(json);
        assert!(text.contains("\"attributions\""));
        ledsna_explanation_free(e);
        ledsna_blackbox_free(bb);
    }
}

#[test]
fn ridge_on_lexicon_text() {
    let bb = spec("builtin:lexicon");
    let mut cfg = ledsna_config_default();
    cfg.surrogate = LEDSNA_SURROGATE_RIDGE;
    cfg.lambda = 0.01;
    cfg.n_samples = 300;
    let text = CString::new("the food was good but service terrible").unwrap();
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(
            ledsna_explain_text(text.as_ptr(), 1, bb, &cfg, &mut e),
            LedsnaStatus::Ok
        );
        let mut top = [usize::MAX; 2];
        assert_eq!(ledsna_explanation_top_k(e, top.as_mut_ptr(), 2), 2);
        assert_eq!(top[0], 3);
        let r2 = ledsna_explanation_r_squared(e);
        assert!(r2 > 0.9, "{r2}");
        ledsna_explanation_free(e);
        ledsna_blackbox_free(bb);
    }
}

unsafe extern "C" fn weighted_mask(user: *mut c_void, probes: *const LedsnaProbe, n: usize, out: *mut f64) -> c_int {
    let calls = &mut *(user as *mut usize);
    *calls += 1;
    let probes = std::slice::from_raw_parts(probes, n);
    let out = std::slice::from_raw_parts_mut(out, n);
    for (p, o) in probes.iter().zip(out) {
        if p.rgb.is_null() || p.mask.is_null() {
            return 1;
        }
        if p.width * p.height != 64 {
            return 2;
        }
        let mask = std::slice::from_raw_parts(p.mask, p.mask_len);
        *o = mask
            .iter()
            .enumerate()
            .map(|(j, &b)| f64::from(b) * (j + 1) as f64 / 10.0)
            .sum();
    }
    0
}

unsafe extern "C" fn failing(_: *mut c_void, _: *const LedsnaProbe, _: usize, _: *mut f64) -> c_int {
    7
}

#[test]
fn callback_black_box_is_called_in_batches() {
    let fx = Fixture::new();
    let mut calls = 0usize;
    let mut bb = ptr::null_mut();
    let mut cfg = ledsna_config_default();
    cfg.n_samples = 100;
    cfg.batch_size = 32;
    cfg.surrogate = LEDSNA_SURROGATE_RIDGE;
    cfg.lambda = 0.0;
    let mut e = ptr::null_mut();
    unsafe {
        let user = &mut calls as *mut usize as *mut c_void;
        assert_eq!(
            ledsna_blackbox_from_callback(Some(weighted_mask), user, &mut bb),
            LedsnaStatus::Ok
        );
        assert_eq!(
            ledsna_explain_image(fx.image, fx.seg, bb, &cfg, &mut e),
            LedsnaStatus::Ok
        );
        // 100 samples plus the instance itself, 32 per batch.
        assert_eq!(calls, 4);
        let mut attrs = [0.0; 4];
        ledsna_explanation_attributions(e, attrs.as_mut_ptr(), 4);
        for (j, a) in attrs.iter().enumerate() {
            assert!((a - (j + 1) as f64 / 10.0).abs() < 1e-9, "{attrs:?}");
        }
        ledsna_explanation_free(e);
        ledsna_blackbox_free(bb);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let fx = Fixture::new();
    let mut bb = ptr::null_mut();
    let cfg = ledsna_config_default();
    let mut e = ptr::null_mut();
    unsafe {
        ledsna_blackbox_from_callback(Some(failing), ptr::null_mut(), &mut bb);
        assert_eq!(
            ledsna_explain_image(fx.image, fx.seg, bb, &cfg, &mut e),
            LedsnaStatus::BlackBox
        );
        assert!(e.is_null());
        assert!(last_error().contains('7'));
        ledsna_blackbox_free(bb);

        let bad = CString::new("ftp:nowhere").unwrap();
        assert_eq!(ledsna_blackbox_from_spec(bad.as_ptr(), 0, &mut bb), LedsnaStatus::Parse);
        assert_eq!(
            ledsna_blackbox_from_spec(ptr::null(), 0, &mut bb),
            LedsnaStatus::NullArgument
        );

        let junk = b"P3 nonsense";
        let mut img = ptr::null_mut();
        assert_ne!(
            ledsna_image_from_ppm(junk.as_ptr(), junk.len(), &mut img),
            LedsnaStatus::Ok
        );
        assert!(img.is_null());

        let mut seg = ptr::null_mut();
        assert_eq!(
            ledsna_segment_grid(fx.image, 0, 2, &mut seg),
            LedsnaStatus::InvalidArgument
        );

        let bb = spec("builtin:constant:0.5");
        let mut cfg = ledsna_config_default();
        cfg.surrogate = 42;
        assert_eq!(
            ledsna_explain_image(fx.image, fx.seg, bb, &cfg, &mut e),
            LedsnaStatus::InvalidArgument
        );
        ledsna_blackbox_free(bb);
    }
}

#[test]
fn metric_entry_points() {
    assert!((ledsna_approx_error(0.6076, 0.8129) - 0.2053).abs() < 1e-12);
    let labels = [0.0, 1.0, 1.0, 0.0];
    let preds = [0.0, 0.5, 1.0, 0.0];
    let mut r2 = 0.0;
    unsafe {
        assert_eq!(
            ledsna_r_squared(labels.as_ptr(), preds.as_ptr(), 4, &mut r2),
            LedsnaStatus::Ok
        );
        assert!((r2 - 0.75).abs() < 1e-12);
        let flat = [0.5; 3];
        let off = [0.4, 0.5, 0.5];
        assert_eq!(
            ledsna_r_squared(flat.as_ptr(), off.as_ptr(), 3, &mut r2),
            LedsnaStatus::Ok
        );
        assert!(r2.is_nan());
        assert_eq!(
            ledsna_r_squared(flat.as_ptr(), off.as_ptr(), 1, &mut r2),
            LedsnaStatus::InvalidArgument
        );
    }
}

#[test]
fn segmentation_labels_copy_out() {
    let fx = Fixture::new();
    let mut labels = vec![u32::MAX; 64];
    unsafe {
        assert_eq!(ledsna_segmentation_labels(fx.seg, labels.as_mut_ptr(), 10), 0);
        assert_eq!(ledsna_segmentation_labels(fx.seg, labels.as_mut_ptr(), 64), 64);
    }
    assert_eq!(labels[0], 0);
    assert_eq!(labels[7], 1);
    assert_eq!(labels[63], 3);
}

#[test]
fn fresh_thread_has_no_error() {
    std::thread::spawn(|| assert!(ledsna_last_error().is_null()))
        .join()
        .unwrap();
}
