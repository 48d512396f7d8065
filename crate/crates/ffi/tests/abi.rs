use std::ffi::{c_char, CString};
use std::ptr;

use cdpr_ffi::*;

fn canonical(variant: CdprVariant) -> *mut CdprModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cdpr_model_canonical(variant as u32, &mut m) }, CdprStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let n = unsafe { cdpr_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { cdpr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

const CENTRE: [f64; 8] = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.02, 0.0];

#[test]
fn ik_fk_round_trip_through_the_abi() {
    let m = canonical(CdprVariant::AScrew);
    let q = [0.1, -0.05, 1.1, 0.02, -0.01, 0.1, 0.03, 0.4];
    let mut l = [0.0; 8];
    assert_eq!(unsafe { cdpr_ik(m, q.as_ptr(), l.as_mut_ptr()) }, CdprStatus::Ok);

    let mut guess = q;
    guess[0] += 0.005;
    guess[5] -= 0.01;
    let (mut back, mut iterations) = ([0.0; 8], 0u32);
    assert_eq!(unsafe { cdpr_fk(m, l.as_ptr(), guess.as_ptr(), back.as_mut_ptr(), &mut iterations) }, CdprStatus::Ok);
    assert!(iterations > 0);
    for k in 0..8 {
        assert!((back[k] - q[k]).abs() < 1e-8, "{k}: {back:?}");
    }
    unsafe { cdpr_model_free(m) };
}

#[test]
fn jacobian_is_row_major_by_cable() {
    let m = canonical(CdprVariant::AScrew);
    let (mut j, mut cond) = ([0.0; 64], 0.0);
    assert_eq!(unsafe { cdpr_jacobian(m, CENTRE.as_ptr(), j.as_mut_ptr(), &mut cond) }, CdprStatus::Ok);
    assert!(cond.is_finite() && cond >= 1.0);

    // row i against a central difference of cable i's length along x
    let h = 1e-6;
    let (mut lp, mut lm) = ([0.0; 8], [0.0; 8]);
    let (mut qp, mut qm) = (CENTRE, CENTRE);
    qp[0] += h;
    qm[0] -= h;
    unsafe {
        cdpr_ik(m, qp.as_ptr(), lp.as_mut_ptr());
        cdpr_ik(m, qm.as_ptr(), lm.as_mut_ptr());
    }
    for i in 0..8 {
        let fd = (lp[i] - lm[i]) / (2.0 * h);
        assert!((j[i * 8] - fd).abs() < 1e-7, "cable {i}: {} vs {fd}", j[i * 8]);
    }
    unsafe { cdpr_model_free(m) };
}

#[test]
fn static_tensions_at_the_centre() {
    let m = canonical(CdprVariant::AScrew);
    let (mut t, mut feasible) = ([0.0; 8], -1);
    assert_eq!(unsafe { cdpr_solve_tensions(m, CENTRE.as_ptr(), t.as_mut_ptr(), &mut feasible) }, CdprStatus::Ok);
    assert_eq!(feasible, 1);
    assert!(t.iter().all(|&x| x > 0.0), "{t:?}");
    unsafe { cdpr_model_free(m) };
}

#[test]
fn model_from_json_and_parse_errors() {
    let json =
        CString::new(cdpr_core::canonical::scenario(cdpr_core::model::Variant::BGripper).to_json_string().unwrap())
            .unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cdpr_model_from_json(json.as_ptr(), &mut m) }, CdprStatus::Ok);
    unsafe { cdpr_model_free(m) };

    let bad = CString::new(r#"{"geometry": 3}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cdpr_model_from_json(bad.as_ptr(), &mut m) }, CdprStatus::Parse);
    assert!(m.is_null());
    assert!(last_error().contains("geometry"), "{}", last_error());
}

#[test]
fn error_codes() {
    let m = canonical(CdprVariant::AWinder);
    let mut out = [0.0; 8];

    let mut q = CENTRE;
    q[6] = 5.0;
    assert_eq!(unsafe { cdpr_ik(m, q.as_ptr(), out.as_mut_ptr()) }, CdprStatus::OutOfStroke);
    assert!(last_error().contains("stroke"));

    let ones = [1.0; 8];
    assert_eq!(
        unsafe { cdpr_fk(m, ones.as_ptr(), CENTRE.as_ptr(), out.as_mut_ptr(), ptr::null_mut()) },
        CdprStatus::NoConvergence
    );

    q = CENTRE;
    q[0] = f64::NAN;
    assert_eq!(unsafe { cdpr_ik(m, q.as_ptr(), out.as_mut_ptr()) }, CdprStatus::InvalidArgument);

    assert_eq!(unsafe { cdpr_ik(ptr::null(), CENTRE.as_ptr(), out.as_mut_ptr()) }, CdprStatus::NullPointer);
    assert_eq!(unsafe { cdpr_ik(m, CENTRE.as_ptr(), ptr::null_mut()) }, CdprStatus::NullPointer);

    let mut none = ptr::null_mut();
    assert_eq!(unsafe { cdpr_model_canonical(42, &mut none) }, CdprStatus::InvalidArgument);
    assert!(none.is_null());

    // success clears the message
    assert_eq!(unsafe { cdpr_ik(m, CENTRE.as_ptr(), out.as_mut_ptr()) }, CdprStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe {
        cdpr_model_free(m);
        cdpr_model_free(ptr::null_mut());
    }
}

#[test]
fn truncated_error_message_is_terminated() {
    let mut none = ptr::null_mut();
    unsafe { cdpr_model_canonical(42, &mut none) };
    let mut buf = [1 as c_char; 5];
    let n = unsafe { cdpr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 4);
    assert_eq!(buf[4], 0);
}
