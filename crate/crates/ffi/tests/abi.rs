use std::ffi::CStr;
use std::ptr;

use treebec_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(treebec_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_values_and_domain_errors() {
    let (mut a, mut mu) = (0.0, 0.0);
    assert_eq!(unsafe { treebec_a_mu(3.0, 3, &mut a, &mut mu) }, TreebecStatus::Ok);
    assert!((a - 0.5).abs() < 1e-15 && (mu - 1.5).abs() < 1e-15);
    assert!(last_error().is_empty());

    assert_eq!(unsafe { treebec_a_mu(2.0, 3, &mut a, &mut mu) }, TreebecStatus::Domain);
    assert!(last_error().contains("domain"));

    let mut g = 0.0;
    assert_eq!(unsafe { treebec_green_entry(3, 3.0, 2, &mut g) }, TreebecStatus::Ok);
    assert!((g - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(unsafe { treebec_green_entry(3, 3.0, 2, ptr::null_mut()) }, TreebecStatus::NullPointer);

    let (mut b, mut f) = (0.0, 0.0);
    assert_eq!(unsafe { treebec_bose_split(1.0, &mut b, &mut f) }, TreebecStatus::Ok);
    assert!((b - 1.0 / (1f64.exp() - 1.0)).abs() < 1e-15 && (f - (b - 1.0)).abs() < 1e-15);
    assert_eq!(unsafe { treebec_bose_split(-1.0, &mut b, &mut f) }, TreebecStatus::Domain);
}

#[test]
fn secular_root_of_a_single_site() {
    let mut r = 0.0;
    let s = unsafe { treebec_secular_root(TreebecKind::Ray, 3, 0, 1, 1e-13, &mut r) };
    assert_eq!(s, TreebecStatus::Ok);
    assert!((r - (3.0 * 5f64.sqrt() - 1.0) / 2.0).abs() < 1e-10);
    let s = unsafe { treebec_secular_root(TreebecKind::Tree, 3, 0, 1, 1e-13, &mut r) };
    assert_eq!(s, TreebecStatus::InvalidArgument);
}

#[test]
fn model_handles() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { treebec_model_new(TreebecKind::Ray, 3, 0, 6, &mut m) }, TreebecStatus::Ok);
    let n = unsafe { treebec_model_vertex_count(m) };
    assert_eq!(n, 1 + 3 * (64 - 1));

    let mut lmax = 0.0;
    assert_eq!(unsafe { treebec_lambda_max(m, 1e-10, &mut lmax) }, TreebecStatus::Ok);
    let mut v = vec![0.0; n];
    assert_eq!(unsafe { treebec_pf_vector(m, 1e-10, v.as_mut_ptr(), n) }, TreebecStatus::Ok);
    assert_eq!(v[0], 1.0);
    assert!(v.iter().all(|&x| x > 0.0));
    assert_eq!(unsafe { treebec_pf_vector(m, 1e-10, v.as_mut_ptr(), n - 1) }, TreebecStatus::InvalidArgument);

    let mut norm = ptr::null_mut();
    assert_eq!(unsafe { treebec_norm_estimate(TreebecKind::Ray, 3, 0, 1e-13, &mut norm) }, TreebecStatus::Ok);
    let (mut ls, mut gap) = (0.0, 0.0);
    assert_eq!(unsafe { treebec_norm_value(norm, &mut ls, &mut gap) }, TreebecStatus::Ok);
    assert!((ls - (9.0 - 5f64.sqrt()) / 2.0).abs() < 1e-4);
    assert!(lmax < ls && gap > 0.5);

    let mut cv = 0.0;
    assert_eq!(unsafe { treebec_closed_v(norm, m, 0, &mut cv) }, TreebecStatus::Ok);
    assert_eq!(cv, 1.0);
    assert_eq!(unsafe { treebec_closed_v(norm, m, n, &mut cv) }, TreebecStatus::InvalidArgument);

    unsafe {
        treebec_norm_free(norm);
        treebec_model_free(m);
        treebec_model_free(ptr::null_mut());
    }
    assert_eq!(unsafe { treebec_model_vertex_count(ptr::null()) }, 0);
}

#[test]
fn oversized_models_report_capacity() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { treebec_model_new(TreebecKind::Ray, 3, 0, 60, &mut m) }, TreebecStatus::Capacity);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}
