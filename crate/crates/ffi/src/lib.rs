//! C ABI over `treebec`.
//!
//! Every fallible function returns a [`TreebecStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and read
//! with [`treebec_last_error`]. Models and norm estimates are opaque handles
//! released with their `_free` functions. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use treebec::graph::{perturb, ModelKind, PerturbationMode, PerturbedModel, TreeBall};
use treebec::krein::{self, BaseGeometry, ModelNorm, SecularProblem};
use treebec::pf::PfWeight;
use treebec::spectral::pf_vector;
use treebec::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreebecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Capacity = 4,
    NoConvergence = 5,
    Numerical = 6,
    Internal = 7,
}

/// Graph families: the plain tree, the tree with a geodesic ray as base,
/// and the tree with an embedded degree-`base_degree` subtree as base.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreebecKind {
    Tree = 0,
    Ray = 1,
    Subtree = 2,
}

/// Opaque finite ball with its perturbation.
pub struct TreebecModel(PerturbedModel);

/// Opaque estimate of the norm of the infinite perturbed graph.
pub struct TreebecNorm(ModelNorm);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TreebecStatus {
    match e {
        Error::Domain(_) => TreebecStatus::Domain,
        Error::Capacity { .. } | Error::DenseLimit { .. } | Error::DegreeCap { .. } => TreebecStatus::Capacity,
        Error::NoConvergence { .. } => TreebecStatus::NoConvergence,
        Error::Indefinite(_) | Error::NearSingular(_) | Error::NoCrossing(_) => TreebecStatus::Numerical,
        Error::InvalidModel(_) | Error::Precondition(_) | Error::Config(_) | Error::Stale(_) => {
            TreebecStatus::InvalidArgument
        }
        _ => TreebecStatus::Internal,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (TreebecStatus, String)>) -> TreebecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TreebecStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TreebecStatus::Internal
        }
    }
}

fn lift<T>(r: treebec::Result<T>) -> Result<T, (TreebecStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (TreebecStatus, String) {
    (TreebecStatus::NullPointer, "null pointer argument".into())
}

fn kind_of(kind: TreebecKind, base_degree: usize) -> ModelKind {
    match kind {
        TreebecKind::Tree => ModelKind::Tree,
        TreebecKind::Ray => ModelKind::Ray,
        TreebecKind::Subtree => ModelKind::Subtree { q: base_degree },
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, (TreebecStatus, String)> {
    p.as_mut().ok_or_else(null)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn treebec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn treebec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The pair `a(lambda)`, `mu(lambda)` for degree `q`.
///
/// # Safety
/// `a` and `mu` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_a_mu(lambda: f64, q: usize, a: *mut f64, mu: *mut f64) -> TreebecStatus {
    guard(|| {
        let (a, mu) = (out(a)?, out(mu)?);
        (*a, *mu) = lift(krein::a_mu(lambda, q))?;
        Ok(())
    })
}

/// Free tree resolvent entry `a(lambda)^d / mu(lambda)`.
///
/// # Safety
/// `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_green_entry(q: usize, lambda: f64, d: usize, value: *mut f64) -> TreebecStatus {
    guard(|| {
        *out(value)? = lift(krein::green_entry(q, lambda, d))?;
        Ok(())
    })
}

/// Bose occupation `b(x)` and its regular part `b(x) - 1/x`, for `x >= 0`.
///
/// # Safety
/// `occupation` and `regular` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_bose_split(x: f64, occupation: *mut f64, regular: *mut f64) -> TreebecStatus {
    guard(|| {
        let (o, r) = (out(occupation)?, out(regular)?);
        (*o, *r) = lift(treebec::thermo::bose_split(x))?;
        Ok(())
    })
}

/// Root of the secular equation on a base truncated at `level` (ray sites or
/// subtree radius).
///
/// # Safety
/// `root` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_secular_root(
    kind: TreebecKind,
    degree: usize,
    base_degree: usize,
    level: usize,
    tol: f64,
    root: *mut f64,
) -> TreebecStatus {
    guard(|| {
        let root = out(root)?;
        let geom = lift(BaseGeometry::for_kind(kind_of(kind, base_degree), level))?;
        *root = lift(SecularProblem::new(degree, geom).root(tol))?;
        Ok(())
    })
}

/// Builds the radius-`radius` ball of degree `degree`, perturbed along the base.
///
/// # Safety
/// `model` must be valid for writes. Release the handle with [`treebec_model_free`].
#[no_mangle]
pub unsafe extern "C" fn treebec_model_new(
    kind: TreebecKind,
    degree: usize,
    base_degree: usize,
    radius: usize,
    model: *mut *mut TreebecModel,
) -> TreebecStatus {
    guard(|| {
        let slot = out(model)?;
        *slot = ptr::null_mut();
        let ball = lift(TreeBall::build(degree, radius))?;
        let m = lift(perturb(ball, kind_of(kind, base_degree), PerturbationMode::DiagonalUnit))?;
        *slot = Box::into_raw(Box::new(TreebecModel(m)));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`treebec_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn treebec_model_free(model: *mut TreebecModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of vertices; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn treebec_model_vertex_count(model: *const TreebecModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// Top eigenvalue of the model adjacency.
///
/// # Safety
/// `model` must be a live handle and `value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_lambda_max(model: *const TreebecModel, tol: f64, value: *mut f64) -> TreebecStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        *out(value)? = lift(pf_vector(m.0.adjacency(), 0, tol))?.lambda_max;
        Ok(())
    })
}

/// Perron-Frobenius vector normalised to 1 at the root, written to
/// `buffer[0..len]`; `len` must equal the vertex count.
///
/// # Safety
/// `model` must be a live handle and `buffer` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_pf_vector(
    model: *const TreebecModel,
    tol: f64,
    buffer: *mut f64,
    len: usize,
) -> TreebecStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        if buffer.is_null() {
            return Err(null());
        }
        if len != m.0.vertex_count() {
            return Err((TreebecStatus::InvalidArgument, format!("buffer holds {len}, model has {}", m.0.vertex_count())));
        }
        let v = lift(pf_vector(m.0.adjacency(), 0, tol))?.pf_vector;
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(&v);
        Ok(())
    })
}

/// Norm of the infinite perturbed graph, extrapolated over the default truncations.
///
/// # Safety
/// `norm` must be valid for writes. Release the handle with [`treebec_norm_free`].
#[no_mangle]
pub unsafe extern "C" fn treebec_norm_estimate(
    kind: TreebecKind,
    degree: usize,
    base_degree: usize,
    tol: f64,
    norm: *mut *mut TreebecNorm,
) -> TreebecStatus {
    guard(|| {
        let slot = out(norm)?;
        *slot = ptr::null_mut();
        let k = kind_of(kind, base_degree);
        let n = lift(ModelNorm::estimate(k, degree, &ModelNorm::default_levels(k), tol))?;
        *slot = Box::into_raw(Box::new(TreebecNorm(n)));
        Ok(())
    })
}

/// Releases a norm estimate; null is ignored.
///
/// # Safety
/// `norm` must come from [`treebec_norm_estimate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn treebec_norm_free(norm: *mut TreebecNorm) {
    if !norm.is_null() {
        drop(Box::from_raw(norm));
    }
}

/// Estimated norm and the gap above the free tree norm.
///
/// # Safety
/// `norm` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_norm_value(
    norm: *const TreebecNorm,
    lambda_star: *mut f64,
    gap: *mut f64,
) -> TreebecStatus {
    guard(|| {
        let n = norm.as_ref().ok_or_else(null)?;
        *out(lambda_star)? = n.0.lambda_star;
        *out(gap)? = n.0.gap;
        Ok(())
    })
}

/// Closed-form Perron-Frobenius weight at vertex `x` of `model`.
///
/// # Safety
/// Both handles must be live and `value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn treebec_closed_v(
    norm: *const TreebecNorm,
    model: *const TreebecModel,
    x: usize,
    value: *mut f64,
) -> TreebecStatus {
    guard(|| {
        let n = norm.as_ref().ok_or_else(null)?;
        let m = model.as_ref().ok_or_else(null)?;
        if x >= m.0.vertex_count() {
            return Err((TreebecStatus::InvalidArgument, format!("vertex {x} outside the model")));
        }
        if n.0.kind != m.0.kind() || n.0.degree != m.0.degree() {
            return Err((TreebecStatus::InvalidArgument, "norm and model describe different graphs".into()));
        }
        let w = lift(PfWeight::from_norm(&n.0))?;
        *out(value)? = w.closed_v(&m.0, x);
        Ok(())
    })
}
