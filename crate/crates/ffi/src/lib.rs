//! C ABI over `lpq-sampling`.
//!
//! Objects cross the boundary as opaque pointers created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns an
//! [`LpqStatus`]; on failure [`lpq_last_error`] describes the problem for the
//! calling thread. Outputs are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lpq_sampling::experiment::{self, Command};
use lpq_sampling::kernel_space::{GeneratorPhi, Kernel, Lattice, Placement, Stencil, MIN_GAP};
use lpq_sampling::mixed_norms::{seq_mixed_norm, Cube, Exponents, SampleMatrix};
use lpq_sampling::reconstruction::{
    build_partition, contraction_factor, error_certificate, iterate_reconstruct, IterateOptions,
    Reconstruction, StopReason,
};
use lpq_sampling::sampling_analysis::{covering_grid, SampleLayout, SampleSet};
use lpq_sampling::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    NonContraction = 4,
    Io = 5,
    Panic = 6,
    Internal = 7,
}

/// Normalized generator on a separated lattice.
pub struct LpqKernel {
    inner: Kernel,
    cube: Cube,
}

/// `l * m` sample points stored as `j * l + i`.
pub struct LpqSampleSet {
    inner: SampleSet,
}

/// Output of [`lpq_reconstruct`].
pub struct LpqReconstruction {
    inner: Reconstruction,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> LpqStatus {
    match err {
        Error::Validation(_) => LpqStatus::Validation,
        Error::IterationDiverged { .. } | Error::NotContractive(_) => LpqStatus::NonContraction,
        Error::Io { .. } => LpqStatus::Io,
        _ => LpqStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (LpqStatus, String)>) -> LpqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LpqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside lpq-sampling".into());
            LpqStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, (LpqStatus, String)>;
}

impl<T> OrStatus<T> for Result<T, Error> {
    fn or_status(self) -> Result<T, (LpqStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(name: &str) -> (LpqStatus, String) {
    (LpqStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    name: &str,
) -> Result<&'a [f64], (LpqStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (LpqStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, (LpqStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LpqStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lpq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lpq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `||c||_{l^{p,q}}` of an `l x m` matrix stored as `j * l + i`. Pass
/// `INFINITY` for a supremum.
#[no_mangle]
pub unsafe extern "C" fn lpq_seq_mixed_norm(
    values: *const f64,
    l: usize,
    m: usize,
    p: f64,
    q: f64,
    out: *mut f64,
) -> LpqStatus {
    guard(|| {
        let v = slice(values, l * m, "values")?;
        let e = Exponents::new(p, q).or_status()?;
        let mat = SampleMatrix::new(l, m, v.to_vec()).or_status()?;
        *out_ref(out, "out")? = seq_mixed_norm(&mat, &e);
        Ok(())
    })
}

/// Normalized generator on `(2/3) Z^{n+1}` with every support inside
/// `C_{r,s}`.
#[no_mangle]
pub unsafe extern "C" fn lpq_kernel_new(
    r: f64,
    s: f64,
    n: usize,
    out: *mut *mut LpqKernel,
) -> LpqStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let cube = Cube::new(r, s, n).or_status()?;
        let lat = Lattice::scaled_integer(&cube, MIN_GAP, Placement::Contained).or_status()?;
        let inner = Kernel::new(GeneratorPhi::normalized(n).or_status()?, lat).or_status()?;
        *slot = Box::into_raw(Box::new(LpqKernel { inner, cube }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lpq_kernel_free(kernel: *mut LpqKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of lattice nodes, 0 for a null kernel.
#[no_mangle]
pub unsafe extern "C" fn lpq_kernel_node_count(kernel: *const LpqKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.inner.lattice().len())
}

/// `K(p, q)` for two points of `n + 1` coordinates.
#[no_mangle]
pub unsafe extern "C" fn lpq_kernel_eval(
    kernel: *const LpqKernel,
    p: *const f64,
    q: *const f64,
    out: *mut f64,
) -> LpqStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let d = k.inner.n() + 1;
        let (p, q) = (slice(p, d, "p")?, slice(q, d, "q")?);
        *out_ref(out, "out")? = k.inner.eval(p, q);
        Ok(())
    })
}

/// Contraction factor `||K||_W (||w_theta(K)||_W + delta)` at grid spacing
/// `1 / resolution`.
#[no_mangle]
pub unsafe extern "C" fn lpq_contraction_factor(
    kernel: *const LpqKernel,
    theta: f64,
    delta: f64,
    resolution: usize,
    out: *mut f64,
) -> LpqStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if resolution == 0 {
            return Err((
                LpqStatus::InvalidArgument,
                "resolution must be positive".into(),
            ));
        }
        let c = contraction_factor(
            &k.inner,
            theta,
            delta,
            1.0 / resolution as f64,
            Stencil::Exact,
        )
        .or_status()?;
        *out_ref(out, "out")? = c.gamma;
        Ok(())
    })
}

/// `(1 + gamma)/(1 - gamma) gamma^{r+1} f_norm`; `gamma` must lie in `[0, 1)`.
#[no_mangle]
pub unsafe extern "C" fn lpq_error_certificate(
    gamma: f64,
    f_norm: f64,
    r: u32,
    out: *mut f64,
) -> LpqStatus {
    guard(|| {
        let v = error_certificate(gamma, f_norm, r).or_status()?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// `l * m` points drawn uniformly from the kernel's cube with `seed`.
#[no_mangle]
pub unsafe extern "C" fn lpq_samples_draw(
    kernel: *const LpqKernel,
    l: usize,
    m: usize,
    seed: u64,
    out: *mut *mut LpqSampleSet,
) -> LpqStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let slot = out_ref(out, "out")?;
        let inner = SampleSet::draw(&k.cube, l, m, seed, SampleLayout::Independent).or_status()?;
        *slot = Box::into_raw(Box::new(LpqSampleSet { inner }));
        Ok(())
    })
}

/// Cell centers of a product grid over the kernel's cube; `l` must be a
/// perfect `n`-th power.
#[no_mangle]
pub unsafe extern "C" fn lpq_samples_regular(
    kernel: *const LpqKernel,
    l: usize,
    m: usize,
    out: *mut *mut LpqSampleSet,
) -> LpqStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let slot = out_ref(out, "out")?;
        let inner = SampleSet::regular(&k.cube, l, m).or_status()?;
        *slot = Box::into_raw(Box::new(LpqSampleSet { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lpq_samples_free(samples: *mut LpqSampleSet) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Number of points, 0 for a null set.
#[no_mangle]
pub unsafe extern "C" fn lpq_samples_len(samples: *const LpqSampleSet) -> usize {
    samples.as_ref().map_or(0, |s| s.inner.len())
}

/// Copies the coordinates (`len * (n + 1)` values) into `buf` of capacity `cap`.
#[no_mangle]
pub unsafe extern "C" fn lpq_samples_points(
    samples: *const LpqSampleSet,
    buf: *mut f64,
    cap: usize,
) -> LpqStatus {
    guard(|| {
        let s = samples.as_ref().ok_or_else(|| null("samples"))?;
        let raw = s.inner.raw();
        if cap < raw.len() {
            return Err((
                LpqStatus::InvalidArgument,
                format!("buffer holds {cap} values, need {}", raw.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, raw.len()).copy_from_slice(raw);
        Ok(())
    })
}

/// Iterative reconstruction from `values` (one per sample, same order) with
/// partition radius `theta` on a grid of spacing `1 / resolution`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lpq_reconstruct(
    kernel: *const LpqKernel,
    samples: *const LpqSampleSet,
    values: *const f64,
    len: usize,
    theta: f64,
    resolution: usize,
    p: f64,
    q: f64,
    tol: f64,
    r_max: u32,
    out: *mut *mut LpqReconstruction,
) -> LpqStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let s = samples.as_ref().ok_or_else(|| null("samples"))?;
        let slot = out_ref(out, "out")?;
        if len != s.inner.len() {
            return Err((
                LpqStatus::InvalidArgument,
                format!("{len} values for {} samples", s.inner.len()),
            ));
        }
        if resolution == 0 {
            return Err((
                LpqStatus::InvalidArgument,
                "resolution must be positive".into(),
            ));
        }
        let v = slice(values, len, "values")?;
        let e = Exponents::new(p, q).or_status()?;
        let grid = covering_grid(&k.inner, &k.cube, 1.0 / resolution as f64).or_status()?;
        let pu = build_partition(&s.inner, theta, &grid).or_status()?;
        let vals = SampleMatrix::new(s.inner.l(), s.inner.m(), v.to_vec()).or_status()?;
        let opts = IterateOptions {
            r_max,
            tol,
            gamma_theory: None,
        };
        let rec = iterate_reconstruct(&k.inner, &pu, &vals, &e, None, &opts).or_status()?;
        if rec.trace.stop == StopReason::NonContraction {
            return Err((
                LpqStatus::NonContraction,
                format!(
                    "iteration stopped contracting after {} steps",
                    rec.trace.iterations()
                ),
            ));
        }
        *slot = Box::into_raw(Box::new(LpqReconstruction { inner: rec }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lpq_reconstruction_free(rec: *mut LpqReconstruction) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Iterations after `f_0`, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lpq_reconstruction_iterations(rec: *const LpqReconstruction) -> usize {
    rec.as_ref().map_or(0, |r| r.inner.trace.iterations())
}

/// 1 when the residual criterion was met, 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn lpq_reconstruction_converged(rec: *const LpqReconstruction) -> i32 {
    rec.as_ref().map_or(0, |r| r.inner.trace.converged() as i32)
}

/// Copies the lattice coefficients (one per node) into `buf` of capacity `cap`.
#[no_mangle]
pub unsafe extern "C" fn lpq_reconstruction_coefficients(
    rec: *const LpqReconstruction,
    buf: *mut f64,
    cap: usize,
) -> LpqStatus {
    guard(|| {
        let r = rec.as_ref().ok_or_else(|| null("rec"))?;
        let c = r.inner.coeffs.coefficients();
        if cap < c.len() {
            return Err((
                LpqStatus::InvalidArgument,
                format!("buffer holds {cap} values, need {}", c.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, c.len()).copy_from_slice(c);
        Ok(())
    })
}

/// Runs a CLI subcommand (`"bounds"`, `"sample-sweep"`, `"reconstruct"` or
/// `"kernel-check"`) from a TOML config into `out_dir`.
#[no_mangle]
pub unsafe extern "C" fn lpq_run_experiment(
    command: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
) -> LpqStatus {
    guard(|| {
        let cmd = match text(command, "command")? {
            "bounds" => Command::Bounds,
            "sample-sweep" => Command::SampleSweep,
            "reconstruct" => Command::Reconstruct,
            "kernel-check" => Command::KernelCheck,
            other => {
                return Err((
                    LpqStatus::InvalidArgument,
                    format!("unknown command {other:?}"),
                ))
            }
        };
        let cfg =
            experiment::load_config(Path::new(text(config_path, "config_path")?)).or_status()?;
        experiment::run(cmd, &cfg, Path::new(text(out_dir, "out_dir")?)).or_status()?;
        Ok(())
    })
}
