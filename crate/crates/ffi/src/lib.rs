//! C interface to the donor-dot simulator.
//!
//! Devices are opaque [`DdDevice`] handles created by one of the
//! `dd_device_*` constructors and released with [`dd_device_free`]. Every
//! fallible call returns a [`DdStatus`]; on failure the reason is available
//! from [`dd_last_error`] on the same thread until the next failing call.
//! Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use donor_dot::config::parse_device;
use donor_dot::sweep::{ground_state, run_sweep_with_jobs, Axis, Observable, SweepPlan};
use donor_dot::transport::{conductance, current};
use donor_dot::{BiasPoint, DeviceSpec, DotIndex, Error, Terminal};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    BufferTooSmall = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdIsland {
    Donor = 0,
    Dot = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdTerminal {
    Source = 0,
    Drain = 1,
    Gate = 2,
    Back = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdObservable {
    /// Drain current (A).
    Current = 0,
    /// dI/dV_d in e^2/h.
    Conductance = 1,
    Log10Conductance = 2,
}

/// Terminal voltages (mV).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DdBias {
    pub v_source: f64,
    pub v_drain: f64,
    pub v_gate: f64,
    pub v_back: f64,
}

/// Evenly spaced sweep of one terminal, endpoints included.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdAxis {
    pub terminal: DdTerminal,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

/// Opaque device handle.
pub struct DdDevice {
    spec: DeviceSpec,
}

impl From<DdIsland> for DotIndex {
    fn from(i: DdIsland) -> Self {
        match i {
            DdIsland::Donor => DotIndex::Donor,
            DdIsland::Dot => DotIndex::Dot,
        }
    }
}

impl From<DdTerminal> for Terminal {
    fn from(t: DdTerminal) -> Self {
        match t {
            DdTerminal::Source => Terminal::Source,
            DdTerminal::Drain => Terminal::Drain,
            DdTerminal::Gate => Terminal::Gate,
            DdTerminal::Back => Terminal::Back,
        }
    }
}

impl From<DdBias> for BiasPoint {
    fn from(b: DdBias) -> Self {
        BiasPoint::new(b.v_source, b.v_drain, b.v_gate, b.v_back)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => DdStatus::Io,
            Error::Config(_) | Error::Plan(_) | Error::Map(_) => DdStatus::Config,
            Error::InvalidParameter { .. } => DdStatus::InvalidArgument,
            _ => DdStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DdStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DdStatus::Panic
        }
    }
}

unsafe fn device<'a>(dev: *const DdDevice) -> Result<&'a DeviceSpec, Failure> {
    dev.as_ref().map(|d| &d.spec).ok_or_else(|| null("device"))
}

unsafe fn device_mut<'a>(dev: *mut DdDevice) -> Result<&'a mut DeviceSpec, Failure> {
    dev.as_mut().map(|d| &mut d.spec).ok_or_else(|| null("device"))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(DdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn emit(out: *mut *mut DdDevice, spec: DeviceSpec) -> Result<(), Failure> {
    put(out, Box::into_raw(Box::new(DdDevice { spec })), "out")
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn dd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The built-in reference device.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_device_table1(out: *mut *mut DdDevice) -> DdStatus {
    guard(|| emit(out, DeviceSpec::table1()))
}

/// Device from TOML text in the device file format.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_device_from_toml(toml: *const c_char, out: *mut *mut DdDevice) -> DdStatus {
    guard(|| {
        let spec = parse_device(text(toml, "toml")?)?;
        emit(out, spec)
    })
}

/// Device from a file in the device file format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_device_from_file(path: *const c_char, out: *mut *mut DdDevice) -> DdStatus {
    guard(|| {
        let path = text(path, "path")?;
        let body =
            std::fs::read_to_string(Path::new(path)).map_err(|e| Failure(DdStatus::Io, format!("{path}: {e}")))?;
        emit(out, parse_device(&body)?)
    })
}

/// Independent copy of `dev`.
///
/// # Safety
/// `dev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_device_clone(dev: *const DdDevice, out: *mut *mut DdDevice) -> DdStatus {
    guard(|| {
        let spec = device(dev)?.clone();
        emit(out, spec)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `dev` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dd_device_free(dev: *mut DdDevice) {
    if !dev.is_null() {
        drop(Box::from_raw(dev));
    }
}

/// # Safety
/// `dev` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_device_set_c_mutual(dev: *mut DdDevice, c_mutual: f64) -> DdStatus {
    guard(|| {
        let d = device_mut(dev)?;
        *d = d.with_c_mutual(c_mutual)?;
        Ok(())
    })
}

/// # Safety
/// `dev` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_device_set_temperature(dev: *mut DdDevice, kelvin: f64) -> DdStatus {
    guard(|| {
        let d = device_mut(dev)?;
        *d = d.with_temperature(kelvin)?;
        Ok(())
    })
}

/// Freezes the other island so only `island` conducts.
///
/// # Safety
/// `dev` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_device_isolate(dev: *mut DdDevice, island: DdIsland) -> DdStatus {
    guard(|| {
        let d = device_mut(dev)?;
        *d = d.isolate(island.into())?;
        Ok(())
    })
}

/// Charging energy `e^2 / C_sum` (meV).
///
/// # Safety
/// `dev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_charging_energy(dev: *const DdDevice, island: DdIsland, out: *mut f64) -> DdStatus {
    guard(|| put(out, device(dev)?.island(island.into()).caps().charging_energy(), "out"))
}

/// Lever arm `C_g / C_sum`.
///
/// # Safety
/// `dev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_lever_arm(dev: *const DdDevice, island: DdIsland, out: *mut f64) -> DdStatus {
    guard(|| put(out, device(dev)?.island(island.into()).caps().lever_arm(), "out"))
}

/// Coulomb diamond edge slopes dV_d/dV_g.
///
/// # Safety
/// `dev` must be a live handle; `positive` and `negative` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dd_diamond_slopes(
    dev: *const DdDevice,
    island: DdIsland,
    positive: *mut f64,
    negative: *mut f64,
) -> DdStatus {
    guard(|| {
        if positive.is_null() || negative.is_null() {
            return Err(null("slope output"));
        }
        let (p, n) = device(dev)?.island(island.into()).caps().diamond_slopes()?;
        put(positive, p, "positive")?;
        put(negative, n, "negative")
    })
}

/// Resonance-line slope dV_g/dV_b in a gate/back-gate map.
///
/// # Safety
/// `dev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_backgate_slope(dev: *const DdDevice, island: DdIsland, out: *mut f64) -> DdStatus {
    guard(|| {
        let s = device(dev)?.island(island.into()).caps().backgate_slope()?;
        put(out, s, "out")
    })
}

/// Steady-state drain current (A).
///
/// # Safety
/// `dev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_current(dev: *const DdDevice, bias: DdBias, out: *mut f64) -> DdStatus {
    guard(|| {
        let i = current(device(dev)?, &bias.into())?;
        put(out, i, "out")
    })
}

/// Differential conductance (e^2/h) by a central difference of `delta_vd` mV.
///
/// # Safety
/// `dev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dd_conductance(dev: *const DdDevice, bias: DdBias, delta_vd: f64, out: *mut f64) -> DdStatus {
    guard(|| {
        let g = conductance(device(dev)?, &bias.into(), delta_vd)?;
        put(out, g, "out")
    })
}

/// Lowest-energy charge state `(n_donor, m_dot)`.
///
/// # Safety
/// `dev` must be a live handle; `n` and `m` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dd_ground_state(dev: *const DdDevice, bias: DdBias, n: *mut u32, m: *mut u32) -> DdStatus {
    guard(|| {
        if n.is_null() || m.is_null() {
            return Err(null("state output"));
        }
        let (a, b) = ground_state(device(dev)?, &bias.into())?;
        put(n, a, "n")?;
        put(m, b, "m")
    })
}

fn axis(a: DdAxis) -> Result<Axis, Failure> {
    Ok(Axis::new(a.terminal.into(), a.start, a.stop, a.steps)?)
}

/// Evaluates `observable` on the `axis1 x axis2` grid into `values`,
/// axis 1 varying fastest. `capacity` is the length of `values`; it must be
/// at least `axis1.steps * axis2.steps` or [`DdStatus::BufferTooSmall`] is
/// returned with nothing written. `jobs = 0` uses all cores.
///
/// # Safety
/// `dev` must be a live handle and `values` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn dd_sweep(
    dev: *const DdDevice,
    axis1: DdAxis,
    axis2: DdAxis,
    fixed: DdBias,
    observable: DdObservable,
    jobs: usize,
    values: *mut f64,
    capacity: usize,
) -> DdStatus {
    guard(|| {
        let spec = device(dev)?;
        if values.is_null() {
            return Err(null("values"));
        }
        let observable = match observable {
            DdObservable::Current => Observable::Current,
            DdObservable::Conductance => Observable::Conductance,
            DdObservable::Log10Conductance => Observable::Log10Conductance,
        };
        let plan = SweepPlan::new(axis(axis1)?, axis(axis2)?, fixed.into(), observable)?;
        if capacity < plan.cells() {
            return Err(Failure(
                DdStatus::BufferTooSmall,
                format!("sweep needs {} values, buffer holds {capacity}", plan.cells()),
            ));
        }
        let map = run_sweep_with_jobs(spec, &plan, (jobs > 0).then_some(jobs))?;
        std::slice::from_raw_parts_mut(values, map.values.len()).copy_from_slice(&map.values);
        Ok(())
    })
}
