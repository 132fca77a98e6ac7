//! C ABI over the range library.
//!
//! Every function returns an [`LrStatus`]; on failure a message is kept per
//! thread and can be read with [`lr_last_error_message`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `_free` function. Panics never unwind into C: they become
//! `LR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use longrange::distances::{all_pairs, DistanceMatrix, Metric};
use longrange::graphs::{
    build_cycle, build_erdos_renyi, build_grid2d, build_line, from_edge_list, Graph,
};
use longrange::linalg::Matrix;
use longrange::models::train::TaskTarget;
use longrange::range::{hessian_node_range, node_range, RangeReport};
use longrange::tasks::{
    analytic_graph_range, analytic_node_range, k_dirac, k_power, k_rectangle, pairwise_graph_task,
    pairwise_node_task, LinearTask, PairwiseTaskSpec,
};
use longrange::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSize = 3,
    DimensionMismatch = 4,
    Parse = 5,
    Numerical = 6,
    Degenerate = 7,
    Panic = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrMetric {
    Spd = 0,
    Resistance = 1,
}

impl From<LrMetric> for Metric {
    fn from(m: LrMetric) -> Metric {
        match m {
            LrMetric::Spd => Metric::Spd,
            LrMetric::Resistance => Metric::Resistance,
        }
    }
}

/// Undirected simple graph.
pub struct LrGraph(Graph);

/// All-pairs distance matrix.
pub struct LrDistances(DistanceMatrix);

/// A task whose range can be measured.
pub struct LrTask(TaskTarget);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LrStatus {
    if err.is_numerical() {
        return LrStatus::Numerical;
    }
    match err {
        Error::InvalidArgument(_) | Error::InvalidNode { .. } | Error::Config(_) => {
            LrStatus::InvalidArgument
        }
        Error::InvalidSize(_) | Error::Empty(_) => LrStatus::InvalidSize,
        Error::DimensionMismatch(_) => LrStatus::DimensionMismatch,
        Error::Parse { .. } => LrStatus::Parse,
        Error::Degenerate(_) | Error::MaskedNode(_) => LrStatus::Degenerate,
        _ => LrStatus::Internal,
    }
}

struct Failure(LrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            LrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Checks and clears `out` before building the value, so a failed call
/// leaves NULL behind.
unsafe fn put<T>(
    out: *mut *mut T,
    build: impl FnOnce() -> Result<T, Failure>,
) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = ptr::null_mut();
    *out = Box::into_raw(Box::new(build()?));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn lr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// Graphs

/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_line(n: usize, out: *mut *mut LrGraph) -> LrStatus {
    guard(|| put(out, || Ok(LrGraph(build_line(n)?))))
}

/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_cycle(n: usize, out: *mut *mut LrGraph) -> LrStatus {
    guard(|| put(out, || Ok(LrGraph(build_cycle(n)?))))
}

/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_grid2d(h: usize, w: usize, out: *mut *mut LrGraph) -> LrStatus {
    guard(|| put(out, || Ok(LrGraph(build_grid2d(h, w)?))))
}

/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_erdos_renyi(
    n: usize,
    p: f64,
    seed: u64,
    out: *mut *mut LrGraph,
) -> LrStatus {
    guard(|| put(out, || Ok(LrGraph(build_erdos_renyi(n, p, seed)?))))
}

/// Builds a graph from `m` pairs stored flat in `edges` (`2m` entries).
/// Duplicates and self-loops are dropped.
///
/// # Safety
/// `edges` must point to `2 * m` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_from_edges(
    n: usize,
    edges: *const usize,
    m: usize,
    out: *mut *mut LrGraph,
) -> LrStatus {
    guard(|| {
        let len = m
            .checked_mul(2)
            .ok_or_else(|| Failure(LrStatus::InvalidSize, "edge count overflows".into()))?;
        let flat = slice(edges, len, "edges")?;
        let (g, _) = Graph::from_edges(n, flat.chunks_exact(2).map(|e| (e[0], e[1])))?;
        put(out, || Ok(LrGraph(g)))
    })
}

/// Parses edge-list text (`n m` header, then `u v` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_from_edge_list(
    text: *const c_char,
    out: *mut *mut LrGraph,
) -> LrStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Failure(LrStatus::Parse, format!("text is not UTF-8: {e}")))?;
        put(out, || Ok(LrGraph(from_edge_list(s)?.graph)))
    })
}

/// # Safety
/// `g` must be a live graph handle; `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_node_count(g: *const LrGraph, n: *mut usize) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        *n.as_mut().ok_or_else(|| null("n"))? = g.0.node_count();
        Ok(())
    })
}

/// # Safety
/// `g` must be a live graph handle; `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_edge_count(g: *const LrGraph, m: *mut usize) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        *m.as_mut().ok_or_else(|| null("m"))? = g.0.edge_count();
        Ok(())
    })
}

/// # Safety
/// `g` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_graph_free(g: *mut LrGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

// Distances

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_distances_compute(
    g: *const LrGraph,
    metric: LrMetric,
    out: *mut *mut LrDistances,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        put(out, || Ok(LrDistances(all_pairs(&g.0, metric.into())?)))
    })
}

/// Distance between `u` and `v`; zero across components.
///
/// # Safety
/// `d` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_distances_get(
    d: *const LrDistances,
    u: usize,
    v: usize,
    value: *mut f64,
) -> LrStatus {
    guard(|| {
        let d = deref(d, "distances")?;
        let n = d.0.n();
        for node in [u, v] {
            if node >= n {
                return Err(Error::InvalidNode { node, n }.into());
            }
        }
        *value.as_mut().ok_or_else(|| null("value"))? = d.0.get(u, v);
        Ok(())
    })
}

/// Whether `u` and `v` lie in different components.
///
/// # Safety
/// `d` must be a live handle; `cross` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_distances_is_cross_component(
    d: *const LrDistances,
    u: usize,
    v: usize,
    cross: *mut bool,
) -> LrStatus {
    guard(|| {
        let d = deref(d, "distances")?;
        let n = d.0.n();
        for node in [u, v] {
            if node >= n {
                return Err(Error::InvalidNode { node, n }.into());
            }
        }
        *cross.as_mut().ok_or_else(|| null("cross"))? = d.0.is_cross_component(u, v);
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_distances_free(d: *mut LrDistances) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

// Tasks

/// Row-normalized `Â^k` (with or without self-loops).
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_k_power(
    g: *const LrGraph,
    k: usize,
    self_loops: bool,
    out: *mut *mut LrTask,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        put(out, || {
            Ok(LrTask(TaskTarget::Linear(k_power(&g.0, k, self_loops)?)))
        })
    })
}

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_k_rectangle(
    g: *const LrGraph,
    k: usize,
    out: *mut *mut LrTask,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        put(out, || {
            Ok(LrTask(TaskTarget::Linear(k_rectangle(&g.0, k)?)))
        })
    })
}

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_k_dirac(
    g: *const LrGraph,
    k: usize,
    out: *mut *mut LrTask,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        put(out, || Ok(LrTask(TaskTarget::Linear(k_dirac(&g.0, k)?))))
    })
}

/// Linear task `y = L x` from a row-major `n x n` matrix.
///
/// # Safety
/// `matrix` must point to `n * n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_custom(
    n: usize,
    matrix: *const f64,
    out: *mut *mut LrTask,
) -> LrStatus {
    guard(|| {
        let len = n
            .checked_mul(n)
            .ok_or_else(|| Failure(LrStatus::InvalidSize, "matrix size overflows".into()))?;
        let values = slice(matrix, len, "matrix")?.to_vec();
        let m = Matrix::from_vec(n, n, values)?;
        put(out, || {
            Ok(LrTask(TaskTarget::Linear(LinearTask::custom(m)?)))
        })
    })
}

/// Node-level squared difference averaged over the `k`-hop neighborhood.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_squared_difference_node(
    g: *const LrGraph,
    k: usize,
    out: *mut *mut LrTask,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        put(out, || {
            Ok(LrTask(TaskTarget::PairwiseNode(
                PairwiseTaskSpec::squared_difference_node(&g.0, k)?,
            )))
        })
    })
}

/// Mean-pooled squared difference over `k`-hop neighborhoods.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_squared_difference_graph(
    g: *const LrGraph,
    k: usize,
    out: *mut *mut LrTask,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        put(out, || {
            Ok(LrTask(TaskTarget::PairwiseGraph(
                PairwiseTaskSpec::squared_difference_graph(&g.0, k)?,
            )))
        })
    })
}

/// Whether the task's range comes from second derivatives.
///
/// # Safety
/// `t` must be a live task handle; `graph_level` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_is_graph_level(
    t: *const LrTask,
    graph_level: *mut bool,
) -> LrStatus {
    guard(|| {
        let t = deref(t, "task")?;
        *graph_level.as_mut().ok_or_else(|| null("graph_level"))? = t.0.is_graph_level();
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lr_task_free(t: *mut LrTask) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

// Ranges

unsafe fn report(
    t: *const LrTask,
    d: *const LrDistances,
    x: *const f64,
    normalized: bool,
) -> Result<RangeReport, Failure> {
    let t = deref(t, "task")?;
    let d = deref(d, "distances")?;
    let n = t.0.n();
    if d.0.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "task over {n} nodes, distances over {}",
            d.0.n()
        ))
        .into());
    }
    let x = if x.is_null() {
        Matrix::zeros(n, 1)
    } else {
        Matrix::from_vec(n, 1, slice(x, n, "x")?.to_vec())?
    };
    Ok(match &t.0 {
        TaskTarget::Linear(task) => node_range(&task.jacobian(), &d.0, normalized)?,
        TaskTarget::PairwiseNode(s) => node_range(&pairwise_node_task(s, &x)?.1, &d.0, normalized)?,
        TaskTarget::PairwiseGraph(s) => {
            hessian_node_range(&pairwise_graph_task(s, &x)?.1, &d.0, normalized)?
        }
    })
}

/// Node ranges of a task at input `x` (`n` values, or NULL for zeros; linear
/// tasks ignore it). `node_ranges` receives `n` values; `graph_range` and
/// `degenerate_count` may be NULL.
///
/// # Safety
/// Handles must be live; `x` is NULL or holds `n` values; `node_ranges` has
/// room for `len >= n` values.
#[no_mangle]
pub unsafe extern "C" fn lr_task_range(
    t: *const LrTask,
    d: *const LrDistances,
    x: *const f64,
    normalized: bool,
    node_ranges: *mut f64,
    len: usize,
    graph_range: *mut f64,
    degenerate_count: *mut usize,
) -> LrStatus {
    guard(|| {
        let r = report(t, d, x, normalized)?;
        let n = r.node_ranges.len();
        if len < n {
            return Err(Failure(
                LrStatus::InvalidSize,
                format!("buffer holds {len} values, need {n}"),
            ));
        }
        if n > 0 {
            if node_ranges.is_null() {
                return Err(null("node_ranges"));
            }
            std::slice::from_raw_parts_mut(node_ranges, n).copy_from_slice(&r.node_ranges);
        }
        if let Some(g) = graph_range.as_mut() {
            *g = r.graph_range;
        }
        if let Some(c) = degenerate_count.as_mut() {
            *c = r.degenerate_count;
        }
        Ok(())
    })
}

/// Range report as a JSON string, released with [`lr_string_free`].
///
/// # Safety
/// Handles must be live; `x` is NULL or holds `n` values; `json` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lr_task_range_json(
    t: *const LrTask,
    d: *const LrDistances,
    x: *const f64,
    normalized: bool,
    json: *mut *mut c_char,
) -> LrStatus {
    guard(|| {
        let r = report(t, d, x, normalized)?;
        if json.is_null() {
            return Err(null("json"));
        }
        *json = CString::new(r.to_json())
            .map_err(|e| Failure(LrStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Expected normalized SPD range of the node-level squared-difference task
/// at node `u` under Gaussian inputs.
///
/// # Safety
/// `g` must be a live graph handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_analytic_node_range(
    g: *const LrGraph,
    u: usize,
    k: usize,
    value: *mut f64,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        *value.as_mut().ok_or_else(|| null("value"))? = analytic_node_range(&g.0, u, k)?;
        Ok(())
    })
}

/// Normalized SPD range of the pooled squared-difference task at node `u`.
///
/// # Safety
/// `g` must be a live graph handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lr_analytic_graph_range(
    g: *const LrGraph,
    u: usize,
    k: usize,
    value: *mut f64,
) -> LrStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        *value.as_mut().ok_or_else(|| null("value"))? = analytic_graph_range(&g.0, u, k)?;
        Ok(())
    })
}
