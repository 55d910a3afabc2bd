//! C interface: opaque graph and model handles, integer status codes and a
//! per-thread last-error message.
//!
//! Every fallible function returns an [`SgStatus`] and writes its result
//! through an out-pointer. Handles are released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sipsgraph::eval::{auc, reconstruction_auc, ScoredPairs};
use sipsgraph::generator::{generate, GeneratorKind, GeneratorSpec};
use sipsgraph::kernels::{eval_kernel, Kernel};
use sipsgraph::training::{train, TrainConfig, Validation};
use sipsgraph::{checkpoint, EncoderSpec, Error, Graph, HeadKind, Model, ModelSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Numerical = 4,
    UndefinedMetric = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgHead {
    Ips = 0,
    Sips = 1,
    Csips = 2,
    Ipds = 3,
    Nsd = 4,
    Poincare = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgKernel {
    InnerProduct = 0,
    Cosine = 1,
    Nsd = 2,
    NegPoincare = 3,
    /// Points are packed as means followed by variances.
    NegJeffreyGaussian = 4,
}

/// Opaque graph handle.
pub struct SgGraph(Graph);

/// Opaque trained-model handle.
pub struct SgModel(Model);

/// Training knobs for [`sg_train`]; start from [`sg_train_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SgTrainOptions {
    pub head: SgHead,
    pub dim: usize,
    pub num_negatives: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub checkpoint_every: usize,
    pub seed: u64,
    /// Nonzero: select the checkpoint with the best reconstruction AUC.
    pub select_by_reconstruction: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::InvalidInput(_) => SgStatus::InvalidInput,
        Error::Config(_) => SgStatus::Config,
        Error::Numerical(_) => SgStatus::Numerical,
        Error::UndefinedMetric(_) => SgStatus::UndefinedMetric,
        Error::Parse { .. } => SgStatus::Parse,
        Error::Io(_) => SgStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SgStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Lib(Error::InvalidInput("path is not valid UTF-8".into())))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn head_kind(h: SgHead) -> HeadKind {
    match h {
        SgHead::Ips => HeadKind::Ips,
        SgHead::Sips => HeadKind::Sips,
        SgHead::Csips => HeadKind::Csips,
        SgHead::Ipds => HeadKind::Ipds,
        SgHead::Nsd => HeadKind::Nsd,
        SgHead::Poincare => HeadKind::Poincare,
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn emit_graph(spec: GeneratorSpec, out_graph: *mut *mut SgGraph) -> SgStatus {
    guard(|| {
        let slot = unsafe { out(out_graph, "out_graph")? };
        let g = generate(&spec)?;
        *slot = Box::into_raw(Box::new(SgGraph(g)));
        Ok(())
    })
}

/// Transitive closure of a complete `branching`-ary tree of the given depth.
#[no_mangle]
pub extern "C" fn sg_graph_generate_tree(branching: usize, depth: usize, out_graph: *mut *mut SgGraph) -> SgStatus {
    emit_graph(GeneratorSpec::new(GeneratorKind::TreeClosure { branching, depth }, 0), out_graph)
}

/// Planted-partition graph with `clusters` blocks of `nodes` nodes each.
#[no_mangle]
pub extern "C" fn sg_graph_generate_clusters(
    clusters: usize,
    nodes: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
    out_graph: *mut *mut SgGraph,
) -> SgStatus {
    emit_graph(GeneratorSpec::new(GeneratorKind::PlantedClusters { clusters, nodes, p_in, p_out }, seed), out_graph)
}

/// # Safety
/// `path` must be a nul-terminated string; `out_graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_load(path: *const c_char, out_graph: *mut *mut SgGraph) -> SgStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        let g = Graph::load(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(SgGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_save(graph: *const SgGraph, path: *const c_char) -> SgStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        g.0.save(path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_node_count(graph: *const SgGraph, out_n: *mut usize) -> SgStatus {
    guard(|| {
        *out(out_n, "out_n")? = deref(graph, "graph")?.0.n();
        Ok(())
    })
}

/// Number of linked unordered pairs.
///
/// # Safety
/// `graph` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_edge_count(graph: *const SgGraph, out_m: *mut usize) -> SgStatus {
    guard(|| {
        *out(out_m, "out_m")? = deref(graph, "graph")?.0.edge_count();
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_graph_free(graph: *mut SgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Table encoder, SIPS, K = 5, hierarchy-reconstruction settings.
#[no_mangle]
pub extern "C" fn sg_train_options_default() -> SgTrainOptions {
    let c = TrainConfig::wordnet(ModelSpec::new(HeadKind::Sips, 5, EncoderSpec::Table));
    SgTrainOptions {
        head: SgHead::Sips,
        dim: c.model.dim,
        num_negatives: c.num_negatives,
        batch_size: c.batch_size,
        iterations: c.iterations,
        learning_rate: c.learning_rate,
        checkpoint_every: c.checkpoint_every,
        seed: c.seed,
        select_by_reconstruction: 1,
    }
}

/// Trains a table-encoder model on `graph`.
///
/// # Safety
/// `graph` must come from this library; `opts` and `out_model` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_train(
    graph: *const SgGraph,
    opts: *const SgTrainOptions,
    out_model: *mut *mut SgModel,
) -> SgStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let o = *deref(opts, "opts")?;
        let slot = out(out_model, "out_model")?;
        let mut cfg = TrainConfig::wordnet(ModelSpec::new(head_kind(o.head), o.dim, EncoderSpec::Table));
        cfg.num_negatives = o.num_negatives;
        cfg.batch_size = o.batch_size;
        cfg.iterations = o.iterations;
        cfg.learning_rate = o.learning_rate;
        cfg.checkpoint_every = o.checkpoint_every;
        cfg.seed = o.seed;
        let validation = if o.select_by_reconstruction != 0 {
            Validation::Reconstruction { seed: o.seed, exhaustive: false }
        } else {
            Validation::None
        };
        let outcome = train(&g.0, &cfg, &validation)?;
        *slot = Box::into_raw(Box::new(SgModel(outcome.best)));
        Ok(())
    })
}

/// # Safety
/// `path` must be nul-terminated; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_load(path: *const c_char, out_model: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let m = checkpoint::load(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(SgModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_model_save(model: *const SgModel, path: *const c_char) -> SgStatus {
    guard(|| {
        checkpoint::save(&deref(model, "model")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Feature dimension `K`.
///
/// # Safety
/// `model` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_model_dim(model: *const SgModel, out_dim: *mut usize) -> SgStatus {
    guard(|| {
        *out(out_dim, "out_dim")? = deref(model, "model")?.0.dim();
        Ok(())
    })
}

/// Similarity of nodes `i` and `j`.
///
/// # Safety
/// Handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_model_score(
    model: *const SgModel,
    graph: *const SgGraph,
    i: usize,
    j: usize,
    out_score: *mut f64,
) -> SgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let g = deref(graph, "graph")?;
        *out(out_score, "out_score")? = m.0.score(&g.0, i, j)?;
        Ok(())
    })
}

/// Copies node `node`'s feature vector into `buf`, which must hold `len == K` values.
///
/// # Safety
/// Handles must come from this library; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_model_embedding(
    model: *const SgModel,
    graph: *const SgGraph,
    node: usize,
    buf: *mut f64,
    len: usize,
) -> SgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let g = deref(graph, "graph")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let z = m.0.features(&g.0, node)?;
        if z.len() != len {
            return Err(Error::InvalidInput(format!("buffer holds {len} values, embedding has {}", z.len())).into());
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&z);
        Ok(())
    })
}

/// Reconstruction ROC-AUC with 1:1 sampled non-links.
///
/// # Safety
/// Handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_reconstruction_auc(
    model: *const SgModel,
    graph: *const SgGraph,
    seed: u64,
    out_auc: *mut f64,
) -> SgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let g = deref(graph, "graph")?;
        *out(out_auc, "out_auc")? = reconstruction_auc(&g.0, &m.0, seed, false)?;
        Ok(())
    })
}

/// ROC-AUC of `n` scores against labels (nonzero = positive).
///
/// # Safety
/// `scores` and `labels` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn sg_auc(scores: *const f64, labels: *const u8, n: usize, out_auc: *mut f64) -> SgStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        if n > 0 && labels.is_null() {
            return Err(Fail::Null("labels"));
        }
        let l: &[u8] = if n == 0 { &[] } else { std::slice::from_raw_parts(labels, n) };
        let items = s.iter().zip(l).map(|(&v, &b)| (v, b != 0)).collect();
        *out(out_auc, "out_auc")? = auc(&ScoredPairs::new(items))?;
        Ok(())
    })
}

/// Evaluates a kernel on two points of length `len`.
///
/// # Safety
/// `y` and `y2` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_kernel_eval(
    kernel: SgKernel,
    y: *const f64,
    y2: *const f64,
    len: usize,
    out_value: *mut f64,
) -> SgStatus {
    guard(|| {
        let k = match kernel {
            SgKernel::InnerProduct => Kernel::InnerProduct,
            SgKernel::Cosine => Kernel::Cosine,
            SgKernel::Nsd => Kernel::Nsd,
            SgKernel::NegPoincare => Kernel::NegPoincare,
            SgKernel::NegJeffreyGaussian => Kernel::NegJeffreyGaussian,
        };
        *out(out_value, "out_value")? = eval_kernel(&k, slice(y, len, "y")?, slice(y2, len, "y2")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(model: *mut SgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
