use std::ffi::{CStr, CString};
use std::ptr;

use sipsgraph_ffi::*;

fn last_error() -> String {
    let p = sg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tree(b: usize, d: usize) -> *mut SgGraph {
    let mut g = ptr::null_mut();
    assert_eq!(sg_graph_generate_tree(b, d, &mut g), SgStatus::Ok);
    g
}

#[test]
fn tree_counts() {
    let g = tree(2, 2);
    let (mut n, mut m) = (0, 0);
    unsafe {
        assert_eq!(sg_graph_node_count(g, &mut n), SgStatus::Ok);
        assert_eq!(sg_graph_edge_count(g, &mut m), SgStatus::Ok);
        sg_graph_free(g);
    }
    assert_eq!((n, m), (7, 10));
}

#[test]
fn invalid_spec_sets_message() {
    let mut g = ptr::null_mut();
    assert_eq!(sg_graph_generate_tree(1, 3, &mut g), SgStatus::Config);
    assert!(g.is_null());
    assert!(last_error().contains("branching"), "{}", last_error());
}

#[test]
fn null_pointers_are_reported() {
    let mut n = 0;
    assert_eq!(unsafe { sg_graph_node_count(ptr::null(), &mut n) }, SgStatus::NullPointer);
    assert!(last_error().contains("graph"));
    assert_eq!(sg_graph_generate_tree(2, 2, ptr::null_mut()), SgStatus::NullPointer);
    unsafe {
        sg_graph_free(ptr::null_mut());
        sg_model_free(ptr::null_mut());
    }
}

#[test]
fn kernel_values() {
    let a = [0.5, 0.5];
    let o = [0.0, 0.0];
    let mut v = 0.0;
    unsafe {
        assert_eq!(sg_kernel_eval(SgKernel::NegPoincare, a.as_ptr(), o.as_ptr(), 2, &mut v), SgStatus::Ok);
        assert!((v + 1.762_747_174_039_086).abs() < 1e-12);
        assert_eq!(sg_kernel_eval(SgKernel::Nsd, a.as_ptr(), o.as_ptr(), 2, &mut v), SgStatus::Ok);
        assert_eq!(v, -0.5);
        let out = [1.0, 0.0];
        assert_eq!(sg_kernel_eval(SgKernel::NegPoincare, out.as_ptr(), o.as_ptr(), 2, &mut v), SgStatus::InvalidInput);
    }
}

#[test]
fn auc_values() {
    let s = [0.9, 0.1, 0.5, 0.5];
    let l = [1u8, 0, 1, 0];
    let mut a = 0.0;
    unsafe {
        assert_eq!(sg_auc(s.as_ptr(), l.as_ptr(), 4, &mut a), SgStatus::Ok);
        assert_eq!(a, 0.875);
        let l = [1u8; 4];
        assert_eq!(sg_auc(s.as_ptr(), l.as_ptr(), 4, &mut a), SgStatus::UndefinedMetric);
    }
}

#[test]
fn train_score_save_load() {
    let g = tree(2, 3);
    let mut opts = sg_train_options_default();
    opts.iterations = 200;
    opts.checkpoint_every = 100;
    opts.seed = 3;
    let mut model = ptr::null_mut();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(sg_train(g, &opts, &mut model), SgStatus::Ok);
        let mut k = 0;
        assert_eq!(sg_model_dim(model, &mut k), SgStatus::Ok);
        assert_eq!(k, 5);
        let mut emb = vec![0.0; k];
        assert_eq!(sg_model_embedding(model, g, 1, emb.as_mut_ptr(), k), SgStatus::Ok);
        assert_eq!(sg_model_embedding(model, g, 1, emb.as_mut_ptr(), k - 1), SgStatus::InvalidInput);
        let mut s = 0.0;
        assert_eq!(sg_model_score(model, g, 0, 1, &mut s), SgStatus::Ok);
        assert_eq!(sg_model_score(model, g, 0, 99, &mut s), SgStatus::InvalidInput);
        let mut a = 0.0;
        assert_eq!(sg_reconstruction_auc(model, g, 1, &mut a), SgStatus::Ok);
        assert!((0.0..=1.0).contains(&a));

        assert_eq!(sg_model_save(model, path.as_ptr()), SgStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sg_model_load(path.as_ptr(), &mut back), SgStatus::Ok);
        let mut s2 = 0.0;
        assert_eq!(sg_model_score(back, g, 0, 1, &mut s2), SgStatus::Ok);
        assert_eq!(s, s2);
        sg_model_free(back);
        sg_model_free(model);
        sg_graph_free(g);
    }
}

#[test]
fn graph_file_round_trip() {
    let g = tree(3, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("g.txt").to_str().unwrap()).unwrap();
    let missing = CString::new(dir.path().join("none.txt").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(sg_graph_save(g, path.as_ptr()), SgStatus::Ok);
        let mut h = ptr::null_mut();
        assert_eq!(sg_graph_load(path.as_ptr(), &mut h), SgStatus::Ok);
        let mut m = 0;
        sg_graph_edge_count(h, &mut m);
        assert_eq!(m, 21);
        assert_eq!(sg_graph_load(missing.as_ptr(), &mut h), SgStatus::Io);
        sg_graph_free(g);
    }
}
