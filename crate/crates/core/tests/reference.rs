//! Frozen reference instance: every value below was computed independently
//! with numpy (double precision) on the same hand-written inputs, then
//! pinned here. Guards the loss terms, the analytic gradients, and the
//! discrete code update against silent algebra changes.

use dsah_core::dataio::{build_batch_graph, build_dual_labels, Dataset};
use dsah_core::numerics::Matrix;
use dsah_core::objective::{grad_u, grad_v, loss_p, loss_q, loss_r, RegressionPair};
use dsah_core::trainer::{quantization_accumulator, update_h};

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() < TOL, "{what}: {a} vs reference {b}");
}

fn close_matrix(a: &Matrix, b: &[f64], what: &str) {
    assert_eq!(a.as_slice().len(), b.len(), "{what} shape");
    for (i, (&got, &want)) in a.as_slice().iter().zip(b).enumerate() {
        assert!(
            (got - want).abs() < TOL,
            "{what}[{i}]: {got} vs reference {want}"
        );
    }
}

#[test]
fn matches_independent_double_precision_reference() {
    let labels = vec![vec![0], vec![1], vec![0], vec![1]];
    let ds = Dataset::new(Matrix::zeros(4, 2), labels, 2).unwrap();
    let duals = build_dual_labels(&ds, 2.0, 0.5).unwrap();
    let graph = build_batch_graph(&ds, &[0, 1, 2]).unwrap();

    let u = Matrix::from_vec(3, 2, vec![0.2, -0.4, 0.1, 0.3, -0.5, 0.6]).unwrap();
    let v = Matrix::from_vec(3, 2, vec![-0.1, 0.25, 0.45, -0.2, 0.3, -0.35]).unwrap();
    let h = Matrix::from_vec(4, 2, vec![1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0]).unwrap();
    let reg = RegressionPair {
        m1: Matrix::from_vec(2, 2, vec![0.3, -0.2, 0.15, 0.45]).unwrap(),
        m2: Matrix::from_vec(2, 2, vec![-0.25, 0.1, 0.2, -0.3]).unwrap(),
    };
    let (a1, a2) = (0.7, 1.3);

    let (r_intra, r_inter) = loss_r(&h, &duals, &reg).unwrap();
    close(r_intra, 16.220000000000002, "r_intra");
    close(r_inter, 3.3025, "r_inter");

    close(loss_p(&u, &v, &graph).unwrap(), 2.7225, "p");
    close(loss_q(&h, &u, &v, &graph).unwrap(), 14.454304113904302, "q");

    let gu = grad_u(&u, &v, &h, &graph, a1, a2).unwrap();
    close_matrix(
        &gu,
        &[
            -1.7255277227785342,
            -1.825257578975846,
            2.340734952765129,
            1.3931364416618908,
            -4.669684681510075,
            2.8135965761355366,
        ],
        "grad_u",
    );
    let gv = grad_v(&u, &v, &h, &graph, a1, a2).unwrap();
    close_matrix(
        &gv,
        &[
            -2.6907349527651285,
            1.0185906664641358,
            3.528887098920767,
            -1.193184032933369,
            -0.4262196590873455,
            -2.0356193997795544,
        ],
        "grad_v",
    );

    // one-batch epoch: the accumulator is this batch's contribution
    let acc = quantization_accumulator(&graph, &u, &v).unwrap();
    let mut scores = acc.scale(a2);
    scores
        .add_assign(&duals.y.matmul(&reg.m1).unwrap().scale(duals.beta1.sqrt()))
        .unwrap();
    scores
        .add_assign(&duals.r.matmul(&reg.m2).unwrap().scale(-duals.beta2.sqrt()))
        .unwrap();
    close_matrix(
        &scores,
        &[
            0.45248680751449416,
            -0.20733158017337838,
            0.7640185499187264,
            0.9110592399473466,
            0.45248680751449416,
            -0.20733158017337838,
            0.7640185499187264,
            0.9110592399473466,
        ],
        "h scores",
    );

    let h_new = update_h(&acc, &duals, &reg, a2, true).unwrap();
    let expected = [-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
    assert_eq!(h_new.as_slice(), &expected);
}
