//! The training objective: dual semantic regression, the distance-similarity
//! product similarity-preserving term, class structure quantization, and the
//! analytic gradients of the batch terms with respect to the raw network
//! outputs.
//!
//! The full objective is J = (r_intra - r_inter) + alpha1 * P + alpha2 * Q.
//! The inter-class term enters negatively, so J may be negative;
//! [`LossBreakdown`] reports the pieces separately to keep that auditable.
//!
//! The gradients returned by [`grad_u`]/[`grad_v`] are the exact derivatives
//! of the implemented `alpha1 * loss_p + alpha2 * loss_q`: the quantization
//! part carries each indicator column's mass and both parts carry the
//! factor 2 from the squared norms, so central finite differences of the
//! loss functions reproduce them to first order.

use crate::dataio::{BatchGraph, DualLabels};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Intra/inter-class regression matrices, both k x c.
#[derive(Debug, Clone)]
pub struct RegressionPair {
    pub m1: Matrix,
    pub m2: Matrix,
}

impl RegressionPair {
    pub fn zeros(k: usize, c: usize) -> RegressionPair {
        RegressionPair {
            m1: Matrix::zeros(k, c),
            m2: Matrix::zeros(k, c),
        }
    }
}

/// One evaluation of the objective, split into its terms.
/// `j_total = (r_intra - r_inter) + alpha1 * p + alpha2 * q` by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub r_intra: f64,
    pub r_inter: f64,
    pub p: f64,
    pub q: f64,
    pub j_total: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl LossBreakdown {
    pub fn new(r_intra: f64, r_inter: f64, p: f64, q: f64, alpha1: f64, alpha2: f64) -> Self {
        LossBreakdown {
            r_intra,
            r_inter,
            p,
            q,
            j_total: (r_intra - r_inter) + alpha1 * p + alpha2 * q,
            alpha1,
            alpha2,
        }
    }
}

/// Dual semantic regression terms:
/// `r_intra = ||sqrt(beta1) H - Y M1||_F^2`,
/// `r_inter = ||sqrt(beta2) H - R M2||_F^2`.
/// The regression contribution to J is their difference.
pub fn loss_r(h: &Matrix, duals: &DualLabels, reg: &RegressionPair) -> Result<(f64, f64)> {
    let ym1 = duals.y.matmul(&reg.m1)?;
    let rm2 = duals.r.matmul(&reg.m2)?;
    if ym1.rows() != h.rows() || ym1.cols() != h.cols() {
        return Err(Error::dim(
            "loss_r",
            format!(
                "regression target {}x{}, codes {}x{}",
                ym1.rows(),
                ym1.cols(),
                h.rows(),
                h.cols()
            ),
        ));
    }
    let r_intra = h.scale(duals.beta1.sqrt()).sub(&ym1)?.frob_norm_sq();
    let r_inter = h.scale(duals.beta2.sqrt()).sub(&rm2)?.frob_norm_sq();
    Ok((r_intra, r_inter))
}

fn check_batch_dims(op: &'static str, u: &Matrix, v: &Matrix, graph: &BatchGraph) -> Result<()> {
    let m = graph.w.rows();
    if u.rows() != m || v.rows() != m || u.cols() != v.cols() {
        return Err(Error::dim(
            op,
            format!(
                "u {}x{}, v {}x{}, batch size {}",
                u.rows(),
                u.cols(),
                v.rows(),
                v.cols(),
                m
            ),
        ));
    }
    Ok(())
}

/// Distance-similarity product over the batch affinity graph:
/// `sum_ij ||u_i - v_j||^2 * w_ij`, computed through the algebraic identity
/// `tr(U^T D U) + tr(V^T D V) - 2 tr(U^T W V)` (valid for symmetric `w`).
pub fn loss_p(u: &Matrix, v: &Matrix, graph: &BatchGraph) -> Result<f64> {
    check_batch_dims("loss_p", u, v, graph)?;
    let m = graph.w.rows();
    let mut quad = 0.0;
    for i in 0..m {
        let du = graph.degrees[i];
        let ui = u.row(i);
        let vi = v.row(i);
        quad +=
            du * (ui.iter().map(|x| x * x).sum::<f64>() + vi.iter().map(|x| x * x).sum::<f64>());
    }
    let wv = graph.w.matmul(v)?;
    let mut cross = 0.0;
    for i in 0..m {
        cross += u
            .row(i)
            .iter()
            .zip(wv.row(i))
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    Ok(quad - 2.0 * cross)
}

/// Class structure quantization:
/// `sum_ij s_ij * (||h_i - tanh(u_j)||^2 + ||h_i - tanh(v_j)||^2)`,
/// where `s` already carries the per-sample balance weight.
pub fn loss_q(h: &Matrix, u: &Matrix, v: &Matrix, graph: &BatchGraph) -> Result<f64> {
    check_batch_dims("loss_q", u, v, graph)?;
    if h.rows() != graph.s.rows() || h.cols() != u.cols() {
        return Err(Error::dim(
            "loss_q",
            format!(
                "codes {}x{}, indicator rows {}, embedding width {}",
                h.rows(),
                h.cols(),
                graph.s.rows(),
                u.cols()
            ),
        ));
    }
    let tu = u.tanh_elem();
    let tv = v.tanh_elem();
    let (n, m) = (graph.s.rows(), graph.s.cols());
    let mut total = 0.0;
    for i in 0..n {
        let hi = h.row(i);
        for j in 0..m {
            let sij = graph.s.get(i, j);
            if sij == 0.0 {
                continue;
            }
            let mut du = 0.0;
            let mut dv = 0.0;
            for (c, &hc) in hi.iter().enumerate() {
                let eu = hc - tu.get(j, c);
                let ev = hc - tv.get(j, c);
                du += eu * eu;
                dv += ev * ev;
            }
            total += sij * (du + dv);
        }
    }
    Ok(total)
}

/// One-to-one quantization baseline: `sum_i ||h_i - u_i||^2` over a batch.
pub fn loss_one_to_one(h_batch: &Matrix, u: &Matrix) -> Result<f64> {
    if h_batch.rows() != u.rows() || h_batch.cols() != u.cols() {
        return Err(Error::dim(
            "loss_one_to_one",
            format!(
                "{}x{} vs {}x{}",
                h_batch.rows(),
                h_batch.cols(),
                u.rows(),
                u.cols()
            ),
        ));
    }
    Ok(h_batch.sub(u)?.frob_norm_sq())
}

/// Shared form of the two output-layer gradients. For the first network's
/// outputs: `2*alpha1*(D u - W other)` plus the quantization pull
/// `2*alpha2*(colmass_j * tanh(u_j) - (S^T H)_j) (x) (1 - tanh(u_j)^2)`.
fn grad_embedding(
    own: &Matrix,
    other: &Matrix,
    h: &Matrix,
    graph: &BatchGraph,
    alpha1: f64,
    alpha2: f64,
) -> Result<Matrix> {
    check_batch_dims("grad", own, other, graph)?;
    if h.rows() != graph.s.rows() || h.cols() != own.cols() {
        return Err(Error::dim(
            "grad",
            format!(
                "codes {}x{}, indicator rows {}, embedding width {}",
                h.rows(),
                h.cols(),
                graph.s.rows(),
                own.cols()
            ),
        ));
    }
    let (m, c) = (own.rows(), own.cols());
    let mut grad = Matrix::zeros(m, c);

    if alpha1 != 0.0 {
        let w_other = graph.w.matmul(other)?;
        for i in 0..m {
            let d = graph.degrees[i];
            for j in 0..c {
                grad.set(i, j, 2.0 * alpha1 * (d * own.get(i, j) - w_other.get(i, j)));
            }
        }
    }

    if alpha2 != 0.0 {
        let st_h = graph.s.transpose().matmul(h)?;
        let t = own.tanh_elem();
        for i in 0..m {
            let mass = graph.s_col_mass[i];
            for j in 0..c {
                let tij = t.get(i, j);
                let pull = 2.0 * alpha2 * (mass * tij - st_h.get(i, j)) * (1.0 - tij * tij);
                grad.set(i, j, grad.get(i, j) + pull);
            }
        }
    }

    Ok(grad)
}

/// Gradient of `alpha1 * loss_p + alpha2 * loss_q` with respect to the first
/// network's raw batch outputs `u`.
pub fn grad_u(
    u: &Matrix,
    v: &Matrix,
    h: &Matrix,
    graph: &BatchGraph,
    alpha1: f64,
    alpha2: f64,
) -> Result<Matrix> {
    grad_embedding(u, v, h, graph, alpha1, alpha2)
}

/// Gradient of `alpha1 * loss_p + alpha2 * loss_q` with respect to the second
/// network's raw batch outputs `v`.
pub fn grad_v(
    u: &Matrix,
    v: &Matrix,
    h: &Matrix,
    graph: &BatchGraph,
    alpha1: f64,
    alpha2: f64,
) -> Result<Matrix> {
    grad_embedding(v, u, h, graph, alpha1, alpha2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{build_batch_graph, build_dual_labels, Dataset};
    use crate::numerics::SeededRng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    fn sign_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| if rng.next_f64() < 0.5 { -1.0 } else { 1.0 })
                .collect(),
        )
        .unwrap()
    }

    /// Random single-label dataset plus a batch graph over its first `m` samples.
    fn random_instance(
        n: usize,
        m: usize,
        classes: usize,
        rng: &mut SeededRng,
    ) -> (Dataset, BatchGraph) {
        let labels: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.gen_index(classes)]).collect();
        let features = random_matrix(n, 3, rng);
        let ds = Dataset::new(features, labels, classes).unwrap();
        let batch: Vec<usize> = (0..m).collect();
        let graph = build_batch_graph(&ds, &batch).unwrap();
        (ds, graph)
    }

    /// Literal double-loop oracle for the similarity-preserving term.
    fn loss_p_oracle(u: &Matrix, v: &Matrix, graph: &BatchGraph) -> f64 {
        let m = graph.w.rows();
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                let wij = graph.w.get(i, j);
                if wij == 0.0 {
                    continue;
                }
                let dist: f64 = u
                    .row(i)
                    .iter()
                    .zip(v.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                total += dist * wij;
            }
        }
        total
    }

    /// Literal loop oracle for the quantization term.
    fn loss_q_oracle(h: &Matrix, u: &Matrix, v: &Matrix, graph: &BatchGraph) -> f64 {
        let tu = u.tanh_elem();
        let tv = v.tanh_elem();
        let mut total = 0.0;
        for i in 0..graph.s.rows() {
            for j in 0..graph.s.cols() {
                let sij = graph.s.get(i, j);
                let du: f64 = h
                    .row(i)
                    .iter()
                    .zip(tu.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let dv: f64 = h
                    .row(i)
                    .iter()
                    .zip(tv.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                total += sij * (du + dv);
            }
        }
        total
    }

    #[test]
    fn loss_r_perfect_fit_and_zero() {
        // one-hot labels, M1 chosen so Y*M1 reproduces sqrt(beta1)*H
        let ds = Dataset::new(Matrix::zeros(2, 2), vec![vec![0], vec![1]], 2).unwrap();
        let duals = build_dual_labels(&ds, 4.0, 9.0).unwrap();
        let h = Matrix::from_vec(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        // Y = 2*I, want Y*M1 = 2*H, so M1 = H
        let reg = RegressionPair {
            m1: h.clone(),
            m2: Matrix::zeros(2, 2),
        };
        let (ri, re) = loss_r(&h, &duals, &reg).unwrap();
        assert!(ri.abs() < 1e-12);
        // r_inter = ||3H - R*0||^2 = 9 * 4 entries
        assert!((re - 36.0).abs() < 1e-12);

        let duals0 = build_dual_labels(&ds, 0.0, 0.0).unwrap();
        let reg0 = RegressionPair::zeros(2, 2);
        let (ri, re) = loss_r(&h, &duals0, &reg0).unwrap();
        assert_eq!((ri, re), (0.0, 0.0));
    }

    #[test]
    fn loss_r_matches_elementwise_oracle() {
        let mut rng = SeededRng::new(21);
        let ds = Dataset::new(Matrix::zeros(2, 2), vec![vec![0], vec![1]], 2).unwrap();
        let duals = build_dual_labels(&ds, 2.0, 3.0).unwrap();
        let h = sign_matrix(2, 2, &mut rng);
        let reg = RegressionPair {
            m1: random_matrix(2, 2, &mut rng),
            m2: random_matrix(2, 2, &mut rng),
        };
        let (ri, re) = loss_r(&h, &duals, &reg).unwrap();

        let mut ri_oracle = 0.0;
        let mut re_oracle = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let ym = (0..2)
                    .map(|t| duals.y.get(i, t) * reg.m1.get(t, j))
                    .sum::<f64>();
                let rm = (0..2)
                    .map(|t| duals.r.get(i, t) * reg.m2.get(t, j))
                    .sum::<f64>();
                ri_oracle += (2.0f64.sqrt() * h.get(i, j) - ym).powi(2);
                re_oracle += (3.0f64.sqrt() * h.get(i, j) - rm).powi(2);
            }
        }
        assert!((ri - ri_oracle).abs() < 1e-12);
        assert!((re - re_oracle).abs() < 1e-12);
    }

    #[test]
    fn loss_p_zero_when_embeddings_agree() {
        let mut rng = SeededRng::new(22);
        // distinct classes give a diagonal-only affinity graph
        let ds = Dataset::new(
            random_matrix(3, 3, &mut rng),
            vec![vec![0], vec![1], vec![2]],
            3,
        )
        .unwrap();
        let graph = build_batch_graph(&ds, &[0, 1, 2]).unwrap();
        let u = random_matrix(3, 2, &mut rng);
        let p = loss_p(&u, &u, &graph).unwrap();
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn loss_p_hand_pair() {
        // two samples, same class: w = ones(2x2)
        let ds = Dataset::new(Matrix::zeros(2, 2), vec![vec![0], vec![0]], 1).unwrap();
        let graph = build_batch_graph(&ds, &[0, 1]).unwrap();
        let u = Matrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let v = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        // pairs: (u0,v0)=0, (u0,v1)=2, (u1,v0)=0, (u1,v1)=2
        let p = loss_p(&u, &v, &graph).unwrap();
        assert!((p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn loss_p_matches_double_loop_oracle() {
        let mut rng = SeededRng::new(23);
        let (_, graph) = random_instance(10, 6, 3, &mut rng);
        let u = random_matrix(6, 4, &mut rng);
        let v = random_matrix(6, 4, &mut rng);
        let fast = loss_p(&u, &v, &graph).unwrap();
        let slow = loss_p_oracle(&u, &v, &graph);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        // symmetric graph makes the term symmetric in (u, v)
        let swapped = loss_p(&v, &u, &graph).unwrap();
        assert!((fast - swapped).abs() < 1e-10);
        assert!(fast >= -1e-12);
    }

    #[test]
    fn loss_q_saturation_and_empty() {
        let mut rng = SeededRng::new(24);
        let (_, graph) = random_instance(5, 3, 2, &mut rng);
        let h = Matrix::from_vec(5, 2, vec![1.0; 10]).unwrap();
        let huge = Matrix::from_vec(3, 2, vec![40.0; 6]).unwrap();
        let q = loss_q(&h, &huge, &huge, &graph).unwrap();
        assert!(q < 1e-12, "saturated outputs should cost ~0, got {q}");

        // zero indicator: no class structure
        let mut zero_graph = graph.clone();
        zero_graph.s = Matrix::zeros(5, 3);
        zero_graph.s_col_mass = vec![0.0; 3];
        let u = random_matrix(3, 2, &mut rng);
        let q = loss_q(&h, &u, &u, &zero_graph).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn loss_q_matches_loop_oracle() {
        let mut rng = SeededRng::new(25);
        let (_, graph) = random_instance(3, 3, 2, &mut rng);
        let h = sign_matrix(3, 2, &mut rng);
        let u = random_matrix(3, 2, &mut rng);
        let v = random_matrix(3, 2, &mut rng);
        let fast = loss_q(&h, &u, &v, &graph).unwrap();
        let slow = loss_q_oracle(&h, &u, &v, &graph);
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn loss_one_to_one_cases() {
        let h = Matrix::from_vec(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(loss_one_to_one(&h, &h).unwrap(), 0.0);

        let h1 = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let u0 = Matrix::zeros(1, 1);
        assert_eq!(loss_one_to_one(&h1, &u0).unwrap(), 1.0);

        let mut rng = SeededRng::new(26);
        let u = random_matrix(2, 2, &mut rng);
        let direct = loss_one_to_one(&h, &u).unwrap();
        let mut oracle = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                oracle += (h.get(i, j) - u.get(i, j)).powi(2);
            }
        }
        assert!((direct - oracle).abs() < 1e-12);
        assert!(loss_one_to_one(&h, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn grad_zero_at_origin_with_empty_graph() {
        let graph = BatchGraph {
            batch_indices: vec![0, 1],
            w: Matrix::zeros(2, 2),
            degrees: vec![0.0, 0.0],
            s: Matrix::zeros(3, 2),
            s_col_mass: vec![0.0, 0.0],
            kappa_sizes: vec![1, 1, 1],
        };
        let u = Matrix::zeros(2, 2);
        let v = Matrix::zeros(2, 2);
        let h = Matrix::zeros(3, 2);
        let g = grad_u(&u, &v, &h, &graph, 1.0, 1.0).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        let g = grad_v(&u, &v, &h, &graph, 1.0, 1.0).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    /// Central finite differences of `alpha1 * loss_p + alpha2 * loss_q`
    /// with respect to each entry of `u` (or `v` when `wrt_v`).
    fn fd_grad(
        u: &Matrix,
        v: &Matrix,
        h: &Matrix,
        graph: &BatchGraph,
        alpha1: f64,
        alpha2: f64,
        wrt_v: bool,
    ) -> Matrix {
        let step = 1e-5;
        let objective = |u: &Matrix, v: &Matrix| -> f64 {
            alpha1 * loss_p(u, v, graph).unwrap() + alpha2 * loss_q(h, u, v, graph).unwrap()
        };
        let base = if wrt_v { v.clone() } else { u.clone() };
        let mut out = Matrix::zeros(base.rows(), base.cols());
        for i in 0..base.rows() {
            for j in 0..base.cols() {
                let mut plus = base.clone();
                plus.set(i, j, base.get(i, j) + step);
                let mut minus = base.clone();
                minus.set(i, j, base.get(i, j) - step);
                let (fp, fm) = if wrt_v {
                    (objective(u, &plus), objective(u, &minus))
                } else {
                    (objective(&plus, v), objective(&minus, v))
                };
                out.set(i, j, (fp - fm) / (2.0 * step));
            }
        }
        out
    }

    fn max_rel_err(a: &Matrix, b: &Matrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let (x, y) = (a.get(i, j), b.get(i, j));
                let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn grad_u_similarity_term_alone_matches_fd() {
        let mut rng = SeededRng::new(27);
        let (_, graph) = random_instance(8, 5, 2, &mut rng);
        let u = random_matrix(5, 3, &mut rng);
        let v = random_matrix(5, 3, &mut rng);
        let h = sign_matrix(8, 3, &mut rng);
        let analytic = grad_u(&u, &v, &h, &graph, 1.0, 0.0).unwrap();
        let fd = fd_grad(&u, &v, &h, &graph, 1.0, 0.0, false);
        assert!(max_rel_err(&analytic, &fd) < 1e-4);
    }

    #[test]
    fn grad_full_objective_matches_fd_on_alpha_grid() {
        let mut rng = SeededRng::new(28);
        for &(a1, a2) in &[(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)] {
            let (_, graph) = random_instance(7, 4, 2, &mut rng);
            let u = random_matrix(4, 3, &mut rng);
            let v = random_matrix(4, 3, &mut rng);
            let h = sign_matrix(7, 3, &mut rng);
            let gu = grad_u(&u, &v, &h, &graph, a1, a2).unwrap();
            let gv = grad_v(&u, &v, &h, &graph, a1, a2).unwrap();
            let fu = fd_grad(&u, &v, &h, &graph, a1, a2, false);
            let fv = fd_grad(&u, &v, &h, &graph, a1, a2, true);
            assert!(
                max_rel_err(&gu, &fu) < 1e-4,
                "grad_u mismatch at alpha=({a1},{a2})"
            );
            assert!(
                max_rel_err(&gv, &fv) < 1e-4,
                "grad_v mismatch at alpha=({a1},{a2})"
            );
        }
    }

    #[test]
    fn loss_q_descends_along_negative_gradient() {
        let mut rng = SeededRng::new(30);
        for _ in 0..5 {
            let (_, graph) = random_instance(8, 5, 2, &mut rng);
            let h = sign_matrix(8, 3, &mut rng);
            let u = random_matrix(5, 3, &mut rng);
            let v = random_matrix(5, 3, &mut rng);
            let before = loss_q(&h, &u, &v, &graph).unwrap();
            let g = grad_u(&u, &v, &h, &graph, 0.0, 1.0).unwrap();
            let step = 1e-3 / g.max_abs().max(1e-12);
            let u_next = u.sub(&g.scale(step)).unwrap();
            let after = loss_q(&h, &u_next, &v, &graph).unwrap();
            assert!(
                after <= before,
                "loss rose along -grad: {before} -> {after}"
            );
        }
    }

    #[test]
    fn loss_breakdown_recomposes() {
        let mut rng = SeededRng::new(29);
        for _ in 0..20 {
            let b = LossBreakdown::new(
                rng.uniform(0.0, 10.0),
                rng.uniform(0.0, 10.0),
                rng.uniform(0.0, 5.0),
                rng.uniform(0.0, 5.0),
                rng.uniform(0.0, 2.0),
                rng.uniform(0.0, 2.0),
            );
            let recomposed = (b.r_intra - b.r_inter) + b.alpha1 * b.p + b.alpha2 * b.q;
            assert!((b.j_total - recomposed).abs() < 1e-10);
        }
    }
}
