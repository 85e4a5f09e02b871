//! Alternating training loop: closed-form regression updates, gradient
//! steps on the encoder(s) driven by injected output-layer gradients, and a
//! discrete balanced update of the code matrix.
//!
//! Each outer iteration updates the regression matrices from the current
//! codes, runs the epoch's batches through the inner network loop, and then
//! rebuilds the code matrix from a score matrix accumulated over the whole
//! epoch (every training sample contributes exactly once because the epoch
//! batches partition the sample set).

use crate::dataio::{
    build_batch_graph, build_dual_labels, sample_epoch_batches, BatchGraph, Dataset, DualLabels,
};
use crate::encoder::{init_params, sgd_step, EncoderParams};
use crate::error::{Error, Result};
use crate::numerics::{spd_inverse, Matrix, SeededRng};
use crate::objective::{grad_u, grad_v, loss_p, loss_q, loss_r, LossBreakdown, RegressionPair};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Ridge added to a singular gram matrix before inversion.
pub const RIDGE_EPSILON: f64 = 1e-8;

/// Whether the two hashing networks keep distinct weights (`Dsah1`) or
/// share one parameter set (`Dsah2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dsah1,
    Dsah2,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "dsah1" => Ok(Mode::Dsah1),
            "dsah2" => Ok(Mode::Dsah2),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected dsah1 or dsah2)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dsah1 => "dsah1",
            Mode::Dsah2 => "dsah2",
        })
    }
}

/// Loss-term ablation switches.
///
/// `A` removes the dual semantic regression entirely, `B` keeps only the
/// membership side, `C` keeps only the absence side, and `D` drops the
/// balance constraint from the code update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    A,
    B,
    C,
    D,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::A,
        Variant::B,
        Variant::C,
        Variant::D,
    ];
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "a" => Ok(Variant::A),
            "b" => Ok(Variant::B),
            "c" => Ok(Variant::C),
            "d" => Ok(Variant::D),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected full, a, b, c, or d)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::A => "A",
            Variant::B => "B",
            Variant::C => "C",
            Variant::D => "D",
        })
    }
}

/// Hyperparameters and run controls for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Code length c.
    pub code_len: usize,
    /// Batch size m.
    pub batch_size: usize,
    /// Outer iterations.
    pub t1: usize,
    /// Inner gradient steps per batch.
    pub t2: usize,
    pub lr: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Hidden layer widths of the encoder; the full layout is
    /// `[d, hidden..., code_len]`.
    pub hidden_dims: Vec<usize>,
    pub mode: Mode,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            code_len: 16,
            batch_size: 64,
            t1: 15,
            t2: 3,
            lr: 1e-3,
            alpha1: 1e-2,
            alpha2: 1e3,
            beta1: 1e2,
            beta2: 10.0,
            hidden_dims: vec![256],
            mode: Mode::Dsah1,
            variant: Variant::Full,
            seed: 7,
        }
    }
}

impl TrainConfig {
    /// Validates the configuration against a dataset of `n` samples.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.code_len == 0 {
            return Err(Error::Config("code length must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.batch_size > n {
            return Err(Error::Config(format!(
                "batch size {} exceeds sample count {n}",
                self.batch_size
            )));
        }
        if self.t1 == 0 || self.t2 == 0 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.variant != Variant::D && !n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "balanced codes need an even sample count, got {n}; drop one sample or use variant d"
            )));
        }
        Ok(())
    }

    /// Encoder layer layout for input dimension `d`.
    pub fn layer_dims(&self, d: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(d);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.code_len);
        dims
    }
}

/// Effective switches after applying the ablation variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantEffects {
    pub beta1: f64,
    pub beta2: f64,
    pub balanced: bool,
    pub update_m1: bool,
    pub update_m2: bool,
}

pub fn apply_variant(config: &TrainConfig) -> VariantEffects {
    match config.variant {
        Variant::Full => VariantEffects {
            beta1: config.beta1,
            beta2: config.beta2,
            balanced: true,
            update_m1: true,
            update_m2: true,
        },
        Variant::A => VariantEffects {
            beta1: 0.0,
            beta2: 0.0,
            balanced: true,
            update_m1: false,
            update_m2: false,
        },
        Variant::B => VariantEffects {
            beta1: config.beta1,
            beta2: 0.0,
            balanced: true,
            update_m1: true,
            update_m2: false,
        },
        Variant::C => VariantEffects {
            beta1: 0.0,
            beta2: config.beta2,
            balanced: true,
            update_m1: false,
            update_m2: true,
        },
        Variant::D => VariantEffects {
            beta1: config.beta1,
            beta2: config.beta2,
            balanced: false,
            update_m1: true,
            update_m2: true,
        },
    }
}

/// Precomputed least-squares projections `(Y^T Y)^-1 Y^T` and
/// `(R^T R)^-1 R^T`, with a ridge fallback when a gram matrix is singular.
#[derive(Debug, Clone)]
pub struct Projections {
    pub y: Matrix,
    pub r: Matrix,
}

fn projection_of(label_matrix: &Matrix) -> Result<Matrix> {
    let gram = label_matrix.transpose().matmul(label_matrix)?;
    let inv = match spd_inverse(&gram) {
        Ok(inv) => inv,
        Err(_) => {
            let k = gram.rows();
            let ridged = gram.add(&Matrix::identity(k).scale(RIDGE_EPSILON))?;
            spd_inverse(&ridged)?
        }
    };
    inv.matmul(&label_matrix.transpose())
}

pub fn precompute_projections(duals: &DualLabels) -> Result<Projections> {
    Ok(Projections {
        y: projection_of(&duals.y)?,
        r: projection_of(&duals.r)?,
    })
}

/// Mutable training state. `theta2` is `None` when the two networks share
/// one parameter set.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub h: Matrix,
    pub reg: RegressionPair,
    theta1: EncoderParams,
    theta2: Option<EncoderParams>,
    pub u_cache: Matrix,
    pub v_cache: Matrix,
    pub history: Vec<LossBreakdown>,
    pub projections: Projections,
}

impl TrainState {
    pub fn theta1(&self) -> &EncoderParams {
        &self.theta1
    }

    /// The second network's parameters; identical to `theta1` under weight
    /// sharing.
    pub fn theta2(&self) -> &EncoderParams {
        self.theta2.as_ref().unwrap_or(&self.theta1)
    }

    pub fn weights_shared(&self) -> bool {
        self.theta2.is_none()
    }
}

/// Random column-balanced sign matrix: per column, a random permutation
/// assigns +1 to the first floor(n/2) rows.
fn random_balanced_codes(n: usize, c: usize, rng: &mut SeededRng) -> Matrix {
    let mut h = Matrix::zeros(n, c);
    let half = n / 2;
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..c {
        rng.shuffle(&mut perm);
        for (pos, &i) in perm.iter().enumerate() {
            h.set(i, j, if pos < half { 1.0 } else { -1.0 });
        }
    }
    h
}

fn init_state_with_rng(
    dataset: &Dataset,
    config: &TrainConfig,
    duals: &DualLabels,
    rng: &mut SeededRng,
) -> Result<TrainState> {
    let n = dataset.n();
    let h = random_balanced_codes(n, config.code_len, rng);
    let dims = config.layer_dims(dataset.d());
    let theta1 = init_params(&dims, rng)?;
    let theta2 = match config.mode {
        Mode::Dsah1 => Some(init_params(&dims, rng)?),
        Mode::Dsah2 => None,
    };
    let projections = precompute_projections(duals)?;
    Ok(TrainState {
        h,
        reg: RegressionPair::zeros(dataset.k(), config.code_len),
        theta1,
        theta2,
        u_cache: Matrix::zeros(0, config.code_len),
        v_cache: Matrix::zeros(0, config.code_len),
        history: Vec::new(),
        projections,
    })
}

/// Fresh training state: balanced random codes, initialized encoder(s),
/// zero regression matrices, and the precomputed label projections.
pub fn init_state(dataset: &Dataset, config: &TrainConfig) -> Result<TrainState> {
    config.validate(dataset.n())?;
    let effects = apply_variant(config);
    let duals = build_dual_labels(dataset, effects.beta1, effects.beta2)?;
    let mut rng = SeededRng::new(config.seed);
    init_state_with_rng(dataset, config, &duals, &mut rng)
}

/// Closed-form regression update:
/// `M1 = sqrt(beta1) (Y^T Y)^-1 Y^T H`, `M2 = sqrt(beta2) (R^T R)^-1 R^T H`.
pub fn update_m(h: &Matrix, duals: &DualLabels, proj: &Projections) -> Result<RegressionPair> {
    Ok(RegressionPair {
        m1: proj.y.matmul(h)?.scale(duals.beta1.sqrt()),
        m2: proj.r.matmul(h)?.scale(duals.beta2.sqrt()),
    })
}

fn ensure_finite(m: &Matrix, what: &str, context: &str) -> Result<()> {
    if m.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "{what} diverged during {context}; lower the learning rate or alpha2"
        )))
    }
}

/// Runs `t2` inner steps on one batch. Each step refreshes the first
/// network's outputs, injects the objective gradient, updates the first
/// network, then does the same for the second network. Under weight
/// sharing both gradients land on the single parameter set sequentially.
/// With `alpha1 == alpha2 == 0` the objective does not depend on the
/// networks, so only the output caches are refreshed.
pub fn inner_network_update(
    state: &mut TrainState,
    graph: &BatchGraph,
    batch_features: &Matrix,
    config: &TrainConfig,
) -> Result<()> {
    let context = format!("inner update on a batch of {}", batch_features.rows());

    if config.alpha1 == 0.0 && config.alpha2 == 0.0 {
        state.u_cache = state.theta1.forward(batch_features)?.outputs().clone();
        state.v_cache = state.theta2().forward(batch_features)?.outputs().clone();
        return Ok(());
    }

    // start the batch from the second network's current embeddings
    state.v_cache = state.theta2().forward(batch_features)?.outputs().clone();
    ensure_finite(&state.v_cache, "network outputs", &context)?;

    for _ in 0..config.t2 {
        let trace1 = state.theta1.forward(batch_features)?;
        state.u_cache = trace1.outputs().clone();
        ensure_finite(&state.u_cache, "network outputs", &context)?;
        let gu = grad_u(
            &state.u_cache,
            &state.v_cache,
            &state.h,
            graph,
            config.alpha1,
            config.alpha2,
        )?;
        ensure_finite(&gu, "output gradient", &context)?;
        let grads = state.theta1.backward(&trace1, &gu)?;
        sgd_step(&mut state.theta1, &grads, config.lr)?;

        let trace2 = state.theta2().forward(batch_features)?;
        state.v_cache = trace2.outputs().clone();
        ensure_finite(&state.v_cache, "network outputs", &context)?;
        let gv = grad_v(
            &state.u_cache,
            &state.v_cache,
            &state.h,
            graph,
            config.alpha1,
            config.alpha2,
        )?;
        ensure_finite(&gv, "output gradient", &context)?;
        let second = match &state.theta2 {
            Some(t) => t,
            None => &state.theta1,
        };
        let grads = second.backward(&trace2, &gv)?;
        match &mut state.theta2 {
            Some(t) => sgd_step(t, &grads, config.lr)?,
            None => sgd_step(&mut state.theta1, &grads, config.lr)?,
        }
    }
    Ok(())
}

/// One batch's contribution to the epoch score accumulator:
/// `S (tanh(U) + tanh(V))`, an n x c matrix.
pub fn quantization_accumulator(graph: &BatchGraph, u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let summed = u.tanh_elem().add(&v.tanh_elem())?;
    graph.s.matmul(&summed)
}

/// Balanced discrete update: per column, the rows holding the n/2 largest
/// scores become +1 (ties resolved toward smaller row indices), the rest -1.
pub fn balanced_codes_from_scores(scores: &Matrix) -> Result<Matrix> {
    let n = scores.rows();
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "balanced code update needs an even row count, got {n}"
        )));
    }
    let mut h = Matrix::zeros(n, scores.cols());
    for j in 0..scores.cols() {
        for i in 0..n {
            h.set(i, j, -1.0);
        }
        for i in scores.column_topk_indices(j, n / 2)? {
            h.set(i, j, 1.0);
        }
    }
    Ok(h)
}

/// Unconstrained discrete update: elementwise sign with sign(0) = +1.
pub fn sign_codes(scores: &Matrix) -> Matrix {
    scores.map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

/// Rebuilds the code matrix from the epoch score matrix
/// `alpha2 * acc + sqrt(beta1) Y M1 - sqrt(beta2) R M2`.
pub fn update_h(
    acc: &Matrix,
    duals: &DualLabels,
    reg: &RegressionPair,
    alpha2: f64,
    balanced: bool,
) -> Result<Matrix> {
    let mut scores = acc.scale(alpha2);
    scores.add_assign(&duals.y.matmul(&reg.m1)?.scale(duals.beta1.sqrt()))?;
    scores.add_assign(&duals.r.matmul(&reg.m2)?.scale(-duals.beta2.sqrt()))?;
    if balanced {
        balanced_codes_from_scores(&scores)
    } else {
        Ok(sign_codes(&scores))
    }
}

/// Full training run; see [`train_observed`].
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainState> {
    train_observed(dataset, config, |_, _| {})
}

/// Full training run, invoking `observer(iteration, state)` after every
/// outer iteration. Given the same dataset and configuration the result is
/// reproducible bit for bit.
pub fn train_observed(
    dataset: &Dataset,
    config: &TrainConfig,
    mut observer: impl FnMut(usize, &TrainState),
) -> Result<TrainState> {
    let n = dataset.n();
    config.validate(n)?;
    let effects = apply_variant(config);
    let duals = build_dual_labels(dataset, effects.beta1, effects.beta2)?;
    let mut rng = SeededRng::new(config.seed);
    let mut state = init_state_with_rng(dataset, config, &duals, &mut rng)?;

    for iter in 0..config.t1 {
        if effects.update_m1 || effects.update_m2 {
            let pair = update_m(&state.h, &duals, &state.projections)?;
            if effects.update_m1 {
                state.reg.m1 = pair.m1;
            }
            if effects.update_m2 {
                state.reg.m2 = pair.m2;
            }
        }

        let mut acc = Matrix::zeros(n, config.code_len);
        let mut p_sum = 0.0;
        let mut q_sum = 0.0;
        for batch in sample_epoch_batches(n, config.batch_size, &mut rng)? {
            let graph = build_batch_graph(dataset, &batch)?;
            let feats = dataset.batch_features(&batch)?;
            inner_network_update(&mut state, &graph, &feats, config)?;
            p_sum += loss_p(&state.u_cache, &state.v_cache, &graph)?;
            q_sum += loss_q(&state.h, &state.u_cache, &state.v_cache, &graph)?;
            if !(p_sum.is_finite() && q_sum.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "batch losses diverged at iteration {}; lower the learning rate or alpha2",
                    iter + 1
                )));
            }
            acc.add_assign(&quantization_accumulator(
                &graph,
                &state.u_cache,
                &state.v_cache,
            )?)?;
        }

        state.h = update_h(&acc, &duals, &state.reg, config.alpha2, effects.balanced)?;
        let (r_intra, r_inter) = loss_r(&state.h, &duals, &state.reg)?;
        state.history.push(LossBreakdown::new(
            r_intra,
            r_inter,
            p_sum,
            q_sum,
            config.alpha1,
            config.alpha2,
        ));
        observer(iter, &state);
    }
    Ok(state)
}

/// Parses flat `key = value` configuration text. Unknown keys are
/// rejected; omitted keys keep their defaults. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key = value, got {raw:?}",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad =
            |what: &str| Error::Config(format!("line {}: bad {what} value {value:?}", lineno + 1));
        match key {
            "c" | "bits" => cfg.code_len = value.parse().map_err(|_| bad("code length"))?,
            "m" | "batch" => cfg.batch_size = value.parse().map_err(|_| bad("batch size"))?,
            "t1" => cfg.t1 = value.parse().map_err(|_| bad("t1"))?,
            "t2" => cfg.t2 = value.parse().map_err(|_| bad("t2"))?,
            "lr" => cfg.lr = value.parse().map_err(|_| bad("learning rate"))?,
            "alpha1" => cfg.alpha1 = value.parse().map_err(|_| bad("alpha1"))?,
            "alpha2" => cfg.alpha2 = value.parse().map_err(|_| bad("alpha2"))?,
            "beta1" => cfg.beta1 = value.parse().map_err(|_| bad("beta1"))?,
            "beta2" => cfg.beta2 = value.parse().map_err(|_| bad("beta2"))?,
            "hidden" => {
                cfg.hidden_dims = value
                    .split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<usize>()
                            .map_err(|_| bad("hidden widths"))
                    })
                    .collect::<Result<_>>()?;
            }
            "mode" => cfg.mode = value.parse()?,
            "variant" => cfg.variant = value.parse()?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Serializes a configuration in the same `key = value` format accepted by
/// [`parse_config`].
pub fn format_config(cfg: &TrainConfig) -> String {
    let hidden: Vec<String> = cfg.hidden_dims.iter().map(|h| h.to_string()).collect();
    format!(
        "c = {}\nm = {}\nt1 = {}\nt2 = {}\nlr = {}\nalpha1 = {}\nalpha2 = {}\nbeta1 = {}\nbeta2 = {}\nhidden = {}\nmode = {}\nvariant = {}\nseed = {}\n",
        cfg.code_len,
        cfg.batch_size,
        cfg.t1,
        cfg.t2,
        cfg.lr,
        cfg.alpha1,
        cfg.alpha2,
        cfg.beta1,
        cfg.beta2,
        hidden.join(","),
        cfg.mode,
        cfg.variant,
        cfg.seed
    )
}

/// Writes the per-iteration loss history as CSV with header
/// `iter,r_intra,r_inter,p,q,j_total`.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[LossBreakdown]) -> Result<()> {
    let mut out = String::from("iter,r_intra,r_inter,p,q,j_total\n");
    for (i, row) in history.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            row.r_intra,
            row.r_inter,
            row.p,
            row.q,
            row.j_total
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
