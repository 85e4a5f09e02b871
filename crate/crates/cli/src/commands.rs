//! Implementations of the CLI subcommands.

use crate::manifest::Manifest;
use crate::{AblateArgs, EncodeArgs, EvalArgs, SynthArgs, TrainArgs};
use anyhow::{Context, Result};
use dsah_core::dataio::{
    load_dataset, make_synthetic_clusters, read_features, read_labels, stratified_split,
    write_features_csv, write_labels_csv, Dataset,
};
use dsah_core::encoder::{load_checkpoint, save_checkpoint};
use dsah_core::numerics::SeededRng;
use dsah_core::retrieval::{
    evaluate, read_codes, write_codes_packed, write_codes_text, write_metrics_csv,
    write_pr_curve_csv, CodeDatabase, MetricsReport,
};
use dsah_core::trainer::{
    load_config, train_observed, write_history_csv, Mode, TrainConfig, Variant,
};
use dsah_core::Error;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Worker-thread cap: `DSAH_THREADS` when set, otherwise the machine
/// parallelism.
fn worker_threads() -> Result<usize> {
    match std::env::var("DSAH_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "DSAH_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if n == 0 {
                return Err(Error::Config("DSAH_THREADS must be at least 1".into()).into());
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn resolve_config(
    config: Option<&Path>,
    seed: Option<u64>,
    bits: Option<usize>,
    mode: Option<&str>,
    variant: Option<&str>,
) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(path) => load_config(path).with_context(|| format!("reading {}", path.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(bits) = bits {
        cfg.code_len = bits;
    }
    if let Some(mode) = mode {
        cfg.mode = mode.parse::<Mode>()?;
    }
    if let Some(variant) = variant {
        cfg.variant = variant.parse::<Variant>()?;
    }
    Ok(cfg)
}

fn record_config(manifest: &mut Manifest, cfg: &TrainConfig) {
    manifest.set("config.c", cfg.code_len);
    manifest.set("config.m", cfg.batch_size);
    manifest.set("config.t1", cfg.t1);
    manifest.set("config.t2", cfg.t2);
    manifest.set("config.lr", cfg.lr);
    manifest.set("config.alpha1", cfg.alpha1);
    manifest.set("config.alpha2", cfg.alpha2);
    manifest.set("config.beta1", cfg.beta1);
    manifest.set("config.beta2", cfg.beta2);
    let hidden: Vec<String> = cfg.hidden_dims.iter().map(usize::to_string).collect();
    manifest.set("config.hidden", hidden.join(","));
    manifest.set("config.mode", cfg.mode);
    manifest.set("config.variant", cfg.variant);
    manifest.set("config.seed", cfg.seed);
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg = resolve_config(
        args.config.as_deref(),
        args.seed,
        args.bits,
        args.mode.as_deref(),
        args.variant.as_deref(),
    )?;
    let mut manifest = Manifest::new("train", cfg.seed);
    record_config(&mut manifest, &cfg);
    manifest.input("features", &args.features)?;
    manifest.input("labels", &args.labels)?;

    // validate everything before any output is created
    let dataset = load_dataset(&args.features, &args.labels)?;
    cfg.validate(dataset.n()).map_err(anyhow::Error::from)?;
    manifest.phase_done("load");

    let t1 = cfg.t1;
    let state = train_observed(&dataset, &cfg, |iter, state| {
        let last = state.history.last().unwrap();
        eprintln!(
            "iter {}/{}: r_intra={:.4} r_inter={:.4} p={:.4} q={:.4} j={:.4}",
            iter + 1,
            t1,
            last.r_intra,
            last.r_inter,
            last.p,
            last.q,
            last.j_total
        );
    })?;
    manifest.phase_done("train");

    std::fs::create_dir_all(&args.out)?;
    let checkpoint = args.out.join("checkpoint.bin");
    save_checkpoint(state.theta1(), &checkpoint)?;
    manifest.artifact(&checkpoint)?;
    if !state.weights_shared() {
        let checkpoint2 = args.out.join("checkpoint2.bin");
        save_checkpoint(state.theta2(), &checkpoint2)?;
        manifest.artifact(&checkpoint2)?;
    }

    let codes_txt = args.out.join("codes.txt");
    write_codes_text(&codes_txt, &state.h)?;
    manifest.artifact(&codes_txt)?;
    if args.packed {
        let codes_bin = args.out.join("codes.bin");
        write_codes_packed(&codes_bin, &state.h)?;
        manifest.artifact(&codes_bin)?;
    }

    let history = args.out.join("history.csv");
    write_history_csv(&history, &state.history)?;
    manifest.artifact(&history)?;
    manifest.phase_done("write");
    manifest.write(args.out.join("manifest.txt"))?;

    println!(
        "trained {} codes into {}",
        state.h.rows(),
        args.out.display()
    );
    Ok(())
}

pub fn encode(args: EncodeArgs) -> Result<()> {
    let params = load_checkpoint(&args.checkpoint)?;
    let features = read_features(&args.features)?;
    if features.cols() != params.input_dim() {
        return Err(Error::DimMismatch {
            op: "encode",
            detail: format!(
                "features have {} columns, checkpoint expects {}",
                features.cols(),
                params.input_dim()
            ),
        }
        .into());
    }
    let codes = params.encode_binary(&features)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    if args.packed {
        write_codes_packed(&args.out, &codes)?;
    } else {
        write_codes_text(&args.out, &codes)?;
    }
    println!(
        "encoded {} samples at {} bits into {}",
        codes.rows(),
        codes.cols(),
        args.out.display()
    );
    Ok(())
}

fn print_report(report: &MetricsReport) {
    println!("map = {}", report.map);
    println!("precision_r2 = {}", report.precision_r2);
    println!("recall_r2 = {}", report.recall_r2);
    println!("f_measure_r2 = {}", report.f_measure_r2);
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let db_labels = read_labels(&args.db_labels)?;
    let query_labels = read_labels(&args.query_labels)?;
    let query_codes = read_codes(&args.query_codes)?;
    let queries = CodeDatabase::from_sign_matrix(&query_codes, query_labels)?;

    let db =
        match args.mode.as_str() {
            "asymmetric" => {
                let path = args.db_codes.as_ref().ok_or_else(|| {
                    Error::Config("asymmetric evaluation needs --db-codes".into())
                })?;
                CodeDatabase::from_sign_matrix(&read_codes(path)?, db_labels)?
            }
            "symmetric" => {
                let checkpoint = args.checkpoint.as_ref().ok_or_else(|| {
                    Error::Config("symmetric evaluation needs --checkpoint".into())
                })?;
                let feats = args.db_features.as_ref().ok_or_else(|| {
                    Error::Config("symmetric evaluation needs --db-features".into())
                })?;
                let params = load_checkpoint(checkpoint)?;
                let codes = params.encode_binary(&read_features(feats)?)?;
                CodeDatabase::from_sign_matrix(&codes, db_labels)?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown evaluation mode {other:?} (expected asymmetric or symmetric)"
                ))
                .into())
            }
        };

    let report = evaluate(&db, &queries, args.topk)?;
    std::fs::create_dir_all(&args.out)?;
    write_metrics_csv(args.out.join("metrics.csv"), &report)?;
    write_pr_curve_csv(args.out.join("pr_curve.csv"), &report)?;
    print_report(&report);
    Ok(())
}

struct CellOutcome {
    mode: Mode,
    variant: Variant,
    seed: u64,
    report: MetricsReport,
    history_path: PathBuf,
}

pub fn ablate(args: AblateArgs) -> Result<()> {
    let base = resolve_config(args.config.as_deref(), args.seed, args.bits, None, None)?;
    let train_ds = load_dataset(&args.features, &args.labels)?;
    let query_ds = load_dataset(&args.query_features, &args.query_labels)?;
    base.validate(train_ds.n()).map_err(anyhow::Error::from)?;
    std::fs::create_dir_all(&args.out)?;

    let cells: Vec<(Mode, Variant)> = [Mode::Dsah1, Mode::Dsah2]
        .iter()
        .flat_map(|&mode| Variant::ALL.iter().map(move |&variant| (mode, variant)))
        .collect();
    let threads = worker_threads()?.min(cells.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CellOutcome>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());

    let run_cell = |index: usize| -> Result<CellOutcome> {
        let (mode, variant) = cells[index];
        // deterministic per-cell seed so parallelism cannot change results
        let seed = base.seed.wrapping_add(index as u64);
        let cfg = TrainConfig {
            mode,
            variant,
            seed,
            ..base.clone()
        };
        let state = dsah_core::trainer::train(&train_ds, &cfg)?;
        let report =
            dsah_core::retrieval::evaluate_asymmetric(&state, &train_ds, &query_ds, args.topk)?;
        let history_path = args.out.join(format!("history_{mode}_{variant}.csv"));
        write_history_csv(&history_path, &state.history)?;
        Ok(CellOutcome {
            mode,
            variant,
            seed,
            report,
            history_path,
        })
    };

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= cells.len() {
                    break;
                }
                let outcome = run_cell(index);
                results.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    let mut manifest = Manifest::new("ablate", base.seed);
    record_config(&mut manifest, &base);
    manifest.input("features", &args.features)?;
    manifest.input("labels", &args.labels)?;
    manifest.input("query_features", &args.query_features)?;
    manifest.input("query_labels", &args.query_labels)?;

    let mut table = String::from("mode,variant,seed,map,precision_r2,recall_r2,f_measure_r2\n");
    let collected = results.into_inner().unwrap();
    for slot in collected {
        let cell = slot.expect("every cell ran")?;
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.mode,
            cell.variant,
            cell.seed,
            cell.report.map,
            cell.report.precision_r2,
            cell.report.recall_r2,
            cell.report.f_measure_r2
        ));
        manifest.artifact(&cell.history_path)?;
        println!("{} {}: map = {}", cell.mode, cell.variant, cell.report.map);
    }
    let table_path = args.out.join("ablation.csv");
    std::fs::write(&table_path, table)?;
    manifest.artifact(&table_path)?;
    manifest.phase_done("grid");
    manifest.write(args.out.join("manifest.txt"))?;
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut rng = SeededRng::new(args.seed);
    let full = make_synthetic_clusters(
        args.classes,
        args.per_class,
        args.dim,
        args.spread,
        &mut rng,
    )?;
    let (train_ds, query_ds) = stratified_split(&full, args.query_fraction, &mut rng)?;
    std::fs::create_dir_all(&args.out)?;
    write_split(&args.out, "train", &train_ds)?;
    write_split(&args.out, "query", &query_ds)?;
    println!(
        "wrote {} train and {} query samples ({} classes, dim {}) into {}",
        train_ds.n(),
        query_ds.n(),
        args.classes,
        args.dim,
        args.out.display()
    );
    Ok(())
}

fn write_split(out: &Path, name: &str, ds: &Dataset) -> Result<()> {
    write_features_csv(out.join(format!("{name}_features.csv")), ds.features())?;
    write_labels_csv(out.join(format!("{name}_labels.csv")), ds.labels())?;
    Ok(())
}
