use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use uspann::bench::{compare, default_m_prime_grid, write_curve_csv, CompareConfig, CurveRow, Method};
use uspann::knn::{load_cache, save_cache};
use uspann::loss::TargetMode;
use uspann::prelude::*;

use crate::args::*;
use crate::source::{write_dataset, Source};

const DIST: DistanceFn = DistanceFn::Euclidean;

/// Prints the fully resolved run configuration to stderr.
fn announce(command: &str, args: &impl Serialize, extra: serde_json::Value) {
    let config = json!({ "command": command, "args": args, "resolved": extra });
    eprintln!("{config}");
}

fn to_json(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("config types serialize")
}

fn emit_json(v: serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{v}")?;
    Ok(())
}

struct Prepared {
    train: Arc<Dataset>,
    queries: Dataset,
}

fn prepare(data: &DataArgs) -> Result<Prepared> {
    let source = Source::resolve(data.format.as_deref(), data.dataset.as_deref(), data.seed)?;
    let all = source.load()?;
    let (train, queries) = match &data.queries {
        Some(path) => (all, Source::resolve(None, Some(path), data.seed)?.load()?),
        None => split(&all, data.query_fraction, data.seed)?,
    };
    if queries.d() != train.d() {
        return Err(Error::Input(format!("queries have d={}, dataset d={}", queries.d(), train.d())));
    }
    let (train, queries) = if data.no_standardize {
        (train, queries)
    } else {
        let (train, scaler) = standardize(&train)?;
        let queries = scaler.apply(&queries)?;
        (train, queries)
    };
    Ok(Prepared { train: Arc::new(train), queries })
}

fn architecture(model: &ModelArgs, d: usize) -> Architecture {
    match model.arch {
        ArchArg::Logreg => Architecture::logistic(d, model.m),
        ArchArg::Mlp => {
            Architecture { hidden_dim: model.hidden, dropout_rate: model.dropout, ..Architecture::mlp(d, model.m) }
        }
    }
}

fn train_config(t: &TrainArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        eta: t.eta,
        epochs: t.epochs,
        batch_fraction: t.batch_fraction,
        learning_rate: t.learning_rate,
        k_prime: t.k_prime,
        seed,
        target_mode: if t.soft_targets { TargetMode::SoftMean } else { TargetMode::Argmax },
        ..TrainConfig::default()
    }
}

fn knn_matrix(train: &Dataset, k_prime: usize, cache: Option<&Path>) -> Result<KnnMatrix> {
    match cache {
        Some(path) if path.exists() => {
            let knn = load_cache(path, train)?;
            if knn.k_prime() != k_prime {
                return Err(Error::Usage(format!(
                    "{} holds k'={}, asked for k'={k_prime}",
                    path.display(),
                    knn.k_prime()
                )));
            }
            Ok(knn)
        }
        Some(path) => {
            let knn = build_knn_matrix(train, k_prime, DIST)?;
            save_cache(&knn, path)?;
            Ok(knn)
        }
        None => build_knn_matrix(train, k_prime, DIST),
    }
}

fn build_index(p: &Prepared, model: &ModelArgs, t: &TrainArgs, idx: &IndexArgs, seed: u64) -> Result<LoadedIndex> {
    let arch = architecture(model, p.train.d());
    let cfg = train_config(t, seed);
    if let Some(fanouts) = &idx.fanouts {
        if idx.ensemble > 1 {
            return Err(Error::Usage("--ensemble and --fanouts cannot be combined".into()));
        }
        return Ok(build_hierarchical(p.train.clone(), &arch, &cfg, fanouts, DIST)?.into());
    }
    let knn = knn_matrix(&p.train, t.k_prime, t.knn_cache.as_deref())?;
    if idx.ensemble > 1 {
        let (ens, _) = train_ensemble(p.train.clone(), &knn, &arch, &cfg, idx.ensemble, DIST)?;
        let mode = if idx.union { EnsembleQueryMode::Union } else { EnsembleQueryMode::BestConfidence };
        return Ok(ens.with_mode(mode).into());
    }
    let (m, _) = train(&p.train, &knn, &arch, &cfg)?;
    Ok(FlatIndex::build(m, p.train.clone(), DIST)?.into())
}

fn write_rows(rows: &[CurveRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_curve_csv(File::create(path)?, rows),
        None => write_curve_csv(io::stdout().lock(), rows),
    }
}

fn check_probes(list: &Option<Vec<usize>>, m: usize) -> Result<Vec<usize>> {
    match list {
        None => Ok(default_m_prime_grid(m)),
        Some(l) => match l.iter().find(|&&mp| mp == 0 || mp > m) {
            Some(bad) => Err(Error::Usage(format!("--m-prime {bad} outside 1..={m}"))),
            None => Ok(l.clone()),
        },
    }
}

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    let source = Source::resolve(Some(&a.format), None, a.seed)?;
    announce("gen-data", a, to_json(&source));
    let ds = source.load()?;
    write_dataset(&a.out, &ds)?;
    emit_json(json!({ "n": ds.n(), "d": ds.d(), "checksum": ds.checksum(), "out": a.out }))
}

pub fn build_knn(a: &BuildKnnArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    announce("build-knn", a, json!({ "n": p.train.n(), "d": p.train.d(), "checksum": p.train.checksum() }));
    let knn = build_knn_matrix(&p.train, a.k_prime, DIST)?;
    save_cache(&knn, &a.out)?;
    emit_json(json!({ "n": knn.n(), "k_prime": knn.k_prime(), "out": a.out }))
}

pub fn train_cmd(a: &TrainCmdArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    let arch = architecture(&a.model, p.train.d());
    let cfg = train_config(&a.train, a.data.seed);
    let resolved = json!({ "architecture": arch, "train": cfg, "n": p.train.n(), "d": p.train.d() });
    announce("train", a, resolved.clone());
    let knn = knn_matrix(&p.train, a.train.k_prime, a.train.knn_cache.as_deref())?;
    let (model, report) = train(&p.train, &knn, &arch, &cfg)?;
    model.save(&a.out)?;
    report.write_csv(io::stdout().lock(), &resolved.to_string())?;
    Ok(())
}

pub fn build_index_cmd(a: &BuildIndexArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    let arch = architecture(&a.model, p.train.d());
    let cfg = train_config(&a.train, a.data.seed);
    announce("build-index", a, json!({ "architecture": arch, "train": cfg, "n": p.train.n(), "d": p.train.d() }));
    let index = build_index(&p, &a.model, &a.train, &a.index, a.data.seed)?;
    save_index(&a.out, &index)?;
    emit_json(json!({ "kind": index.kind_name(), "bins": index.num_bins(), "out": a.out }))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    let arch = architecture(&a.model, p.train.d());
    let cfg = train_config(&a.train, a.data.seed);
    announce("eval", a, json!({ "architecture": arch, "train": cfg, "n": p.train.n(), "queries": p.queries.n() }));
    let index = match &a.index_file {
        Some(path) => load_index(path, p.train.clone())?,
        None => build_index(&p, &a.model, &a.train, &a.index, a.data.seed)?,
    };
    let grid = check_probes(&a.m_prime, index.num_bins())?;
    let gt = ground_truth(&p.train, &p.queries, a.k, DIST)?;
    let curve = sweep_curve(&index, &p.queries, &gt, a.k, &grid)?;
    let rows = CurveRow::from_curve(index.kind_name(), index.num_bins(), a.k, a.data.seed, &curve);
    write_rows(&rows, a.out.as_deref())
}

pub fn compare_cmd(a: &CompareArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    let methods = a.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    if methods.contains(&Method::UspHierarchical) && a.index.fanouts.is_none() {
        return Err(Error::Usage("method usp-hier needs --fanouts".into()));
    }
    let cfg = CompareConfig {
        arch: architecture(&a.model, p.train.d()),
        train: train_config(&a.train, a.data.seed),
        k: a.k,
        ensemble: a.index.ensemble,
        fanouts: a.index.fanouts.clone().unwrap_or_default(),
        kmeans_iters: a.kmeans_iters,
        m_primes: a.m_prime.clone(),
        distance: DIST,
    };
    announce(
        "compare",
        a,
        json!({ "architecture": cfg.arch, "train": cfg.train, "n": p.train.n(), "queries": p.queries.n() }),
    );
    let rows = compare(p.train.clone(), &p.queries, &methods, &cfg)?;
    write_rows(&rows, a.out.as_deref())
}
