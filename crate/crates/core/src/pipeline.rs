//! End-to-end workflow: enumerate, select, simulate, fit, predict, evaluate.
//!
//! Every stage writes its output to the output directory under a name that
//! carries a digest of the configuration that produced it, so reruns with the
//! same configuration pick up finished stages instead of recomputing them.
//! Reports contain no timing information; wall-clock times go to a separate
//! file so that reports from identical configurations are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active_learning::{AlState, CheckpointFile, Explorer};
use crate::config::{content_hash, stream_seed, GprConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::gpr::{CompositeKernel, GprModel, MolTemp};
use crate::mgk::{KernelCache, MgkHyperparameters, MgkKernel};
use crate::molspace::{
    enumerate_canonical, read_molecule_list, write_molecule_list, CanonicalSmiles,
};
use crate::thermo::{
    dataset_rows, read_dataset, simulate_series, write_dataset, DatasetRow, PropertyRecord,
    ThermoSeries,
};

/// The three predicted properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Density,
    HeatCapacity,
    Hov,
}

pub const PROPERTIES: [Property; 3] = [Property::Density, Property::HeatCapacity, Property::Hov];

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Density => "density",
            Property::HeatCapacity => "heat_capacity",
            Property::Hov => "hov",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Property::Density => "kg/m3",
            Property::HeatCapacity => "J/(mol K)",
            Property::Hov => "kJ/mol",
        }
    }

    pub fn value(self, r: &PropertyRecord) -> f64 {
        match self {
            Property::Density => r.density,
            Property::HeatCapacity => r.heat_capacity,
            Property::Hov => r.hov,
        }
    }
}

/// Regression metrics. `r2` is NaN and `r2_defined` false when the truths
/// have zero variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub r2_defined: bool,
}

pub fn evaluate(predictions: &[f64], truths: &[f64]) -> Result<Metrics> {
    if predictions.len() != truths.len() || truths.is_empty() {
        return Err(Error::invalid(format!(
            "evaluate needs equal non-zero lengths, got {} and {}",
            predictions.len(),
            truths.len()
        )));
    }
    let n = truths.len() as f64;
    let mean = truths.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs = 0.0;
    for (p, t) in predictions.iter().zip(truths) {
        ss_res += (p - t) * (p - t);
        ss_tot += (t - mean) * (t - mean);
        abs += (p - t).abs();
    }
    let r2_defined = ss_tot > 0.0;
    Ok(Metrics {
        n: truths.len(),
        rmse: (ss_res / n).sqrt(),
        mae: abs / n,
        r2: if r2_defined { 1.0 - ss_res / ss_tot } else { f64::NAN },
        r2_defined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyMetrics {
    pub property: Property,
    pub unit: String,
    pub metrics: Metrics,
}

/// Predicted and true properties of one (molecule, temperature) sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub molecule: CanonicalSmiles,
    pub temperature: f64,
    pub truth: [f64; 3],
    pub predicted: [f64; 3],
}

pub fn evaluate_predictions(rows: &[Prediction]) -> Result<Vec<PropertyMetrics>> {
    PROPERTIES
        .iter()
        .enumerate()
        .map(|(k, &property)| {
            let p: Vec<f64> = rows.iter().map(|r| r.predicted[k]).collect();
            let t: Vec<f64> = rows.iter().map(|r| r.truth[k]).collect();
            Ok(PropertyMetrics {
                property,
                unit: property.unit().into(),
                metrics: evaluate(&p, &t)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub threshold: f64,
    pub n_selected: usize,
    pub n_train_molecules: usize,
    pub n_train_rows: usize,
    pub n_test_molecules: usize,
    pub n_test_rows: usize,
    pub properties: Vec<PropertyMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcDrop {
    pub molecule: CanonicalSmiles,
    pub failures: Vec<String>,
}

/// Outcome of [`run_alms`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub min_carbons: usize,
    pub max_carbons: usize,
    pub n_molecules: usize,
    pub stages: Vec<StageReport>,
    pub qc_dropped: Vec<QcDrop>,
    /// Artifact role to file name.
    pub artifacts: BTreeMap<String, String>,
}

/// Wall-clock seconds per stage, kept apart from the report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub stages: Vec<(String, f64)>,
    pub total: f64,
}

impl Runtime {
    fn record(&mut self, stage: &str, start: Instant) {
        self.stages.push((stage.into(), start.elapsed().as_secs_f64()));
    }
}

#[derive(Clone, Debug)]
pub struct StagePredictions {
    pub threshold: f64,
    pub rows: Vec<Prediction>,
}

/// Everything [`run_alms`] produced.
pub struct RunOutput {
    pub report: EvalReport,
    pub runtime: Runtime,
    pub molecules: Vec<CanonicalSmiles>,
    pub stages: Vec<AlState>,
    pub test: Vec<CanonicalSmiles>,
    pub predictions: Vec<StagePredictions>,
}

pub const REPORT_FILE: &str = "report.json";
pub const RUNTIME_FILE: &str = "runtime.json";
pub const SUMMARY_FILE: &str = "summary.csv";

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Enumerates the carbon range, reusing a previously written list.
pub fn enumerate_stage(min_carbons: usize, max_carbons: usize, out_dir: &Path) -> Result<(Vec<CanonicalSmiles>, PathBuf)> {
    let hash = content_hash("molecules", &(min_carbons, max_carbons));
    let path = out_dir.join(format!("molecules-{hash}.txt"));
    if path.exists() {
        let molecules = read_molecule_list(&path)?;
        log::info!("reusing {} molecules from {}", molecules.len(), path.display());
        return Ok((molecules, path));
    }
    let molecules = enumerate_canonical(min_carbons, max_carbons)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_molecule_list(&path, &molecules)?;
    log::info!("enumerated {} molecules with {min_carbons}..={max_carbons} carbons", molecules.len());
    Ok((molecules, path))
}

pub fn kernel_cache_path(out_dir: &Path, params: &MgkHyperparameters) -> PathBuf {
    out_dir.join(format!("kernel-{}.csv", params.fingerprint()))
}

/// Kernel over `molecules`, backed by the cache file in `out_dir`.
pub fn open_kernel(
    molecules: Vec<CanonicalSmiles>,
    params: &MgkHyperparameters,
    out_dir: &Path,
) -> Result<MgkKernel> {
    params.validate()?;
    let cache = KernelCache::load_or_new(&kernel_cache_path(out_dir, params), params);
    MgkKernel::with_cache(molecules, params.clone(), Arc::new(cache))
}

pub fn save_kernel(kernel: &MgkKernel, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    kernel.cache().save(&kernel_cache_path(out_dir, kernel.params()))
}

#[derive(Serialize)]
struct AlStageKey<'a> {
    molecules: &'a str,
    mgk: &'a str,
    noise: f64,
    batch: usize,
    seed: u64,
    thresholds: &'a [f64],
}

/// Runs the threshold stages in order, each continuing from the previous
/// terminal state. Finished stages are read back from their checkpoints and
/// an interrupted stage resumes from its last partial checkpoint.
pub fn al_stages(
    config: &PipelineConfig,
    kernel: &MgkKernel,
    molecules_hash: &str,
    out_dir: &Path,
) -> Result<Vec<(AlState, PathBuf)>> {
    let al = &config.al;
    let noise = config.gpr.al_noise;
    let fingerprint = kernel.params().fingerprint();
    let molecules = kernel.molecules();
    let mut stages: Vec<(AlState, PathBuf)> = Vec::new();
    for (k, &threshold) in al.thresholds.iter().enumerate() {
        let key = AlStageKey {
            molecules: molecules_hash,
            mgk: &fingerprint,
            noise,
            batch: al.batch,
            seed: al.seed,
            thresholds: &al.thresholds[..=k],
        };
        let hash = content_hash("al", &key);
        let done = out_dir.join(format!("al-{hash}.json"));
        let partial = out_dir.join(format!("al-{hash}.partial.json"));
        let load = |path: &Path| -> Result<AlState> {
            let (mols, state) = CheckpointFile::load(path)?.to_state()?;
            if mols != molecules {
                return Err(Error::Format {
                    what: "checkpoint",
                    detail: format!("{} covers a different molecule set", path.display()),
                });
            }
            Ok(state)
        };
        if done.exists() {
            log::info!("reusing stage {k} (threshold {threshold}) from {}", done.display());
            stages.push((load(&done)?, done));
            continue;
        }
        let resumed = if partial.exists() { Some(load(&partial)?) } else { None };
        let start_state = match (resumed, stages.last()) {
            (Some(state), _) => {
                log::info!("resuming stage {k} from {}", partial.display());
                state
            }
            (None, None) => AlState::init(molecules.len(), threshold, al.batch, al.seed)?,
            (None, Some((previous, _))) => {
                let mut state = previous.clone();
                state.reopen(threshold)?;
                state
            }
        };
        let mut explorer = Explorer::new(start_state, kernel, noise)?;
        explorer.run(al.checkpoint_every, |state| {
            let file = CheckpointFile::from_state(state, molecules, noise, &fingerprint);
            file.save(&partial)
        })?;
        let state = explorer.into_state();
        CheckpointFile::from_state(&state, molecules, noise, &fingerprint).save(&done)?;
        if partial.exists() {
            std::fs::remove_file(&partial).map_err(|e| Error::io(&partial, e))?;
        }
        stages.push((state, done));
    }
    Ok(stages)
}

/// Seeded uniform sample of `n_test` molecules from `ccs` minus
/// `selected_all`, in `ccs` order.
pub fn split_test(
    ccs: &[CanonicalSmiles],
    selected_all: &[CanonicalSmiles],
    n_test: usize,
    seed: u64,
) -> Result<Vec<CanonicalSmiles>> {
    let excluded: BTreeSet<&CanonicalSmiles> = selected_all.iter().collect();
    let candidates: Vec<&CanonicalSmiles> = ccs.iter().filter(|m| !excluded.contains(m)).collect();
    if n_test > candidates.len() {
        return Err(Error::invalid(format!(
            "test set of {n_test} requested but only {} unselected molecules remain",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "test-split"));
    let mut picked = index::sample(&mut rng, candidates.len(), n_test).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| candidates[i].clone()).collect())
}

/// Runs the oracle over `molecules` in parallel, preserving order.
pub fn simulate_molecules(
    molecules: &[CanonicalSmiles],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<ThermoSeries>> {
    molecules
        .par_iter()
        .map(|m| simulate_series(&m.to_graph(), noise_sigma, seed))
        .collect()
}

/// Training or query rows grouped for the composite kernel.
fn mol_temps(kernel: &MgkKernel, rows: &[&DatasetRow]) -> Result<Vec<MolTemp>> {
    rows.iter()
        .map(|r| {
            let mol = kernel.index_of(&r.record.molecule).ok_or_else(|| {
                Error::invalid(format!("{} is not in the kernel table", r.record.molecule))
            })?;
            Ok(MolTemp {
                mol,
                temperature: r.record.temperature,
            })
        })
        .collect()
}

/// Fits one composite-kernel model per property on the QC-passing `train`
/// rows and predicts every `query` row.
pub fn fit_predict(
    kernel: &MgkKernel,
    gpr: &GprConfig,
    train: &[DatasetRow],
    query: &[DatasetRow],
) -> Result<Vec<Prediction>> {
    let train: Vec<&DatasetRow> = train.iter().filter(|r| r.qc_pass).collect();
    if train.is_empty() {
        return Err(Error::invalid("no QC-passing training rows"));
    }
    let query: Vec<&DatasetRow> = query.iter().collect();
    let composite = CompositeKernel {
        molecular: kernel,
        length_scale: gpr.temperature_length_scale,
    };
    let x_train = mol_temps(kernel, &train)?;
    let x_query = mol_temps(kernel, &query)?;
    let targets: Vec<Vec<f64>> = PROPERTIES
        .iter()
        .map(|p| train.iter().map(|r| p.value(&r.record)).collect())
        .collect();
    let target_refs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let models = GprModel::fit_many(composite, x_train, &target_refs, gpr.regression_noise)?;
    let means = models
        .iter()
        .map(|m| m.predict_mean(&x_query))
        .collect::<Result<Vec<_>>>()?;
    Ok(query
        .iter()
        .enumerate()
        .map(|(i, r)| Prediction {
            molecule: r.record.molecule.clone(),
            temperature: r.record.temperature,
            truth: [0, 1, 2].map(|k| PROPERTIES[k].value(&r.record)),
            predicted: [0, 1, 2].map(|k| means[k][i]),
        })
        .collect())
}

fn log_qc_drops(series: &[ThermoSeries]) -> Vec<QcDrop> {
    series
        .iter()
        .filter(|s| !s.qc.passed())
        .map(|s| {
            let failures: Vec<String> = s.qc.failures().iter().map(|f| f.to_string()).collect();
            log::warn!("dropping {} after failed QC: {}", s.molecule, failures.join(", "));
            QcDrop {
                molecule: s.molecule.clone(),
                failures,
            }
        })
        .collect()
}

fn ids_to_molecules(ids: &[usize], molecules: &[CanonicalSmiles]) -> Vec<CanonicalSmiles> {
    ids.iter().map(|&i| molecules[i].clone()).collect()
}

/// Full workflow for `config`, writing every artifact and the report into
/// `config.pipeline.out_dir`.
pub fn run_alms(config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let total = Instant::now();
    let mut runtime = Runtime::default();
    let p = &config.pipeline;
    let out_dir = p.out_dir.as_path();
    let mut artifacts = BTreeMap::new();

    let t = Instant::now();
    let (molecules, mol_path) = enumerate_stage(p.min_carbons, p.max_carbons, out_dir)?;
    let molecules_hash = content_hash("molecules", &(p.min_carbons, p.max_carbons));
    artifacts.insert("molecules".into(), file_name(&mol_path));
    runtime.record("enumerate", t);

    let t = Instant::now();
    let kernel = open_kernel(molecules.clone(), &config.mgk, out_dir)?;
    let staged = al_stages(config, &kernel, &molecules_hash, out_dir);
    // keep whatever kernel entries were computed, even on failure
    save_kernel(&kernel, out_dir)?;
    let staged = staged?;
    for (k, (_, path)) in staged.iter().enumerate() {
        artifacts.insert(format!("al_stage_{k}"), file_name(path));
    }
    runtime.record("active_learning", t);
    let stages: Vec<AlState> = staged.into_iter().map(|(s, _)| s).collect();

    let t = Instant::now();
    let final_selected =
        ids_to_molecules(stages.last().expect("at least one stage").selected(), &molecules);
    let test = split_test(&molecules, &final_selected, p.n_test, p.split_seed)?;
    let mut simulated: Vec<CanonicalSmiles> = final_selected.clone();
    simulated.extend(test.iter().cloned());
    crate::molspace::sort_molecules(&mut simulated);
    let dataset_hash = content_hash(
        "dataset",
        &(
            simulated.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
            p.noise_sigma,
            p.oracle_seed,
        ),
    );
    let dataset_path = out_dir.join(format!("dataset-{dataset_hash}.csv"));
    let series = simulate_molecules(&simulated, p.noise_sigma, p.oracle_seed)?;
    let qc_dropped = log_qc_drops(&series);
    let rows = dataset_rows(&series);
    if !dataset_path.exists() {
        write_dataset(&dataset_path, &rows)?;
    }
    artifacts.insert("dataset".into(), file_name(&dataset_path));
    runtime.record("simulate", t);

    let t = Instant::now();
    let test_set: BTreeSet<&CanonicalSmiles> = test.iter().collect();
    let test_rows: Vec<DatasetRow> = rows
        .iter()
        .filter(|r| r.qc_pass && test_set.contains(&r.record.molecule))
        .cloned()
        .collect();
    let n_test_molecules = test_rows
        .iter()
        .map(|r| &r.record.molecule)
        .collect::<BTreeSet<_>>()
        .len();
    let mut stage_reports = Vec::new();
    let mut predictions = Vec::new();
    for state in &stages {
        let selected: BTreeSet<CanonicalSmiles> =
            ids_to_molecules(state.selected(), &molecules).into_iter().collect();
        let train_rows: Vec<DatasetRow> = rows
            .iter()
            .filter(|r| r.qc_pass && selected.contains(&r.record.molecule))
            .cloned()
            .collect();
        let n_train_molecules = train_rows
            .iter()
            .map(|r| &r.record.molecule)
            .collect::<BTreeSet<_>>()
            .len();
        let preds = if test_rows.is_empty() {
            Vec::new()
        } else {
            fit_predict(&kernel, &config.gpr, &train_rows, &test_rows)?
        };
        let properties = if preds.is_empty() {
            Vec::new()
        } else {
            evaluate_predictions(&preds)?
        };
        log::info!(
            "threshold {}: {} selected, {} training rows",
            state.threshold(),
            state.selected().len(),
            train_rows.len()
        );
        stage_reports.push(StageReport {
            threshold: state.threshold(),
            n_selected: state.selected().len(),
            n_train_molecules,
            n_train_rows: train_rows.len(),
            n_test_molecules,
            n_test_rows: test_rows.len(),
            properties,
        });
        predictions.push(StagePredictions {
            threshold: state.threshold(),
            rows: preds,
        });
    }
    save_kernel(&kernel, out_dir)?;
    runtime.record("fit_predict", t);

    let report = EvalReport {
        min_carbons: p.min_carbons,
        max_carbons: p.max_carbons,
        n_molecules: molecules.len(),
        stages: stage_reports,
        qc_dropped,
        artifacts,
    };
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    export_plot_data(&report, &predictions, out_dir)?;
    runtime.total = total.elapsed().as_secs_f64();
    write_json(&out_dir.join(RUNTIME_FILE), &runtime)?;
    Ok(RunOutput {
        report,
        runtime,
        molecules,
        stages,
        test,
        predictions,
    })
}

/// Writes `parity-<property>.csv` with one row per stage and test sample,
/// and `summary.csv` with one row per (property, stage).
pub fn export_plot_data(
    report: &EvalReport,
    predictions: &[StagePredictions],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (k, property) in PROPERTIES.iter().enumerate() {
        let path = out_dir.join(format!("parity-{}.csv", property.name()));
        let mut text = String::from("stage,threshold,smiles,temperature_K,truth,prediction\n");
        for (s, stage) in predictions.iter().enumerate() {
            for r in &stage.rows {
                text.push_str(&format!(
                    "{s},{:e},{},{:e},{:e},{:e}\n",
                    stage.threshold, r.molecule, r.temperature, r.truth[k], r.predicted[k]
                ));
            }
        }
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    let path = out_dir.join(SUMMARY_FILE);
    let mut text = String::from(
        "property,stage,threshold,n_selected,n_train_rows,n_test_rows,rmse,mae,r2\n",
    );
    for property in PROPERTIES {
        for (s, stage) in report.stages.iter().enumerate() {
            if let Some(pm) = stage.properties.iter().find(|pm| pm.property == property) {
                let m = &pm.metrics;
                text.push_str(&format!(
                    "{},{s},{:e},{},{},{},{:e},{:e},{:e}\n",
                    property.name(),
                    stage.threshold,
                    stage.n_selected,
                    stage.n_train_rows,
                    stage.n_test_rows,
                    m.rmse,
                    m.mae,
                    m.r2
                ));
            }
        }
    }
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}

pub const PREDICTIONS_HEADER: &str = "smiles,temperature_K,density_true,density_pred,cp_true,cp_pred,hvap_true,hvap_pred";

pub fn write_predictions(path: &Path, rows: &[Prediction]) -> Result<()> {
    let mut out = BufWriter::new(Vec::new());
    writeln!(out, "{PREDICTIONS_HEADER}").expect("in-memory write");
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.molecule,
            r.temperature,
            r.truth[0],
            r.predicted[0],
            r.truth[1],
            r.predicted[1],
            r.truth[2],
            r.predicted[2]
        )
        .expect("in-memory write");
    }
    write_atomic(path, &out.into_inner().expect("in-memory buffer"))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::Format {
        what: "predictions",
        detail,
    };
    let mut lines = text.lines();
    if lines.next() != Some(PREDICTIONS_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(format!("line {}: expected 8 fields", k + 2)));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| bad(format!("line {}: bad number {s:?}", k + 2)))
            };
            Ok(Prediction {
                molecule: CanonicalSmiles::canonicalize(f[0])?,
                temperature: num(f[1])?,
                truth: [num(f[2])?, num(f[4])?, num(f[6])?],
                predicted: [num(f[3])?, num(f[5])?, num(f[7])?],
            })
        })
        .collect()
}

/// Fits on one dataset file and predicts the rows of another, using a
/// kernel table over the union of their molecules.
pub fn fit_predict_files(
    config: &PipelineConfig,
    train_path: &Path,
    query_path: &Path,
    out_dir: &Path,
) -> Result<Vec<Prediction>> {
    let train = read_dataset(train_path)?;
    let query = read_dataset(query_path)?;
    let mut table: Vec<CanonicalSmiles> = train
        .iter()
        .chain(&query)
        .map(|r| r.record.molecule.clone())
        .collect();
    crate::molspace::sort_molecules(&mut table);
    let kernel = open_kernel(table, &config.mgk, out_dir)?;
    let query: Vec<DatasetRow> = query.into_iter().filter(|r| r.qc_pass).collect();
    let preds = fit_predict(&kernel, &config.gpr, &train, &query);
    save_kernel(&kernel, out_dir)?;
    preds
}

/// Metrics of both arms for one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub n_train_molecules: usize,
    pub n_eval_molecules: usize,
    pub al: Vec<PropertyMetrics>,
    pub random: Vec<PropertyMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRmse {
    pub property: Property,
    pub al: f64,
    pub random: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub threshold: f64,
    pub per_seed: Vec<SeedComparison>,
    pub median_rmse: Vec<MedianRmse>,
}

impl ComparisonReport {
    /// Properties whose median active-learning RMSE does not exceed the
    /// random arm's.
    pub fn al_wins(&self) -> usize {
        self.median_rmse.iter().filter(|m| m.al <= m.random).count()
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Active learning against random sampling. For every comparison seed the
/// first-stage selection is rerun with that seed; the random arm draws the
/// same number of molecules from the remaining ones with an independent
/// stream, and both arms are evaluated on every molecule in neither set.
pub fn compare_al_random(config: &PipelineConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let p = &config.pipeline;
    let out_dir = p.out_dir.as_path();
    let (molecules, _) = enumerate_stage(p.min_carbons, p.max_carbons, out_dir)?;
    let kernel = open_kernel(molecules.clone(), &config.mgk, out_dir)?;
    let result = compare_with_kernel(config, &kernel);
    save_kernel(&kernel, out_dir)?;
    let report = result?;
    write_json(&out_dir.join("comparison.json"), &report)?;
    Ok(report)
}

fn compare_with_kernel(config: &PipelineConfig, kernel: &MgkKernel) -> Result<ComparisonReport> {
    let p = &config.pipeline;
    let molecules = kernel.molecules();
    let threshold = config.al.thresholds[0];
    let series = simulate_molecules(molecules, p.noise_sigma, p.oracle_seed)?;
    log_qc_drops(&series);
    let rows = dataset_rows(&series);
    let rows_of = |ids: &BTreeSet<usize>| -> Vec<DatasetRow> {
        rows.iter()
            .filter(|r| {
                kernel
                    .index_of(&r.record.molecule)
                    .is_some_and(|i| ids.contains(&i))
            })
            .cloned()
            .collect()
    };
    let mut per_seed = Vec::new();
    for &seed in &p.compare_seeds {
        let state = AlState::init(molecules.len(), threshold, config.al.batch, seed)?;
        let mut explorer = Explorer::new(state, kernel, config.gpr.al_noise)?;
        explorer.run(0, |_| Ok(()))?;
        let al_set: BTreeSet<usize> = explorer.state().selected().iter().copied().collect();
        let rest: Vec<usize> = (0..molecules.len()).filter(|i| !al_set.contains(i)).collect();
        if rest.len() < al_set.len() {
            return Err(Error::invalid(format!(
                "selected set of {} leaves too few molecules for a random arm",
                al_set.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "random-arm"));
        let random_set: BTreeSet<usize> = index::sample(&mut rng, rest.len(), al_set.len())
            .into_iter()
            .map(|k| rest[k])
            .collect();
        let eval_set: BTreeSet<usize> = rest
            .iter()
            .copied()
            .filter(|i| !random_set.contains(i))
            .collect();
        if eval_set.is_empty() {
            return Err(Error::invalid("no molecules left to evaluate the comparison on"));
        }
        let eval_rows: Vec<DatasetRow> = rows_of(&eval_set).into_iter().filter(|r| r.qc_pass).collect();
        let arm = |train: &BTreeSet<usize>| -> Result<Vec<PropertyMetrics>> {
            let preds = fit_predict(kernel, &config.gpr, &rows_of(train), &eval_rows)?;
            evaluate_predictions(&preds)
        };
        let al = arm(&al_set)?;
        let random = arm(&random_set)?;
        log::info!(
            "seed {seed}: {} training molecules per arm, {} evaluation molecules",
            al_set.len(),
            eval_set.len()
        );
        per_seed.push(SeedComparison {
            seed,
            n_train_molecules: al_set.len(),
            n_eval_molecules: eval_set.len(),
            al,
            random,
        });
    }
    let median_rmse = PROPERTIES
        .iter()
        .enumerate()
        .map(|(k, &property)| MedianRmse {
            property,
            al: median(per_seed.iter().map(|s| s.al[k].metrics.rmse).collect()),
            random: median(per_seed.iter().map(|s| s.random[k].metrics.rmse).collect()),
        })
        .collect();
    Ok(ComparisonReport {
        threshold,
        per_seed,
        median_rmse,
    })
}
