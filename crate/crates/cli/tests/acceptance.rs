//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/common/oracles.rs"]
#[allow(dead_code)]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use alms_core::active_learning::{abandoned_variances, AlState, Explorer};
use alms_core::gpr::GprModel;
use alms_core::mgk::{mgk_normalized, mgk_raw, MgkHyperparameters, MgkKernel};
use alms_core::molspace::{enumerate_alkanes, enumerate_canonical, parse_smiles, CanonicalSmiles};
use alms_core::pipeline::{compare_al_random, run_alms, PROPERTIES};
use alms_core::thermo::{
    combine_heat_capacity, hov_corrected, oracle_heat_capacity, oracle_hov, qc_evaluate,
    simulate_series, temperature_grid, Check, PropertyRecord, GAS_CONSTANT,
};
use alms_core::PipelineConfig;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const TIME_LIMIT: Duration = Duration::from_secs(600);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn experiment_config(out_dir: &Path) -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/c4-c12.toml");
    let mut config = PipelineConfig::load(&path).expect("experiment config loads");
    config.pipeline.out_dir = out_dir.to_path_buf();
    config
}

fn alms() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_alms"));
    cmd.env("RUST_LOG", "warn").stdout(Stdio::null());
    cmd
}

fn enumeration() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("molecules.txt");
    let start = Instant::now();
    let status = alms()
        .args(["enumerate", "4", "19", "--out"])
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(status.success(), || format!("enumerate exited with {status}"))?;
    ensure(elapsed <= TIME_LIMIT, || format!("took {elapsed:?}"))?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    ensure(lines.len() == 251_728, || format!("{} molecules", lines.len()))?;
    let mut by_size: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for line in &lines {
        let g = parse_smiles(line).map_err(|e| format!("{line}: {e}"))?;
        if g.n_atoms() <= 9 {
            by_size.entry(g.n_atoms()).or_default().insert(oracles::graph_code(&g));
        }
    }
    for n in 4..=9 {
        let oracle = oracles::brute_force_alkane_codes(n);
        let ours = by_size.remove(&n).unwrap_or_default();
        let count = lines
            .iter()
            .filter(|l| l.bytes().filter(|&b| b == b'C').count() == n)
            .count();
        ensure(count == oracle.len() && ours == oracle, || {
            format!("n={n}: {count} listed, oracle has {}", oracle.len())
        })?;
    }
    Ok(format!(
        "251728 molecules in {:.1}s; n=4..9 classes equal the labeled-tree oracle",
        elapsed.as_secs_f64()
    ))
}

fn kernel_correctness() -> Outcome {
    let small = enumerate_alkanes(1, 5).map_err(|e| e.to_string())?;
    let walk = MgkHyperparameters {
        q: 0.5,
        fp_tolerance: 1e-14,
        ..MgkHyperparameters::default()
    };
    let mut worst_walk = 0.0f64;
    for a in &small {
        for b in &small {
            let k = mgk_raw(a, b, &walk).map_err(|e| e.to_string())?;
            worst_walk = worst_walk.max((k - oracles::walk_sum_forward(a, b, &walk, 20)).abs());
        }
    }
    ensure(worst_walk < 1e-8, || format!("walk-sum deviation {worst_walk:e}"))?;

    let p = MgkHyperparameters::default();
    let graphs = enumerate_alkanes(4, 12).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sym = 0.0f64;
    let mut worst_self = 0.0f64;
    for _ in 0..50 {
        let a = &graphs[rng.gen_range(0..graphs.len())];
        let b = &graphs[rng.gen_range(0..graphs.len())];
        let ab = mgk_raw(a, b, &p).map_err(|e| e.to_string())?;
        let ba = mgk_raw(b, a, &p).map_err(|e| e.to_string())?;
        worst_sym = worst_sym.max((ab - ba).abs());
        let aa = mgk_normalized(a, a, &p).map_err(|e| e.to_string())?;
        worst_self = worst_self.max((aa - 1.0).abs());
    }
    ensure(worst_sym < 1e-12, || format!("asymmetry {worst_sym:e}"))?;
    ensure(worst_self < 1e-10, || format!("self-kernel deviation {worst_self:e}"))?;

    let molecules = enumerate_canonical(4, 12).map_err(|e| e.to_string())?;
    let kernel = MgkKernel::new(molecules, p).map_err(|e| e.to_string())?;
    let ids: Vec<usize> = sample(&mut rng, kernel.len(), 100).into_vec();
    let m = kernel.matrix(&ids, &ids).map_err(|e| e.to_string())?;
    let min_eig = m.min_eigenvalue();
    ensure(m.max_asymmetry() < 1e-12, || "matrix asymmetry".into())?;
    ensure(m.max_diagonal_error() < 1e-10, || "matrix diagonal".into())?;
    ensure(min_eig >= -1e-8, || format!("min eigenvalue {min_eig:e}"))?;
    Ok(format!(
        "walk-sum dev {worst_walk:.1e}, asymmetry {worst_sym:.1e}, self dev {worst_self:.1e}, min eig {min_eig:.2e}"
    ))
}

fn regression() -> Outcome {
    let molecules = enumerate_canonical(4, 9).map_err(|e| e.to_string())?;
    let n = molecules.len();
    let kernel = MgkKernel::new(molecules, MgkHyperparameters::default()).map_err(|e| e.to_string())?;
    kernel.precompute_all().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let all: Vec<usize> = (0..n).collect();

    let train: Vec<usize> = sample(&mut rng, n, 12).into_vec();
    let y: Vec<f64> = train.iter().map(|&i| 3.0 * i as f64 - 40.0 + (i as f64).sin()).collect();
    let model = GprModel::fit(&kernel, train.clone(), &y, 0.0).map_err(|e| e.to_string())?;
    let mean = model.predict_mean(&train).map_err(|e| e.to_string())?;
    let interp = mean.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(interp < 1e-6, || format!("interpolation error {interp:e}"))?;

    let noise = 1e-2;
    let mut closed = 0.0f64;
    for s in 0..n {
        let model = GprModel::fit(&kernel, vec![s], &[1.0], noise).map_err(|e| e.to_string())?;
        let var = model.predict_variance(&all).map_err(|e| e.to_string())?;
        let ks = kernel.matrix(&[s], &all).map_err(|e| e.to_string())?;
        for (x, v) in var.iter().enumerate() {
            let expected = 1.0 - ks.values[(0, x)].powi(2) / (1.0 + noise);
            closed = closed.max((v - expected).abs());
        }
    }
    ensure(closed < 1e-10, || format!("single-point deviation {closed:e}"))?;

    let mut worst_growth = f64::NEG_INFINITY;
    for _ in 0..20 {
        let size = rng.gen_range(2..20);
        let ids: Vec<usize> = sample(&mut rng, n, size + 1).into_vec();
        let (base, extra) = ids.split_at(size);
        let zeros = vec![0.0; size];
        let before = GprModel::fit(&kernel, base.to_vec(), &zeros, 1e-4)
            .and_then(|m| m.predict_variance(&all))
            .map_err(|e| e.to_string())?;
        let zeros = vec![0.0; size + 1];
        let after = GprModel::fit(&kernel, [base, extra].concat(), &zeros, 1e-4)
            .and_then(|m| m.predict_variance(&all))
            .map_err(|e| e.to_string())?;
        for (b, a) in before.iter().zip(&after) {
            worst_growth = worst_growth.max(a - b);
        }
    }
    ensure(worst_growth <= 1e-8, || format!("variance grew by {worst_growth:e}"))?;

    let y2: Vec<f64> = train.iter().map(|&i| -(i as f64).powi(3)).collect();
    let v1 = GprModel::fit(&kernel, train.clone(), &y, 1e-2)
        .and_then(|m| m.predict_variance(&all))
        .map_err(|e| e.to_string())?;
    let v2 = GprModel::fit(&kernel, train.clone(), &y2, 1e-2)
        .and_then(|m| m.predict_variance(&all))
        .map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(&v1) == bits(&v2), || "variance depends on targets".into())?;
    Ok(format!(
        "interpolation {interp:.1e}, closed form {closed:.1e}, max growth {worst_growth:.1e} over 20 cases, target-free variance"
    ))
}

fn active_learning() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = experiment_config(dir.path());
    let start = Instant::now();
    let molecules = enumerate_canonical(4, 12).map_err(|e| e.to_string())?;
    let n = molecules.len();
    let kernel = MgkKernel::new(molecules, config.mgk.clone()).map_err(|e| e.to_string())?;
    let noise = config.gpr.al_noise;
    let al = &config.al;
    let state = AlState::init(n, al.thresholds[0], al.batch, al.seed).map_err(|e| e.to_string())?;
    let mut explorer = Explorer::new(state, &kernel, noise).map_err(|e| e.to_string())?;
    let mut steps = 0u64;
    let mut check = |s: &AlState| {
        steps += 1;
        s.check_partition()
    };
    let mut sets: Vec<BTreeSet<usize>> = Vec::new();
    let mut sizes = Vec::new();
    for (k, &threshold) in al.thresholds.iter().enumerate() {
        if k == 0 {
            explorer.run(1, &mut check)
        } else {
            explorer.continue_to(threshold, 1, &mut check)
        }
        .map_err(|e| format!("threshold {threshold}: {e}"))?;
        let state = explorer.state();
        ensure(state.is_terminal(), || "pool not empty".into())?;
        state.check_partition().map_err(|e| e.to_string())?;
        let worst = abandoned_variances(state, &kernel, noise)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(worst < threshold, || {
            format!("abandoned variance {worst} at threshold {threshold}")
        })?;
        let selected: BTreeSet<usize> = state.selected().iter().copied().collect();
        if let Some(previous) = sets.last() {
            ensure(previous.is_subset(&selected), || {
                format!("stage {k} lost molecules of stage {}", k - 1)
            })?;
        }
        sizes.push(selected.len());
        sets.push(selected);
    }
    let elapsed = start.elapsed();
    ensure(sizes[0] > 2 && sizes[0] < n, || format!("|S(0.5)| = {}", sizes[0]))?;
    ensure(elapsed <= TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{n} molecules, |S| per stage {sizes:?}, {steps} checked steps, nested, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn al_beats_random(out_dir: &Path) -> Outcome {
    let mut config = experiment_config(out_dir);
    config.al.thresholds.truncate(1);
    let report = compare_al_random(&config).map_err(|e| e.to_string())?;
    let detail: Vec<String> = report
        .median_rmse
        .iter()
        .map(|m| format!("{} {:.3}/{:.3}", m.property.name(), m.al, m.random))
        .collect();
    ensure(report.per_seed.len() == 5, || "expected 5 seeds".into())?;
    ensure(report.al_wins() >= 2, || format!("AL wins {} of 3: {}", report.al_wins(), detail.join(", ")))?;
    Ok(format!(
        "AL wins {} of 3 (median RMSE AL/random: {})",
        report.al_wins(),
        detail.join(", ")
    ))
}

fn data_efficiency(out_dir: &Path) -> Outcome {
    let mut config = experiment_config(out_dir);
    config.al.thresholds = vec![0.5];
    let out = run_alms(&config).map_err(|e| e.to_string())?;
    let stage = &out.report.stages[0];
    let fraction = stage.n_selected as f64 / out.report.n_molecules as f64;
    ensure(out.report.n_molecules == 661, || format!("{} molecules", out.report.n_molecules))?;
    ensure(fraction < 0.4, || format!("training fraction {fraction:.3}"))?;
    ensure(stage.n_test_molecules == 200, || format!("{} test molecules", stage.n_test_molecules))?;
    ensure(stage.properties.len() == PROPERTIES.len(), || "missing properties".into())?;
    let r2: Vec<String> = stage
        .properties
        .iter()
        .map(|pm| format!("{} {:.4}", pm.property.name(), pm.metrics.r2))
        .collect();
    for pm in &stage.properties {
        ensure(pm.metrics.r2 > 0.95, || format!("R2 {}", r2.join(", ")))?;
    }
    Ok(format!(
        "{} of 661 selected ({:.1}%), R2 on 200 held-out: {}",
        stage.n_selected,
        100.0 * fraction,
        r2.join(", ")
    ))
}

fn thermo_formulas() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    ensure(combine_heat_capacity(0.0, 0.0, 0.0, 0.0, 0.0) == 0.0, || "zero Cp".into())?;
    ensure(close(combine_heat_capacity(12.47, 12.47, 0.0, 0.0, 8.314), 33.254), || "Cp sum".into())?;
    let rt = GAS_CONSTANT * 300.0 / 1000.0;
    ensure(close(hov_corrected(0.0, 300.0, 0), rt), || "HOV without correction".into())?;
    ensure(close(hov_corrected(0.0, 300.0, 0), 2.494338785), || "HOV value".into())?;
    ensure(close(hov_corrected(-37.5, 300.0, 15), 37.5), || "HOV with n=15".into())?;
    let ce = |n: u32| hov_corrected(0.0, 300.0, n) - rt;
    ensure(close(ce(8), 2.0 * ce(4)), || "correction not linear".into())?;

    let mol = CanonicalSmiles::canonicalize("CCCC").map_err(|e| e.to_string())?;
    let fixture = |density: &dyn Fn(usize) -> f64| -> Vec<PropertyRecord> {
        temperature_grid(400.0)
            .into_iter()
            .enumerate()
            .map(|(i, t)| PropertyRecord {
                molecule: mol.clone(),
                temperature: t,
                pressure: 1.0,
                density: density(i),
                heat_capacity: oracle_heat_capacity(4.0, t),
                hov: oracle_hov(4.0, t),
            })
            .collect()
    };
    let qc = |grid: &[PropertyRecord], diffusion| qc_evaluate(grid, diffusion).map_err(|e| e.to_string());
    let good = fixture(&|i| 700.0 - 5.0 * i as f64);
    ensure(qc(&good, None)?.passed(), || "good series failed".into())?;
    ensure(qc(&good, Some(1e-9))?.failures() == vec!["solid"], || "solid gate".into())?;
    let vapor = qc(&fixture(&|_| 40.0), None)?;
    ensure(vapor.vapor == Check::Fail, || "vapor gate".into())?;
    let spike = qc(&fixture(&|i| if i == 7 { 900.0 } else { 700.0 - 5.0 * i as f64 }), None)?;
    ensure(spike.monotonic == Check::Fail && spike.vapor == Check::Pass, || "spike".into())?;
    let step = qc(&fixture(&|i| 700.0 - 0.01 * i as f64 - if i < 8 { 0.0 } else { 50.0 }), None)?;
    ensure(step.monotonic == Check::Pass && step.quadratic_fit == Check::Fail, || "fit gate".into())?;
    ensure(qc_evaluate(&good[..15], None).is_err(), || "short series accepted".into())?;
    for m in enumerate_canonical(4, 12).map_err(|e| e.to_string())? {
        let s = simulate_series(&m.to_graph(), 0.0, 42).map_err(|e| e.to_string())?;
        ensure(s.qc.passed(), || format!("noiseless {} failed QC", m.as_str()))?;
    }
    Ok("combiners match hand arithmetic; 6 QC fixtures and 661 noiseless series classified".into())
}

fn files_of(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.is_file())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let bytes = std::fs::read(&p).expect("readable");
            (name, bytes)
        })
        .collect()
}

fn determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/c4-c12.toml");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dirs: Vec<PathBuf> = ["a", "b"].iter().map(|d| root.path().join(d)).collect();
    for dir in &dirs {
        let status = alms()
            .arg("--config")
            .arg(&config)
            .arg("--out-dir")
            .arg(dir)
            .arg("run-all")
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("run-all exited with {status}"))?;
    }
    let mut a = files_of(&dirs[0]);
    let mut b = files_of(&dirs[1]);
    a.remove("runtime.json");
    b.remove("runtime.json");
    let names: Vec<&String> = a.keys().collect();
    ensure(a.keys().eq(b.keys()), || "different file sets".into())?;
    for (name, bytes) in &a {
        ensure(&b[name] == bytes, || format!("{name} differs"))?;
    }
    for required in ["report.json", "summary.csv"] {
        ensure(a.contains_key(required), || format!("{required} missing"))?;
    }
    ensure(a.keys().any(|k| k.starts_with("dataset-")), || "dataset missing".into())?;
    Ok(format!("{} artifacts byte-identical across two runs", names.len()))
}

fn main() -> ExitCode {
    let shared = tempfile::tempdir().expect("temporary directory");
    let shared_dir = shared.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("enumeration", Box::new(enumeration)),
        ("kernel correctness", Box::new(kernel_correctness)),
        ("regression", Box::new(regression)),
        ("active-learning soundness", Box::new(active_learning)),
        ("active learning beats random", Box::new({
            let d = shared_dir.clone();
            move || al_beats_random(&d)
        })),
        ("data efficiency", Box::new({
            let d = shared_dir.clone();
            move || data_efficiency(&d)
        })),
        ("thermodynamic formulas", Box::new(thermo_formulas)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
