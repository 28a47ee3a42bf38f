//! Synthetic thermodynamic property oracle, combiners and QC gates.
//!
//! The oracle stands in for molecular simulation: it maps an alkane's
//! carbon count, Wiener index and methyl fraction to quadratic-in-temperature
//! liquid density, isobaric heat capacity and heat of vaporization at 1 bar.
//! Its coefficients are invented; only the ordering (branched isomers are
//! lighter and boil earlier) is meant to be physically plausible.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::molspace::{descriptors, CanonicalSmiles, Descriptors, MolecularGraph};

/// Number of temperatures per molecule.
pub const GRID_POINTS: usize = 16;
/// Lower and upper grid bounds as fractions of the critical temperature.
pub const GRID_LOW: f64 = 0.4;
pub const GRID_HIGH: f64 = 0.9;
/// Molar gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314462618;
pub const PRESSURE_BAR: f64 = 1.0;

pub const VAPOR_DENSITY_LIMIT: f64 = 50.0;
/// Self-diffusion coefficient below which a liquid is deemed solid, cm²/s.
pub const SOLID_DIFFUSION_LIMIT: f64 = 1e-8;
pub const MIN_FIT_R2: f64 = 0.98;

/// Properties of one molecule at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub molecule: CanonicalSmiles,
    /// K.
    pub temperature: f64,
    /// bar.
    pub pressure: f64,
    /// kg/m³.
    pub density: f64,
    /// J/(mol·K).
    pub heat_capacity: f64,
    /// kJ/mol.
    pub hov: f64,
}

/// Outcome of one QC gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    Pass,
    Fail,
    NotApplicable,
}

impl Check {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Check::Pass
        } else {
            Check::Fail
        }
    }

    pub fn failed(self) -> bool {
        self == Check::Fail
    }
}

/// Per-gate QC flags. The kinetic-energy distribution and equilibration
/// gates need trajectories and are always not applicable here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcStatus {
    pub kinetic_energy: Check,
    pub vapor: Check,
    pub solid: Check,
    pub equilibration: Check,
    pub monotonic: Check,
    pub quadratic_fit: Check,
}

impl QcStatus {
    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Names of the failing gates.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("kinetic_energy", self.kinetic_energy),
            ("vapor", self.vapor),
            ("solid", self.solid),
            ("equilibration", self.equilibration),
            ("monotonic", self.monotonic),
            ("quadratic_fit", self.quadratic_fit),
        ]
        .into_iter()
        .filter(|(_, c)| c.failed())
        .map(|(name, _)| name)
        .collect()
    }
}

/// Grid of property records for one molecule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoSeries {
    pub molecule: CanonicalSmiles,
    pub critical_temperature: f64,
    pub grid: Vec<PropertyRecord>,
    pub qc: QcStatus,
}

/// Analytic critical-temperature surrogate, K.
pub fn synth_critical_temperature(d: &Descriptors) -> f64 {
    let n = d.n_carbons as f64;
    120.0 + 42.0 * n.powf(0.75) + 8.0 * (1.0 + d.wiener_index as f64 / n).ln()
}

/// Evenly spaced grid from `0.4·tc` to `0.9·tc` inclusive.
pub fn temperature_grid(tc: f64) -> Vec<f64> {
    let lo = GRID_LOW * tc;
    let hi = GRID_HIGH * tc;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS)
        .map(|i| if i == GRID_POINTS - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

pub fn oracle_density(n: f64, branch: f64, t: f64) -> f64 {
    (840.0 + 2.5 * n - 60.0 * branch) - 0.55 * t - 4e-4 * t * t
}

pub fn oracle_heat_capacity(n: f64, t: f64) -> f64 {
    (25.0 + 31.0 * n) + 0.08 * n * t + 1e-4 * n * t * t
}

pub fn oracle_hov(n: f64, t: f64) -> f64 {
    (8.0 + 4.6 * n) - 0.01 * n * t - 2e-5 * t * t
}

fn noise_rng(seed: u64, smiles: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(smiles.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Runs the oracle over the temperature grid and evaluates QC. With
/// `noise_sigma > 0` each property value is multiplied by `1 + σ·ε` with
/// standard-normal `ε` drawn from a stream keyed by `(seed, smiles)`.
pub fn simulate_series(g: &MolecularGraph, noise_sigma: f64, seed: u64) -> Result<ThermoSeries> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!("noise must be finite and non-negative, got {noise_sigma}")));
    }
    let molecule = crate::molspace::to_canonical_smiles(g)?;
    let d = descriptors(g);
    let n = d.n_carbons as f64;
    let branch = d.n_methyl as f64 / n;
    let tc = synth_critical_temperature(&d);
    let mut rng = noise_rng(seed, molecule.as_str());
    let mut jitter = |v: f64| {
        if noise_sigma > 0.0 {
            let e: f64 = StandardNormal.sample(&mut rng);
            v * (1.0 + noise_sigma * e)
        } else {
            v
        }
    };
    let grid = temperature_grid(tc)
        .into_iter()
        .map(|t| PropertyRecord {
            molecule: molecule.clone(),
            temperature: t,
            pressure: PRESSURE_BAR,
            density: jitter(oracle_density(n, branch, t)),
            heat_capacity: jitter(oracle_heat_capacity(n, t)),
            hov: jitter(oracle_hov(n, t)),
        })
        .collect::<Vec<_>>();
    let qc = qc_evaluate(&grid, None)?;
    Ok(ThermoSeries {
        molecule,
        critical_temperature: tc,
        grid,
        qc,
    })
}

/// Isobaric heat capacity as the sum of translational, rotational and
/// vibrational parts plus the temperature derivatives of the intermolecular
/// energy and of `P·V`.
pub fn combine_heat_capacity(
    c_trans: f64,
    c_rot: f64,
    c_vib: f64,
    d_u_inter_dt: f64,
    p_dv_dt: f64,
) -> f64 {
    c_trans + c_rot + c_vib + d_u_inter_dt + p_dv_dt
}

/// Heat of vaporization in kJ/mol from the intermolecular energy per
/// molecule `u_inter` (kJ/mol), with the size correction `-(n_C/15)·R·T`.
pub fn hov_corrected(u_inter: f64, temperature: f64, n_carbons: u32) -> f64 {
    let rt = GAS_CONSTANT * 1e-3 * temperature;
    let correction = -(n_carbons as f64 / 15.0) * rt;
    rt - u_inter + correction
}

/// Coefficient of determination of the least-squares quadratic fit of `ys`
/// against `xs`. A constant series fits exactly and gives 1.
pub fn quadratic_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    // centre and scale x so the normal equations stay well conditioned
    let mx = xs.iter().sum::<f64>() / n;
    let sx = xs.iter().map(|x| (x - mx).abs()).fold(0.0, f64::max).max(1e-300);
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let u = (x - mx) / sx;
        let row = Vector3::new(1.0, u, u * u);
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata
        .cholesky()
        .map(|c| c.solve(&aty))
        .or_else(|| ata.lu().solve(&aty))
        .unwrap_or_else(Vector3::zeros);
    let my = ys.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let u = (x - mx) / sx;
        let fit = coef[0] + coef[1] * u + coef[2] * u * u;
        ss_res += (y - fit).powi(2);
        ss_tot += (y - my).powi(2);
    }
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

fn strictly_monotone(ys: &[f64]) -> bool {
    let inc = ys.windows(2).all(|w| w[1] > w[0]);
    let dec = ys.windows(2).all(|w| w[1] < w[0]);
    inc || dec
}

/// Applies the property-series QC gates to a 16-point grid. `diffusion` is
/// the self-diffusion coefficient in cm²/s, if known.
pub fn qc_evaluate(grid: &[PropertyRecord], diffusion: Option<f64>) -> Result<QcStatus> {
    if grid.len() != GRID_POINTS {
        return Err(Error::invalid(format!(
            "QC needs {GRID_POINTS} grid points, got {}",
            grid.len()
        )));
    }
    let ts: Vec<f64> = grid.iter().map(|r| r.temperature).collect();
    let series: [Vec<f64>; 3] = [
        grid.iter().map(|r| r.density).collect(),
        grid.iter().map(|r| r.heat_capacity).collect(),
        grid.iter().map(|r| r.hov).collect(),
    ];
    Ok(QcStatus {
        kinetic_energy: Check::NotApplicable,
        vapor: Check::from_pass(series[0].iter().all(|&d| d >= VAPOR_DENSITY_LIMIT)),
        solid: match diffusion {
            Some(d) => Check::from_pass(d >= SOLID_DIFFUSION_LIMIT),
            None => Check::NotApplicable,
        },
        equilibration: Check::NotApplicable,
        monotonic: Check::from_pass(series.iter().all(|s| strictly_monotone(s))),
        quadratic_fit: Check::from_pass(
            series.iter().all(|s| quadratic_fit_r2(&ts, s) >= MIN_FIT_R2),
        ),
    })
}

/// Column header of the dataset CSV.
pub const DATASET_HEADER: &str =
    "smiles,temperature_K,pressure_bar,density_kgm3,cp_Jmolk,hvap_kJmol,qc_pass";

/// One dataset row: a property record plus its molecule's overall QC verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRow {
    pub record: PropertyRecord,
    pub qc_pass: bool,
}

/// Flattens series into dataset rows in the given order.
pub fn dataset_rows(series: &[ThermoSeries]) -> Vec<DatasetRow> {
    series
        .iter()
        .flat_map(|s| {
            let pass = s.qc.passed();
            s.grid.iter().map(move |r| DatasetRow {
                record: r.clone(),
                qc_pass: pass,
            })
        })
        .collect()
}

pub fn write_dataset(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(&tmp, e);
    writeln!(w, "{DATASET_HEADER}").map_err(io)?;
    for row in rows {
        let r = &row.record;
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            r.molecule, r.temperature, r.pressure, r.density, r.heat_capacity, r.hov, row.qc_pass
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |detail: String| Error::Format {
        what: "dataset",
        detail,
    };
    let header = lines.next().transpose().map_err(|e| Error::io(path, e))?;
    if header.as_deref() != Some(DATASET_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let lineno = k + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(format!("line {lineno}: expected 7 fields")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| bad(format!("line {lineno}: bad number {s:?}")))
        };
        let molecule = CanonicalSmiles::canonicalize(fields[0])?;
        let qc_pass = fields[6]
            .parse()
            .map_err(|_| bad(format!("line {lineno}: bad flag {:?}", fields[6])))?;
        rows.push(DatasetRow {
            record: PropertyRecord {
                molecule,
                temperature: num(fields[1])?,
                pressure: num(fields[2])?,
                density: num(fields[3])?,
                heat_capacity: num(fields[4])?,
                hov: num(fields[5])?,
            },
            qc_pass,
        });
    }
    Ok(rows)
}
