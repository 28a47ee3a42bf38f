//! Explorative active learning over a fixed candidate set.
//!
//! Molecules are addressed by id, their position in the candidate list.
//! Each iteration samples up to `batch` pool molecules, evaluates their
//! posterior variance against the selected set, promotes the most uncertain
//! one when it exceeds the threshold and abandons every sampled molecule
//! whose variance is already below it. Only kernel values are consulted, never
//! property data, so selection can finish before any simulation starts.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::{GprModel, Kernel};
use crate::linalg::Cholesky;
use crate::molspace::{sort_molecules, CanonicalSmiles};

/// Partition of the candidate set into selected, pool and abandoned ids.
#[derive(Clone, Debug, PartialEq)]
pub struct AlState {
    selected: Vec<usize>,
    pool: BTreeSet<usize>,
    abandoned: BTreeSet<usize>,
    n_molecules: usize,
    threshold: f64,
    batch: usize,
    seed: u64,
    rng: ChaCha8Rng,
    iteration: u64,
}

impl AlState {
    /// Picks two random molecules as the initial selected set.
    pub fn init(n_molecules: usize, threshold: f64, batch: usize, seed: u64) -> Result<Self> {
        if n_molecules < 2 {
            return Err(Error::invalid(format!(
                "active learning needs at least 2 molecules, got {n_molecules}"
            )));
        }
        check_threshold(threshold)?;
        if batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let selected = index::sample(&mut rng, n_molecules, 2).into_vec();
        let pool = (0..n_molecules).filter(|i| !selected.contains(i)).collect();
        Ok(AlState {
            selected,
            pool,
            abandoned: BTreeSet::new(),
            n_molecules,
            threshold,
            batch,
            seed,
            rng,
            iteration: 0,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn pool(&self) -> &BTreeSet<usize> {
        &self.pool
    }

    pub fn abandoned(&self) -> &BTreeSet<usize> {
        &self.abandoned
    }

    pub fn n_molecules(&self) -> usize {
        self.n_molecules
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn is_terminal(&self) -> bool {
        self.pool.is_empty()
    }

    /// Checks that selected, pool and abandoned partition `0..n_molecules`.
    pub fn check_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.n_molecules];
        let all = self
            .selected
            .iter()
            .chain(&self.pool)
            .chain(&self.abandoned);
        let mut count = 0;
        for &i in all {
            if i >= self.n_molecules || seen[i] {
                return Err(Error::invalid(format!("molecule {i} is misplaced")));
            }
            seen[i] = true;
            count += 1;
        }
        if count != self.n_molecules {
            return Err(Error::invalid("partition does not cover every molecule"));
        }
        Ok(())
    }

    /// Returns the abandoned molecules to the pool under a lower threshold.
    pub(crate) fn reopen(&mut self, lower_threshold: f64) -> Result<()> {
        if !self.is_terminal() {
            return Err(Error::invalid("can only continue from a terminal state"));
        }
        check_threshold(lower_threshold)?;
        if !(lower_threshold < self.threshold) {
            return Err(Error::invalid(format!(
                "new threshold {lower_threshold} is not below {}",
                self.threshold
            )));
        }
        self.pool = std::mem::take(&mut self.abandoned);
        self.threshold = lower_threshold;
        Ok(())
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold >= 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold must be finite and non-negative, got {threshold}")))
    }
}

/// What a single iteration did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub sampled: usize,
    pub max_variance: f64,
    pub added: Option<usize>,
    pub abandoned: Vec<usize>,
}

/// Active-learning driver: the state plus the incrementally grown Cholesky
/// factor of `K_SS + noise·I` and cached partial solves `L⁻¹ k_S,t` for pool
/// molecules.
pub struct Explorer<K> {
    kernel: K,
    noise: f64,
    state: AlState,
    factor: Cholesky,
    solves: HashMap<usize, Vec<f64>>,
    clamped: usize,
}

impl<K: Kernel<usize>> Explorer<K> {
    pub fn new(state: AlState, kernel: K, noise: f64) -> Result<Self> {
        if !(noise >= 0.0) {
            return Err(Error::invalid("noise must be non-negative"));
        }
        state.check_partition()?;
        let mut explorer = Explorer {
            kernel,
            noise,
            state,
            factor: Cholesky::new(),
            solves: HashMap::new(),
            clamped: 0,
        };
        let selected = explorer.state.selected.clone();
        for (k, &id) in selected.iter().enumerate() {
            let mut row = Vec::with_capacity(k);
            explorer.extend_solves(std::slice::from_mut(&mut (id, &mut row)))?;
            let diag = explorer.kernel.diag(&[id])?[0] + noise;
            explorer
                .factor
                .push_solved(&row, diag)
                .map_err(|_| Error::Factorization { jitter: 0.0 })?;
        }
        Ok(explorer)
    }

    pub fn state(&self) -> &AlState {
        &self.state
    }

    pub fn into_state(self) -> AlState {
        self.state
    }

    /// Negative variances clamped to zero so far.
    pub fn clamped_variances(&self) -> usize {
        self.clamped
    }

    /// Extends every partial solve to the current selected-set size.
    fn extend_solves(&self, targets: &mut [(usize, &mut Vec<f64>)]) -> Result<()> {
        let full = self.factor.dim();
        let mut by_len: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, (_, v)) in targets.iter().enumerate() {
            if v.len() < full {
                by_len.entry(v.len()).or_default().push(k);
            }
        }
        let mut groups: Vec<_> = by_len.into_iter().collect();
        groups.sort_unstable_by_key(|(len, _)| *len);
        for (len, members) in groups {
            let cols: Vec<usize> = members.iter().map(|&k| targets[k].0).collect();
            let block = self.kernel.block(&self.state.selected[len..full], &cols)?;
            for (c, &k) in members.iter().enumerate() {
                self.factor
                    .extend_solve(targets[k].1, |i| block[(i - len, c)]);
            }
        }
        Ok(())
    }

    /// Posterior variances of `ids` against the current selected set.
    pub fn variances(&mut self, ids: &[usize]) -> Result<Vec<f64>> {
        let mut vecs: Vec<Vec<f64>> = ids
            .iter()
            .map(|id| self.solves.get(id).cloned().unwrap_or_default())
            .collect();
        {
            let mut targets: Vec<(usize, &mut Vec<f64>)> =
                ids.iter().copied().zip(vecs.iter_mut()).collect();
            self.extend_solves(&mut targets)?;
        }
        let prior = self.kernel.diag(ids)?;
        let mut out = Vec::with_capacity(ids.len());
        for ((&id, v), p) in ids.iter().zip(vecs).zip(prior) {
            let var = p - crate::linalg::dot(&v, &v);
            if self.state.pool.contains(&id) {
                self.solves.insert(id, v);
            }
            if var < 0.0 {
                self.clamped += 1;
                out.push(0.0);
            } else {
                out.push(var);
            }
        }
        Ok(out)
    }

    /// One iteration. On error the state is left untouched.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.state.pool.is_empty() {
            return Err(Error::invalid("pool is empty"));
        }
        let mut rng = self.state.rng.clone();
        let sample: Vec<usize> = if self.state.pool.len() > self.state.batch {
            let pool: Vec<usize> = self.state.pool.iter().copied().collect();
            let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), self.state.batch)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            picked.sort_unstable();
            picked
        } else {
            self.state.pool.iter().copied().collect()
        };

        let mut vecs: Vec<Vec<f64>> = sample
            .iter()
            .map(|id| self.solves.get(id).cloned().unwrap_or_default())
            .collect();
        {
            let mut targets: Vec<(usize, &mut Vec<f64>)> =
                sample.iter().copied().zip(vecs.iter_mut()).collect();
            self.extend_solves(&mut targets)?;
        }
        let prior = self.kernel.diag(&sample)?;
        let mut clamped = 0;
        let variances: Vec<f64> = vecs
            .iter()
            .zip(&prior)
            .map(|(v, p)| {
                let var = p - crate::linalg::dot(v, v);
                if var < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    var
                }
            })
            .collect();

        // sample is sorted, so strict comparison keeps the smallest id on ties
        let mut best = 0;
        for (k, &u) in variances.iter().enumerate() {
            if u > variances[best] {
                best = k;
            }
        }
        let max_variance = variances[best];
        let threshold = self.state.threshold;

        let mut factor = None;
        let added = if max_variance > threshold {
            let id = sample[best];
            let diag = prior[best] + self.noise;
            let mut grown = self.factor.clone();
            grown
                .push_solved(&vecs[best], diag)
                .map_err(|_| Error::Factorization { jitter: 0.0 })?;
            factor = Some(grown);
            Some(id)
        } else {
            None
        };
        let mut dropped: Vec<usize> = sample
            .iter()
            .zip(&variances)
            .filter(|&(_, &u)| u < threshold)
            .map(|(&id, _)| id)
            .collect();
        if added.is_none() && dropped.is_empty() {
            // every sampled variance sits exactly at the threshold; it can
            // never rise above it again
            dropped = sample.clone();
        }

        // commit
        if let Some(f) = factor {
            self.factor = f;
        }
        self.state.rng = rng;
        self.clamped += clamped;
        for (id, v) in sample.iter().zip(vecs) {
            self.solves.insert(*id, v);
        }
        if let Some(id) = added {
            self.state.pool.remove(&id);
            self.state.selected.push(id);
            self.solves.remove(&id);
        }
        for id in &dropped {
            self.state.pool.remove(id);
            self.state.abandoned.insert(*id);
            self.solves.remove(id);
        }
        self.state.iteration += 1;
        Ok(StepOutcome {
            sampled: sample.len(),
            max_variance,
            added,
            abandoned: dropped,
        })
    }

    /// Iterates until the pool is empty, calling `checkpoint` every
    /// `checkpoint_every` iterations (0 disables it) and once at the end.
    pub fn run(
        &mut self,
        checkpoint_every: u64,
        mut checkpoint: impl FnMut(&AlState) -> Result<()>,
    ) -> Result<()> {
        while !self.state.pool.is_empty() {
            self.step()?;
            if checkpoint_every > 0 && self.state.iteration % checkpoint_every == 0 {
                checkpoint(&self.state)?;
            }
        }
        checkpoint(&self.state)?;
        log::info!(
            "active learning at threshold {} finished: {} selected, {} abandoned, {} iterations",
            self.state.threshold,
            self.state.selected.len(),
            self.state.abandoned.len(),
            self.state.iteration
        );
        Ok(())
    }

    /// Lowers the threshold of a terminal state and runs to completion.
    pub fn continue_to(
        &mut self,
        lower_threshold: f64,
        checkpoint_every: u64,
        checkpoint: impl FnMut(&AlState) -> Result<()>,
    ) -> Result<()> {
        self.state.reopen(lower_threshold)?;
        self.run(checkpoint_every, checkpoint)
    }
}

/// Initial state; see [`AlState::init`].
pub fn al_init(n_molecules: usize, threshold: f64, batch: usize, seed: u64) -> Result<AlState> {
    AlState::init(n_molecules, threshold, batch, seed)
}

/// A single iteration from `state`.
pub fn al_step<K: Kernel<usize>>(state: &AlState, kernel: K, noise: f64) -> Result<AlState> {
    let mut explorer = Explorer::new(state.clone(), kernel, noise)?;
    explorer.step()?;
    Ok(explorer.into_state())
}

/// Runs from scratch to a terminal state.
pub fn al_run<K: Kernel<usize>>(
    n_molecules: usize,
    threshold: f64,
    batch: usize,
    seed: u64,
    kernel: K,
    noise: f64,
) -> Result<AlState> {
    let state = AlState::init(n_molecules, threshold, batch, seed)?;
    let mut explorer = Explorer::new(state, kernel, noise)?;
    explorer.run(0, |_| Ok(()))?;
    Ok(explorer.into_state())
}

/// Resumes a terminal state at a strictly lower threshold.
pub fn al_continue<K: Kernel<usize>>(
    terminal: &AlState,
    lower_threshold: f64,
    kernel: K,
    noise: f64,
) -> Result<AlState> {
    let mut explorer = Explorer::new(terminal.clone(), kernel, noise)?;
    explorer.continue_to(lower_threshold, 0, |_| Ok(()))?;
    Ok(explorer.into_state())
}

/// Posterior variance of every abandoned molecule under a model freshly fitted
/// on the selected set, as `(id, variance)` pairs.
pub fn abandoned_variances<K: Kernel<usize>>(
    state: &AlState,
    kernel: K,
    noise: f64,
) -> Result<Vec<(usize, f64)>> {
    let abandoned: Vec<usize> = state.abandoned.iter().copied().collect();
    let zeros = vec![0.0; state.selected.len()];
    let model = GprModel::fit(kernel, state.selected.clone(), &zeros, noise)?;
    let vars = model.predict_variance(&abandoned)?;
    Ok(abandoned.into_iter().zip(vars).collect())
}

const CHECKPOINT_FORMAT: &str = "alms-al-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Structured-text (JSON) checkpoint. Molecule ids are positions in the
/// candidate list sorted by carbon count then canonical string, which is
/// recoverable from the union of the three lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format: String,
    pub version: u32,
    pub threshold: f64,
    pub batch: usize,
    pub seed: u64,
    /// ChaCha8 word position, as a decimal string.
    pub rng_word_pos: String,
    pub iteration: u64,
    pub noise: f64,
    pub kernel_fingerprint: String,
    pub selected: Vec<CanonicalSmiles>,
    pub pool: Vec<CanonicalSmiles>,
    pub abandoned: Vec<CanonicalSmiles>,
}

impl CheckpointFile {
    /// `molecules` must be the sorted candidate list the state indexes.
    pub fn from_state(
        state: &AlState,
        molecules: &[CanonicalSmiles],
        noise: f64,
        kernel_fingerprint: &str,
    ) -> Self {
        let name = |&i: &usize| molecules[i].clone();
        CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            threshold: state.threshold,
            batch: state.batch,
            seed: state.seed,
            rng_word_pos: state.rng.get_word_pos().to_string(),
            iteration: state.iteration,
            noise,
            kernel_fingerprint: kernel_fingerprint.into(),
            selected: state.selected.iter().map(name).collect(),
            pool: state.pool.iter().map(name).collect(),
            abandoned: state.abandoned.iter().map(name).collect(),
        }
    }

    /// Rebuilds the candidate list and the state.
    pub fn to_state(&self) -> Result<(Vec<CanonicalSmiles>, AlState)> {
        let bad = |detail: String| Error::Format {
            what: "checkpoint",
            detail,
        };
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(bad(format!(
                "unsupported format {} v{}",
                self.format, self.version
            )));
        }
        let mut molecules: Vec<CanonicalSmiles> = self
            .selected
            .iter()
            .chain(&self.pool)
            .chain(&self.abandoned)
            .cloned()
            .collect();
        let total = molecules.len();
        sort_molecules(&mut molecules);
        if molecules.len() != total {
            return Err(bad("a molecule appears more than once".into()));
        }
        let index: HashMap<&CanonicalSmiles, usize> =
            molecules.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let ids = |list: &[CanonicalSmiles]| -> Vec<usize> { list.iter().map(|m| index[m]).collect() };
        let word_pos: u128 = self
            .rng_word_pos
            .parse()
            .map_err(|_| bad(format!("bad rng_word_pos {:?}", self.rng_word_pos)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(word_pos);
        let state = AlState {
            selected: ids(&self.selected),
            pool: ids(&self.pool).into_iter().collect(),
            abandoned: ids(&self.abandoned).into_iter().collect(),
            n_molecules: total,
            threshold: self.threshold,
            batch: self.batch,
            seed: self.seed,
            rng,
            iteration: self.iteration,
        };
        if state.selected.len() < 2 {
            return Err(bad("fewer than two selected molecules".into()));
        }
        Ok((molecules, state))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "checkpoint",
            detail: e.to_string(),
        })
    }
}
