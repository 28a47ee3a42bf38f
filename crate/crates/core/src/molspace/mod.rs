//! Alkane molecular graphs: parsing, canonical SMILES, isomer enumeration
//! and topological descriptors.

mod canon;
mod descriptors;
mod enumerate;
mod graph;
mod smiles;

pub use canon::to_canonical_smiles;
pub use descriptors::{descriptors, Descriptors};
pub use enumerate::{
    enumerate_alkanes, enumerate_canonical, enumerate_with_limit, MAX_CARBONS_LIMIT,
};
pub use graph::{Atom, Bond, BondOrder, Element, GraphError, MolecularGraph};
pub use smiles::{parse_smiles, CanonicalSmiles, SmilesError};

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Writes one canonical SMILES per line.
pub fn write_molecule_list(path: &Path, molecules: &[CanonicalSmiles]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for m in molecules {
        writeln!(w, "{m}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a molecule list, canonicalizing every non-blank line. Lines starting
/// with `#` are comments.
pub fn read_molecule_list(path: &Path) -> Result<Vec<CanonicalSmiles>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(CanonicalSmiles::canonicalize(line)?);
    }
    Ok(out)
}

/// Sorts by carbon count, then canonical string, and removes duplicates.
pub fn sort_molecules(molecules: &mut Vec<CanonicalSmiles>) {
    molecules.sort_by(|a, b| {
        a.n_carbons()
            .cmp(&b.n_carbons())
            .then_with(|| a.as_str().cmp(b.as_str()))
    });
    molecules.dedup();
}
