//! Restricted SMILES grammar for acyclic alkanes: `C` atoms and parenthesized
//! branches. Everything else is rejected.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{Bond, Element, GraphError, MolecularGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("ring-closure token {token:?} at position {position} is not supported")]
    RingClosure { token: char, position: usize },
    #[error("unsupported token {token:?} at position {position}")]
    UnsupportedToken { token: char, position: usize },
    #[error("unbalanced parenthesis at position {position}")]
    UnbalancedParenthesis { position: usize },
    #[error("branch at position {position} has no atoms")]
    EmptyBranch { position: usize },
    #[error("branch at position {position} has no preceding atom")]
    DanglingBranch { position: usize },
    #[error("atom at position {position} exceeds valence 4")]
    Valence { position: usize },
}

/// Parses an alkane SMILES string into a heavy-atom graph.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut positions: Vec<usize> = Vec::new();
    let mut degree: Vec<u8> = Vec::new();
    let mut bonds = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut just_opened = false;

    for (position, token) in text.chars().enumerate() {
        match token {
            'C' => {
                let atom = positions.len();
                positions.push(position);
                degree.push(0);
                if let Some(p) = prev {
                    for v in [p, atom] {
                        degree[v] += 1;
                        if degree[v] > 4 {
                            return Err(SmilesError::Valence { position });
                        }
                    }
                    bonds.push(Bond::single(p, atom));
                }
                prev = Some(atom);
                just_opened = false;
            }
            '(' => {
                let Some(p) = prev else {
                    return Err(SmilesError::DanglingBranch { position });
                };
                if just_opened {
                    return Err(SmilesError::DanglingBranch { position });
                }
                stack.push(p);
                just_opened = true;
            }
            ')' => {
                if just_opened {
                    return Err(SmilesError::EmptyBranch { position });
                }
                let Some(p) = stack.pop() else {
                    return Err(SmilesError::UnbalancedParenthesis { position });
                };
                prev = Some(p);
            }
            '0'..='9' | '%' => return Err(SmilesError::RingClosure { token, position }),
            _ => return Err(SmilesError::UnsupportedToken { token, position }),
        }
    }
    if !stack.is_empty() {
        return Err(SmilesError::UnbalancedParenthesis {
            position: text.chars().count(),
        });
    }
    let elements = vec![Element::CARBON; positions.len()];
    MolecularGraph::new(&elements, bonds).map_err(|e| match e {
        GraphError::Valence { atom, .. } => SmilesError::Valence {
            position: positions[atom],
        },
        other => unreachable!("parser produced an invalid graph: {other}"),
    })
}

/// Canonical SMILES: identical for isomorphic alkanes, distinct otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalSmiles(String);

impl CanonicalSmiles {
    pub(crate) fn from_canonical(text: String) -> Self {
        CanonicalSmiles(text)
    }

    /// Parses and re-canonicalizes arbitrary alkane SMILES.
    pub fn canonicalize(text: &str) -> crate::Result<Self> {
        let g = parse_smiles(text)?;
        Ok(super::canon::to_canonical_smiles(&g)?)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Number of carbon atoms.
    pub fn n_carbons(&self) -> usize {
        self.0.bytes().filter(|&b| b == b'C').count()
    }

    pub fn to_graph(&self) -> MolecularGraph {
        parse_smiles(&self.0).expect("canonical SMILES always parses")
    }
}

impl fmt::Display for CanonicalSmiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CanonicalSmiles {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
