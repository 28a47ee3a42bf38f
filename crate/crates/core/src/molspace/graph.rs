use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chemical element, stored as its atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element(pub u8);

impl Element {
    pub const HYDROGEN: Element = Element(1);
    pub const CARBON: Element = Element(6);
    pub const NITROGEN: Element = Element(7);
    pub const OXYGEN: Element = Element(8);

    /// Typical valence used to derive implicit hydrogens.
    pub fn valence(self) -> u8 {
        match self.0 {
            1 => 1,
            6 => 4,
            7 => 3,
            8 => 2,
            _ => 4,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self.0 {
            1 => "H",
            6 => "C",
            7 => "N",
            8 => "O",
            _ => "?",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single = 1,
    Double = 2,
    Triple = 3,
}

impl BondOrder {
    pub fn valence(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub heavy_degree: u8,
    pub h_count: u8,
}

impl Atom {
    pub fn carbon(heavy_degree: u8) -> Self {
        Atom {
            element: Element::CARBON,
            heavy_degree,
            h_count: 4u8.saturating_sub(heavy_degree),
        }
    }
}

/// An undirected bond; endpoints are stored low to high.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        let endpoints = if a <= b { (a, b) } else { (b, a) };
        Bond { endpoints, order }
    }

    pub fn single(a: usize, b: usize) -> Self {
        Bond::new(a, b, BondOrder::Single)
    }

    pub fn endpoints(&self) -> (usize, usize) {
        self.endpoints
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no atoms")]
    Empty,
    #[error("bond {0}-{1} references a missing atom")]
    DanglingBond(usize, usize),
    #[error("self-loop on atom {0}")]
    SelfLoop(usize),
    #[error("duplicate bond {0}-{1}")]
    DuplicateBond(usize, usize),
    #[error("atom {atom} exceeds valence {valence}")]
    Valence { atom: usize, valence: u8 },
    #[error("graph is not a tree ({vertices} vertices, {edges} edges, connected: {connected})")]
    NotATree {
        vertices: usize,
        edges: usize,
        connected: bool,
    },
    #[error("only carbon atoms joined by single bonds are supported here")]
    NotAnAlkane,
}

/// Heavy-atom graph of a molecule with per-vertex and per-edge features.
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// `adjacency[v]` lists `(neighbor, bond index)` pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    /// Builds a graph from element labels and bonds, deriving degrees and
    /// implicit hydrogen counts.
    pub fn new(elements: &[Element], bonds: Vec<Bond>) -> Result<Self, GraphError> {
        if elements.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = elements.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut used = vec![0u8; n];
        let mut seen = HashSet::with_capacity(bonds.len());
        for (idx, bond) in bonds.iter().enumerate() {
            let (a, b) = bond.endpoints;
            if b >= n {
                return Err(GraphError::DanglingBond(a, b));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !seen.insert((a, b)) {
                return Err(GraphError::DuplicateBond(a, b));
            }
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
            used[a] += bond.order.valence();
            used[b] += bond.order.valence();
        }
        let mut atoms = Vec::with_capacity(n);
        for (v, &element) in elements.iter().enumerate() {
            let valence = element.valence();
            if used[v] > valence {
                return Err(GraphError::Valence { atom: v, valence });
            }
            atoms.push(Atom {
                element,
                heavy_degree: adjacency[v].len() as u8,
                h_count: valence - used[v],
            });
        }
        Ok(MolecularGraph {
            atoms,
            bonds,
            adjacency,
        })
    }

    /// All-carbon, single-bonded graph on `n` vertices.
    pub fn alkane(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let bonds = edges.iter().map(|&(a, b)| Bond::single(a, b)).collect();
        MolecularGraph::new(&vec![Element::CARBON; n], bonds)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor, bond index)` pairs of vertex `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }

    pub fn is_tree(&self) -> bool {
        self.bonds.len() + 1 == self.atoms.len() && self.is_connected()
    }

    pub(crate) fn check_tree(&self) -> Result<(), GraphError> {
        if self.is_tree() {
            Ok(())
        } else {
            Err(GraphError::NotATree {
                vertices: self.atoms.len(),
                edges: self.bonds.len(),
                connected: self.is_connected(),
            })
        }
    }

    pub fn is_alkane(&self) -> bool {
        self.atoms.iter().all(|a| a.element == Element::CARBON)
            && self.bonds.iter().all(|b| b.order == BondOrder::Single)
            && self.is_tree()
    }

    /// Relabels vertices so that old vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let mut elements = vec![Element::CARBON; self.atoms.len()];
        for (v, atom) in self.atoms.iter().enumerate() {
            elements[perm[v]] = atom.element;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(perm[b.endpoints.0], perm[b.endpoints.1], b.order))
            .collect();
        MolecularGraph::new(&elements, bonds)
    }

    /// Plain neighbor lists, without bond indices.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        self.adjacency
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(u, _)| u).collect())
            .collect()
    }
}
