use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: &'static str,
    pub charge: i8,
    pub aromatic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// Labeled undirected heavy-atom graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, BondOrder)>>,
}

impl MolGraph {
    /// Builds a graph; bonds must reference valid atoms and form a simple graph.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for b in &bonds {
            assert!(
                b.a < atoms.len() && b.b < atoms.len() && b.a != b.b,
                "invalid bond {b:?}"
            );
            adjacency[b.a].push((b.b, b.order));
            adjacency[b.b].push((b.a, b.order));
        }
        MolGraph {
            atoms,
            bonds,
            adjacency,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, BondOrder)] {
        &self.adjacency[atom]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondOrder> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, o)| o)
    }

    /// Drops hydrogen atoms and their bonds, renumbering the rest.
    pub fn without_hydrogens(self) -> Self {
        if self.atoms.iter().all(|a| a.element != "H") {
            return self;
        }
        let mut remap = vec![usize::MAX; self.atoms.len()];
        let mut atoms = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if a.element != "H" {
                remap[i] = atoms.len();
                atoms.push(*a);
            }
        }
        let bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        MolGraph::new(atoms, bonds)
    }
}

impl fmt::Display for MolGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MolGraph({} atoms, {} bonds)",
            self.n_atoms(),
            self.n_bonds()
        )
    }
}
