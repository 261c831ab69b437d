//! Molecular graphs from SMILES and structural distances between them.

mod graph;
pub mod mces;
pub mod smiles;

pub use graph::{Atom, Bond, BondOrder, MolGraph};
pub use mces::{
    mces_distance, mces_lower_bound, mces_smiles, mean_mces_at_1, McesConfig, McesResult,
};
pub use smiles::parse_smiles;
