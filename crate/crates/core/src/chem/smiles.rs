//! SMILES subset parser producing heavy-atom graphs.
//!
//! Supported: organic-subset atoms and their aromatic forms, bracket atoms
//! (isotope, chirality, hydrogen count, charge and atom class are accepted;
//! only element, aromaticity and charge are kept), bonds `- = # :`, the
//! directional bonds `/ \` (read as default bonds), branches, ring closures
//! `0-9` and `%nn`, and `.` disconnections. Explicit hydrogens are removed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::graph::{Atom, Bond, BondOrder, MolGraph};

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const AROMATIC_BRACKET: &[(&str, &str)] = &[
    ("se", "Se"),
    ("as", "As"),
    ("te", "Te"),
    ("b", "B"),
    ("c", "C"),
    ("n", "N"),
    ("o", "O"),
    ("p", "P"),
    ("s", "S"),
];

fn element(symbol: &str) -> Option<&'static str> {
    ELEMENTS.iter().copied().find(|&e| e == symbol)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Clone, Copy)]
enum BondSym {
    Order(BondOrder),
    Directional,
}

fn err(position: usize, message: impl Into<String>) -> Error {
    Error::Smiles {
        position,
        message: message.into(),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.neighbors.push(Vec::new());
        self.atoms.len() - 1
    }

    fn add_bond(&mut self, a: usize, b: usize, sym: Option<BondSym>, pos: usize) -> Result<()> {
        if a == b {
            return Err(err(pos, "ring closure bonds an atom to itself"));
        }
        if self.neighbors[a].contains(&b) {
            return Err(err(pos, "duplicate bond"));
        }
        let order = match sym {
            Some(BondSym::Order(o)) => o,
            Some(BondSym::Directional) | None => {
                if self.atoms[a].aromatic && self.atoms[b].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }
        };
        self.neighbors[a].push(b);
        self.neighbors[b].push(a);
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn bond_symbol(&mut self) -> Option<BondSym> {
        let sym = match self.peek()? {
            b'-' => BondSym::Order(BondOrder::Single),
            b'=' => BondSym::Order(BondOrder::Double),
            b'#' => BondSym::Order(BondOrder::Triple),
            b':' => BondSym::Order(BondOrder::Aromatic),
            b'/' | b'\\' => BondSym::Directional,
            _ => return None,
        };
        self.pos += 1;
        Some(sym)
    }

    fn organic_atom(&mut self) -> Result<Option<Atom>> {
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let two = self.s.get(self.pos..self.pos + 2);
        let (symbol, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => ("Cl", false, 2),
            (b'B', Some(b"Br")) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (c, _) if c.is_ascii_alphabetic() || c == b'*' => {
                return Err(err(start, format!("unknown atom symbol {:?}", c as char)))
            }
            _ => return Ok(None),
        };
        self.pos += len;
        Ok(Some(Atom {
            element: symbol,
            charge: 0,
            aromatic,
        }))
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        self.pos += 1;
        self.digits(); // isotope
        let sym_start = self.pos;
        let rest = &self.s[self.pos..];
        let lower = AROMATIC_BRACKET
            .iter()
            .find(|(a, _)| rest.starts_with(a.as_bytes()));
        let (symbol, aromatic) = if let Some((a, e)) = lower {
            self.pos += a.len();
            (*e, true)
        } else {
            let upper = self
                .peek()
                .filter(u8::is_ascii_uppercase)
                .ok_or_else(|| err(sym_start, "expected element symbol"))?;
            let two = self
                .s
                .get(self.pos + 1)
                .filter(|c| c.is_ascii_lowercase())
                .map(|&l| [upper, l]);
            match two.and_then(|t| element(std::str::from_utf8(&t).ok()?)) {
                Some(e) => {
                    self.pos += 2;
                    (e, false)
                }
                None => {
                    let e =
                        element(std::str::from_utf8(&[upper]).unwrap_or("")).ok_or_else(|| {
                            err(sym_start, format!("unknown element {:?}", upper as char))
                        })?;
                    self.pos += 1;
                    (e, false)
                }
            }
        };
        // chirality
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        let rest = &self.s[self.pos..];
        if [b"TH", b"AL", b"SP", b"TB", b"OH"]
            .iter()
            .any(|tag| rest.starts_with(*tag))
        {
            self.pos += 2;
            self.digits();
        }
        // hydrogen count
        if self.peek() == Some(b'H') {
            self.pos += 1;
            self.digits();
        }
        // charge
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.digits() {
                charge = unit * n.min(15) as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }
        // atom class
        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits().is_none() {
                return Err(err(self.pos, "atom class needs digits"));
            }
        }
        if self.peek() != Some(b']') {
            return Err(err(
                self.pos,
                format!("unterminated bracket atom opened at {open}"),
            ));
        }
        self.pos += 1;
        Ok(Atom {
            element: symbol,
            charge: charge.clamp(-15, 15) as i8,
            aromatic,
        })
    }

    fn ring_label(&mut self) -> Result<Option<u32>> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                self.pos += 1;
                Ok(Some((c - b'0') as u32))
            }
            Some(b'%') => {
                let start = self.pos;
                let d = self.s.get(self.pos + 1..self.pos + 3);
                match d {
                    Some([a, b]) if a.is_ascii_digit() && b.is_ascii_digit() => {
                        self.pos += 3;
                        Ok(Some(((a - b'0') * 10 + (b - b'0')) as u32))
                    }
                    _ => Err(err(start, "ring label % needs two digits")),
                }
            }
            _ => Ok(None),
        }
    }

    fn parse(mut self) -> Result<MolGraph> {
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSym, usize)> = None;
        let mut rings: BTreeMap<u32, (usize, Option<BondSym>, usize)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let here = self.pos;
            match c {
                b'(' => {
                    let p = prev.ok_or_else(|| err(here, "branch without preceding atom"))?;
                    if pending.is_some() {
                        return Err(err(here, "bond before branch"));
                    }
                    stack.push((p, here));
                    self.pos += 1;
                }
                b')' => {
                    let (p, _) = stack.pop().ok_or_else(|| err(here, "unbalanced ')'"))?;
                    if pending.is_some() {
                        return Err(err(here, "dangling bond at end of branch"));
                    }
                    if self.s.get(here.wrapping_sub(1)) == Some(&b'(') {
                        return Err(err(here, "empty branch"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(err(here, "misplaced '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return Err(err(here, "consecutive bond symbols"));
                    }
                    if prev.is_none() {
                        return Err(err(here, "bond without preceding atom"));
                    }
                    let sym = self.bond_symbol().expect("bond char");
                    pending = Some((sym, here));
                }
                b'0'..=b'9' | b'%' => {
                    let atom = prev.ok_or_else(|| err(here, "ring closure without atom"))?;
                    let label = self.ring_label()?.expect("ring label");
                    let sym = pending.take().map(|(s, _)| s);
                    match rings.remove(&label) {
                        Some((other, other_sym, _)) => {
                            let sym = match (other_sym, sym) {
                                (Some(BondSym::Order(x)), Some(BondSym::Order(y))) if x != y => {
                                    return Err(err(here, "conflicting ring bond orders"))
                                }
                                (Some(BondSym::Order(x)), _) => Some(BondSym::Order(x)),
                                (_, s) => s.or(other_sym),
                            };
                            self.add_bond(other, atom, sym, here)?;
                        }
                        None => {
                            rings.insert(label, (atom, sym, here));
                        }
                    }
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.attach(atom, &mut prev, &mut pending, here)?;
                }
                _ => match self.organic_atom()? {
                    Some(atom) => self.attach(atom, &mut prev, &mut pending, here)?,
                    None => return Err(err(here, format!("unexpected character {:?}", c as char))),
                },
            }
        }

        if let Some(&(_, pos)) = stack.last() {
            return Err(err(pos, "unbalanced '('"));
        }
        if let Some((_, pos)) = pending {
            return Err(err(pos, "dangling bond"));
        }
        if let Some((_, &(_, _, pos))) = rings.iter().next() {
            return Err(err(pos, "unclosed ring bond"));
        }
        if self.atoms.is_empty() {
            return Err(err(0, "empty SMILES"));
        }
        Ok(MolGraph::new(self.atoms, self.bonds).without_hydrogens())
    }

    fn attach(
        &mut self,
        atom: Atom,
        prev: &mut Option<usize>,
        pending: &mut Option<(BondSym, usize)>,
        pos: usize,
    ) -> Result<()> {
        let idx = self.add_atom(atom);
        if let Some(p) = *prev {
            let sym = pending.take().map(|(s, _)| s);
            self.add_bond(p, idx, sym, pos)?;
        }
        *prev = Some(idx);
        Ok(())
    }
}

pub fn parse_smiles(s: &str) -> Result<MolGraph> {
    Parser {
        s: s.trim().as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        neighbors: Vec::new(),
    }
    .parse()
}
