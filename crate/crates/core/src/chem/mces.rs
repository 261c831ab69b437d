//! Maximum common edge subgraph (MCES) distance with a myopic threshold.
//!
//! The distance between two graphs is the number of edges that must be
//! deleted from both so that what remains is isomorphic:
//! `|E1| + |E2| - 2 * |common edges|`. Distances at or beyond the threshold
//! are not resolved exactly; only a bound is reported for them.
//!
//! The exact search is a branch and bound over atom correspondences: atoms
//! of the first graph are visited in an order that starts from the label
//! that is rarest in the second graph and then follows connectivity. Each
//! atom is either mapped onto a free, equally labeled atom of the second
//! graph or left out. An edge is common when both endpoints are mapped and
//! the image pair is bonded with the same order. Nodes are pruned with the
//! labeled-edge multiset bound over the edges that can still be matched.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::{BondOrder, MolGraph};
use super::smiles::parse_smiles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McesConfig {
    pub threshold: usize,
    pub max_atoms: usize,
    /// Restrict the common subgraph to a single connected component.
    #[serde(default)]
    pub connected_only: bool,
}

impl Default for McesConfig {
    fn default() -> Self {
        McesConfig {
            threshold: 15,
            max_atoms: 64,
            connected_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McesResult {
    pub distance: usize,
    pub exact: bool,
    /// Size of the best common subgraph found (the optimum when `exact`).
    pub common_edges: usize,
}

/// Dense label ids shared by two graphs.
struct Labels {
    atom1: Vec<usize>,
    atom2: Vec<usize>,
    edge1: Vec<usize>,
    edge2: Vec<usize>,
    n_edge_labels: usize,
}

fn order_code(o: BondOrder) -> u8 {
    match o {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

impl Labels {
    fn new(g1: &MolGraph, g2: &MolGraph) -> Self {
        let mut atom_ids: HashMap<(&str, bool), usize> = HashMap::new();
        let mut atom_label = |g: &MolGraph| -> Vec<usize> {
            g.atoms
                .iter()
                .map(|a| {
                    let n = atom_ids.len();
                    *atom_ids.entry((a.element, a.aromatic)).or_insert(n)
                })
                .collect()
        };
        let atom1 = atom_label(g1);
        let atom2 = atom_label(g2);

        let mut edge_ids: HashMap<(usize, usize, u8), usize> = HashMap::new();
        let mut edge_label = |g: &MolGraph, atoms: &[usize]| -> Vec<usize> {
            g.bonds
                .iter()
                .map(|b| {
                    let (x, y) = (atoms[b.a], atoms[b.b]);
                    let key = (x.min(y), x.max(y), order_code(b.order));
                    let n = edge_ids.len();
                    *edge_ids.entry(key).or_insert(n)
                })
                .collect()
        };
        let edge1 = edge_label(g1, &atom1);
        let edge2 = edge_label(g2, &atom2);
        Labels {
            atom1,
            atom2,
            edge1,
            edge2,
            n_edge_labels: edge_ids.len(),
        }
    }

    fn histogram(labels: &[usize], n: usize) -> Vec<usize> {
        let mut h = vec![0; n];
        for &l in labels {
            h[l] += 1;
        }
        h
    }
}

/// Lower bound on the MCES distance from labeled-edge multisets:
/// `sum over labels |count1 - count2|`.
pub fn mces_lower_bound(g1: &MolGraph, g2: &MolGraph) -> usize {
    let labels = Labels::new(g1, g2);
    let h1 = Labels::histogram(&labels.edge1, labels.n_edge_labels);
    let h2 = Labels::histogram(&labels.edge2, labels.n_edge_labels);
    h1.iter().zip(&h2).map(|(a, b)| a.abs_diff(*b)).sum()
}

const UNPROCESSED: i32 = -2;
const UNMAPPED: i32 = -1;

struct Search<'a> {
    g1: &'a MolGraph,
    g2: &'a MolGraph,
    labels: Labels,
    order: Vec<usize>,
    /// Bond order code between atoms of g2, row-major `n2 * n2`.
    bond2: Vec<u8>,
    map1: Vec<i32>,
    used2: Vec<bool>,
    best: i64,
    found: bool,
    ceiling: usize,
    connected_only: bool,
    cnt1: Vec<usize>,
    cnt2: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(g1: &'a MolGraph, g2: &'a MolGraph, bar: i64, connected_only: bool) -> Self {
        let labels = Labels::new(g1, g2);
        let n2 = g2.n_atoms();
        let mut bond2 = vec![0u8; n2 * n2];
        for b in &g2.bonds {
            bond2[b.a * n2 + b.b] = order_code(b.order);
            bond2[b.b * n2 + b.a] = order_code(b.order);
        }
        let h1 = Labels::histogram(&labels.edge1, labels.n_edge_labels);
        let h2 = Labels::histogram(&labels.edge2, labels.n_edge_labels);
        let ceiling = h1.iter().zip(&h2).map(|(a, b)| *a.min(b)).sum();
        let order = visit_order(g1, &labels);
        let nl = labels.n_edge_labels;
        Search {
            g1,
            g2,
            order,
            bond2,
            map1: vec![UNPROCESSED; g1.n_atoms()],
            used2: vec![false; n2],
            best: bar,
            found: false,
            ceiling,
            connected_only,
            cnt1: vec![0; nl],
            cnt2: vec![0; nl],
            labels,
        }
    }

    /// Common edges that may still be gained below the current node.
    fn remaining_bound(&mut self) -> usize {
        self.cnt1.iter_mut().for_each(|c| *c = 0);
        self.cnt2.iter_mut().for_each(|c| *c = 0);
        for (b, &l) in self.g1.bonds.iter().zip(&self.labels.edge1) {
            let (x, y) = (self.map1[b.a], self.map1[b.b]);
            if (x == UNPROCESSED || y == UNPROCESSED) && x != UNMAPPED && y != UNMAPPED {
                self.cnt1[l] += 1;
            }
        }
        for (b, &l) in self.g2.bonds.iter().zip(&self.labels.edge2) {
            if !self.used2[b.a] || !self.used2[b.b] {
                self.cnt2[l] += 1;
            }
        }
        self.cnt1
            .iter()
            .zip(&self.cnt2)
            .map(|(a, b)| *a.min(b))
            .sum()
    }

    fn gain(&self, u: usize, v: usize) -> usize {
        let n2 = self.g2.n_atoms();
        self.g1
            .neighbors(u)
            .iter()
            .filter(|(w, o)| {
                let m = self.map1[*w];
                m >= 0 && self.bond2[v * n2 + m as usize] == order_code(*o)
            })
            .count()
    }

    fn largest_common_component(&self) -> usize {
        let n = self.g1.n_atoms();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let n2 = self.g2.n_atoms();
        let mut common = Vec::new();
        for b in &self.g1.bonds {
            let (x, y) = (self.map1[b.a], self.map1[b.b]);
            if x >= 0 && y >= 0 && self.bond2[x as usize * n2 + y as usize] == order_code(b.order) {
                let (ra, rb) = (find(&mut parent, b.a), find(&mut parent, b.b));
                parent[ra] = rb;
                common.push(b.a);
            }
        }
        let mut sizes = vec![0usize; n];
        for a in common {
            let r = find(&mut parent, a);
            sizes[r] += 1;
        }
        sizes.into_iter().max().unwrap_or(0)
    }

    fn run(&mut self, depth: usize, common: usize) {
        if self.best >= self.ceiling as i64 {
            return;
        }
        if depth == self.order.len() {
            let value = if self.connected_only {
                self.largest_common_component()
            } else {
                common
            };
            if value as i64 > self.best {
                self.best = value as i64;
                self.found = true;
            }
            return;
        }
        if (common + self.remaining_bound()) as i64 <= self.best {
            return;
        }

        let u = self.order[depth];
        let label = self.labels.atom1[u];
        let mut options: Vec<(usize, usize)> = (0..self.g2.n_atoms())
            .filter(|&v| !self.used2[v] && self.labels.atom2[v] == label)
            .map(|v| (self.gain(u, v), v))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        for (gain, v) in options {
            self.map1[u] = v as i32;
            self.used2[v] = true;
            self.run(depth + 1, common + gain);
            self.used2[v] = false;
            if self.best >= self.ceiling as i64 {
                self.map1[u] = UNPROCESSED;
                return;
            }
        }
        self.map1[u] = UNMAPPED;
        self.run(depth + 1, common);
        self.map1[u] = UNPROCESSED;
    }
}

/// Rarest label (in g2) first, then repeatedly the atom with the most
/// already-visited neighbors.
fn visit_order(g1: &MolGraph, labels: &Labels) -> Vec<usize> {
    let n = g1.n_atoms();
    let mut freq2: HashMap<usize, usize> = HashMap::new();
    for &l in &labels.atom2 {
        *freq2.entry(l).or_default() += 1;
    }
    let rarity = |u: usize| freq2.get(&labels.atom1[u]).copied().unwrap_or(0);
    let mut visited = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&u| !visited[u])
            .min_by(|&a, &b| {
                links[b]
                    .cmp(&links[a])
                    .then(rarity(a).cmp(&rarity(b)))
                    .then(g1.degree(b).cmp(&g1.degree(a)))
                    .then(a.cmp(&b))
            })
            .expect("unvisited atom remains");
        visited[next] = true;
        for &(w, _) in g1.neighbors(next) {
            links[w] += 1;
        }
        order.push(next);
    }
    order
}

pub fn mces_distance(g1: &MolGraph, g2: &MolGraph, cfg: &McesConfig) -> Result<McesResult> {
    for g in [g1, g2] {
        if g.n_atoms() > cfg.max_atoms {
            return Err(Error::Capacity {
                atoms: g.n_atoms(),
                limit: cfg.max_atoms,
            });
        }
    }
    // Branch on the smaller graph.
    let (a, b) = if g1.n_atoms() <= g2.n_atoms() {
        (g1, g2)
    } else {
        (g2, g1)
    };
    let total = (a.n_bonds() + b.n_bonds()) as i64;
    let threshold = cfg.threshold as i64;
    let lower = mces_lower_bound(a, b);

    let inexact = |common: usize| McesResult {
        distance: cfg.threshold.max(lower),
        exact: false,
        common_edges: common,
    };
    if lower as i64 >= threshold {
        return Ok(inexact(0));
    }

    // Only common-edge counts c with total - 2c < threshold are of interest.
    let bar = if total >= threshold {
        (total - threshold).div_euclid(2)
    } else {
        -1
    };
    let mut search = Search::new(a, b, bar, cfg.connected_only);
    search.run(0, 0);
    if search.found {
        let c = search.best as usize;
        Ok(McesResult {
            distance: total as usize - 2 * c,
            exact: true,
            common_edges: c,
        })
    } else {
        Ok(inexact(0))
    }
}

pub fn mces_smiles(a: &str, b: &str, cfg: &McesConfig) -> Result<McesResult> {
    mces_distance(&parse_smiles(a)?, &parse_smiles(b)?, cfg)
}

/// Mean MCES over `(predicted, truth)` SMILES pairs; inexact results count
/// at their reported (threshold-capped) distance.
pub fn mean_mces_at_1(pairs: &[(String, String)], cfg: &McesConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs"));
    }
    let tag = |i: usize, e: Error| match e {
        Error::Smiles { position, message } => Error::Smiles {
            position,
            message: format!("pair {i}: {message}"),
        },
        other => Error::invalid(format!("pair {i}: {other}")),
    };
    let distances = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (p, t))| {
            let gp = parse_smiles(p).map_err(|e| tag(i, e))?;
            let gt = parse_smiles(t).map_err(|e| tag(i, e))?;
            mces_distance(&gp, &gt, cfg).map(|r| r.distance)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(distances.iter().sum::<usize>() as f64 / distances.len() as f64)
}

/// Symmetric distance matrix, computed in parallel over rows.
pub fn pairwise_distances(graphs: &[MolGraph], cfg: &McesConfig) -> Result<Vec<Vec<McesResult>>> {
    let n = graphs.len();
    let upper: Vec<Vec<McesResult>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| mces_distance(&graphs[i], &graphs[j], cfg))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let r = if j >= i {
                upper[i][j - i]
            } else {
                upper[j][i - j]
            };
            m[i].push(r);
        }
    }
    Ok(m)
}
