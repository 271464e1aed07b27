//! Molecular graphs and the SMILES reader that produces them.

mod element;
mod smiles;

pub use element::Element;
pub use smiles::{parse_smiles, parse_smiles_all, SmilesError, SyntaxKind};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond order in half units, so an aromatic bond contributes 3 (1.5).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Hydrogen count written inside a bracket atom; `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
    pub aromatic: bool,
    pub ring_member: bool,
    pub degree: u8,
    pub implicit_h: u8,
}

impl Atom {
    pub fn total_h(&self) -> u8 {
        self.explicit_h.unwrap_or(0).saturating_add(self.implicit_h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    /// Endpoints, stored with the smaller index first.
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Bond {
        Bond {
            endpoints: (a.min(b), a.max(b)),
            order,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.endpoints.0 == atom {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// The string this graph was parsed from.
    pub source_smiles: String,
    /// The dot-separated fragment(s) of `source_smiles` that hold this graph's
    /// atoms. Equal to `source_smiles` for single-component input.
    pub component_smiles: String,
    /// Index of the dot-separated fragment of `source_smiles` each atom was written in.
    pub atom_fragment: Vec<usize>,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms
            .iter()
            .filter(|a| !a.element.is_hydrogen())
            .count()
    }

    /// Neighbour lists with the connecting bond order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            let (u, v) = b.endpoints;
            adj[u].push((v, b.order));
            adj[v].push((u, b.order));
        }
        adj
    }

    /// Relabels atoms so that new atom `i` is old atom `order[i]`.
    ///
    /// Panics if `order` is not a permutation of `0..atom_count()`.
    pub fn permuted(&self, order: &[usize]) -> MolGraph {
        assert_eq!(order.len(), self.atoms.len(), "permutation length");
        let mut inverse = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            assert!(inverse[old] == usize::MAX, "not a permutation");
            inverse[old] = new;
        }
        MolGraph {
            atoms: order.iter().map(|&old| self.atoms[old].clone()).collect(),
            bonds: self
                .bonds
                .iter()
                .map(|b| Bond::new(inverse[b.endpoints.0], inverse[b.endpoints.1], b.order))
                .collect(),
            source_smiles: self.source_smiles.clone(),
            component_smiles: self.component_smiles.clone(),
            atom_fragment: order.iter().map(|&old| self.atom_fragment[old]).collect(),
        }
    }
}

/// Splits a graph into its connected components, largest heavy-atom count
/// first; ties go to the component whose first atom appears earliest.
pub fn connected_components(g: &MolGraph) -> Vec<MolGraph> {
    // brackets never contain '.', so a plain split recovers the fragments
    let fragments: Vec<&str> = g.source_smiles.split('.').collect();
    let n = g.atoms.len();
    let adj = g.adjacency();
    let mut label = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut stack = vec![start];
        let mut comp = Vec::new();
        label[start] = id;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for &(v, _) in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = id;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        members.push(comp);
    }
    if members.len() <= 1 {
        return vec![g.clone()];
    }

    let heavy = |comp: &Vec<usize>| {
        comp.iter()
            .filter(|&&i| !g.atoms[i].element.is_hydrogen())
            .count()
    };
    members.sort_by(|a, b| heavy(b).cmp(&heavy(a)).then(a[0].cmp(&b[0])));

    members
        .into_iter()
        .map(|comp| {
            let mut remap = vec![usize::MAX; n];
            for (new, &old) in comp.iter().enumerate() {
                remap[old] = new;
            }
            let mut frag_ids: Vec<usize> = comp.iter().map(|&i| g.atom_fragment[i]).collect();
            frag_ids.sort_unstable();
            frag_ids.dedup();
            let text = frag_ids
                .iter()
                .filter_map(|&f| fragments.get(f).copied())
                .collect::<Vec<_>>()
                .join(".");
            MolGraph {
                atoms: comp.iter().map(|&i| g.atoms[i].clone()).collect(),
                bonds: g
                    .bonds
                    .iter()
                    .filter(|b| remap[b.endpoints.0] != usize::MAX)
                    .map(|b| Bond::new(remap[b.endpoints.0], remap[b.endpoints.1], b.order))
                    .collect(),
                source_smiles: g.source_smiles.clone(),
                component_smiles: text,
                atom_fragment: comp.iter().map(|&i| g.atom_fragment[i]).collect(),
            }
        })
        .collect()
}

/// Marks every atom that lies on a cycle (is incident to a non-bridge bond).
pub(crate) fn mark_ring_atoms(atoms: &mut [Atom], bonds: &[Bond]) {
    let n = atoms.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, b) in bonds.iter().enumerate() {
        adj[b.endpoints.0].push((b.endpoints.1, e));
        adj[b.endpoints.1].push((b.endpoints.0, e));
    }
    // iterative Tarjan bridge search
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (node, parent edge, next neighbour position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (u, parent_edge) = (top.0, top.1);
            if top.2 < adj[u].len() {
                let (v, e) = adj[u][top.2];
                top.2 += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    for (e, b) in bonds.iter().enumerate() {
        if !is_bridge[e] {
            atoms[b.endpoints.0].ring_member = true;
            atoms[b.endpoints.1].ring_member = true;
        }
    }
}
