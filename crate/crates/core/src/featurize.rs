//! Atom featurization and graph batching.
//!
//! Every atom becomes 47 one-hot slots followed by the molecule's atom
//! count, giving 48 input columns.

use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::chem::{Atom, BondOrder, Element, MolGraph};

pub const ONE_HOT_WIDTH: usize = 47;
pub const FEATURE_WIDTH: usize = ONE_HOT_WIDTH + 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeaturizeError {
    #[error("cannot batch an empty list of graphs")]
    EmptyBatch,
    #[error("feature width {found} does not match {expected}")]
    WidthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureBlock {
    pub name: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureSchema {
    pub blocks: Vec<FeatureBlock>,
    pub total_width: usize,
    pub count_feature: String,
}

const ELEMENTS: [Element; 15] = [
    Element::H,
    Element::C,
    Element::N,
    Element::O,
    Element::F,
    Element::SI,
    Element::P,
    Element::S,
    Element::CL,
    Element::BR,
    Element::I,
    Element::B,
    Element::NA,
    Element::K,
    Element::SE,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    None,
    Other,
}

impl FeatureSchema {
    pub fn standard() -> FeatureSchema {
        fn block(name: &str, cats: Vec<String>) -> FeatureBlock {
            FeatureBlock {
                name: name.to_string(),
                categories: cats,
            }
        }
        let nums = |r: std::ops::RangeInclusive<i32>| r.map(|v| v.to_string()).collect();
        let mut elements: Vec<String> = ELEMENTS.iter().map(|e| e.symbol().to_string()).collect();
        elements.push("other".into());
        let blocks = vec![
            block("element", elements),
            block("degree", nums(0..=6)),
            block("formal_charge", nums(-2..=2)),
            block("total_h", nums(0..=5)),
            block("aromatic", vec!["aromatic".into()]),
            block("ring", vec!["ring_member".into()]),
            block(
                "hybridization",
                ["sp", "sp2", "sp3", "none", "other"].map(String::from).to_vec(),
            ),
            block("valence", nums(0..=5)),
        ];
        let total_width = blocks.iter().map(|b| b.categories.len()).sum();
        FeatureSchema {
            blocks,
            total_width,
            count_feature: "atom_count".into(),
        }
    }

    /// Number of blocks that are one-hot over more than one category.
    pub fn multi_category_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.categories.len() > 1).count()
    }

    /// Hex SHA-256 of the schema's JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// Sum of bond orders at `atom`, with aromatic bonds as 1.5, rounded down.
fn bond_order_sum(g: &MolGraph, atom: usize) -> u32 {
    let half: u32 = g
        .bonds
        .iter()
        .filter(|b| b.endpoints.0 == atom || b.endpoints.1 == atom)
        .map(|b| b.order.half_units())
        .sum();
    half / 2
}

pub fn hybridization(g: &MolGraph, atom: usize) -> Hybridization {
    let mut doubles = 0;
    let mut triple = false;
    let mut aromatic = false;
    for b in g
        .bonds
        .iter()
        .filter(|b| b.endpoints.0 == atom || b.endpoints.1 == atom)
    {
        match b.order {
            BondOrder::Triple => triple = true,
            BondOrder::Double => doubles += 1,
            BondOrder::Aromatic => aromatic = true,
            BondOrder::Single => {}
        }
    }
    let a = &g.atoms[atom];
    if triple || doubles >= 2 {
        Hybridization::Sp
    } else if doubles == 1 || aromatic || a.aromatic {
        Hybridization::Sp2
    } else if a.degree as u32 + a.total_h() as u32 > 0 {
        Hybridization::Sp3
    } else {
        Hybridization::None
    }
}

fn element_slot(e: Element) -> usize {
    ELEMENTS.iter().position(|&x| x == e).unwrap_or(ELEMENTS.len())
}

/// The 47 one-hot features of atom `index` of `g`.
pub fn featurize_atom(g: &MolGraph, index: usize) -> [f64; ONE_HOT_WIDTH] {
    let a: &Atom = &g.atoms[index];
    let mut out = [0.0; ONE_HOT_WIDTH];
    let mut offset = 0;
    let mut hot = |slot: usize, width: usize| {
        debug_assert!(slot < width);
        out[offset + slot] = 1.0;
        offset += width;
    };
    hot(element_slot(a.element), 16);
    hot((a.degree as usize).min(6), 7);
    hot((a.formal_charge.clamp(-2, 2) + 2) as usize, 5);
    hot((a.total_h() as usize).min(5), 6);
    let mut flag = |on: bool| {
        if on {
            out[offset] = 1.0;
        }
        offset += 1;
    };
    flag(a.aromatic);
    flag(a.ring_member);
    let hyb = match hybridization(g, index) {
        Hybridization::Sp => 0,
        Hybridization::Sp2 => 1,
        Hybridization::Sp3 => 2,
        Hybridization::None => 3,
        Hybridization::Other => 4,
    };
    out[offset + hyb] = 1.0;
    offset += 5;
    let valence = (bond_order_sum(g, index) + a.total_h() as u32).min(5) as usize;
    out[offset + valence] = 1.0;
    offset += 6;
    debug_assert_eq!(offset, ONE_HOT_WIDTH);
    out
}

/// One or more featurized graphs packed for a single forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    /// `total_nodes × 48`; the last column is the graph's atom count.
    pub node_features: Tensor,
    /// Directed edges `(source, target)`; each bond appears in both directions.
    pub edges: Vec<(usize, usize)>,
    pub graph_index: Vec<usize>,
    pub graph_count: usize,
    pub node_counts: Vec<usize>,
}

impl GraphBatch {
    pub fn node_count(&self) -> usize {
        self.graph_index.len()
    }

    pub fn edge_sources(&self) -> Arc<[usize]> {
        self.edges.iter().map(|e| e.0).collect()
    }

    pub fn edge_targets(&self) -> Arc<[usize]> {
        self.edges.iter().map(|e| e.1).collect()
    }

    pub fn graph_index_arc(&self) -> Arc<[usize]> {
        Arc::from(self.graph_index.as_slice())
    }
}

pub fn featurize_graph(g: &MolGraph) -> GraphBatch {
    let n = g.atoms.len();
    let mut data = Vec::with_capacity(n * FEATURE_WIDTH);
    for i in 0..n {
        data.extend_from_slice(&featurize_atom(g, i));
        data.push(n as f64);
    }
    let mut edges = Vec::with_capacity(2 * g.bonds.len());
    for b in &g.bonds {
        let (u, v) = b.endpoints;
        edges.push((u, v));
        edges.push((v, u));
    }
    GraphBatch {
        node_features: Tensor::new(n, FEATURE_WIDTH, data).expect("feature shape"),
        edges,
        graph_index: vec![0; n],
        graph_count: 1,
        node_counts: vec![n],
    }
}

/// Concatenates batches, offsetting node indices and graph ids.
pub fn batch_graphs<B: std::borrow::Borrow<GraphBatch>>(
    parts: &[B],
) -> Result<GraphBatch, FeaturizeError> {
    let first = parts.first().ok_or(FeaturizeError::EmptyBatch)?.borrow();
    let width = first.node_features.cols();
    let total_nodes: usize = parts.iter().map(|p| p.borrow().node_count()).sum();
    let mut data = Vec::with_capacity(total_nodes * width);
    let mut edges = Vec::new();
    let mut graph_index = Vec::with_capacity(total_nodes);
    let mut node_counts = Vec::new();
    let (mut node_off, mut graph_off) = (0, 0);
    for p in parts {
        let p = p.borrow();
        if p.node_features.cols() != width {
            return Err(FeaturizeError::WidthMismatch {
                expected: width,
                found: p.node_features.cols(),
            });
        }
        data.extend_from_slice(p.node_features.data());
        edges.extend(p.edges.iter().map(|&(u, v)| (u + node_off, v + node_off)));
        graph_index.extend(p.graph_index.iter().map(|&g| g + graph_off));
        node_counts.extend_from_slice(&p.node_counts);
        node_off += p.node_count();
        graph_off += p.graph_count;
    }
    Ok(GraphBatch {
        node_features: Tensor::new(total_nodes, width, data).expect("feature shape"),
        edges,
        graph_index,
        graph_count: graph_off,
        node_counts,
    })
}
