//! SMILES reader for the subset found in property datasets: organic-subset
//! and bracket atoms, branches, ring closures (`1`..`9`, `%nn`), bond
//! symbols `- = # : / \` and `.` disconnections.
//!
//! Isotopes, chirality and atom classes are accepted and dropped. `/` and
//! `\` read as single bonds. Aromaticity comes only from lowercase symbols.

use std::collections::{HashMap, HashSet};

use log::warn;
use thiserror::Error;

use super::{connected_components, mark_ring_atoms, Atom, Bond, BondOrder, Element, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxKind {
    EmptyInput,
    NonAscii,
    UnexpectedCharacter(char),
    UnknownElement(String),
    UnclosedBracket,
    UnclosedBranch,
    UnmatchedBranchClose,
    EmptyBranch,
    UnclosedRing(u32),
    RingBondConflict(u32),
    SelfBond,
    DuplicateBond,
    DanglingBond,
    BondWithoutAtom,
    NumberOutOfRange,
}

impl std::fmt::Display for SyntaxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use SyntaxKind::*;
        match self {
            EmptyInput => write!(f, "empty input"),
            NonAscii => write!(f, "non-ASCII character"),
            UnexpectedCharacter(c) => write!(f, "unexpected character {c:?}"),
            UnknownElement(s) => write!(f, "unknown element {s:?}"),
            UnclosedBracket => write!(f, "bracket atom is not closed"),
            UnclosedBranch => write!(f, "branch is not closed"),
            UnmatchedBranchClose => write!(f, "')' without a matching '('"),
            EmptyBranch => write!(f, "empty branch"),
            UnclosedRing(n) => write!(f, "ring bond {n} is never closed"),
            RingBondConflict(n) => write!(f, "ring bond {n} has conflicting bond symbols"),
            SelfBond => write!(f, "ring bond closes on its own atom"),
            DuplicateBond => write!(f, "duplicate bond between the same atoms"),
            DanglingBond => write!(f, "bond symbol not followed by an atom"),
            BondWithoutAtom => write!(f, "bond or branch without a preceding atom"),
            NumberOutOfRange => write!(f, "number out of range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("syntax error at byte {position}: {kind}")]
    Syntax { position: usize, kind: SyntaxKind },
    #[error("valence error on atom {atom} ({element}): bond order sum {bond_sum} exceeds allowed valence")]
    Valence {
        atom: usize,
        element: Element,
        bond_sum: u32,
    },
}

fn syntax(position: usize, kind: SyntaxKind) -> SmilesError {
    SmilesError::Syntax { position, kind }
}

/// Parses a SMILES string and keeps only its largest connected component.
pub fn parse_smiles(input: &str) -> Result<MolGraph, SmilesError> {
    let full = parse_smiles_all(input)?;
    let mut comps = connected_components(&full);
    if comps.len() > 1 {
        warn!(
            "{input}: kept largest of {} components ({})",
            comps.len(),
            comps[0].component_smiles
        );
    }
    Ok(comps.swap_remove(0))
}

/// Parses a SMILES string without dropping disconnected components.
pub fn parse_smiles_all(input: &str) -> Result<MolGraph, SmilesError> {
    if input.is_empty() {
        return Err(syntax(0, SyntaxKind::EmptyInput));
    }
    if let Some(pos) = input.bytes().position(|b| !b.is_ascii()) {
        return Err(syntax(pos, SyntaxKind::NonAscii));
    }
    let mut parser = Parser {
        input: input.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        bond_set: HashSet::new(),
        fragment: 0,
    };
    parser.run()?;
    parser.finish(input)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Directional => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct RawAtom {
    element: Element,
    charge: i8,
    hcount: Option<u8>,
    aromatic: bool,
    fragment: usize,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<RawAtom>,
    bonds: Vec<Bond>,
    bond_set: HashSet<(usize, usize)>,
    fragment: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.input.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        // (atom the branch hangs from, whether the branch holds an atom yet)
        let mut branches: Vec<(usize, bool, usize)> = Vec::new();
        let mut pending: Option<(BondSym, usize)> = None;
        let mut rings: HashMap<u32, (usize, Option<BondSym>, usize)> = HashMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(syntax(start, SyntaxKind::BondWithoutAtom));
                    };
                    if pending.is_some() {
                        return Err(syntax(start, SyntaxKind::DanglingBond));
                    }
                    branches.push((p, false, start));
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(syntax(start, SyntaxKind::DanglingBond));
                    }
                    let Some((anchor, filled, _)) = branches.pop() else {
                        return Err(syntax(start, SyntaxKind::UnmatchedBranchClose));
                    };
                    if !filled {
                        return Err(syntax(start, SyntaxKind::EmptyBranch));
                    }
                    prev = Some(anchor);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() {
                        return Err(syntax(start, SyntaxKind::BondWithoutAtom));
                    }
                    if pending.is_some() {
                        return Err(syntax(start, SyntaxKind::UnexpectedCharacter(c as char)));
                    }
                    let sym = match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        _ => BondSym::Directional,
                    };
                    pending = Some((sym, start));
                    self.pos += 1;
                }
                b'.' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(syntax(start, SyntaxKind::UnexpectedCharacter('.')));
                    }
                    prev = None;
                    self.fragment += 1;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(syntax(start, SyntaxKind::BondWithoutAtom));
                    };
                    let number = self.ring_number()?;
                    let sym = pending.take().map(|(s, _)| s);
                    match rings.remove(&number) {
                        Some((other, open_sym, _)) => {
                            let sym = match (open_sym, sym) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(syntax(start, SyntaxKind::RingBondConflict(number)))
                                }
                                (a, b) => a.or(b),
                            };
                            if other == p {
                                return Err(syntax(start, SyntaxKind::SelfBond));
                            }
                            self.add_bond(other, p, sym, start)?;
                        }
                        None => {
                            rings.insert(number, (p, sym, start));
                        }
                    }
                }
                _ => {
                    let idx = self.atom()?;
                    if let Some(p) = prev {
                        let sym = pending.take().map(|(s, _)| s);
                        self.add_bond(p, idx, sym, start)?;
                    } else if let Some((_, at)) = pending {
                        return Err(syntax(at, SyntaxKind::BondWithoutAtom));
                    }
                    if let Some(top) = branches.last_mut() {
                        top.1 = true;
                    }
                    prev = Some(idx);
                }
            }
        }

        if let Some((_, at)) = pending {
            return Err(syntax(at, SyntaxKind::DanglingBond));
        }
        if let Some(&(_, _, at)) = branches.last() {
            return Err(syntax(at, SyntaxKind::UnclosedBranch));
        }
        if let Some((&number, &(_, _, at))) = rings.iter().min_by_key(|(_, v)| v.2) {
            return Err(syntax(at, SyntaxKind::UnclosedRing(number)));
        }
        if self.atoms.is_empty() {
            return Err(syntax(0, SyntaxKind::EmptyInput));
        }
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, SmilesError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            self.pos += 1;
            let (a, b) = (self.peek(), self.peek_at(1));
            match (a, b) {
                (Some(a @ b'0'..=b'9'), Some(b @ b'0'..=b'9')) => {
                    self.pos += 2;
                    Ok(((a - b'0') * 10 + (b - b'0')) as u32)
                }
                _ => Err(syntax(start, SyntaxKind::NumberOutOfRange)),
            }
        } else {
            let d = self.peek().unwrap_or(b'0');
            self.pos += 1;
            Ok((d - b'0') as u32)
        }
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        sym: Option<BondSym>,
        at: usize,
    ) -> Result<(), SmilesError> {
        let key = (a.min(b), a.max(b));
        if !self.bond_set.insert(key) {
            return Err(syntax(at, SyntaxKind::DuplicateBond));
        }
        let order = match sym {
            Some(s) => s.order(),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        self.bonds.push(Bond::new(a, b, order));
        Ok(())
    }

    fn push_atom(&mut self, element: Element, charge: i8, hcount: Option<u8>, aromatic: bool) -> usize {
        self.atoms.push(RawAtom {
            element,
            charge,
            hcount,
            aromatic,
            fragment: self.fragment,
        });
        self.atoms.len() - 1
    }

    fn atom(&mut self) -> Result<usize, SmilesError> {
        let start = self.pos;
        let c = self.peek().unwrap_or(b' ');
        if c == b'[' {
            return self.bracket_atom();
        }
        let next = self.peek_at(1);
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::CL, false, 2),
            (b'B', Some(b'r')) => (Element::BR, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            (c, _) if c.is_ascii_alphabetic() || c == b'*' => {
                return Err(syntax(start, SyntaxKind::UnknownElement((c as char).to_string())))
            }
            (c, _) => return Err(syntax(start, SyntaxKind::UnexpectedCharacter(c as char))),
        };
        self.pos += len;
        Ok(self.push_atom(element, 0, None, aromatic))
    }

    fn digits(&mut self, max: u32) -> Result<Option<u32>, SmilesError> {
        let start = self.pos;
        let mut value: Option<u32> = None;
        while let Some(d @ b'0'..=b'9') = self.peek() {
            let v = value.unwrap_or(0) * 10 + (d - b'0') as u32;
            if v > max {
                return Err(syntax(start, SyntaxKind::NumberOutOfRange));
            }
            value = Some(v);
            self.pos += 1;
        }
        Ok(value)
    }

    fn bracket_atom(&mut self) -> Result<usize, SmilesError> {
        let open = self.pos;
        self.pos += 1; // '['
        self.digits(999)?; // isotope

        let sym_start = self.pos;
        let (element, aromatic) = match (self.peek(), self.peek_at(1)) {
            (Some(b's'), Some(b'e')) => {
                self.pos += 2;
                (Element::SE, true)
            }
            (Some(b'a'), Some(b's')) => {
                self.pos += 2;
                (Element::AS, true)
            }
            (Some(c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's')), _) => {
                self.pos += 1;
                let e = match c {
                    b'b' => Element::B,
                    b'c' => Element::C,
                    b'n' => Element::N,
                    b'o' => Element::O,
                    b'p' => Element::P,
                    _ => Element::S,
                };
                (e, true)
            }
            (Some(a), second) if a.is_ascii_uppercase() => {
                let two = second
                    .filter(|b| b.is_ascii_lowercase())
                    .and_then(|b| Element::from_symbol(std::str::from_utf8(&[a, b]).ok()?));
                match two {
                    Some(e) => {
                        self.pos += 2;
                        (e, false)
                    }
                    None => {
                        let one = std::str::from_utf8(&[a]).ok().and_then(Element::from_symbol);
                        match one {
                            Some(e) => {
                                self.pos += 1;
                                (e, false)
                            }
                            None => {
                                return Err(syntax(
                                    sym_start,
                                    SyntaxKind::UnknownElement((a as char).to_string()),
                                ))
                            }
                        }
                    }
                }
            }
            (None, _) => return Err(syntax(open, SyntaxKind::UnclosedBracket)),
            (Some(c), _) => {
                return Err(syntax(
                    sym_start,
                    SyntaxKind::UnknownElement((c as char).to_string()),
                ))
            }
        };

        // chirality: @, @@, @TH1, @AL2, @SP3, @TB12, @OH30
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
                if matches!(&[a, b], b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    self.pos += 2;
                    self.digits(99)?;
                }
            }
        }

        let mut hcount = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hcount = self.digits(9)?.unwrap_or(1) as u8;
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            match self.digits(15)? {
                Some(n) => charge = unit * n as i32,
                None => {
                    charge = unit;
                    while self.peek() == Some(sign) {
                        self.pos += 1;
                        charge += unit;
                        if charge.abs() > 15 {
                            return Err(syntax(self.pos, SyntaxKind::NumberOutOfRange));
                        }
                    }
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits(99_999)?.is_none() {
                return Err(syntax(self.pos, SyntaxKind::NumberOutOfRange));
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            None => return Err(syntax(open, SyntaxKind::UnclosedBracket)),
            Some(c) => return Err(syntax(self.pos, SyntaxKind::UnexpectedCharacter(c as char))),
        }
        Ok(self.push_atom(element, charge as i8, Some(hcount), aromatic))
    }

    fn finish(self, input: &str) -> Result<MolGraph, SmilesError> {
        let n = self.atoms.len();
        let mut degree = vec![0u32; n];
        let mut half_sum = vec![0u32; n];
        let mut aromatic_bonds = vec![0u32; n];
        let mut plain_sum = vec![0u32; n];
        for b in &self.bonds {
            for end in [b.endpoints.0, b.endpoints.1] {
                degree[end] += 1;
                half_sum[end] += b.order.half_units();
                if b.order == BondOrder::Aromatic {
                    aromatic_bonds[end] += 1;
                    plain_sum[end] += 1;
                } else {
                    plain_sum[end] += b.order.half_units() / 2;
                }
            }
        }

        let mut atoms = Vec::with_capacity(n);
        for (i, raw) in self.atoms.iter().enumerate() {
            let implicit_h = match raw.hcount {
                Some(_) => 0,
                None => implicit_hydrogens(raw, half_sum[i], plain_sum[i]).ok_or(
                    SmilesError::Valence {
                        atom: i,
                        element: raw.element,
                        bond_sum: half_sum[i] / 2,
                    },
                )?,
            };
            atoms.push(Atom {
                element: raw.element,
                formal_charge: raw.charge,
                explicit_h: raw.hcount,
                aromatic: raw.aromatic,
                ring_member: false,
                degree: degree[i].min(u8::MAX as u32) as u8,
                implicit_h,
            });
        }
        mark_ring_atoms(&mut atoms, &self.bonds);

        Ok(MolGraph {
            atoms,
            bonds: self.bonds,
            source_smiles: input.to_string(),
            component_smiles: input.to_string(),
            atom_fragment: self.atoms.iter().map(|a| a.fragment).collect(),
        })
    }
}

/// Implicit hydrogens of an organic-subset atom, or `None` when its bonds
/// exceed every allowed valence.
///
/// Aliphatic atoms count aromatic bonds as 1.5 and round the sum down.
/// Aromatic atoms count each aromatic bond as 1 and reserve one valence unit
/// for the pi system when one is left, so furan `o` and thiophene `s` get no
/// hydrogen while benzene `c` gets one.
fn implicit_hydrogens(raw: &RawAtom, half_sum: u32, plain_sum: u32) -> Option<u8> {
    let valences = raw.element.default_valences();
    if raw.aromatic {
        let target = valences.iter().map(|&v| v as u32).find(|&v| v >= plain_sum)?;
        Some(target.saturating_sub(plain_sum).saturating_sub(1) as u8)
    } else {
        let sum = half_sum / 2;
        let target = valences.iter().map(|&v| v as u32).find(|&v| v >= sum)?;
        Some((target - sum) as u8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(input: &str) -> SyntaxKind {
        match parse_smiles(input) {
            Err(SmilesError::Syntax { kind, .. }) => kind,
            other => panic!("{input}: expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.atoms.len(), 1);
        assert!(g.bonds.is_empty());
        let a = &g.atoms[0];
        assert_eq!(a.element, Element::C);
        assert_eq!(a.implicit_h, 4);
        assert_eq!(a.degree, 0);
        assert!(!a.aromatic);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atoms.len(), 6);
        assert_eq!(g.bonds.len(), 6);
        for a in &g.atoms {
            assert!(a.aromatic && a.ring_member);
            assert_eq!(a.implicit_h, 1);
            assert_eq!(a.degree, 2);
        }
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        // closing bond joins the first and last atoms
        assert!(g.bonds.contains(&Bond::new(0, 5, BondOrder::Aromatic)));
    }

    #[test]
    fn acetic_acid() {
        let g = parse_smiles("CC(=O)O").unwrap();
        let elements: Vec<_> = g.atoms.iter().map(|a| a.element).collect();
        assert_eq!(elements, vec![Element::C, Element::C, Element::O, Element::O]);
        assert_eq!(
            g.bonds,
            vec![
                Bond::new(0, 1, BondOrder::Single),
                Bond::new(1, 2, BondOrder::Double),
                Bond::new(1, 3, BondOrder::Single),
            ]
        );
        assert_eq!(g.atoms[2].implicit_h, 0);
        assert_eq!(g.atoms[3].implicit_h, 1);
        assert_eq!(g.atoms[0].implicit_h, 3);
        assert_eq!(g.atoms[1].implicit_h, 0);
    }

    #[test]
    fn unclosed_ring_is_syntax_error() {
        assert_eq!(kind("C1CC"), SyntaxKind::UnclosedRing(1));
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(kind(""), SyntaxKind::EmptyInput);
        assert_eq!(kind("C(C"), SyntaxKind::UnclosedBranch);
        assert_eq!(kind("CC)"), SyntaxKind::UnmatchedBranchClose);
        assert_eq!(kind("C()C"), SyntaxKind::EmptyBranch);
        assert_eq!(kind("[Na+"), SyntaxKind::UnclosedBracket);
        assert_eq!(kind("[Xx]"), SyntaxKind::UnknownElement("X".into()));
        assert_eq!(kind("Q"), SyntaxKind::UnknownElement("Q".into()));
        assert_eq!(kind("*C"), SyntaxKind::UnknownElement("*".into()));
        assert_eq!(kind("C="), SyntaxKind::DanglingBond);
        assert_eq!(kind("=C"), SyntaxKind::BondWithoutAtom);
        assert_eq!(kind("C11"), SyntaxKind::SelfBond);
        assert_eq!(kind("C12CC12"), SyntaxKind::DuplicateBond);
        assert_eq!(kind("C=1CC-1"), SyntaxKind::RingBondConflict(1));
        assert_eq!(kind("C.."), SyntaxKind::UnexpectedCharacter('.'));
        assert_eq!(kind("Cé"), SyntaxKind::NonAscii);
        assert_eq!(kind("C C"), SyntaxKind::UnexpectedCharacter(' '));
        assert_eq!(kind("C%1"), SyntaxKind::NumberOutOfRange);
    }

    #[test]
    fn valence_error() {
        assert!(matches!(
            parse_smiles("C(C)(C)(C)(C)C"),
            Err(SmilesError::Valence { atom: 0, bond_sum: 5, .. })
        ));
        assert!(matches!(parse_smiles("FF=C"), Err(SmilesError::Valence { .. })));
    }

    #[test]
    fn bracket_atoms() {
        let g = parse_smiles_all("[13CH3:4][C@@H](N)[O-]").unwrap();
        assert_eq!(g.atoms[0].explicit_h, Some(3));
        assert_eq!(g.atoms[0].implicit_h, 0);
        assert_eq!(g.atoms[1].total_h(), 1);
        assert_eq!(g.atoms[3].formal_charge, -1);
        assert_eq!(g.atoms[3].total_h(), 0);

        let g = parse_smiles("[Na+]").unwrap();
        assert_eq!(g.atoms[0].element, Element::NA);
        assert_eq!(g.atoms[0].formal_charge, 1);
        assert_eq!(g.atoms[0].total_h(), 0);

        let g = parse_smiles("[Fe++]").unwrap();
        assert_eq!(g.atoms[0].formal_charge, 2);
        let g = parse_smiles("[Cu-2]").unwrap();
        assert_eq!(g.atoms[0].formal_charge, -2);
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.atoms[3].total_h(), 1);
        assert!(g.atoms[3].aromatic);
        let g = parse_smiles("[se]1cccc1").unwrap();
        assert_eq!(g.atoms[0].element, Element::SE);
        assert!(g.atoms[0].aromatic);
        let g = parse_smiles("[Sc]").unwrap();
        assert_eq!(g.atoms[0].element.symbol(), "Sc");
    }

    #[test]
    fn aromatic_heteroatoms() {
        let furan = parse_smiles("c1ccoc1").unwrap();
        assert_eq!(furan.atoms[3].implicit_h, 0);
        let thiophene = parse_smiles("c1ccsc1").unwrap();
        assert_eq!(thiophene.atoms[3].implicit_h, 0);
        let pyridine = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(pyridine.atoms[3].implicit_h, 0);
        let naphthalene = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(naphthalene.atoms[8].implicit_h, 0);
        assert_eq!(naphthalene.atoms[3].implicit_h, 0);
        assert_eq!(naphthalene.atoms[0].implicit_h, 1);
        let pyridone = parse_smiles("O=c1cccc[nH]1").unwrap();
        assert_eq!(pyridone.atoms[1].implicit_h, 0);
    }

    #[test]
    fn multivalent_elements() {
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.atoms[1].implicit_h, 0);
        let g = parse_smiles("OP(=O)(O)O").unwrap();
        assert_eq!(g.atoms[1].implicit_h, 0);
        let g = parse_smiles("CP").unwrap();
        assert_eq!(g.atoms[1].implicit_h, 2);
        let g = parse_smiles("CS").unwrap();
        assert_eq!(g.atoms[1].implicit_h, 1);
    }

    #[test]
    fn ring_digits_and_percent() {
        let g = parse_smiles("C%12CC%12").unwrap();
        assert_eq!(g.bonds.len(), 3);
        let g = parse_smiles("C1CC=1").unwrap();
        assert!(g.bonds.contains(&Bond::new(0, 2, BondOrder::Double)));
        // ring numbers can be reused once closed
        let g = parse_smiles("C1CC1C1CC1").unwrap();
        assert_eq!(g.bonds.len(), 7);
    }

    #[test]
    fn stereo_slashes_are_single_bonds() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bonds[0].order, BondOrder::Single);
        assert_eq!(g.bonds[1].order, BondOrder::Double);
    }

    #[test]
    fn explicit_aliphatic_aromatic_bond_counts_half() {
        // aliphatic carbons joined by ':' bonds: 1.5 + 1.5 = 3, one hydrogen
        let g = parse_smiles("C1:C:C:C:C:C:1").unwrap();
        assert!(g.atoms.iter().all(|a| a.implicit_h == 1));
    }

    #[test]
    fn repeated_parse_is_identical() {
        let a = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let b = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        assert_eq!(a, b);
    }
}
