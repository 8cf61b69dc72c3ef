//! Forests of paired ternary trees indexing the expansion of the infinite hierarchy.
//!
//! Every edge is stored as a node of an arena; a node with sons is the edge's
//! right endpoint vertex. Trees `2j` and `2j + 1` are paired, the even one
//! carrying orientation `+1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `k + m` accepted by [`enumerate_graphs`].
pub const MAX_SIZE: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("expected {expected} edges, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error("expected {expected} roots, found {found}")]
    RootCount { expected: usize, found: usize },
    #[error("expected {expected} leaves, found {found}")]
    LeafCount { expected: usize, found: usize },
    #[error("vertex at edge {edge} has {marked} marked sons")]
    MarkedSon { edge: usize, marked: usize },
    #[error("leaf pairing: {0}")]
    LeafPairing(String),
    #[error("root pairing: {0}")]
    RootPairing(String),
    #[error("vertex order is not a strict partial order at edge {0}")]
    PartialOrder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeynmanError {
    #[error("k = {k}, m = {m} outside 1 <= k, k + m <= {MAX_SIZE}")]
    SizeLimit { k: u32, m: u32 },
    #[error("malformed encoding: {0}")]
    Parse(String),
    #[error(transparent)]
    Violation(#[from] Violation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: Option<usize>,
    pub sons: Option<[usize; 3]>,
    /// Marked son of its parent; roots carry `false`.
    pub marked: bool,
    pub tree: usize,
    pub tau: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeynmanGraph {
    pub k: u32,
    pub m: u32,
    pub edges: Vec<Edge>,
    pub roots: Vec<usize>,
    pub root_pairing: Vec<(usize, usize)>,
    pub leaf_pairing: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingReport {
    pub root_pairs: usize,
    pub leaf_pairs: usize,
    pub vertices: usize,
}

impl FeynmanGraph {
    /// `2k` bare paired roots.
    pub fn bare(k: u32) -> Self {
        let n = 2 * k as usize;
        let edges = (0..n)
            .map(|t| Edge {
                parent: None,
                sons: None,
                marked: false,
                tree: t,
                tau: if t % 2 == 0 { 1 } else { -1 },
            })
            .collect();
        let mut g = Self {
            k,
            m: 0,
            edges,
            roots: (0..n).collect(),
            root_pairing: (0..k as usize).map(|j| (2 * j, 2 * j + 1)).collect(),
            leaf_pairing: Vec::new(),
        };
        g.leaf_pairing = g.derive_leaf_pairing().expect("bare forest pairs its roots");
        g
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].sons.is_none()).collect()
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].sons.is_some()).collect()
    }

    /// Turns leaf `e` into a vertex with sons (marked, unmarked, unmarked).
    fn attach(&self, e: usize) -> Self {
        let mut g = self.clone();
        let base = g.edges.len();
        let (tree, tau) = (g.edges[e].tree, g.edges[e].tau);
        for s in 0..3 {
            g.edges.push(Edge {
                parent: Some(e),
                sons: None,
                marked: s == 0,
                tree,
                tau,
            });
        }
        g.edges[e].sons = Some([base, base + 1, base + 2]);
        g.m += 1;
        g
    }

    /// `v < v'` iff `v` lies on the path from `v'` to its root.
    pub fn precedes(&self, v: usize, w: usize) -> bool {
        let mut cur = self.edges[w].parent;
        while let Some(p) = cur {
            if p == v {
                return true;
            }
            cur = self.edges[p].parent;
        }
        false
    }

    /// Follows marked sons from a line start down to its leaf.
    fn chain_end(&self, mut e: usize) -> Result<usize, Violation> {
        for _ in 0..=self.edges.len() {
            match self.edges[e].sons {
                None => return Ok(e),
                Some(sons) => {
                    let marked: Vec<usize> = sons.into_iter().filter(|&s| self.edges[s].marked).collect();
                    if marked.len() != 1 {
                        return Err(Violation::LeafPairing(format!(
                            "line through edge {e} continues into {} marked sons",
                            marked.len()
                        )));
                    }
                    e = marked[0];
                }
            }
        }
        Err(Violation::PartialOrder(e))
    }

    /// Pairs the leaves ending the lines of paired roots and of sibling unmarked sons.
    pub fn derive_leaf_pairing(&self) -> Result<Vec<(usize, usize)>, Violation> {
        let mut pairs = Vec::new();
        for &(a, b) in &self.root_pairing {
            pairs.push((self.chain_end(self.roots[a])?, self.chain_end(self.roots[b])?));
        }
        for v in self.vertices() {
            let sons = self.edges[v].sons.unwrap_or_default();
            let unmarked: Vec<usize> = sons.into_iter().filter(|&s| !self.edges[s].marked).collect();
            if unmarked.len() != 2 {
                return Err(Violation::LeafPairing(format!(
                    "vertex at edge {v} has {} unmarked sons",
                    unmarked.len()
                )));
            }
            pairs.push((self.chain_end(unmarked[0])?, self.chain_end(unmarked[1])?));
        }
        let mut seen = vec![false; self.edges.len()];
        for &(a, b) in &pairs {
            for l in [a, b] {
                if std::mem::replace(&mut seen[l], true) {
                    return Err(Violation::LeafPairing(format!("leaf {l} paired twice")));
                }
            }
        }
        if let Some(l) = self.leaves().into_iter().find(|&l| !seen[l]) {
            return Err(Violation::LeafPairing(format!("leaf {l} unpaired")));
        }
        Ok(normalize_pairs(pairs))
    }

    /// Canonical text: trees as nested parentheses (`*` marks the marked son) joined by `|`,
    /// then the root and leaf pairings by root index and leaf depth-first ordinal.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (i, &r) in self.roots.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            self.write_tree(r, &mut out);
        }
        let ordinal = self.leaf_ordinals();
        out.push_str(";R");
        for &(a, b) in &self.root_pairing {
            let _ = write!(out, " {a}-{b}");
        }
        out.push_str(";L");
        let mut leaves: Vec<(usize, usize)> = self
            .leaf_pairing
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (ordinal[a], ordinal[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        leaves.sort_unstable();
        for (a, b) in leaves {
            let _ = write!(out, " {a}-{b}");
        }
        out
    }

    fn write_tree(&self, e: usize, out: &mut String) {
        if self.edges[e].marked {
            out.push('*');
        }
        match self.edges[e].sons {
            None => out.push('L'),
            Some(sons) => {
                out.push('(');
                for (i, s) in sons.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.write_tree(s, out);
                }
                out.push(')');
            }
        }
    }

    fn depth_first(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.edges.len());
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(e) = stack.pop() {
            order.push(e);
            if let Some(sons) = self.edges[e].sons {
                stack.extend(sons.into_iter().rev());
            }
        }
        order
    }

    fn leaf_ordinals(&self) -> Vec<usize> {
        let mut ord = vec![usize::MAX; self.edges.len()];
        for (i, e) in self.depth_first().into_iter().filter(|&e| self.edges[e].sons.is_none()).enumerate() {
            ord[e] = i;
        }
        ord
    }

    pub fn parse(text: &str) -> Result<Self, FeynmanError> {
        let bad = |msg: &str| FeynmanError::Parse(msg.to_string());
        let mut parts = text.split(';');
        let forest = parts.next().ok_or_else(|| bad("empty"))?;
        let roots_part = parts.next().and_then(|s| s.strip_prefix('R')).ok_or_else(|| bad("missing root pairing"))?;
        let leaves_part = parts.next().and_then(|s| s.strip_prefix('L')).ok_or_else(|| bad("missing leaf pairing"))?;
        if parts.next().is_some() {
            return Err(bad("trailing sections"));
        }
        let trees: Vec<&str> = forest.split('|').collect();
        if trees.len() % 2 != 0 {
            return Err(bad("odd number of trees"));
        }
        let mut g = Self {
            k: (trees.len() / 2) as u32,
            m: 0,
            edges: Vec::new(),
            roots: Vec::new(),
            root_pairing: parse_pairs(roots_part)?,
            leaf_pairing: Vec::new(),
        };
        for (t, src) in trees.iter().enumerate() {
            let bytes = src.as_bytes();
            let mut pos = 0;
            let root = g.parse_tree(bytes, &mut pos, None, t)?;
            if pos != bytes.len() {
                return Err(bad("unexpected characters after tree"));
            }
            g.roots.push(root);
        }
        g.m = g.vertices().len() as u32;
        // Renumber edges depth-first so equal encodings give equal arenas.
        let order = g.depth_first();
        let mut new_id = vec![0; g.edges.len()];
        for (i, &e) in order.iter().enumerate() {
            new_id[e] = i;
        }
        let edges = order
            .iter()
            .map(|&e| {
                let old = &g.edges[e];
                Edge {
                    parent: old.parent.map(|p| new_id[p]),
                    sons: old.sons.map(|s| s.map(|x| new_id[x])),
                    ..old.clone()
                }
            })
            .collect();
        g.edges = edges;
        g.roots = g.roots.iter().map(|&r| new_id[r]).collect();
        let leaves: Vec<usize> = (0..g.edges.len()).filter(|&e| g.edges[e].sons.is_none()).collect();
        let pairs = parse_pairs(leaves_part)?;
        g.leaf_pairing = normalize_pairs(
            pairs
                .into_iter()
                .map(|(a, b)| match (leaves.get(a), leaves.get(b)) {
                    (Some(&x), Some(&y)) => Ok((x, y)),
                    _ => Err(bad("leaf ordinal out of range")),
                })
                .collect::<Result<_, _>>()?,
        );
        Ok(g)
    }

    fn parse_tree(&mut self, s: &[u8], pos: &mut usize, parent: Option<usize>, tree: usize) -> Result<usize, FeynmanError> {
        let marked = s.get(*pos) == Some(&b'*');
        if marked {
            *pos += 1;
        }
        let id = self.edges.len();
        self.edges.push(Edge {
            parent,
            sons: None,
            marked,
            tree,
            tau: if tree % 2 == 0 { 1 } else { -1 },
        });
        match s.get(*pos) {
            Some(b'L') => *pos += 1,
            Some(b'(') => {
                *pos += 1;
                let mut sons = [0; 3];
                for (i, slot) in sons.iter_mut().enumerate() {
                    if i > 0 {
                        if s.get(*pos) != Some(&b',') {
                            return Err(FeynmanError::Parse("expected ','".into()));
                        }
                        *pos += 1;
                    }
                    *slot = self.parse_tree(s, pos, Some(id), tree)?;
                }
                if s.get(*pos) != Some(&b')') {
                    return Err(FeynmanError::Parse("expected ')'".into()));
                }
                *pos += 1;
                self.edges[id].sons = Some(sons);
            }
            _ => return Err(FeynmanError::Parse(format!("unexpected token at {}", *pos))),
        }
        Ok(id)
    }
}

fn normalize_pairs(pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut p: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
    p.sort_unstable();
    p
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>, FeynmanError> {
    s.split_whitespace()
        .map(|tok| {
            let (a, b) = tok.split_once('-').ok_or_else(|| FeynmanError::Parse(format!("bad pair {tok}")))?;
            let num = |x: &str| x.parse::<usize>().map_err(|_| FeynmanError::Parse(format!("bad index {x}")));
            Ok((num(a)?, num(b)?))
        })
        .collect()
}

/// Checks counts, marked sons, the partial order and both pairings.
pub fn validate_pairing(g: &FeynmanGraph) -> Result<PairingReport, Violation> {
    let (k, m) = (g.k as usize, g.m as usize);
    if g.edges.len() != 2 * k + 3 * m {
        return Err(Violation::EdgeCount {
            expected: 2 * k + 3 * m,
            found: g.edges.len(),
        });
    }
    if g.roots.len() != 2 * k || g.edges.iter().filter(|e| e.parent.is_none()).count() != 2 * k {
        return Err(Violation::RootCount {
            expected: 2 * k,
            found: g.roots.len(),
        });
    }
    let leaves = g.leaves().len();
    if leaves != 2 * k + 2 * m {
        return Err(Violation::LeafCount {
            expected: 2 * k + 2 * m,
            found: leaves,
        });
    }
    for e in 0..g.edges.len() {
        // Irreflexive ancestry excludes cycles; antisymmetry follows.
        if g.precedes(e, e) {
            return Err(Violation::PartialOrder(e));
        }
    }
    let derived = g.derive_leaf_pairing()?;
    if derived != normalize_pairs(g.leaf_pairing.clone()) {
        return Err(Violation::LeafPairing("stored pairing differs from the unmarked-son rule".into()));
    }
    for v in g.vertices() {
        let marked = g.edges[v].sons.unwrap_or_default().iter().filter(|&&s| g.edges[s].marked).count();
        if marked != 1 {
            return Err(Violation::MarkedSon { edge: v, marked });
        }
    }
    let mut roots: Vec<usize> = g.root_pairing.iter().flat_map(|&(a, b)| [a, b]).collect();
    roots.sort_unstable();
    if roots != (0..2 * k).collect::<Vec<_>>() {
        return Err(Violation::RootPairing("not a perfect matching of the roots".into()));
    }
    if g.root_pairing.iter().any(|&(a, b)| g.edges[g.roots[a]].tau == g.edges[g.roots[b]].tau) {
        return Err(Violation::RootPairing("paired roots share an orientation".into()));
    }
    Ok(PairingReport {
        root_pairs: g.root_pairing.len(),
        leaf_pairs: derived.len(),
        vertices: m,
    })
}

/// All graphs with `k` tree pairs and `m` vertices, sorted by canonical encoding.
pub fn enumerate_graphs(k: u32, m: u32) -> Result<Vec<FeynmanGraph>, FeynmanError> {
    if k == 0 || k + m > MAX_SIZE {
        return Err(FeynmanError::SizeLimit { k, m });
    }
    let mut level = vec![FeynmanGraph::bare(k)];
    for _ in 0..m {
        let grown: Vec<(String, FeynmanGraph)> = level
            .par_iter()
            .flat_map_iter(|g| {
                g.leaves().into_iter().map(move |l| {
                    let mut next = g.attach(l);
                    next.leaf_pairing = next.derive_leaf_pairing().expect("attachment keeps the pairing rule");
                    (next.canonical(), next)
                })
            })
            .collect();
        let unique: BTreeMap<String, FeynmanGraph> = grown.into_iter().collect();
        level = unique
            .into_keys()
            .map(|s| FeynmanGraph::parse(&s))
            .collect::<Result<_, _>>()?;
    }
    Ok(level)
}

/// Exponents of `kappa` in the scale budget of one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerCounting {
    pub volume: i64,
    pub leaf: i64,
    pub propagator: i64,
    pub observable: i64,
    pub total: i64,
}

/// Volume `10(k+m)`, leaf decay `5/2` on `2k+2m` leaves, `-2` per each of `2k+3m`
/// propagators, observable decay `6k`.
pub fn power_counting(k: u32, m: u32) -> PowerCounting {
    let (k, m) = (i64::from(k), i64::from(m));
    let volume = 10 * (k + m);
    let leaf = -5 * (k + m);
    let propagator = -2 * (2 * k + 3 * m);
    let observable = -6 * k;
    PowerCounting {
        volume,
        leaf,
        propagator,
        observable,
        total: volume + leaf + propagator + observable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiplicity {
    Enumerated,
    Bound,
}

/// `|K| <= C^{constant_exponent} t^{t_exponent}` per graph, times `graphs` for the sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeBound {
    pub k: u32,
    pub m: u32,
    pub t: f64,
    pub constant_exponent: u32,
    pub t_exponent: f64,
    pub graphs: u128,
    pub multiplicity: Multiplicity,
}

impl AmplitudeBound {
    /// Bound on the sum over the class for a given constant `c`.
    pub fn aggregate(&self, c: f64) -> f64 {
        self.graphs as f64 * c.powi(self.constant_exponent as i32) * self.t.powf(self.t_exponent)
    }
}

/// Uses the enumerated class size when enumeration is in range, else `2^{4m+k}`.
pub fn amplitude_bound(k: u32, m: u32, t: f64) -> AmplitudeBound {
    let (graphs, multiplicity) = match enumerate_graphs(k, m) {
        Ok(list) => (list.len() as u128, Multiplicity::Enumerated),
        Err(_) => (
            1u128.checked_shl(4 * m + k).unwrap_or(u128::MAX),
            Multiplicity::Bound,
        ),
    };
    AmplitudeBound {
        k,
        m,
        t,
        constant_exponent: k + m,
        t_exponent: f64::from(m) / 4.0,
        graphs,
        multiplicity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Ordered ternary forests with `2k` trees and `m` internal nodes.
    fn forest_count(k: u64, m: u64) -> u64 {
        let n = 3 * m + 2 * k;
        let mut c: u128 = 1;
        for i in 0..m {
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
        (c * u128::from(2 * k) / u128::from(n)) as u64
    }

    #[test]
    fn small_classes() {
        let bare = enumerate_graphs(1, 0).unwrap();
        assert_eq!(bare.len(), 1);
        assert_eq!(validate_pairing(&bare[0]).unwrap().root_pairs, 1);
        assert_eq!(enumerate_graphs(1, 1).unwrap().len(), 2);
        assert_eq!(enumerate_graphs(1, 4).unwrap().len(), 143);
        assert!(matches!(enumerate_graphs(2, 7), Err(FeynmanError::SizeLimit { .. })));
        assert!(matches!(enumerate_graphs(0, 1), Err(FeynmanError::SizeLimit { .. })));
    }

    #[test]
    fn counts_match_forest_formula() {
        for k in 1..=3u32 {
            let mut last = 0;
            for m in 0..=4u32 {
                let graphs = enumerate_graphs(k, m).unwrap();
                assert_eq!(graphs.len() as u64, forest_count(k.into(), m.into()), "k={k} m={m}");
                assert!(graphs.len() as u64 >= last);
                assert!((graphs.len() as u128) <= 1u128 << (4 * m + k));
                last = graphs.len() as u64;
                for g in &graphs {
                    validate_pairing(g).unwrap();
                    assert_eq!(FeynmanGraph::parse(&g.canonical()).unwrap(), *g);
                }
            }
        }
    }

    #[test]
    fn moved_mark_breaks_leaf_pairing() {
        let g = &enumerate_graphs(1, 2).unwrap()[0];
        let v = g.vertices()[0];
        let sons = g.edges[v].sons.unwrap();
        let mut within = g.clone();
        within.edges[sons[0]].marked = false;
        within.edges[sons[1]].marked = true;
        assert!(matches!(validate_pairing(&within), Err(Violation::LeafPairing(_))));
        let w = g.vertices()[1];
        let mut across = g.clone();
        across.edges[sons[0]].marked = false;
        across.edges[g.edges[w].sons.unwrap()[1]].marked = true;
        assert!(matches!(validate_pairing(&across), Err(Violation::LeafPairing(_))));
    }

    #[test]
    fn partial_order_and_orientation() {
        for g in enumerate_graphs(2, 3).unwrap() {
            for v in g.vertices() {
                for w in g.vertices() {
                    assert!(!(g.precedes(v, w) && g.precedes(w, v)));
                }
                for s in g.edges[v].sons.unwrap() {
                    assert!(g.precedes(v, s));
                    assert_eq!(g.edges[s].tau, g.edges[v].tau);
                }
            }
        }
    }

    #[test]
    fn power_counting_examples() {
        assert_eq!(power_counting(1, 0).total, -5);
        let p = power_counting(1, 1);
        assert_eq!((p.volume, p.leaf, p.propagator, p.observable, p.total), (20, -10, -10, -6, -6));
        assert_eq!(power_counting(2, 3).total, -13);
    }

    #[test]
    fn amplitude_bound_records() {
        assert_eq!(amplitude_bound(1, 0, 2.0).t_exponent, 0.0);
        let b = amplitude_bound(1, 4, 2.0);
        assert_eq!((b.t_exponent, b.constant_exponent), (1.0, 5));
        let b = amplitude_bound(1, 2, 0.5);
        assert_eq!((b.graphs, b.multiplicity), (7, Multiplicity::Enumerated));
        assert_eq!(amplitude_bound(4, 8, 1.0).multiplicity, Multiplicity::Bound);
    }

    #[test]
    fn canonical_roundtrip_rejects_garbage() {
        assert!(FeynmanGraph::parse("L|L;R 0-1").is_err());
        assert!(FeynmanGraph::parse("(L,L);R 0-1;L").is_err());
        let g = FeynmanGraph::parse("(*L,L,L)|L;R 0-1;L 0-3 1-2").unwrap();
        validate_pairing(&g).unwrap();
    }

    proptest! {
        #[test]
        fn power_counting_identity(k in 1u32..=10, m in 0u32..=10) {
            let p = power_counting(k, m);
            prop_assert_eq!(p.total, -(5 * i64::from(k) + i64::from(m)));
            prop_assert_eq!(p.total, p.volume + p.leaf + p.propagator + p.observable);
        }

        #[test]
        fn canonical_is_idempotent(k in 1u32..=2, m in 0u32..=3, pick in 0usize..1000) {
            let graphs = enumerate_graphs(k, m).unwrap();
            let g = &graphs[pick % graphs.len()];
            let once = g.canonical();
            let twice = FeynmanGraph::parse(&once).unwrap().canonical();
            prop_assert_eq!(once, twice);
        }
    }
}
