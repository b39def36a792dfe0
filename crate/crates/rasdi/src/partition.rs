//! Overlapping vertex partitions of the matrix graph and the restriction
//! operators built from them, all stored as ascending index lists.

use std::collections::BTreeSet;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Undirected sparsity graph: `i ~ j` when either `A[i,j]` or `A[j,i]` is nonzero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    pub fn from_matrix(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square(), "adjacency needs a square matrix");
        let n = a.nrows();
        let mut sets = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] != 0.0 {
                    sets[i].insert(j);
                    sets[j].insert(i);
                }
            }
        }
        AdjacencyGraph {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut sets = vec![BTreeSet::new(); n];
        for &(i, j) in edges {
            assert!(i < n && j < n, "edge endpoint out of range");
            if i != j {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        AdjacencyGraph {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// The set plus all its immediate neighbors, ascending.
    pub fn expand(&self, set: &[usize]) -> Vec<usize> {
        let mut out: BTreeSet<usize> = set.iter().copied().collect();
        for &v in set {
            out.extend(self.neighbors[v].iter().copied());
        }
        out.into_iter().collect()
    }
}

/// Per-partition index sets: owned (`base`), grown by `p` rings (`extended`)
/// and the next ring read from neighbors (`external`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapPartition {
    pub p: usize,
    pub base: Vec<Vec<usize>>,
    pub extended: Vec<Vec<usize>>,
    pub external: Vec<Vec<usize>>,
    pub diff_mask: Vec<bool>,
}

pub fn grow_overlap(
    graph: &AdjacencyGraph,
    base: &[Vec<usize>],
    p: usize,
    diff_mask: &[bool],
) -> Result<OverlapPartition> {
    let n = graph.n();
    if diff_mask.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "differential mask has {} entries for {} vertices",
            diff_mask.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    let mut sorted_base = Vec::with_capacity(base.len());
    for (i, set) in base.iter().enumerate() {
        let mut s = set.clone();
        s.sort_unstable();
        for &v in &s {
            if v >= n {
                return Err(Error::NotACover(format!("vertex {v} out of range in partition {i}")));
            }
            if seen[v] {
                return Err(Error::NotACover(format!("vertex {v} appears twice")));
            }
            seen[v] = true;
        }
        sorted_base.push(s);
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(Error::NotACover(format!("vertex {v} belongs to no partition")));
    }

    let mut extended = Vec::with_capacity(base.len());
    let mut external = Vec::with_capacity(base.len());
    for set in &sorted_base {
        let mut w = set.clone();
        for _ in 0..p {
            w = graph.expand(&w);
        }
        let next = graph.expand(&w);
        let ext: Vec<usize> = next.into_iter().filter(|v| w.binary_search(v).is_err()).collect();
        extended.push(w);
        external.push(ext);
    }
    let part = OverlapPartition {
        p,
        base: sorted_base,
        extended,
        external,
        diff_mask: diff_mask.to_vec(),
    };
    for i in 0..part.count() {
        if part.swallows_all(i) {
            log::warn!("partition {i} with overlap {p} has no external vertices");
        }
    }
    Ok(part)
}

impl OverlapPartition {
    pub fn count(&self) -> usize {
        self.base.len()
    }

    pub fn n(&self) -> usize {
        self.diff_mask.len()
    }

    /// True when partition `i` reads nothing from its neighbors.
    pub fn swallows_all(&self, i: usize) -> bool {
        self.external[i].is_empty()
    }

    /// Index of the partition owning vertex `v`.
    pub fn owner_of(&self, v: usize) -> usize {
        self.base
            .iter()
            .position(|b| b.binary_search(&v).is_ok())
            .expect("base sets cover every vertex")
    }

    /// Mask over `extended[i]` marking the owned entries.
    pub fn owned_mask(&self, i: usize) -> Vec<bool> {
        self.extended[i]
            .iter()
            .map(|v| self.base[i].binary_search(v).is_ok())
            .collect()
    }

    fn set(&self, family: Family, i: usize) -> &[usize] {
        match family {
            Family::Extended | Family::Owned => &self.extended[i],
            Family::External => &self.external[i],
        }
    }

    /// Ascending global indices picked by a selector.
    pub fn indices(&self, sel: &Selector) -> Result<Vec<usize>> {
        self.check(sel)?;
        Ok(self
            .set(sel.family, sel.part)
            .iter()
            .copied()
            .filter(|v| sel.rows.keeps(self.diff_mask[*v]))
            .collect())
    }

    fn check(&self, sel: &Selector) -> Result<()> {
        if sel.part >= self.count() {
            return Err(Error::UnknownSelector(format!(
                "{sel}: only {} partitions",
                self.count()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `W_i^p`.
    Extended,
    /// `W_i^p` positions with zeros outside the owned set.
    Owned,
    /// `W_{i,e}^p`.
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    All,
    Differential,
    Algebraic,
}

impl RowKind {
    fn keeps(self, differential: bool) -> bool {
        match self {
            RowKind::All => true,
            RowKind::Differential => differential,
            RowKind::Algebraic => !differential,
        }
    }
}

/// Names one restriction operator, written `family:part[:d|:a]`,
/// e.g. `extended:0` or `owned:1:d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selector {
    pub family: Family,
    pub part: usize,
    pub rows: RowKind,
}

impl Selector {
    pub fn new(family: Family, part: usize) -> Self {
        Selector {
            family,
            part,
            rows: RowKind::All,
        }
    }

    pub fn with_rows(self, rows: RowKind) -> Self {
        Selector { rows, ..self }
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let fam = match self.family {
            Family::Extended => "extended",
            Family::Owned => "owned",
            Family::External => "external",
        };
        write!(f, "{fam}:{}", self.part)?;
        match self.rows {
            RowKind::All => Ok(()),
            RowKind::Differential => write!(f, ":d"),
            RowKind::Algebraic => write!(f, ":a"),
        }
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownSelector(s.to_string());
        let fields: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(bad());
        }
        let family = match fields[0] {
            "extended" => Family::Extended,
            "owned" => Family::Owned,
            "external" => Family::External,
            _ => return Err(bad()),
        };
        let part = fields[1].parse().map_err(|_| bad())?;
        let rows = match fields.get(2) {
            None => RowKind::All,
            Some(&"d") => RowKind::Differential,
            Some(&"a") => RowKind::Algebraic,
            Some(_) => return Err(bad()),
        };
        Ok(Selector { family, part, rows })
    }
}

/// Applies the selected restriction to a global vector.
pub fn restrict(part: &OverlapPartition, sel: &Selector, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != part.n() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for {} vertices",
            v.len(),
            part.n()
        )));
    }
    let idx = part.indices(sel)?;
    let base = &part.base[sel.part];
    let masked = sel.family == Family::Owned;
    Ok(DVector::from_iterator(
        idx.len(),
        idx.iter().map(|&g| {
            if masked && base.binary_search(&g).is_err() {
                0.0
            } else {
                v[g]
            }
        }),
    ))
}

/// Transpose of `restrict`: scatters a local vector into a zero global one.
pub fn prolong(part: &OverlapPartition, sel: &Selector, local: &DVector<f64>) -> Result<DVector<f64>> {
    let idx = part.indices(sel)?;
    if local.len() != idx.len() {
        return Err(Error::DimensionMismatch(format!(
            "local vector of length {} for {} selected indices",
            local.len(),
            idx.len()
        )));
    }
    let mut out = DVector::zeros(part.n());
    let base = &part.base[sel.part];
    for (a, &g) in idx.iter().enumerate() {
        if sel.family != Family::Owned || base.binary_search(&g).is_ok() {
            out[g] = local[a];
        }
    }
    Ok(out)
}

/// Dense 0/1 matrix of a restriction; for tests and analysis.
pub fn restriction_matrix(part: &OverlapPartition, sel: &Selector) -> Result<DMatrix<f64>> {
    let idx = part.indices(sel)?;
    let base = &part.base[sel.part];
    let mut r = DMatrix::zeros(idx.len(), part.n());
    for (a, &g) in idx.iter().enumerate() {
        if sel.family != Family::Owned || base.binary_search(&g).is_ok() {
            r[(a, g)] = 1.0;
        }
    }
    Ok(r)
}

/// Concatenated external sets in partition order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceMap {
    pub gamma: Vec<usize>,
    /// Partition whose external set each slot came from.
    pub owner: Vec<usize>,
    pub n_gamma: usize,
}

impl InterfaceMap {
    /// Slot range holding `external[i]`.
    pub fn block(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.owner.iter().position(|o| *o == i).unwrap_or(self.n_gamma);
        let len = self.owner.iter().filter(|o| **o == i).count();
        start..start + len
    }

    pub fn gather(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_gamma, self.gamma.iter().map(|&g| z[g]))
    }

    /// Overwrites the interface entries of `z`.
    pub fn scatter_into(&self, zg: &DVector<f64>, z: &mut DVector<f64>) {
        for (s, &g) in self.gamma.iter().enumerate() {
            z[g] = zg[s];
        }
    }

    /// Dense `R_Γ`.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.n_gamma, n);
        for (s, &g) in self.gamma.iter().enumerate() {
            r[(s, g)] = 1.0;
        }
        r
    }
}

pub fn interface_map(part: &OverlapPartition) -> Result<InterfaceMap> {
    let mut gamma = Vec::new();
    let mut owner = Vec::new();
    for (i, ext) in part.external.iter().enumerate() {
        gamma.extend_from_slice(ext);
        owner.extend(std::iter::repeat_n(i, ext.len()));
    }
    if gamma.is_empty() {
        return Err(Error::EmptyInterface);
    }
    let n_gamma = gamma.len();
    Ok(InterfaceMap { gamma, owner, n_gamma })
}

/// On-disk partition description.
///
/// ```json
/// {"vertices": ["i1", "e1", "e2"], "differential": [true, false, false],
///  "base": [["i1"], ["e1", "e2"]], "p": 0}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub vertices: Vec<String>,
    pub differential: Vec<bool>,
    pub base: Vec<Vec<String>>,
    #[serde(default)]
    pub p: usize,
}

impl PartitionSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the partition against a system whose variables are `names`.
    pub fn build(&self, names: &[String], graph: &AdjacencyGraph, diff_mask: &[bool]) -> Result<OverlapPartition> {
        if self.vertices != names {
            return Err(Error::InvalidConfig(
                "partition vertices do not match the system variables".into(),
            ));
        }
        if self.differential != diff_mask {
            return Err(Error::InvalidConfig(
                "partition differential mask does not match the system".into(),
            ));
        }
        let base = self
            .base
            .iter()
            .map(|set| {
                set.iter()
                    .map(|name| {
                        names
                            .iter()
                            .position(|n| n == name)
                            .ok_or_else(|| Error::NotACover(format!("unknown vertex {name}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        grow_overlap(graph, &base, self.p, diff_mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path4() -> AdjacencyGraph {
        AdjacencyGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)])
    }

    #[test]
    fn path_p0() {
        let part = grow_overlap(&path4(), &[vec![0, 1], vec![2, 3]], 0, &[false; 4]).unwrap();
        assert_eq!(part.extended, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(part.external, vec![vec![2], vec![1]]);
    }

    #[test]
    fn path_p1() {
        let part = grow_overlap(&path4(), &[vec![0, 1], vec![2, 3]], 1, &[false; 4]).unwrap();
        assert_eq!(part.extended, vec![vec![0, 1, 2], vec![1, 2, 3]]);
        assert_eq!(part.external, vec![vec![3], vec![0]]);
        let map = interface_map(&part).unwrap();
        assert_eq!(map.gamma, vec![3, 0]);
        assert_eq!(map.n_gamma, 2);
    }

    #[test]
    fn cover_is_checked() {
        let g = path4();
        assert!(matches!(
            grow_overlap(&g, &[vec![0, 1], vec![1, 2, 3]], 0, &[false; 4]),
            Err(Error::NotACover(_))
        ));
        assert!(matches!(
            grow_overlap(&g, &[vec![0, 1], vec![2]], 0, &[false; 4]),
            Err(Error::NotACover(_))
        ));
    }

    #[test]
    fn swallowing_overlap_is_flagged() {
        let part = grow_overlap(&path4(), &[vec![0, 1], vec![2, 3]], 3, &[false; 4]).unwrap();
        assert!(part.swallows_all(0) && part.swallows_all(1));
        assert!(matches!(interface_map(&part), Err(Error::EmptyInterface)));
    }

    #[test]
    fn restrict_and_mask() {
        let part = grow_overlap(&path4(), &[vec![0, 1], vec![2, 3]], 1, &[false; 4]).unwrap();
        let v = DVector::from_vec(vec![10.0, 20.0, 30.0, 40.0]);
        let r = restrict(&part, &"extended:0".parse().unwrap(), &v).unwrap();
        assert_eq!(r.as_slice(), &[10.0, 20.0, 30.0]);
        let r = restrict(&part, &"owned:0".parse().unwrap(), &v).unwrap();
        assert_eq!(r.as_slice(), &[10.0, 20.0, 0.0]);
        let sel: Selector = "extended:1".parse().unwrap();
        let back = prolong(&part, &sel, &restrict(&part, &sel, &v).unwrap()).unwrap();
        assert_eq!(back.as_slice(), &[0.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn differential_split() {
        let part = grow_overlap(&path4(), &[vec![0, 1], vec![2, 3]], 1, &[true, false, true, false]).unwrap();
        assert_eq!(part.indices(&"extended:0:d".parse().unwrap()).unwrap(), vec![0, 2]);
        assert_eq!(part.indices(&"extended:0:a".parse().unwrap()).unwrap(), vec![1]);
        assert_eq!(
            part.indices(&"external:1:a".parse().unwrap()).unwrap(),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn selector_parsing() {
        for s in ["extended:0", "owned:1:d", "external:2:a"] {
            assert_eq!(s.parse::<Selector>().unwrap().to_string(), s);
        }
        for s in ["inner:0", "owned", "owned:x", "owned:0:q", "owned:0:d:1"] {
            assert!(matches!(s.parse::<Selector>(), Err(Error::UnknownSelector(_))));
        }
        let part = grow_overlap(&path4(), &[vec![0, 1], vec![2, 3]], 0, &[false; 4]).unwrap();
        let v = DVector::zeros(4);
        assert!(matches!(
            restrict(&part, &"owned:5".parse().unwrap(), &v),
            Err(Error::UnknownSelector(_))
        ));
    }

    #[test]
    fn spec_roundtrip() {
        let text = r#"{"vertices":["a","b","c","d"],"differential":[true,false,false,false],
                       "base":[["a","b"],["c","d"]],"p":1}"#;
        let spec = PartitionSpec::from_json(text).unwrap();
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let part = spec.build(&names, &path4(), &[true, false, false, false]).unwrap();
        assert_eq!(part.extended[0], vec![0, 1, 2]);
        let back: PartitionSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
