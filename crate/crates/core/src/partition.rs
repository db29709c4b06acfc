//! Qubit interaction graphs and k-way qubit assignment.
//!
//! Partitioning runs in three stages: greedy modularity agglomeration
//! (Clauset-Newman-Moore) finds natural communities, [`adjust_to_k`] merges or
//! splits them until exactly `k` remain, and [`assign`] labels them
//! deterministically.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::Circuit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("circuit contains CCX gates; decompose Toffoli gates first")]
    RequiresDecomposition,
    #[error("modularity is undefined on a graph without edges")]
    UndefinedModularity,
    #[error("partition count {k} must be in 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("community {0} is empty")]
    EmptyCommunity(usize),
    #[error("communities do not partition the nodes: {0}")]
    NotAPartition(String),
    #[error("partition id {id} out of range for k = {k}")]
    IdOutOfRange { id: usize, k: usize },
}

/// Weighted undirected qubit-coupling graph. Weights count two-qubit gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    n: usize,
    weights: BTreeMap<(usize, usize), u64>,
}

impl InteractionGraph {
    pub fn new(n: usize) -> Self {
        InteractionGraph {
            n,
            weights: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Add `w` to the weight of edge `{a, b}`. Self-loops and zero weights
    /// are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize, w: u64) {
        assert!(a < self.n && b < self.n, "edge ({}, {}) outside {} nodes", a, b, self.n);
        if a == b || w == 0 {
            return;
        }
        *self.weights.entry((a.min(b), a.max(b))).or_insert(0) += w;
    }

    pub fn weight(&self, a: usize, b: usize) -> u64 {
        self.weights.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        self.weights.iter().map(|(&e, &w)| (e, w))
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.values().sum()
    }

    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0; self.n];
        for (&(a, b), &w) in &self.weights {
            deg[a] += w;
            deg[b] += w;
        }
        deg
    }
}

/// Every two-qubit unitary gate on `(a, b)` adds 1 to the weight of `{a, b}`.
pub fn build_interaction_graph(c: &Circuit) -> Result<InteractionGraph, PartitionError> {
    if c.contains_ccx() {
        return Err(PartitionError::RequiresDecomposition);
    }
    let mut g = InteractionGraph::new(c.num_qubits());
    for gate in c.gates().iter().filter(|g| g.is_two_qubit_unitary()) {
        g.add_edge(gate.qubits[0], gate.qubits[1], 1);
    }
    Ok(g)
}

fn check_partition(n: usize, communities: &[Vec<usize>]) -> Result<Vec<usize>, PartitionError> {
    let mut owner = vec![usize::MAX; n];
    for (ci, comm) in communities.iter().enumerate() {
        if comm.is_empty() {
            return Err(PartitionError::EmptyCommunity(ci));
        }
        for &v in comm {
            if v >= n {
                return Err(PartitionError::NotAPartition(format!("node {} out of range", v)));
            }
            if owner[v] != usize::MAX {
                return Err(PartitionError::NotAPartition(format!("node {} appears twice", v)));
            }
            owner[v] = ci;
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(PartitionError::NotAPartition(format!("node {} not covered", v)));
    }
    Ok(owner)
}

/// Newman modularity `Q = sum_c [ w_in(c)/W - (deg(c)/2W)^2 ]`.
pub fn modularity(g: &InteractionGraph, communities: &[Vec<usize>]) -> Result<f64, PartitionError> {
    let total = g.total_weight();
    if total == 0 {
        return Err(PartitionError::UndefinedModularity);
    }
    let owner = check_partition(g.n, communities)?;
    let mut inner = vec![0u64; communities.len()];
    let mut deg = vec![0u64; communities.len()];
    for ((a, b), w) in g.edges() {
        deg[owner[a]] += w;
        deg[owner[b]] += w;
        if owner[a] == owner[b] {
            inner[owner[a]] += w;
        }
    }
    let w = total as f64;
    Ok(inner
        .iter()
        .zip(&deg)
        .map(|(&i, &d)| i as f64 / w - (d as f64 / (2.0 * w)).powi(2))
        .sum())
}

/// Clauset-Newman-Moore greedy agglomeration.
///
/// Starting from singletons, repeatedly merge the pair of communities with
/// the largest modularity gain while the gain is positive. Gains are compared
/// exactly in integer arithmetic (`2W * w_ij - deg_i * deg_j`, a positive
/// multiple of the real gain); ties go to the pair with the lexicographically
/// smallest `(min node, min node)`. Output communities are sorted internally
/// and ordered by their smallest node.
pub fn greedy_communities(g: &InteractionGraph) -> Vec<Vec<usize>> {
    let mut comms: Vec<Vec<usize>> = (0..g.n).map(|v| vec![v]).collect();
    let two_w = 2 * g.total_weight() as i128;
    let mut deg: Vec<i128> = g.degrees().into_iter().map(i128::from).collect();
    // between[i][j]: edge weight between communities i and j
    let mut between: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); g.n];
    for ((a, b), w) in g.edges() {
        between[a].insert(b, w as i128);
        between[b].insert(a, w as i128);
    }
    let mut alive = vec![true; g.n];

    loop {
        let mut best: Option<(i128, (usize, usize), usize, usize)> = None;
        for i in (0..comms.len()).filter(|&i| alive[i]) {
            for (&j, &w) in &between[i] {
                if j <= i {
                    continue;
                }
                let gain = two_w * w - deg[i] * deg[j];
                if gain <= 0 {
                    continue;
                }
                let key = {
                    let (a, b) = (comms[i][0], comms[j][0]);
                    (a.min(b), a.max(b))
                };
                let better = match &best {
                    None => true,
                    Some((bg, bk, _, _)) => gain > *bg || (gain == *bg && key < *bk),
                };
                if better {
                    best = Some((gain, key, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else { break };

        let moved = std::mem::take(&mut comms[j]);
        comms[i].extend(moved);
        comms[i].sort_unstable();
        deg[i] += deg[j];
        alive[j] = false;
        let links = std::mem::take(&mut between[j]);
        for (other, w) in links {
            between[other].remove(&j);
            if other != i {
                *between[i].entry(other).or_insert(0) += w;
                *between[other].entry(i).or_insert(0) += w;
            }
        }
        between[i].remove(&j);
    }

    let mut out: Vec<Vec<usize>> = comms.into_iter().filter(|c| !c.is_empty()).collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Merge or split communities until exactly `k` remain.
///
/// Too many: merge the two smallest (ties by lowest minimum node). Too few:
/// split the largest (ties by lowest minimum node) into two halves by
/// ascending node id, the lower half taking the extra node on odd sizes.
pub fn adjust_to_k(communities: &[Vec<usize>], k: usize) -> Result<Vec<Vec<usize>>, PartitionError> {
    let n: usize = communities.iter().map(Vec::len).sum();
    if k == 0 || k > n {
        return Err(PartitionError::InvalidK { k, n });
    }
    let mut comms: Vec<Vec<usize>> = communities
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.is_empty() {
                return Err(PartitionError::EmptyCommunity(i));
            }
            let mut c = c.clone();
            c.sort_unstable();
            Ok(c)
        })
        .collect::<Result<_, _>>()?;

    while comms.len() > k {
        comms.sort_by_key(|c| (c.len(), c[0]));
        let mut merged = comms.remove(0);
        merged.append(&mut comms.remove(0));
        merged.sort_unstable();
        comms.push(merged);
    }
    while comms.len() < k {
        comms.sort_by_key(|c| (std::cmp::Reverse(c.len()), c[0]));
        let mut low = comms.remove(0);
        let high = low.split_off(low.len().div_ceil(2));
        comms.push(low);
        comms.push(high);
    }
    comms.sort_by_key(|c| c[0]);
    Ok(comms)
}

/// Surjective map from qubit to partition id in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Assignment {
    k: usize,
    part_of: Vec<usize>,
}

impl Assignment {
    pub fn new(part_of: Vec<usize>, k: usize) -> Result<Self, PartitionError> {
        if k == 0 || k > part_of.len() {
            return Err(PartitionError::InvalidK { k, n: part_of.len() });
        }
        let mut used = vec![false; k];
        for &p in &part_of {
            if p >= k {
                return Err(PartitionError::IdOutOfRange { id: p, k });
            }
            used[p] = true;
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(PartitionError::EmptyCommunity(empty));
        }
        Ok(Assignment { k, part_of })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn part_of(&self, q: usize) -> usize {
        self.part_of[q]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.part_of
    }

    pub fn len(&self) -> usize {
        self.part_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.part_of.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &p in &self.part_of {
            s[p] += 1;
        }
        s
    }

    /// Extend with extra qubits (e.g. communication ancillas) whose
    /// partitions are given explicitly.
    pub(crate) fn extended(&self, extra: &[usize]) -> Assignment {
        let mut part_of = self.part_of.clone();
        part_of.extend_from_slice(extra);
        Assignment { k: self.k, part_of }
    }
}

/// Label communities by ascending minimum node id. The communities must
/// partition `0..n` where `n` is the total node count.
pub fn assign(communities: &[Vec<usize>]) -> Result<Assignment, PartitionError> {
    let n: usize = communities.iter().map(Vec::len).sum();
    let owner = check_partition(n, communities)?;
    let mut order: Vec<usize> = (0..communities.len()).collect();
    order.sort_by_key(|&i| communities[i].iter().min().copied());
    let mut label = vec![0; communities.len()];
    for (new, &old) in order.iter().enumerate() {
        label[old] = new;
    }
    Assignment::new(owner.into_iter().map(|c| label[c]).collect(), communities.len())
}

/// Number of multi-qubit unitary gates whose qubits span more than one
/// partition.
pub fn cut_edges(c: &Circuit, a: &Assignment) -> usize {
    c.gates()
        .iter()
        .filter(|g| g.is_unitary() && g.qubits.len() > 1)
        .filter(|g| g.qubits.iter().any(|&q| a.part_of(q) != a.part_of(g.qubits[0])))
        .count()
}

/// Full three-stage partitioner: communities, adjustment to `k`, labeling.
pub fn partition_circuit(c: &Circuit, k: usize) -> Result<Assignment, PartitionError> {
    let g = build_interaction_graph(c)?;
    if k == 0 || k > g.node_count() {
        return Err(PartitionError::InvalidK { k, n: g.node_count() });
    }
    let comms = greedy_communities(&g);
    assign(&adjust_to_k(&comms, k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_benchmark, Benchmark, DjOracle, Gate};

    fn triangles(bridge: bool) -> InteractionGraph {
        let mut g = InteractionGraph::new(6);
        for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            g.add_edge(a, b, 1);
        }
        if bridge {
            g.add_edge(2, 3, 1);
        }
        g
    }

    #[test]
    fn ghz4_graph_is_a_path() {
        let c = generate_benchmark(Benchmark::Ghz, 4, DjOracle::Balanced).unwrap();
        let g = build_interaction_graph(&c).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![((0, 1), 1), ((1, 2), 1), ((2, 3), 1)]);
    }

    #[test]
    fn repeated_gates_accumulate_weight() {
        let mut c = Circuit::new(2, 0);
        for _ in 0..3 {
            c.push(Gate::cx(1, 0)).unwrap();
        }
        let g = build_interaction_graph(&c).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(0, 1), 3);
    }

    #[test]
    fn single_qubit_gates_give_no_edges() {
        let mut c = Circuit::new(3, 0);
        c.extend([Gate::h(0), Gate::h(1), Gate::h(2)]).unwrap();
        assert_eq!(build_interaction_graph(&c).unwrap().edge_count(), 0);
        c.push(Gate::ccx(0, 1, 2)).unwrap();
        assert_eq!(build_interaction_graph(&c), Err(PartitionError::RequiresDecomposition));
    }

    #[test]
    fn modularity_cases() {
        let g = triangles(false);
        let q = modularity(&g, &[vec![0, 1, 2, 3, 4, 5]]).unwrap();
        assert!(q.abs() < 1e-15);
        let q = modularity(&g, &[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
        let q = modularity(&triangles(true), &[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert!((q - 5.0 / 14.0).abs() < 1e-15);
        assert_eq!(
            modularity(&InteractionGraph::new(3), &[vec![0, 1, 2]]),
            Err(PartitionError::UndefinedModularity)
        );
    }

    #[test]
    fn greedy_cases() {
        assert_eq!(
            greedy_communities(&triangles(false)),
            vec![vec![0, 1, 2], vec![3, 4, 5]]
        );
        let mut k4 = InteractionGraph::new(4);
        for a in 0..4 {
            for b in a + 1..4 {
                k4.add_edge(a, b, 1);
            }
        }
        assert_eq!(greedy_communities(&k4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(
            greedy_communities(&InteractionGraph::new(3)),
            vec![vec![0], vec![1], vec![2]]
        );
    }

    #[test]
    fn adjust_cases() {
        let merged = adjust_to_k(&[vec![0, 1, 2], vec![3, 4], vec![5]], 2).unwrap();
        assert_eq!(merged, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let split = adjust_to_k(&[vec![0, 1, 2, 3]], 2).unwrap();
        assert_eq!(split, vec![vec![0, 1], vec![2, 3]]);
        let same = vec![vec![0, 2], vec![1, 3]];
        assert_eq!(adjust_to_k(&same, 2).unwrap(), same);
        assert!(matches!(adjust_to_k(&same, 0), Err(PartitionError::InvalidK { .. })));
        assert!(matches!(adjust_to_k(&same, 5), Err(PartitionError::InvalidK { .. })));
    }

    #[test]
    fn assign_labels_by_min_node() {
        assert_eq!(assign(&[vec![0, 1], vec![2, 3]]).unwrap().as_slice(), &[0, 0, 1, 1]);
        assert_eq!(assign(&[vec![2, 3], vec![0, 1]]).unwrap().as_slice(), &[0, 0, 1, 1]);
        assert_eq!(assign(&[vec![0], vec![1], vec![2]]).unwrap().as_slice(), &[0, 1, 2]);
        assert_eq!(assign(&[vec![0, 1], vec![]]), Err(PartitionError::EmptyCommunity(1)));
        assert!(matches!(
            assign(&[vec![0, 1], vec![1]]),
            Err(PartitionError::NotAPartition(_))
        ));
    }

    #[test]
    fn cut_edge_cases() {
        let c = generate_benchmark(Benchmark::Ghz, 4, DjOracle::Balanced).unwrap();
        assert_eq!(cut_edges(&c, &Assignment::new(vec![0, 0, 1, 1], 2).unwrap()), 1);
        assert_eq!(cut_edges(&c, &Assignment::new(vec![0, 0, 0, 0], 1).unwrap()), 0);
        assert_eq!(cut_edges(&c, &Assignment::new(vec![0, 1, 2, 3], 4).unwrap()), 3);
    }

    #[test]
    fn assignment_rejects_empty_partitions() {
        assert_eq!(
            Assignment::new(vec![0, 0, 2], 3),
            Err(PartitionError::EmptyCommunity(1))
        );
        assert!(Assignment::new(vec![0, 1], 3).is_err());
    }
}
