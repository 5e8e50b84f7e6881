//! Network topologies and combination weight matrices.
//!
//! Topologies are random geometric graphs: nodes drawn uniformly over a
//! square region, with an edge wherever two nodes are within the connectivity
//! radius. Every node is its own neighbor, and generation rejects
//! disconnected draws so that estimates can propagate across the whole
//! network.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, purpose};

/// Tolerance on combination-matrix column sums.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// How many position redraws to attempt before giving up on connectivity.
pub const CONNECTIVITY_RETRY_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "could not draw a connected graph in {retries} attempts \
         (n={n}, region={region}, radius={radius}); increase the radius"
    )]
    Disconnected {
        retries: usize,
        n: usize,
        region: f64,
        radius: f64,
    },
}

/// A random geometric graph with self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    region: f64,
    radius: f64,
    positions: Vec<[f64; 2]>,
    adjacency: Vec<Vec<bool>>,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Node count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length of the square node region.
    pub fn region(&self) -> f64 {
        self.region
    }

    /// Connectivity radius.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Node coordinates in `[0, region]^2`.
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Whether `l` and `k` are linked. Always true for `l == k`.
    pub fn adjacent(&self, l: usize, k: usize) -> bool {
        self.adjacency[l][k]
    }

    /// Neighbors of `k` (sorted, includes `k` itself).
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// Degree of `k` excluding the self-loop.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len() - 1
    }

    /// Undirected edges `(l, k)` with `l < k`, excluding self-loops.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for l in 0..self.n {
            for k in (l + 1)..self.n {
                if self.adjacency[l][k] {
                    out.push((l, k));
                }
            }
        }
        out
    }

    /// Export as CSV: a `node,x,y` section followed by an `l,k` edge section.
    /// Node and edge indices are 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,x,y\n");
        for (i, p) in self.positions.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, p[0], p[1]));
        }
        s.push_str("l,k\n");
        for (l, k) in self.edges() {
            s.push_str(&format!("{},{}\n", l + 1, k + 1));
        }
        s
    }
}

fn connected(adjacency: &[Vec<bool>]) -> bool {
    // Union-find over the edge set; the test suite cross-checks with BFS.
    let n = adjacency.len();
    if n == 0 {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for l in 0..n {
        for k in (l + 1)..n {
            if adjacency[l][k] {
                let (a, b) = (find(&mut parent, l), find(&mut parent, k));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let root = find(&mut parent, 0);
    (1..n).all(|k| find(&mut parent, k) == root)
}

/// Draw a connected random geometric graph.
///
/// Positions are uniform over `[0, region]^2`; nodes `l != k` are linked when
/// their Euclidean distance is at most `radius`. Disconnected draws are
/// redrawn with successive derived seeds, up to [`CONNECTIVITY_RETRY_CAP`]
/// attempts. Deterministic for a fixed seed.
pub fn generate_topology(
    n: usize,
    region: f64,
    radius: f64,
    seed: u64,
) -> Result<NetworkTopology, TopologyError> {
    if n == 0 {
        return Err(TopologyError::InvalidParameter("n must be >= 1".into()));
    }
    if !(region > 0.0) {
        return Err(TopologyError::InvalidParameter(
            "region must be > 0".into(),
        ));
    }
    if !(radius >= 0.0) {
        return Err(TopologyError::InvalidParameter(
            "radius must be >= 0".into(),
        ));
    }

    for attempt in 0..CONNECTIVITY_RETRY_CAP {
        let mut rng = rng::stream(seed, &[purpose::TOPOLOGY, attempt as u64]);
        let positions: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen::<f64>() * region, rng.gen::<f64>() * region])
            .collect();

        let mut adjacency = vec![vec![false; n]; n];
        for l in 0..n {
            adjacency[l][l] = true;
            for k in (l + 1)..n {
                let dx = positions[l][0] - positions[k][0];
                let dy = positions[l][1] - positions[k][1];
                if (dx * dx + dy * dy).sqrt() <= radius {
                    adjacency[l][k] = true;
                    adjacency[k][l] = true;
                }
            }
        }

        if connected(&adjacency) {
            let neighbors = (0..n)
                .map(|k| (0..n).filter(|&l| adjacency[l][k]).collect())
                .collect();
            return Ok(NetworkTopology {
                n,
                region,
                radius,
                positions,
                adjacency,
                neighbors,
            });
        }
    }

    Err(TopologyError::Disconnected {
        retries: CONNECTIVITY_RETRY_CAP,
        n,
        region,
        radius,
    })
}

/// Weight assignment rule for estimate fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinationRule {
    /// No cooperation: each node keeps its own estimate.
    Identity,
    /// Degree-based symmetric, doubly stochastic weights.
    Metropolis,
    /// Equal split over the neighborhood (including self).
    Uniform,
}

/// An `N x N` nonnegative matrix with unit column sums, supported on the
/// topology's neighborhoods. Entry `(l, k)` weights node `l`'s contribution
/// to node `k`'s fused estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    n: usize,
    rule: CombinationRule,
    entries: DMatrix<f64>,
}

impl CombinationMatrix {
    /// Wrap explicit entries. Callers own the invariants; check them with
    /// [`validate_combination_matrix`].
    pub fn from_entries(entries: DMatrix<f64>, rule: CombinationRule) -> Self {
        assert!(entries.is_square(), "combination matrix must be square");
        CombinationMatrix {
            n: entries.nrows(),
            rule,
            entries,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> CombinationRule {
        self.rule
    }

    pub fn entry(&self, l: usize, k: usize) -> f64 {
        self.entries[(l, k)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.rule == CombinationRule::Identity
    }
}

/// Build the combination matrix for `rule` on `topology`.
///
/// * identity: `I_N`.
/// * metropolis: off-diagonal `(l, k)` entries `1 / (1 + max(deg_l, deg_k))`
///   for linked `l != k` (degrees exclude the self-loop), diagonal set so
///   each column sums to one. Symmetric and doubly stochastic.
/// * uniform: `1 / |N_k|` down column `k` over the neighborhood of `k`.
pub fn build_combination_matrix(
    topology: &NetworkTopology,
    rule: CombinationRule,
) -> CombinationMatrix {
    let n = topology.n();
    let mut entries = DMatrix::zeros(n, n);
    match rule {
        CombinationRule::Identity => {
            entries.fill_with_identity();
        }
        CombinationRule::Metropolis => {
            for k in 0..n {
                for &l in topology.neighbors(k) {
                    if l != k {
                        let d = topology.degree(l).max(topology.degree(k));
                        entries[(l, k)] = 1.0 / (1.0 + d as f64);
                    }
                }
            }
            for k in 0..n {
                let off: f64 = (0..n).filter(|&l| l != k).map(|l| entries[(l, k)]).sum();
                entries[(k, k)] = 1.0 - off;
            }
        }
        CombinationRule::Uniform => {
            for k in 0..n {
                let share = 1.0 / topology.neighbors(k).len() as f64;
                for &l in topology.neighbors(k) {
                    entries[(l, k)] = share;
                }
            }
        }
    }
    CombinationMatrix { n, rule, entries }
}

/// A single violated combination-matrix invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeEntry { l: usize, k: usize, value: f64 },
    ColumnSum { k: usize, sum: f64 },
    OffSupport { l: usize, k: usize, value: f64 },
    DimensionMismatch { matrix_n: usize, topology_n: usize },
}

/// Result of checking a combination matrix against a topology.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check nonnegativity, unit column sums (tolerance [`COLUMN_SUM_TOL`]), and
/// neighborhood support. Violations are reported, not raised.
pub fn validate_combination_matrix(
    matrix: &CombinationMatrix,
    topology: &NetworkTopology,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if matrix.n() != topology.n() {
        report.violations.push(Violation::DimensionMismatch {
            matrix_n: matrix.n(),
            topology_n: topology.n(),
        });
        return report;
    }
    let n = matrix.n();
    for k in 0..n {
        let mut sum = 0.0;
        for l in 0..n {
            let v = matrix.entry(l, k);
            sum += v;
            if v < 0.0 {
                report
                    .violations
                    .push(Violation::NegativeEntry { l, k, value: v });
            }
            if v != 0.0 && !topology.adjacent(l, k) {
                report
                    .violations
                    .push(Violation::OffSupport { l, k, value: v });
            }
        }
        if (sum - 1.0).abs() > COLUMN_SUM_TOL {
            report.violations.push(Violation::ColumnSum { k, sum });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Independent reachability oracle.
    fn bfs_connected(topology: &NetworkTopology) -> bool {
        let n = topology.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in topology.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// A 3-node path 1-2-3 laid out on a line.
    fn path3() -> NetworkTopology {
        // Spacing 0.5 with radius 0.6 links only consecutive nodes.
        let mut t = generate_topology(3, 1.2, 0.6, 1).unwrap();
        t.positions = vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]];
        t.adjacency = vec![
            vec![true, true, false],
            vec![true, true, true],
            vec![false, true, true],
        ];
        t.neighbors = vec![vec![0, 1], vec![0, 1, 2], vec![1, 2]];
        t
    }

    #[test]
    fn radius_beyond_diagonal_gives_complete_graph() {
        let t = generate_topology(3, 1.2, 2.0, 99).unwrap();
        for l in 0..3 {
            for k in 0..3 {
                assert!(t.adjacent(l, k));
            }
        }
        assert_eq!(t.edges().len(), 3);
    }

    #[test]
    fn zero_radius_fails_disconnected() {
        let err = generate_topology(5, 1.2, 0.0, 3).unwrap_err();
        assert!(matches!(err, TopologyError::Disconnected { .. }));
    }

    #[test]
    fn single_node_is_connected_even_with_zero_radius() {
        let t = generate_topology(1, 1.0, 0.0, 0).unwrap();
        assert!(t.adjacent(0, 0));
        assert_eq!(t.degree(0), 0);
    }

    #[test]
    fn seed_one_twenty_nodes_is_connected_per_bfs() {
        let t = generate_topology(20, 1.2, 0.45, 1).unwrap();
        assert!(bfs_connected(&t));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_topology(20, 1.2, 0.45, 7).unwrap();
        let b = generate_topology(20, 1.2, 0.45, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn positions_stay_in_region() {
        let t = generate_topology(50, 1.2, 0.7, 11).unwrap();
        for p in t.positions() {
            assert!((0.0..=1.2).contains(&p[0]));
            assert!((0.0..=1.2).contains(&p[1]));
        }
    }

    #[test]
    fn identity_rule_builds_identity() {
        let t = generate_topology(6, 1.2, 2.0, 2).unwrap();
        let m = build_combination_matrix(&t, CombinationRule::Identity);
        for l in 0..6 {
            for k in 0..6 {
                assert_eq!(m.entry(l, k), if l == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn metropolis_on_path_matches_hand_evaluation() {
        let t = path3();
        let m = build_combination_matrix(&t, CombinationRule::Metropolis);
        let third = 1.0 / 3.0;
        assert_eq!(m.entry(0, 1), third);
        assert_eq!(m.entry(1, 0), third);
        assert_eq!(m.entry(1, 2), third);
        assert_eq!(m.entry(2, 1), third);
        assert_eq!(m.entry(0, 2), 0.0);
        assert!((m.entry(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.entry(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.entry(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        // Doubly stochastic.
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| m.entry(i, j)).sum();
            let col: f64 = (0..3).map(|j| m.entry(j, i)).sum();
            assert!((row - 1.0).abs() < 1e-15);
            assert!((col - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_rule_splits_equally() {
        let t = generate_topology(4, 1.2, 2.0, 5).unwrap();
        // Complete graph: |N_k| = 4 for every node.
        let m = build_combination_matrix(&t, CombinationRule::Uniform);
        for l in 0..4 {
            for k in 0..4 {
                assert_eq!(m.entry(l, k), 0.25);
            }
        }
    }

    #[test]
    fn validation_passes_for_built_matrices() {
        let t = generate_topology(20, 1.2, 0.45, 1).unwrap();
        for rule in [
            CombinationRule::Identity,
            CombinationRule::Metropolis,
            CombinationRule::Uniform,
        ] {
            let m = build_combination_matrix(&t, rule);
            let report = validate_combination_matrix(&m, &t);
            assert!(report.passed(), "{rule:?}: {:?}", report.violations);
        }
    }

    #[test]
    fn validation_flags_column_sum_violation() {
        let t = generate_topology(3, 1.2, 2.0, 4).unwrap();
        let mut m = build_combination_matrix(&t, CombinationRule::Uniform);
        m.entries[(0, 0)] -= 0.1; // column 0 now sums to 0.9
        let report = validate_combination_matrix(&m, &t);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ColumnSum { k: 0, .. })));
    }

    #[test]
    fn validation_flags_off_support_entry() {
        let t = path3();
        let mut m = build_combination_matrix(&t, CombinationRule::Metropolis);
        m.entries[(0, 2)] = 0.1;
        m.entries[(2, 2)] -= 0.1;
        let report = validate_combination_matrix(&m, &t);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::OffSupport { l: 0, k: 2, .. })));
    }

    #[test]
    fn csv_export_lists_nodes_then_edges() {
        let t = generate_topology(3, 1.2, 2.0, 8).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "node,x,y");
        assert_eq!(lines[4], "l,k");
        assert_eq!(lines.len(), 4 + 1 + 3); // header + 3 nodes + header + 3 edges
    }
}
