//! Node layout of the sculpture: positions, neighbour relation and boundary.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SculptureError;

/// Number of nodes in the canonical installation.
pub const CANONICAL_NODE_COUNT: usize = 24;
/// Rows of the canonical grid (short axis).
pub const CANONICAL_ROWS: usize = 4;
/// Columns of the canonical grid (long axis, the sweep direction).
pub const CANONICAL_COLS: usize = 6;
/// Spacing between neighbouring nodes of the canonical grid, in metres.
pub const CANONICAL_SPACING_M: f64 = 1.0;

/// Graph of sensor/actuator nodes hanging from the ceiling.
///
/// Positions are planar coordinates in metres; `x` runs along the long axis of
/// the installation, which is the direction LED sweeps travel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTopology {
    positions: Vec<[f64; 2]>,
    adjacency: Vec<Vec<usize>>,
    edge_nodes: Vec<usize>,
}

/// On-disk form of a topology, as written in a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    /// `[x, y]` in metres, one entry per node.
    pub positions: Vec<[f64; 2]>,
    /// Undirected edges as node-id pairs.
    pub edges: Vec<[usize; 2]>,
    /// Boundary nodes. Derived from the grid degree when omitted.
    #[serde(default)]
    pub edge_nodes: Option<Vec<usize>>,
}

impl NodeTopology {
    /// Builds a topology and checks symmetry, connectivity and a non-empty boundary.
    pub fn new(
        positions: Vec<[f64; 2]>,
        adjacency: Vec<Vec<usize>>,
        edge_nodes: Vec<usize>,
    ) -> Result<Self, SculptureError> {
        let n = positions.len();
        if n == 0 {
            return Err(SculptureError::Topology("topology has no nodes".into()));
        }
        if adjacency.len() != n {
            return Err(SculptureError::Topology(format!(
                "adjacency has {} rows for {n} nodes",
                adjacency.len()
            )));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SculptureError::Topology("non-finite node position".into()));
        }
        for (a, neighbours) in adjacency.iter().enumerate() {
            for &b in neighbours {
                if b >= n || b == a {
                    return Err(SculptureError::Topology(format!("bad neighbour {b} of node {a}")));
                }
                if !adjacency[b].contains(&a) {
                    return Err(SculptureError::Topology(format!(
                        "adjacency not symmetric between {a} and {b}"
                    )));
                }
            }
        }
        if edge_nodes.is_empty() {
            return Err(SculptureError::Topology("no edge nodes".into()));
        }
        if let Some(&bad) = edge_nodes.iter().find(|&&e| e >= n) {
            return Err(SculptureError::Topology(format!("edge node {bad} out of range")));
        }
        let topo = Self { positions, adjacency, edge_nodes };
        if topo.distances_from(0).iter().any(Option::is_none) {
            return Err(SculptureError::Topology("graph is not connected".into()));
        }
        Ok(topo)
    }

    /// Rectangular grid with 4-neighbour adjacency. Node ids run row-major:
    /// `id = row * cols + col`.
    pub fn grid(rows: usize, cols: usize, spacing_m: f64) -> Result<Self, SculptureError> {
        if rows == 0 || cols == 0 {
            return Err(SculptureError::Topology("grid needs at least one row and column".into()));
        }
        let id = |r: usize, c: usize| r * cols + c;
        let mut positions = Vec::with_capacity(rows * cols);
        let mut adjacency = vec![Vec::new(); rows * cols];
        let mut edge_nodes = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                positions.push([c as f64 * spacing_m, r as f64 * spacing_m]);
                let me = id(r, c);
                if r > 0 {
                    adjacency[me].push(id(r - 1, c));
                }
                if c > 0 {
                    adjacency[me].push(id(r, c - 1));
                }
                if c + 1 < cols {
                    adjacency[me].push(id(r, c + 1));
                }
                if r + 1 < rows {
                    adjacency[me].push(id(r + 1, c));
                }
                if r == 0 || c == 0 || r + 1 == rows || c + 1 == cols {
                    edge_nodes.push(me);
                }
            }
        }
        Self::new(positions, adjacency, edge_nodes)
    }

    /// The 4×6 grid used throughout the build.
    pub fn canonical() -> Self {
        Self::grid(CANONICAL_ROWS, CANONICAL_COLS, CANONICAL_SPACING_M)
            .expect("canonical grid is valid")
    }

    pub fn from_file_contents(file: TopologyFile) -> Result<Self, SculptureError> {
        let n = file.positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for [a, b] in file.edges {
            if a >= n || b >= n {
                return Err(SculptureError::Topology(format!("edge ({a}, {b}) out of range")));
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let edge_nodes = match file.edge_nodes {
            Some(e) => e,
            None => {
                let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
                (0..n).filter(|&i| adjacency[i].len() < max_degree).collect()
            }
        };
        Self::new(file.positions, adjacency, edge_nodes)
    }

    /// Loads a topology from a TOML file.
    pub fn load(path: &Path) -> Result<Self, SculptureError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SculptureError::Topology(format!("{}: {e}", path.display())))?;
        let file: TopologyFile = toml::from_str(&text)
            .map_err(|e| SculptureError::Topology(format!("{}: {e}", path.display())))?;
        Self::from_file_contents(file)
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn edge_nodes(&self) -> &[usize] {
        &self.edge_nodes
    }

    pub fn is_edge(&self, node: usize) -> bool {
        self.edge_nodes.contains(&node)
    }

    pub fn check_node(&self, node: usize) -> Result<(), SculptureError> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(SculptureError::NodeOutOfRange { node, count: self.node_count() })
        }
    }

    /// Breadth-first hop counts from `source`; `None` marks unreachable nodes.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Nodes grouped into columns along the long (`x`) axis, ordered by
    /// increasing `x`. Nodes within a column are ordered by id.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.node_count()).collect();
        order.sort_by(|&a, &b| {
            self.positions[a][0].total_cmp(&self.positions[b][0]).then(a.cmp(&b))
        });
        let mut columns: Vec<Vec<usize>> = Vec::new();
        let mut last_x = f64::NEG_INFINITY;
        for id in order {
            let x = self.positions[id][0];
            if columns.is_empty() || (x - last_x).abs() > 1e-6 {
                columns.push(Vec::new());
                last_x = x;
            }
            columns.last_mut().unwrap().push(id);
        }
        for col in &mut columns {
            col.sort_unstable();
        }
        columns
    }

    /// Stable fingerprint used to refuse mixing runs over different layouts.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for p in &self.positions {
            hasher.update(p[0].to_le_bytes());
            hasher.update(p[1].to_le_bytes());
        }
        for (i, list) in self.adjacency.iter().enumerate() {
            for &j in list {
                hasher.update((i as u64).to_le_bytes());
                hasher.update((j as u64).to_le_bytes());
            }
        }
        hex::encode(&hasher.finalize()[..8])
    }
}
