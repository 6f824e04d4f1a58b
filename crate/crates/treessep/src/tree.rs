//! Geometry of the regular tree where every vertex has `d + 1` neighbors:
//! rooted path-word vertex encoding, adjacency, graph distance, and
//! finite-ball enumeration in BFS order.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Default cap on enumerated ball sizes (vertices).
pub const DEFAULT_VERTEX_CAP: u64 = 1 << 23;

/// A vertex of the rooted regular tree, encoded as the label path from the
/// origin. The empty word is the origin. The first label ranges over
/// `0..=d` (the origin has `d + 1` children); every later label ranges over
/// `0..d` because the parent edge is excluded.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId {
    word: Vec<u8>,
}

impl VertexId {
    pub fn origin() -> Self {
        VertexId { word: Vec::new() }
    }

    /// Validate a label word against the degree parameter `d`.
    pub fn from_labels(d: u32, labels: &[u8]) -> Result<Self> {
        for (i, &l) in labels.iter().enumerate() {
            let limit = if i == 0 { d } else { d - 1 };
            if u32::from(l) > limit {
                return Err(Error::Encoding(format!(
                    "label {l} at position {i} out of range 0..={limit} for d={d}"
                )));
            }
        }
        Ok(VertexId {
            word: labels.to_vec(),
        })
    }

    /// Parse a dot-separated word such as `"0.1.0"`; the empty string (or
    /// `"o"`) is the origin.
    pub fn parse(d: u32, s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "o" {
            return Ok(Self::origin());
        }
        let labels: Vec<u8> = s
            .split('.')
            .map(|part| {
                part.parse::<u8>()
                    .map_err(|_| Error::Encoding(format!("bad label {part:?}")))
            })
            .collect::<Result<_>>()?;
        Self::from_labels(d, &labels)
    }

    pub fn is_origin(&self) -> bool {
        self.word.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.word
    }

    pub fn parent(&self) -> Option<VertexId> {
        if self.word.is_empty() {
            None
        } else {
            Some(VertexId {
                word: self.word[..self.word.len() - 1].to_vec(),
            })
        }
    }

    pub fn child(&self, label: u8) -> VertexId {
        let mut word = self.word.clone();
        word.push(label);
        VertexId { word }
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VertexId({self})")
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "o");
        }
        let parts: Vec<String> = self.word.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Neighbors of `v`: the parent (when `v` is not the origin) plus children.
/// Every vertex has exactly `d + 1` neighbors.
pub fn neighbors(v: &VertexId, d: u32) -> Vec<VertexId> {
    let mut out = Vec::with_capacity(d as usize + 1);
    if let Some(p) = v.parent() {
        out.push(p);
        for l in 0..d {
            out.push(v.child(l as u8));
        }
    } else {
        for l in 0..=d {
            out.push(v.child(l as u8));
        }
    }
    out
}

/// Tree distance: `|u| + |v| - 2 * |longest common prefix|`.
pub fn distance(u: &VertexId, v: &VertexId) -> usize {
    let a = u.labels();
    let b = v.labels();
    let lcp = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
    a.len() + b.len() - 2 * lcp
}

/// Number of vertices at distance exactly `k` from any fixed vertex.
pub fn sphere_size(d: u32, k: usize) -> u64 {
    if k == 0 {
        1
    } else {
        u64::from(d + 1) * u64::from(d).pow(k as u32 - 1)
    }
}

/// Sphere size as `f64`, usable at distances where the count overflows u64.
pub fn sphere_size_f(d: u32, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        f64::from(d + 1) * f64::from(d).powi(k as i32 - 1)
    }
}

/// Number of vertices within distance `r`.
pub fn ball_size(d: u32, r: u32) -> u64 {
    (0..=r as usize).map(|k| sphere_size(d, k)).sum()
}

/// A finite ball of the tree with dense vertex indices in BFS order.
///
/// Being a subtree, the ball has `|V| - 1` edges and edge `e` connects
/// vertex `e + 1` to its parent.
pub struct Ball {
    d: u32,
    radius: u32,
    vertices: Vec<VertexId>,
    parent: Vec<u32>,
    depth: Vec<u16>,
    children: Vec<Vec<u32>>,
    index: HashMap<VertexId, usize>,
    // CSR of incident edge ids per vertex, for the simulator hot path.
    incident_flat: Vec<u32>,
    incident_off: Vec<u32>,
}

impl Ball {
    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertex(&self, i: usize) -> &VertexId {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    /// Dense index of a vertex, if it lies in the ball.
    pub fn index_of(&self, v: &VertexId) -> Option<usize> {
        self.index.get(v).copied()
    }

    /// Distance of vertex `i` from the origin.
    pub fn depth_of(&self, i: usize) -> usize {
        self.depth[i] as usize
    }

    /// Endpoints of edge `e` (parent, child).
    pub fn edge(&self, e: usize) -> (usize, usize) {
        (self.parent[e + 1] as usize, e + 1)
    }

    pub fn parent_of(&self, i: usize) -> Option<usize> {
        if i == 0 {
            None
        } else {
            Some(self.parent[i] as usize)
        }
    }

    pub fn children_of(&self, i: usize) -> &[u32] {
        &self.children[i]
    }

    /// Neighbor indices inside the ball.
    pub fn neighbors_of(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.d as usize + 1);
        if i != 0 {
            out.push(self.parent[i] as usize);
        }
        out.extend(self.children[i].iter().map(|&c| c as usize));
        out
    }

    /// Edge ids incident to vertex `i`, allocation-free.
    #[inline]
    pub fn incident_edges(&self, i: usize) -> &[u32] {
        &self.incident_flat[self.incident_off[i] as usize..self.incident_off[i + 1] as usize]
    }

    /// Interior degree of vertex `i` (number of incident edges in the ball).
    pub fn degree(&self, i: usize) -> usize {
        self.children[i].len() + usize::from(i != 0)
    }

    /// Distance between two ball vertices via their words.
    pub fn dist(&self, i: usize, j: usize) -> usize {
        distance(&self.vertices[i], &self.vertices[j])
    }
}

/// Enumerate the ball of given radius with the default size cap.
pub fn build_ball(d: u32, radius: u32) -> Result<Ball> {
    build_ball_with_cap(d, radius, DEFAULT_VERTEX_CAP)
}

pub fn build_ball_with_cap(d: u32, radius: u32, cap: u64) -> Result<Ball> {
    if d < 2 {
        return Err(Error::Domain(format!("degree parameter d={d} must be >= 2")));
    }
    let total = ball_size(d, radius);
    if total > cap {
        return Err(Error::BallTooLarge {
            vertices: total,
            cap,
        });
    }
    let total = total as usize;
    let mut vertices = Vec::with_capacity(total);
    let mut parent = vec![0u32; total];
    let mut depth = vec![0u16; total];
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); total];
    vertices.push(VertexId::origin());
    let mut shell_start = 0usize;
    for k in 0..radius {
        let shell_end = vertices.len();
        for vi in shell_start..shell_end {
            let v = vertices[vi].clone();
            let labels: u8 = if v.is_origin() { d as u8 + 1 } else { d as u8 };
            for l in 0..labels {
                let c = v.child(l);
                let ci = vertices.len();
                vertices.push(c);
                parent[ci] = vi as u32;
                depth[ci] = k as u16 + 1;
                children[vi].push(ci as u32);
            }
        }
        shell_start = shell_end;
    }
    debug_assert_eq!(vertices.len(), total);
    let index: HashMap<VertexId, usize> = vertices
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let mut incident_flat = Vec::with_capacity(2 * total.saturating_sub(1));
    let mut incident_off = Vec::with_capacity(total + 1);
    incident_off.push(0u32);
    for i in 0..total {
        if i != 0 {
            incident_flat.push(i as u32 - 1);
        }
        incident_flat.extend(children[i].iter().map(|&c| c - 1));
        incident_off.push(incident_flat.len() as u32);
    }
    Ok(Ball {
        d,
        radius,
        vertices,
        parent,
        depth,
        children,
        index,
        incident_flat,
        incident_off,
    })
}
