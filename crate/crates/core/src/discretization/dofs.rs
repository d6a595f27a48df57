//! Node → displacement-DOF numbering with boundary constraints.

use crate::geometry::{BoundaryCondition, Vec3};

use super::mesh::NodeLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeDofs {
    /// Three ambient Cartesian components starting at `first`.
    Free { first: u32 },
    /// Two components along the node's orthonormal tangent pair; the
    /// normal component is constrained to zero.
    Tangent { first: u32 },
    /// All components constrained to zero.
    Fixed,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    nodes: Vec<NodeDofs>,
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
    tangents: Vec<[Vec3; 2]>,
    free: usize,
    constrained: usize,
    boundary: BoundaryCondition,
}

impl DofMap {
    pub fn new(layout: &NodeLayout, boundary: BoundaryCondition) -> Self {
        let mut nodes = Vec::with_capacity(layout.node_count());
        let mut next = 0u32;
        let mut constrained = 0usize;
        for i in 0..layout.node_count() {
            let kind = if !layout.on_boundary[i] {
                let k = NodeDofs::Free { first: next };
                next += 3;
                k
            } else {
                match boundary {
                    BoundaryCondition::NormalClamped => {
                        let k = NodeDofs::Tangent { first: next };
                        next += 2;
                        constrained += 1;
                        k
                    }
                    _ => {
                        constrained += 3;
                        NodeDofs::Fixed
                    }
                }
            };
            nodes.push(kind);
        }
        DofMap {
            nodes,
            positions: layout.positions.clone(),
            normals: layout.normals.clone(),
            tangents: layout.tangent_frames.clone(),
            free: next as usize,
            constrained,
            boundary,
        }
    }

    pub fn free_count(&self) -> usize {
        self.free
    }

    /// Number of scalar displacement components removed by the boundary condition.
    pub fn constrained_count(&self) -> usize {
        self.constrained
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> NodeDofs {
        self.nodes[i]
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.positions[i]
    }

    pub fn normal(&self, i: usize) -> Vec3 {
        self.normals[i]
    }

    /// `(global dof, ambient direction)` pairs spanning the node's admissible displacements.
    pub fn node_basis(&self, i: usize) -> impl Iterator<Item = (usize, Vec3)> + '_ {
        let (first, dirs): (usize, Vec<Vec3>) = match self.nodes[i] {
            NodeDofs::Free { first } => (first as usize, vec![Vec3::x(), Vec3::y(), Vec3::z()]),
            NodeDofs::Tangent { first } => (first as usize, self.tangents[i].to_vec()),
            NodeDofs::Fixed => (0, Vec::new()),
        };
        dirs.into_iter().enumerate().map(move |(k, d)| (first + k, d))
    }

    /// Nodal interpolant of `f(position, surface normal)`, projected onto the
    /// admissible set at constrained nodes.
    pub fn interpolate(&self, f: impl Fn(&Vec3, &Vec3) -> Vec3) -> Vec<f64> {
        let mut x = vec![0.0; self.free];
        for i in 0..self.nodes.len() {
            if self.nodes[i] == NodeDofs::Fixed {
                continue;
            }
            let y = f(&self.positions[i], &self.normals[i]);
            for (d, dir) in self.node_basis(i) {
                x[d] = y.dot(&dir);
            }
        }
        x
    }

    /// Ambient nodal displacement of a DOF vector.
    pub fn nodal_value(&self, x: &[f64], i: usize) -> Vec3 {
        self.node_basis(i).map(|(d, dir)| x[d] * dir).sum()
    }
}
