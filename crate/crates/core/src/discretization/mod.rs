//! Hexahedral finite elements on the shell and assembly of the Korn forms.

pub(crate) mod assembly;
mod dofs;
mod mesh;
mod sparse;

pub use assembly::{
    assemble_forms, assemble_forms_with, m_orthonormalize, rigid_motion_basis, AssembledForms, AssemblyOptions,
};
pub use dofs::{DofMap, NodeDofs};
pub use mesh::{build_mesh, Cell, NodeLayout, NodeParam, Resolution, ShellMesh};
pub use sparse::{SymCsr, SymPattern};
