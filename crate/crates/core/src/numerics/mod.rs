//! Linear-algebra kernels shared by every solver.

pub mod cg;
pub mod eigen;
pub mod quadrature;
pub mod skyline;
pub mod sparse;

pub use cg::{cg_solve, cg_solve_with, pcg, CgOptions, CgOutcome, Jacobi, Preconditioner};
pub use eigen::{sym_gen_eig, sym_gen_eig_with, EigenMethod, EigenPair, EigenProblemPair};
pub use skyline::SkylineCholesky;
pub use sparse::{dot, norm2, CsrMatrix, Definiteness, SparseSystem, SymmetricBuilder};
