//! Eigenvalue sequences, partial sums and integral sequences.

mod asymptotic;
mod dsl;
mod eigen;
mod partial;
mod sequence;

pub use dsl::{load_file, make_family};
pub use eigen::{eig_sym_small, DenseMatrix, MAX_DIM};
pub use partial::{PartialSumRow, PartialSumTable};
pub use sequence::{
    cross_ratio, DeclaredClass, Family, Index, PartialSums, SpectralSequence, SummabilityClass,
    SummabilityInfo, DIRECT_LIMIT, PROBE_LEN, TRACE_CUTOFF,
};
