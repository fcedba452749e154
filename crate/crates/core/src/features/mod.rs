//! Summary statistics and feature scaling.

mod pca;
mod summary;
mod zscore;

pub use pca::{build_pca_basis, project_traces, ProtocolBasis, PcaBasis, N_COMPONENTS};
pub use summary::count_summary;
pub use zscore::ZScaler;
