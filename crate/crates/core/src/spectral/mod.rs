//! Bloch-vector step maps with their spectra, plus the exact averaged channel.

mod channel;
mod eigen;
mod matrix;

pub use channel::{
    evolve_two_point_channel, predict_variance_law, ChannelResult, TwoPointState, VarianceLaw,
    ALIASING_SIGMAS,
};
pub use eigen::{
    eigen_grid, eigenvalues, small_k_expansion, write_eigen_csv, EigenExpansion, EigenFit,
    EigenSample, MIN_R_SQUARED,
};
pub use matrix::{
    averaged_step_matrix, build_step_matrix, dirichlet, kernel_factor, sinc_kernel, Kernel,
    StepMatrix, StepSource,
};
