//! Kronecker-factored curvature: factor construction, moving averages and
//! the preconditioned update `U = (G + lambda I)^{-1} D Theta (A + lambda I)^{-1}`.

mod backend;
mod factors;
mod update;

pub use backend::{
    ExactSolver, FactorRole, FactorSolver, QuantizedSolver, SolveContext, Solved, ThermoSolver,
};
pub use factors::{
    compute_factors_expand, compute_factors_mlp, compute_factors_reduce, ema_update,
    GNormalization, KroneckerFactorPair, Tensor3,
};
pub use update::{
    apply_update, block_fisher_oracle, kfac_update, kfac_update_inversion, kfac_update_linsys,
    Backend, KfacConfig, LayerGradient, LayerUpdate, Method,
};
