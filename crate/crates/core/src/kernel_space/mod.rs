mod config;
mod functionals;
mod kernel;
mod lattice;
mod phi;

pub use config::{Amplitude, KernelConfig, LatticeConfig};
pub use functionals::{
    compute_k_sup, decay_envelope_check, decay_thresholds, exact_k_sup, kernel_w_norm,
    modulus_w_eps, node_mixed_norm, DecayFit, KSup, Stencil, MAX_FUNCTIONAL_STEP,
};
pub use kernel::{Applied, CoeffSeq, Kernel};
pub use lattice::{Lattice, Placement, MIN_GAP};
pub use phi::{normalize_phi, printed_prefactor, GeneratorPhi, SUPPORT_RADIUS};
