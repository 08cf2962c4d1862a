//! Phase-space engine: quadrature means and covariances of Gaussian states.

pub mod heisenberg;
pub mod network;
pub mod state;

pub use heisenberg::{verify_identity, ReceiverAssignment};
pub use network::{beamsplit, epr_pair, ghz_network, squeeze, BeamsplitterSpec, SqueezeParam};
pub use state::{GaussianState, LinearForm, VACUUM_VARIANCE};
