//! Thermodynamic formalism for countably-full-branched expanding interval
//! maps with heavy-tailed observables.
//!
//! * [`systems`]: branch geometry, observables and the builtin examples
//! * [`pressure`]: pressure sandwiches, Gibbs weights, gradients, Bowen dimension
//! * [`tail`]: numerical checks of the shell conditions and tail exponents
//! * [`spectrum`]: the Birkhoff spectrum `alpha -> b(alpha)` by Newton continuation
//! * [`rate`]: decay of `b* - b(alpha)` and the scaled-limit probes
//! * [`cli`]: the command runner behind the `birkhoff` binary

pub mod cli;
pub mod error;
pub mod numeric;
pub mod pressure;
pub mod rate;
pub mod series;
pub mod spectrum;
pub mod systems;
pub mod tail;

pub use error::{Error, Result};
pub use pressure::{Potential, PressureEstimate};
pub use systems::descriptor::SystemSpec;
pub use systems::{build_builtin, System};
