//! Discrete-event quantum network simulator whose devices run compiled
//! match+action programs against the V1Quantum architecture.

pub mod arch;
pub mod bmv2;
pub mod control;
pub mod fabric;
pub mod netrunner;
pub mod protocols;
pub mod runtime;
