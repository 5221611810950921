//! Hybrid quantum-classical reinforcement learning in moving-target
//! Gridworlds.
//!
//! The crate is organised bottom-up:
//!
//! * [`env`]: deterministic, strictly episodic Gridworld with moving targets,
//!   layout files and brute-force enumeration of rewarded action sequences.
//! * [`ps`]: Projective Simulation memory (h-values, glow, dissipation, map).
//! * [`amplification`]: exact emulation of amplitude amplification over the
//!   agent's sequence distribution.
//! * [`agents`]: the classical PS agent and the hybrid agent.
//! * [`experiments`]: scenario orchestration and statistics.
//! * [`io`]: config files, trace/summary serialization and the CLI.

pub mod agents;
pub mod amplification;
pub mod env;
pub mod experiments;
pub mod io;
pub mod ps;
pub mod sequence;
