//! Test support for `hoi-points`: deterministic synthetic scenes, random
//! small instances, and brute-force oracles that share no geometry or
//! matching code with the library they check.

pub mod oracle;
pub mod random;
pub mod synth;

pub use oracle::{oracle_ap, oracle_group, oracle_map, OracleTriplet};
pub use synth::{synth_scene, GtPair, SceneBundle, SceneSpec, SynthError};
