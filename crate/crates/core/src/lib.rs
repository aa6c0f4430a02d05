//! Intent-based orchestration of encrypted multi-layer transport services.
//!
//! A request names two sites, a bandwidth and an encryption constraint. The
//! [`compiler`] picks the encryption layer and the optical path, the
//! [`southbound`] module installs the result on simulated devices with a
//! two-phase commit, and the [`orchestrator`] keeps intents, reservations and
//! the event log consistent across link failures and restarts.

pub mod compiler;
pub mod fixtures;
pub mod intent;
pub mod orchestrator;
pub mod southbound;
pub mod topology;
