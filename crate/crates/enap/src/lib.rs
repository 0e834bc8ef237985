//! Mining interpretable probabilistic Mealy machines (PMMs) from continuous
//! trajectory data, and running them as high-level controllers with a learned
//! residual policy on top.
//!
//! The pipeline has three stages:
//!
//! 1. **Symbol abstraction** ([`abstraction`]): encode observations into
//!    feature vectors and discover a discrete input alphabet by density
//!    clustering, so every step of every trajectory carries a symbol.
//! 2. **Structure extraction** ([`lstar_extended`]): an extension of the
//!    classic L* active-learning loop that queries the trajectory database
//!    instead of an oracle and produces a [`core::Pmm`]. The textbook
//!    algorithm it generalizes lives in [`lstar_classic`].
//! 3. **Bi-level control** ([`control`]): the mined machine supplies a coarse
//!    action prior per (state, symbol); a small residual network refines it.
//!    Structure extraction and policy optimization alternate EM-style.
//!
//! Supporting crates-within-the-crate: [`nnkit`] (tiny hand-differentiated
//! networks), [`history_encoder`] (the recurrent prefix embedder and its
//! saturation diagnostics), [`envs`] (deterministic test environments),
//! [`metrics`] (structural evaluation of mined machines) and [`pipeline`]
//! (configuration and stage drivers used by the `enap` binary).
//!
//! Every operation is deterministic given its seed; artifacts serialize to
//! byte-stable JSON so repeated runs diff clean.

pub mod abstraction;
pub mod control;
pub mod core;
pub mod envs;
pub mod history_encoder;
pub mod lstar_classic;
pub mod lstar_extended;
pub mod metrics;
pub mod nnkit;
pub mod pipeline;
