//! balltrace: joint ball trajectory, ball state, and possessor inference
//! from player tracking data.
//!
//! The ball is small, fast, and frequently occluded, so this crate never
//! looks at it directly. Instead a transformer reads per-player inputs —
//! trajectories, team one-hots, and visual crop features — and jointly
//! predicts where the ball is, whether it is in flight, held, or loose, and
//! who holds it. Everything needed to train and evaluate that model lives
//! here: a synthetic match generator, on-disk formats, the network with
//! hand-written gradients, masking-based pre-training, and a CLI.
//!
//! Start with [`data::Sequence`] for the data model, [`synth`] to make data,
//! and the `book/` guide for a walkthrough.

pub mod crops;
pub mod data;
pub mod error;
pub mod io;
pub(crate) mod rng;
pub mod synth;
