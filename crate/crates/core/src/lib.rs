//! Bilateral automated negotiation under the alternating offers protocol.
//!
//! Offer spaces and utilities live in [`domain`], the protocol engine in
//! [`protocol`], agents in [`strategy`] and [`model`], game-theoretic
//! analysis in [`game`], and batch experiments in [`tournament`].

pub mod domain;
pub mod error;
pub mod game;
pub mod io;
pub mod model;
pub mod protocol;
pub mod seed;
pub mod strategy;
pub mod tournament;

pub use error::{Error, Result};
