//! Stencil computation by domain translation on a torus of workers.

pub mod grid;
pub mod kernels;
pub mod perfmodel;
pub mod netsim;
pub mod engine;
pub mod studies;
