//! Distributed computation of joint likelihood functions over sensor networks,
//! and the particle filters built on top of it.
//!
//! The crate provides four building blocks:
//!
//! * [`basis`] — multivariate monomial bases and least-squares fitting of
//!   vector-valued functions onto them;
//! * [`likelihood`] — exponential-family local likelihood models, their
//!   Gaussian specialization, and the sufficient statistic that describes an
//!   approximate joint likelihood function;
//! * [`network`] — sensor network topologies, Metropolis-weight average
//!   consensus, and transmission accounting;
//! * [`filters`] — centralized and consensus-based distributed particle
//!   filters (plain and Gaussian variants);
//! * [`scenario`] — the acoustic-amplitude multi-target tracking scenario used
//!   by the simulation harness.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! enables the standard library and faster matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod basis;
pub mod filters;
pub mod likelihood;
pub mod network;
pub mod rng;
pub mod scenario;
