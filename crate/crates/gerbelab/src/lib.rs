//! gerbelab: a verification laboratory for the differential-geometric and
//! symbolic data attached to the basic gerbe on U(n) and its conjugation
//! equivariance, together with the crossed-module fibre calculus used by
//! string-structure constructions.
//!
//! The crate is organised around six concerns:
//!
//! - [`matkit`] — dense complex linear algebra on small unitary matrices:
//!   Haar sampling, spectral projectors, first-order projector derivatives.
//! - [`excalc`] — numerical exterior calculus: differential forms as
//!   alternating multilinear evaluators, wedge products, finite-difference
//!   exterior derivative, pullbacks and grid integration.
//! - [`simpx`] — simplicial spaces (nerves of group actions, fibre
//!   products), the alternating pullback operator δ, and the bigraded total
//!   complex with its degree-3 cocycle conditions.
//! - [`basicgerbe`] — the spectral constructions on U(n): cut-plane
//!   logarithms, projectors between cut points, the curving 2-form and its
//!   closed form on the maximal-torus cover, the 1-forms α and β, the
//!   3-form ν, the 2-form ω, and the equivariance verification suite.
//! - [`xmcalc`] — symbolic crossed-module calculus: formal group words,
//!   fibre expressions of pulled-back central extensions, exponent-vector
//!   reduction, and the simplicial identities of the action 2-groupoid
//!   nerve and the path-group complex.
//! - [`report`] — machine-readable verification reports.
//!
//! All randomness flows through explicit seeds; suites are deterministic.

// evaluator-closure style keeps signatures long in a few spots
#![allow(clippy::type_complexity)]

pub mod basicgerbe;
pub mod excalc;
pub mod matkit;
pub mod report;
pub mod simpx;
pub mod xmcalc;
