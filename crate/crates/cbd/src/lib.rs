//! Contextuality analysis for systems of dichotomous (0/1) random variables.
//!
//! A *system* is a family of random variables `R_q^c` indexed by the property
//! they measure (the *content* `q`) and the conditions they are measured
//! under (the *context* `c`).  Variables sharing a context are jointly
//! distributed (a *bunch*); variables sharing a content across contexts are
//! stochastically unrelated (a *connection*).  The system is *noncontextual*
//! when all bunches can be coupled into one joint distribution in which every
//! connection is coupled multimaximally, i.e. each pair of its variables is
//! equal with the largest probability its marginals allow.
//!
//! This crate represents couplings through Boolean incidence matrices over
//! the deterministic assignments of all variables and reduces each question
//! about a system to a small linear program:
//!
//! * [`measures::is_contextual`] decides existence of a multimaximally
//!   connected coupling,
//! * [`measures::cnt1`], [`measures::cnt2`], [`measures::cnt3`] quantify
//!   *how* contextual a system is in three inequivalent ways,
//! * [`measures::cntf`] is the contextual fraction,
//! * [`measures::ncnt2`] quantifies how noncontextual a noncontextual
//!   system is.
//!
//! All computations run in one of two arithmetic modes: exact rational
//! arithmetic ([`num::BigRational`]) or `f64` with fixed tolerances.  The
//! [`scalar::Scalar`] trait abstracts over the two.

#![forbid(unsafe_code)]

pub mod cyclic;
pub mod io;
pub mod lp;
pub mod measures;
pub mod oracle;
pub mod scalar;
pub mod space;
pub mod system;

pub use num::BigRational;
