//! Exact Heisenberg-module combinatorics and numerical theta-function
//! machinery for counting the quadrics through abelian surfaces embedded in
//! projective space by a polarization of type (1, n).
//!
//! The crate has two halves that check each other:
//!
//! * exact: the Schroedinger representation ([`heisenberg`]), the
//!   decomposition of the space of quadrics into Heisenberg modules
//!   ([`sym2`]), and the counting arguments that pin down the dimension of
//!   the ideal of quadrics ([`bounds`]);
//! * numerical: Riemann theta evaluation with certified truncation
//!   ([`theta`]) and a rank-certified computation of the space of quadrics
//!   vanishing on the embedded surface from point samples ([`quadrics`]).

pub mod bounds;
pub mod cyclotomic;
pub mod exact;
pub mod heisenberg;
pub mod quadrics;
pub mod report;
pub mod sym2;
pub mod theta;

pub use cyclotomic::Cyc;
pub use heisenberg::{
    act_on_quadric, central_signature, Gen, GroupAction2, HeisenbergError, MonomialMatrix,
    QuadMonomials, SchrodingerRep, Sign, Word,
};
