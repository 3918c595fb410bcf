//! Safe continuous-time Q-learning for linear time-invariant plants.
//!
//! The learner estimates the Q-function kernel of the LQR problem from
//! trajectory data alone and drives the plant with a certainty-equivalence
//! controller whose extra term, the gradient of a reciprocal barrier function,
//! keeps the state inside a norm ball. A model-based Riccati/KKT oracle sits
//! next to it for verification.
//!
//! | module | contents |
//! |---|---|
//! | [`matlib`] | small dense matrices, Gaussian elimination, Jacobi eigenvalues |
//! | [`riccati`] | Lyapunov and Kleinman–Newton ARE solvers, ideal weights |
//! | [`plant`] | RK4 plant stepping, closed-loop integration |
//! | [`barrier`] | safe set, reciprocal barrier and its gradient |
//! | [`qlearn`] | quadratic basis, integral TD error, critic/actor laws |
//! | [`safecontrol`] | learned safe controller and the KKT oracle |
//! | [`harness`] | episodes, metrics, safety-gain sweep |
//! | [`config`] | key-value experiment files |
//! | [`report`] | trajectory and sweep CSV output |
//! | [`verify`] | the property suite behind `safeq verify` |

pub mod barrier;
pub mod config;
pub mod error;
pub mod harness;
pub mod matlib;
pub mod plant;
pub mod qlearn;
pub mod report;
pub mod riccati;
pub mod safecontrol;
pub mod verify;

pub use error::{Error, Result};
