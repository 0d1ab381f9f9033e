//! Trial-to-trial motion refinement for simulated tendon-driven robots.
//!
//! A planned joint trajectory is converted to reference muscle lengths with a
//! nominal kinematic model and executed on a simulated plant whose muscle
//! routing differs from the model. Two modifiers then correct the reference
//! for the next trial:
//!
//! * the antagonist modifier lengthens stretched antagonist muscles in
//!   proportion to their over-threshold tension,
//! * the agonist modifier maps the observed racket-to-target error through the
//!   task Jacobian pseudo-inverse and the joint-muscle Jacobian onto agonist
//!   muscles.
//!
//! Modules: [`model`] (kinematics), [`plant`] (simulated robot),
//! [`refine`] (both modifiers), [`estimator`] (joint angles from muscle
//! lengths), [`perception`] (stereo cameras), [`harness`] (scenarios and CSV
//! output).

pub mod error;
pub mod model;
pub mod estimator;
pub mod harness;
pub mod perception;
pub mod plant;
pub mod refine;
pub mod trajectory;

pub use error::{Error, Result};
