//! Unified Nesterov accelerated gradient methods.
//!
//! The crate collects the discrete momentum schemes (NAG-C, NAG-SC, the
//! unified NAG family and the original estimate-sequence NAG), their
//! continuous-time ODE models, the higher-order tensor extension, and the
//! difference-matrix / differential-kernel view of fixed-step first-order
//! methods. Every scheme ships with its Lyapunov energy and convergence bound
//! so runs can be checked while they execute.
//!
//! ```
//! use unified_momentum::algorithms::{run_scheme, SchemeKind};
//! use unified_momentum::problems::{make_toy_quadratic, Objective};
//! use nalgebra::DVector;
//!
//! let obj = make_toy_quadratic(1e-3);
//! let x0 = DVector::from_vec(vec![1.0, 1.0]);
//! let trace = run_scheme(&obj, SchemeKind::UnifiedConstant, 1.0, obj.strong_convexity(), &x0, 200).unwrap();
//! assert!(trace.energy_violations(1e-10).is_empty());
//! ```

pub mod algorithms;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod hyperbolic;
pub mod kernels;
pub mod problems;
pub mod tensor;

pub use error::{Error, Result};
pub use problems::Objective;
