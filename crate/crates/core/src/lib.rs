//! A numerical laboratory for the disc multiplier acting on mixed-norm spaces
//! `L^p_rad L^2_ang`: Bessel kernels, planar Fourier multipliers, Kakeya-type
//! maximal functions, tube overlap, A_p weights and extension estimates.

pub mod bessel;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod maximal;
pub mod planar;
pub mod quad;
pub mod restriction;
pub mod scalar;
pub mod suite;
pub mod tubes;
pub mod weights;

pub use error::{LabError, Result};
pub use scalar::Real;

/// Double-precision instantiations of the generic containers.
pub type RadialGridF64 = grid::RadialGrid<f64>;
pub type RadialProfileF64 = grid::RadialProfile<f64>;
pub type ModeFunctionF64 = grid::ModeFunction<f64>;
pub type BesselValueF64 = bessel::BesselValue<f64>;
