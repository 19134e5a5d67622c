//! Simulation and analysis toolkit for polarization–OAM hybrid entanglement.
//!
//! A polarization-entangled photon pair is produced, one photon's qubit is
//! moved into the `{|+2>, |−2>}` orbital-angular-momentum subspace by a
//! q-plate transferrer, and the resulting hybrid state is characterized by
//! tomography, fringe visibility and a CHSH test.
//!
//! ```
//! use hybrident::prelude::*;
//!
//! let rho = hybrid_state(&singlet(), TransferMode::Probabilistic)?;
//! assert!((rho.success_probability - 0.5).abs() < 1e-12);
//! let s = chsh_exact(&rho.state, &paper_settings())?.s;
//! assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-9);
//! # Ok::<(), hybrident::Error>(())
//! ```

pub mod bell;
pub mod budget;
pub mod elements;
mod error;
pub mod linalg;
pub mod measurement;
pub mod report;
pub mod source;
pub mod states;
pub mod tomography;

pub use error::{Error, Result};

/// The commonly used types and functions.
pub mod prelude {
    pub use crate::bell::{
        chsh_empirical, chsh_exact, correlation, paper_settings, ChshSettings, DichotomicObservable,
    };
    pub use crate::budget::RateBudget;
    pub use crate::elements::{
        fiber_compensation, half_waveplate, polarizer, qplate, quarter_waveplate, smf_filter, transferrer_o2_to_pi,
        transferrer_pi_to_o2, MapKind, OpticalMap, TransferMode,
    };
    pub use crate::measurement::{fit_fringe, fringe_scan, simulate_counts, MeasurementSetting, Projector};
    pub use crate::source::{apply_noise, hybrid_state, hybrid_target, singlet, singlet_ket, NoiseModel};
    pub use crate::states::{basis_ket, tensor, BasisLabel, DensityMatrix, Factor, Operator, StateVector, Tensor};
    pub use crate::tomography::{
        concurrence, fidelity, linear_entropy, linear_inversion, mle_reconstruct, TomographyData, TomographyRun,
    };
    pub use crate::{Error, Result};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/elements.md")]
    mod elements {}
    #[doc = include_str!("../../../book/src/source.md")]
    mod source {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/tomography.md")]
    mod tomography {}
    #[doc = include_str!("../../../book/src/bell.md")]
    mod bell {}
    #[doc = include_str!("../../../book/src/budget.md")]
    mod budget {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
