//! Parallel transport of Kähler quantizations of linear bosonic and fermionic
//! phase spaces, with the numerical checks that go with it.

pub mod boson_quant;
pub mod error;
pub mod fermion_quant;
pub mod grassmann;
pub mod harness;
pub mod phase_space;
pub mod scalars_matrices;
pub mod symm_space;
pub mod symmetry;

pub use boson_quant::{BosonInput, GaussianState, Polynomial, PolynomialSection, QuadratureTransport};
pub use error::{Error, Result};
pub use fermion_quant::{FermionContext, FermionHolonomy, HilbertSubspace, TransportOperator};
pub use grassmann::{GrassmannAlgebra, GrassmannElement, Measure};
pub use harness::{run_suite, Check, ConfigError, Format, ScenarioConfig, Suite, VerificationReport};
pub use phase_space::{ComplexStructure, Family, GraphChart, LinearPhaseSpace, UnitaryFrame};
pub use scalars_matrices::{BranchTrackedScalar, CMatrix, C64};
pub use symm_space::GeodesicPath;
pub use symmetry::{GroupAction, Representation, TorusFixedPoints};
