//! Temporal CHSH (Leggett-Garg) statistics of qubit channels, hidden
//! nonmacrorealism via stochastic pre/post operations, and CHSH
//! nonlocality-breaking analysis through Choi states.
//!
//! A sequential measurement on a maximally mixed qubit, with a channel acting
//! between the two times, produces two-time correlators bounded by 2 for any
//! macrorealistic (hidden-variable) model. Some channels obey that bound yet
//! violate it once trace-nonincreasing filters are placed before and after
//! the channel and the statistics are conditioned on filter success — hidden
//! nonmacrorealism. The same filters, moved across the maximally entangled
//! state, turn the question into hidden CHSH nonlocality of the channel's
//! Choi state, which is how strongly nonlocality-breaking channels are
//! certified.
//!
//! Module map:
//! - [`cmatrix`]: dense complex matrices and Hermitian spectral operations,
//! - [`quantum`]: states, Kraus channels, observables, Choi states,
//! - [`temporal`]: two-time statistics, the temporal CHSH functional, NSIT
//!   and macrorealism checks,
//! - [`filters`]: filter operations and the activation search,
//! - [`nonlocality`]: Horodecki criterion, local filtering, hidden
//!   nonlocality, and the temporal-spatial bridge,
//! - [`expsim`]: finite-shot Monte Carlo emulation of the photonic test with
//!   its instrumental noise model.
//!
//! All values are immutable after construction and every operation is a pure
//! function, so anything here can be shared read-only across workers.

// Index loops here mirror the tensor-index math (x, y, a, b) and stay.
#![allow(clippy::needless_range_loop)]

pub mod cmatrix;
pub mod expsim;
pub mod filters;
pub mod nonlocality;
pub mod quantum;
pub mod temporal;

pub use cmatrix::{CmatrixError, ComplexMatrix, HermitianSpectrum};
pub use expsim::{experiment_point, perturbed_channel, sample_statistics, NoiseModel, ShotEstimate};
pub use filters::{
    activate, complete_to_channel, generic_filter, sppo_pair, success_probability,
    ActivationResult, FilterError, FilterLabel, FilterSpec, SearchFamily,
};
pub use nonlocality::{
    apply_local_filters, chsh_maximum, correlation_matrix, hidden_nonlocality_search,
    strongly_breaking_assessment, temporal_spatial_consistency, CorrelationMatrix,
    NonlocalityError, NonlocalityVerdict,
};
pub use quantum::{
    amplitude_damping, hwp_interferometer_channel, maximally_mixed, observable_from_bloch, pauli,
    ChannelKind, ChoiState, DensityMatrix, DichotomicObservable, KrausChannel,
    MeasurementScenario, Pauli, QuantumError,
};
pub use temporal::{
    chsh_evaluate, filtered_two_time_distribution, macrorealism_chsh_check, max_chsh_variant,
    nsit_check, two_time_distribution, ChshReport, TemporalError, TwoTimeStatistics,
};
