//! History aggregators for states and rewards.

mod functor;
mod har;
mod kernel;
mod stream;
mod suite;

pub use functor::{Functor, FunctorSpec, Stage};
pub use har::{har_aggregate, har_decode, RewardStream};
pub use kernel::{compose_kernels, convolve, invert_coefficients, invert_kernel, Composition, Kernel, HEAD_TOL};
pub use stream::{
    conv_aggregate, conv_decode, corr_aggregate, corr_decode, group_aggregate, group_decode, kernel_aggregator,
    kernel_decoder, run, BandConv, BandDeconv, Chain, Correlation, CorrelationDecoder, GeometricConv, GeometricDeconv,
    GroupDecoder, Identity, RunningSum, StreamTransform,
};
pub use suite::{
    named_functors, random_band_kernel, reversibility_suite, roundtrip_error, FunctorOutcome, SuiteConfig, SuiteReport,
    ROUNDTRIP_TOL,
};
