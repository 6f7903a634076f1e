//! Covariance estimation with shrinkage and Riemannian geometry on the SPD
//! manifold: matrix log/exp, geometric (Karcher) mean, tangent-space
//! vectorization, and the multi-band covariance tangent-space (CMTS) feature
//! extractor.

mod features;
mod spd;

pub use features::{
    band_window_covariances, extract_cmts_sequence, project_windows, streaming_window_features,
    FeatureConfig, WindowCovariances,
};
pub use spd::{
    clamp_events, covariance, geometric_mean, spd_exp, spd_log, symmetric_to_vector,
    tangent_project, tangent_retract, vector_to_symmetric, GeometricMean, Shrinkage, SpdMatrix,
    TangentVector,
};
