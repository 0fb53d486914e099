//! Conditional mutual information estimation with adversarially trained
//! generator/regressor pairs, plus the k-nearest-neighbor baseline, synthetic
//! data models and a conditional-independence benchmark.
//!
//! ```no_run
//! use cmigan::datagen::gen_linear3;
//! use cmigan::estimators::{cmi_gan_estimate, EstimatorConfig};
//!
//! let (data, _) = gen_linear3(20_000, 5, 1)?;
//! let report = cmi_gan_estimate(&data, &EstimatorConfig::desk_estimation())?;
//! println!("{:.4} ± {:.4}", report.mean, report.std);
//! # Ok::<(), cmigan::Error>(())
//! ```

pub mod bounds;
pub mod citest;
pub mod datagen;
pub mod dataio;
mod error;
pub mod estimators;
pub mod knn;
pub mod neuralnet;
mod sample;

pub use error::{Error, Result};
pub use sample::{Dims, SampleSet};
