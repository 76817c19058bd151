//! Characterization of wide-color-gamut content by the perceptual difference
//! that successive gamut reduction induces, dataset coverage and uniformity
//! criteria, representative content selection, and a CID-gain benchmark for
//! gamut mapping operators.

pub mod cid;
pub mod cli;
pub mod color;
pub mod corpus;
pub mod criteria;
pub mod error;
pub mod gamut_mapping;
pub mod image_io;
pub mod perceptual;
pub mod selection;
pub mod stats;
pub mod window;

pub use cid::{cid, cid_gain, BenchmarkConfig, BenchmarkReport, CidGainRecord};
pub use color::{BuiltinGamut, Chromaticity, Encoding, Gamut, LinearImage};
pub use criteria::{CriteriaReport, FeatureMatrix};
pub use error::{Error, Result};
pub use gamut_mapping::{GamutMapper, MapperKind};
pub use image_io::{load_image, save_image, BitDepth, TransferFunction};
pub use perceptual::{characterize, cssim, predict_mos, FeatureVector, SigmoidParams};
pub use selection::{select_representative, FeatureKind, SelectionConfig, SelectionResult};
pub use stats::{f_test, welch_t, Side, TestResult};
