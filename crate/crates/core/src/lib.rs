//! Truncated variation of sampled càdlàg paths, its optimal approximants, and
//! closed-form and Monte Carlo analytics for Brownian motion with drift.

pub mod analytics;
pub mod approx;
pub mod crossing;
pub mod csv_io;
pub mod error;
pub mod mc;
pub mod numeric;
pub mod oracle;
pub mod path;

pub use analytics::{BmParams, SeriesConfig};
pub use approx::{build_adapted, build_f_c, competitor_check, AdaptedApproximant, ApproximantBundle};
pub use crossing::{
    decompose, downward_tv, truncated_variation, tv_profile_in_c, upward_tv, variation_profile, Branch, CrossingDecomposition, Epoch, EpochKind,
    VariationProfile, Variations,
};
pub use error::{Error, Result};
pub use mc::{McConfig, McEstimate, Quantity};
pub use path::{oscillation, sup_distance, total_variation, CadlagPath, TruncationLevel};
