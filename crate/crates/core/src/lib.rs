//! Robust outlier detection on coMAD-PCA subspaces.
//!
//! The comedian matrix replaces the covariance matrix of classical PCA, so
//! the fitted axes and their scales are far less affected by the outliers
//! being searched for. On top of that basis the [`detector`] module offers
//! the CoMadOut family of scores (a noise-margin hyperrectangle, plain,
//! kurtosis- and eigenvalue-weighted distance sums, and a z-score
//! ensemble), each also available on covariance PCA for comparison.
//!
//! ```
//! use comadout::{Matrix, Model, Scoring, VariantId};
//!
//! let x = Matrix::from_rows(&[
//!     [1.0, 2.0], [2.0, 4.1], [3.0, 5.9], [4.0, 8.2], [5.0, 9.9], [2.0, 30.0],
//! ]).unwrap();
//! let model = Model::fit(&x, VariantId::comedian(Scoring::PlusK), 1.0).unwrap();
//! let report = model.score(&x).unwrap();
//! let top = report.scores.iter().enumerate()
//!     .max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
//! assert_eq!(top, 5);
//! ```

pub mod data;
pub mod decomposition;
pub mod detector;
pub mod error;
pub mod linalg;
pub mod metrics;

pub use data::{Dataset, LabelColumn};
pub use decomposition::{CenterMode, MatrixSource, Projections, Subspace};
pub use detector::{FitOptions, Model, ScoreReport, Scoring, VariantId};
pub use error::{Error, Result};
pub use linalg::{EigenPairs, Matrix, SymmetricMatrix};
pub use metrics::{LabeledScores, RankTable};
