//! Numerical primitives: point sets and distances, COF scoring, median/MAD
//! statistics, coordinate trimming and the geometric median.

mod cof;
mod geomed;
mod points;
mod stats;

pub use cof::{cof, cof_from_distances, nearest_neighbours, UNBOUNDED_SCORE};
pub use geomed::{distance_sum, geometric_median};
pub use points::{euclidean, squared_euclidean, DistanceMatrix, PointSet};
pub use stats::{mad_flags, median, median_absolute_deviation, trimmed_mean_coord};
