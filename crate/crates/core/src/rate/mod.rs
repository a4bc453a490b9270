//! Local costs, the path rate functional and mollification of paths.

mod functional;
mod local;
mod mollify;

pub use functional::{discrete_rate, rate_functional, RateBreakdown};
pub use local::{l0_closed, l0_oracle, l1, l2, l_side, ltilde, Branch, BranchDrifts};
pub use mollify::{mollify, time_rescale, Mollified, Rescaled, SampledPath, MAX_HALVINGS};
