//! Bin layouts, selection tables, the randomized quantizer and its exact
//! error.

pub mod distribution;
pub mod layout;
pub mod mae;
pub mod mechanism;
pub mod quadrature;
pub mod selection;

pub use distribution::{InputDistribution, InputKind};
pub use layout::{BinLayout, MAX_BINS};
pub use mae::{
    conditional_mae, conditional_mse, exact_mae, exact_mse, mae_upper_bound, monte_carlo_mae,
};
pub use mechanism::{dither, Mechanism, MechanismDocument, Side};
pub use selection::{SelectionDistribution, SelectionTable};
