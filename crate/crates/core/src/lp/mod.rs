//! Linear programs for mechanism design: the surrogate error objective and
//! linearised privacy constraints over the selection probabilities.

pub mod bounds;
pub mod builder;
pub mod program;

pub use bounds::{LpBounds, ProbBounds};
pub use builder::{
    anchors, build_lp, constraints_full, constraints_reduced, objective_general, objective_uniform,
    used_rows, w_lower, z_upper, zeta_form, zeta_right_form, Anchor, AnchorKind, ConstraintFamily,
    LinearForm, LpMode, LpOptions, MechanismLp, Objective, VarMap,
};
pub use program::{Constraint, Family, LinearProgram, Relation, VarName};
