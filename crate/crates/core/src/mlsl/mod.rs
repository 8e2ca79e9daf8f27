//! Multi-lane spatial logic: formulas, their concrete syntax, the view-based
//! semantics, and fast interval checks for the formulas the controllers use.

pub mod eval;
pub mod fast;
pub mod formula;
pub mod parse;

pub use eval::{eval, eval_standard, hchop_witness, EvalError, SpacePoint, Valuation, Value};
pub use formula::{cc_formula, collision_formula, exists_pc_formula, pc_formula, safe_formula, Formula, Sort, EGO};
pub use parse::{parse, ParseError};
