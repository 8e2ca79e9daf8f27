//! Verification of lane-change controllers for multi-lane highways.
//!
//! The crate is layered bottom-up:
//!
//! * [`traffic`]: snapshots of cars with reservations and claims, views, and
//!   the controller actions that change them.
//! * [`mlsl`]: multi-lane spatial logic formulas, their semantics over views,
//!   and the interval checks used by the controllers.
//! * [`acta`]: timed automata whose guards mention spatial formulas, with
//!   builders for the lane-change controllers and their observers.
//! * [`checker`]: a discrete-time explicit-state model checker for networks of
//!   those automata, answering invariance (`A[]`) and eventuality (`A<>`)
//!   queries with replayable counterexamples.
//! * [`scenario`] and [`cli`]: the scenario file format and the command line.
//!
//! ```
//! use lanecheck::mlsl::{eval, parse, Valuation};
//! use lanecheck::scenario::Scenario;
//!
//! let sc = Scenario::parse(include_str!("../scenarios/three-cars.scn")).unwrap();
//! let ts = sc.snapshot();
//! let e = sc.car_id("E").unwrap();
//! let view = ts.standard_view(e, sc.horizon()).unwrap();
//! let phi = parse("<re(ego) ; free>").unwrap();
//! assert!(eval(&ts, &view, &Valuation::ego(e), &phi).unwrap());
//! ```

pub mod acta;
pub mod checker;
pub mod cli;
pub mod mlsl;
pub mod scenario;
pub mod traffic;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/mlsl.md")]
    mod mlsl {}
    #[doc = include_str!("../../../book/src/controllers.md")]
    mod controllers {}
    #[doc = include_str!("../../../book/src/checking.md")]
    mod checking {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
