use std::fmt;

use serde::{Deserialize, Serialize};

/// Variable sorts. Lane variables are the identifiers `n` and `l`, optionally
/// followed by digits or primes (`n1`, `l'`); every other identifier is a car
/// variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sort {
    Car,
    Lane,
}

impl Sort {
    pub fn of(name: &str) -> Sort {
        let mut chars = name.chars();
        match chars.next() {
            Some('n' | 'l') if chars.all(|c| c.is_ascii_digit() || c == '\'') => Sort::Lane,
            _ => Sort::Car,
        }
    }
}

/// The distinguished car variable bound to the car under consideration.
pub const EGO: &str = "ego";

/// Abstract syntax of a multi-lane spatial logic formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    VarEq(String, String),
    Free,
    Re(String),
    Cl(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    ExistsCar(String, Box<Formula>),
    /// Horizontal chop: the left formula holds before a split point, the
    /// right one after it.
    HChop(Box<Formula>, Box<Formula>),
    /// Vertical chop: `lower` holds on the lanes below a split, `upper` on
    /// the lanes above.
    VChop {
        lower: Box<Formula>,
        upper: Box<Formula>,
    },
}

impl Formula {
    pub fn re(c: &str) -> Formula {
        Formula::Re(c.to_string())
    }

    pub fn cl(c: &str) -> Formula {
        Formula::Cl(c.to_string())
    }

    pub fn eq(u: &str, v: &str) -> Formula {
        Formula::VarEq(u.to_string(), v.to_string())
    }

    pub fn neq(u: &str, v: &str) -> Formula {
        Formula::eq(u, v).not()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Formula {
        self.not().and(rhs.not()).not()
    }

    pub fn exists(var: &str, body: Formula) -> Formula {
        Formula::ExistsCar(var.to_string(), Box::new(body))
    }

    pub fn hchop(self, rhs: Formula) -> Formula {
        Formula::HChop(Box::new(self), Box::new(rhs))
    }

    pub fn vchop(lower: Formula, upper: Formula) -> Formula {
        Formula::VChop { lower: Box::new(lower), upper: Box::new(upper) }
    }

    /// `⟨φ⟩`: φ holds on some sub-view.
    ///
    /// Expands to `true` below and above a band in which `true ; φ ; true`
    /// holds.
    pub fn somewhere(self) -> Formula {
        let band = Formula::True.hchop(self.hchop(Formula::True));
        Formula::vchop(Formula::True, Formula::vchop(band, Formula::True))
    }

    /// Recognizes the expansion produced by [`Formula::somewhere`].
    pub fn as_somewhere(&self) -> Option<&Formula> {
        let Formula::VChop { lower, upper } = self else { return None };
        let Formula::VChop { lower: band, upper: top } = upper.as_ref() else { return None };
        let Formula::HChop(l, rest) = band.as_ref() else { return None };
        let Formula::HChop(inner, r) = rest.as_ref() else { return None };
        let all_true = [lower.as_ref(), top.as_ref(), l.as_ref(), r.as_ref()].iter().all(|f| **f == Formula::True);
        all_true.then_some(inner.as_ref())
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        fn walk(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<String>) {
            let mut see = |v: &String, bound: &Vec<String>| {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            };
            match f {
                Formula::True | Formula::Free => {}
                Formula::VarEq(u, v) => {
                    see(u, bound);
                    see(v, bound);
                }
                Formula::Re(c) | Formula::Cl(c) => see(c, bound),
                Formula::Not(a) => walk(a, bound, out),
                Formula::And(a, b) | Formula::HChop(a, b) => {
                    walk(a, bound, out);
                    walk(b, bound, out);
                }
                Formula::VChop { lower, upper } => {
                    walk(lower, bound, out);
                    walk(upper, bound, out);
                }
                Formula::ExistsCar(c, body) => {
                    bound.push(c.clone());
                    walk(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Deepest nesting of horizontal chops.
    pub fn hchop_depth(&self) -> u32 {
        match self {
            Formula::True | Formula::Free | Formula::VarEq(..) | Formula::Re(_) | Formula::Cl(_) => 0,
            Formula::Not(a) | Formula::ExistsCar(_, a) => a.hchop_depth(),
            Formula::And(a, b) => a.hchop_depth().max(b.hchop_depth()),
            Formula::VChop { lower, upper } => lower.hchop_depth().max(upper.hchop_depth()),
            Formula::HChop(a, b) => 1 + a.hchop_depth().max(b.hchop_depth()),
        }
    }
}

/// `Safe(ego)`: no other car's reservation overlaps the ego reservation.
pub fn safe_formula() -> Formula {
    Formula::exists("c", Formula::neq("c", EGO).and(Formula::re(EGO).and(Formula::re("c")).somewhere())).not()
}

/// Collision check `cc`, stated exactly like `Safe(ego)`.
pub fn cc_formula() -> Formula {
    safe_formula()
}

/// Potential collision with the car bound to `c`: the ego claim overlaps a
/// claim or reservation of `c`.
pub fn pc_formula(c: &str) -> Formula {
    let touched = Formula::re(c).or(Formula::cl(c));
    Formula::neq(c, EGO).and(Formula::cl(EGO).and(touched).somewhere())
}

/// `∃c: pc(c)`.
pub fn exists_pc_formula() -> Formula {
    Formula::exists("c", pc_formula("c"))
}

/// Any two distinct cars with overlapping reservations.
pub fn collision_formula() -> Formula {
    Formula::exists(
        "c",
        Formula::exists("d", Formula::neq("c", "d").and(Formula::re("c").and(Formula::re("d")).somewhere())),
    )
}

// Printing follows the parser's grammar so that `parse(f.to_string()) == f`.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn prec(f: &Formula) -> u8 {
            match f {
                Formula::HChop(..) | Formula::ExistsCar(..) => 0,
                Formula::And(..) => 2,
                _ => 3,
            }
        }
        fn go(x: &Formula, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let paren = prec(x) < min;
            if paren {
                f.write_str("(")?;
            }
            match x {
                Formula::True => f.write_str("true")?,
                Formula::Free => f.write_str("free")?,
                Formula::VarEq(u, v) => write!(f, "{u} = {v}")?,
                Formula::Re(c) => write!(f, "re({c})")?,
                Formula::Cl(c) => write!(f, "cl({c})")?,
                Formula::Not(a) => {
                    f.write_str("!")?;
                    go(a, 3, f)?;
                }
                Formula::And(a, b) => {
                    go(a, 2, f)?;
                    f.write_str(" & ")?;
                    go(b, 3, f)?;
                }
                Formula::ExistsCar(c, body) => {
                    write!(f, "exists {c}. ")?;
                    go(body, 0, f)?;
                }
                Formula::HChop(a, b) => {
                    go(a, 1, f)?;
                    f.write_str(" ; ")?;
                    go(b, 0, f)?;
                }
                Formula::VChop { lower, upper } => {
                    f.write_str("[")?;
                    go(upper, 0, f)?;
                    f.write_str(" / ")?;
                    go(lower, 0, f)?;
                    f.write_str("]")?;
                }
            }
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        go(self, 0, f)
    }
}
