//! Pretty-printer for process terms.
//!
//! The printer is the inverse of the parser on interned structure:
//! parsing a printed term yields the identical [`Term`]. Canonical bound
//! variable names are replaced by readable ones chosen to avoid every
//! action and free variable in the term.

use std::collections::BTreeSet;
use std::fmt;

use super::{Label, Symbol, Term, TermNode};

// Precedence levels, loosest first; a construct is parenthesized when it
// appears in a context demanding a tighter level than its own.
const SUM: u8 = 0;
const PAR: u8 = 1;
const UNARY: u8 = 2;
const PRIMARY: u8 = 3;

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names = BTreeSet::new();
        collect_taken_names(*self, &mut names);
        let mut printer = Printer {
            taken: names,
            scope: Vec::new(),
            counter: 0,
        };
        printer.render(f, *self, SUM)
    }
}

fn collect_taken_names(t: Term, out: &mut BTreeSet<Symbol>) {
    use TermNode::*;
    match t.node() {
        Nil => {}
        Var(x) => {
            out.insert(*x);
        }
        Prefix(l, p) => {
            if let Label::Act(a) = l {
                out.insert(a.symbol());
            }
            collect_taken_names(*p, out);
        }
        Choice(p, q) => {
            collect_taken_names(*p, out);
            collect_taken_names(*q, out);
        }
        Par(s, p, q) => {
            out.extend(s.iter().map(|a| a.symbol()));
            collect_taken_names(*p, out);
            collect_taken_names(*q, out);
        }
        Hide(s, p) | Psi(s, p) => {
            out.extend(s.iter().map(|a| a.symbol()));
            collect_taken_names(*p, out);
        }
        Theta(l, u, p) => {
            out.extend(l.iter().map(|a| a.symbol()));
            out.extend(u.iter().map(|a| a.symbol()));
            collect_taken_names(*p, out);
        }
        Rename(r, p) => {
            for (a, b) in r.pairs() {
                out.insert(a.symbol());
                out.insert(b.symbol());
            }
            collect_taken_names(*p, out);
        }
        Rec(_, spec) => {
            for (_, b) in spec.equations() {
                collect_taken_names(*b, out);
            }
        }
    }
}

struct Printer {
    taken: BTreeSet<Symbol>,
    scope: Vec<(Symbol, Symbol)>,
    counter: usize,
}

const DISPLAY_BASES: [&str; 6] = ["x", "y", "z", "u", "v", "w"];

impl Printer {
    fn fresh_display(&mut self) -> Symbol {
        loop {
            let base = DISPLAY_BASES[self.counter % DISPLAY_BASES.len()];
            let round = self.counter / DISPLAY_BASES.len();
            self.counter += 1;
            let name = if round == 0 {
                Symbol::new(base)
            } else {
                Symbol::new(&format!("{base}{round}"))
            };
            if !self.taken.contains(&name) && !self.scope.iter().any(|(_, d)| *d == name) {
                return name;
            }
        }
    }

    fn display_name(&self, x: Symbol) -> Symbol {
        self.scope
            .iter()
            .rev()
            .find(|(c, _)| *c == x)
            .map(|(_, d)| *d)
            .unwrap_or(x)
    }

    fn render(&mut self, f: &mut fmt::Formatter<'_>, t: Term, ctx: u8) -> fmt::Result {
        use TermNode::*;
        let level = match t.node() {
            Choice(..) => SUM,
            Par(..) => PAR,
            Prefix(..) | Hide(..) | Rename(..) | Theta(..) | Psi(..) | Rec(..) => UNARY,
            Nil | Var(_) => PRIMARY,
        };
        if level < ctx {
            f.write_str("(")?;
            self.render(f, t, SUM)?;
            return f.write_str(")");
        }
        match t.node() {
            Nil => f.write_str("0"),
            Var(x) => write!(f, "{}", self.display_name(*x)),
            Prefix(..) => {
                let mut body = t;
                while let Prefix(l, p) = body.node() {
                    write!(f, "{l}.")?;
                    body = *p;
                }
                self.render(f, body, PRIMARY)
            }
            Choice(l, r) => {
                self.render(f, *l, PAR)?;
                f.write_str(" + ")?;
                self.render(f, *r, SUM)
            }
            Par(s, l, r) => {
                self.render(f, *l, PAR)?;
                write!(f, " |[{}]| ", set_body(s))?;
                self.render(f, *r, UNARY)
            }
            Hide(s, p) => {
                write!(f, "hide {{{}}} in ", set_body(s))?;
                self.render(f, *p, UNARY)
            }
            Rename(r, p) => {
                f.write_str("rename{")?;
                for (i, (a, b)) in r.pairs().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "({a},{b})")?;
                }
                f.write_str("} ")?;
                self.render(f, *p, UNARY)
            }
            Theta(l, u, p) => {
                write!(f, "theta{{{}}}{{{}}}(", set_body(l), set_body(u))?;
                self.render(f, *p, SUM)?;
                f.write_str(")")
            }
            Psi(x, p) => {
                write!(f, "psi{{{}}}(", set_body(x))?;
                self.render(f, *p, SUM)?;
                f.write_str(")")
            }
            Rec(d, spec) => {
                let depth = self.scope.len();
                for (y, _) in spec.equations() {
                    let fresh = self.fresh_display();
                    self.scope.push((*y, fresh));
                }
                let dist = self.display_name(*d);
                write!(f, "rec {dist} {{ ")?;
                for (i, (y, b)) in spec.equations().iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{} = ", self.display_name(*y))?;
                    self.render(f, *b, SUM)?;
                }
                write!(f, " }} @ {dist}")?;
                self.scope.truncate(depth);
                Ok(())
            }
        }
    }
}

fn set_body(s: &super::ActionSet) -> String {
    s.iter()
        .map(|a| a.name().to_string())
        .collect::<Vec<_>>()
        .join(",")
}
