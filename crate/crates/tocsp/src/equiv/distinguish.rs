//! Distinguishing-formula construction.
//!
//! When the refinement pass deletes a pair it records which moves went
//! unmatched. Rebuilding a formula from those records is a recursion over
//! deleted pairs: an unmatched plain move becomes an action diamond whose
//! body separates the move's target from every same-labelled response, and
//! an unmatched time-out under an environment becomes an environment
//! diamond over the wrapped targets. Pairs that already differ in their
//! initial actions need a single positive or negated diamond. The
//! recursion terminates because every pair consulted was deleted strictly
//! earlier, or differs in its initials.
//!
//! Among the recorded violations the construction picks the formula of
//! smallest modal depth, preferring one whose replay on the witnessing
//! target never needs the escape clause, and breaking remaining ties by
//! the order the violations were recorded. The result is checked against
//! both processes before it is returned.

use std::collections::HashMap;

use super::{ascending_pairs, build_closure, refine, Closure, Refined, Violation};
use crate::modal::{self, conj, diam_act, diam_env, neg, tt, Formula};
use crate::syntax::{Label, Term};
use crate::{Error, Limits};

/// A formula satisfied by `p` but not by `q`, or `None` when the two are
/// reactive-bisimilar and no such formula exists.
pub fn distinguishing_formula(p: Term, q: Term) -> Result<Option<Formula>, Error> {
    distinguishing_formula_with(p, q, &Limits::default())
}

/// [`distinguishing_formula`] with explicit limits.
pub fn distinguishing_formula_with(
    p: Term,
    q: Term,
    limits: &Limits,
) -> Result<Option<Formula>, Error> {
    let cl = build_closure(p, q, limits)?;
    let refined = refine(&cl, &ascending_pairs(cl.lts.state_count()));
    let ip = cl.lts.index_of(p).expect("roots are explored");
    let iq = cl.lts.index_of(q).expect("roots are explored");
    if refined.related(ip, iq) {
        return Ok(None);
    }
    Ok(Some(build(&cl, &refined, ip, iq, limits)?))
}

/// Builds and validates a formula separating two unrelated closure states.
pub(crate) fn build(
    cl: &Closure,
    refined: &Refined,
    ip: usize,
    iq: usize,
    limits: &Limits,
) -> Result<Formula, Error> {
    let mut b = Builder {
        cl,
        refined,
        limits,
        memo: HashMap::new(),
    };
    let f = b.formula_for(ip, iq)?;
    let holds_left = modal::sat_with(cl.lts.states[ip], &f, limits.unfold_budget)?;
    let holds_right = modal::sat_with(cl.lts.states[iq], &f, limits.unfold_budget)?;
    if !holds_left || holds_right {
        return Err(Error::Certificate(format!(
            "formula {f} does not separate {} from {}",
            cl.lts.states[ip], cl.lts.states[iq]
        )));
    }
    Ok(f)
}

struct Builder<'a> {
    cl: &'a Closure,
    refined: &'a Refined,
    limits: &'a Limits,
    memo: HashMap<(usize, usize), Formula>,
}

impl Builder<'_> {
    fn formula_for(&mut self, u: usize, v: usize) -> Result<Formula, Error> {
        debug_assert!(!self.refined.related(u, v));
        if let Some(f) = self.memo.get(&(u, v)) {
            return Ok(f.clone());
        }
        let f = if self.cl.inits[u] != self.cl.inits[v] {
            self.initials_formula(u, v)
        } else {
            self.violation_formula(u, v)?
        };
        self.memo.insert((u, v), f.clone());
        Ok(f)
    }

    /// The smallest single diamond separating two states with different
    /// initial actions, positive when the left state has the extra move.
    fn initials_formula(&self, u: usize, v: usize) -> Formula {
        let (iu, iv) = (&self.cl.inits[u], &self.cl.inits[v]);
        for a in iu.visible() {
            if !iv.contains(Label::Act(a)) {
                return diam_act(Label::Act(a), tt()).expect("a visible label");
            }
        }
        if iu.has_tau() && !iv.has_tau() {
            return diam_act(Label::Tau, tt()).expect("tau");
        }
        for a in iv.visible() {
            if !iu.contains(Label::Act(a)) {
                return neg(diam_act(Label::Act(a), tt()).expect("a visible label"));
            }
        }
        debug_assert!(iv.has_tau() && !iu.has_tau());
        neg(diam_act(Label::Tau, tt()).expect("tau"))
    }

    fn violation_formula(&mut self, u: usize, v: usize) -> Result<Formula, Error> {
        let positives = self.refined.reasons.get(&(u, v)).cloned().unwrap_or_default();
        let negatives = self.refined.reasons.get(&(v, u)).cloned().unwrap_or_default();
        let mut best: Option<(usize, bool, Formula)> = None;
        let options = positives
            .iter()
            .map(|w| (w, false))
            .chain(negatives.iter().map(|w| (w, true)));
        for (vio, negate) in options {
            let other = if negate { u } else { v };
            let (f, escape) = self.option_formula(other, vio)?;
            let f = if negate { neg(f) } else { f };
            let key = (f.depth(), escape);
            if best.as_ref().is_none_or(|(d, e, _)| key < (*d, *e)) {
                best = Some((key.0, key.1, f));
            }
        }
        match best {
            Some((_, _, f)) => Ok(f),
            None => Err(Error::Certificate(format!(
                "no violation recorded for the deleted pair ({u},{v})"
            ))),
        }
    }

    /// The formula for one recorded violation against the responder
    /// `other`, and whether its replay on the witnessing target needs the
    /// escape clause.
    fn option_formula(
        &mut self,
        other: usize,
        vio: &Violation,
    ) -> Result<(Formula, bool), Error> {
        let cl = self.cl;
        match *vio {
            Violation::Act { label, target } => {
                let mut parts = Vec::new();
                for t in cl.lts.successors(other) {
                    if t.label == label {
                        parts.push(self.formula_for(target, t.target)?);
                    }
                }
                let f = diam_act(label, conj_flat(parts)).expect("never the time-out");
                Ok((f, false))
            }
            Violation::Timeout { env, target } => {
                let mut parts = Vec::new();
                for t in cl.lts.successors(other) {
                    if t.label == Label::Timeout {
                        parts.push(self.formula_for(cl.wrap[target][env], cl.wrap[t.target][env])?);
                    }
                }
                let inner = conj_flat(parts);
                let escape = !modal::sat_env_structural(
                    cl.lts.states[target],
                    &cl.envs[env],
                    &inner,
                    self.limits.unfold_budget,
                )?;
                Ok((diam_env(cl.envs[env].clone(), inner), escape))
            }
        }
    }
}

/// Like [`conj`] but transparent on a single conjunct, so rebuilt formulas
/// compare equal to parsed ones.
fn conj_flat(mut parts: Vec<Formula>) -> Formula {
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        conj(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::parse_formula;
    use crate::syntax::{parse_process, ActionSet};

    fn ab() -> ActionSet {
        ActionSet::from_names(&["a", "b"])
    }

    fn p(text: &str) -> Term {
        parse_process(text, &ab()).unwrap()
    }

    #[test]
    fn an_initial_difference_needs_one_diamond() {
        let f = distinguishing_formula(p("a.0"), p("b.0")).unwrap().unwrap();
        assert_eq!(f, parse_formula("<a>true", &ab()).unwrap());
        let f = distinguishing_formula(p("b.0"), p("a.0 + b.0")).unwrap().unwrap();
        assert_eq!(f, parse_formula("!<a>true", &ab()).unwrap());
    }

    #[test]
    fn a_timeout_difference_names_a_separating_environment() {
        let f = distinguishing_formula(p("t.a.0"), p("t.b.0")).unwrap().unwrap();
        assert_eq!(f, parse_formula("<{a}><a>true", &ab()).unwrap());
    }

    #[test]
    fn equivalent_pairs_have_no_formula() {
        let (l, r) = crate::testgen::illustration();
        assert!(distinguishing_formula(l, r).unwrap().is_none());
        assert!(distinguishing_formula(l, l).unwrap().is_none());
    }

    #[test]
    fn every_formula_separates_its_pair() {
        // Sampled terms can denote infinite-state processes, so exploration
        // is capped low and oversized samples are skipped.
        let limits = crate::Limits {
            max_states: 5_000,
            ..crate::Limits::default()
        };
        let mut rng = crate::testgen::rng(61);
        let mut separated = 0;
        for _ in 0..60 {
            let l = crate::testgen::closed_guarded_term(&mut rng, 2);
            let r = crate::testgen::closed_guarded_term(&mut rng, 2);
            let f = match distinguishing_formula_with(l, r, &limits) {
                Ok(f) => f,
                Err(Error::UnfoldBudget { .. } | Error::StateBudget { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            match f {
                Some(f) => {
                    separated += 1;
                    assert!(crate::modal::sat(l, &f).unwrap(), "{l} should satisfy {f}");
                    assert!(!crate::modal::sat(r, &f).unwrap(), "{r} should refute {f}");
                }
                None => {
                    let v = super::super::reactive_bisim_with(l, r, &limits).unwrap();
                    assert!(v.equivalent);
                }
            }
        }
        assert!(separated >= 30, "only {separated} separated pairs sampled");
    }
}
