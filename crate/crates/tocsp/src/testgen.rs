//! Random closed, valid, guarded terms for unit tests.
//!
//! Variables are only ever emitted directly under a prefix, so every
//! generated recursion is guarded. The scope operators `theta` and `psi`
//! are only applied to variable-free subterms, so every generated term is
//! valid. All randomness comes through a seeded generator, keeping the
//! tests deterministic.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::syntax::{
    choice, hide, nil, par, prefix, psi, rec, rename, theta, var, Action, ActionSet, Label,
    RenameRel, Symbol, Term,
};

pub(crate) const ACTIONS: [&str; 3] = ["a", "b", "c"];

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn pick_action(rng: &mut ChaCha8Rng) -> Action {
    Action::new(ACTIONS[rng.gen_range(0..ACTIONS.len())])
}

fn pick_label(rng: &mut ChaCha8Rng, timeouts: bool) -> Label {
    match rng.gen_range(0..5) {
        0 => Label::Tau,
        1 if timeouts => Label::Timeout,
        _ => Label::Act(pick_action(rng)),
    }
}

pub(crate) fn pick_action_set(rng: &mut ChaCha8Rng) -> ActionSet {
    ACTIONS
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|n| Action::new(n))
        .collect()
}

fn pick_rename(rng: &mut ChaCha8Rng) -> RenameRel {
    let n = rng.gen_range(0..=2);
    (0..n)
        .map(|_| (pick_action(rng), pick_action(rng)))
        .collect()
}

/// A random closed, valid, guarded term of at most the given depth.
pub(crate) fn closed_guarded_term(rng: &mut ChaCha8Rng, depth: usize) -> Term {
    gen(rng, depth, &[], true)
}

/// Like [`closed_guarded_term`] but without time-out prefixes anywhere.
pub(crate) fn closed_tfree_term(rng: &mut ChaCha8Rng, depth: usize) -> Term {
    gen(rng, depth, &[], false)
}

/// A random pair of priority bounds with the lower set inside the upper.
pub(crate) fn pick_bounds(rng: &mut ChaCha8Rng) -> (ActionSet, ActionSet) {
    let upper = pick_action_set(rng);
    let lower: ActionSet = upper.iter().filter(|_| rng.gen_bool(0.5)).collect();
    (lower, upper)
}

/// A random valid, guarded term whose free variables are among `p` and
/// `q`, each occurrence sitting directly under a prefix and never inside
/// a `theta` or `psi`. Substituting closed terms for the variables
/// therefore yields a closed, valid, guarded term.
pub(crate) fn guarded_context(rng: &mut ChaCha8Rng, depth: usize) -> Term {
    gen(rng, depth, &[Symbol::new("p"), Symbol::new("q")], true)
}

fn gen(rng: &mut ChaCha8Rng, depth: usize, vars: &[Symbol], timeouts: bool) -> Term {
    if depth == 0 {
        return if !vars.is_empty() && rng.gen_bool(0.6) {
            prefix(
                pick_label(rng, timeouts),
                var(vars[rng.gen_range(0..vars.len())]),
            )
        } else if rng.gen_bool(0.5) {
            prefix(pick_label(rng, timeouts), nil())
        } else {
            nil()
        };
    }
    match rng.gen_range(0..10) {
        0 | 1 => prefix(pick_label(rng, timeouts), gen(rng, depth - 1, vars, timeouts)),
        2 => choice(
            gen(rng, depth - 1, vars, timeouts),
            gen(rng, depth - 1, vars, timeouts),
        ),
        3 => choice(
            prefix(pick_label(rng, timeouts), gen(rng, depth - 1, vars, timeouts)),
            gen(rng, depth - 1, vars, timeouts),
        ),
        4 => par(
            pick_action_set(rng),
            gen(rng, depth - 1, vars, timeouts),
            gen(rng, depth - 1, vars, timeouts),
        ),
        5 => hide(pick_action_set(rng), gen(rng, depth - 1, vars, timeouts)),
        6 => rename(pick_rename(rng), gen(rng, depth - 1, vars, timeouts)),
        7 => {
            let upper = pick_action_set(rng);
            let lower: ActionSet = upper.iter().filter(|_| rng.gen_bool(0.5)).collect();
            theta(lower, upper, gen(rng, depth - 1, &[], timeouts))
                .expect("lower is a subset of upper")
        }
        8 => psi(pick_action_set(rng), gen(rng, depth - 1, &[], timeouts)),
        _ => {
            let p = Symbol::new("p");
            let q = Symbol::new("q");
            if rng.gen_bool(0.5) {
                rec(p, vec![(p, gen(rng, depth - 1, &[p], timeouts))]).unwrap()
            } else {
                let body_p = gen(rng, depth - 1, &[p, q], timeouts);
                let body_q = gen(rng, depth - 1, &[p, q], timeouts);
                rec(p, vec![(p, body_p), (q, body_q)]).unwrap()
            }
        }
    }
}

/// A random formula of at most the given modal depth. Singleton
/// conjunctions are never produced, so printing and reparsing a generated
/// formula reproduces it exactly.
pub(crate) fn formula(rng: &mut ChaCha8Rng, depth: usize) -> crate::modal::Formula {
    use crate::modal::{conj, diam_act, diam_env, neg, tt};
    if depth == 0 {
        return if rng.gen_bool(0.5) { tt() } else { neg(tt()) };
    }
    match rng.gen_range(0..8) {
        0 => tt(),
        1 | 2 => neg(formula(rng, depth - 1)),
        3 => {
            let n = [0usize, 2, 3][rng.gen_range(0..3)];
            conj((0..n).map(|_| formula(rng, depth - 1)).collect())
        }
        4 | 5 => {
            let label = if rng.gen_bool(0.3) {
                Label::Tau
            } else {
                Label::Act(pick_action(rng))
            };
            diam_act(label, formula(rng, depth - 1)).expect("label is never the time-out")
        }
        _ => diam_env(pick_action_set(rng), formula(rng, depth - 1)),
    }
}

/// A pair of systems that are reactive-bisimilar but not strongly
/// bisimilar: both can time out into a race between an `a` and an
/// internal step, and only the side that bundles the extra `b` branch
/// with the `a` differs. Used across the logic and equivalence tests.
pub(crate) fn illustration() -> (Term, Term) {
    let ab = ActionSet::from_names(&["a", "b"]);
    let left = crate::syntax::parse_process(
        "b.0 + t.(a.0 + tau.(b.0 + a.0)) + t.tau.a.0",
        &ab,
    )
    .unwrap();
    let right = crate::syntax::parse_process(
        "b.0 + t.(a.0 + tau.a.0) + t.tau.(b.0 + a.0)",
        &ab,
    )
    .unwrap();
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_terms_are_closed_valid_and_guarded() {
        let mut rng = rng(7);
        for _ in 0..500 {
            let t = closed_guarded_term(&mut rng, 4);
            assert!(t.is_closed(), "open term generated: {t}");
            assert!(t.is_valid(), "invalid term generated: {t}");
            assert!(t.is_guarded(), "unguarded term generated: {t}");
        }
    }

    #[test]
    fn tfree_terms_never_reach_a_timeout_transition() {
        let mut rng = rng(11);
        for _ in 0..200 {
            let t = closed_tfree_term(&mut rng, 3);
            let lts = crate::sos::explore(&[t], 10_000).unwrap();
            for tr in &lts.transitions {
                assert_ne!(tr.label, Label::Timeout, "time-out reachable from {t}");
            }
        }
    }
}
