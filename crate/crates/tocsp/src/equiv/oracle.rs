//! A brute-force oracle for the reactive relations.
//!
//! This checks the generalised relation directly: candidate pairs and
//! environment-indexed triples over the plain reachable states, starting
//! from the full candidate space with no pre-filtering, deleting entries
//! that violate one of the five defining clauses until nothing changes.
//! It never builds wrapped states and shares no checking logic with
//! [`reactive_bisim`](super::reactive_bisim), which makes it a useful
//! cross-check; it is exponential in the relevant alphabet and quadratic
//! in states per sweep, so it insists on small instances.

use super::{canonical_envs, cert, Verdict, Witness};
use crate::sos::{self, DeriveCtx, Lts};
use crate::syntax::{ActionSet, Label, Term};
use crate::{Error, Limits};

/// Largest plain state space [`brute_force_gsrb`] accepts.
pub const DEFAULT_ORACLE_BOUND: usize = 8;

/// Decides reactive bisimilarity of `p` and `q` by brute force, or
/// bisimilarity in the environment `x` when one is given. Instances with
/// more than [`DEFAULT_ORACLE_BOUND`] plain states are refused.
pub fn brute_force_gsrb(p: Term, q: Term, x: Option<&ActionSet>) -> Result<Verdict, Error> {
    brute_force_gsrb_with(p, q, x, DEFAULT_ORACLE_BOUND, &Limits::default())
}

/// [`brute_force_gsrb`] with an explicit state bound and limits.
pub fn brute_force_gsrb_with(
    p: Term,
    q: Term,
    x: Option<&ActionSet>,
    bound: usize,
    limits: &Limits,
) -> Result<Verdict, Error> {
    let lts = sos::explore_with(&[p, q], limits)?;
    if !lts.complete {
        return Err(Error::StateBudget {
            max_states: limits.max_states,
        });
    }
    let n = lts.state_count();
    if n > bound {
        return Err(Error::Usage(format!(
            "oracle instance has {n} reachable states, above its bound of {bound}"
        )));
    }
    let relevant = sos::relevant_alphabet(&lts);
    let envs = canonical_envs(&relevant, limits.env_limit)?;
    let k = envs.len();

    let mut ctx = DeriveCtx::new(limits.unfold_budget);
    let mut idles: Vec<Vec<bool>> = Vec::with_capacity(n);
    for &s in &lts.states {
        ctx.reset_budget();
        let i = ctx.initials(s)?;
        idles.push(envs.iter().map(|x| i.idles_under(x)).collect());
    }

    let mut pair = vec![true; n * n];
    let mut triple = vec![true; n * k * n];
    let tix = |i: usize, e: usize, j: usize| (i * k + e) * n + j;
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if pair[i * n + j] && pair_violated(&lts, &idles, &pair, &triple, n, k, i, j) {
                    pair[i * n + j] = false;
                    pair[j * n + i] = false;
                    changed = true;
                }
            }
        }
        for i in 0..n {
            for e in 0..k {
                for j in 0..n {
                    if triple[tix(i, e, j)]
                        && triple_violated(&lts, &envs, &idles, &pair, &triple, n, k, i, e, j)
                    {
                        triple[tix(i, e, j)] = false;
                        triple[tix(j, e, i)] = false;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let ip = lts.index_of(p).expect("roots are explored");
    let iq = lts.index_of(q).expect("roots are explored");
    let (equivalent, claim) = match x {
        None => (pair[ip * n + iq], None),
        Some(x) => {
            let xr = x.intersection(&relevant);
            let e = envs
                .iter()
                .position(|y| *y == xr)
                .expect("every subset of the relevant alphabet is enumerated");
            (triple[tix(ip, e, iq)], Some(xr))
        }
    };
    let witness = equivalent.then(|| {
        Witness::Relation(oracle_certificate(
            &lts,
            &relevant,
            &envs,
            &pair,
            &triple,
            p,
            q,
            claim.as_ref(),
        ))
    });
    Ok(Verdict { equivalent, witness })
}

/// Does some move of `i` lack a matching response by `j`? Plain pairs must
/// match visible and tau moves into surviving pairs, and time-outs, under
/// every environment `i` idles in, into surviving triples over that
/// environment.
#[allow(clippy::too_many_arguments)]
fn pair_violated(
    lts: &Lts,
    idles: &[Vec<bool>],
    pair: &[bool],
    triple: &[bool],
    n: usize,
    k: usize,
    i: usize,
    j: usize,
) -> bool {
    for t in lts.successors(i) {
        match t.label {
            Label::Act(_) | Label::Tau => {
                let matched = lts
                    .successors(j)
                    .iter()
                    .any(|s| s.label == t.label && pair[t.target * n + s.target]);
                if !matched {
                    return true;
                }
            }
            Label::Timeout => {
                for e in 0..k {
                    if !idles[i][e] {
                        continue;
                    }
                    let matched = lts.successors(j).iter().any(|s| {
                        s.label == Label::Timeout && triple[(t.target * k + e) * n + s.target]
                    });
                    if !matched {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// The triple clauses: a visible move counts when the environment allows
/// it or `i` idles in the environment, and its continuation is a plain
/// pair; tau keeps the environment; a fresh time-out may pick any
/// environment `i` idles in on top of the current one.
#[allow(clippy::too_many_arguments)]
fn triple_violated(
    lts: &Lts,
    envs: &[ActionSet],
    idles: &[Vec<bool>],
    pair: &[bool],
    triple: &[bool],
    n: usize,
    k: usize,
    i: usize,
    e: usize,
    j: usize,
) -> bool {
    let y = &envs[e];
    let idle_y = idles[i][e];
    for t in lts.successors(i) {
        match t.label {
            Label::Act(c) => {
                if !y.contains(c) && !idle_y {
                    continue;
                }
                let matched = lts
                    .successors(j)
                    .iter()
                    .any(|s| s.label == t.label && pair[t.target * n + s.target]);
                if !matched {
                    return true;
                }
            }
            Label::Tau => {
                let matched = lts.successors(j).iter().any(|s| {
                    s.label == Label::Tau && triple[(t.target * k + e) * n + s.target]
                });
                if !matched {
                    return true;
                }
            }
            Label::Timeout => {
                for e2 in 0..k {
                    if !idles[i][e2] || !idle_y {
                        continue;
                    }
                    let matched = lts.successors(j).iter().any(|s| {
                        s.label == Label::Timeout && triple[(t.target * k + e2) * n + s.target]
                    });
                    if !matched {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn oracle_certificate(
    lts: &Lts,
    relevant: &ActionSet,
    envs: &[ActionSet],
    pair: &[bool],
    triple: &[bool],
    left: Term,
    right: Term,
    claim: Option<&ActionSet>,
) -> cert::Certificate {
    let n = lts.state_count();
    let k = envs.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if pair[i * n + j] {
                pairs.push(cert::CertPair {
                    left: lts.states[i].to_string(),
                    right: lts.states[j].to_string(),
                    env: None,
                });
            }
            for (e, x) in envs.iter().enumerate() {
                if triple[(i * k + e) * n + j] {
                    pairs.push(cert::CertPair {
                        left: lts.states[i].to_string(),
                        right: lts.states[j].to_string(),
                        env: Some(cert::set_names(x)),
                    });
                }
            }
        }
    }
    cert::Certificate {
        relation: "reactive".into(),
        alphabet: cert::alphabet_names(lts.states.iter().copied(), std::iter::once(relevant)),
        relevant: cert::set_names(relevant),
        env: claim.map(cert::set_names),
        left: left.to_string(),
        right: right.to_string(),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{reactive_bisim, verify_certificate, x_bisim, Witness};
    use super::*;
    use crate::syntax::{nil, parse_process, prefix};

    fn abc() -> ActionSet {
        ActionSet::from_names(&["a", "b", "c"])
    }

    fn p(text: &str) -> Term {
        parse_process(text, &abc()).unwrap()
    }

    #[test]
    fn inaction_is_related_to_itself() {
        let v = brute_force_gsrb(nil(), nil(), None).unwrap();
        assert!(v.equivalent);
        match v.witness.unwrap() {
            Witness::Relation(c) => verify_certificate(&c).unwrap(),
            w => panic!("expected a relation, got {w:?}"),
        }
    }

    #[test]
    fn the_oracle_separates_differing_timeout_targets() {
        let v = brute_force_gsrb(p("t.a.0"), p("t.b.0"), None).unwrap();
        assert!(!v.equivalent);
        assert!(v.witness.is_none());
    }

    #[test]
    fn the_oracle_refuses_large_instances() {
        let mut long = nil();
        for _ in 0..12 {
            long = prefix(Label::act("a"), long);
        }
        match brute_force_gsrb(long, nil(), None) {
            Err(Error::Usage(msg)) => assert!(msg.contains("bound"), "{msg}"),
            other => panic!("expected the bound error, got {other:?}"),
        }
    }

    #[test]
    fn the_oracle_accepts_the_illustration_pair() {
        let (l, r) = crate::testgen::illustration();
        let v = brute_force_gsrb_with(l, r, None, 32, &Limits::default()).unwrap();
        assert!(v.equivalent);
    }

    // Sampled terms can denote processes far above the oracle bound, so
    // exploration is capped just over it and oversized samples skipped.
    fn tight() -> Limits {
        Limits {
            max_states: 64,
            ..Limits::default()
        }
    }

    #[test]
    fn the_oracle_agrees_with_the_checker() {
        let mut rng = crate::testgen::rng(71);
        let mut compared = 0;
        for i in 0..120 {
            let l = crate::testgen::closed_guarded_term(&mut rng, 2);
            let r = if i % 5 == 0 {
                l
            } else {
                crate::testgen::closed_guarded_term(&mut rng, 2)
            };
            let o = match brute_force_gsrb_with(l, r, None, DEFAULT_ORACLE_BOUND, &tight()) {
                Ok(v) => v,
                Err(Error::Usage(_) | Error::UnfoldBudget { .. } | Error::StateBudget { .. }) => {
                    continue
                }
                Err(e) => panic!("{e}"),
            };
            let c = reactive_bisim(l, r).unwrap();
            assert_eq!(o.equivalent, c.equivalent, "{l} vs {r}");
            if let Some(Witness::Relation(cert)) = &o.witness {
                verify_certificate(cert).unwrap();
            }
            compared += 1;
        }
        assert!(compared >= 60, "only {compared} oracle comparisons ran");
    }

    #[test]
    fn the_oracle_agrees_on_fixed_environments() {
        let mut rng = crate::testgen::rng(73);
        let mut compared = 0;
        for _ in 0..60 {
            let l = crate::testgen::closed_guarded_term(&mut rng, 2);
            let r = crate::testgen::closed_guarded_term(&mut rng, 2);
            let x = crate::testgen::pick_action_set(&mut rng);
            let o = match brute_force_gsrb_with(l, r, Some(&x), DEFAULT_ORACLE_BOUND, &tight()) {
                Ok(v) => v,
                Err(Error::Usage(_) | Error::UnfoldBudget { .. } | Error::StateBudget { .. }) => {
                    continue
                }
                Err(e) => panic!("{e}"),
            };
            let c = x_bisim(l, &x, r).unwrap();
            assert_eq!(o.equivalent, c.equivalent, "{l} vs {r} under {x}");
            compared += 1;
        }
        assert!(compared >= 30, "only {compared} environment comparisons ran");
    }
}
