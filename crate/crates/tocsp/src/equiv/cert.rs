//! Relation certificates and their verification.
//!
//! A certificate lists the non-identity pairs of a claimed bisimulation,
//! every process printed in the term syntax. For the reactive relation the
//! pairs come in two kinds: plain pairs, and pairs carrying the
//! environment in force since the last time-out. Verification reparses the
//! terms, derives one step from each listed process, and replays the
//! defining clauses of the claimed relation, with continuations looked up
//! among the listed pairs; identical processes are implicitly related.
//! Environments are enumerated over the certificate's declared relevant
//! alphabet, which must cover the initial actions of every listed process;
//! the verifier rejects the certificate otherwise. Verification shares the
//! derivation rules with the checkers but none of their search.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{canonical_envs, Closure, Refined};
use crate::sos::{ensure_process, DeriveCtx, Lts};
use crate::syntax::{parse_process, Action, ActionSet, Label, Term, TermNode};
use crate::{Error, Limits};

/// A claimed bisimulation containing the claimed pair.
///
/// `relation` is `"strong"` or `"reactive"`. `alphabet` declares the
/// action names needed to reparse the terms; `relevant` the subalphabet
/// over which environments range (empty for the strong relation). A
/// reactive claim about a fixed environment carries it in `env`, already
/// cut down to the relevant alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub relation: String,
    pub alphabet: Vec<String>,
    pub relevant: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<Vec<String>>,
    pub left: String,
    pub right: String,
    pub pairs: Vec<CertPair>,
}

/// One related pair; `env` is the environment in force, absent on plain
/// pairs and in strong certificates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertPair {
    pub left: String,
    pub right: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<Vec<String>>,
}

pub(crate) fn set_names(x: &ActionSet) -> Vec<String> {
    x.iter().map(|a| a.name().to_string()).collect()
}

/// Every action name occurring syntactically in the term, including in
/// synchronization, hiding, renaming and priority sets.
fn mentioned_actions(t: Term, seen: &mut HashSet<Term>, out: &mut BTreeSet<Action>) {
    if !seen.insert(t) {
        return;
    }
    let mut set = |s: &ActionSet| out.extend(s.iter());
    match t.node() {
        TermNode::Nil | TermNode::Var(_) => {}
        TermNode::Prefix(l, p) => {
            if let Label::Act(a) = l {
                out.insert(*a);
            }
            mentioned_actions(*p, seen, out);
        }
        TermNode::Choice(p, q) => {
            mentioned_actions(*p, seen, out);
            mentioned_actions(*q, seen, out);
        }
        TermNode::Par(s, p, q) => {
            set(s);
            mentioned_actions(*p, seen, out);
            mentioned_actions(*q, seen, out);
        }
        TermNode::Hide(s, p) | TermNode::Psi(s, p) => {
            set(s);
            mentioned_actions(*p, seen, out);
        }
        TermNode::Theta(lower, upper, p) => {
            set(lower);
            set(upper);
            mentioned_actions(*p, seen, out);
        }
        TermNode::Rename(rel, p) => {
            for (a, b) in rel.pairs() {
                out.insert(a);
                out.insert(b);
            }
            mentioned_actions(*p, seen, out);
        }
        TermNode::Rec(_, spec) => {
            for &(_, body) in spec.equations() {
                mentioned_actions(body, seen, out);
            }
        }
    }
}

pub(crate) fn alphabet_names<'a>(
    terms: impl Iterator<Item = Term>,
    extra: impl Iterator<Item = &'a ActionSet>,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut acts = BTreeSet::new();
    for t in terms {
        mentioned_actions(t, &mut seen, &mut acts);
    }
    for s in extra {
        acts.extend(s.iter());
    }
    acts.iter().map(|a| a.name().to_string()).collect()
}

pub(crate) fn strong_certificate(lts: &Lts, blocks: &[usize], left: Term, right: Term) -> Certificate {
    let n = lts.state_count();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if blocks[i] == blocks[j] {
                pairs.push(CertPair {
                    left: lts.states[i].to_string(),
                    right: lts.states[j].to_string(),
                    env: None,
                });
            }
        }
    }
    Certificate {
        relation: "strong".into(),
        alphabet: alphabet_names(lts.states.iter().copied(), std::iter::empty()),
        relevant: Vec::new(),
        env: None,
        left: left.to_string(),
        right: right.to_string(),
        pairs,
    }
}

/// Dumps the surviving relation over plain states: the plain pairs
/// directly, the surviving wrapped pairs as environment-indexed pairs of
/// their plain bodies.
pub(crate) fn reactive_certificate(
    cl: &Closure,
    refined: &Refined,
    left: Term,
    right: Term,
    claim_env: Option<&ActionSet>,
) -> Certificate {
    let mut pairs = Vec::new();
    for i in 0..cl.n_plain {
        for j in (i + 1)..cl.n_plain {
            if refined.related(i, j) {
                pairs.push(CertPair {
                    left: cl.lts.states[i].to_string(),
                    right: cl.lts.states[j].to_string(),
                    env: None,
                });
            }
            for (e, x) in cl.envs.iter().enumerate() {
                if refined.related(cl.wrap[i][e], cl.wrap[j][e]) {
                    pairs.push(CertPair {
                        left: cl.lts.states[i].to_string(),
                        right: cl.lts.states[j].to_string(),
                        env: Some(set_names(x)),
                    });
                }
            }
        }
    }
    Certificate {
        relation: "reactive".into(),
        alphabet: alphabet_names(
            cl.lts.states[..cl.n_plain].iter().copied(),
            std::iter::once(&cl.relevant),
        ),
        relevant: set_names(&cl.relevant),
        env: claim_env.map(set_names),
        left: left.to_string(),
        right: right.to_string(),
        pairs,
    }
}

/// Checks the certificate by replaying the defining clauses of its
/// relation on the listed pairs. Fails with [`Error::Certificate`] when a
/// clause is violated, the claimed pair is missing, an environment strays
/// outside the declared relevant alphabet, or that alphabet fails to cover
/// a listed process's initial actions.
pub fn verify_certificate(cert: &Certificate) -> Result<(), Error> {
    verify_certificate_with(cert, &Limits::default())
}

/// [`verify_certificate`] with explicit limits.
pub fn verify_certificate_with(cert: &Certificate, limits: &Limits) -> Result<(), Error> {
    let alphabet: ActionSet = cert.alphabet.iter().map(|n| Action::new(n)).collect();
    let left = parse_side(&cert.left, &alphabet)?;
    let right = parse_side(&cert.right, &alphabet)?;
    match cert.relation.as_str() {
        "strong" => verify_strong(cert, &alphabet, left, right, limits),
        "reactive" => verify_reactive(cert, &alphabet, left, right, limits),
        other => Err(Error::Certificate(format!(
            "unknown relation {other:?}; expected \"strong\" or \"reactive\""
        ))),
    }
}

fn parse_side(text: &str, alphabet: &ActionSet) -> Result<Term, Error> {
    let t = parse_process(text, alphabet)
        .map_err(|e| Error::Certificate(format!("unparseable term {text:?}: {e}")))?;
    ensure_process(t).map_err(|e| Error::Certificate(format!("bad term {text:?}: {e}")))?;
    Ok(t)
}

fn verify_strong(
    cert: &Certificate,
    alphabet: &ActionSet,
    left: Term,
    right: Term,
    limits: &Limits,
) -> Result<(), Error> {
    let mut set: HashSet<(Term, Term)> = HashSet::new();
    for cp in &cert.pairs {
        if cp.env.is_some() {
            return Err(Error::Certificate(
                "strong certificates carry no environments".into(),
            ));
        }
        set.insert((parse_side(&cp.left, alphabet)?, parse_side(&cp.right, alphabet)?));
    }
    let rel = |p: Term, q: Term| p == q || set.contains(&(p, q)) || set.contains(&(q, p));
    if !rel(left, right) {
        return Err(Error::Certificate(
            "the claimed pair is not in the relation".into(),
        ));
    }
    let mut ctx = DeriveCtx::new(limits.unfold_budget);
    for &(p, q) in &set {
        for (a, b) in [(p, q), (q, p)] {
            ctx.reset_budget();
            let moves_a = ctx.transitions(a)?;
            let moves_b = ctx.transitions(b)?;
            for &(l, a2) in moves_a.iter() {
                if !moves_b.iter().any(|&(m, b2)| m == l && rel(a2, b2)) {
                    return Err(Error::Certificate(format!(
                        "{a} moves with {l} to {a2}, which {b} cannot match"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn verify_reactive(
    cert: &Certificate,
    alphabet: &ActionSet,
    left: Term,
    right: Term,
    limits: &Limits,
) -> Result<(), Error> {
    let relevant: ActionSet = cert.relevant.iter().map(|n| Action::new(n)).collect();
    let envs = canonical_envs(&relevant, limits.env_limit)?;
    let mut pairs: HashSet<(Term, Term)> = HashSet::new();
    let mut triples: HashSet<(Term, ActionSet, Term)> = HashSet::new();
    for cp in &cert.pairs {
        let l = parse_side(&cp.left, alphabet)?;
        let r = parse_side(&cp.right, alphabet)?;
        match &cp.env {
            None => {
                pairs.insert((l, r));
            }
            Some(names) => {
                let x: ActionSet = names.iter().map(|n| Action::new(n)).collect();
                if !x.is_subset_of(&relevant) {
                    return Err(Error::Certificate(format!(
                        "environment {x} strays outside the relevant alphabet {relevant}"
                    )));
                }
                triples.insert((l, x, r));
            }
        }
    }
    let rel = |p: Term, q: Term| p == q || pairs.contains(&(p, q)) || pairs.contains(&(q, p));
    let rel3 = |p: Term, x: &ActionSet, q: Term| {
        p == q
            || triples.contains(&(p, x.clone(), q))
            || triples.contains(&(q, x.clone(), p))
    };

    let mut ctx = DeriveCtx::new(limits.unfold_budget);
    let mut listed: Vec<Term> = vec![left, right];
    listed.extend(pairs.iter().flat_map(|&(p, q)| [p, q]));
    listed.extend(triples.iter().flat_map(|(p, _, q)| [*p, *q]));
    for &t in &listed {
        ctx.reset_budget();
        let i = ctx.initials(t)?;
        let stray = i.visible().find(|a| !relevant.contains(*a));
        if let Some(a) = stray {
            return Err(Error::Certificate(format!(
                "{t} can do {a}, which the declared relevant alphabet misses"
            )));
        }
    }

    match &cert.env {
        None => {
            if !rel(left, right) {
                return Err(Error::Certificate(
                    "the claimed pair is not in the relation".into(),
                ));
            }
        }
        Some(names) => {
            let x: ActionSet = names.iter().map(|n| Action::new(n)).collect();
            if !rel3(left, &x.intersection(&relevant), right) {
                return Err(Error::Certificate(
                    "the claimed environment-indexed pair is not in the relation".into(),
                ));
            }
        }
    }

    for &(p, q) in &pairs {
        for (a, b) in [(p, q), (q, p)] {
            ctx.reset_budget();
            let ia = ctx.initials(a)?;
            let moves_a = ctx.transitions(a)?;
            let moves_b = ctx.transitions(b)?;
            for &(l, a2) in moves_a.iter() {
                if l == Label::Timeout {
                    continue;
                }
                if !moves_b.iter().any(|&(m, b2)| m == l && rel(a2, b2)) {
                    return Err(Error::Certificate(format!(
                        "{a} moves with {l} to {a2}, which {b} cannot match"
                    )));
                }
            }
            for x in &envs {
                if !ia.idles_under(x) {
                    continue;
                }
                for &(l, a2) in moves_a.iter() {
                    if l != Label::Timeout {
                        continue;
                    }
                    let matched = moves_b
                        .iter()
                        .any(|&(m, b2)| m == Label::Timeout && rel3(a2, x, b2));
                    if !matched {
                        return Err(Error::Certificate(format!(
                            "{a} times out to {a2} under {x}, which {b} cannot match"
                        )));
                    }
                }
            }
        }
    }

    for (p, y, q) in &triples {
        for (a, b) in [(*p, *q), (*q, *p)] {
            ctx.reset_budget();
            let ia = ctx.initials(a)?;
            let moves_a = ctx.transitions(a)?;
            let moves_b = ctx.transitions(b)?;
            let idle_y = ia.idles_under(y);
            for &(l, a2) in moves_a.iter() {
                match l {
                    Label::Act(c) => {
                        if !y.contains(c) && !idle_y {
                            continue;
                        }
                        if !moves_b.iter().any(|&(m, b2)| m == l && rel(a2, b2)) {
                            return Err(Error::Certificate(format!(
                                "under {y}, {a} moves with {l} to {a2}, which {b} cannot match"
                            )));
                        }
                    }
                    Label::Tau => {
                        if !moves_b
                            .iter()
                            .any(|&(m, b2)| m == Label::Tau && rel3(a2, y, b2))
                        {
                            return Err(Error::Certificate(format!(
                                "under {y}, {a} moves with tau to {a2}, which {b} cannot match"
                            )));
                        }
                    }
                    Label::Timeout => {}
                }
            }
            for x in &envs {
                if !ia.idles_under(x) || !idle_y {
                    continue;
                }
                for &(l, a2) in moves_a.iter() {
                    if l != Label::Timeout {
                        continue;
                    }
                    let matched = moves_b
                        .iter()
                        .any(|&(m, b2)| m == Label::Timeout && rel3(a2, x, b2));
                    if !matched {
                        return Err(Error::Certificate(format!(
                            "under {y}, {a} times out to {a2} under {x}, which {b} cannot match"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
