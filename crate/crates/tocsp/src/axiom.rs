//! Equational rewriting: head normal forms with rewrite traces, named
//! algebraic laws, and an equivalence decision procedure for
//! recursion-free terms.
//!
//! [`hnf`] rewrites a closed guarded term into the sum of its derivable
//! transitions, one prefix per transition, and records each applied
//! equation as a step of a [`RewriteTrace`]. Replaying the trace from the
//! input term reproduces the normal form literally, so traces double as
//! checkable evidence. Sums are treated as multisets: steps that merely
//! reorder or reassociate summands are recorded under the names of the
//! shuffling equations (`A1`, `A2`) instead of being expanded into
//! individual applications, and steps that match an equation only after
//! such shuffling carry a `(mod A1,A2)` annotation.
//!
//! [`eq_recursion_free`] decides strong reactive bisimilarity of closed
//! recursion-free terms equationally: both sides are head-normalised,
//! the canonical environments are grouped into classes with identical
//! [`psi_expand`] results, and within each class the expansions are
//! matched summand by summand, recursing on the targets. The returned
//! trace holds one step per environment class.
//!
//! [`check_law`] and [`theta_collapse_check`] validate instantiations of
//! the named laws, rejecting bindings that violate a side condition
//! before any equivalence is computed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::equiv::{canonical_envs, Verdict, Witness};
use crate::sos;
use crate::syntax::{
    choice, hide, nil, par, prefix, psi, rename, sum, theta, theta_env, unfold, ActionSet, Label,
    Term, TermNode,
};
use crate::{Error, Limits};

/// A term presented as a sum of prefixes, one per derivable transition.
///
/// The empty summand list denotes inaction. For a value produced by
/// [`hnf`], the list equals [`sos::derive_transitions`] of the source
/// term, in derivation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadNormalForm {
    pub summands: Vec<(Label, Term)>,
}

impl HeadNormalForm {
    /// The sum the summand list denotes.
    pub fn term(&self) -> Term {
        sum_prefixes(&self.summands)
    }
}

fn sum_prefixes(summands: &[(Label, Term)]) -> Term {
    sum(summands.iter().map(|&(l, t)| prefix(l, t)))
}

/// One rewrite: at `position` in the current term, `before` was replaced
/// by `after`, justified by the equation named in `axiom`.
#[derive(Clone, Debug)]
pub struct RewriteStep {
    pub axiom: String,
    /// Path of child indices from the root; empty for the root itself.
    pub position: Vec<usize>,
    pub before: Term,
    pub after: Term,
}

impl fmt::Display for RewriteStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.axiom)?;
        if !self.position.is_empty() {
            let path: Vec<String> = self.position.iter().map(|i| i.to_string()).collect();
            write!(f, " at {}", path.join("."))?;
        }
        write!(f, ": {} = {}", self.before, self.after)
    }
}

/// A sequence of rewrite steps transforming one term into another.
#[derive(Clone, Debug, Default)]
pub struct RewriteTrace {
    pub steps: Vec<RewriteStep>,
}

impl RewriteTrace {
    /// Applies the steps to `from` in order, checking that each step's
    /// `before` term is literally present at its position. Returns the
    /// final term.
    pub fn replay(&self, from: Term) -> Result<Term, Error> {
        let mut cur = from;
        for (k, step) in self.steps.iter().enumerate() {
            let found = subterm_at(cur, &step.position).ok_or_else(|| {
                Error::Usage(format!(
                    "rewrite step {k} addresses a position that {cur} does not have"
                ))
            })?;
            if found != step.before {
                return Err(Error::Usage(format!(
                    "rewrite step {k} expects {} but the term holds {found}",
                    step.before
                )));
            }
            cur = replace_at(cur, &step.position, step.after)
                .expect("the position was resolved above");
        }
        Ok(cur)
    }
}

impl fmt::Display for RewriteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, step) in self.steps.iter().enumerate() {
            writeln!(f, "{:>3}. {step}", k + 1)?;
        }
        Ok(())
    }
}

fn child(t: Term, i: usize) -> Option<Term> {
    match (t.node(), i) {
        (TermNode::Prefix(_, p), 0)
        | (TermNode::Choice(p, _), 0)
        | (TermNode::Par(_, p, _), 0)
        | (TermNode::Hide(_, p), 0)
        | (TermNode::Rename(_, p), 0)
        | (TermNode::Theta(_, _, p), 0)
        | (TermNode::Psi(_, p), 0) => Some(*p),
        (TermNode::Choice(_, q), 1) | (TermNode::Par(_, _, q), 1) => Some(*q),
        _ => None,
    }
}

fn subterm_at(t: Term, path: &[usize]) -> Option<Term> {
    path.iter().try_fold(t, |cur, &i| child(cur, i))
}

fn replace_at(t: Term, path: &[usize], new: Term) -> Option<Term> {
    let Some((&i, rest)) = path.split_first() else {
        return Some(new);
    };
    let sub = replace_at(child(t, i)?, rest, new)?;
    Some(match (t.node(), i) {
        (TermNode::Prefix(l, _), 0) => prefix(*l, sub),
        (TermNode::Choice(_, q), 0) => choice(sub, *q),
        (TermNode::Choice(p, _), 1) => choice(*p, sub),
        (TermNode::Par(s, _, q), 0) => par(s.clone(), sub, *q),
        (TermNode::Par(s, p, _), 1) => par(s.clone(), *p, sub),
        (TermNode::Hide(h, _), 0) => hide(h.clone(), sub),
        (TermNode::Rename(r, _), 0) => rename(r.clone(), sub),
        (TermNode::Theta(l, u, _), 0) => {
            theta(l.clone(), u.clone(), sub).expect("the bounds are unchanged")
        }
        (TermNode::Psi(x, _), 0) => psi(x.clone(), sub),
        _ => return None,
    })
}

fn at(base: &[usize], more: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut v = base.to_vec();
    v.extend(more);
    v
}

/// The path to the `i`-th prefix of a right-nested sum of `n` prefixes.
fn summand_path(i: usize, n: usize) -> Vec<usize> {
    let mut p = vec![1; i];
    if i < n - 1 {
        p.push(0);
    }
    p
}

struct Rewriter {
    steps: Vec<RewriteStep>,
    unfolds_left: u64,
    budget: u64,
}

impl Rewriter {
    fn push(&mut self, axiom: &str, position: &[usize], before: Term, after: Term) {
        self.steps.push(RewriteStep {
            axiom: axiom.into(),
            position: position.to_vec(),
            before,
            after,
        });
    }

    /// Merges the slot lists of a right-nested spine of sums into one
    /// flat summand list. The literal subterm at `pos` must be the spine
    /// `sum(slots[0]) + (sum(slots[1]) + ...)`.
    fn flatten(&mut self, pos: &[usize], slots: &[Vec<(Label, Term)>]) -> Vec<(Label, Term)> {
        let mut tail: Vec<(Label, Term)> = slots.last().cloned().unwrap_or_default();
        for (i, slot) in slots.iter().enumerate().rev().skip(1) {
            let node_pos = at(pos, std::iter::repeat_n(1, i));
            let tail_term = sum_prefixes(&tail);
            let cur = choice(sum_prefixes(slot), tail_term);
            if slot.is_empty() && tail.is_empty() {
                self.push("A3", &node_pos, cur, nil());
            } else if slot.is_empty() {
                self.push("A4 (mod A2)", &node_pos, cur, tail_term);
            } else if tail.is_empty() {
                self.push("A4", &node_pos, cur, sum_prefixes(slot));
            } else {
                for j in 0..slot.len() - 1 {
                    let pj = at(&node_pos, std::iter::repeat_n(1, j));
                    let head = prefix(slot[j].0, slot[j].1);
                    let rest = sum_prefixes(&slot[j + 1..]);
                    self.push(
                        "A1",
                        &pj,
                        choice(choice(head, rest), tail_term),
                        choice(head, choice(rest, tail_term)),
                    );
                }
            }
            let mut merged = slot.clone();
            merged.extend(tail);
            tail = merged;
        }
        tail
    }

    /// Removes later duplicates from the flat sum at `pos`, keeping the
    /// first occurrence of each summand.
    fn dedup(&mut self, pos: &[usize], mut list: Vec<(Label, Term)>) -> Vec<(Label, Term)> {
        let mut i = 0;
        while i < list.len() {
            if list[..i].contains(&list[i]) {
                let mut without = list.clone();
                without.remove(i);
                self.push(
                    "A3 (mod A1,A2)",
                    pos,
                    sum_prefixes(&list),
                    sum_prefixes(&without),
                );
                list = without;
            } else {
                i += 1;
            }
        }
        list
    }

    /// Rewrites the subterm at `pos` into a flat sum of prefixes and
    /// returns its summands. Maintains the invariant that after the
    /// recorded steps, the literal subterm at `pos` equals the sum of the
    /// returned list.
    fn head(&mut self, t: Term, pos: &[usize]) -> Result<Vec<(Label, Term)>, Error> {
        match t.node() {
            TermNode::Nil => Ok(Vec::new()),
            TermNode::Var(_) => unreachable!("head normalisation runs on closed terms"),
            TermNode::Prefix(l, p) => Ok(vec![(*l, *p)]),
            TermNode::Choice(p, q) => {
                let sp = self.head(*p, &at(pos, [0]))?;
                let sq = self.head(*q, &at(pos, [1]))?;
                let list = self.flatten(pos, &[sp, sq]);
                Ok(self.dedup(pos, list))
            }
            TermNode::Par(sync, p, q) => self.head_par(sync, *p, *q, pos),
            TermNode::Hide(hidden, p) => {
                let sp = self.head(*p, &at(pos, [0]))?;
                let wrap = |b: Term| hide(hidden.clone(), b);
                if sp.is_empty() {
                    self.push("hide-nil", pos, wrap(nil()), nil());
                    return Ok(Vec::new());
                }
                let n = sp.len();
                for k in 0..n - 1 {
                    let pk = at(pos, std::iter::repeat_n(1, k));
                    let head = prefix(sp[k].0, sp[k].1);
                    let rest = sum_prefixes(&sp[k + 1..]);
                    self.push(
                        "hide-sum",
                        &pk,
                        wrap(choice(head, rest)),
                        choice(wrap(head), wrap(rest)),
                    );
                }
                let mut list = Vec::with_capacity(n);
                for (i, &(l, p2)) in sp.iter().enumerate() {
                    let pi = at(pos, summand_path(i, n));
                    let body = wrap(p2);
                    let (name, l2) = if hidden.contains_label(l) {
                        ("hide-hidden", Label::Tau)
                    } else {
                        ("hide-act", l)
                    };
                    self.push(name, &pi, wrap(prefix(l, p2)), prefix(l2, body));
                    list.push((l2, body));
                }
                Ok(self.dedup(pos, list))
            }
            TermNode::Rename(rel, p) => {
                let sp = self.head(*p, &at(pos, [0]))?;
                let wrap = |b: Term| rename(rel.clone(), b);
                if sp.is_empty() {
                    self.push("rename-nil", pos, wrap(nil()), nil());
                    return Ok(Vec::new());
                }
                let n = sp.len();
                for k in 0..n - 1 {
                    let pk = at(pos, std::iter::repeat_n(1, k));
                    let head = prefix(sp[k].0, sp[k].1);
                    let rest = sum_prefixes(&sp[k + 1..]);
                    self.push(
                        "rename-sum",
                        &pk,
                        wrap(choice(head, rest)),
                        choice(wrap(head), wrap(rest)),
                    );
                }
                let mut slots = Vec::with_capacity(n);
                for (i, &(l, p2)) in sp.iter().enumerate() {
                    let pi = at(pos, summand_path(i, n));
                    let body = wrap(p2);
                    let (name, contrib) = match l {
                        Label::Tau => ("rename-tau", vec![(Label::Tau, body)]),
                        Label::Timeout => ("rename-timeout", vec![(Label::Timeout, body)]),
                        Label::Act(a) => (
                            "rename-act",
                            rel.images_of(a).map(|b| (Label::Act(b), body)).collect(),
                        ),
                    };
                    self.push(name, &pi, wrap(prefix(l, p2)), sum_prefixes(&contrib));
                    slots.push(contrib);
                }
                let list = self.flatten(pos, &slots);
                Ok(self.dedup(pos, list))
            }
            TermNode::Theta(lower, upper, p) => self.head_theta(lower, upper, *p, pos),
            TermNode::Psi(env, p) => self.head_psi(env, *p, pos),
            TermNode::Rec(..) => {
                if self.unfolds_left == 0 {
                    return Err(Error::UnfoldBudget {
                        budget: self.budget,
                    });
                }
                self.unfolds_left -= 1;
                let unfolded = unfold(t)?;
                self.push("RDP", pos, t, unfolded);
                self.head(unfolded, pos)
            }
        }
    }

    fn head_par(
        &mut self,
        sync: &ActionSet,
        p: Term,
        q: Term,
        pos: &[usize],
    ) -> Result<Vec<(Label, Term)>, Error> {
        enum Mv {
            Left(Term),
            Right(Term),
            Both(Term, Term),
        }
        let sp = self.head(p, &at(pos, [0]))?;
        let sq = self.head(q, &at(pos, [1]))?;
        let p_hat = sum_prefixes(&sp);
        let q_hat = sum_prefixes(&sq);
        let mut moves: Vec<(Label, Mv)> = Vec::new();
        for &(l, p2) in &sp {
            if !sync.contains_label(l) {
                moves.push((l, Mv::Left(p2)));
            }
        }
        for &(l, q2) in &sq {
            if !sync.contains_label(l) {
                moves.push((l, Mv::Right(q2)));
            }
        }
        for &(l, p2) in &sp {
            if sync.contains_label(l) {
                for &(m, q2) in &sq {
                    if m == l {
                        moves.push((l, Mv::Both(p2, q2)));
                    }
                }
            }
        }
        let hatted: Vec<(Label, Term)> = moves
            .iter()
            .map(|(l, mv)| {
                let target = match mv {
                    Mv::Left(p2) => par(sync.clone(), *p2, q_hat),
                    Mv::Right(q2) => par(sync.clone(), p_hat, *q2),
                    Mv::Both(p2, q2) => par(sync.clone(), *p2, *q2),
                };
                (*l, target)
            })
            .collect();
        self.push(
            "expansion",
            pos,
            par(sync.clone(), p_hat, q_hat),
            sum_prefixes(&hatted),
        );
        // The expansion leaves each interleaved summand holding the
        // normalised sibling; the derived transitions hold the original
        // one, so the child equality is undone inside each target.
        let n = hatted.len();
        let mut list = Vec::with_capacity(n);
        for (i, (l, mv)) in moves.iter().enumerate() {
            let target = match mv {
                Mv::Left(p2) => {
                    if q_hat != q {
                        let pp = at(pos, summand_path(i, n).into_iter().chain([0, 1]));
                        self.push("congruence", &pp, q_hat, q);
                    }
                    par(sync.clone(), *p2, q)
                }
                Mv::Right(q2) => {
                    if p_hat != p {
                        let pp = at(pos, summand_path(i, n).into_iter().chain([0, 0]));
                        self.push("congruence", &pp, p_hat, p);
                    }
                    par(sync.clone(), p, *q2)
                }
                Mv::Both(p2, q2) => par(sync.clone(), *p2, *q2),
            };
            list.push((*l, target));
        }
        Ok(self.dedup(pos, list))
    }

    fn head_theta(
        &mut self,
        lower: &ActionSet,
        upper: &ActionSet,
        p: Term,
        pos: &[usize],
    ) -> Result<Vec<(Label, Term)>, Error> {
        let sp = self.head(p, &at(pos, [0]))?;
        let wrap =
            |b: Term| theta(lower.clone(), upper.clone(), b).expect("the bounds are unchanged");
        let is_pivot =
            |l: Label| l == Label::Tau || matches!(l, Label::Act(a) if lower.contains(a));
        if !sp.iter().any(|&(l, _)| is_pivot(l)) {
            // Nothing the restriction could preempt with: it dissolves.
            self.push("theta-idle", pos, wrap(sum_prefixes(&sp)), sum_prefixes(&sp));
            return Ok(sp);
        }
        // Summands the restriction forbids are pruned while a preempting
        // summand is still present.
        let mut kept = sp;
        loop {
            let dropped = kept.iter().position(|&(l, _)| match l {
                Label::Timeout => true,
                Label::Act(a) => !upper.contains(a),
                Label::Tau => false,
            });
            let Some(i) = dropped else { break };
            let mut without = kept.clone();
            without.remove(i);
            self.push(
                "theta-prune (mod A1,A2)",
                pos,
                wrap(sum_prefixes(&kept)),
                wrap(sum_prefixes(&without)),
            );
            kept = without;
        }
        let result_of = |&(l, t2): &(Label, Term)| match l {
            Label::Tau => (Label::Tau, wrap(t2)),
            other => (other, t2),
        };
        let step_name = |l: Label| if l == Label::Tau { "theta-tau" } else { "theta-act" };
        let n = kept.len();
        if n == 1 {
            let (l, t2) = kept[0];
            let res = result_of(&kept[0]);
            self.push(step_name(l), pos, wrap(prefix(l, t2)), prefix(res.0, res.1));
            return Ok(vec![res]);
        }
        // A preempting summand is kept leftmost so that every split
        // leaves one behind; the final shuffle restores derivation order.
        let piv = kept
            .iter()
            .position(|&(l, _)| is_pivot(l))
            .expect("a preempting summand exists");
        let mut work = kept.clone();
        if piv != 0 {
            let pv = work.remove(piv);
            work.insert(0, pv);
            self.push(
                "A1,A2",
                &at(pos, [0]),
                sum_prefixes(&kept),
                sum_prefixes(&work),
            );
        }
        for d in 0..n - 1 {
            let m = n - 1 - d;
            let here = at(pos, std::iter::repeat_n(0, d));
            let peeled = work[m];
            self.push(
                "theta-split (mod A1,A2)",
                &here,
                wrap(sum_prefixes(&work[..=m])),
                choice(wrap(sum_prefixes(&work[..m])), wrap(prefix(peeled.0, peeled.1))),
            );
            let res = result_of(&peeled);
            self.push(
                step_name(peeled.0),
                &at(&here, [1]),
                wrap(prefix(peeled.0, peeled.1)),
                prefix(res.0, res.1),
            );
        }
        let innermost = at(pos, std::iter::repeat_n(0, n - 1));
        let first = work[0];
        let res0 = result_of(&first);
        self.push(
            step_name(first.0),
            &innermost,
            wrap(prefix(first.0, first.1)),
            prefix(res0.0, res0.1),
        );
        let work_results: Vec<(Label, Term)> = work.iter().map(result_of).collect();
        let mut lt = prefix(work_results[0].0, work_results[0].1);
        for r in &work_results[1..] {
            lt = choice(lt, prefix(r.0, r.1));
        }
        let final_list: Vec<(Label, Term)> = kept.iter().map(result_of).collect();
        let target = sum_prefixes(&final_list);
        if lt != target {
            self.push("A1,A2", pos, lt, target);
        }
        Ok(final_list)
    }

    fn head_psi(
        &mut self,
        env: &ActionSet,
        p: Term,
        pos: &[usize],
    ) -> Result<Vec<(Label, Term)>, Error> {
        let sp = self.head(p, &at(pos, [0]))?;
        let wrap = |b: Term| psi(env.clone(), b);
        let is_live = |l: Label| l == Label::Tau || matches!(l, Label::Act(a) if env.contains(a));
        if sp.iter().any(|&(l, _)| is_live(l)) {
            // A live initial keeps the time-outs from firing: drop them.
            let mut kept = sp;
            while let Some(i) = kept.iter().position(|&(l, _)| l == Label::Timeout) {
                let mut without = kept.clone();
                without.remove(i);
                self.push(
                    "psi-prune (mod A1,A2)",
                    pos,
                    wrap(sum_prefixes(&kept)),
                    wrap(sum_prefixes(&without)),
                );
                kept = without;
            }
            let n = kept.len();
            if n == 1 {
                let (l, t2) = kept[0];
                self.push("psi-prefix", pos, wrap(prefix(l, t2)), prefix(l, t2));
                return Ok(kept);
            }
            let piv = kept
                .iter()
                .position(|&(l, _)| is_live(l))
                .expect("a live summand exists");
            let mut work = kept.clone();
            if piv != 0 {
                let pv = work.remove(piv);
                work.insert(0, pv);
                self.push(
                    "A1,A2",
                    &at(pos, [0]),
                    sum_prefixes(&kept),
                    sum_prefixes(&work),
                );
            }
            for d in 0..n - 1 {
                let m = n - 1 - d;
                let here = at(pos, std::iter::repeat_n(0, d));
                let peeled = work[m];
                let name = if is_live(peeled.0) {
                    "psi-pass-live (mod A1,A2)"
                } else {
                    "psi-pass (mod A1,A2)"
                };
                self.push(
                    name,
                    &here,
                    wrap(sum_prefixes(&work[..=m])),
                    choice(wrap(sum_prefixes(&work[..m])), prefix(peeled.0, peeled.1)),
                );
            }
            let innermost = at(pos, std::iter::repeat_n(0, n - 1));
            let first = work[0];
            self.push(
                "psi-prefix",
                &innermost,
                wrap(prefix(first.0, first.1)),
                prefix(first.0, first.1),
            );
            let mut lt = prefix(work[0].0, work[0].1);
            for &(l, t2) in &work[1..] {
                lt = choice(lt, prefix(l, t2));
            }
            let target = sum_prefixes(&kept);
            if lt != target {
                self.push("A1,A2", pos, lt, target);
            }
            return Ok(kept);
        }
        // Idle: the time-outs fire, and their targets are tagged with the
        // environment they fire in.
        let touts: Vec<(Label, Term)> = sp
            .iter()
            .copied()
            .filter(|&(l, _)| l == Label::Timeout)
            .collect();
        let vis: Vec<(Label, Term)> = sp
            .iter()
            .copied()
            .filter(|&(l, _)| l != Label::Timeout)
            .collect();
        let work: Vec<(Label, Term)> = touts.iter().chain(vis.iter()).copied().collect();
        if work != sp {
            self.push(
                "A1,A2",
                &at(pos, [0]),
                sum_prefixes(&sp),
                sum_prefixes(&work),
            );
        }
        let wrapped: Vec<(Label, Term)> = touts
            .iter()
            .map(|&(_, t2)| (Label::Timeout, theta_env(env.clone(), t2)))
            .collect();
        let final_list: Vec<(Label, Term)> = sp
            .iter()
            .map(|&(l, t2)| {
                if l == Label::Timeout {
                    (Label::Timeout, theta_env(env.clone(), t2))
                } else {
                    (l, t2)
                }
            })
            .collect();
        let (nt, nv) = (touts.len(), vis.len());
        if nv == 0 {
            self.push(
                "psi-timeout",
                pos,
                wrap(sum_prefixes(&touts)),
                sum_prefixes(&wrapped),
            );
            return Ok(final_list);
        }
        for d in 0..nv {
            let m = nt + nv - 1 - d;
            let here = at(pos, std::iter::repeat_n(0, d));
            if m == 0 {
                let v = work[0];
                self.push("psi-prefix", &here, wrap(prefix(v.0, v.1)), prefix(v.0, v.1));
            } else {
                let peeled = work[m];
                self.push(
                    "psi-pass (mod A1,A2)",
                    &here,
                    wrap(sum_prefixes(&work[..=m])),
                    choice(wrap(sum_prefixes(&work[..m])), prefix(peeled.0, peeled.1)),
                );
            }
        }
        if nt > 0 {
            let here = at(pos, std::iter::repeat_n(0, nv));
            self.push(
                "psi-timeout",
                &here,
                wrap(sum_prefixes(&touts)),
                sum_prefixes(&wrapped),
            );
        }
        let mut lt = if nt > 0 {
            sum_prefixes(&wrapped)
        } else {
            prefix(vis[0].0, vis[0].1)
        };
        let skip = if nt > 0 { 0 } else { 1 };
        for &(l, t2) in &vis[skip..] {
            lt = choice(lt, prefix(l, t2));
        }
        let target = sum_prefixes(&final_list);
        if lt != target {
            self.push("A1,A2", pos, lt, target);
        }
        Ok(final_list)
    }
}

/// Rewrites a closed, valid, guarded term into its head normal form and
/// returns the applied steps.
///
/// The summand list equals the derivable transitions of the input, in
/// derivation order, and replaying the trace from the input reproduces
/// the sum the summands denote.
pub fn hnf(p: Term) -> Result<(HeadNormalForm, RewriteTrace), Error> {
    hnf_with(p, &Limits::default())
}

/// [`hnf`] with explicit limits; `unfold_budget` caps the recursion
/// unfoldings spent across the whole normalisation.
pub fn hnf_with(p: Term, limits: &Limits) -> Result<(HeadNormalForm, RewriteTrace), Error> {
    sos::ensure_process(p)?;
    if !p.is_guarded() {
        return Err(Error::Unguarded(format!(
            "{p} has no head normal form"
        )));
    }
    let mut rw = Rewriter {
        steps: Vec::new(),
        unfolds_left: limits.unfold_budget,
        budget: limits.unfold_budget,
    };
    let summands = rw.head(p, &[])?;
    Ok((HeadNormalForm { summands }, RewriteTrace { steps: rw.steps }))
}

/// The head normal form of `psi_X(h)`.
///
/// When `h` has a summand labelled with `tau` or an action in `x`, the
/// environment lets the process proceed and every time-out summand is
/// dropped. Otherwise the process idles and each time-out target is
/// tagged with the environment it fires in.
pub fn psi_expand(x: &ActionSet, h: &HeadNormalForm) -> HeadNormalForm {
    let live = h.summands.iter().any(|&(l, _)| match l {
        Label::Tau => true,
        Label::Act(a) => x.contains(a),
        Label::Timeout => false,
    });
    let summands = h
        .summands
        .iter()
        .filter_map(|&(l, q)| match l {
            Label::Timeout if live => None,
            Label::Timeout => Some((Label::Timeout, theta_env(x.clone(), q))),
            _ => Some((l, q)),
        })
        .collect();
    HeadNormalForm { summands }
}

/// Groups the canonical environments of the pair into classes with
/// term-identical [`psi_expand`] results on both head normal forms.
/// Classes are ordered by the first environment they contain; the first
/// member of each class is the smallest, making it a usable
/// representative.
pub fn env_classes(p: Term, q: Term) -> Result<Vec<Vec<ActionSet>>, Error> {
    env_classes_with(p, q, &Limits::default())
}

/// [`env_classes`] with explicit limits.
pub fn env_classes_with(p: Term, q: Term, limits: &Limits) -> Result<Vec<Vec<ActionSet>>, Error> {
    sos::ensure_process(p)?;
    sos::ensure_process(q)?;
    let hp = hnf_with(p, limits)?.0;
    let hq = hnf_with(q, limits)?.0;
    group_envs(p, q, &hp, &hq, limits)
}

fn group_envs(
    p: Term,
    q: Term,
    hp: &HeadNormalForm,
    hq: &HeadNormalForm,
    limits: &Limits,
) -> Result<Vec<Vec<ActionSet>>, Error> {
    let lts = sos::explore_with(&[p, q], limits)?;
    if !lts.complete {
        return Err(Error::StateBudget {
            max_states: limits.max_states,
        });
    }
    let relevant = sos::relevant_alphabet(&lts);
    let envs = canonical_envs(&relevant, limits.env_limit)?;
    let mut classes: Vec<((Term, Term), Vec<ActionSet>)> = Vec::new();
    for x in envs {
        let key = (psi_expand(&x, hp).term(), psi_expand(&x, hq).term());
        match classes.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(x),
            None => classes.push((key, vec![x])),
        }
    }
    Ok(classes.into_iter().map(|(_, members)| members).collect())
}

/// Decides strong reactive bisimilarity of two closed, valid,
/// recursion-free terms equationally.
///
/// Both sides are head-normalised; for one representative environment
/// per class the two [`psi_expand`] results are matched summand against
/// summand, recursing on the targets. On success the trace holds one
/// step per environment class, rewriting the expansion of the left head
/// normal form into the expansion of the right one.
pub fn eq_recursion_free(p: Term, q: Term) -> Result<(Verdict, RewriteTrace), Error> {
    eq_recursion_free_with(p, q, &Limits::default())
}

/// [`eq_recursion_free`] with explicit limits.
pub fn eq_recursion_free_with(
    p: Term,
    q: Term,
    limits: &Limits,
) -> Result<(Verdict, RewriteTrace), Error> {
    for t in [p, q] {
        sos::ensure_process(t)?;
        if !t.is_recursion_free() {
            return Err(Error::RecursionPresent(t.to_string()));
        }
    }
    let hp = hnf_with(p, limits)?.0;
    let hq = hnf_with(q, limits)?.0;
    let classes = group_envs(p, q, &hp, &hq, limits)?;
    let mut memo = HashMap::new();
    let mut steps = Vec::new();
    for class in &classes {
        let x = &class[0];
        let ep = psi_expand(x, &hp);
        let eq = psi_expand(x, &hq);
        if !expansions_match(&ep, &eq, limits, &mut memo)? {
            let verdict = Verdict {
                equivalent: false,
                witness: Some(Witness::Note(format!(
                    "in environment {x} the expansions {} and {} have no matching of summands",
                    ep.term(),
                    eq.term()
                ))),
            };
            return Ok((verdict, RewriteTrace::default()));
        }
        steps.push(RewriteStep {
            axiom: "RA".into(),
            position: Vec::new(),
            before: psi(x.clone(), hp.term()),
            after: psi(x.clone(), hq.term()),
        });
    }
    Ok((
        Verdict {
            equivalent: true,
            witness: None,
        },
        RewriteTrace { steps },
    ))
}

fn expansions_match(
    ep: &HeadNormalForm,
    eq: &HeadNormalForm,
    limits: &Limits,
    memo: &mut HashMap<(Term, Term), bool>,
) -> Result<bool, Error> {
    for (from, into) in [(ep, eq), (eq, ep)] {
        for &(l, u) in &from.summands {
            let mut found = false;
            for &(l2, v) in &into.summands {
                if l2 == l && decide_eq(u, v, limits, memo)? {
                    found = true;
                    break;
                }
            }
            if !found {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn decide_eq(
    p: Term,
    q: Term,
    limits: &Limits,
    memo: &mut HashMap<(Term, Term), bool>,
) -> Result<bool, Error> {
    if p == q {
        return Ok(true);
    }
    if let Some(&r) = memo.get(&(p, q)) {
        return Ok(r);
    }
    let hp = hnf_with(p, limits)?.0;
    let hq = hnf_with(q, limits)?.0;
    let classes = group_envs(p, q, &hp, &hq, limits)?;
    let mut ok = true;
    for class in &classes {
        let x = &class[0];
        let ep = psi_expand(x, &hp);
        let eq = psi_expand(x, &hq);
        if !expansions_match(&ep, &eq, limits, memo)? {
            ok = false;
            break;
        }
    }
    memo.insert((p, q), ok);
    memo.insert((q, p), ok);
    Ok(ok)
}

/// A named algebraic law an instantiation can be checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    /// Two nested environment restrictions collapse into one.
    L1,
    /// A live internal step absorbs a time-out alternative.
    L2,
    /// A time-out target runs restricted to the environments that let
    /// the time-out fire, stated for a sum of visible prefixes.
    L3,
    /// The single-action form of [`Law::L3`].
    L3Prime,
}

impl std::str::FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Law, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(Law::L1),
            "l2" => Ok(Law::L2),
            "l3" => Ok(Law::L3),
            "l3'" | "l3prime" => Ok(Law::L3Prime),
            other => Err(Error::Usage(format!(
                "unknown law {other}; expected L1, L2, L3 or L3'"
            ))),
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::L1 => "L1",
            Law::L2 => "L2",
            Law::L3 => "L3",
            Law::L3Prime => "L3'",
        })
    }
}

/// Named terms and action sets a law is instantiated with.
///
/// L1 takes the sets `K`, `V`, `L`, `U` and the term `x`. L2 takes the
/// terms `x` and `y`. L3 takes the terms `s` (a sum of visible-action
/// prefixes) and `y` plus the alphabet. L3' takes the singleton set `a`,
/// the terms `x` and `y`, and the alphabet.
#[derive(Clone, Debug, Default)]
pub struct LawBindings {
    pub terms: BTreeMap<String, Term>,
    pub sets: BTreeMap<String, ActionSet>,
    /// The full action alphabet, for laws that complement a set.
    pub alphabet: Option<ActionSet>,
}

impl LawBindings {
    fn term(&self, name: &str) -> Result<Term, Error> {
        self.terms
            .get(name)
            .copied()
            .ok_or_else(|| Error::Usage(format!("the law instantiation misses the term {name}")))
    }

    fn set(&self, name: &str) -> Result<&ActionSet, Error> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::Usage(format!("the law instantiation misses the set {name}")))
    }

    fn alphabet(&self) -> Result<&ActionSet, Error> {
        self.alphabet
            .as_ref()
            .ok_or_else(|| Error::Usage("the law instantiation misses the alphabet".into()))
    }
}

/// Checks one instantiation of a named law, rejecting bindings that
/// violate the law's side condition.
///
/// L1 is an equality up to strong bisimilarity; L2, L3 and L3' hold up
/// to strong reactive bisimilarity.
pub fn check_law(law: Law, b: &LawBindings) -> Result<Verdict, Error> {
    check_law_with(law, b, &Limits::default())
}

/// [`check_law`] with explicit limits.
pub fn check_law_with(law: Law, b: &LawBindings, limits: &Limits) -> Result<Verdict, Error> {
    match law {
        Law::L1 => theta_collapse_check_with(
            b.set("K")?,
            b.set("V")?,
            b.set("L")?,
            b.set("U")?,
            b.term("x")?,
            limits,
        ),
        Law::L2 => {
            let lhs = choice(
                prefix(Label::Tau, b.term("x")?),
                prefix(Label::Timeout, b.term("y")?),
            );
            let rhs = prefix(Label::Tau, b.term("x")?);
            crate::equiv::reactive_bisim_with(lhs, rhs, limits)
        }
        Law::L3 => {
            let s = b.term("s")?;
            let y = b.term("y")?;
            let alphabet = b.alphabet()?;
            let mut initial_acts = Vec::new();
            for leaf in choice_leaves(s) {
                match leaf.node() {
                    TermNode::Prefix(Label::Act(a), _) => initial_acts.push(*a),
                    _ => {
                        return Err(Error::SideCondition(format!(
                            "the guarding part of L3 must be a sum of visible-action prefixes, \
                             but {leaf} is not one"
                        )))
                    }
                }
            }
            let ins: ActionSet = initial_acts.into_iter().collect();
            law3_check(s, &ins, y, alphabet, limits)
        }
        Law::L3Prime => {
            let a_set = b.set("a")?;
            if a_set.len() != 1 {
                return Err(Error::SideCondition(format!(
                    "L3' needs a single action, got the set {a_set}"
                )));
            }
            let a = a_set.iter().next().expect("the set has one element");
            let s = prefix(Label::Act(a), b.term("x")?);
            law3_check(s, a_set, b.term("y")?, b.alphabet()?, limits)
        }
    }
}

fn law3_check(
    s: Term,
    ins: &ActionSet,
    y: Term,
    alphabet: &ActionSet,
    limits: &Limits,
) -> Result<Verdict, Error> {
    if !ins.is_subset_of(alphabet) {
        return Err(Error::SideCondition(format!(
            "the guarding actions {ins} lie outside the alphabet {alphabet}"
        )));
    }
    let guard = theta(ActionSet::empty(), alphabet.difference(ins), y)
        .expect("the empty set lies inside any set");
    let lhs = choice(s, prefix(Label::Timeout, y));
    let rhs = choice(s, prefix(Label::Timeout, guard));
    crate::equiv::reactive_bisim_with(lhs, rhs, limits)
}

/// Checks that the nested restrictions `theta_K^V(theta_L^U(p))` and the
/// collapsed restriction `theta_{K∪L}^{V∩U}(p)` are strongly bisimilar,
/// after validating the side conditions under which the collapse holds.
pub fn theta_collapse_check(
    k: &ActionSet,
    v: &ActionSet,
    l: &ActionSet,
    u: &ActionSet,
    p: Term,
) -> Result<Verdict, Error> {
    theta_collapse_check_with(k, v, l, u, p, &Limits::default())
}

/// [`theta_collapse_check`] with explicit limits.
pub fn theta_collapse_check_with(
    k: &ActionSet,
    v: &ActionSet,
    l: &ActionSet,
    u: &ActionSet,
    p: Term,
    limits: &Limits,
) -> Result<Verdict, Error> {
    if !l.is_subset_of(u) {
        return Err(Error::SideCondition(format!(
            "the lower set {l} must lie inside the upper set {u}"
        )));
    }
    if !k.is_subset_of(v) {
        return Err(Error::SideCondition(format!(
            "the lower set {k} must lie inside the upper set {v}"
        )));
    }
    let lower = k.union(l);
    let upper = v.intersection(u);
    if !lower.is_subset_of(&upper) {
        return Err(Error::SideCondition(format!(
            "the combined lower set {lower} must lie inside the combined upper set {upper}"
        )));
    }
    let nested = u == v
        || k == l
        || (k.is_subset_of(l) && l.is_subset_of(u) && u.is_subset_of(v))
        || (l.is_subset_of(k) && k.is_subset_of(v) && v.is_subset_of(u));
    if !nested {
        return Err(Error::SideCondition(format!(
            "the restriction bounds ({k},{v}) and ({l},{u}) do not nest"
        )));
    }
    let inner = theta(l.clone(), u.clone(), p).expect("the lower set was checked");
    let lhs = theta(k.clone(), v.clone(), inner).expect("the lower set was checked");
    let rhs = theta(lower, upper, p).expect("the combined lower set was checked");
    crate::equiv::strong_bisim_with(lhs, rhs, limits)
}

fn choice_leaves(t: Term) -> Vec<Term> {
    match t.node() {
        TermNode::Choice(p, q) => {
            let mut v = choice_leaves(*p);
            v.extend(choice_leaves(*q));
            v
        }
        _ => vec![t],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equiv::{reactive_bisim_with, strong_bisim_with};
    use crate::sos::derive_transitions;
    use crate::syntax::parse_process;
    use crate::testgen;

    fn abc() -> ActionSet {
        ActionSet::from_names(&["a", "b", "c"])
    }

    fn p(text: &str) -> Term {
        parse_process(text, &abc()).unwrap()
    }

    // Random samples can denote infinite-state processes, so sampling
    // tests cap exploration low and skip samples that exceed a budget.
    fn small() -> Limits {
        Limits {
            max_states: 5_000,
            ..Limits::default()
        }
    }

    fn skippable(e: &Error) -> bool {
        matches!(
            e,
            Error::StateBudget { .. } | Error::UnfoldBudget { .. } | Error::EnvLimit { .. }
        )
    }

    fn bind(
        terms: &[(&str, Term)],
        sets: &[(&str, &[&str])],
        alphabet: Option<&[&str]>,
    ) -> LawBindings {
        LawBindings {
            terms: terms.iter().map(|&(n, t)| (n.to_string(), t)).collect(),
            sets: sets
                .iter()
                .map(|&(n, ms)| (n.to_string(), ActionSet::from_names(ms)))
                .collect(),
            alphabet: alphabet.map(ActionSet::from_names),
        }
    }

    #[test]
    fn head_normal_form_of_inaction_is_empty() {
        let (h, trace) = hnf(nil()).unwrap();
        assert!(h.summands.is_empty());
        assert!(trace.steps.is_empty());
        assert_eq!(h.term(), nil());
    }

    #[test]
    fn an_idle_restriction_dissolves() {
        let (h, trace) = hnf(p("theta{}{}(a.0 + b.0)")).unwrap();
        let want = vec![
            (Label::Act(crate::syntax::Action::new("a")), nil()),
            (Label::Act(crate::syntax::Action::new("b")), nil()),
        ];
        assert_eq!(h.summands, want);
        assert_eq!(h.term(), p("a.0 + b.0"));
        assert!(trace.steps.iter().any(|s| s.axiom == "theta-idle"));
        assert_eq!(trace.replay(p("theta{}{}(a.0 + b.0)")).unwrap(), h.term());
    }

    #[test]
    fn interleaving_expands_to_a_sum() {
        let (h, trace) = hnf(p("a.0 |[]| b.0")).unwrap();
        let want = vec![
            (Label::Act(crate::syntax::Action::new("a")), p("0 |[]| b.0")),
            (Label::Act(crate::syntax::Action::new("b")), p("a.0 |[]| 0")),
        ];
        assert_eq!(h.summands, want);
        assert!(trace.steps.iter().any(|s| s.axiom == "expansion"));
        assert_eq!(trace.replay(p("a.0 |[]| b.0")).unwrap(), h.term());
    }

    #[test]
    fn duplicate_summands_collapse() {
        let (h, trace) = hnf(p("a.0 + a.0")).unwrap();
        assert_eq!(h.term(), p("a.0"));
        assert!(trace.steps.iter().any(|s| s.axiom.starts_with("A3")));
        assert_eq!(trace.replay(p("a.0 + a.0")).unwrap(), p("a.0"));
    }

    #[test]
    fn summands_match_derived_transitions() {
        let mut rng = testgen::rng(41);
        let mut checked = 0;
        for _ in 0..300 {
            let t = testgen::closed_guarded_term(&mut rng, 3);
            let (h, trace) = match hnf_with(t, &small()) {
                Ok(r) => r,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("hnf failed on {t}: {e}"),
            };
            assert_eq!(
                h.summands,
                derive_transitions(t).unwrap(),
                "summands differ from the derived transitions of {t}"
            );
            assert_eq!(
                trace.replay(t).unwrap(),
                h.term(),
                "replaying the trace of {t} misses its normal form"
            );
            checked += 1;
        }
        assert!(checked >= 200, "only {checked} samples were checked");
    }

    #[test]
    fn every_rewrite_step_is_semantically_sound() {
        let mut rng = testgen::rng(31);
        let mut checked = 0;
        for _ in 0..200 {
            let t = testgen::closed_guarded_term(&mut rng, 2);
            let trace = match hnf_with(t, &small()) {
                Ok((_, trace)) => trace,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("hnf failed on {t}: {e}"),
            };
            for step in &trace.steps {
                match strong_bisim_with(step.before, step.after, &small()) {
                    Ok(v) => {
                        assert!(
                            v.equivalent,
                            "unsound step {step} while normalising {t}"
                        );
                        checked += 1;
                    }
                    Err(e) if skippable(&e) => continue,
                    Err(e) => panic!("comparing step {step} failed: {e}"),
                }
            }
        }
        assert!(checked >= 150, "only {checked} steps were checked");
    }

    #[test]
    fn normalisation_preserves_strong_bisimilarity() {
        let mut rng = testgen::rng(53);
        let mut checked = 0;
        for _ in 0..60 {
            let t = testgen::closed_guarded_term(&mut rng, 2);
            let h = match hnf_with(t, &small()) {
                Ok((h, _)) => h,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("hnf failed on {t}: {e}"),
            };
            match strong_bisim_with(t, h.term(), &small()) {
                Ok(v) => {
                    assert!(v.equivalent, "{t} differs from its normal form {}", h.term());
                    checked += 1;
                }
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("comparing {t} with its normal form failed: {e}"),
            }
        }
        assert!(checked >= 40, "only {checked} samples were checked");
    }

    #[test]
    fn unguarded_recursion_is_rejected() {
        let t = p("rec p { p = p + a.0 }");
        match hnf(t) {
            Err(Error::Unguarded(_)) => {}
            other => panic!("expected the unguarded error, got {other:?}"),
        }
    }

    #[test]
    fn a_live_environment_drops_the_timeouts() {
        let h = HeadNormalForm {
            summands: vec![(Label::Tau, nil()), (Label::Timeout, p("b.0"))],
        };
        let x = ActionSet::from_names(&["a"]);
        assert_eq!(psi_expand(&x, &h).summands, vec![(Label::Tau, nil())]);
    }

    #[test]
    fn an_idle_environment_tags_the_timeout_targets() {
        let h = HeadNormalForm {
            summands: vec![(Label::Timeout, p("a.0"))],
        };
        let x = ActionSet::empty();
        let want = vec![(Label::Timeout, theta_env(ActionSet::empty(), p("a.0")))];
        assert_eq!(psi_expand(&x, &h).summands, want);
    }

    #[test]
    fn a_visible_summand_passes_unchanged() {
        let h = HeadNormalForm {
            summands: vec![(Label::Act(crate::syntax::Action::new("a")), nil())],
        };
        let x = ActionSet::from_names(&["a"]);
        assert_eq!(psi_expand(&x, &h).summands, h.summands);
    }

    #[test]
    fn expansion_matches_the_derived_transitions_of_psi() {
        let mut rng = testgen::rng(59);
        let mut checked = 0;
        for _ in 0..200 {
            let t = testgen::closed_guarded_term(&mut rng, 3);
            let x = testgen::pick_action_set(&mut rng);
            let h = match hnf_with(t, &small()) {
                Ok((h, _)) => h,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("hnf failed on {t}: {e}"),
            };
            let derived = match derive_transitions(psi(x.clone(), t)) {
                Ok(d) => d,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("deriving psi transitions failed on {t}: {e}"),
            };
            assert_eq!(
                psi_expand(&x, &h).summands,
                derived,
                "expansion of {t} under {x} differs from the derived transitions"
            );
            checked += 1;
        }
        assert!(checked >= 150, "only {checked} samples were checked");
    }

    #[test]
    fn a_live_initial_hides_the_timeout_branch() {
        let (v, trace) = eq_recursion_free(p("tau.0 + t.b.0"), p("tau.0")).unwrap();
        assert!(v.equivalent);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].axiom, "RA");
    }

    #[test]
    fn distinct_actions_are_not_equated() {
        let (v, trace) = eq_recursion_free(p("a.0"), p("b.0")).unwrap();
        assert!(!v.equivalent);
        assert!(trace.steps.is_empty());
        match v.witness {
            Some(Witness::Note(_)) => {}
            other => panic!("expected a note witness, got {other:?}"),
        }
    }

    #[test]
    fn the_environment_partition_splits_into_three_classes() {
        let (left, right) = testgen::illustration();
        let (v, trace) = eq_recursion_free(left, right).unwrap();
        assert!(v.equivalent);
        assert_eq!(trace.steps.len(), 3);
        for step in &trace.steps {
            let v = reactive_bisim_with(step.before, step.after, &small()).unwrap();
            assert!(v.equivalent, "unsound class step {step}");
        }
        let classes = env_classes(left, right).unwrap();
        let set = |ns: &[&str]| ActionSet::from_names(ns);
        let want = vec![
            vec![set(&[])],
            vec![set(&["a"])],
            vec![set(&["b"]), set(&["a", "b"])],
        ];
        assert_eq!(classes, want);
    }

    #[test]
    fn recursion_is_rejected() {
        let t = p("rec x { x = a.x }");
        match eq_recursion_free(t, nil()) {
            Err(Error::RecursionPresent(_)) => {}
            other => panic!("expected the recursion error, got {other:?}"),
        }
    }

    #[test]
    fn the_decision_agrees_with_the_reactive_checker() {
        let mut rng = testgen::rng(97);
        let mut checked = 0;
        for i in 0..300 {
            let t1 = testgen::closed_guarded_term(&mut rng, 2);
            let t2 = if i % 4 == 0 {
                t1
            } else {
                testgen::closed_guarded_term(&mut rng, 2)
            };
            if !t1.is_recursion_free() || !t2.is_recursion_free() {
                continue;
            }
            let decided = match eq_recursion_free_with(t1, t2, &small()) {
                Ok((v, _)) => v.equivalent,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("deciding {t1} = {t2} failed: {e}"),
            };
            let checked_semantically = match reactive_bisim_with(t1, t2, &small()) {
                Ok(v) => v.equivalent,
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("comparing {t1} and {t2} failed: {e}"),
            };
            assert_eq!(
                decided, checked_semantically,
                "the verdicts for {t1} and {t2} disagree"
            );
            checked += 1;
        }
        assert!(checked >= 100, "only {checked} pairs were checked");
    }

    #[test]
    fn a_live_initial_absorbs_the_timeout() {
        let b = bind(&[("x", p("0")), ("y", p("a.0"))], &[], None);
        let v = check_law("l2".parse().unwrap(), &b).unwrap();
        assert!(v.equivalent);
    }

    #[test]
    fn the_timeout_target_runs_restricted() {
        let b = bind(
            &[("s", p("a.0 + b.0")), ("y", p("b.0"))],
            &[],
            Some(&["a", "b", "c"]),
        );
        let v = check_law(Law::L3, &b).unwrap();
        assert!(v.equivalent);
    }

    #[test]
    fn the_single_action_form_restricts_too() {
        let b = bind(
            &[("x", p("0")), ("y", p("b.0"))],
            &[("a", &["a"])],
            Some(&["a", "b", "c"]),
        );
        let v = check_law("l3'".parse().unwrap(), &b).unwrap();
        assert!(v.equivalent);
    }

    #[test]
    fn missing_bindings_are_usage_errors() {
        match check_law(Law::L2, &LawBindings::default()) {
            Err(Error::Usage(msg)) => assert!(msg.contains('x'), "unexpected message {msg}"),
            other => panic!("expected a usage error, got {other:?}"),
        }
        match "l4".parse::<Law>() {
            Err(Error::Usage(_)) => {}
            other => panic!("expected a usage error, got {other:?}"),
        }
    }

    #[test]
    fn law_three_needs_a_sum_of_visible_prefixes() {
        let b = bind(
            &[("s", p("tau.0")), ("y", p("0"))],
            &[],
            Some(&["a", "b", "c"]),
        );
        match check_law(Law::L3, &b) {
            Err(Error::SideCondition(_)) => {}
            other => panic!("expected a side condition error, got {other:?}"),
        }
    }

    #[test]
    fn collapsing_restrictions_needs_nested_bounds() {
        let set = |ns: &[&str]| ActionSet::from_names(ns);
        let x = p("a.0 + c.0");
        let (k, v, l, u) = (set(&["c"]), set(&["a", "c"]), set(&[]), set(&["c"]));
        match theta_collapse_check(&k, &v, &l, &u, x) {
            Err(Error::SideCondition(_)) => {}
            other => panic!("expected a side condition error, got {other:?}"),
        }
        let inner = theta(l, u, x).unwrap();
        let nested = theta(k.clone(), v.clone(), inner).unwrap();
        let collapsed = theta(set(&["c"]), set(&["c"]), x).unwrap();
        let direct = strong_bisim_with(nested, collapsed, &small()).unwrap();
        assert!(!direct.equivalent, "the collapse holds despite the bounds");
    }

    #[test]
    fn a_valid_collapse_instance_passes() {
        let set = |ns: &[&str]| ActionSet::from_names(ns);
        let b = bind(
            &[("x", p("a.0 + b.0"))],
            &[
                ("K", &["a"]),
                ("V", &["a"]),
                ("L", &["a"]),
                ("U", &["a", "b"]),
            ],
            None,
        );
        let v = check_law(Law::L1, &b).unwrap();
        assert!(v.equivalent);
        let v = theta_collapse_check(&set(&["a"]), &set(&["a"]), &set(&["a"]), &set(&["a", "b"]), p("a.0 + b.0")).unwrap();
        assert!(v.equivalent);
    }

    #[test]
    fn repeated_restriction_collapses() {
        let mut rng = testgen::rng(67);
        let mut checked = 0;
        for _ in 0..60 {
            let (lower, upper) = testgen::pick_bounds(&mut rng);
            let x = testgen::closed_guarded_term(&mut rng, 2);
            match theta_collapse_check_with(&lower, &upper, &lower, &upper, x, &small()) {
                Ok(v) => {
                    assert!(
                        v.equivalent,
                        "restricting {x} twice by ({lower},{upper}) changed it"
                    );
                    checked += 1;
                }
                Err(e) if skippable(&e) => continue,
                Err(e) => panic!("the collapse check failed on {x}: {e}"),
            }
        }
        assert!(checked >= 40, "only {checked} samples were checked");
    }
}
