//! Operational semantics: initial-action sets, single-step transition
//! derivation, and bounded exploration into a labelled transition system.
//!
//! Transitions are derived structurally. The rules for the priority
//! operator `theta` and the environment operator `psi` have negative
//! premises ("the argument cannot perform any action in ..."), which are
//! discharged by consulting [`initials`]. The initial-action set is
//! computed without reference to transitions, so the two never recurse
//! into each other and the system is well defined.
//!
//! Recursion is handled by unfolding. Every public entry point spends
//! from an unfold budget and fails with [`Error::UnfoldBudget`] instead
//! of looping when a recursion is unguarded.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::syntax::{theta_env, unfold_rec, Action, ActionSet, Label, RecSpec, Symbol, Term, TermNode};
use crate::{Error, Limits};

/// Default cap on the number of states [`explore`] will allocate.
pub const DEFAULT_MAX_STATES: usize = 100_000;

/// Default number of recursion unfoldings a single derivation query may
/// perform before it is declared divergent.
pub const DEFAULT_UNFOLD_BUDGET: u64 = 1000;

/// The set of actions a process can perform immediately, drawn from the
/// visible alphabet plus `tau`.
///
/// Time-out is deliberately not a member: whether `t` can fire depends on
/// the environment the process is placed in, so every rule that cares
/// about time-outs asks for transitions instead.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InitialSet {
    visible: BTreeSet<Action>,
    has_tau: bool,
}

impl InitialSet {
    /// The empty set.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty() && !self.has_tau
    }

    /// Whether the set contains `label`. Always false for the time-out.
    pub fn contains(&self, label: Label) -> bool {
        match label {
            Label::Act(a) => self.visible.contains(&a),
            Label::Tau => self.has_tau,
            Label::Timeout => false,
        }
    }

    pub fn has_tau(&self) -> bool {
        self.has_tau
    }

    /// The visible members, in alphabetical order.
    pub fn visible(&self) -> impl Iterator<Item = Action> + '_ {
        self.visible.iter().copied()
    }

    /// All members as labels, visible actions first, then `tau`.
    pub fn labels(&self) -> Vec<Label> {
        let mut out: Vec<Label> = self.visible.iter().map(|a| Label::Act(*a)).collect();
        if self.has_tau {
            out.push(Label::Tau);
        }
        out
    }

    /// True when a process with these initials is stuck in an environment
    /// that offers exactly the actions in `env`: it has no `tau` and none
    /// of its visible initials are offered.
    pub fn idles_under(&self, env: &ActionSet) -> bool {
        !self.has_tau && !self.visible.iter().any(|a| env.contains(*a))
    }

    fn insert(&mut self, label: Label) {
        match label {
            Label::Act(a) => {
                self.visible.insert(a);
            }
            Label::Tau => self.has_tau = true,
            Label::Timeout => {}
        }
    }

    fn union_with(&mut self, other: &InitialSet) {
        self.visible.extend(other.visible.iter().copied());
        self.has_tau |= other.has_tau;
    }
}

impl fmt::Display for InitialSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.labels().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<Label> for InitialSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut s = Self::default();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

/// One pass of the dependency-driven evaluator: a term is entered once to
/// queue whatever it depends on, then exited once everything below it is
/// memoized.
enum Frame {
    Enter(Term),
    Exit(Term),
}

/// Shared state for a family of derivation queries: memo tables keyed by
/// term identity plus the remaining unfold budget.
///
/// The budget bounds the unfoldings performed by a single query; callers
/// that issue many queries (such as [`explore`]) reset it between states
/// while keeping the memo tables, so the cost of a guarded recursion is
/// paid once however often its states are visited.
///
/// Both queries run on an explicit work stack. An unguarded recursion
/// makes the unfold chain revisit terms forever, so it burns through the
/// budget instead of through call frames.
pub(crate) struct DeriveCtx {
    budget_per_query: u64,
    budget: u64,
    init_memo: HashMap<Term, Rc<InitialSet>>,
    step_memo: HashMap<Term, Rc<Vec<(Label, Term)>>>,
    unfold_memo: HashMap<Term, Term>,
}

impl DeriveCtx {
    pub fn new(unfold_budget: u64) -> Self {
        DeriveCtx {
            budget_per_query: unfold_budget,
            budget: unfold_budget,
            init_memo: HashMap::new(),
            step_memo: HashMap::new(),
            unfold_memo: HashMap::new(),
        }
    }

    pub fn reset_budget(&mut self) {
        self.budget = self.budget_per_query;
    }

    fn spend(&mut self) -> Result<(), Error> {
        if self.budget == 0 {
            return Err(Error::UnfoldBudget {
                budget: self.budget_per_query,
            });
        }
        self.budget -= 1;
        Ok(())
    }

    /// Unfolds a recursion, caching the substitution. Budget accounting
    /// stays with the callers: every entry of a not-yet-memoized recursion
    /// spends, so an unguarded unfold cycle runs out instead of spinning.
    fn unfold(&mut self, t: Term, dist: Symbol, spec: &RecSpec) -> Term {
        if let Some(&u) = self.unfold_memo.get(&t) {
            return u;
        }
        let u = unfold_rec(dist, spec);
        self.unfold_memo.insert(t, u);
        u
    }

    /// The initial-action set of `t`, per operator:
    ///
    /// * prefixes contribute their label unless it is the time-out;
    /// * choice takes the union of both sides;
    /// * parallel composition keeps actions either side can do outside
    ///   the synchronisation set and actions both sides can do inside it;
    /// * hiding turns hidden initials into `tau` and passes the rest;
    /// * renaming maps visible initials through the relation (dropping
    ///   those with no image) and passes `tau`;
    /// * `theta{L}{U}` passes the argument's set unchanged when it is
    ///   disjoint from `L` plus `tau`, and otherwise restricts it to `U`
    ///   plus `tau`;
    /// * `psi` passes the argument's set unchanged;
    /// * recursion unfolds.
    pub fn initials(&mut self, t: Term) -> Result<Rc<InitialSet>, Error> {
        if let Some(s) = self.init_memo.get(&t) {
            return Ok(Rc::clone(s));
        }
        let mut stack = vec![Frame::Enter(t)];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(u) => {
                    if self.init_memo.contains_key(&u) {
                        continue;
                    }
                    stack.push(Frame::Exit(u));
                    match u.node() {
                        TermNode::Choice(p, q) | TermNode::Par(_, p, q) => {
                            stack.push(Frame::Enter(*p));
                            stack.push(Frame::Enter(*q));
                        }
                        TermNode::Hide(_, p)
                        | TermNode::Rename(_, p)
                        | TermNode::Theta(_, _, p)
                        | TermNode::Psi(_, p) => stack.push(Frame::Enter(*p)),
                        TermNode::Rec(dist, spec) => {
                            self.spend()?;
                            let unfolded = self.unfold(u, *dist, spec);
                            stack.push(Frame::Enter(unfolded));
                        }
                        _ => {}
                    }
                }
                Frame::Exit(u) => {
                    let set = self.combine_initials(u);
                    self.init_memo.insert(u, Rc::new(set));
                }
            }
        }
        Ok(Rc::clone(self.init_memo.get(&t).expect("computed by the loop")))
    }

    /// The per-operator equations, read off already-memoized children.
    fn combine_initials(&self, u: Term) -> InitialSet {
        let of = |x: Term| -> &InitialSet {
            self.init_memo.get(&x).expect("dependency computed first")
        };
        match u.node() {
            TermNode::Nil | TermNode::Var(_) => InitialSet::empty(),
            TermNode::Prefix(label, _) => {
                let mut s = InitialSet::empty();
                s.insert(*label);
                s
            }
            TermNode::Choice(p, q) => {
                let mut s = of(*p).clone();
                s.union_with(of(*q));
                s
            }
            TermNode::Par(sync, p, q) => {
                let ip = of(*p);
                let iq = of(*q);
                let mut s = InitialSet::empty();
                s.has_tau = ip.has_tau || iq.has_tau;
                for a in ip.visible() {
                    if !sync.contains(a) || iq.visible.contains(&a) {
                        s.visible.insert(a);
                    }
                }
                for a in iq.visible() {
                    if !sync.contains(a) {
                        s.visible.insert(a);
                    }
                }
                s
            }
            TermNode::Hide(hidden, p) => {
                let ip = of(*p);
                let mut s = InitialSet::empty();
                s.has_tau = ip.has_tau;
                for a in ip.visible() {
                    if hidden.contains(a) {
                        s.has_tau = true;
                    } else {
                        s.visible.insert(a);
                    }
                }
                s
            }
            TermNode::Rename(rel, p) => {
                let ip = of(*p);
                let mut s = InitialSet::empty();
                s.has_tau = ip.has_tau;
                for a in ip.visible() {
                    s.visible.extend(rel.images_of(a));
                }
                s
            }
            TermNode::Theta(lower, upper, p) => {
                let ip = of(*p);
                if ip.idles_under(lower) {
                    ip.clone()
                } else {
                    let mut s = InitialSet::empty();
                    s.has_tau = ip.has_tau;
                    s.visible = ip.visible().filter(|a| upper.contains(*a)).collect();
                    s
                }
            }
            TermNode::Psi(_, p) => of(*p).clone(),
            TermNode::Rec(..) => {
                let unfolded = self.unfold_memo[&u];
                of(unfolded).clone()
            }
        }
    }

    /// All single-step transitions of `t`, deduplicated by label and
    /// target while preserving derivation order.
    pub fn transitions(&mut self, t: Term) -> Result<Rc<Vec<(Label, Term)>>, Error> {
        if let Some(s) = self.step_memo.get(&t) {
            return Ok(Rc::clone(s));
        }
        let mut stack = vec![Frame::Enter(t)];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(u) => {
                    if self.step_memo.contains_key(&u) {
                        continue;
                    }
                    stack.push(Frame::Exit(u));
                    match u.node() {
                        TermNode::Choice(p, q) | TermNode::Par(_, p, q) => {
                            stack.push(Frame::Enter(*p));
                            stack.push(Frame::Enter(*q));
                        }
                        TermNode::Hide(_, p)
                        | TermNode::Rename(_, p)
                        | TermNode::Theta(_, _, p)
                        | TermNode::Psi(_, p) => stack.push(Frame::Enter(*p)),
                        TermNode::Rec(dist, spec) => {
                            self.spend()?;
                            let unfolded = self.unfold(u, *dist, spec);
                            stack.push(Frame::Enter(unfolded));
                        }
                        _ => {}
                    }
                }
                Frame::Exit(u) => {
                    let steps = self.combine_transitions(u)?;
                    self.step_memo.insert(u, Rc::new(steps));
                }
            }
        }
        Ok(Rc::clone(self.step_memo.get(&t).expect("computed by the loop")))
    }

    /// The per-operator rules, read off already-memoized children. The
    /// negative premises of `theta` and `psi` go through [`Self::initials`].
    fn combine_transitions(&mut self, u: Term) -> Result<Vec<(Label, Term)>, Error> {
        fn of(me: &DeriveCtx, x: Term) -> Rc<Vec<(Label, Term)>> {
            Rc::clone(me.step_memo.get(&x).expect("dependency computed first"))
        }
        let mut out: Vec<(Label, Term)> = Vec::new();
        match u.node() {
            TermNode::Nil | TermNode::Var(_) => {}
            TermNode::Prefix(label, p) => out.push((*label, *p)),
            TermNode::Choice(p, q) => {
                out.extend(of(self, *p).iter().copied());
                out.extend(of(self, *q).iter().copied());
            }
            TermNode::Par(sync, p, q) => {
                let sp = of(self, *p);
                let sq = of(self, *q);
                for &(l, p2) in sp.iter() {
                    if !sync.contains_label(l) {
                        out.push((l, crate::syntax::par(sync.clone(), p2, *q)));
                    }
                }
                for &(l, q2) in sq.iter() {
                    if !sync.contains_label(l) {
                        out.push((l, crate::syntax::par(sync.clone(), *p, q2)));
                    }
                }
                for &(l, p2) in sp.iter() {
                    if sync.contains_label(l) {
                        for &(m, q2) in sq.iter() {
                            if m == l {
                                out.push((l, crate::syntax::par(sync.clone(), p2, q2)));
                            }
                        }
                    }
                }
            }
            TermNode::Hide(hidden, p) => {
                for &(l, p2) in of(self, *p).iter() {
                    let l = if hidden.contains_label(l) { Label::Tau } else { l };
                    out.push((l, crate::syntax::hide(hidden.clone(), p2)));
                }
            }
            TermNode::Rename(rel, p) => {
                for &(l, p2) in of(self, *p).iter() {
                    let target = crate::syntax::rename(rel.clone(), p2);
                    match l {
                        Label::Tau | Label::Timeout => out.push((l, target)),
                        Label::Act(a) => {
                            for b in rel.images_of(a) {
                                out.push((Label::Act(b), target));
                            }
                        }
                    }
                }
            }
            TermNode::Theta(lower, upper, p) => {
                let idle = self.initials(*p)?.idles_under(lower);
                for &(l, p2) in of(self, *p).iter() {
                    match l {
                        Label::Tau => {
                            let wrapped = crate::syntax::theta(lower.clone(), upper.clone(), p2)
                                .expect("bounds already validated");
                            out.push((Label::Tau, wrapped));
                        }
                        Label::Act(a) => {
                            if upper.contains(a) || idle {
                                out.push((l, p2));
                            }
                        }
                        Label::Timeout => {
                            if idle {
                                out.push((l, p2));
                            }
                        }
                    }
                }
            }
            TermNode::Psi(env, p) => {
                let idle = self.initials(*p)?.idles_under(env);
                for &(l, p2) in of(self, *p).iter() {
                    match l {
                        Label::Act(_) | Label::Tau => out.push((l, p2)),
                        Label::Timeout => {
                            if idle {
                                out.push((Label::Timeout, theta_env(env.clone(), p2)));
                            }
                        }
                    }
                }
            }
            TermNode::Rec(..) => {
                let unfolded = self.unfold_memo[&u];
                out.extend(of(self, unfolded).iter().copied());
            }
        }
        let mut seen: HashSet<(Label, Term)> = HashSet::new();
        out.retain(|step| seen.insert(*step));
        Ok(out)
    }
}

pub(crate) fn ensure_process(t: Term) -> Result<(), Error> {
    if !t.is_closed() {
        let names: Vec<&str> = t.free_variables().iter().map(|s| s.as_str()).collect();
        return Err(Error::OpenTerm(names.join(", ")));
    }
    if let Some(witness) = crate::syntax::invalid_witness(t) {
        return Err(Error::InvalidTerm(witness));
    }
    Ok(())
}

/// The initial-action set of a closed, valid term.
pub fn initials(t: Term) -> Result<InitialSet, Error> {
    initials_with(t, DEFAULT_UNFOLD_BUDGET)
}

/// [`initials`] with an explicit unfold budget.
pub fn initials_with(t: Term, unfold_budget: u64) -> Result<InitialSet, Error> {
    ensure_process(t)?;
    Ok((*DeriveCtx::new(unfold_budget).initials(t)?).clone())
}

/// All single-step transitions of a closed, valid term, as label and
/// target pairs in derivation order with duplicates removed.
pub fn derive_transitions(t: Term) -> Result<Vec<(Label, Term)>, Error> {
    derive_transitions_with(t, DEFAULT_UNFOLD_BUDGET)
}

/// [`derive_transitions`] with an explicit unfold budget.
pub fn derive_transitions_with(t: Term, unfold_budget: u64) -> Result<Vec<(Label, Term)>, Error> {
    ensure_process(t)?;
    Ok((*DeriveCtx::new(unfold_budget).transitions(t)?).clone())
}

/// One edge of an explored transition system, by state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub source: usize,
    pub label: Label,
    pub target: usize,
}

/// A labelled transition system explored from one or more root terms.
///
/// States are terms, numbered in breadth-first discovery order starting
/// from the roots. Transitions are grouped by source state, each group in
/// derivation order. When the state cap was hit, `complete` is false and
/// transitions into states beyond the cap are missing; every transition
/// that is present is genuinely derivable.
#[derive(Clone, Debug)]
pub struct Lts {
    pub states: Vec<Term>,
    pub transitions: Vec<Transition>,
    pub roots: Vec<usize>,
    pub complete: bool,
    index: HashMap<Term, usize>,
    offsets: Vec<usize>,
}

impl Lts {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// The index of `t` among the explored states, if it was reached.
    pub fn index_of(&self, t: Term) -> Option<usize> {
        self.index.get(&t).copied()
    }

    /// The outgoing transitions of state `s`.
    pub fn successors(&self, s: usize) -> &[Transition] {
        &self.transitions[self.offsets[s]..self.offsets[s + 1]]
    }

    /// Plain-text rendering: a state count, one line per state with its
    /// term, then one line per transition.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("#states {}\n", self.states.len()));
        if !self.complete {
            out.push_str("#incomplete\n");
        }
        for (i, t) in self.states.iter().enumerate() {
            out.push_str(&format!("s{i}: {t}\n"));
        }
        for tr in &self.transitions {
            out.push_str(&format!("s{} -{}-> s{}\n", tr.source, tr.label, tr.target));
        }
        out
    }

    /// Graphviz rendering with the term of each state in its tooltip.
    pub fn render_dot(&self) -> String {
        let mut out = String::new();
        out.push_str("digraph lts {\n  rankdir=LR;\n  node [shape=circle];\n");
        for (i, t) in self.states.iter().enumerate() {
            let shape = if self.roots.contains(&i) {
                " shape=doublecircle"
            } else {
                ""
            };
            out.push_str(&format!("  s{i} [label=\"s{i}\" tooltip=\"{t}\"{shape}];\n"));
        }
        for tr in &self.transitions {
            out.push_str(&format!(
                "  s{} -> s{} [label=\"{}\"];\n",
                tr.source, tr.label, tr.target
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first exploration of every state reachable from `roots`,
/// capped at `max_states` states.
pub fn explore(roots: &[Term], max_states: usize) -> Result<Lts, Error> {
    explore_with(
        roots,
        &Limits {
            max_states,
            ..Limits::default()
        },
    )
}

/// [`explore`] with explicit limits.
pub fn explore_with(roots: &[Term], limits: &Limits) -> Result<Lts, Error> {
    let mut ctx = DeriveCtx::new(limits.unfold_budget);
    let mut states: Vec<Term> = Vec::new();
    let mut index: HashMap<Term, usize> = HashMap::new();
    let mut root_indices = Vec::with_capacity(roots.len());
    for &r in roots {
        ensure_process(r)?;
        let i = *index.entry(r).or_insert_with(|| {
            states.push(r);
            states.len() - 1
        });
        root_indices.push(i);
    }
    let mut transitions = Vec::new();
    let mut offsets = vec![0usize];
    let mut complete = true;
    let mut next = 0;
    while next < states.len() {
        ctx.reset_budget();
        let steps = ctx.transitions(states[next])?;
        for &(label, target) in steps.iter() {
            let j = match index.get(&target) {
                Some(&j) => j,
                None if states.len() < limits.max_states => {
                    states.push(target);
                    index.insert(target, states.len() - 1);
                    states.len() - 1
                }
                None => {
                    complete = false;
                    continue;
                }
            };
            transitions.push(Transition {
                source: next,
                label,
                target: j,
            });
        }
        offsets.push(transitions.len());
        next += 1;
    }
    Ok(Lts {
        states,
        transitions,
        roots: root_indices,
        complete,
        index,
        offsets,
    })
}

/// The visible actions that actually label a transition somewhere in
/// `lts`. Equivalence checks and environment enumeration only need to
/// consider subsets of this set.
pub fn relevant_alphabet(lts: &Lts) -> ActionSet {
    lts.transitions
        .iter()
        .filter_map(|tr| match tr.label {
            Label::Act(a) => Some(a),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{
        choice, hide, nil, par, parse_process, prefix, psi, rec, rename, var, Symbol,
    };

    fn abc() -> ActionSet {
        ActionSet::from_names(&["a", "b", "c"])
    }

    fn proc(src: &str) -> Term {
        parse_process(src, &abc()).unwrap()
    }

    fn labels(t: Term) -> Vec<String> {
        derive_transitions(t)
            .unwrap()
            .iter()
            .map(|(l, _)| l.to_string())
            .collect()
    }

    #[test]
    fn initials_skip_timeouts_and_see_through_priority() {
        assert_eq!(initials(proc("a.0 + t.b.0")).unwrap().to_string(), "{a}");
        assert_eq!(
            initials(proc("theta{}{}(a.0 + tau.0)")).unwrap().to_string(),
            "{tau}"
        );
        assert_eq!(
            initials(proc("rec x { x = tau.x }")).unwrap().to_string(),
            "{tau}"
        );
        assert_eq!(initials(proc("t.a.0")).unwrap(), InitialSet::empty());
    }

    #[test]
    fn initials_of_parallel_composition_respect_synchronisation() {
        let s = initials(proc("(a.0 + b.0) |[a,c]| (a.0 + c.0)")).unwrap();
        assert_eq!(s.to_string(), "{a,b}");
        let s = initials(proc("tau.0 |[a]| a.0")).unwrap();
        assert_eq!(s.to_string(), "{tau}");
    }

    #[test]
    fn initials_of_hiding_and_renaming() {
        assert_eq!(
            initials(proc("hide {a} in (a.0 + b.0)")).unwrap().to_string(),
            "{b,tau}"
        );
        assert_eq!(
            initials(proc("rename{(a,b),(a,c)} a.0")).unwrap().to_string(),
            "{b,c}"
        );
        assert_eq!(
            initials(proc("rename{(a,b)} (c.0 + tau.0)")).unwrap().to_string(),
            "{tau}"
        );
    }

    #[test]
    fn priority_window_passes_untouched_when_argument_ignores_the_lower_set() {
        let s = initials(proc("theta{a}{a,b}(c.0)")).unwrap();
        assert_eq!(s.to_string(), "{c}");
        let s = initials(proc("theta{a}{a,b}(a.0 + c.0)")).unwrap();
        assert_eq!(s.to_string(), "{a}");
    }

    #[test]
    fn timeout_under_environment_operator_installs_a_priority_window() {
        let steps = derive_transitions(proc("psi{a}(t.b.0)")).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].0, Label::Timeout);
        assert_eq!(steps[0].1, proc("theta{a}{a}(b.0)"));
    }

    #[test]
    fn environment_operator_blocks_timeout_when_argument_can_act() {
        assert!(labels(proc("psi{a}(a.0 + t.b.0)")) == ["a"]);
        assert!(labels(proc("psi{}(tau.0 + t.b.0)")) == ["tau"]);
        assert_eq!(labels(proc("psi{}(a.0 + t.b.0)")), ["a", "t"]);
    }

    #[test]
    fn idle_priority_window_lets_everything_through() {
        let steps = derive_transitions(proc("theta{a}{a}(b.0)")).unwrap();
        assert_eq!(steps, vec![(Label::act("b"), nil())]);
        let steps = derive_transitions(proc("theta{a}{a}(t.b.0 + b.0)")).unwrap();
        assert_eq!(
            steps,
            vec![(Label::Timeout, proc("b.0")), (Label::act("b"), nil())]
        );
    }

    #[test]
    fn busy_priority_window_restricts_to_the_upper_set_and_keeps_its_wrapper_on_tau() {
        let steps = derive_transitions(proc("theta{a}{a,b}(a.0 + c.0 + tau.b.0)")).unwrap();
        assert_eq!(
            steps,
            vec![
                (Label::act("a"), nil()),
                (Label::Tau, proc("theta{a}{a,b}(b.0)")),
            ]
        );
    }

    #[test]
    fn renaming_can_fork_and_can_block() {
        let steps = derive_transitions(proc("rename{(a,b),(a,c)} a.0")).unwrap();
        assert_eq!(
            steps,
            vec![
                (Label::act("b"), proc("rename{(a,b),(a,c)} 0")),
                (Label::act("c"), proc("rename{(a,b),(a,c)} 0")),
            ]
        );
        assert!(derive_transitions(proc("rename{(a,b)} c.0")).unwrap().is_empty());
    }

    #[test]
    fn synchronised_actions_step_both_sides_together() {
        let steps = derive_transitions(proc("a.0 |[a]| a.0")).unwrap();
        assert_eq!(steps, vec![(Label::act("a"), proc("0 |[a]| 0"))]);
        let steps = derive_transitions(proc("t.a.0 |[a]| b.0")).unwrap();
        assert_eq!(
            steps,
            vec![
                (Label::Timeout, proc("a.0 |[a]| b.0")),
                (Label::act("b"), proc("t.a.0 |[a]| 0")),
            ]
        );
    }

    #[test]
    fn hiding_makes_transitions_silent() {
        let steps = derive_transitions(proc("hide {a} in (a.b.0 + t.0)")).unwrap();
        assert_eq!(
            steps,
            vec![
                (Label::Tau, proc("hide {a} in b.0")),
                (Label::Timeout, proc("hide {a} in 0")),
            ]
        );
    }

    #[test]
    fn duplicate_derivations_collapse() {
        let t = proc("a.0 + a.0");
        assert_eq!(derive_transitions(t).unwrap(), vec![(Label::act("a"), nil())]);
    }

    #[test]
    fn exploration_collects_reachable_states_in_discovery_order() {
        let lts = explore(&[proc("a.0")], 100).unwrap();
        assert_eq!(lts.states, vec![proc("a.0"), nil()]);
        assert!(lts.complete);
        assert_eq!(lts.roots, vec![0]);
        assert_eq!(
            lts.render_text(),
            "#states 2\ns0: a.0\ns1: 0\ns0 -a-> s1\n"
        );
    }

    #[test]
    fn exploration_of_a_self_loop_terminates() {
        let lts = explore(&[proc("rec x { x = a.x }")], 100).unwrap();
        assert_eq!(lts.state_count(), 1);
        assert_eq!(lts.successors(0), &[Transition { source: 0, label: Label::act("a"), target: 0 }]);
    }

    #[test]
    fn exploration_stops_at_the_state_cap_and_says_so() {
        let lts = explore(&[proc("rec x { x = a.(x |[]| x) }")], 10).unwrap();
        assert_eq!(lts.state_count(), 10);
        assert!(!lts.complete);
        for tr in &lts.transitions {
            assert!(tr.target < 10);
        }
    }

    #[test]
    fn unguarded_recursion_exhausts_the_unfold_budget() {
        let t = rec(
            Symbol::new("x"),
            vec![(
                Symbol::new("x"),
                choice(var(Symbol::new("x")), prefix(Label::act("a"), nil())),
            )],
        )
        .unwrap();
        match initials(t) {
            Err(Error::UnfoldBudget { budget }) => assert_eq!(budget, DEFAULT_UNFOLD_BUDGET),
            other => panic!("expected an unfold budget error, got {other:?}"),
        }
    }

    #[test]
    fn open_terms_are_rejected() {
        let t = prefix(Label::act("a"), var(Symbol::new("y")));
        assert!(matches!(initials(t), Err(Error::OpenTerm(_))));
        assert!(matches!(derive_transitions(t), Err(Error::OpenTerm(_))));
    }

    #[test]
    fn relevant_alphabet_reads_transition_labels_not_syntax() {
        let lts = explore(&[proc("a.0 + t.b.0")], 100).unwrap();
        assert_eq!(relevant_alphabet(&lts).to_string(), "{a,b}");
        let lts = explore(&[proc("tau.0")], 100).unwrap();
        assert!(relevant_alphabet(&lts).is_empty());
        let lts = explore(&[proc("rename{(a,b)} c.0 + tau.a.0")], 100).unwrap();
        assert_eq!(relevant_alphabet(&lts).to_string(), "{a}");
    }

    #[test]
    fn derived_initials_match_the_visible_transition_labels() {
        let mut rng = crate::testgen::rng(0xC0FFEE);
        for _ in 0..200 {
            let t = crate::testgen::closed_guarded_term(&mut rng, 4);
            let init = initials(t).unwrap();
            let from_steps: InitialSet = derive_transitions(t)
                .unwrap()
                .into_iter()
                .map(|(l, _)| l)
                .collect();
            assert_eq!(init, from_steps, "initials disagree for {t}");
        }
    }

    #[test]
    fn timeout_targets_of_an_environment_operator_carry_its_window() {
        let mut rng = crate::testgen::rng(0xFEED);
        for _ in 0..200 {
            let t = crate::testgen::closed_guarded_term(&mut rng, 4);
            let env = ActionSet::from_names(&["a", "b"]);
            for (l, target) in derive_transitions(psi(env.clone(), t)).unwrap() {
                if l == Label::Timeout {
                    assert!(matches!(target.node(), TermNode::Theta(lo, up, _) if *lo == env && *up == env));
                }
            }
        }
    }

    #[test]
    fn an_ignorable_priority_window_is_transparent_to_derivation() {
        let mut rng = crate::testgen::rng(0x1D1E);
        let mut checked = 0;
        for _ in 0..300 {
            let q = crate::testgen::closed_guarded_term(&mut rng, 3);
            let window = crate::testgen::pick_action_set(&mut rng);
            if !initials(q).unwrap().idles_under(&window) {
                continue;
            }
            checked += 1;
            let wrapped = crate::syntax::theta(window.clone(), window, q).unwrap();
            assert_eq!(
                derive_transitions(wrapped).unwrap(),
                derive_transitions(q).unwrap(),
                "window on {q} is not transparent"
            );
        }
        assert!(checked >= 20, "only {checked} idle samples");
    }

    #[test]
    fn priority_wrapper_survives_exactly_the_silent_steps() {
        let mut rng = crate::testgen::rng(0x7AE7);
        for _ in 0..300 {
            let p = crate::testgen::closed_guarded_term(&mut rng, 3);
            let (lower, upper) = crate::testgen::pick_bounds(&mut rng);
            let wrapped = crate::syntax::theta(lower.clone(), upper.clone(), p).unwrap();
            let base = derive_transitions(p).unwrap();
            for (l, target) in derive_transitions(wrapped).unwrap() {
                match l {
                    Label::Tau => assert!(matches!(
                        target.node(),
                        TermNode::Theta(lo, up, body)
                            if *lo == lower && *up == upper && base.contains(&(Label::Tau, *body))
                    )),
                    _ => assert!(base.contains(&(l, target))),
                }
            }
        }
    }

    #[test]
    fn initial_actions_of_a_guarded_context_ignore_what_fills_the_holes() {
        use std::collections::BTreeMap;
        let mut rng = crate::testgen::rng(0x10AF);
        for _ in 0..200 {
            let context = crate::testgen::guarded_context(&mut rng, 3);
            let fill = |rng: &mut _| -> BTreeMap<Symbol, Term> {
                [Symbol::new("p"), Symbol::new("q")]
                    .into_iter()
                    .map(|v| (v, crate::testgen::closed_guarded_term(rng, 2)))
                    .collect()
            };
            let left = crate::syntax::substitute(context, &fill(&mut rng));
            let right = crate::syntax::substitute(context, &fill(&mut rng));
            assert_eq!(
                initials(left).unwrap(),
                initials(right).unwrap(),
                "initials of {context} depend on its holes"
            );
        }
    }

    #[test]
    fn exploration_terminates_on_generated_terms() {
        let mut rng = crate::testgen::rng(0xE48);
        for _ in 0..60 {
            let t = crate::testgen::closed_guarded_term(&mut rng, 4);
            let lts = explore(&[t], 300).unwrap();
            assert!(!lts.states.is_empty());
        }
    }

    #[test]
    fn parallel_components_do_not_share_unsynced_steps() {
        let t = par(
            ActionSet::empty(),
            prefix(Label::act("a"), nil()),
            prefix(Label::act("b"), nil()),
        );
        assert_eq!(labels(t), ["a", "b"]);
        let t = hide(abc(), t);
        assert_eq!(labels(t), ["tau", "tau"]);
        let t = rename(
            vec![(Action::new("a"), Action::new("c"))].into_iter().collect(),
            proc("a.0 |[]| b.0"),
        );
        assert_eq!(labels(t), ["c"]);
    }
}
