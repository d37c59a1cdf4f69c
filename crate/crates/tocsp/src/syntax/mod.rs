//! Abstract and concrete syntax of CCSP with time-outs.
//!
//! Process terms are built from inaction, action prefixing (over visible
//! actions, the hidden action `tau` and the time-out `t`), binary choice,
//! alphabetized parallel composition, hiding, renaming, the environment
//! operators `theta` and `psi`, and systems of recursive equations.
//!
//! Terms are immutable and hash-consed: equal structure means equal
//! [`Term`] value, so terms can be used directly as map keys and as LTS
//! state identities. To make hash-consing insensitive to the choice of
//! bound variable names, the [`rec`] constructor renames bound variables
//! to canonical names before interning; the printer maps them back to
//! readable names, so round-tripping through the concrete syntax
//! reproduces the identical term.

mod parse;
mod print;

pub use parse::{parse_file, parse_process, SourceFile};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Mutex, OnceLock};

use crate::Error;

/// An interned identifier. Copies are cheap; comparison is by content.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(&'static str);

impl Symbol {
    pub fn new(name: &str) -> Symbol {
        static TABLE: OnceLock<Mutex<BTreeSet<&'static str>>> = OnceLock::new();
        let mut table = TABLE
            .get_or_init(|| Mutex::new(BTreeSet::new()))
            .lock()
            .unwrap();
        match table.get(name) {
            Some(interned) => Symbol(interned),
            None => {
                let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
                table.insert(leaked);
                Symbol(leaked)
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        self.0
    }

    /// Splits a canonical bound-variable name of the form `%F_I` into its
    /// binder family `F` and index `I`.
    fn canonical_parts(self) -> Option<(u32, u32)> {
        let rest = self.0.strip_prefix('%')?;
        let (fam, idx) = rest.split_once('_')?;
        Some((fam.parse().ok()?, idx.parse().ok()?))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// Compares variable names, ordering canonical `%F_I` names numerically so
/// that renaming a specification does not reshuffle its unreachable
/// equations.
fn cmp_var_names(a: &Symbol, b: &Symbol) -> std::cmp::Ordering {
    match (a.canonical_parts(), b.canonical_parts()) {
        (Some(pa), Some(pb)) => pa.cmp(&pb),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

/// A visible action from the declared alphabet.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(Symbol);

impl Action {
    pub fn new(name: &str) -> Action {
        Action(Symbol::new(name))
    }

    pub fn name(self) -> &'static str {
        self.0.as_str()
    }

    pub fn symbol(self) -> Symbol {
        self.0
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A transition label: a visible action, the hidden action `tau`, or the
/// time-out `t`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Act(Action),
    Tau,
    Timeout,
}

impl Label {
    pub fn act(name: &str) -> Label {
        Label::Act(Action::new(name))
    }

    pub fn is_visible(self) -> bool {
        matches!(self, Label::Act(_))
    }

    pub fn visible(self) -> Option<Action> {
        match self {
            Label::Act(a) => Some(a),
            _ => None,
        }
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Label) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Label) -> std::cmp::Ordering {
        fn rank(l: &Label) -> u8 {
            match l {
                Label::Act(_) => 0,
                Label::Tau => 1,
                Label::Timeout => 2,
            }
        }
        match (self, other) {
            (Label::Act(a), Label::Act(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Act(a) => write!(f, "{a}"),
            Label::Tau => f.write_str("tau"),
            Label::Timeout => f.write_str("t"),
        }
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An immutable, ordered, duplicate-free set of visible actions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionSet(std::sync::Arc<[Action]>);

impl ActionSet {
    pub fn empty() -> ActionSet {
        ActionSet(std::sync::Arc::from(Vec::new()))
    }

    pub fn singleton(a: Action) -> ActionSet {
        ActionSet(std::sync::Arc::from(vec![a]))
    }

    pub fn from_names(names: &[&str]) -> ActionSet {
        names.iter().map(|n| Action::new(n)).collect()
    }

    pub fn contains(&self, a: Action) -> bool {
        self.0.binary_search(&a).is_ok()
    }

    /// True for visible labels in the set; false for `tau` and `t`.
    pub fn contains_label(&self, l: Label) -> bool {
        l.visible().is_some_and(|a| self.contains(a))
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &ActionSet) -> ActionSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn intersection(&self, other: &ActionSet) -> ActionSet {
        self.iter().filter(|a| other.contains(*a)).collect()
    }

    pub fn difference(&self, other: &ActionSet) -> ActionSet {
        self.iter().filter(|a| !other.contains(*a)).collect()
    }

    pub fn is_subset_of(&self, other: &ActionSet) -> bool {
        self.iter().all(|a| other.contains(a))
    }

    pub fn insert(&self, a: Action) -> ActionSet {
        self.iter().chain(std::iter::once(a)).collect()
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> ActionSet {
        let mut v: Vec<Action> = iter.into_iter().collect();
        v.sort();
        v.dedup();
        ActionSet(std::sync::Arc::from(v))
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A finite renaming relation over visible actions, stored as an ordered,
/// duplicate-free list of pairs. A visible action `a` is relabelled to
/// every `b` with `(a, b)` in the relation; actions outside the domain are
/// blocked, while `tau` and `t` always pass through unchanged.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RenameRel(std::sync::Arc<[(Action, Action)]>);

impl RenameRel {
    pub fn pairs(&self) -> impl Iterator<Item = (Action, Action)> + '_ {
        self.0.iter().copied()
    }

    pub fn images_of(&self, a: Action) -> impl Iterator<Item = Action> + '_ {
        self.pairs().filter(move |(x, _)| *x == a).map(|(_, y)| y)
    }

    /// All actions some member of `targets` can be reached from.
    pub fn inverse_image(&self, targets: &ActionSet) -> ActionSet {
        self.pairs()
            .filter(|(_, b)| targets.contains(*b))
            .map(|(a, _)| a)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Action, Action)> for RenameRel {
    fn from_iter<I: IntoIterator<Item = (Action, Action)>>(iter: I) -> RenameRel {
        let mut v: Vec<(Action, Action)> = iter.into_iter().collect();
        v.sort();
        v.dedup();
        RenameRel(std::sync::Arc::from(v))
    }
}

impl fmt::Debug for RenameRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (a, b)) in self.pairs().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "({a},{b})")?;
        }
        f.write_str("}")
    }
}

/// The equations of a recursive specification, in canonical order: the
/// distinguished variable's equation first, then the remaining reachable
/// equations in discovery order, then unreachable ones.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RecSpec(std::sync::Arc<[(Symbol, Term)]>);

impl RecSpec {
    fn new(equations: Vec<(Symbol, Term)>) -> RecSpec {
        RecSpec(std::sync::Arc::from(equations))
    }

    pub fn equations(&self) -> &[(Symbol, Term)] {
        &self.0
    }

    pub fn variables(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().map(|(y, _)| *y)
    }

    pub fn body_of(&self, x: Symbol) -> Option<Term> {
        self.0.iter().find(|(y, _)| *y == x).map(|(_, b)| *b)
    }

    pub fn contains_var(&self, x: Symbol) -> bool {
        self.variables().any(|y| y == x)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for RecSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (y, b) in self.equations() {
            m.entry(y, b);
        }
        m.finish()
    }
}

/// The shape of a term, one level deep.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum TermNode {
    /// Inaction.
    Nil,
    /// Action prefix over any label, including `tau` and `t`.
    Prefix(Label, Term),
    /// Binary choice.
    Choice(Term, Term),
    /// Parallel composition synchronizing on the given actions.
    Par(ActionSet, Term, Term),
    /// Hiding: actions in the set become `tau`.
    Hide(ActionSet, Term),
    /// Relational renaming of visible actions.
    Rename(RenameRel, Term),
    /// `Theta(lower, upper, body)` restricts the initial behaviour of
    /// `body` to what is possible while the environment allows some set of
    /// actions between `lower` and `upper`; the restriction dissolves as
    /// soon as `body` performs a visible action, or idles so that the
    /// environment may time out and change.
    Theta(ActionSet, ActionSet, Term),
    /// `Psi(env, body)` tags the time-out successors of `body` with the
    /// environment `env` in force when the time-out fires.
    Psi(ActionSet, Term),
    /// A variable occurrence.
    Var(Symbol),
    /// A recursive specification with a distinguished variable.
    Rec(Symbol, RecSpec),
}

/// A hash-consed process term. Copies are free and structural equality is
/// a pointer comparison; use the constructor functions in this module to
/// build one.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Term(u32);

struct Entry {
    node: TermNode,
    free: Box<[Symbol]>,
    theta_free: Box<[Symbol]>,
    unguarded: Box<[Symbol]>,
    valid: bool,
    guarded: bool,
    rec_free: bool,
    rec_height: u32,
}

struct Store {
    entries: Vec<&'static Entry>,
    index: HashMap<&'static TermNode, u32>,
}

fn store() -> &'static Mutex<Store> {
    static STORE: OnceLock<Mutex<Store>> = OnceLock::new();
    STORE.get_or_init(|| {
        Mutex::new(Store {
            entries: Vec::new(),
            index: HashMap::new(),
        })
    })
}

fn intern(node: TermNode) -> Term {
    if let Some(&id) = store().lock().unwrap().index.get(&node) {
        return Term(id);
    }
    // Attributes read child entries, which locks the store, so compute them
    // before taking the lock for insertion.
    let attrs = Attrs::of(&node);
    let mut s = store().lock().unwrap();
    if let Some(&id) = s.index.get(&node) {
        return Term(id);
    }
    let id = u32::try_from(s.entries.len()).expect("term store exhausted");
    let entry: &'static Entry = Box::leak(Box::new(Entry {
        node,
        free: attrs.free.into_boxed_slice(),
        theta_free: attrs.theta_free.into_boxed_slice(),
        unguarded: attrs.unguarded.into_boxed_slice(),
        valid: attrs.valid,
        guarded: attrs.guarded,
        rec_free: attrs.rec_free,
        rec_height: attrs.rec_height,
    }));
    s.index.insert(&entry.node, id);
    s.entries.push(entry);
    Term(id)
}

struct Attrs {
    free: Vec<Symbol>,
    theta_free: Vec<Symbol>,
    unguarded: Vec<Symbol>,
    valid: bool,
    guarded: bool,
    rec_free: bool,
    rec_height: u32,
}

fn sorted_union(parts: &[&[Symbol]]) -> Vec<Symbol> {
    let mut v: Vec<Symbol> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    v.sort();
    v.dedup();
    v
}

fn remove_all(mut v: Vec<Symbol>, drop: &BTreeSet<Symbol>) -> Vec<Symbol> {
    v.retain(|x| !drop.contains(x));
    v
}

impl Attrs {
    fn leaf(free: Vec<Symbol>, unguarded: Vec<Symbol>) -> Attrs {
        Attrs {
            free,
            theta_free: Vec::new(),
            unguarded,
            valid: true,
            guarded: true,
            rec_free: true,
            rec_height: 0,
        }
    }

    fn of(node: &TermNode) -> Attrs {
        use TermNode::*;
        match node {
            Nil => Attrs::leaf(Vec::new(), Vec::new()),
            Var(x) => Attrs::leaf(vec![*x], vec![*x]),
            Prefix(_, p) => {
                let e = p.entry();
                Attrs {
                    free: e.free.to_vec(),
                    theta_free: e.theta_free.to_vec(),
                    unguarded: Vec::new(),
                    valid: e.valid,
                    guarded: e.guarded,
                    rec_free: e.rec_free,
                    rec_height: e.rec_height,
                }
            }
            Choice(p, q) | Par(_, p, q) => {
                let (ep, eq) = (p.entry(), q.entry());
                Attrs {
                    free: sorted_union(&[&ep.free, &eq.free]),
                    theta_free: sorted_union(&[&ep.theta_free, &eq.theta_free]),
                    unguarded: sorted_union(&[&ep.unguarded, &eq.unguarded]),
                    valid: ep.valid && eq.valid,
                    guarded: ep.guarded && eq.guarded,
                    rec_free: ep.rec_free && eq.rec_free,
                    rec_height: ep.rec_height.max(eq.rec_height),
                }
            }
            Hide(_, p) | Rename(_, p) => {
                let e = p.entry();
                Attrs {
                    free: e.free.to_vec(),
                    theta_free: e.theta_free.to_vec(),
                    unguarded: e.unguarded.to_vec(),
                    valid: e.valid,
                    guarded: e.guarded,
                    rec_free: e.rec_free,
                    rec_height: e.rec_height,
                }
            }
            Theta(_, _, p) | Psi(_, p) => {
                let e = p.entry();
                Attrs {
                    free: e.free.to_vec(),
                    theta_free: sorted_union(&[&e.theta_free, &e.free]),
                    unguarded: e.unguarded.to_vec(),
                    valid: e.valid,
                    guarded: e.guarded,
                    rec_free: e.rec_free,
                    rec_height: e.rec_height,
                }
            }
            Rec(dist, spec) => Attrs::of_rec(*dist, spec),
        }
    }

    fn of_rec(dist: Symbol, spec: &RecSpec) -> Attrs {
        let vars: BTreeSet<Symbol> = spec.variables().collect();
        let entries: Vec<(Symbol, &'static Entry)> = spec
            .equations()
            .iter()
            .map(|(y, b)| (*y, b.entry()))
            .collect();
        let free_all = sorted_union(&entries.iter().map(|(_, e)| &*e.free).collect::<Vec<_>>());
        let theta_all = sorted_union(
            &entries
                .iter()
                .map(|(_, e)| &*e.theta_free)
                .collect::<Vec<_>>(),
        );
        let bodies_ok = |f: fn(&Entry) -> bool| entries.iter().all(|(_, e)| f(e));
        let valid = bodies_ok(|e| e.valid) && !theta_all.iter().any(|x| vars.contains(x));
        let rec_height = 1 + entries.iter().map(|(_, e)| e.rec_height).max().unwrap_or(0);

        // Unguarded-dependency edges within the specification: y depends on
        // z when z occurs unguarded in the body of y.
        let dep = |y: Symbol| -> Vec<Symbol> {
            entries
                .iter()
                .find(|(n, _)| *n == y)
                .map(|(_, e)| {
                    e.unguarded
                        .iter()
                        .copied()
                        .filter(|z| vars.contains(z))
                        .collect()
                })
                .unwrap_or_default()
        };
        let guarded = bodies_ok(|e| e.guarded) && {
            // Cycle check by iterative depth-first search over the graph.
            let mut color: BTreeMap<Symbol, u8> = BTreeMap::new();
            let mut acyclic = true;
            'outer: for root in vars.iter().copied() {
                if color.contains_key(&root) {
                    continue;
                }
                let mut stack = vec![(root, 0usize)];
                color.insert(root, 1);
                while let Some((y, i)) = stack.pop() {
                    let next = dep(y);
                    if i < next.len() {
                        stack.push((y, i + 1));
                        let z = next[i];
                        match color.get(&z) {
                            Some(1) => {
                                acyclic = false;
                                break 'outer;
                            }
                            Some(_) => {}
                            None => {
                                color.insert(z, 1);
                                stack.push((z, 0));
                            }
                        }
                    } else {
                        color.insert(y, 2);
                    }
                }
            }
            acyclic
        };

        // Free variables that occur unguarded in the whole term: follow
        // unguarded dependencies from the distinguished variable.
        let mut reach = vec![dist];
        let mut seen: BTreeSet<Symbol> = reach.iter().copied().collect();
        let mut qi = 0;
        while qi < reach.len() {
            let y = reach[qi];
            qi += 1;
            for z in dep(y) {
                if seen.insert(z) {
                    reach.push(z);
                }
            }
        }
        let unguarded_all = sorted_union(
            &reach
                .iter()
                .filter_map(|y| entries.iter().find(|(n, _)| n == y))
                .map(|(_, e)| &*e.unguarded)
                .collect::<Vec<_>>(),
        );

        Attrs {
            free: remove_all(free_all, &vars),
            theta_free: remove_all(theta_all, &vars),
            unguarded: remove_all(unguarded_all, &vars),
            valid,
            guarded,
            rec_free: false,
            rec_height,
        }
    }
}

impl Term {
    fn entry(self) -> &'static Entry {
        store().lock().unwrap().entries[self.0 as usize]
    }

    /// The root node of the term. The reference is `'static` because terms
    /// live in the global hash-consing store.
    pub fn node(self) -> &'static TermNode {
        &self.entry().node
    }

    pub(crate) fn free_slice(self) -> &'static [Symbol] {
        &self.entry().free
    }

    pub(crate) fn unguarded_slice(self) -> &'static [Symbol] {
        &self.entry().unguarded
    }

    /// Variables with at least one free occurrence.
    pub fn free_variables(self) -> BTreeSet<Symbol> {
        self.free_slice().iter().copied().collect()
    }

    pub fn is_closed(self) -> bool {
        self.free_slice().is_empty()
    }

    /// True when no `theta` or `psi` body contains a variable occurrence
    /// that is bound further out. All semantic operations require validity.
    pub fn is_valid(self) -> bool {
        self.entry().valid
    }

    /// True when every recursive specification in the term is guarded:
    /// the graph that connects each bound variable to the variables with
    /// unguarded free occurrences in its body is acyclic.
    pub fn is_guarded(self) -> bool {
        self.entry().guarded
    }

    pub fn is_recursion_free(self) -> bool {
        self.entry().rec_free
    }

    pub(crate) fn rec_height(self) -> u32 {
        self.entry().rec_height
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{self}`")
    }
}

/// Inaction.
pub fn nil() -> Term {
    intern(TermNode::Nil)
}

/// Prefixes `body` with any label, including `tau` and `t`.
pub fn prefix(label: Label, body: Term) -> Term {
    intern(TermNode::Prefix(label, body))
}

/// Binary choice.
pub fn choice(left: Term, right: Term) -> Term {
    intern(TermNode::Choice(left, right))
}

/// Right-nested n-ary choice; the empty sum is inaction.
pub fn sum<I>(terms: I) -> Term
where
    I: IntoIterator<Item = Term>,
    I::IntoIter: DoubleEndedIterator,
{
    let mut it = terms.into_iter().rev();
    let Some(last) = it.next() else {
        return nil();
    };
    it.fold(last, |acc, t| choice(t, acc))
}

/// Parallel composition synchronizing on `sync`.
pub fn par(sync: ActionSet, left: Term, right: Term) -> Term {
    intern(TermNode::Par(sync, left, right))
}

/// Hides the given actions, turning them into `tau`.
pub fn hide(hidden: ActionSet, body: Term) -> Term {
    intern(TermNode::Hide(hidden, body))
}

/// Relational renaming.
pub fn rename(rel: RenameRel, body: Term) -> Term {
    intern(TermNode::Rename(rel, body))
}

/// Environment restriction; fails unless `lower` is a subset of `upper`.
pub fn theta(lower: ActionSet, upper: ActionSet, body: Term) -> Result<Term, Error> {
    if !lower.is_subset_of(&upper) {
        return Err(Error::InvalidTerm(format!(
            "theta lower set {lower} is not contained in upper set {upper}"
        )));
    }
    Ok(intern(TermNode::Theta(lower, upper, body)))
}

/// Environment restriction to exactly the set `env`, the form that tags
/// time-out successors.
pub fn theta_env(env: ActionSet, body: Term) -> Term {
    intern(TermNode::Theta(env.clone(), env, body))
}

/// Time-out tagging operator.
pub fn psi(env: ActionSet, body: Term) -> Term {
    intern(TermNode::Psi(env, body))
}

/// A variable occurrence.
pub fn var(name: Symbol) -> Term {
    intern(TermNode::Var(name))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn fresh_tmp() -> Symbol {
    let n = TMP_COUNTER.fetch_add(1, AtomicOrdering::Relaxed);
    Symbol::new(&format!("%tmp{n}"))
}

/// Builds the recursion `<distinguished | equations>`.
///
/// Equation order and bound-variable names are normalized before interning,
/// so specifications that differ only in those respects produce the same
/// term.
pub fn rec(distinguished: Symbol, equations: Vec<(Symbol, Term)>) -> Result<Term, Error> {
    if equations.is_empty() {
        return Err(Error::InvalidTerm(
            "recursive specification has no equations".into(),
        ));
    }
    let mut names: Vec<Symbol> = equations.iter().map(|(y, _)| *y).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidTerm(
            "recursive specification binds a variable twice".into(),
        ));
    }
    if !equations.iter().any(|(y, _)| *y == distinguished) {
        return Err(Error::InvalidTerm(format!(
            "distinguished variable {distinguished} has no equation"
        )));
    }
    Ok(canonicalize(distinguished, equations))
}

/// Free-variable occurrences of `t` in textual order, duplicates included.
fn free_occurrences(t: Term, scope: &mut Vec<Symbol>, out: &mut Vec<Symbol>) {
    if t.free_slice().is_empty() {
        return;
    }
    use TermNode::*;
    match t.node() {
        Nil => {}
        Var(x) => {
            if !scope.contains(x) {
                out.push(*x);
            }
        }
        Prefix(_, p) | Hide(_, p) | Rename(_, p) | Theta(_, _, p) | Psi(_, p) => {
            free_occurrences(*p, scope, out)
        }
        Choice(p, q) | Par(_, p, q) => {
            free_occurrences(*p, scope, out);
            free_occurrences(*q, scope, out);
        }
        Rec(_, spec) => {
            let depth = scope.len();
            scope.extend(spec.variables());
            for (_, b) in spec.equations() {
                free_occurrences(*b, scope, out);
            }
            scope.truncate(depth);
        }
    }
}

fn canonicalize(dist: Symbol, equations: Vec<(Symbol, Term)>) -> Term {
    let names: BTreeSet<Symbol> = equations.iter().map(|(y, _)| *y).collect();
    let by_name: BTreeMap<Symbol, Term> = equations.iter().copied().collect();
    let family = equations
        .iter()
        .map(|(_, b)| b.rec_height())
        .max()
        .unwrap_or(0);

    // Equation order: the distinguished variable first, then bound
    // variables in order of first free occurrence, scanning bodies in that
    // same order; equations unreachable this way come last, sorted by name.
    let mut order = vec![dist];
    let mut seen: BTreeSet<Symbol> = order.iter().copied().collect();
    let mut qi = 0;
    while qi < order.len() {
        let mut occ = Vec::new();
        free_occurrences(by_name[&order[qi]], &mut Vec::new(), &mut occ);
        qi += 1;
        for z in occ {
            if names.contains(&z) && seen.insert(z) {
                order.push(z);
            }
        }
    }
    let mut rest: Vec<Symbol> = names.iter().copied().filter(|y| !seen.contains(y)).collect();
    rest.sort_by(cmp_var_names);
    order.extend(rest);

    // Canonical names for this binder family, skipping any that already
    // occur free in the bodies and would be captured.
    let dangling: BTreeSet<Symbol> = equations
        .iter()
        .flat_map(|(_, b)| b.free_slice().iter().copied())
        .filter(|x| !names.contains(x))
        .collect();
    let mut targets = Vec::with_capacity(order.len());
    let mut next = 0u32;
    for _ in &order {
        loop {
            let cand = Symbol::new(&format!("%{family}_{next}"));
            next += 1;
            if !dangling.contains(&cand) {
                targets.push(cand);
                break;
            }
        }
    }

    let unchanged = order.iter().zip(&targets).all(|(o, t)| o == t)
        && equations.iter().map(|(y, _)| *y).eq(order.iter().copied());
    if unchanged {
        return intern(TermNode::Rec(dist, RecSpec::new(equations)));
    }

    let renaming: BTreeMap<Symbol, Term> = order
        .iter()
        .zip(&targets)
        .filter(|(o, t)| o != t)
        .map(|(o, t)| (*o, var(*t)))
        .collect();
    let new_equations: Vec<(Symbol, Term)> = order
        .iter()
        .zip(&targets)
        .map(|(o, t)| (*t, substitute(by_name[o], &renaming)))
        .collect();
    intern(TermNode::Rec(targets[0], RecSpec::new(new_equations)))
}

/// Simultaneous capture-avoiding substitution on free occurrences.
///
/// Bound variables are renamed when a replacement would otherwise be
/// captured; the result is canonical regardless.
pub fn substitute(term: Term, binding: &BTreeMap<Symbol, Term>) -> Term {
    if binding.is_empty() {
        return term;
    }
    subst(term, binding)
}

fn subst(t: Term, map: &BTreeMap<Symbol, Term>) -> Term {
    let free = t.free_slice();
    if !free.iter().any(|x| map.contains_key(x)) {
        return t;
    }
    use TermNode::*;
    match t.node() {
        Nil => t,
        Var(x) => map.get(x).copied().unwrap_or(t),
        Prefix(l, p) => prefix(*l, subst(*p, map)),
        Choice(p, q) => choice(subst(*p, map), subst(*q, map)),
        Par(s, p, q) => par(s.clone(), subst(*p, map), subst(*q, map)),
        Hide(s, p) => hide(s.clone(), subst(*p, map)),
        Rename(r, p) => rename(r.clone(), subst(*p, map)),
        Theta(l, u, p) => intern(TermNode::Theta(l.clone(), u.clone(), subst(*p, map))),
        Psi(x, p) => psi(x.clone(), subst(*p, map)),
        Rec(d, spec) => {
            let live: BTreeMap<Symbol, Term> = map
                .iter()
                .filter(|(k, _)| free.binary_search(k).is_ok())
                .map(|(k, v)| (*k, *v))
                .collect();
            debug_assert!(!live.is_empty());
            let replacement_free: BTreeSet<Symbol> = live
                .values()
                .flat_map(|r| r.free_slice().iter().copied())
                .collect();
            let clashes: Vec<Symbol> = spec
                .variables()
                .filter(|y| replacement_free.contains(y))
                .collect();
            let (new_dist, new_eqs) = if clashes.is_empty() {
                let eqs = spec
                    .equations()
                    .iter()
                    .map(|(y, b)| (*y, subst_restricted(*b, &live)))
                    .collect();
                (*d, eqs)
            } else {
                // A replacement mentions a bound variable of this
                // specification; move the binder out of the way first.
                let fresh: BTreeMap<Symbol, Symbol> =
                    clashes.iter().map(|y| (*y, fresh_tmp())).collect();
                let mut combined = live.clone();
                for (y, f) in &fresh {
                    combined.insert(*y, var(*f));
                }
                let rename_of = |y: Symbol| fresh.get(&y).copied().unwrap_or(y);
                let eqs = spec
                    .equations()
                    .iter()
                    .map(|(y, b)| (rename_of(*y), subst_restricted(*b, &combined)))
                    .collect();
                (rename_of(*d), eqs)
            };
            rec(new_dist, new_eqs).expect("rebuilt recursive specification is well-formed")
        }
    }
}

fn subst_restricted(t: Term, map: &BTreeMap<Symbol, Term>) -> Term {
    if t.free_slice().iter().any(|x| map.contains_key(x)) {
        subst(t, map)
    } else {
        t
    }
}

/// One-step unfolding of a recursion: substitutes `<y | S>` for each bound
/// variable `y` in the body of the distinguished variable. Fails when the
/// term is not a recursion.
pub fn unfold(term: Term) -> Result<Term, Error> {
    match term.node() {
        TermNode::Rec(d, spec) => Ok(unfold_rec(*d, spec)),
        _ => Err(Error::InvalidTerm(format!(
            "unfold expects a recursion, got {term}"
        ))),
    }
}

pub(crate) fn unfold_rec(dist: Symbol, spec: &RecSpec) -> Term {
    let body = spec.body_of(dist).expect("distinguished variable is bound");
    let map: BTreeMap<Symbol, Term> = spec
        .variables()
        .filter(|y| body.free_slice().binary_search(y).is_ok())
        .map(|y| {
            let t = canonicalize(y, spec.equations().to_vec());
            (y, t)
        })
        .collect();
    substitute(body, &map)
}

/// Describes the first violation of validity, if any: a `theta` or `psi`
/// body containing a variable bound further out.
pub fn invalid_witness(t: Term) -> Option<String> {
    fn walk(t: Term, bound: &mut Vec<Symbol>) -> Option<String> {
        if t.is_valid() && !t.free_slice().iter().any(|x| bound.contains(x)) {
            // Nothing bound outside flows in, and any violation wholly
            // inside would have made this subterm invalid on its own.
            return None;
        }
        use TermNode::*;
        match t.node() {
            Nil | Var(_) => None,
            Prefix(_, p) | Hide(_, p) | Rename(_, p) => walk(*p, bound),
            Choice(p, q) | Par(_, p, q) => walk(*p, bound).or_else(|| walk(*q, bound)),
            Theta(_, _, p) | Psi(_, p) => {
                if let Some(x) = p.free_slice().iter().find(|x| bound.contains(x)) {
                    return Some(format!(
                        "variable {x} is bound outside the operator body {t}"
                    ));
                }
                walk(*p, bound)
            }
            Rec(_, spec) => {
                let depth = bound.len();
                bound.extend(spec.variables());
                let r = spec
                    .equations()
                    .iter()
                    .find_map(|(_, b)| walk(*b, bound));
                bound.truncate(depth);
                r
            }
        }
    }
    if t.is_valid() {
        return None;
    }
    walk(t, &mut Vec::new())
}

/// Describes the first guardedness violation, if any: a cycle of unguarded
/// dependencies in some recursive specification.
pub fn unguarded_witness(t: Term) -> Option<String> {
    if t.is_guarded() {
        return None;
    }
    use TermNode::*;
    match t.node() {
        Nil | Var(_) => None,
        Prefix(_, p) | Hide(_, p) | Rename(_, p) | Theta(_, _, p) | Psi(_, p) => {
            unguarded_witness(*p)
        }
        Choice(p, q) | Par(_, p, q) => unguarded_witness(*p).or_else(|| unguarded_witness(*q)),
        Rec(_, spec) => {
            if let Some((y, _)) = spec.equations().iter().find(|(y, b)| {
                b.unguarded_slice().contains(y)
                    || spec.variables().any(|z| {
                        b.unguarded_slice().contains(&z)
                            && spec
                                .body_of(z)
                                .is_some_and(|bz| reaches_unguarded(bz, *y, spec))
                    })
            }) {
                return Some(format!("variable {y} recurs unguarded in {t}"));
            }
            spec.equations()
                .iter()
                .find_map(|(_, b)| unguarded_witness(*b))
        }
    }
}

fn reaches_unguarded(from_body: Term, target: Symbol, spec: &RecSpec) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<Symbol> = from_body
        .unguarded_slice()
        .iter()
        .copied()
        .filter(|z| spec.contains_var(*z))
        .collect();
    while let Some(z) = stack.pop() {
        if z == target {
            return true;
        }
        if seen.insert(z) {
            if let Some(b) = spec.body_of(z) {
                stack.extend(
                    b.unguarded_slice()
                        .iter()
                        .copied()
                        .filter(|w| spec.contains_var(*w)),
                );
            }
        }
    }
    false
}
