//! Def-use chains by reaching definitions over the structured statement
//! tree (no explicit CFG: loops iterate to a fixpoint in place).

use std::collections::{BTreeMap, BTreeSet};

use cfprobe_syntax::ast::{ExprKind, Stmt, StmtKind};
use cfprobe_syntax::{Span, StmtRef, SyntaxTree};
use serde::{Deserialize, Serialize};

use super::scope::{BindKind, Ctx, Resolution, ScopeId, ScopeKind, ScopeTable};
use super::{IdentifierOccurrence, Role};

/// A body to analyse: the module top level or one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    Module,
    Function(StmtRef),
}

impl Region {
    pub fn body<'t>(&self, tree: &'t SyntaxTree) -> Option<&'t [Stmt]> {
        match self {
            Region::Module => Some(&tree.module().body),
            Region::Function(r) => tree.function(r).map(|f| f.body.stmts.as_slice()),
        }
    }

    pub fn scope_id(&self, table: &ScopeTable) -> Option<ScopeId> {
        match self {
            Region::Module => Some(super::MODULE_SCOPE),
            Region::Function(r) => table.function_scope(r.span),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefUseChain {
    pub variable: String,
    /// 1-based position of this definition among the variable's definitions.
    pub ordinal: usize,
    pub def_site: IdentifierOccurrence,
    /// Uses reached by this definition alone. A use reached by several
    /// definitions belongs to no chain, so chains of a variable never
    /// share an occurrence.
    pub use_sites: Vec<IdentifierOccurrence>,
    /// No use of this chain can also be reached by another definition (or
    /// by the variable being unset), so renaming it alone is safe.
    pub isolated: bool,
}

impl DefUseChain {
    pub fn spans(&self) -> Vec<Span> {
        std::iter::once(self.def_site.span)
            .chain(self.use_sites.iter().map(|u| u.span))
            .collect()
    }
}

type DefId = usize;
const ENTRY: DefId = usize::MAX;
const DELETED: DefId = usize::MAX - 1;

type Env = BTreeMap<String, BTreeSet<DefId>>;
/// `None` means the point is unreachable.
type State = Option<Env>;

fn join(a: &State, b: &State) -> State {
    match (a, b) {
        (None, x) | (x, None) => x.clone(),
        (Some(x), Some(y)) => {
            let mut out = x.clone();
            for (k, v) in y {
                out.entry(k.clone()).or_default().extend(v.iter().copied());
            }
            Some(out)
        }
    }
}

/// Def-use chains for every plain local variable of `region`, ordered by
/// variable (first appearance) and then ordinal.
pub fn def_use_chains(tree: &SyntaxTree, table: &ScopeTable, region: &Region) -> Vec<DefUseChain> {
    let (Some(body), Some(scope)) = (region.body(tree), region.scope_id(table)) else {
        return Vec::new();
    };
    if table.is_dynamic(scope) {
        return Vec::new();
    }
    let tracked = tracked_variables(table, scope);
    let mut a = Analyzer {
        table,
        scope,
        tracked: &tracked,
        uses: BTreeMap::new(),
        loops: Vec::new(),
        tries: Vec::new(),
    };
    let mut env = Env::new();
    for v in &tracked {
        env.insert(v.clone(), BTreeSet::from([ENTRY]));
    }
    // Parameters are defined on entry.
    for (i, o) in table.occurrences.iter().enumerate() {
        if o.ctx == Ctx::Param && o.scope == scope && tracked.contains(&o.name) {
            env.insert(o.name.clone(), BTreeSet::from([i]));
        }
    }
    a.block(body, Some(env));
    a.chains()
}

/// Locals of `scope` whose every binding is a plain assignment-like form
/// and which nested functions, lambdas or classes never reference.
fn tracked_variables(table: &ScopeTable, scope: ScopeId) -> BTreeSet<String> {
    let sc = &table.scopes[scope];
    let mut out: BTreeSet<String> = sc
        .bindings
        .iter()
        .filter(|(name, kinds)| {
            !sc.globals.contains(*name)
                && !sc.nonlocals.contains(*name)
                && kinds.iter().all(|k| {
                    matches!(
                        k,
                        BindKind::Param
                            | BindKind::Assign
                            | BindKind::AugAssign
                            | BindKind::Loop
                            | BindKind::With
                            | BindKind::Handler
                            | BindKind::Del
                    )
                })
        })
        .map(|(n, _)| n.clone())
        .collect();
    for o in &table.occurrences {
        if o.resolution == Resolution::Bound(scope)
            && o.scope != scope
            && !table.only_comprehensions_between(o.scope, scope)
        {
            out.remove(&o.name);
        }
    }
    out
}

struct Analyzer<'a> {
    table: &'a ScopeTable,
    scope: ScopeId,
    tracked: &'a BTreeSet<String>,
    /// Use occurrence -> definitions reaching it.
    uses: BTreeMap<usize, BTreeSet<DefId>>,
    /// (break states, continue states) per enclosing loop.
    loops: Vec<(Vec<State>, Vec<State>)>,
    /// States observed inside each enclosing `try` body.
    tries: Vec<Vec<State>>,
}

impl<'a> Analyzer<'a> {
    /// Tracked occurrences lying inside `span`, in source order.
    fn occs_in(&self, span: Span) -> Vec<usize> {
        let occ = &self.table.occurrences;
        let start = occ.partition_point(|o| o.span.byte_start < span.byte_start);
        (start..occ.len())
            .take_while(|&i| occ[i].span.byte_start < span.byte_end)
            .filter(|&i| {
                let o = &occ[i];
                o.span.byte_end <= span.byte_end
                    && o.resolution == Resolution::Bound(self.scope)
                    && self.tracked.contains(&o.name)
                    && matches!(o.ctx, Ctx::Load | Ctx::Store | Ctx::Del | Ctx::AugStore)
            })
            .collect()
    }

    /// Evaluate the occurrences of one straight-line step: reads happen
    /// before writes.
    fn step(&mut self, spans: &[Span], state: State) -> State {
        let mut env = state?;
        let mut idx: Vec<usize> = spans.iter().flat_map(|s| self.occs_in(*s)).collect();
        idx.sort_unstable();
        idx.dedup();
        for &i in &idx {
            let o = &self.table.occurrences[i];
            if matches!(o.ctx, Ctx::Load | Ctx::AugStore | Ctx::Del) {
                let defs = env.get(&o.name).cloned().unwrap_or_default();
                self.uses.entry(i).or_default().extend(defs);
            }
        }
        for &i in &idx {
            let o = &self.table.occurrences[i];
            match o.ctx {
                Ctx::Store => {
                    env.insert(o.name.clone(), BTreeSet::from([i]));
                }
                Ctx::Del => {
                    env.insert(o.name.clone(), BTreeSet::from([DELETED]));
                }
                _ => {}
            }
        }
        Some(env)
    }

    fn observe(&mut self, state: &State) {
        if state.is_some() {
            for t in &mut self.tries {
                t.push(state.clone());
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt], mut state: State) -> State {
        for s in stmts {
            self.observe(&state);
            state = self.stmt(s, state);
            self.observe(&state);
        }
        state
    }

    fn stmt(&mut self, s: &Stmt, state: State) -> State {
        state.as_ref()?;
        match &s.kind {
            StmtKind::Return(_) | StmtKind::Raise { .. } => {
                let st = self.step(&[s.span], state);
                self.observe(&st);
                None
            }
            StmtKind::Break => {
                if let Some(l) = self.loops.last_mut() {
                    l.0.push(state);
                }
                None
            }
            StmtKind::Continue => {
                if let Some(l) = self.loops.last_mut() {
                    l.1.push(state);
                }
                None
            }
            StmtKind::If(i) => {
                let mut st = self.step(&[i.test.span], state);
                let mut out = self.block(&i.body.stmts, st.clone());
                for e in &i.elifs {
                    st = self.step(&[e.test.span], st);
                    let b = self.block(&e.body.stmts, st.clone());
                    out = join(&out, &b);
                }
                let tail = match &i.orelse {
                    Some(c) => self.block(&c.body.stmts, st),
                    None => st,
                };
                join(&out, &tail)
            }
            StmtKind::While(w) => {
                let infinite = matches!(&w.test.unparen().kind, ExprKind::Constant(c) if c == "True");
                let (head, breaks) = self.fixpoint(state, |a, st| {
                    let st = a.step(&[w.test.span], st);
                    (st.clone(), a.block(&w.body.stmts, st))
                });
                let exit_head = if infinite { None } else { self.step(&[w.test.span], head) };
                let tail = match &w.orelse {
                    Some(c) => self.block(&c.body.stmts, exit_head),
                    None => exit_head,
                };
                breaks.iter().fold(tail, |acc, b| join(&acc, b))
            }
            StmtKind::For(f) => {
                let st = self.step(&[f.iter.span], state);
                let (head, breaks) = self.fixpoint(st, |a, st| {
                    let st = a.step(&[f.target.span], st);
                    (st.clone(), a.block(&f.body.stmts, st))
                });
                let tail = match &f.orelse {
                    Some(c) => self.block(&c.body.stmts, head),
                    None => head,
                };
                breaks.iter().fold(tail, |acc, b| join(&acc, b))
            }
            StmtKind::Try(t) => {
                self.tries.push(Vec::new());
                let body_out = self.block(&t.body.stmts, state.clone());
                let observed = self.tries.pop().unwrap_or_default();
                let raised = observed.iter().fold(state, |acc, s| join(&acc, s));
                let normal = match &t.orelse {
                    Some(c) => self.block(&c.body.stmts, body_out),
                    None => body_out,
                };
                let mut out = normal;
                let mut seen = vec![raised.clone()];
                for h in &t.handlers {
                    self.tries.push(Vec::new());
                    let mut st = match &h.typ {
                        Some(ty) => self.step(&[ty.span], raised.clone()),
                        None => raised.clone(),
                    };
                    if let Some(n) = &h.name {
                        st = self.step(&[n.span], st);
                    }
                    st = self.block(&h.body.stmts, st);
                    // `except E as e` unbinds `e` when the handler ends.
                    if let (Some(n), Some(env)) = (&h.name, st.as_mut()) {
                        if self.tracked.contains(&n.name) {
                            env.insert(n.name.clone(), BTreeSet::from([DELETED]));
                        }
                    }
                    seen.extend(self.tries.pop().unwrap_or_default());
                    out = join(&out, &st);
                }
                match &t.finalbody {
                    Some(c) => {
                        // Conservatively, `finally` may start from any state seen.
                        let entry = seen.iter().fold(out.clone(), |acc, s| join(&acc, s));
                        let fin = self.block(&c.body.stmts, entry);
                        if out.is_some() {
                            fin
                        } else {
                            None
                        }
                    }
                    None => out,
                }
            }
            StmtKind::With(w) => {
                let mut spans = Vec::new();
                for it in &w.items {
                    spans.push(it.context.span);
                    spans.extend(it.vars.iter().map(|v| v.span));
                }
                let st = self.step(&spans, state);
                self.block(&w.body.stmts, st)
            }
            StmtKind::FunctionDef(_) | StmtKind::ClassDef(_) => {
                let spans: Vec<Span> = s.exprs().iter().map(|e| e.span).collect();
                self.step(&spans, state)
            }
            _ => self.step(&[s.span], state),
        }
    }

    /// Run a loop body to a fixpoint. `body` maps the loop-head state to
    /// (state entering the body, state at the end of the body). Returns the
    /// stable head state and the collected break states.
    fn fixpoint(&mut self, entry: State, body: impl Fn(&mut Self, State) -> (State, State)) -> (State, Vec<State>) {
        let mut head = entry.clone();
        loop {
            self.loops.push((Vec::new(), Vec::new()));
            let (_, end) = body(self, head.clone());
            let (breaks, conts) = self.loops.pop().unwrap_or_default();
            let next = conts.iter().fold(join(&entry, &end), |acc, c| join(&acc, c));
            let next = join(&head, &next);
            if next == head {
                return (head, breaks);
            }
            head = next;
        }
    }

    fn chains(&self) -> Vec<DefUseChain> {
        let occ = &self.table.occurrences;
        let mut def_ids: Vec<usize> = occ
            .iter()
            .enumerate()
            .filter(|(_, o)| {
                o.scope == self.scope
                    && self.tracked.contains(&o.name)
                    && o.resolution == Resolution::Bound(self.scope)
                    && matches!(o.ctx, Ctx::Store | Ctx::Param)
            })
            .map(|(i, _)| i)
            .collect();
        // Parameters come first (they are bound before the body runs).
        def_ids.sort_by_key(|&i| (occ[i].ctx != Ctx::Param, occ[i].span.byte_start));
        let mut order: Vec<&str> = Vec::new();
        for &i in &def_ids {
            if !order.contains(&occ[i].name.as_str()) {
                order.push(&occ[i].name);
            }
        }
        let mut tainted: BTreeSet<DefId> = BTreeSet::new();
        for defs in self.uses.values() {
            if defs.len() > 1 {
                tainted.extend(defs.iter().copied());
            }
        }
        let mut out = Vec::new();
        for name in order {
            let mut ordinal = 0;
            for &d in def_ids.iter().filter(|&&i| occ[i].name == name) {
                ordinal += 1;
                let uses: Vec<IdentifierOccurrence> = self
                    .uses
                    .iter()
                    .filter(|(_, defs)| defs.len() == 1 && defs.contains(&d))
                    .map(|(&u, _)| ident(&occ[u], Role::Use))
                    .collect();
                let role = if occ[d].ctx == Ctx::Param {
                    Role::Parameter
                } else {
                    Role::Definition
                };
                out.push(DefUseChain {
                    variable: name.to_string(),
                    ordinal,
                    def_site: ident(&occ[d], role),
                    use_sites: uses,
                    isolated: !tainted.contains(&d),
                });
            }
        }
        out
    }
}

fn ident(o: &super::scope::Occurrence, role: Role) -> IdentifierOccurrence {
    IdentifierOccurrence {
        name: o.name.clone(),
        span: o.span,
        role,
    }
}

/// Whether `scope` is a function-like scope suitable for chain analysis.
pub fn analysable(table: &ScopeTable, scope: ScopeId) -> bool {
    matches!(table.scopes[scope].kind, ScopeKind::Function | ScopeKind::Module)
}
