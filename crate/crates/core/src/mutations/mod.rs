//! The five semantics-preserving mutations: site enumeration and
//! application. Every mutation is a set of span edits on the original text
//! followed by a re-parse.

pub mod names;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use cfprobe_syntax::ast::StmtKind;
use cfprobe_syntax::{Edit, EditError, SourceProgram, Span, StmtRef, SyntaxTree};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::defuse::Region;
use crate::analysis::{
    def_use_chains, independent_pairs, negation_edits, relational_if_sites, DefUseChain, IndependencePair,
    RelationalSite, Resolution, ScopeKind, ScopeTable, UnsupportedCondition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MutationKind {
    #[serde(rename = "var-rename-random")]
    VarRenameRandom,
    #[serde(rename = "var-rename-shuffle")]
    VarRenameShuffle,
    #[serde(rename = "ifelse-flip")]
    IfElseFlip,
    #[serde(rename = "independent-swap")]
    IndependentSwap,
    #[serde(rename = "defuse-break")]
    DefUseBreak,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::VarRenameRandom,
        MutationKind::VarRenameShuffle,
        MutationKind::IfElseFlip,
        MutationKind::IndependentSwap,
        MutationKind::DefUseBreak,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MutationKind::VarRenameRandom => "var-rename-random",
            MutationKind::VarRenameShuffle => "var-rename-shuffle",
            MutationKind::IfElseFlip => "ifelse-flip",
            MutationKind::IndependentSwap => "independent-swap",
            MutationKind::DefUseBreak => "defuse-break",
        }
    }

    /// Whether the pair cut is the 75% boundary (everything but the flip).
    pub fn uses_fraction_cut(&self) -> bool {
        *self != MutationKind::IfElseFlip
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mutation kind `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for MutationKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MutationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("no variable has a second isolated def-use chain")]
    NoEligibleChain,
    #[error("too few renameable variables ({0})")]
    TooFewVariables(usize),
    #[error(transparent)]
    UnsupportedCondition(#[from] UnsupportedCondition),
    #[error("`if` has no plain else block or bodies are not flippable")]
    NotFlippable,
    #[error("chain ordinal must be at least 2")]
    FirstChain,
    #[error("mutation produced invalid code: {0}")]
    Edit(#[from] EditError),
    #[error("mutation scope not found")]
    NoScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MutationTarget {
    Rename,
    Relational(RelationalSite),
    Pair(IndependencePair),
    Chain(DefUseChain),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationInstance {
    pub kind: MutationKind,
    pub target: MutationTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rename_map: Option<BTreeMap<String, String>>,
    pub seed: u64,
    /// Regions of the original text that the mutation rewrites.
    pub changed_spans: Vec<Span>,
    #[serde(skip)]
    pub edits: Vec<Edit>,
}

#[derive(Debug, Clone)]
pub struct MutatedProgram {
    pub text: String,
    pub instance: MutationInstance,
    pub parent: SourceProgram,
}

/// A program prepared for mutation: parsed, scope-resolved, with the
/// region to mutate and any words that fresh names must avoid (e.g. the
/// test code's identifiers).
#[derive(Debug, Clone)]
pub struct Subject {
    pub source: SourceProgram,
    pub tree: SyntaxTree,
    pub table: ScopeTable,
    pub region: Region,
    pub reserved: BTreeSet<String>,
}

impl Subject {
    pub fn new(source: SourceProgram, tree: SyntaxTree, region: Region) -> Self {
        let table = ScopeTable::build(&tree);
        let reserved = names::words(tree.source());
        Subject {
            source,
            tree,
            table,
            region,
            reserved,
        }
    }

    pub fn parse(text: &str, origin: &str, region: impl FnOnce(&SyntaxTree) -> Region) -> Result<Self, cfprobe_syntax::SyntaxError> {
        let tree = cfprobe_syntax::parse(text)?;
        let r = region(&tree);
        Ok(Subject::new(SourceProgram::new(text, origin), tree, r))
    }

    pub fn reserve(&mut self, text: &str) {
        self.reserved.extend(names::words(text));
    }

    fn label(&self, kind: MutationKind, index: usize) -> String {
        format!("{}:{}:{}", self.source.origin, kind, index)
    }
}

/// All applicable instances of `kind`, in source order, fully materialised.
pub fn enumerate_candidates(kind: MutationKind, subject: &Subject, seed: u64) -> Vec<MutationInstance> {
    match kind {
        MutationKind::VarRenameRandom | MutationKind::VarRenameShuffle => {
            rename_instance(subject, kind, seed).into_iter().collect()
        }
        MutationKind::IfElseFlip => relational_if_sites(&subject.tree, &subject.region)
            .into_iter()
            .filter_map(|site| flip_instance(subject, &site, seed).ok())
            .collect(),
        MutationKind::IndependentSwap => independent_pairs(&subject.tree, &subject.table, &subject.region)
            .into_iter()
            .map(|pair| swap_instance(subject, &pair, seed))
            .collect(),
        MutationKind::DefUseBreak => {
            let chains = def_use_chains(&subject.tree, &subject.table, &subject.region);
            let mut eligible: Vec<DefUseChain> = chains
                .into_iter()
                .filter(|c| c.ordinal >= 2 && c.isolated && !c.use_sites.is_empty())
                .collect();
            eligible.sort_by_key(|c| c.def_site.span.byte_start);
            eligible
                .iter()
                .enumerate()
                .filter_map(|(i, c)| chain_instance(subject, c, seed, i).ok())
                .collect()
        }
    }
}

/// Apply a materialised instance to its subject.
pub fn apply(subject: &Subject, instance: &MutationInstance) -> Result<MutatedProgram, MutationError> {
    let tree = subject.tree.apply_edits(&instance.edits)?;
    Ok(MutatedProgram {
        text: tree.source().to_string(),
        instance: instance.clone(),
        parent: subject.source.clone(),
    })
}

pub fn apply_ifelse_flip(subject: &Subject, site: &RelationalSite) -> Result<MutatedProgram, MutationError> {
    apply(subject, &flip_instance(subject, site, 0)?)
}

pub fn apply_independent_swap(subject: &Subject, pair: &IndependencePair) -> Result<MutatedProgram, MutationError> {
    apply(subject, &swap_instance(subject, pair, 0))
}

pub fn apply_defuse_break(subject: &Subject, chain: &DefUseChain, seed: u64) -> Result<MutatedProgram, MutationError> {
    apply(subject, &chain_instance(subject, chain, seed, 0)?)
}

/// Rename every renameable local, to fresh names (`shuffle = false`) or by
/// a derangement of the existing names (`shuffle = true`).
pub fn apply_var_rename(subject: &Subject, shuffle: bool, seed: u64) -> Result<MutatedProgram, MutationError> {
    let kind = if shuffle {
        MutationKind::VarRenameShuffle
    } else {
        MutationKind::VarRenameRandom
    };
    let inst = rename_instance(subject, kind, seed)
        .ok_or_else(|| MutationError::TooFewVariables(renameable(subject).len()))?;
    apply(subject, &inst)
}

/// Rename with an explicit map (applies to every occurrence of each key
/// that is a renameable local of the region).
pub fn apply_rename_map(subject: &Subject, map: &BTreeMap<String, String>, seed: u64) -> Result<MutatedProgram, MutationError> {
    let edits = rename_edits(subject, map);
    let inst = MutationInstance {
        kind: MutationKind::VarRenameRandom,
        target: MutationTarget::Rename,
        rename_map: Some(map.clone()),
        seed,
        changed_spans: edits.iter().map(|e| e.span).collect(),
        edits,
    };
    apply(subject, &inst)
}

fn region_scope(subject: &Subject) -> Option<usize> {
    subject.region.scope_id(&subject.table)
}

pub fn renameable(subject: &Subject) -> Vec<String> {
    region_scope(subject).map_or_else(Vec::new, |s| subject.table.renameable_locals(s))
}

fn rename_instance(subject: &Subject, kind: MutationKind, seed: u64) -> Option<MutationInstance> {
    let vars = renameable(subject);
    let mut rng = names::rng_for(seed, &subject.label(kind, 0));
    let map: BTreeMap<String, String> = match kind {
        MutationKind::VarRenameShuffle => {
            let perm = names::derangement(&mut rng, vars.len())?;
            vars.iter().zip(&perm).map(|(v, &j)| (v.clone(), vars[j].clone())).collect()
        }
        _ => {
            if vars.is_empty() {
                return None;
            }
            let mut taken = subject.reserved.clone();
            vars.iter().map(|v| (v.clone(), names::fresh_name(&mut rng, &mut taken))).collect()
        }
    };
    let edits = rename_edits(subject, &map);
    Some(MutationInstance {
        kind,
        target: MutationTarget::Rename,
        rename_map: Some(map),
        seed,
        changed_spans: edits.iter().map(|e| e.span).collect(),
        edits,
    })
}

fn rename_edits(subject: &Subject, map: &BTreeMap<String, String>) -> Vec<Edit> {
    let Some(scope) = region_scope(subject) else { return Vec::new() };
    let t = &subject.table;
    t.occurrences_within(scope)
        .filter(|o| o.is_variable_ref() && map.contains_key(&o.name))
        .filter(|o| match o.resolution {
            Resolution::Bound(s) => {
                s == scope || (t.scopes[s].kind == ScopeKind::Comprehension && t.only_comprehensions_between(s, scope))
            }
            _ => false,
        })
        .map(|o| Edit::new(o.span, map[&o.name].clone()))
        .collect()
}

fn chain_instance(subject: &Subject, chain: &DefUseChain, seed: u64, index: usize) -> Result<MutationInstance, MutationError> {
    if chain.ordinal < 2 {
        return Err(MutationError::FirstChain);
    }
    let mut rng = names::rng_for(seed, &subject.label(MutationKind::DefUseBreak, index));
    let mut taken = subject.reserved.clone();
    let fresh = names::fresh_name(&mut rng, &mut taken);
    let edits: Vec<Edit> = chain.spans().into_iter().map(|s| Edit::new(s, fresh.clone())).collect();
    Ok(MutationInstance {
        kind: MutationKind::DefUseBreak,
        target: MutationTarget::Chain(chain.clone()),
        rename_map: Some(BTreeMap::from([(chain.variable.clone(), fresh)])),
        seed,
        changed_spans: edits.iter().map(|e| e.span).collect(),
        edits,
    })
}

/// Span of whole physical lines `first..=last`, excluding the final line break.
pub fn line_block(tree: &SyntaxTree, first: u32, last: u32) -> Span {
    let idx = tree.line_index();
    let start = idx.line_start(first).expect("line exists");
    let src = tree.source().as_bytes();
    let mut end = idx.line_end_inclusive(last);
    if end > start.byte && src[end - 1] == b'\n' {
        end -= 1;
        if end > start.byte && src[end - 1] == b'\r' {
            end -= 1;
        }
    }
    Span::new(start, idx.position(end))
}

fn swap_edits(tree: &SyntaxTree, a: Span, b: Span) -> Vec<Edit> {
    let (ta, tb) = (tree.text(a).to_string(), tree.text(b).to_string());
    vec![Edit::new(a, tb), Edit::new(b, ta)]
}

fn swap_instance(subject: &Subject, pair: &IndependencePair, seed: u64) -> MutationInstance {
    let t = &subject.tree;
    let a = line_block(t, pair.first.span.start_line, pair.first.span.end_line);
    let b = line_block(t, pair.second.span.start_line, pair.second.span.end_line);
    MutationInstance {
        kind: MutationKind::IndependentSwap,
        target: MutationTarget::Pair(pair.clone()),
        rename_map: None,
        seed,
        changed_spans: vec![a, b],
        edits: swap_edits(t, a, b),
    }
}

/// Then/else line blocks of a flippable `if`.
fn flip_regions(tree: &SyntaxTree, r: &StmtRef) -> Option<(Span, Span)> {
    let StmtKind::If(i) = &tree.stmt(r)?.kind else { return None };
    let orelse = i.orelse.as_ref()?;
    if !i.elifs.is_empty() || i.body.inline || orelse.body.inline {
        return None;
    }
    let (tf, tl) = (i.body.stmts.first()?, i.body.stmts.last()?);
    let (ef, el) = (orelse.body.stmts.first()?, orelse.body.stmts.last()?);
    if tf.span.start_col != ef.span.start_col {
        return None;
    }
    let then = line_block(tree, i.header.end_line + 1, tl.span.end_line);
    let els = line_block(tree, orelse.header.end_line + 1, el.span.end_line);
    Some((then, els))
}

fn flip_instance(subject: &Subject, site: &RelationalSite, seed: u64) -> Result<MutationInstance, MutationError> {
    if !site.has_else {
        return Err(MutationError::NotFlippable);
    }
    let t = &subject.tree;
    let stmt = t.stmt(&site.if_stmt).ok_or(MutationError::NoScope)?;
    let StmtKind::If(i) = &stmt.kind else { return Err(MutationError::NotFlippable) };
    let (then, els) = flip_regions(t, &site.if_stmt).ok_or(MutationError::NotFlippable)?;
    let mut edits = negation_edits(&i.test)?;
    let mut changed: Vec<Span> = edits.iter().map(|e| e.span).collect();
    edits.extend(swap_edits(t, then, els));
    changed.extend([then, els]);
    Ok(MutationInstance {
        kind: MutationKind::IfElseFlip,
        target: MutationTarget::Relational(site.clone()),
        rename_map: None,
        seed,
        changed_spans: changed,
        edits,
    })
}
