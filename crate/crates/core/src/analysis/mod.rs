//! Static analyses over a parsed program: scopes and identifier roles,
//! def-use chains, read/write sets with statement independence, and
//! negatable `if` conditions.

pub mod defuse;
pub mod relational;
pub mod rwsets;
pub mod scope;

pub use defuse::{def_use_chains, DefUseChain};
pub use relational::{negate_condition, negation_edits, relational_if_sites, RelationalSite, UnsupportedCondition};
pub use rwsets::{independent_pairs, read_write_sets, IndependencePair, ReadWriteSet};
pub use scope::{is_builtin, Ctx, Occurrence, Resolution, ScopeId, ScopeKind, ScopeTable, MODULE_SCOPE};

use cfprobe_syntax::{Span, StmtRef, SyntaxTree};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Definition,
    Use,
    Parameter,
    Attribute,
    KeywordArgName,
    /// Imported, builtin, declared-global/nonlocal, or a def/class name.
    GlobalOrBuiltin,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdentifierOccurrence {
    pub name: String,
    pub span: Span,
    pub role: Role,
}

/// Classify every identifier in the tree, in source order.
pub fn classify_identifiers(tree: &SyntaxTree) -> Vec<IdentifierOccurrence> {
    classify_with(&ScopeTable::build(tree))
}

pub fn classify_with(table: &ScopeTable) -> Vec<IdentifierOccurrence> {
    table
        .occurrences
        .iter()
        .map(|o| IdentifierOccurrence {
            name: o.name.clone(),
            span: o.span,
            role: role_of(table, o),
        })
        .collect()
}

fn role_of(table: &ScopeTable, o: &Occurrence) -> Role {
    match o.ctx {
        Ctx::Attr => return Role::Attribute,
        Ctx::KwArg => return Role::KeywordArgName,
        Ctx::Param => return Role::Parameter,
        Ctx::Import | Ctx::Decl | Ctx::DefName => return Role::GlobalOrBuiltin,
        _ => {}
    }
    match o.resolution {
        Resolution::Builtin => Role::GlobalOrBuiltin,
        Resolution::Bound(s) => {
            let kinds = &table.scopes[s].bindings[&o.name];
            if kinds.contains(&scope::BindKind::Import)
                || kinds.contains(&scope::BindKind::Def)
                || kinds.contains(&scope::BindKind::Class)
            {
                Role::GlobalOrBuiltin
            } else if kinds.contains(&scope::BindKind::Param) {
                Role::Parameter
            } else if o.ctx == Ctx::Load {
                Role::Use
            } else {
                Role::Definition
            }
        }
        _ if o.ctx == Ctx::Load => Role::Use,
        _ => Role::Definition,
    }
}

/// The function scope created by the definition at `func`.
pub fn scope_of(table: &ScopeTable, tree: &SyntaxTree, func: &StmtRef) -> Option<ScopeId> {
    tree.stmt(func)?;
    table.function_scope(func.span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfprobe_syntax::parse;

    fn roles(src: &str) -> Vec<(String, Role)> {
        classify_identifiers(&parse(src).unwrap())
            .into_iter()
            .map(|o| (o.name, o.role))
            .collect()
    }

    #[test]
    fn parameters_definitions_and_uses() {
        let r = roles("def f(n):\n    r=n+1\n    return r\n");
        let expect = [
            ("f", Role::GlobalOrBuiltin),
            ("n", Role::Parameter),
            ("r", Role::Definition),
            ("n", Role::Parameter),
            ("r", Role::Use),
        ];
        let got: Vec<_> = r.iter().map(|(n, r)| (n.as_str(), *r)).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn imports_attributes_builtins() {
        let r = roles("import math\nmath.sqrt(x)\nlen(a)\nf(key=1)\n");
        let got: Vec<_> = r.iter().map(|(n, r)| (n.as_str(), *r)).collect();
        assert_eq!(
            got,
            [
                ("math", Role::GlobalOrBuiltin),
                ("math", Role::GlobalOrBuiltin),
                ("sqrt", Role::Attribute),
                ("x", Role::Use),
                ("len", Role::GlobalOrBuiltin),
                ("a", Role::Use),
                ("f", Role::Use),
                ("key", Role::KeywordArgName),
            ]
        );
    }
}
