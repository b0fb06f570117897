use std::fmt;

use super::{Circuit, Scope, UnitId, UnitKind};

/// Tolerance on parameter normalization.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureRule {
    /// The root is not the last unit, or a unit is not reachable from it.
    Reachability,
    /// A sum or product unit without children.
    EmptyChildren,
    /// Sum children and parameter lists differ in length.
    ParamLength,
    /// Parameters are negative, NaN, or do not sum to one.
    Normalization,
    /// Input distribution does not match its variable's cardinality.
    LeafCardinality,
    /// Product children share variables.
    Decomposability,
    /// Sum children have different scopes.
    Smoothness,
    /// Sum feeding a sum or product feeding a product.
    Alternation,
    /// Stored scope differs from the scope implied by the children.
    Scope,
    /// The same child appears twice under one sum.
    DuplicateEdge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureViolation {
    pub unit: UnitId,
    pub rule: StructureRule,
    pub detail: String,
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unit {}: {:?}: {}", self.unit, self.rule, self.detail)
    }
}

fn check_distribution(log_p: &[f64]) -> Option<String> {
    if log_p.iter().any(|l| l.is_nan() || *l > 0.0) {
        return Some("parameter is NaN or greater than one".into());
    }
    let total: f64 = log_p.iter().map(|l| l.exp()).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Some(format!("parameters sum to {total}"));
    }
    None
}

impl Circuit {
    /// Checks smoothness, decomposability, normalization, alternation and
    /// reachability. An empty list means the circuit is valid.
    pub fn validate(&self) -> Vec<StructureViolation> {
        let mut out = Vec::new();
        let mut push =
            |unit: usize, rule, detail: String| out.push(StructureViolation { unit: UnitId(unit), rule, detail });
        let units = self.units();
        let n = units.len();
        if self.root().0 + 1 != n {
            push(self.root().0, StructureRule::Reachability, format!("root is not the last of {n} units"));
        }
        let mut reach = vec![false; n];
        reach[self.root().0] = true;
        for i in (0..n).rev() {
            if reach[i] {
                for c in units[i].children() {
                    reach[c.0] = true;
                }
            }
        }
        for (i, r) in reach.iter().enumerate() {
            if !r {
                push(i, StructureRule::Reachability, "not reachable from the root".into());
            }
        }

        for (i, u) in units.iter().enumerate() {
            match &u.kind {
                UnitKind::Input(dist) => {
                    match self.cardinalities().get(dist.var) {
                        None => push(i, StructureRule::LeafCardinality, format!("variable {} out of range", dist.var)),
                        Some(&k) if k as usize != dist.log_probs.len() => push(
                            i,
                            StructureRule::LeafCardinality,
                            format!("{} probabilities for a variable with {k} categories", dist.log_probs.len()),
                        ),
                        Some(_) => {}
                    }
                    if let Some(msg) = check_distribution(&dist.log_probs) {
                        push(i, StructureRule::Normalization, msg);
                    }
                    if u.scope != Scope::singleton(dist.var) {
                        push(i, StructureRule::Scope, format!("input scope {:?} is not {{{}}}", u.scope, dist.var));
                    }
                }
                UnitKind::Sum { children, log_params } => {
                    if children.is_empty() {
                        push(i, StructureRule::EmptyChildren, "sum without children".into());
                        continue;
                    }
                    if children.len() != log_params.len() {
                        push(
                            i,
                            StructureRule::ParamLength,
                            format!("{} children but {} parameters", children.len(), log_params.len()),
                        );
                    } else if let Some(msg) = check_distribution(log_params) {
                        push(i, StructureRule::Normalization, msg);
                    }
                    let mut seen = children.clone();
                    seen.sort_unstable();
                    if seen.windows(2).any(|w| w[0] == w[1]) {
                        push(i, StructureRule::DuplicateEdge, "a child appears more than once".into());
                    }
                    let first = &units[children[0].0].scope;
                    for c in &children[1..] {
                        if &units[c.0].scope != first {
                            push(
                                i,
                                StructureRule::Smoothness,
                                format!("child {c} scope {:?} differs from {:?}", units[c.0].scope, first),
                            );
                            break;
                        }
                    }
                    if let Some(c) = children.iter().find(|c| units[c.0].is_sum()) {
                        push(i, StructureRule::Alternation, format!("sum child {c} under a sum"));
                    }
                }
                UnitKind::Product { children } => {
                    if children.is_empty() {
                        push(i, StructureRule::EmptyChildren, "product without children".into());
                        continue;
                    }
                    let mut acc = Scope::default();
                    for c in children {
                        let s = &units[c.0].scope;
                        if !acc.is_disjoint(s) {
                            push(i, StructureRule::Decomposability, format!("child {c} overlaps an earlier sibling"));
                            break;
                        }
                        acc.union_with(s);
                    }
                    if let Some(c) = children.iter().find(|c| units[c.0].is_product()) {
                        push(i, StructureRule::Alternation, format!("product child {c} under a product"));
                    }
                }
            }
            if !u.is_input() {
                let mut implied = Scope::default();
                for c in u.children() {
                    implied.union_with(&units[c.0].scope);
                }
                if implied != u.scope {
                    push(
                        i,
                        StructureRule::Scope,
                        format!("stored scope {:?} but children cover {:?}", u.scope, implied),
                    );
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}
