//! Type checker: classifies every expression of a parsed model into its
//! evaluation category and lowers the model into a plate-tree template.
//!
//! Expressions evaluate to one of four categories, mirroring how the
//! network is built by recursive descent:
//!
//! * deterministic — literals, parameters and their arithmetic,
//! * rv-node — a single random-variable instance in the current plate
//!   context,
//! * rv-collection — all instances of a variable viewed from an outer
//!   plate,
//! * plate — a plate descriptor (`lo until hi`, `lo to hi`, `?`).
//!
//! A reference to a collection is resolved against the current plate
//! context: axes that are ancestors of the context are matched by plate
//! position, leaving the remaining inner axes to be indexed by categorical
//! selectors, as in `phi(z)`. Checking continues past the first error so
//! that one pass reports every violation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::bn::template::{
    DetExpr, DimSpec, DistSpec, ParentRef, PlateId, PlateTree, PriorSpec, SizeSpec, TOPLEVEL,
};
use crate::bn::RvId;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Deterministic,
    RvNode,
    RvCollection,
    Plate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnboundIdentifier,
    NonConjugateArgument,
    ArityMismatch,
    PlateMismatch,
    ForwardReference,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TypeErrorKind::UnboundIdentifier => "UnboundIdentifier",
            TypeErrorKind::NonConjugateArgument => "NonConjugateArgument",
            TypeErrorKind::ArityMismatch => "ArityMismatch",
            TypeErrorKind::PlateMismatch => "PlateMismatch",
            TypeErrorKind::ForwardReference => "ForwardReference",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeError {
    pub location: Loc,
    pub kind: TypeErrorKind,
    pub message: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.location, self.kind, self.message)
    }
}

/// What a top-level identifier is bound to, for runtime lookups
/// (observations, posterior queries, plate-size overrides).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Rv(RvId),
    UnknownPlate(crate::bn::template::SymbolId),
    KnownPlate,
    Det,
}

/// A type-checked model: the AST plus per-expression categories and the
/// lowered plate-tree template.
#[derive(Debug, Clone)]
pub struct TypedModel {
    pub ast: ModelAst,
    pub tree: PlateTree,
    /// Indexed by `ExprId`; `None` where checking was poisoned by an error.
    pub categories: Vec<Option<Category>>,
    pub bindings: BTreeMap<Ident, Binding>,
    pub param_kinds: BTreeMap<Ident, ScalarKind>,
}

/// Type-check a parsed model. On failure every detected violation is
/// reported with its own source location.
pub fn check_types(ast: &ModelAst) -> Result<TypedModel, Vec<TypeError>> {
    let mut ck = Checker {
        tree: PlateTree::new(),
        categories: vec![None; ast.expr_count],
        errors: Vec::new(),
        scopes: vec![HashMap::new()],
        param_kinds: BTreeMap::new(),
        top_names: ast.stmts.iter().map(|s| s.name.clone()).collect(),
    };
    for p in &ast.params {
        ck.param_kinds.insert(p.name.clone(), p.kind);
    }
    let mut bindings = BTreeMap::new();
    for stmt in &ast.stmts {
        let value = ck.eval(&stmt.value, TOPLEVEL);
        if let Some(b) = ck.binding_of(&value) {
            bindings.insert(stmt.name.clone(), b);
        }
        ck.scopes[0].insert(stmt.name.clone(), value);
    }
    if ck.errors.is_empty() {
        Ok(TypedModel {
            ast: ast.clone(),
            tree: ck.tree,
            categories: ck.categories,
            bindings,
            param_kinds: ck.param_kinds,
        })
    } else {
        Err(ck.errors)
    }
}

#[derive(Debug, Clone)]
enum Value {
    Det { expr: DetExpr, kind: ScalarKind },
    PlateDesc(SizeSpec),
    /// A variable with axes `axes(rv)[free_from..]` still free; when
    /// `free_from == axes.len()` this is a single instance.
    Rv { rv: RvId, free_from: usize },
    /// Binder introduced by mapping over a plate expression; the loop index
    /// has no value in the model fragment.
    PlateIndex,
    Poison,
}

struct Checker {
    tree: PlateTree,
    categories: Vec<Option<Category>>,
    errors: Vec<TypeError>,
    scopes: Vec<HashMap<Ident, Value>>,
    param_kinds: BTreeMap<Ident, ScalarKind>,
    top_names: HashSet<Ident>,
}

impl Checker {
    fn error(&mut self, loc: Loc, kind: TypeErrorKind, message: impl Into<String>) -> Value {
        self.errors.push(TypeError {
            location: loc,
            kind,
            message: message.into(),
        });
        Value::Poison
    }

    fn binding_of(&self, v: &Value) -> Option<Binding> {
        match v {
            Value::Rv { rv, .. } => Some(Binding::Rv(*rv)),
            Value::PlateDesc(SizeSpec::Unknown(s)) => Some(Binding::UnknownPlate(*s)),
            Value::PlateDesc(_) => Some(Binding::KnownPlate),
            Value::Det { .. } => Some(Binding::Det),
            _ => None,
        }
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        for scope in self.scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return Some(v.clone());
            }
        }
        self.param_kinds.get(name).map(|&kind| Value::Det {
            expr: DetExpr::Param(name.to_string()),
            kind,
        })
    }

    fn annotate(&mut self, id: ExprId, v: &Value) {
        self.categories[id] = match v {
            Value::Det { .. } => Some(Category::Deterministic),
            Value::PlateDesc(_) => Some(Category::Plate),
            Value::Rv { rv, free_from } => {
                if *free_from >= self.tree.axes(*rv).len() {
                    Some(Category::RvNode)
                } else {
                    Some(Category::RvCollection)
                }
            }
            Value::PlateIndex | Value::Poison => None,
        };
    }

    /// Number of still-free axes of an rv value in plate context `ctx`.
    /// Axes that lie on the ancestor chain of `ctx` are matched by plate
    /// position; matched axes always form a prefix of the free axes.
    fn unmatched_axes(&self, rv: RvId, free_from: usize, ctx: PlateId) -> usize {
        self.tree.axes(rv)[free_from.min(self.tree.axes(rv).len())..]
            .iter()
            .filter(|&&p| !self.tree.on_chain(p, ctx))
            .count()
    }

    fn eval(&mut self, expr: &Expr, ctx: PlateId) -> Value {
        let v = self.eval_inner(expr, ctx);
        self.annotate(expr.id, &v);
        v
    }

    fn eval_det(&mut self, expr: &Expr, ctx: PlateId, what: &str) -> Option<(DetExpr, ScalarKind)> {
        match self.eval(expr, ctx) {
            Value::Det { expr, kind } => Some((expr, kind)),
            Value::Poison => None,
            _ => {
                self.error(
                    expr.loc,
                    TypeErrorKind::NonConjugateArgument,
                    format!("{what} must be a deterministic expression"),
                );
                None
            }
        }
    }

    fn eval_inner(&mut self, expr: &Expr, ctx: PlateId) -> Value {
        match &expr.kind {
            ExprKind::IntLit(v) => Value::Det {
                expr: DetExpr::LitLong(*v),
                kind: ScalarKind::Long,
            },
            ExprKind::FloatLit(v) => Value::Det {
                expr: DetExpr::LitDouble(*v),
                kind: ScalarKind::Double,
            },
            ExprKind::Var(name) => match self.lookup(name) {
                Some(Value::PlateIndex) => self.error(
                    expr.loc,
                    TypeErrorKind::NonConjugateArgument,
                    format!("the plate index `{name}` has no value in a model; bind it as `_`"),
                ),
                Some(v) => v,
                None => {
                    let kind = if self.top_names.contains(name) {
                        TypeErrorKind::ForwardReference
                    } else {
                        TypeErrorKind::UnboundIdentifier
                    };
                    let msg = match kind {
                        TypeErrorKind::ForwardReference => {
                            format!("`{name}` is defined later; definitions cannot look ahead")
                        }
                        _ => format!("`{name}` is not a parameter or a previous binding"),
                    };
                    self.error(expr.loc, kind, msg)
                }
            },
            ExprKind::Unary(op, operand) => {
                match self.eval_det(operand, ctx, "the operand of a sign") {
                    Some((e, kind)) => Value::Det {
                        expr: DetExpr::Unary(*op, Box::new(e)),
                        kind,
                    },
                    None => Value::Poison,
                }
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let l = self.eval_det(lhs, ctx, "an arithmetic operand");
                let r = self.eval_det(rhs, ctx, "an arithmetic operand");
                match (l, r) {
                    (Some((le, lk)), Some((re, rk))) => Value::Det {
                        expr: DetExpr::Binary(*op, Box::new(le), Box::new(re)),
                        kind: if lk == ScalarKind::Long && rk == ScalarKind::Long {
                            ScalarKind::Long
                        } else {
                            ScalarKind::Double
                        },
                    },
                    _ => Value::Poison,
                }
            }
            ExprKind::Range { kind, lo, hi } => {
                let l = self.eval_det(lo, ctx, "a plate bound");
                let h = self.eval_det(hi, ctx, "a plate bound");
                match (l, h) {
                    (Some((le, lk)), Some((he, hk))) => {
                        for (k, e) in [(lk, lo), (hk, hi)] {
                            if k != ScalarKind::Long {
                                self.error(
                                    e.loc,
                                    TypeErrorKind::PlateMismatch,
                                    "plate bounds must be of Long kind",
                                );
                                return Value::Poison;
                            }
                        }
                        Value::PlateDesc(SizeSpec::Range {
                            lo: le,
                            hi: he,
                            inclusive: *kind == RangeKind::To,
                        })
                    }
                    _ => Value::Poison,
                }
            }
            ExprKind::UnknownPlate => {
                let s = self.tree.fresh_symbol();
                Value::PlateDesc(SizeSpec::Unknown(s))
            }
            ExprKind::Dirichlet { concentration, dim } => {
                let c = self.eval_det(concentration, ctx, "a Dirichlet concentration");
                let d = self.eval_det(dim, ctx, "a Dirichlet dimension");
                match (c, d) {
                    (Some((ce, _)), Some((de, dk))) => {
                        if dk != ScalarKind::Long {
                            return self.error(
                                dim.loc,
                                TypeErrorKind::NonConjugateArgument,
                                "a Dirichlet dimension must be of Long kind",
                            );
                        }
                        let rv = self.tree.add_rv(
                            ctx,
                            DistSpec::Dirichlet {
                                prior: PriorSpec::Symmetric {
                                    concentration: ce,
                                    dim: DimSpec::Expr(de),
                                },
                            },
                        );
                        let free_from = self.tree.axes(rv).len();
                        Value::Rv { rv, free_from }
                    }
                    _ => Value::Poison,
                }
            }
            ExprKind::Beta { concentration } => {
                match self.eval_det(concentration, ctx, "a Beta concentration") {
                    Some((ce, _)) => {
                        let rv = self.tree.add_rv(
                            ctx,
                            DistSpec::Dirichlet {
                                prior: PriorSpec::Symmetric {
                                    concentration: ce,
                                    dim: DimSpec::Fixed(2),
                                },
                            },
                        );
                        let free_from = self.tree.axes(rv).len();
                        Value::Rv { rv, free_from }
                    }
                    None => Value::Poison,
                }
            }
            ExprKind::Categorical { arg } => match self.resolve_categorical_parent(arg, ctx) {
                Some(parent) => {
                    let rv = self.tree.add_rv(ctx, DistSpec::Categorical { parent });
                    let free_from = self.tree.axes(rv).len();
                    Value::Rv { rv, free_from }
                }
                None => Value::Poison,
            },
            ExprKind::Index { .. } => self.error(
                expr.loc,
                TypeErrorKind::PlateMismatch,
                "an indexed random variable may only appear as the parameter of Categorical",
            ),
            ExprKind::Map {
                receiver,
                binder,
                body,
            } => {
                let recv = self.eval(receiver, ctx);
                match recv {
                    Value::Poison => Value::Poison,
                    Value::Det { .. } | Value::PlateIndex => self.error(
                        receiver.loc,
                        TypeErrorKind::PlateMismatch,
                        "only plates and random-variable collections can be mapped",
                    ),
                    Value::PlateDesc(size) => {
                        let plate = self.tree.add_plate(ctx, size);
                        let element = Value::PlateIndex;
                        self.eval_map_body(expr, binder, element, body, plate)
                    }
                    Value::Rv { rv, free_from } => {
                        let axes = self.tree.axes(rv);
                        if free_from >= axes.len() {
                            return self.error(
                                receiver.loc,
                                TypeErrorKind::PlateMismatch,
                                "cannot map over a single random-variable instance",
                            );
                        }
                        let iter_plate = axes[free_from];
                        let element = Value::Rv {
                            rv,
                            free_from: free_from + 1,
                        };
                        self.eval_map_body(expr, binder, element, body, iter_plate)
                    }
                }
            }
            ExprKind::Block { stmts, tail } => {
                self.scopes.push(HashMap::new());
                for stmt in stmts {
                    let v = self.eval(&stmt.value, ctx);
                    self.scopes
                        .last_mut()
                        .expect("scope stack")
                        .insert(stmt.name.clone(), v);
                }
                let v = self.eval(tail, ctx);
                self.scopes.pop();
                v
            }
        }
    }

    fn eval_map_body(
        &mut self,
        map_expr: &Expr,
        binder: &Option<Ident>,
        element: Value,
        body: &Expr,
        iter_plate: PlateId,
    ) -> Value {
        self.scopes.push(HashMap::new());
        if let Some(name) = binder {
            self.scopes
                .last_mut()
                .expect("scope stack")
                .insert(name.clone(), element);
        }
        let body_v = self.eval(body, iter_plate);
        self.scopes.pop();
        match body_v {
            Value::Poison => Value::Poison,
            Value::Rv { rv, .. } => {
                let axes = self.tree.axes(rv);
                match axes.iter().position(|&p| p == iter_plate) {
                    Some(d) => Value::Rv { rv, free_from: d },
                    None => self.error(
                        body.loc,
                        TypeErrorKind::PlateMismatch,
                        "the body of a map must define random variables inside the plate",
                    ),
                }
            }
            _ => self.error(
                map_expr.loc,
                TypeErrorKind::PlateMismatch,
                "the body of a map must evaluate to random variables",
            ),
        }
    }

    /// Resolve the argument of `Categorical(...)` to a probability-vector
    /// parent in the current context.
    fn resolve_categorical_parent(&mut self, arg: &Expr, ctx: PlateId) -> Option<ParentRef> {
        if let ExprKind::Index { target, args } = &arg.kind {
            let tv = self.eval(target, ctx);
            self.annotate(arg.id, &tv);
            let (rv, free_from) = match tv {
                Value::Rv { rv, free_from } => (rv, free_from),
                Value::Poison => return None,
                _ => {
                    self.error(
                        target.loc,
                        TypeErrorKind::NonConjugateArgument,
                        "only random-variable collections can be indexed",
                    );
                    return None;
                }
            };
            if !self.tree.rv(rv).is_dirichlet() {
                self.error(
                    target.loc,
                    TypeErrorKind::NonConjugateArgument,
                    "a Categorical parameter must be Dirichlet- or Beta-distributed",
                );
                return None;
            }
            let unmatched = self.unmatched_axes(rv, free_from, ctx);
            if unmatched == 0 {
                self.error(
                    arg.loc,
                    TypeErrorKind::ArityMismatch,
                    "index applied to a variable already determined by its plate position",
                );
                return None;
            }
            if unmatched > 1 || args.len() > 1 {
                self.error(
                    arg.loc,
                    TypeErrorKind::ArityMismatch,
                    format!(
                        "{unmatched} plate axes need an index and {} were given; \
                         at most one mixture index is supported",
                        args.len()
                    ),
                );
                return None;
            }
            let sel = self.eval(&args[0], ctx);
            let selector = match sel {
                Value::Rv { rv: srv, free_from: sf } => {
                    if self.unmatched_axes(srv, sf, ctx) > 0 {
                        self.error(
                            args[0].loc,
                            TypeErrorKind::PlateMismatch,
                            "a mixture index must resolve to a single instance in this plate",
                        );
                        return None;
                    }
                    if self.tree.rv(srv).is_dirichlet() {
                        self.error(
                            args[0].loc,
                            TypeErrorKind::NonConjugateArgument,
                            "a mixture index must be a categorical random variable",
                        );
                        return None;
                    }
                    srv
                }
                Value::Poison => return None,
                _ => {
                    self.error(
                        args[0].loc,
                        TypeErrorKind::NonConjugateArgument,
                        "a mixture index must be a categorical random variable",
                    );
                    return None;
                }
            };
            return Some(ParentRef::Mixture {
                component: rv,
                selector,
            });
        }

        let v = self.eval(arg, ctx);
        match v {
            Value::Rv { rv, free_from } => {
                if !self.tree.rv(rv).is_dirichlet() {
                    self.error(
                        arg.loc,
                        TypeErrorKind::NonConjugateArgument,
                        "a Categorical parameter must be Dirichlet- or Beta-distributed",
                    );
                    return None;
                }
                if self.unmatched_axes(rv, free_from, ctx) > 0 {
                    self.error(
                        arg.loc,
                        TypeErrorKind::PlateMismatch,
                        "a collection-valued parameter must be indexed, as in `phi(z)`",
                    );
                    return None;
                }
                Some(ParentRef::Direct { rv })
            }
            Value::Poison => None,
            Value::Det { .. } => {
                self.error(
                    arg.loc,
                    TypeErrorKind::NonConjugateArgument,
                    "a Categorical parameter must be a random variable, not a deterministic value",
                );
                None
            }
            _ => {
                self.error(
                    arg.loc,
                    TypeErrorKind::NonConjugateArgument,
                    "a Categorical parameter must be a random variable",
                );
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    fn check(src: &str) -> Result<TypedModel, Vec<TypeError>> {
        check_types(&parse_model(src).unwrap())
    }

    fn kinds(errs: &[TypeError]) -> Vec<TypeErrorKind> {
        errs.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn categorical_of_deterministic_param_is_nonconjugate() {
        let errs = check("model M(alpha: Double) { val z = ?.map { _ => Categorical(alpha) } }")
            .unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::NonConjugateArgument]);
    }

    #[test]
    fn forward_reference_vs_unbound() {
        let errs = check(
            "model M() {\n  val a = ?.map { _ => Categorical(b) }\n  val b = Beta(1.0)\n}",
        )
        .unwrap_err();
        assert_eq!(errs[0].kind, TypeErrorKind::ForwardReference);
        assert_eq!(errs[0].location.line, 2);

        let errs = check("model M() { val a = Beta(q) }").unwrap_err();
        assert_eq!(errs[0].kind, TypeErrorKind::UnboundIdentifier);
    }

    #[test]
    fn seeded_errors_report_distinct_locations() {
        let errs = check(
            "model M(a: Double) {\n\
             \x20 val u = ?.map { _ => Categorical(a) }\n\
             \x20 val v = Beta(missing)\n\
             \x20 val w = ?.map { _ => Categorical(other) }\n}",
        )
        .unwrap_err();
        assert!(errs.len() >= 3, "{errs:?}");
        let mut locs: Vec<_> = errs.iter().map(|e| e.location).collect();
        locs.dedup();
        assert!(locs.len() >= 3);
    }

    #[test]
    fn unindexed_collection_is_plate_mismatch() {
        let errs = check(
            "model M(b: Double) {\n\
             \x20 val phi = (0 until 2).map { _ => Beta(b) }\n\
             \x20 val x = ?.map { _ => Categorical(phi) }\n}",
        )
        .unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::PlateMismatch]);
    }

    #[test]
    fn index_on_matched_variable_is_arity_mismatch() {
        // pi is unplated; indexing it has nothing left to select.
        let errs = check(
            "model M(a: Double) {\n\
             \x20 val pi = Beta(a)\n\
             \x20 val z = ?.map { _ => Categorical(pi) }\n\
             \x20 val x = z.map { z => Categorical(pi(z)) }\n}",
        )
        .unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::ArityMismatch]);
    }

    #[test]
    fn mixture_index_must_be_categorical() {
        let errs = check(
            "model M(a: Double) {\n\
             \x20 val phi = (0 until 2).map { _ => Beta(a) }\n\
             \x20 val sel = Beta(a)\n\
             \x20 val x = ?.map { _ => Categorical(phi(sel)) }\n}",
        )
        .unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::NonConjugateArgument]);
    }

    #[test]
    fn dirichlet_args_must_be_deterministic() {
        let errs = check(
            "model M(a: Double) {\n\
             \x20 val u = Beta(a)\n\
             \x20 val v = ?.map { _ => Categorical(u) }\n\
             \x20 val w = Beta(v)\n}",
        )
        .unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::NonConjugateArgument]);
    }

    #[test]
    fn plate_bounds_must_be_long() {
        let errs =
            check("model M(a: Double) { val p = (0 until a).map { _ => Beta(1.0) } }").unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::PlateMismatch]);
    }

    #[test]
    fn slda_checks_with_three_level_nesting() {
        let src = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../models/slda.ispk"
        ))
        .unwrap();
        let model = check(&src).unwrap();
        let x = model.tree.n_rvs() - 1;
        assert_eq!(model.tree.axes(x).len(), 3);
        // z sits one plate above x.
        let z = 2;
        assert_eq!(model.tree.axes(z).len(), 2);
        assert!(matches!(
            model.tree.rv(x).dist,
            crate::bn::DistSpec::Categorical {
                parent: ParentRef::Mixture {
                    component: 0,
                    selector: 2
                }
            }
        ));
    }

    #[test]
    fn dcmlda_checks_with_per_document_components() {
        let src = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../models/dcmlda.ispk"
        ))
        .unwrap();
        let model = check(&src).unwrap();
        // theta r1, phi r2 (doc x K), z r3, x r4
        let phi = 1;
        assert_eq!(model.tree.axes(phi).len(), 2);
        let x = 3;
        assert!(matches!(
            model.tree.rv(x).dist,
            crate::bn::DistSpec::Categorical {
                parent: ParentRef::Mixture {
                    component: 1,
                    selector: 2
                }
            }
        ));
        // phi's outer axis (the document plate) is shared with x's chain;
        // only the K axis is indexed.
        let doc_plate = model.tree.axes(phi)[0];
        assert!(model.tree.on_chain(doc_plate, model.tree.rv(x).plate));
    }

    #[test]
    fn block_scoping_and_local_bindings() {
        let model = check(
            "model M(a: Double) { val u = { val c = a + 1.0; Beta(c) } }",
        )
        .unwrap();
        assert_eq!(model.tree.n_rvs(), 1);
        // Locals do not leak to the top level.
        assert!(!model.bindings.contains_key("c"));
    }

    #[test]
    fn plate_index_binder_cannot_be_used() {
        let errs = check("model M() { val p = (0 until 3).map { i => Beta(i) } }").unwrap_err();
        assert_eq!(kinds(&errs), vec![TypeErrorKind::NonConjugateArgument]);
    }
}
