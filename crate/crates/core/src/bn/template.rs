//! Tree-form Bayesian network template.
//!
//! A model lowers into a tree whose interior nodes are plates and whose
//! leaves are random variables. The root is the predefined TOPLEVEL plate
//! of size 1. Conditional dependencies are stored on each random-variable
//! node. Sizes stay symbolic (deterministic expressions over the model
//! parameters, or unknown-size symbols introduced by `?`) until runtime
//! metadata is bound.

use serde::Serialize;

use crate::dsl::ast::{BinOp, UnaryOp};

pub type PlateId = usize;
pub type RvId = usize;
/// One symbol per `?` occurrence in the source.
pub type SymbolId = usize;

pub const TOPLEVEL: PlateId = 0;

/// A deterministic expression over model parameters, evaluated at bind time.
#[derive(Debug, Clone, PartialEq)]
pub enum DetExpr {
    LitLong(i64),
    LitDouble(f64),
    Param(String),
    Unary(UnaryOp, Box<DetExpr>),
    Binary(BinOp, Box<DetExpr>, Box<DetExpr>),
}

impl DetExpr {
    pub fn eval(&self, params: &std::collections::BTreeMap<String, f64>) -> Option<f64> {
        Some(match self {
            DetExpr::LitLong(v) => *v as f64,
            DetExpr::LitDouble(v) => *v,
            DetExpr::Param(name) => *params.get(name)?,
            DetExpr::Unary(op, e) => {
                let v = e.eval(params)?;
                match op {
                    UnaryOp::Plus => v,
                    UnaryOp::Neg => -v,
                }
            }
            DetExpr::Binary(op, l, r) => {
                let l = l.eval(params)?;
                let r = r.eval(params)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                }
            }
        })
    }
}

/// Size of one repetition of a plate.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeSpec {
    /// TOPLEVEL, or a builder-supplied uniform size.
    Fixed(u64),
    /// Builder-supplied per-repetition sizes.
    Ragged(Vec<u64>),
    /// `lo until hi` (half-open) or `lo to hi` (inclusive).
    Range {
        lo: DetExpr,
        hi: DetExpr,
        inclusive: bool,
    },
    /// `?`: resolved from an observation or an explicit override.
    Unknown(SymbolId),
}

#[derive(Debug, Clone)]
pub struct PlateNode {
    pub parent: Option<PlateId>,
    pub size: SizeSpec,
    pub child_plates: Vec<PlateId>,
    pub child_rvs: Vec<RvId>,
}

/// Dimension of a Dirichlet variable.
#[derive(Debug, Clone, PartialEq)]
pub enum DimSpec {
    Expr(DetExpr),
    Fixed(usize),
}

/// Prior of a Dirichlet variable.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// Symmetric prior with every pseudo-count equal to `concentration`.
    Symmetric {
        concentration: DetExpr,
        dim: DimSpec,
    },
    /// Explicit pseudo-count vector (programmatic construction only).
    Explicit(Vec<f64>),
}

/// How a categorical variable depends on its probability-vector parent(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParentRef {
    /// The parent instance is determined by plate position alone.
    Direct { rv: RvId },
    /// `component(selector)`: the innermost axis of `component` is indexed
    /// by the value of `selector`; outer axes are matched by plate position.
    Mixture { component: RvId, selector: RvId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Dirichlet { prior: PriorSpec },
    Categorical { parent: ParentRef },
}

#[derive(Debug, Clone)]
pub struct RvNode {
    /// Internal name (`r1`, `r2`, ... in creation order), independent of the
    /// identifiers a variable may be bound to.
    pub internal_name: String,
    /// Innermost plate containing this variable.
    pub plate: PlateId,
    pub dist: DistSpec,
    /// Set when runtime metadata is bound.
    pub observed: bool,
}

impl RvNode {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self.dist, DistSpec::Dirichlet { .. })
    }

    pub fn parent_ref(&self) -> Option<ParentRef> {
        match &self.dist {
            DistSpec::Dirichlet { .. } => None,
            DistSpec::Categorical { parent } => Some(*parent),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlateTree {
    plates: Vec<PlateNode>,
    rvs: Vec<RvNode>,
    pub n_symbols: usize,
}

impl Default for PlateTree {
    fn default() -> Self {
        Self::new()
    }
}

impl PlateTree {
    pub fn new() -> Self {
        Self {
            plates: vec![PlateNode {
                parent: None,
                size: SizeSpec::Fixed(1),
                child_plates: Vec::new(),
                child_rvs: Vec::new(),
            }],
            rvs: Vec::new(),
            n_symbols: 0,
        }
    }

    pub fn add_plate(&mut self, parent: PlateId, size: SizeSpec) -> PlateId {
        let id = self.plates.len();
        self.plates.push(PlateNode {
            parent: Some(parent),
            size,
            child_plates: Vec::new(),
            child_rvs: Vec::new(),
        });
        self.plates[parent].child_plates.push(id);
        id
    }

    pub fn fresh_symbol(&mut self) -> SymbolId {
        let s = self.n_symbols;
        self.n_symbols += 1;
        s
    }

    pub fn add_rv(&mut self, plate: PlateId, dist: DistSpec) -> RvId {
        let id = self.rvs.len();
        self.rvs.push(RvNode {
            internal_name: format!("r{}", id + 1),
            plate,
            dist,
            observed: false,
        });
        self.plates[plate].child_rvs.push(id);
        id
    }

    pub fn plate(&self, id: PlateId) -> &PlateNode {
        &self.plates[id]
    }

    pub fn rv(&self, id: RvId) -> &RvNode {
        &self.rvs[id]
    }

    pub fn rv_mut(&mut self, id: RvId) -> &mut RvNode {
        &mut self.rvs[id]
    }

    pub fn n_plates(&self) -> usize {
        self.plates.len()
    }

    pub fn n_rvs(&self) -> usize {
        self.rvs.len()
    }

    pub fn rv_ids(&self) -> impl Iterator<Item = RvId> {
        0..self.rvs.len()
    }

    pub fn plate_ids(&self) -> impl Iterator<Item = PlateId> {
        0..self.plates.len()
    }

    /// Chain of plates from TOPLEVEL down to (and including) `plate`.
    pub fn chain(&self, plate: PlateId) -> Vec<PlateId> {
        let mut chain = vec![plate];
        let mut cur = plate;
        while let Some(p) = self.plates[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// Plate axes of a variable: the chain of its innermost plate,
    /// excluding TOPLEVEL, outermost first.
    pub fn axes(&self, rv: RvId) -> Vec<PlateId> {
        self.chain(self.rvs[rv].plate)
            .into_iter()
            .filter(|&p| p != TOPLEVEL)
            .collect()
    }

    /// Is `p` on the ancestor chain of `ctx` (inclusive)?
    pub fn on_chain(&self, p: PlateId, ctx: PlateId) -> bool {
        let mut cur = ctx;
        loop {
            if cur == p {
                return true;
            }
            match self.plates[cur].parent {
                Some(up) => cur = up,
                None => return false,
            }
        }
    }
}

/// Extract the plate-tree template from a type-checked model. The checker
/// materializes the tree while resolving references, so this is a plain
/// projection.
pub fn build_template(model: &crate::dsl::TypedModel) -> PlateTree {
    model.tree.clone()
}
