use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::poly::to_f64;
use super::{Mode, SaturationError, TrigPoly, Q};
use crate::spectral::{Rank, SpectralField};

/// `coef * value(mode)`, where `mode` is either a basis element of `E` (its
/// value is the pure mode) or the target of another node in the same tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    #[serde(with = "ratio")]
    pub coef: Q,
    pub mode: Mode,
}

impl Term {
    pub fn new(coef: Q, mode: Mode) -> Term {
        Term { coef, mode }
    }
}

/// One quadratic interaction `λ (ζ·∇)ζ` with `λ > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    #[serde(with = "ratio")]
    pub lambda: Q,
    pub zeta: Vec<Term>,
}

/// `target = Σ eta − Σ λ_j (ζ_j·∇)ζ_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub target: Mode,
    pub eta: Vec<Term>,
    pub pairs: Vec<Pair>,
    pub level: u32,
}

impl Node {
    pub fn references(&self) -> impl Iterator<Item = &Mode> {
        self.eta
            .iter()
            .map(|t| &t.mode)
            .chain(self.pairs.iter().flat_map(|p| p.zeta.iter().map(|t| &t.mode)))
    }
}

/// Exact expression of a target mode through nested quadratic interactions of
/// `E`-elements. Shared subtrees are stored once in a node table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct DecompositionTree {
    root: Mode,
    nodes: BTreeMap<Mode, Node>,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    root: Mode,
    nodes: Vec<Node>,
}

impl From<DecompositionTree> for TreeRepr {
    fn from(t: DecompositionTree) -> Self {
        TreeRepr {
            root: t.root,
            nodes: t.nodes.into_values().collect(),
        }
    }
}

impl TryFrom<TreeRepr> for DecompositionTree {
    type Error = SaturationError;
    fn try_from(r: TreeRepr) -> Result<Self, SaturationError> {
        let nodes = r.nodes.into_iter().map(|n| (n.target, n)).collect();
        DecompositionTree::from_nodes(r.root, nodes)
    }
}

impl DecompositionTree {
    /// Checks that every non-basis reference resolves to a node of lower level.
    pub fn from_nodes(root: Mode, nodes: BTreeMap<Mode, Node>) -> Result<Self, SaturationError> {
        if !nodes.contains_key(&root) {
            return Err(SaturationError::Malformed(format!("missing root node {root}")));
        }
        for node in nodes.values() {
            node.target.check()?;
            for p in &node.pairs {
                if !p.lambda.is_positive() {
                    return Err(SaturationError::Malformed(format!(
                        "non-positive weight in node {}",
                        node.target
                    )));
                }
            }
            for r in node.references() {
                r.check()?;
                if r.in_base_space() {
                    continue;
                }
                let child = nodes.get(r).ok_or_else(|| {
                    SaturationError::Malformed(format!("unresolved reference {r} in {}", node.target))
                })?;
                let bound = if node.pairs.is_empty() { node.level } else { node.level.saturating_sub(1) };
                if child.level > bound || (child.target == node.target) {
                    return Err(SaturationError::Malformed(format!(
                        "reference {r} does not lie below {}",
                        node.target
                    )));
                }
            }
        }
        Ok(DecompositionTree { root, nodes })
    }

    pub fn root(&self) -> &Mode {
        &self.root
    }

    pub fn root_node(&self) -> &Node {
        &self.nodes[&self.root]
    }

    pub fn level(&self) -> u32 {
        self.root_node().level
    }

    pub fn node(&self, mode: &Mode) -> Option<&Node> {
        self.nodes.get(mode)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Every coefficient and weight in the tree.
    pub fn coefficients(&self) -> impl Iterator<Item = Q> + '_ {
        self.nodes.values().flat_map(|n| {
            n.eta
                .iter()
                .map(|t| t.coef)
                .chain(n.pairs.iter().flat_map(|p| std::iter::once(p.lambda).chain(p.zeta.iter().map(|t| t.coef))))
        })
    }

    /// Smallest resolution at which dealiased evaluation is exact.
    pub fn required_resolution(&self) -> usize {
        let mut need = 0u32;
        for n in self.nodes.values() {
            need = need.max(n.target.freq.max_abs());
            for r in n.references() {
                need = need.max(r.freq.max_abs());
            }
            for p in &n.pairs {
                for t in &p.zeta {
                    need = need.max(2 * t.mode.freq.max_abs());
                }
            }
        }
        need as usize
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trees are always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, SaturationError> {
        serde_json::from_str(text).map_err(|e| SaturationError::Malformed(e.to_string()))
    }
}

impl fmt::Display for DecompositionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target {} (level {})", self.root, self.level())?;
        let mut order: Vec<&Node> = self.nodes.values().collect();
        order.sort_by_key(|n| (std::cmp::Reverse(n.level), n.target));
        for n in order {
            write!(f, "  [{}] {} =", n.level, n.target)?;
            let mut first = true;
            for t in &n.eta {
                write_term(f, &t.coef, &t.mode.to_string(), first)?;
                first = false;
            }
            for p in &n.pairs {
                let zeta: Vec<String> = p.zeta.iter().map(|t| format!("{}·{}", t.coef, t.mode)).collect();
                write_term(f, &-p.lambda, &format!("Q({})", zeta.join(" + ")), first)?;
                first = false;
            }
            if first {
                write!(f, " 0")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, c: &Q, what: &str, first: bool) -> fmt::Result {
    match (first, c.is_negative()) {
        (true, _) => write!(f, " {c}·{what}"),
        (false, true) => write!(f, " - {}·{what}", -c),
        (false, false) => write!(f, " + {c}·{what}"),
    }
}

/// Memoizing numeric evaluator; one instance may be shared across many trees.
#[derive(Debug)]
pub struct TreeEvaluator {
    resolution: usize,
    cache: HashMap<Mode, SpectralField>,
}

impl TreeEvaluator {
    pub fn new(resolution: usize) -> Self {
        TreeEvaluator {
            resolution,
            cache: HashMap::new(),
        }
    }

    pub fn evaluate(&mut self, tree: &DecompositionTree) -> Result<SpectralField, SaturationError> {
        let required = tree.required_resolution();
        if self.resolution < required {
            return Err(SaturationError::ResolutionTooSmall {
                required,
                given: self.resolution,
            });
        }
        self.node_value(tree, tree.root_node())
    }

    fn value(&mut self, tree: &DecompositionTree, mode: Mode) -> Result<SpectralField, SaturationError> {
        if mode.in_base_space() {
            return Ok(mode.field(self.resolution)?);
        }
        if let Some(v) = self.cache.get(&mode) {
            return Ok(v.clone());
        }
        let node = tree
            .nodes
            .get(&mode)
            .ok_or_else(|| SaturationError::Malformed(format!("unresolved reference {mode}")))?;
        let out = self.node_value(tree, node)?;
        self.cache.insert(mode, out.clone());
        Ok(out)
    }

    fn node_value(&mut self, tree: &DecompositionTree, node: &Node) -> Result<SpectralField, SaturationError> {
        let mut out = self.combination(tree, &node.eta)?;
        for p in &node.pairs {
            let zeta = self.combination(tree, &p.zeta)?;
            // the product is exact on the smallest grid holding twice the drift band
            let band = p.zeta.iter().map(|t| t.mode.freq.max_abs()).max().unwrap_or(0);
            let small = (2 * band as usize).clamp(1, self.resolution);
            let z = zeta.resample(small);
            let q = SpectralField::advect(&z, &z)?.resample(self.resolution);
            out.axpy(-to_f64(&p.lambda), &q)?;
        }
        Ok(out)
    }

    fn combination(&mut self, tree: &DecompositionTree, terms: &[Term]) -> Result<SpectralField, SaturationError> {
        let mut out = SpectralField::zeros(Rank::Vector, self.resolution);
        for t in terms {
            let v = self.value(tree, t.mode)?;
            out.axpy(to_f64(&t.coef), &v)?;
        }
        Ok(out)
    }
}

/// Numeric value `η − Σ λ_j (ζ_j·∇)ζ_j` of the tree with dealiased products.
pub fn evaluate_tree(tree: &DecompositionTree, resolution: usize) -> Result<SpectralField, SaturationError> {
    TreeEvaluator::new(resolution).evaluate(tree)
}

/// Exact symbolic expansion of the tree into a trigonometric polynomial.
pub fn expand_tree(tree: &DecompositionTree) -> Result<TrigPoly, SaturationError> {
    fn value(
        tree: &DecompositionTree,
        mode: Mode,
        memo: &mut HashMap<Mode, TrigPoly>,
    ) -> Result<TrigPoly, SaturationError> {
        if mode.in_base_space() {
            return Ok(TrigPoly::mode(mode));
        }
        if let Some(p) = memo.get(&mode) {
            return Ok(p.clone());
        }
        let node = tree
            .nodes
            .get(&mode)
            .ok_or_else(|| SaturationError::Malformed(format!("unresolved reference {mode}")))?;
        let out = node_value(tree, node, memo)?;
        memo.insert(mode, out.clone());
        Ok(out)
    }
    fn node_value(
        tree: &DecompositionTree,
        node: &Node,
        memo: &mut HashMap<Mode, TrigPoly>,
    ) -> Result<TrigPoly, SaturationError> {
        let mut out = TrigPoly::zero();
        for t in &node.eta {
            out.add_scaled(t.coef, &value(tree, t.mode, memo)?);
        }
        for p in &node.pairs {
            let mut zeta = TrigPoly::zero();
            for t in &p.zeta {
                zeta.add_scaled(t.coef, &value(tree, t.mode, memo)?);
            }
            out.add_scaled(-p.lambda, &TrigPoly::quadratic(&zeta));
        }
        Ok(out)
    }
    node_value(tree, tree.root_node(), &mut HashMap::new())
}

/// Rationals as `"p/q"` strings.
mod ratio {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Q;

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", q.numer(), q.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        text.parse::<Q>().map_err(serde::de::Error::custom)
    }
}
