use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};

use super::tree::{DecompositionTree, Node, Pair, Term};
use super::{in_base_frequencies, Mode, SaturationError, TrigPoly, Q};
use crate::spectral::{Frequency, Kind};

/// Splits `l` into `n + m` with every component of `n − m` in `{−1, 0, 1}`.
///
/// The halving formulas act on component magnitudes (signs are restored
/// afterwards); the first even component among `l1`, `l2`, `l3` selects the
/// formula, with a dedicated one for all-odd `l`.
pub fn split_frequency(l: Frequency) -> (Frequency, Frequency) {
    let a = l.0.map(|c| c.abs());
    let half = |x: i32| x / 2;
    let ceil = |x: i32| x - x / 2;
    let n_abs = if a[0] % 2 == 0 {
        [a[0] / 2, half(a[1]), ceil(a[2])]
    } else if a[1] % 2 == 0 {
        [ceil(a[0]), a[1] / 2, half(a[2])]
    } else if a[2] % 2 == 0 {
        [half(a[0]), ceil(a[1]), a[2] / 2]
    } else {
        [ceil(a[0]), half(a[1]), ceil(a[2])]
    };
    let n = Frequency([
        n_abs[0] * l.0[0].signum(),
        n_abs[1] * l.0[1].signum(),
        n_abs[2] * l.0[2].signum(),
    ]);
    (n, l - n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Plan {
    Base,
    Double(Frequency),
    Split(Frequency, Frequency),
}

/// `target`'s frequency part of `Σ c_k S(a_k, b_k)`.
type Solution = Vec<(Q, Mode, Mode)>;

fn modes_at(freq: Frequency) -> Vec<Mode> {
    let mut out = Vec::with_capacity(6);
    for i in 1..=3u8 {
        for kind in [Kind::Cos, Kind::Sin] {
            let m = Mode::new(kind, i, freq);
            if m.canonical().is_some() {
                out.push(m);
            }
        }
    }
    out
}

fn all_even(f: &Frequency) -> bool {
    f.0.iter().all(|c| c % 2 == 0)
}

/// Reusable decomposition engine for all modes inside an ℓ1 ball.
///
/// Levels are assigned per frequency by a shortest-path style closure over
/// the ball: a frequency is reachable at level `j + 1` when a doubling
/// identity or a split `l = n + m` with `n − m ∈ {−1,0,1}^3` uses only
/// frequencies of level `<= j`. Splits are solved exactly over the 36
/// symmetric interactions of the six modes at `n` with the six at `m`.
#[derive(Debug)]
pub struct Decomposer {
    radius: u32,
    levels: BTreeMap<Frequency, u32>,
    plans: BTreeMap<Frequency, Plan>,
    solutions: HashMap<(Frequency, Frequency), Option<BTreeMap<Mode, Solution>>>,
    nodes: BTreeMap<Mode, Node>,
}

impl Decomposer {
    pub fn new(radius: u32) -> Self {
        let mut d = Decomposer {
            radius,
            levels: BTreeMap::new(),
            plans: BTreeMap::new(),
            solutions: HashMap::new(),
            nodes: BTreeMap::new(),
        };
        d.assign_levels();
        d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Level of a frequency, `None` when unreachable inside the ball.
    pub fn frequency_level(&self, f: Frequency) -> Option<u32> {
        self.levels.get(&f.canonical().0).copied()
    }

    fn ball(&self) -> Vec<Frequency> {
        let r = self.radius as i32;
        let mut out = Vec::new();
        for a in 0..=r {
            for b in -r..=r {
                for c in -r..=r {
                    let f = Frequency::new(a, b, c);
                    if f.is_canonical() && f.l1() <= self.radius {
                        out.push(f);
                    }
                }
            }
        }
        out.sort_by_key(|f| (f.l1(), *f));
        out
    }

    fn split_candidates(l: Frequency) -> Vec<(Frequency, Frequency)> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut push = |n: Frequency, m: Frequency| {
            if n.is_zero() || m.is_zero() {
                return;
            }
            let key = if n <= m { (n, m) } else { (m, n) };
            if seen.insert(key) {
                out.push((n, m));
            }
        };
        let (n, m) = split_frequency(l);
        push(n, m);
        let choices: Vec<Vec<i32>> = l
            .0
            .iter()
            .map(|c| if c % 2 == 0 { vec![0] } else { vec![1, -1] })
            .collect();
        for &d0 in &choices[0] {
            for &d1 in &choices[1] {
                for &d2 in &choices[2] {
                    let n = Frequency([(l.0[0] + d0) / 2, (l.0[1] + d1) / 2, (l.0[2] + d2) / 2]);
                    push(n, l - n);
                }
            }
        }
        out
    }

    fn assign_levels(&mut self) {
        let ball = self.ball();
        for f in &ball {
            if in_base_frequencies(f) {
                self.levels.insert(*f, 0);
                self.plans.insert(*f, Plan::Base);
            }
        }
        loop {
            let mut changed = false;
            for &l in &ball {
                if in_base_frequencies(&l) {
                    continue;
                }
                let mut best = self.levels.get(&l).copied().unwrap_or(u32::MAX);
                let mut plan = None;
                if all_even(&l) {
                    let half = Frequency(l.0.map(|c| c / 2));
                    if let Some(&lh) = self.levels.get(&half) {
                        if lh + 1 < best {
                            best = lh + 1;
                            plan = Some(Plan::Double(half));
                        }
                    }
                } else {
                    for (n, m) in Self::split_candidates(l) {
                        let lv = [n, m, n - m].map(|f| self.levels.get(&f.canonical().0).copied());
                        let Some(worst) = lv.iter().try_fold(0u32, |acc, x| x.map(|x| acc.max(x))) else {
                            continue;
                        };
                        if worst + 1 < best && self.solve_split(l, n, m).is_some() {
                            best = worst + 1;
                            plan = Some(Plan::Split(n, m));
                        }
                    }
                }
                if let Some(p) = plan {
                    self.levels.insert(l, best);
                    self.plans.insert(l, p);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Exact coefficients `c_k` with `l`-part of `Σ c_k S(a_k, b_k)` equal to
    /// each target mode at `l`, or `None` if some target is out of reach.
    fn solve_split(&mut self, l: Frequency, n: Frequency, m: Frequency) -> Option<&BTreeMap<Mode, Solution>> {
        if !self.solutions.contains_key(&(n, m)) {
            let sol = solve_split_exact(l, n, m);
            self.solutions.insert((n, m), sol);
        }
        self.solutions[&(n, m)].as_ref()
    }

    /// Tree for `mode`, which may have any sign pattern in its frequency.
    pub fn decompose(&mut self, mode: Mode) -> Result<DecompositionTree, SaturationError> {
        mode.check()?;
        let (canon, sign) = mode.canonical().ok_or(SaturationError::ZeroMode(mode))?;
        if canon.freq.l1() > self.radius {
            return Err(SaturationError::Stuck(mode));
        }
        let level = self.build(canon)?;
        let root = if mode != canon || canon.in_base_space() {
            let node = Node {
                target: mode,
                eta: vec![Term::new(Q::from_integer(sign), canon)],
                pairs: Vec::new(),
                level,
            };
            self.nodes.insert(mode, node);
            mode
        } else {
            canon
        };
        self.extract(root)
    }

    /// Tree for `(kind, i, 2n)` built from the doubling identities at `n`.
    pub fn double(&mut self, kind: Kind, i: u8, n: Frequency) -> Result<DecompositionTree, SaturationError> {
        if n.is_zero() {
            return Err(SaturationError::Degenerate);
        }
        let target = Mode::new(kind, i, n + n);
        target.check()?;
        let (canon_n, flipped) = n.canonical();
        let (target_canon, sign) = target.canonical().ok_or(SaturationError::ZeroMode(target))?;
        for m in modes_at(canon_n) {
            self.build(m)?;
        }
        let mut node = double_node(kind, i, canon_n);
        node.level = self.level_of(&node);
        let root = if flipped {
            // target at -2n: reuse the canonical node through a sign
            let level = node.level;
            self.nodes.insert(target_canon, node);
            let wrapper = Node {
                target,
                eta: vec![Term::new(Q::from_integer(sign), target_canon)],
                pairs: Vec::new(),
                level,
            };
            self.nodes.insert(target, wrapper);
            target
        } else {
            self.nodes.insert(target, node);
            target
        };
        self.extract(root)
    }

    fn extract(&self, root: Mode) -> Result<DecompositionTree, SaturationError> {
        let mut keep = BTreeMap::new();
        let mut stack = vec![root];
        while let Some(m) = stack.pop() {
            if keep.contains_key(&m) {
                continue;
            }
            let node = match self.nodes.get(&m) {
                Some(n) => n,
                None if m.in_base_space() => continue,
                None => return Err(SaturationError::Stuck(m)),
            };
            for r in node.references() {
                if !r.in_base_space() && *r != m {
                    stack.push(*r);
                }
            }
            keep.insert(m, node.clone());
        }
        DecompositionTree::from_nodes(root, keep)
    }

    fn level_of(&self, node: &Node) -> u32 {
        let child = node
            .references()
            .map(|r| if r.in_base_space() { 0 } else { self.nodes[r].level })
            .max()
            .unwrap_or(0);
        if node.pairs.is_empty() {
            child
        } else {
            child + 1
        }
    }

    /// Ensures a node exists for canonical `mode` and returns its level.
    fn build(&mut self, mode: Mode) -> Result<u32, SaturationError> {
        if mode.in_base_space() {
            return Ok(0);
        }
        if let Some(n) = self.nodes.get(&mode) {
            return Ok(n.level);
        }
        let plan = *self.plans.get(&mode.freq).ok_or(SaturationError::Stuck(mode))?;
        let mut node = match plan {
            Plan::Base => unreachable!("base frequencies have no nodes"),
            Plan::Double(half) => {
                for m in modes_at(half) {
                    self.build(m)?;
                }
                double_node(mode.kind, mode.i, half)
            }
            Plan::Split(n, m) => {
                let sol = self
                    .solve_split(mode.freq, n, m)
                    .and_then(|s| s.get(&mode))
                    .cloned()
                    .ok_or(SaturationError::Stuck(mode))?;
                let node = split_node(mode, n - m, &sol)?;
                for r in node.references().copied().collect::<Vec<_>>() {
                    self.build(r)?;
                }
                node
            }
        };
        node.level = self.level_of(&node);
        self.nodes.insert(mode, node.clone());
        Ok(node.level)
    }
}

fn term(c: i64, mode: Mode) -> Term {
    Term::new(Q::from_integer(c), mode)
}

/// Doubling node for `(kind, i, 2n)` with canonical `n ≠ 0`.
///
/// For a constant vector `d` with `σ = d·n ≠ 0`, `(dA·∇)(dA) = σ d (A²/2)'`, so
/// `d s_{2n} = −(2/σ) Q(d c_n) = (2/σ) Q(d s_n)` and
/// `d c_{2n} = −(1/σ) Q(d(s_n − c_n)) = (1/σ) Q(d(s_n + c_n))`,
/// with `Q(v) = (v·∇)v`. When `n_i = 0`, `d = e_p + e_i` for the first nonzero
/// component `p` of `n`, and the `e_p` part is removed with the same identity.
fn double_node(kind: Kind, i: u8, n: Frequency) -> Node {
    let target = Mode::new(kind, i, n + n);
    let c = |j: u8| Mode::cos(j, n);
    let s = |j: u8| Mode::sin(j, n);
    let sigma_i = n.0[i as usize - 1];
    let mut pairs = Vec::new();
    let (dirs, sigma): (Vec<u8>, i32) = if sigma_i != 0 {
        (vec![i], sigma_i)
    } else {
        let p = n.0.iter().position(|&x| x != 0).expect("n is nonzero") as u8 + 1;
        (vec![p, i], n.0[p as usize - 1])
    };
    let pos = sigma > 0;
    let lam = |num: i64| Q::new(num, sigma.abs() as i64);
    match kind {
        Kind::Sin => {
            let zeta = dirs.iter().map(|&j| term(1, if pos { c(j) } else { s(j) })).collect();
            pairs.push(Pair { lambda: lam(2), zeta });
            if dirs.len() == 2 {
                let p = dirs[0];
                pairs.push(Pair {
                    lambda: lam(2),
                    zeta: vec![term(1, if pos { s(p) } else { c(p) })],
                });
            }
        }
        Kind::Cos => {
            // σ > 0: d(s − c); σ < 0: d(s + c)
            let sc = if pos { -1 } else { 1 };
            let zeta = dirs.iter().flat_map(|&j| [term(1, s(j)), term(sc, c(j))]).collect();
            pairs.push(Pair { lambda: lam(1), zeta });
            if dirs.len() == 2 {
                let p = dirs[0];
                pairs.push(Pair {
                    lambda: lam(1),
                    zeta: vec![term(1, s(p)), term(-sc, c(p))],
                });
            }
        }
    }
    Node {
        target,
        eta: Vec::new(),
        pairs,
        level: 0,
    }
}

/// Realizes `Σ c_k S(a_k, b_k)` with positive weights and collects the
/// remainder at the difference frequency as `eta`.
///
/// `c S(a,b) = −|c| Q(a − sgn(c) b) + |c| (Q(a) + Q(b))`, and for a pure mode
/// `Q(a) = −Q(a′)` where `a′` swaps cos and sin, so the last two terms become
/// `−|c| Q(a′) − |c| Q(b′)`.
fn split_node(target: Mode, diff: Frequency, sol: &Solution) -> Result<Node, SaturationError> {
    let mut pairs = Vec::new();
    for &(c, a, b) in sol {
        let lambda = c.abs();
        let sgn = if c.is_negative() { -1 } else { 1 };
        pairs.push(Pair {
            lambda,
            zeta: vec![term(1, a), term(-sgn, b)],
        });
        for x in [a, b] {
            if x.freq.0[x.comp()] != 0 {
                pairs.push(Pair {
                    lambda,
                    zeta: vec![term(1, x.conjugate())],
                });
            }
        }
    }
    // eta = target + Σ λ Q(ζ)
    let mut eta = TrigPoly::mode(target);
    for p in &pairs {
        let mut z = TrigPoly::zero();
        for t in &p.zeta {
            z.add_term(t.coef, t.mode);
        }
        eta.add_scaled(p.lambda, &TrigPoly::quadratic(&z));
    }
    let diff = diff.canonical().0;
    if eta.frequencies().any(|f| f != diff) {
        return Err(SaturationError::Stuck(target));
    }
    Ok(Node {
        target,
        eta: eta.terms().map(|(m, c)| Term::new(*c, *m)).collect(),
        pairs,
        level: 0,
    })
}

fn solve_split_exact(l: Frequency, n: Frequency, m: Frequency) -> Option<BTreeMap<Mode, Solution>> {
    let (cn, cm) = (n.canonical().0, m.canonical().0);
    let rows = modes_at(l);
    let mut gens = Vec::new();
    for a in modes_at(cn) {
        for b in modes_at(cm) {
            let s = TrigPoly::symmetric(&TrigPoly::mode(a), &TrigPoly::mode(b));
            let col: Vec<Q> = rows.iter().map(|r| s.coefficient(r)).collect();
            gens.push((a, b, col));
        }
    }
    let mut out = BTreeMap::new();
    for (r, target) in rows.iter().enumerate() {
        // a single interaction hitting only the target row is preferred
        let single = gens.iter().find(|(_, _, col)| {
            !col[r].is_zero() && col.iter().enumerate().all(|(k, v)| k == r || v.is_zero())
        });
        let sol = match single {
            Some((a, b, col)) => vec![(Q::one() / col[r], *a, *b)],
            None => {
                let cols: Vec<&[Q]> = gens.iter().map(|g| g.2.as_slice()).collect();
                let rhs: Vec<Q> = (0..rows.len()).map(|k| if k == r { Q::one() } else { Q::zero() }).collect();
                let x = solve_linear(&cols, &rhs)?;
                x.into_iter()
                    .zip(&gens)
                    .filter(|(c, _)| !c.is_zero())
                    .map(|(c, (a, b, _))| (c, *a, *b))
                    .collect()
            }
        };
        out.insert(*target, sol);
    }
    Some(out)
}

/// Exact particular solution of `Σ_k x_k cols[k] = rhs` (free variables zero).
fn solve_linear(cols: &[&[Q]], rhs: &[Q]) -> Option<Vec<Q>> {
    let rows = rhs.len();
    let ncols = cols.len();
    let mut a: Vec<Vec<Q>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Q> = cols.iter().map(|c| c[r]).collect();
            row.push(rhs[r]);
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut pr = 0;
    for c in 0..ncols {
        if pr == rows {
            break;
        }
        let Some(p) = (pr..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(pr, p);
        let inv = Q::one() / a[pr][c];
        for v in a[pr].iter_mut() {
            *v *= inv;
        }
        for r in 0..rows {
            if r != pr && !a[r][c].is_zero() {
                let f = a[r][c];
                for k in 0..=ncols {
                    let sub = f * a[pr][k];
                    a[r][k] -= sub;
                }
            }
        }
        pivots.push(c);
        pr += 1;
    }
    if a[pr..].iter().any(|row| !row[ncols].is_zero()) {
        return None;
    }
    let mut x = vec![Q::zero(); ncols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = a[r][ncols];
    }
    Some(x)
}

/// Decomposition of an arbitrary mode; modes already in `E` become leaves.
pub fn decompose_mode(kind: Kind, i: u8, l: Frequency) -> Result<DecompositionTree, SaturationError> {
    Decomposer::new(l.l1().max(1)).decompose(Mode::new(kind, i, l))
}

/// Tree for `(kind, i, 2n)` from the doubling identities.
pub fn double_frequency(kind: Kind, i: u8, n: Frequency) -> Result<DecompositionTree, SaturationError> {
    Decomposer::new((2 * n.l1()).max(1)).double(kind, i, n)
}
