//! Homomorphism search.
//!
//! Source elements are variables, target elements are values, and every
//! source tuple is a constraint requiring its image to be a tuple of the
//! target. Search is depth-first with optional generalized arc consistency
//! maintained at every node. Domains are bitsets; changes are undone from a
//! trail on backtrack.

use std::collections::{BTreeSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::structure::{
    check_guard, for_each_combination, product, PhpInstance, PointedStructure, ProductIndex, Structure,
    DEFAULT_PRODUCT_GUARD,
};
use crate::structure::Homomorphism;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariableOrder {
    /// Smallest current domain first, ties broken by element identifier.
    MostConstrainedFirst,
    /// Source domain order.
    InputOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Propagation {
    /// Plain backtracking: constraints are checked once all their variables are fixed.
    None,
    ArcConsistency,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub variable_order: VariableOrder,
    pub propagation: Propagation,
    pub enumeration_cap: Option<usize>,
    pub product_guard: u64,
    /// Worker threads for the top-level branch split. The reported witness
    /// does not depend on this value.
    pub threads: usize,
    /// Build the product constraints straight from the factors instead of
    /// materializing the product structure first. Verdicts are unchanged.
    pub lazy_product: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variable_order: VariableOrder::MostConstrainedFirst,
            propagation: Propagation::ArcConsistency,
            enumeration_cap: None,
            product_guard: DEFAULT_PRODUCT_GUARD,
            threads: 1,
            lazy_product: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.enumeration_cap == Some(0) {
            return Err(Error::Precondition("enumeration cap must be at least 1".into()));
        }
        if self.product_guard == 0 {
            return Err(Error::Precondition("product guard must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Precondition("thread count must be at least 1".into()));
        }
        Ok(())
    }

    /// Every combination of variable order and propagation, with the other
    /// fields taken from `self`.
    pub fn variants(&self) -> Vec<SolverConfig> {
        let mut out = Vec::new();
        for variable_order in [VariableOrder::MostConstrainedFirst, VariableOrder::InputOrder] {
            for propagation in [Propagation::ArcConsistency, Propagation::None] {
                out.push(SolverConfig { variable_order, propagation, ..self.clone() });
            }
        }
        out
    }
}

/// Lookup tables for one target relation.
struct TargetRelation {
    tuples: Vec<Vec<usize>>,
    members: BTreeSet<Vec<usize>>,
    kind: TableKind,
}

enum TableKind {
    Unary(FixedBitSet),
    Binary {
        succ: Vec<FixedBitSet>,
        pred: Vec<FixedBitSet>,
        loops: FixedBitSet,
    },
    General,
}

impl TargetRelation {
    fn new(target: &Structure, rel: usize, arity: usize) -> Self {
        let n = target.len();
        let tuples: Vec<Vec<usize>> = target.relation(rel).iter().cloned().collect();
        let kind = match arity {
            1 => {
                let mut set = FixedBitSet::with_capacity(n);
                tuples.iter().for_each(|t| set.insert(t[0]));
                TableKind::Unary(set)
            }
            2 => {
                let mut succ = vec![FixedBitSet::with_capacity(n); n];
                let mut pred = vec![FixedBitSet::with_capacity(n); n];
                let mut loops = FixedBitSet::with_capacity(n);
                for t in &tuples {
                    succ[t[0]].insert(t[1]);
                    pred[t[1]].insert(t[0]);
                    if t[0] == t[1] {
                        loops.insert(t[0]);
                    }
                }
                TableKind::Binary { succ, pred, loops }
            }
            _ => TableKind::General,
        };
        TargetRelation { members: target.relation(rel).clone(), tuples, kind }
    }
}

struct Constraint {
    rel: usize,
    vars: Vec<usize>,
}

/// A homomorphism problem compiled to variables and constraints.
struct Csp {
    n_vars: usize,
    n_values: usize,
    tables: Vec<TargetRelation>,
    constraints: Vec<Constraint>,
    watch: Vec<Vec<usize>>,
    /// Tie-break key per variable for most-constrained-first.
    rank: Vec<usize>,
    cfg: SolverConfig,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

#[derive(Clone)]
struct State {
    domains: Vec<FixedBitSet>,
    trail: Vec<(usize, FixedBitSet)>,
}

impl Csp {
    fn new(target: &Structure, n_vars: usize, constraints: Vec<Constraint>, rank: Vec<usize>, cfg: &SolverConfig) -> Self {
        let tables = target
            .signature()
            .relations()
            .iter()
            .enumerate()
            .map(|(i, sym)| TargetRelation::new(target, i, sym.arity))
            .collect();
        let mut watch = vec![Vec::new(); n_vars];
        for (ci, c) in constraints.iter().enumerate() {
            let mut vs = c.vars.clone();
            vs.sort_unstable();
            vs.dedup();
            for v in vs {
                watch[v].push(ci);
            }
        }
        Csp { n_vars, n_values: target.len(), tables, constraints, watch, rank, cfg: cfg.clone() }
    }

    fn from_structures(source: &Structure, target: &Structure, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if source.signature() != target.signature() {
            return Err(Error::SignatureMismatch(format!(
                "source {} vs target {}",
                source.signature(),
                target.signature()
            )));
        }
        let constraints = source
            .relations()
            .iter()
            .enumerate()
            .flat_map(|(rel, tuples)| tuples.iter().map(move |t| Constraint { rel, vars: t.clone() }))
            .collect();
        let mut by_name: Vec<usize> = (0..source.len()).collect();
        by_name.sort_by(|&a, &b| source.element(a).cmp(source.element(b)));
        let mut rank = vec![0; source.len()];
        for (r, &v) in by_name.iter().enumerate() {
            rank[v] = r;
        }
        Ok(Csp::new(target, source.len(), constraints, rank, cfg))
    }

    /// Constraints of `product(factors) -> target` without building element names.
    fn from_product(factors: &[Structure], target: &Structure, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let index = ProductIndex::of(factors);
        let mut constraints = Vec::new();
        for (rel, sym) in target.signature().relations().iter().enumerate() {
            let lists: Vec<Vec<&Vec<usize>>> = factors.iter().map(|f| f.relation(rel).iter().collect()).collect();
            let mut comps = vec![0usize; factors.len()];
            for_each_combination(&lists, |picked| {
                let vars = (0..sym.arity)
                    .map(|j| {
                        for (c, t) in comps.iter_mut().zip(picked) {
                            *c = t[j];
                        }
                        index.encode(&comps)
                    })
                    .collect();
                constraints.push(Constraint { rel, vars });
            });
        }
        let n = index.size();
        Ok(Csp::new(target, n, constraints, (0..n).collect(), cfg))
    }

    fn initial_state(&self) -> State {
        let mut full = FixedBitSet::with_capacity(self.n_values);
        full.insert_range(..);
        State { domains: vec![full; self.n_vars], trail: Vec::new() }
    }

    fn set_domain(&self, st: &mut State, v: usize, new: FixedBitSet) {
        let old = std::mem::replace(&mut st.domains[v], new);
        st.trail.push((v, old));
    }

    fn restore(&self, st: &mut State, mark: usize) {
        while st.trail.len() > mark {
            let (v, old) = st.trail.pop().expect("trail longer than mark");
            st.domains[v] = old;
        }
    }

    /// Narrows the domains of constraint `ci`'s variables to supported values.
    /// Returns the changed variables, or `None` on a wipe-out.
    fn revise(&self, st: &mut State, ci: usize, changed: &mut Vec<usize>) -> bool {
        let c = &self.constraints[ci];
        let table = &self.tables[c.rel];
        match (&table.kind, c.vars.as_slice()) {
            (TableKind::Unary(set), &[x]) => {
                let mut nx = st.domains[x].clone();
                nx.intersect_with(set);
                self.update(st, x, nx, changed)
            }
            (TableKind::Binary { loops, .. }, &[x, y]) if x == y => {
                let mut nx = st.domains[x].clone();
                nx.intersect_with(loops);
                self.update(st, x, nx, changed)
            }
            (TableKind::Binary { succ, pred, .. }, &[x, y]) => {
                let dy = &st.domains[y];
                let mut nx = st.domains[x].clone();
                for a in st.domains[x].ones() {
                    if succ[a].is_disjoint(dy) {
                        nx.set(a, false);
                    }
                }
                let mut ny = st.domains[y].clone();
                for b in st.domains[y].ones() {
                    if pred[b].is_disjoint(&nx) {
                        ny.set(b, false);
                    }
                }
                self.update(st, x, nx, changed) && self.update(st, y, ny, changed)
            }
            _ => {
                let arity = c.vars.len();
                let mut support = vec![FixedBitSet::with_capacity(self.n_values); arity];
                'tuples: for t in &table.tuples {
                    for j in 0..arity {
                        if !st.domains[c.vars[j]].contains(t[j]) {
                            continue 'tuples;
                        }
                        for k in 0..j {
                            if c.vars[k] == c.vars[j] && t[k] != t[j] {
                                continue 'tuples;
                            }
                        }
                    }
                    for j in 0..arity {
                        support[j].insert(t[j]);
                    }
                }
                for (j, s) in support.into_iter().enumerate() {
                    let v = c.vars[j];
                    if c.vars[..j].contains(&v) {
                        continue;
                    }
                    if !self.update(st, v, s, changed) {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn update(&self, st: &mut State, v: usize, new: FixedBitSet, changed: &mut Vec<usize>) -> bool {
        if new.count_ones(..) != st.domains[v].count_ones(..) {
            let empty = new.is_clear();
            self.set_domain(st, v, new);
            changed.push(v);
            !empty
        } else {
            true
        }
    }

    /// AC-3 over constraints, seeded with `seed`.
    fn propagate(&self, st: &mut State, seed: impl IntoIterator<Item = usize>) -> bool {
        let mut queued = vec![false; self.constraints.len()];
        let mut queue = VecDeque::new();
        for ci in seed {
            if !queued[ci] {
                queued[ci] = true;
                queue.push_back(ci);
            }
        }
        let mut changed = Vec::new();
        while let Some(ci) = queue.pop_front() {
            queued[ci] = false;
            changed.clear();
            if !self.revise(st, ci, &mut changed) {
                return false;
            }
            for &v in &changed {
                for &cj in &self.watch[v] {
                    if cj != ci && !queued[cj] {
                        queued[cj] = true;
                        queue.push_back(cj);
                    }
                }
            }
        }
        true
    }

    fn fixed(st: &State, v: usize) -> Option<usize> {
        let d = &st.domains[v];
        let mut ones = d.ones();
        match (ones.next(), ones.next()) {
            (Some(a), None) => Some(a),
            _ => None,
        }
    }

    /// Checks every constraint on `v` whose variables are all fixed.
    fn check_fixed(&self, st: &State, v: usize) -> bool {
        self.watch[v].iter().all(|&ci| {
            let c = &self.constraints[ci];
            let image: Option<Vec<usize>> = c.vars.iter().map(|&x| Self::fixed(st, x)).collect();
            image.is_none_or(|img| self.tables[c.rel].members.contains(&img))
        })
    }

    fn check_all(&self, st: &State) -> bool {
        self.constraints.iter().all(|c| {
            let image: Vec<usize> = c.vars.iter().map(|&x| Self::fixed(st, x).expect("all fixed")).collect();
            self.tables[c.rel].members.contains(&image)
        })
    }

    /// Prepares the root state: pins, then initial propagation or node checks.
    fn root(&self, pins: &[(usize, usize)]) -> Option<State> {
        let mut st = self.initial_state();
        for &(v, a) in pins {
            if a >= self.n_values || !st.domains[v].contains(a) {
                return None;
            }
            let mut d = FixedBitSet::with_capacity(self.n_values);
            d.insert(a);
            self.set_domain(&mut st, v, d);
        }
        if st.domains.iter().any(FixedBitSet::is_clear) {
            return None;
        }
        let ok = match self.cfg.propagation {
            Propagation::ArcConsistency => self.propagate(&mut st, 0..self.constraints.len()),
            Propagation::None => pins.iter().all(|&(v, _)| self.check_fixed(&st, v)),
        };
        st.trail.clear();
        ok.then_some(st)
    }

    fn choose(&self, st: &State) -> Option<usize> {
        let open = (0..self.n_vars).filter(|&v| st.domains[v].count_ones(..) > 1);
        match self.cfg.variable_order {
            VariableOrder::InputOrder => open.into_iter().next(),
            VariableOrder::MostConstrainedFirst => {
                open.min_by_key(|&v| (st.domains[v].count_ones(..), self.rank[v]))
            }
        }
    }

    /// Fixes `v := a` and propagates. Returns false on conflict; the caller
    /// restores to its mark either way.
    fn assign(&self, st: &mut State, v: usize, a: usize) -> bool {
        let mut d = FixedBitSet::with_capacity(self.n_values);
        d.insert(a);
        self.set_domain(st, v, d);
        match self.cfg.propagation {
            Propagation::ArcConsistency => self.propagate(st, self.watch[v].iter().copied()),
            Propagation::None => self.check_fixed(st, v),
        }
    }

    fn solution(st: &State) -> Vec<usize> {
        st.domains.iter().map(|d| d.ones().next().expect("nonempty domain")).collect()
    }

    fn dfs(&self, st: &mut State, on_solution: &mut dyn FnMut(Vec<usize>) -> Flow) -> Flow {
        let Some(v) = self.choose(st) else {
            if self.cfg.propagation == Propagation::None && !self.check_all(st) {
                return Flow::Continue;
            }
            return on_solution(Self::solution(st));
        };
        let values: Vec<usize> = st.domains[v].ones().collect();
        for a in values {
            let mark = st.trail.len();
            let flow = if self.assign(st, v, a) { self.dfs(st, on_solution) } else { Flow::Continue };
            self.restore(st, mark);
            if flow == Flow::Stop {
                return Flow::Stop;
            }
        }
        Flow::Continue
    }

    fn first_solution(&self, st: &mut State) -> Option<Vec<usize>> {
        let mut found = None;
        self.dfs(st, &mut |sol| {
            found = Some(sol);
            Flow::Stop
        });
        found
    }

    /// First solution in search order, splitting the top-level branch over
    /// `cfg.threads` workers. The result equals the single-threaded one.
    fn find(&self, pins: &[(usize, usize)]) -> Option<Vec<usize>> {
        let mut root = self.root(pins)?;
        let threads = self.cfg.threads;
        let Some(v) = self.choose(&root).filter(|_| threads > 1) else {
            return self.first_solution(&mut root);
        };
        let values: Vec<usize> = root.domains[v].ones().collect();
        let best = AtomicUsize::new(usize::MAX);
        let results: Mutex<Vec<Option<Vec<usize>>>> = Mutex::new(vec![None; values.len()]);
        std::thread::scope(|scope| {
            for w in 0..threads.min(values.len()) {
                let (root, values, best, results) = (&root, &values, &best, &results);
                scope.spawn(move || {
                    for pos in (w..values.len()).step_by(threads) {
                        if pos > best.load(Ordering::SeqCst) {
                            break;
                        }
                        let mut st = root.clone();
                        if !self.assign(&mut st, v, values[pos]) {
                            continue;
                        }
                        if let Some(sol) = self.first_solution(&mut st) {
                            best.fetch_min(pos, Ordering::SeqCst);
                            results.lock().expect("no poisoned workers")[pos] = Some(sol);
                            break;
                        }
                    }
                });
            }
        });
        results.into_inner().expect("no poisoned workers").into_iter().flatten().next()
    }
}

/// Finds a homomorphism `source -> target`, if one exists.
pub fn find_homomorphism(source: &Structure, target: &Structure, cfg: &SolverConfig) -> Result<Option<Homomorphism>> {
    find_homomorphism_with(source, target, cfg, &[])
}

/// As [`find_homomorphism`], with some source elements pinned to given
/// target elements (`(source index, target index)` pairs).
pub fn find_homomorphism_with(
    source: &Structure,
    target: &Structure,
    cfg: &SolverConfig,
    pins: &[(usize, usize)],
) -> Result<Option<Homomorphism>> {
    let csp = Csp::from_structures(source, target, cfg)?;
    if let Some(&(v, _)) = pins.iter().find(|(v, _)| *v >= source.len()) {
        return Err(Error::Precondition(format!("pinned element index {v} outside the source")));
    }
    Ok(csp.find(pins).map(Homomorphism::new))
}

/// All homomorphisms `source -> target`, sorted lexicographically by mapping.
pub fn enumerate_homomorphisms(source: &Structure, target: &Structure, cfg: &SolverConfig) -> Result<Vec<Homomorphism>> {
    let csp = Csp::from_structures(source, target, cfg)?;
    let mut out = Vec::new();
    let mut overflow = false;
    if let Some(mut st) = csp.root(&[]) {
        csp.dfs(&mut st, &mut |sol| {
            out.push(Homomorphism::new(sol));
            if cfg.enumeration_cap.is_some_and(|cap| out.len() > cap) {
                overflow = true;
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
    }
    if overflow {
        return Err(Error::CapExceeded { cap: cfg.enumeration_cap.unwrap_or_default() });
    }
    out.sort();
    Ok(out)
}

/// All tuples `h(d)` where `d` is the distinguished tuple and `h` ranges over
/// homomorphisms from the pointed structure to `target`. For an empty
/// distinguished tuple this is `{()}` or `{}`.
pub fn image_set(source: &PointedStructure, target: &Structure, cfg: &SolverConfig) -> Result<BTreeSet<Vec<usize>>> {
    let csp = Csp::from_structures(&source.structure, target, cfg)?;
    let mut vars = source.distinguished.clone();
    vars.sort_unstable();
    vars.dedup();
    let mut out = BTreeSet::new();
    if let Some(mut st) = csp.root(&[]) {
        collect_images(&csp, &mut st, &vars, &source.distinguished, &mut out);
    }
    Ok(out)
}

fn collect_images(csp: &Csp, st: &mut State, vars: &[usize], tuple: &[usize], out: &mut BTreeSet<Vec<usize>>) {
    let Some((&v, rest)) = vars.split_first() else {
        let image: Vec<usize> = tuple
            .iter()
            .map(|&x| Csp::fixed(st, x).expect("distinguished variables are fixed"))
            .collect();
        if !out.contains(&image) && csp.first_solution(st).is_some() {
            out.insert(image);
        }
        return;
    };
    let values: Vec<usize> = st.domains[v].ones().collect();
    for a in values {
        let mark = st.trail.len();
        if Csp::fixed(st, v) == Some(a) || csp.assign(st, v, a) {
            collect_images(csp, st, rest, tuple, out);
        }
        csp.restore(st, mark);
    }
}

/// Outcome of a product homomorphism query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PhpAnswer {
    /// A homomorphism from the product (elements in [`ProductIndex`] order) to the target.
    Yes(Homomorphism),
    No,
}

impl PhpAnswer {
    pub fn is_yes(&self) -> bool {
        matches!(self, PhpAnswer::Yes(_))
    }

    pub fn witness(&self) -> Option<&Homomorphism> {
        match self {
            PhpAnswer::Yes(h) => Some(h),
            PhpAnswer::No => None,
        }
    }
}

/// Decides whether the product of the factors maps homomorphically to the target.
pub fn decide_php(inst: &PhpInstance, cfg: &SolverConfig) -> Result<PhpAnswer> {
    cfg.validate()?;
    check_guard(inst.product_cardinality(), cfg.product_guard)?;
    let found = if cfg.lazy_product {
        Csp::from_product(inst.factors(), inst.target(), cfg)?.find(&[])
    } else {
        let p = product(inst.factors(), cfg.product_guard)?;
        Csp::from_structures(&p, inst.target(), cfg)?.find(&[])
    };
    Ok(match found {
        Some(m) => PhpAnswer::Yes(Homomorphism::new(m)),
        None => PhpAnswer::No,
    })
}
