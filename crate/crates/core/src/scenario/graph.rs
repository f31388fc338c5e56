use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};
use crate::Scalar;

type EdgeSet = BTreeSet<(usize, usize)>;

const CYCLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Vector,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Input,
    State,
    Output,
}

impl NodeKind {
    fn symbol(self) -> &'static str {
        match self {
            NodeKind::Input => "u",
            NodeKind::State => "x",
            NodeKind::Output => "y",
        }
    }
}

/// An input, state or output entity; `index` is `None` at vector granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub unit: usize,
    pub kind: NodeKind,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    OutputLoop,
    StateLoop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub nodes: Vec<String>,
    pub kind: LoopKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopReport {
    /// Cycles that persist at scalar granularity.
    pub cycles: Vec<Cycle>,
    /// Vector-level cycles with no scalar-level counterpart.
    pub virtual_loops: Vec<Vec<String>>,
    /// Elementary cycles of the scalar graph.
    pub scalar_cycles: Vec<Cycle>,
}

impl LoopReport {
    pub fn is_acyclic(&self) -> bool {
        self.cycles.is_empty()
    }
}

impl fmt::Display for LoopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cycles.is_empty() && self.virtual_loops.is_empty() {
            return write!(f, "no algebraic loops");
        }
        let mut first = true;
        for c in &self.cycles {
            if !first {
                write!(f, "; ")?;
            }
            first = false;
            let kind = match c.kind {
                LoopKind::OutputLoop => "output loop",
                LoopKind::StateLoop => "state loop",
            };
            write!(f, "{kind}: {}", c.nodes.join(" -> "))?;
        }
        for v in &self.virtual_loops {
            if !first {
                write!(f, "; ")?;
            }
            first = false;
            write!(f, "virtual loop: {}", v.join(" -> "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    granularity: Granularity,
    unit_names: Vec<String>,
    nodes: Vec<Node>,
    /// `(a, b)`: `b` depends on `a`.
    edges: BTreeSet<(usize, usize)>,
}

fn scalar_edges<T: Scalar>(s: &Scenario<T>) -> (Vec<Node>, Vec<(Node, Node)>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let node = |unit, kind, i| Node {
        unit,
        kind,
        index: Some(i),
    };
    for (w, u) in s.units().iter().enumerate() {
        for j in 0..u.input_dim() {
            nodes.push(node(w, NodeKind::Input, j));
        }
        for i in 0..u.state_dim() {
            nodes.push(node(w, NodeKind::State, i));
        }
        for k in 0..u.output_dim() {
            nodes.push(node(w, NodeKind::Output, k));
        }
        let masks = u.masks();
        let r = u.reactivity();
        for k in 0..u.output_dim() {
            if r.output_reactive() {
                for j in 0..u.input_dim() {
                    if masks.output_input[k][j] {
                        edges.push((node(w, NodeKind::Input, j), node(w, NodeKind::Output, k)));
                    }
                }
            }
            for i in 0..u.state_dim() {
                if masks.output_state[k][i] {
                    edges.push((node(w, NodeKind::State, i), node(w, NodeKind::Output, k)));
                }
            }
        }
        if r.input_reactive() {
            for i in 0..u.state_dim() {
                for j in 0..u.input_dim() {
                    if masks.state_input[i][j] {
                        edges.push((node(w, NodeKind::Input, j), node(w, NodeKind::State, i)));
                    }
                }
            }
        }
        for (j, &(v, k)) in s.sources(w).iter().enumerate() {
            edges.push((node(v, NodeKind::Output, k), node(w, NodeKind::Input, j)));
        }
    }
    (nodes, edges)
}

impl DependencyGraph {
    /// Builds the graph; the vector form is the quotient of the scalar form.
    pub fn build<T: Scalar>(s: &Scenario<T>, granularity: Granularity) -> Self {
        let (scalar_nodes, scalar) = scalar_edges(s);
        let project = |n: Node| match granularity {
            Granularity::Scalar => n,
            Granularity::Vector => Node { index: None, ..n },
        };
        let nodes: Vec<Node> = scalar_nodes
            .into_iter()
            .map(project)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let id: BTreeMap<Node, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let edges = scalar
            .into_iter()
            .map(|(a, b)| (id[&project(a)], id[&project(b)]))
            .collect();
        DependencyGraph {
            granularity,
            unit_names: s.units().iter().map(|u| u.name().to_string()).collect(),
            nodes,
            edges,
        }
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn label(&self, id: usize) -> String {
        let n = self.nodes[id];
        let name = &self.unit_names[n.unit];
        match n.index {
            Some(i) => format!("{name}.{}[{i}]", n.kind.symbol()),
            None => format!("{name}.{}", n.kind.symbol()),
        }
    }

    pub fn labeled_edges(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.label(a), self.label(b)))
            .collect()
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            succ[a].push(b);
        }
        succ
    }

    pub fn has_cycle(&self) -> bool {
        if self.edges.iter().any(|(a, b)| a == b) {
            return true;
        }
        let mut g = DiGraph::<(), ()>::new();
        let ids: Vec<_> = self.nodes.iter().map(|_| g.add_node(())).collect();
        for &(a, b) in &self.edges {
            g.add_edge(ids[a], ids[b], ());
        }
        tarjan_scc(&g).iter().any(|c| c.len() > 1)
    }

    /// Elementary cycles, each listed from its smallest node id.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let succ = self.successors();
        let mut out = Vec::new();
        for s in 0..self.nodes.len() {
            let mut path = vec![s];
            let mut on_path = vec![false; self.nodes.len()];
            on_path[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < succ[v].len() {
                    let w = succ[v][*next];
                    *next += 1;
                    if w == s {
                        out.push(path.clone());
                        if out.len() >= CYCLE_LIMIT {
                            return out;
                        }
                    } else if w > s && !on_path[w] {
                        on_path[w] = true;
                        path.push(w);
                        stack.push((w, 0));
                    }
                } else {
                    stack.pop();
                    if let Some(v) = path.pop() {
                        on_path[v] = false;
                    }
                }
            }
        }
        out
    }

    fn classify(&self, cycle: &[usize]) -> Cycle {
        let kind = if cycle.iter().any(|&i| self.nodes[i].kind == NodeKind::State) {
            LoopKind::StateLoop
        } else {
            LoopKind::OutputLoop
        };
        let mut nodes: Vec<String> = cycle.iter().map(|&i| self.label(i)).collect();
        nodes.push(self.label(cycle[0]));
        Cycle { nodes, kind }
    }

    pub fn classified_cycles(&self) -> Vec<Cycle> {
        self.cycles().iter().map(|c| self.classify(c)).collect()
    }

    /// `(v, w)` pairs where `w` must run after `v` (`hard`) and pairs where
    /// running `v` first merely gives `w` fresher data (`soft`).
    pub fn unit_precedence(&self) -> (EdgeSet, EdgeSet) {
        let succ = self.successors();
        let mut hard = BTreeSet::new();
        let mut soft = BTreeSet::new();
        for &(a, b) in &self.edges {
            let (na, nb) = (self.nodes[a], self.nodes[b]);
            if na.kind == NodeKind::Output && nb.kind == NodeKind::Input {
                if succ[b].is_empty() {
                    soft.insert((na.unit, nb.unit));
                } else {
                    hard.insert((na.unit, nb.unit));
                }
            }
        }
        soft.retain(|p| !hard.contains(p));
        (hard, soft)
    }

    /// Checks that `order` places every unit after the sources it reacts to.
    pub fn check_order(&self, order: &[usize]) -> Result<()> {
        let mut pos = vec![usize::MAX; self.unit_names.len()];
        for (i, &u) in order.iter().enumerate() {
            pos[u] = i;
        }
        let (hard, _) = self.unit_precedence();
        for (v, w) in hard {
            if pos[v] >= pos[w] {
                return Err(Error::NoValidOrder(format!(
                    "{} must run after {}",
                    self.unit_names[w], self.unit_names[v]
                )));
            }
        }
        Ok(())
    }

    fn report(&self) -> LoopReport {
        let cycles = self.classified_cycles();
        LoopReport {
            scalar_cycles: match self.granularity {
                Granularity::Scalar => cycles.clone(),
                Granularity::Vector => Vec::new(),
            },
            cycles,
            virtual_loops: Vec::new(),
        }
    }
}

/// Unit order in which every unit follows the sources it reacts to. Ties go to
/// units whose delayed sources have already run, then to name order.
pub fn topological_order(g: &DependencyGraph) -> std::result::Result<Vec<usize>, LoopReport> {
    let n = g.unit_names.len();
    let (hard, soft) = g.unit_precedence();
    let mut indeg = vec![0usize; n];
    for &(_, w) in &hard {
        indeg[w] += 1;
    }
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let ready: Vec<usize> = (0..n).filter(|&u| !placed[u] && indeg[u] == 0).collect();
        if ready.is_empty() {
            return Err(g.report());
        }
        let fresh = ready.iter().copied().find(|&u| {
            soft.iter()
                .filter(|&&(v, w)| w == u && v != u)
                .all(|&(v, _)| placed[v])
        });
        let pick = fresh.unwrap_or(ready[0]);
        placed[pick] = true;
        order.push(pick);
        for &(v, w) in &hard {
            if v == pick {
                indeg[w] -= 1;
            }
        }
    }
    Ok(order)
}

/// Cycles at vector granularity, split into real and virtual ones by
/// re-checking them at scalar granularity.
pub fn classify_loops<T: Scalar>(s: &Scenario<T>) -> LoopReport {
    let vg = DependencyGraph::build(s, Granularity::Vector);
    let sg = DependencyGraph::build(s, Granularity::Scalar);
    let vector_id: BTreeMap<Node, usize> =
        vg.nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let scalar_cycles = sg.cycles();
    let projections: BTreeSet<BTreeSet<usize>> = scalar_cycles
        .iter()
        .map(|c| {
            c.iter()
                .map(|&i| {
                    vector_id[&Node {
                        index: None,
                        ..sg.nodes[i]
                    }]
                })
                .collect()
        })
        .collect();
    let mut report = LoopReport {
        scalar_cycles: scalar_cycles.iter().map(|c| sg.classify(c)).collect(),
        ..LoopReport::default()
    };
    for c in vg.cycles() {
        let set: BTreeSet<usize> = c.iter().copied().collect();
        if projections.contains(&set) {
            report.cycles.push(vg.classify(&c));
        } else {
            report.virtual_loops.push(vg.classify(&c).nodes);
        }
    }
    report
}

/// One fine-grained step of scalar-level Gauss-Seidel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Input { unit: usize, index: usize },
    Step { unit: usize },
    Output { unit: usize, index: usize },
}

impl Action {
    fn key(&self, rank: &[usize]) -> (usize, u8, usize) {
        match *self {
            Action::Input { unit, index } => (rank[unit], 0, index),
            Action::Step { unit } => (rank[unit], 1, 0),
            Action::Output { unit, index } => (rank[unit], 2, index),
        }
    }
}

pub(super) fn action_order<T: Scalar>(s: &Scenario<T>) -> Result<Vec<Action>> {
    let mut actions = Vec::new();
    let mut deps: Vec<(Action, Action)> = Vec::new();
    for (w, u) in s.units().iter().enumerate() {
        let masks = u.masks();
        let r = u.reactivity();
        let step = Action::Step { unit: w };
        actions.push(step);
        for j in 0..u.input_dim() {
            let input = Action::Input { unit: w, index: j };
            actions.push(input);
            let (v, k) = s.sources(w)[j];
            deps.push((Action::Output { unit: v, index: k }, input));
            if r.input_reactive() && masks.state_input.iter().any(|row| row[j]) {
                deps.push((input, step));
            }
        }
        for k in 0..u.output_dim() {
            let output = Action::Output { unit: w, index: k };
            actions.push(output);
            deps.push((step, output));
            if r.output_reactive() {
                for j in 0..u.input_dim() {
                    if masks.output_input[k][j] {
                        deps.push((Action::Input { unit: w, index: j }, output));
                    }
                }
            }
        }
    }
    // rank units by explicit order if present, else by name
    let mut rank: Vec<usize> = (0..s.units().len()).collect();
    if let Some(sigma) = s.sigma() {
        for (i, &u) in sigma.iter().enumerate() {
            rank[u] = i;
        }
    }
    let index: BTreeMap<Action, usize> = actions.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let mut indeg = vec![0usize; actions.len()];
    let mut succ = vec![Vec::new(); actions.len()];
    for (a, b) in &deps {
        succ[index[a]].push(index[b]);
        indeg[index[b]] += 1;
    }
    let mut ready: BTreeSet<((usize, u8, usize), usize)> = (0..actions.len())
        .filter(|&i| indeg[i] == 0)
        .map(|i| (actions[i].key(&rank), i))
        .collect();
    let mut order = Vec::with_capacity(actions.len());
    while let Some(first) = ready.iter().next().copied() {
        ready.remove(&first);
        let i = first.1;
        order.push(actions[i]);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert((actions[j].key(&rank), j));
            }
        }
    }
    if order.len() < actions.len() {
        let report = classify_loops(s);
        return Err(Error::NoValidOrder(format!(
            "scalar dependencies are cyclic: {report}"
        )));
    }
    Ok(order)
}
