//! Support-graph analysis of nonnegative square matrices: strongly connected
//! components, closed (terminal) classes and periods.
//!
//! An edge `u → v` exists iff `Q(u, v) > 0`. Zero structure is taken from
//! exact zeros; no thresholding is applied.

use nalgebra::DMatrix;

/// Adjacency lists of the positive entries of `q`.
pub fn support(q: &DMatrix<f64>) -> Vec<Vec<usize>> {
    (0..q.nrows())
        .map(|i| (0..q.ncols()).filter(|&j| q[(i, j)] > 0.0).collect())
        .collect()
}

/// Tarjan's algorithm. Each component is sorted, and components are ordered by
/// their smallest member so the output is independent of traversal details.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit(st: &mut State<'_>, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for k in 0..st.adj[v].len() {
            let w = st.adj[v][k];
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("tarjan stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.out.push(comp);
        }
    }

    let n = adj.len();
    let mut st = State {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out.sort_by_key(|c| c[0]);
    st.out
}

/// Component structure of a Markov matrix.
#[derive(Debug, Clone)]
pub struct ComponentAnalysis {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    /// `terminal[k]` is true when component `k` has no edge leaving it.
    pub terminal: Vec<bool>,
}

impl ComponentAnalysis {
    pub fn new(adj: &[Vec<usize>]) -> Self {
        let components = strongly_connected_components(adj);
        let mut component_of = vec![0; adj.len()];
        for (k, c) in components.iter().enumerate() {
            for &v in c {
                component_of[v] = k;
            }
        }
        let terminal = components
            .iter()
            .enumerate()
            .map(|(k, c)| c.iter().all(|&v| adj[v].iter().all(|&w| component_of[w] == k)))
            .collect();
        Self {
            components,
            component_of,
            terminal,
        }
    }

    pub fn of_matrix(q: &DMatrix<f64>) -> Self {
        Self::new(&support(q))
    }

    pub fn is_irreducible(&self) -> bool {
        self.components.len() == 1
    }

    /// Closed classes in order of their smallest member.
    pub fn terminal_components(&self) -> Vec<Vec<usize>> {
        self.components
            .iter()
            .zip(&self.terminal)
            .filter(|(_, &t)| t)
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// States outside every closed class.
    pub fn transient_states(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.component_of.len())
            .filter(|&v| !self.terminal[self.component_of[v]])
            .collect();
        out.sort_unstable();
        out
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of a strongly connected component: the gcd of its cycle lengths.
/// Returns 0 for a single state with no self-loop (no cycles at all).
pub fn period(adj: &[Vec<usize>], component: &[usize]) -> usize {
    let n = adj.len();
    let mut member = vec![false; n];
    for &v in component {
        member[v] = true;
    }
    let mut level: Vec<Option<usize>> = vec![None; n];
    let root = component[0];
    level[root] = Some(0);
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g = 0;
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("queued vertices have a level");
        for &w in &adj[u] {
            if !member[w] {
                continue;
            }
            match level[w] {
                None => {
                    level[w] = Some(lu + 1);
                    queue.push_back(w);
                }
                Some(lw) => g = gcd(g, (lu + 1).abs_diff(lw)),
            }
        }
    }
    g
}

/// Boolean transitive closure by repeated breadth-first search.
pub fn reachability(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Largest shortest-path length over ordered pairs (`None` if some pair is unreachable).
pub fn diameter(adj: &[Vec<usize>]) -> Option<usize> {
    let n = adj.len();
    let mut worst = 0;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        for &d in &dist {
            if d == usize::MAX {
                return None;
            }
            worst = worst.max(d);
        }
    }
    Some(worst)
}
