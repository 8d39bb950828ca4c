//! Reverse Cuthill-McKee ordering for symmetric sparsity patterns.

use std::collections::VecDeque;

use super::csc::CscMatrix;

fn adjacency(pattern: &CscMatrix) -> Vec<Vec<usize>> {
    let n = pattern.ncols;
    let mut adj = vec![Vec::new(); n];
    for c in 0..n {
        for p in pattern.colptr[c]..pattern.colptr[c + 1] {
            let r = pattern.rowind[p];
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Breadth-first search from `root` over nodes not yet `blocked`; returns
/// the visit order, distances and the eccentricity of `root`.
fn bfs(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> (Vec<usize>, Vec<usize>, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut order = vec![root];
    dist[root] = 0;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &adj[v] {
            if !blocked[w] && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                order.push(w);
            }
        }
    }
    let ecc = dist[*order.last().unwrap()];
    (order, dist, ecc)
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, blocked: &[bool]) -> usize {
    let mut root = start;
    let (mut order, mut dist, mut ecc) = bfs(adj, root, blocked);
    loop {
        let far = order
            .iter()
            .copied()
            .filter(|&v| dist[v] == ecc)
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap();
        let (o2, d2, e2) = bfs(adj, far, blocked);
        if e2 <= ecc {
            return root;
        }
        root = far;
        order = o2;
        dist = d2;
        ecc = e2;
    }
}

/// Returns `perm` with `perm[new] = old`, placing each connected component
/// in Cuthill-McKee order from a pseudo-peripheral node, then reversing.
pub fn reverse_cuthill_mckee(pattern: &CscMatrix) -> Vec<usize> {
    let n = pattern.ncols;
    let adj = adjacency(pattern);
    let mut visited = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(&adj, seed, &visited);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            perm.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (adj[w].len(), w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    perm.reverse();
    perm
}

/// Inverse of a permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Upper triangle of `P M P^T` for a symmetric `M` given by its upper
/// triangle, where `pinv[old] = new`.
pub fn permute_symmetric_upper(m: &CscMatrix, pinv: &[usize]) -> CscMatrix {
    let t: Vec<_> = m
        .triplets()
        .into_iter()
        .map(|(r, c, v)| {
            let (a, b) = (pinv[r], pinv[c]);
            (a.min(b), a.max(b), v)
        })
        .collect();
    CscMatrix::from_triplets(m.nrows, m.ncols, &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandwidth(m: &CscMatrix) -> usize {
        m.triplets().iter().map(|&(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    #[test]
    fn shuffled_path_graph_gets_unit_bandwidth() {
        let n = 40;
        // path graph with scrambled labels
        let label = |i: usize| (i * 17) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label(i), label(i), 1.0));
            if i + 1 < n {
                let (a, b) = (label(i), label(i + 1));
                t.push((a.min(b), a.max(b), 1.0));
            }
        }
        let m = CscMatrix::from_triplets(n, n, &t);
        assert!(bandwidth(&m) > 1);
        let perm = reverse_cuthill_mckee(&m);
        let mut seen = perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let pm = permute_symmetric_upper(&m, &invert(&perm));
        assert_eq!(bandwidth(&pm), 1);
    }

    #[test]
    fn handles_disconnected_components() {
        let m = CscMatrix::from_triplets(4, 4, &[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1.0), (3, 3, 1.0)]);
        let perm = reverse_cuthill_mckee(&m);
        assert_eq!(perm.len(), 4);
        let inv = invert(&perm);
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(inv[p], i);
        }
    }
}
