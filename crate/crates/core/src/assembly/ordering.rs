//! Geometric nested dissection ordering of a node graph.

use crate::mesh::Point3;

/// Subgraphs at most this large are ordered as given.
pub const LEAF_SIZE: usize = 16;

/// Fill-reducing elimination order of the graph `adj` whose vertices sit at `coords`.
///
/// Each level splits the vertex set at the median along the longest bounding-box
/// axis; the vertices of one half that touch the other half (whichever side has
/// fewer) form the separator, which is numbered after both halves.
pub fn nested_dissection(coords: &[Point3], adj: &[Vec<usize>]) -> Vec<usize> {
    let n = coords.len();
    let mut order = Vec::with_capacity(n);
    let mut mark = vec![usize::MAX; n];
    let mut stamp = 0usize;
    let mut stack = vec![Task::Split((0..n).collect())];
    // Explicit stack: Split pushes Emit(separator), then the right and left halves,
    // so halves are ordered before their separator.
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(sep) => order.extend(sep),
            Task::Split(mut nodes) => {
                if nodes.len() <= LEAF_SIZE {
                    order.extend(nodes);
                    continue;
                }
                let axis = longest_axis(coords, &nodes);
                nodes.sort_by(|&a, &b| {
                    coords[a][axis]
                        .total_cmp(&coords[b][axis])
                        .then(a.cmp(&b))
                });
                let right = nodes.split_off(nodes.len() / 2);
                // One-sided separators on either side of the cut; keep the smaller.
                stamp += 1;
                for &v in &right {
                    mark[v] = stamp;
                }
                let left_touch = nodes
                    .iter()
                    .filter(|&&v| adj[v].iter().any(|&w| mark[w] == stamp))
                    .count();
                stamp += 1;
                for &v in &nodes {
                    mark[v] = stamp;
                }
                let right_touch = right
                    .iter()
                    .filter(|&&v| adj[v].iter().any(|&w| mark[w] == stamp))
                    .count();
                let (cut, other) = if left_touch <= right_touch {
                    (nodes, right)
                } else {
                    (right, nodes)
                };
                stamp += 1;
                for &v in &other {
                    mark[v] = stamp;
                }
                let (sep, rest): (Vec<usize>, Vec<usize>) = cut
                    .into_iter()
                    .partition(|&v| adj[v].iter().any(|&w| mark[w] == stamp));
                let (left, right) = (rest, other);
                stack.push(Task::Emit(sep));
                stack.push(Task::Split(right));
                stack.push(Task::Split(left));
            }
        }
    }
    order
}

enum Task {
    Split(Vec<usize>),
    Emit(Vec<usize>),
}

fn longest_axis(coords: &[Point3], nodes: &[usize]) -> usize {
    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for &v in nodes {
        lo = lo.inf(&coords[v]);
        hi = hi.sup(&coords[v]);
    }
    (hi - lo).imax()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> (Vec<Point3>, Vec<Vec<usize>>) {
        let id = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
        let mut coords = Vec::new();
        let mut adj = vec![Vec::new(); m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    coords.push(Point3::new(i as f64, j as f64, k as f64));
                    let v = id(i, j, k);
                    if i + 1 < m {
                        adj[v].push(id(i + 1, j, k));
                        adj[id(i + 1, j, k)].push(v);
                    }
                    if j + 1 < m {
                        adj[v].push(id(i, j + 1, k));
                        adj[id(i, j + 1, k)].push(v);
                    }
                    if k + 1 < m {
                        adj[v].push(id(i, j, k + 1));
                        adj[id(i, j, k + 1)].push(v);
                    }
                }
            }
        }
        (coords, adj)
    }

    #[test]
    fn is_a_permutation() {
        let (coords, adj) = grid(9);
        let mut order = nested_dissection(&coords, &adj);
        assert_eq!(order.len(), coords.len());
        order.sort_unstable();
        assert!(order.iter().enumerate().all(|(i, &v)| i == v));
    }

    #[test]
    fn top_separator_is_last_and_separates() {
        let (coords, adj) = grid(8);
        let order = nested_dissection(&coords, &adj);
        // The top-level separator is one grid plane next to the cut (64 vertices), ordered last.
        let tail = &order[order.len() - 64..];
        let x = coords[tail[0]].x;
        assert!(x == 3.0 || x == 4.0);
        assert!(tail.iter().all(|&v| coords[v].x == x));
    }
}
