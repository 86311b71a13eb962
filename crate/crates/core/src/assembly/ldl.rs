//! Supernodal multifrontal LDLᵀ factorization without pivoting.
//!
//! The symbolic phase computes the elimination tree and column counts, groups
//! columns with nested patterns into supernodes and derives each supernode's row
//! structure. The numeric phase assembles one dense frontal matrix per supernode,
//! eliminates its pivot columns and passes the Schur complement to the parent.
//! Without pivoting this is valid for symmetric quasi-definite matrices, where
//! every symmetric permutation admits an LDLᵀ factorization.

use nalgebra::DMatrix;

use super::csr::CsrMatrix;

/// Pivot that fell below the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    /// Index in the original (unpermuted) numbering.
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
struct Supernode {
    /// First pivot column (permuted numbering).
    first: usize,
    /// Number of pivot columns.
    width: usize,
    /// Row indices: the pivot columns followed by the off-diagonal rows, ascending.
    rows: Vec<usize>,
    /// `rows.len() × width` block of `L` (unit diagonal not stored meaningfully).
    l: DMatrix<f64>,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower `L` stored by supernodes.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    supernodes: Vec<Supernode>,
    d: Vec<f64>,
}

struct Symbolic {
    parent: Vec<usize>,
    /// Strictly-lower nonzeros per column of `L`.
    lnz: Vec<usize>,
}

const NONE: usize = usize::MAX;

fn symbolic(a: &CsrMatrix, perm: &[usize], pinv: &[usize]) -> Symbolic {
    let n = a.n;
    let mut parent = vec![NONE; n];
    let mut flag = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        let (cols, _) = a.row(perm[k]);
        for &c in cols {
            let mut i = pinv[c];
            if i < k {
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
    }
    Symbolic { parent, lnz }
}

impl LdlFactor {
    /// Factorizes the symmetric matrix `a` (full pattern) in the elimination order
    /// `perm` (`perm[k]` is the original index eliminated at step `k`).
    pub fn factorize(a: &CsrMatrix, perm: Vec<usize>, pivot_tol: f64) -> Result<LdlFactor, PivotFailure> {
        let n = a.n;
        assert_eq!(perm.len(), n, "ordering length");
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let sym = symbolic(a, &perm, &pinv);

        // Column j joins the supernode of j − 1 when its pattern is that of j − 1
        // without the diagonal.
        let mut starts = Vec::new();
        for j in 0..n {
            let extends = j > 0 && sym.parent[j - 1] == j && sym.lnz[j - 1] == sym.lnz[j] + 1;
            if !extends {
                starts.push(j);
            }
        }
        starts.push(n);
        let ns = starts.len() - 1;
        let mut snode_of = vec![0usize; n];
        for s in 0..ns {
            snode_of[starts[s]..starts[s + 1]].iter_mut().for_each(|x| *x = s);
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for s in 0..ns {
            let last = starts[s + 1] - 1;
            if sym.parent[last] != NONE {
                children[snode_of[sym.parent[last]]].push(s);
            }
        }

        let mut mark = vec![NONE; n];
        let mut relpos = vec![0usize; n];
        let mut supernodes: Vec<Supernode> = Vec::with_capacity(ns);
        let mut updates: Vec<Option<DMatrix<f64>>> = vec![None; ns];
        let mut d = vec![0.0; n];
        for s in 0..ns {
            let (first, end) = (starts[s], starts[s + 1]);
            let width = end - first;
            let last = end - 1;

            // Row structure.
            let mut below = Vec::with_capacity(sym.lnz[last]);
            for j in first..end {
                let (cols, _) = a.row(perm[j]);
                for &c in cols {
                    let i = pinv[c];
                    if i > last && mark[i] != s {
                        mark[i] = s;
                        below.push(i);
                    }
                }
            }
            for &c in &children[s] {
                let cs: &Supernode = &supernodes[c];
                for &i in &cs.rows[cs.width..] {
                    if i > last && mark[i] != s {
                        mark[i] = s;
                        below.push(i);
                    }
                }
            }
            below.sort_unstable();
            debug_assert_eq!(below.len(), sym.lnz[last]);
            let mut rows: Vec<usize> = (first..end).collect();
            rows.extend(below);
            let m = rows.len();
            for (p, &r) in rows.iter().enumerate() {
                relpos[r] = p;
            }

            // Frontal matrix (lower triangle used).
            let mut f = DMatrix::<f64>::zeros(m, m);
            for j in first..end {
                let (cols, vals) = a.row(perm[j]);
                let jj = j - first;
                for (&c, &v) in cols.iter().zip(vals) {
                    let i = pinv[c];
                    if i >= j {
                        f[(relpos[i], jj)] += v;
                    }
                }
            }
            for &c in &children[s] {
                let u = updates[c].take().expect("child update");
                let cs = &supernodes[c];
                let map: Vec<usize> = cs.rows[cs.width..].iter().map(|&r| relpos[r]).collect();
                for (cj, &fj) in map.iter().enumerate() {
                    for ci in cj..map.len() {
                        f[(map[ci], fj)] += u[(ci, cj)];
                    }
                }
            }

            // Eliminate the pivot columns.
            for k in 0..width {
                let dk = f[(k, k)];
                if !(dk.abs() > pivot_tol) {
                    return Err(PivotFailure {
                        index: perm[first + k],
                        magnitude: dk.abs(),
                    });
                }
                d[first + k] = dk;
                {
                    let col = &mut f.as_mut_slice()[k * m..(k + 1) * m];
                    for v in &mut col[k + 1..] {
                        *v /= dk;
                    }
                }
                for j in k + 1..width {
                    let factor = f[(j, k)] * dk;
                    if factor == 0.0 {
                        continue;
                    }
                    let (left, right) = f.as_mut_slice().split_at_mut(j * m);
                    let lk = &left[k * m..(k + 1) * m];
                    let cj = &mut right[..m];
                    for i in j..m {
                        cj[i] -= lk[i] * factor;
                    }
                }
            }
            let r = m - width;
            if r > 0 {
                let l21 = f.view((width, 0), (r, width)).into_owned();
                let mut l21d = l21.clone();
                for k in 0..width {
                    l21d.column_mut(k).scale_mut(d[first + k]);
                }
                let mut u = f.view((width, width), (r, r)).into_owned();
                u.gemm(-1.0, &l21d, &l21.transpose(), 1.0);
                updates[s] = Some(u);
            }
            let l = f.columns(0, width).into_owned();
            supernodes.push(Supernode {
                first,
                width,
                rows,
                l,
            });
        }
        Ok(LdlFactor {
            n,
            perm,
            supernodes,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored off-diagonal entries of `L`.
    pub fn nnz(&self) -> usize {
        self.supernodes
            .iter()
            .map(|s| s.rows.len() * s.width - s.width * (s.width + 1) / 2)
            .sum()
    }

    pub fn n_supernodes(&self) -> usize {
        self.supernodes.len()
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for s in &self.supernodes {
            let m = s.rows.len();
            for k in 0..s.width {
                let xk = x[s.first + k];
                if xk == 0.0 {
                    continue;
                }
                let col = &s.l.as_slice()[k * m..(k + 1) * m];
                for i in k + 1..m {
                    x[s.rows[i]] -= col[i] * xk;
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for s in self.supernodes.iter().rev() {
            let m = s.rows.len();
            for k in (0..s.width).rev() {
                let col = &s.l.as_slice()[k * m..(k + 1) * m];
                let mut acc = x[s.first + k];
                for i in k + 1..m {
                    acc -= col[i] * x[s.rows[i]];
                }
                x[s.first + k] = acc;
            }
        }
        let mut out = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense `LDLᵀ` without pivoting.
    fn dense_ldl_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = a.nrows();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut d = DVector::<f64>::zeros(n);
        for j in 0..n {
            d[j] = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)] * d[k]).sum::<f64>();
            for i in j + 1..n {
                l[(i, j)] = (a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)] * d[k]).sum::<f64>()) / d[j];
            }
        }
        let z = l.solve_lower_triangular(b).unwrap();
        let y = z.component_div(&d);
        l.transpose().solve_upper_triangular(&y).unwrap()
    }

    /// Random sparse quasi-definite matrix `[[A, Bᵀ], [B, −C]]`.
    fn quasi_definite(n1: usize, n2: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let n = n1 + n2;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                if rng.random_bool(0.3) {
                    let v = rng.random_range(-1.0..1.0);
                    let same = (i < n1) == (j < n1);
                    let v = if same && i >= n1 { -v } else { v };
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        for i in 0..n {
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| f64::abs(m[(i, j)])).sum();
            m[(i, i)] = if i < n1 { row + 1.0 } else { -(row + 1.0) };
        }
        m
    }

    fn to_csr(m: &DMatrix<f64>) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 || i == j {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        CsrMatrix::from_triplets(m.nrows(), &t)
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let (n1, n2) = (5 + trial % 7, 3 + trial % 5);
            let a = quasi_definite(n1, n2, &mut rng);
            let n = n1 + n2;
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let oracle = dense_ldl_solve(&a, &b);
            let mut perm: Vec<usize> = (0..n).collect();
            // Reverse order exercises the permutation path.
            if trial % 2 == 1 {
                perm.reverse();
            }
            let f = LdlFactor::factorize(&to_csr(&a), perm, 1e-14).unwrap();
            let x = f.solve(b.as_slice());
            for i in 0..n {
                assert!((x[i] - oracle[i]).abs() < 1e-10 * (1.0 + oracle[i].abs()));
            }
        }
    }

    #[test]
    fn wide_supernodes_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Dense blocks coupled along a chain form multi-column supernodes.
        let (n1, n2) = (40, 25);
        let mut a = quasi_definite(n1, n2, &mut rng);
        for i in 0..n1 + n2 {
            for j in 0..i {
                if (i / 9 != j / 9) && (i / 9 != j / 9 + 1) {
                    a[(i, j)] = 0.0;
                    a[(j, i)] = 0.0;
                }
            }
        }
        for i in 0..n1 + n2 {
            let row: f64 = (0..n1 + n2).filter(|&j| j != i).map(|j| f64::abs(a[(i, j)])).sum();
            a[(i, i)] = if i < n1 { row + 1.0 } else { -(row + 1.0) };
        }
        let n = n1 + n2;
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let oracle = dense_ldl_solve(&a, &b);
        let f = LdlFactor::factorize(&to_csr(&a), (0..n).collect(), 1e-14).unwrap();
        assert!(f.n_supernodes() < n);
        let x = f.solve(b.as_slice());
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-10 * (1.0 + oracle[i].abs()));
        }
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let err = LdlFactor::factorize(&to_csr(&a), vec![0, 1, 2], 1e-12).unwrap_err();
        assert_eq!(err.index, 1);
    }
}
