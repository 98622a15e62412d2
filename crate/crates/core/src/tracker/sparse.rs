//! Sparse LDL^T factorization for the damped normal equations.
//!
//! The normal matrix J^T J is symmetric with a banded-cyclic pattern
//! (each parameter couples only to neighboring control points within a
//! frame and to the same control point in adjacent frames), so an
//! elimination-tree based up-looking factorization keeps the solve far
//! below the cost of a dense decomposition. Storage is the upper
//! triangle in compressed sparse column form: column `k` holds entries
//! with row index `<= k`, rows sorted ascending, diagonal always present.

/// Symmetric sparse matrix, upper triangle in CSC form.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
    /// Position of the diagonal entry inside each column.
    diag_pos: Vec<usize>,
}

impl SparseSym {
    /// Builds from (row, col, value) entries of the upper triangle
    /// (`row <= col`). Duplicates are summed; missing diagonal entries are
    /// inserted as explicit zeros.
    pub fn from_upper_triplets(n: usize, entries: &[(usize, usize, f64)]) -> SparseSym {
        let mut items: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len() + n);
        for &(r, c, v) in entries {
            debug_assert!(r <= c && c < n, "entry ({r},{c}) outside upper triangle");
            items.push((c, r, v));
        }
        for k in 0..n {
            items.push((k, k, 0.0));
        }
        items.sort_unstable_by_key(|&(c, r, _)| (c, r));

        let mut col_ptr = vec![0usize; n + 1];
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        let mut iter = items.into_iter().peekable();
        for col in 0..n {
            while let Some(&(c, r, _)) = iter.peek() {
                if c != col {
                    break;
                }
                let mut sum = 0.0;
                while let Some(&(c2, r2, v2)) = iter.peek() {
                    if c2 == col && r2 == r {
                        sum += v2;
                        iter.next();
                    } else {
                        break;
                    }
                }
                rows.push(r);
                vals.push(sum);
            }
            col_ptr[col + 1] = rows.len();
        }
        let diag_pos = (0..n)
            .map(|k| {
                let lo = col_ptr[k];
                let hi = col_ptr[k + 1];
                lo + rows[lo..hi].binary_search(&k).expect("diagonal present")
            })
            .collect();
        SparseSym {
            n,
            col_ptr,
            rows,
            vals,
            diag_pos,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag_pos.iter().map(|&p| self.vals[p]).collect()
    }

    /// Copy with `shift[k]` added to each diagonal entry.
    pub fn with_shifted_diagonal(&self, shift: &[f64]) -> SparseSym {
        let mut out = self.clone();
        for (&pos, s) in self.diag_pos.iter().zip(shift) {
            out.vals[pos] += s;
        }
        out
    }

    /// Up-looking LDL^T factorization. Returns `None` when a pivot is not
    /// strictly positive (matrix not positive definite), which callers
    /// treat as a recoverable increase-damping signal.
    pub fn ldl(&self) -> Option<LdlFactor> {
        let n = self.n;
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut l_count = vec![0usize; n];

        // Symbolic pass: elimination tree and column counts of L.
        for k in 0..n {
            flag[k] = k;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let mut i = self.rows[p];
                while i < k && flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    l_count[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + l_count[k];
        }
        let nnz = l_ptr[n];
        let mut l_rows = vec![0usize; nnz];
        let mut l_vals = vec![0.0f64; nnz];
        let mut l_next = l_ptr[..n].to_vec();
        let mut diag = vec![0.0f64; n];

        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut flag2 = vec![usize::MAX; n];

        // Numeric pass: compute row k of L against columns 0..k.
        for k in 0..n {
            let mut top = n;
            flag2[k] = k;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let mut i = self.rows[p];
                y[i] += self.vals[p];
                let mut len = 0usize;
                while i < k && flag2[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag2[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut d = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                for q in l_ptr[i]..l_next[i] {
                    y[l_rows[q]] -= l_vals[q] * yi;
                }
                let lki = yi / diag[i];
                d -= lki * yi;
                l_rows[l_next[i]] = k;
                l_vals[l_next[i]] = lki;
                l_next[i] += 1;
            }
            if !d.is_finite() || d <= 0.0 {
                return None;
            }
            diag[k] = d;
        }

        Some(LdlFactor {
            n,
            l_ptr,
            l_rows,
            l_vals,
            diag,
        })
    }
}

/// Unit-lower-triangular factor L (stored by column) and diagonal D with
/// `A = L D L^T`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    l_ptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    diag: Vec<f64>,
}

impl LdlFactor {
    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                x[self.l_rows[p]] -= self.l_vals[p] * xj;
            }
        }
        for (xj, d) in x.iter_mut().zip(&self.diag) {
            *xj /= d;
        }
        for j in (0..self.n).rev() {
            let mut xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                xj -= self.l_vals[p] * x[self.l_rows[p]];
            }
            x[j] = xj;
        }
        x
    }
}
