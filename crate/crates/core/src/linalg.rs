//! Sparse storage, constraint elimination and direct solves.
//!
//! Matrices are assembled as coordinate triplets and consolidated into a
//! compressed-row layout whose pattern always contains the diagonal. The
//! pattern is kept fixed afterwards (eliminated entries become explicit
//! zeros), so a symbolic LU factorization can be reused across time steps.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use crate::error::LinalgError;

/// Relative residual `‖Ax − b‖₂ / max(1, ‖b‖₂)` every solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            i < self.n && j < self.n,
            "({i},{j}) outside {0}x{0}",
            self.n
        );
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Sums duplicates; the diagonal is always present in the pattern.
    pub fn build(&self) -> CsrMatrix {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &r in &self.rows {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += 1; // diagonal slot
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let total = counts[n];
        let mut cols = vec![0usize; total];
        let mut vals = vec![0.0; total];
        for i in 0..n {
            cols[next[i]] = i;
            next[i] += 1;
        }
        for k in 0..self.vals.len() {
            let r = self.rows[k];
            cols[next[r]] = self.cols[k];
            vals[next[r]] = self.vals[k];
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n {
            let (s, e) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(s..e);
            // stable sort keeps insertion order among duplicates, so summation is reproducible
            order.sort_by_key(|&k| cols[k]);
            let mut last = usize::MAX;
            for &k in &order {
                if cols[k] == last {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = cols[k];
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Index into `values` of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds to an entry that must already be in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                d[i][j] += a;
            }
        }
        d
    }

    /// Compressed-column copy for the factorization backend.
    fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.n;
        let mut col_ptr = vec![0usize; n + 1];
        for &j in &self.col_idx {
            col_ptr[j + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                row_idx[next[j]] = i;
                vals[next[j]] = self.values[k];
                next[j] += 1;
            }
        }
        (col_ptr, row_idx, vals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Result<Self, LinalgError> {
        if rhs.len() != matrix.n {
            return Err(LinalgError::DimensionMismatch {
                expected: matrix.n,
                found: rhs.len(),
            });
        }
        Ok(Self { matrix, rhs })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    /// Symmetric elimination of Dirichlet values: constrained rows become
    /// identity rows carrying the value in the right-hand side, and the
    /// constrained columns are moved into the right-hand side of free rows.
    pub fn apply_constraints(&mut self, constraints: &[(usize, f64)]) {
        if constraints.is_empty() {
            return;
        }
        let n = self.matrix.n;
        let mut value: Vec<Option<f64>> = vec![None; n];
        for &(d, g) in constraints {
            value[d] = Some(g);
        }
        let m = &mut self.matrix;
        for i in 0..n {
            let (s, e) = (m.row_ptr[i], m.row_ptr[i + 1]);
            if let Some(g) = value[i] {
                for k in s..e {
                    m.values[k] = if m.col_idx[k] == i { 1.0 } else { 0.0 };
                }
                self.rhs[i] = g;
            } else {
                for k in s..e {
                    if let Some(g) = value[m.col_idx[k]] {
                        self.rhs[i] -= m.values[k] * g;
                        m.values[k] = 0.0;
                    }
                }
            }
        }
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        ax.iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Reusable LU factorization. The symbolic analysis is shared by any matrix
/// with the same pattern; the numeric factors are reused when the values are
/// unchanged too.
#[derive(Clone)]
pub struct Factorization {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &(self.row_ptr.len() - 1))
            .field("nnz", &self.values.len())
            .finish()
    }
}

impl Factorization {
    fn matches_pattern(&self, m: &CsrMatrix) -> bool {
        self.row_ptr == m.row_ptr && self.col_idx == m.col_idx
    }

    fn factor(m: &CsrMatrix, symbolic: Option<SymbolicLu<usize>>) -> Result<Self, LinalgError> {
        let n = m.n;
        let (col_ptr, row_idx, vals) = m.to_csc();
        let sym = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let symbolic = match symbolic {
            Some(s) => s,
            None => SymbolicLu::try_new(sym.as_ref())
                .map_err(|e| LinalgError::Backend(format!("{e:?}")))?,
        };
        let mat = SparseColMat::new(sym, vals);
        // the backend panics on an exactly zero pivot instead of returning an error
        let attempt = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            Lu::try_new_with_symbolic(symbolic.clone(), mat.as_ref())
        }));
        let lu = match attempt {
            Ok(Ok(lu)) => lu,
            Ok(Err(faer::sparse::linalg::LuError::SymbolicSingular { index })) => {
                return Err(LinalgError::Singular { pivot: Some(index) })
            }
            Ok(Err(other)) => return Err(LinalgError::Backend(format!("{other:?}"))),
            Err(_) => return Err(LinalgError::Singular { pivot: zero_row(m) }),
        };
        Ok(Self {
            row_ptr: m.row_ptr.clone(),
            col_idx: m.col_idx.clone(),
            values: m.values.clone(),
            symbolic,
            lu,
        })
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }
}

fn zero_row(m: &CsrMatrix) -> Option<usize> {
    (0..m.n).find(|&i| m.row(i).all(|(_, a)| a == 0.0))
}

/// Solves `A x = b`, reusing `reuse` when possible, and returns the handle
/// for the next call.
pub fn solve(
    system: &SparseSystem,
    reuse: Option<Factorization>,
) -> Result<(Vec<f64>, Factorization), LinalgError> {
    solve_with_tolerance(system, reuse, SOLVE_TOLERANCE)
}

/// [`solve`] with a caller-chosen relative residual tolerance.
pub fn solve_with_tolerance(
    system: &SparseSystem,
    reuse: Option<Factorization>,
    tolerance: f64,
) -> Result<(Vec<f64>, Factorization), LinalgError> {
    let m = &system.matrix;
    if system.rhs.len() != m.n {
        return Err(LinalgError::DimensionMismatch {
            expected: m.n,
            found: system.rhs.len(),
        });
    }
    let fact = match reuse {
        Some(f) if f.matches_pattern(m) && f.values == m.values => f,
        Some(f) if f.matches_pattern(m) => Factorization::factor(m, Some(f.symbolic))?,
        _ => Factorization::factor(m, None)?,
    };

    let mut x = fact.apply(&system.rhs);
    if let Some(pivot) = x.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::Singular { pivot: Some(pivot) });
    }
    let scale = system
        .rhs
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    let mut res = system.residual_norm(&x) / scale;
    for _ in 0..MAX_REFINEMENT_STEPS {
        if res <= tolerance {
            break;
        }
        let ax = m.matvec(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = fact.apply(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        res = system.residual_norm(&x) / scale;
    }
    if !(res <= tolerance) {
        if !res.is_finite() {
            return Err(LinalgError::Singular {
                pivot: x.iter().position(|v| !v.is_finite()),
            });
        }
        return Err(LinalgError::Inaccurate {
            residual: res,
            tolerance,
        });
    }
    Ok((x, fact))
}
