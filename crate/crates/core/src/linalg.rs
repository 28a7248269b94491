//! Sparse direct solves with a reusable symbolic factorisation.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("sparsity pattern rejected: {0}")]
    Pattern(String),
    #[error("factorisation failed: {0}")]
    Factorisation(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

/// Square sparse matrix with a fixed pattern, refactorised per value set.
///
/// Entries are supplied in the order of the `(row, col)` pattern given at
/// construction; repeated positions are summed.
pub struct SparseSystem {
    n: usize,
    nnz_entries: usize,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    lu_symbolic: Arc<SymbolicLu<usize>>,
}

impl std::fmt::Debug for SparseSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseSystem").field("n", &self.n).field("entries", &self.nnz_entries).finish()
    }
}

impl SparseSystem {
    pub fn new(n: usize, pattern: &[(usize, usize)]) -> Result<Self, LinalgError> {
        let pairs: Vec<Pair<usize, usize>> = pattern.iter().map(|&(row, col)| Pair { row, col }).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| LinalgError::Pattern(format!("{e:?}")))?;
        let params =
            LuSymbolicParams { supernodal_flop_ratio_threshold: SupernodalThreshold::AUTO, ..Default::default() };
        let lu_symbolic = factorize_symbolic_lu(symbolic.as_ref(), params)
            .map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        Ok(Self { n, nnz_entries: pattern.len(), symbolic, argsort, lu_symbolic: Arc::new(lu_symbolic) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor(&self, values: &[f64]) -> Result<Factorisation, LinalgError> {
        if values.len() != self.nnz_entries {
            return Err(LinalgError::Length { expected: self.nnz_entries, got: values.len() });
        }
        let a = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, values)
            .map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        let mut numeric = NumericLu::new();
        let req = self.lu_symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default());
        let mut mem = MemBuffer::try_new(req).map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        self.lu_symbolic
            .factorize_numeric_lu(&mut numeric, a.as_ref(), Par::Seq, MemStack::new(&mut mem), Default::default())
            .map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        Ok(Factorisation { n: self.n, symbolic: Arc::clone(&self.lu_symbolic), numeric })
    }

    pub fn solve(&self, values: &[f64], rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.factor(values)?.solve(rhs)
    }
}

pub struct Factorisation {
    n: usize,
    symbolic: Arc<SymbolicLu<usize>>,
    numeric: NumericLu<usize, f64>,
}

impl Factorisation {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::Length { expected: n, got: rhs.len() });
        }
        let mut x = rhs.to_vec();
        let symbolic: &SymbolicLu<usize> = &self.symbolic;
        let req = symbolic.solve_in_place_scratch::<f64>(1, Par::Seq);
        let mut mem = MemBuffer::try_new(req).map_err(|e| LinalgError::Factorisation(format!("{e:?}")))?;
        let lu = LuRef::new_unchecked(symbolic, &self.numeric);
        lu.solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(&mut x, n, 1),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Factorisation("non-finite solution".into()));
        }
        Ok(x)
    }
}
