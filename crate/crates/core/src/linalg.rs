//! Sparse symmetric assembly and the LDL^T solve used by the bordered system.
//!
//! The factorization works without pivoting because the tangent becomes
//! indefinite once cracks soften. Every solution is checked against the
//! assembled matrix and, if needed, improved by one refinement pass.

use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};
use thiserror::Error;

/// Relative residual accepted for a linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve residual {residual:.3e} exceeds tolerance")]
    Inaccurate { residual: f64 },
    #[error("system is empty")]
    Empty,
}

/// Triplet accumulator for a square matrix.
#[derive(Debug)]
pub struct Assembler {
    size: usize,
    triplets: TriMat<f64>,
}

impl Assembler {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            triplets: TriMat::new((size, size)),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Adds a dense element block. `map[i]` is the global row of local row
    /// `i`, or `None` for eliminated degrees of freedom.
    pub fn add_block(&mut self, map: &[Option<usize>], block: &nalgebra::DMatrix<f64>) {
        for (i, gi) in map.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in map.iter().enumerate() {
                let Some(gj) = *gj else { continue };
                let v = block[(i, j)];
                if v != 0.0 {
                    self.triplets.add_triplet(gi, gj, v);
                }
            }
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.add_triplet(row, col, value);
    }

    /// Compressed column matrix with duplicates summed.
    pub fn finish(&self) -> CsMat<f64> {
        self.triplets.to_csc()
    }
}

/// Sparse matrix-vector product.
pub fn mat_vec(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    for (v, (r, c)) in a.iter() {
        y[r] += v * x[c];
    }
    y
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest absolute asymmetry relative to the largest entry.
pub fn asymmetry(a: &CsMat<f64>) -> f64 {
    let max = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let t = a.transpose_view().to_csc();
    let diff = a - &t;
    diff.data().iter().fold(0.0f64, |m, v| m.max(v.abs())) / max
}

/// LDL^T factorization of a symmetric matrix that keeps its symbolic phase
/// while the sparsity pattern stays the same.
pub struct SymmetricSolver {
    factor: Option<Factor>,
}

enum Factor {
    Scalar(f64),
    Sparse(Vec<usize>, Vec<usize>, LdlNumeric<f64, usize>),
}

impl Factor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Scalar(d) => vec![b[0] / d],
            Factor::Sparse(_, _, ldl) => ldl.solve(b),
        }
    }
}

impl Default for SymmetricSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for SymmetricSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymmetricSolver")
            .field("factored", &self.factor.is_some())
            .finish()
    }
}

impl SymmetricSolver {
    pub fn new() -> Self {
        Self { factor: None }
    }

    /// Factorizes `a`, reusing the previous symbolic analysis when possible.
    pub fn factorize(&mut self, a: &CsMat<f64>) -> Result<(), LinalgError> {
        if a.rows() == 0 {
            return Err(LinalgError::Empty);
        }
        let a = if a.is_csc() { a.clone() } else { a.to_csc() };
        // Round-off in assembly leaves a_ij and a_ji a few ulps apart; the
        // factorization only reads one triangle, so average them.
        let at = a.transpose_view().to_csc();
        let a = (&a + &at).map(|v| 0.5 * v);
        if a.rows() == 1 {
            let d = a.get(0, 0).copied().unwrap_or(0.0);
            if d == 0.0 || !d.is_finite() {
                self.factor = None;
                return Err(LinalgError::Factorization("zero pivot".into()));
            }
            self.factor = Some(Factor::Scalar(d));
            return Ok(());
        }
        if let Some(Factor::Sparse(indptr, indices, ldl)) = self.factor.as_mut() {
            if indptr.as_slice() == a.indptr().raw_storage() && indices.as_slice() == a.indices() {
                return match ldl.update(a.view()) {
                    Ok(()) => Ok(()),
                    Err(e) => {
                        self.factor = None;
                        Err(LinalgError::Factorization(e.to_string()))
                    }
                };
            }
        }
        let ldl = Ldl::new()
            .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
            .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
            .numeric(a.view())
            .map_err(|e| LinalgError::Factorization(e.to_string()))?;
        self.factor = Some(Factor::Sparse(a.indptr().raw_storage().to_vec(), a.indices().to_vec(), ldl));
        Ok(())
    }

    /// Solves `a x = b` with the current factorization of `a`.
    pub fn solve(&self, a: &CsMat<f64>, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let ldl = self
            .factor
            .as_ref()
            .ok_or_else(|| LinalgError::Factorization("matrix not factorized".into()))?;
        let b_norm = norm(b);
        if b_norm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x: Vec<f64> = ldl.solve(b);
        let residual = |x: &[f64]| -> Vec<f64> {
            let ax = mat_vec(a, x);
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        let mut r = residual(&x);
        if norm(&r) > SOLVE_TOL * b_norm || !x.iter().all(|v| v.is_finite()) {
            let dx: Vec<f64> = ldl.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = residual(&x);
        }
        let rel = norm(&r) / b_norm;
        if rel.is_finite() && rel <= SOLVE_TOL {
            Ok(x)
        } else {
            Err(LinalgError::Inaccurate { residual: rel })
        }
    }
}

/// Factorizes `a` once and solves for two right-hand sides.
pub fn solve_two(
    solver: &mut SymmetricSolver,
    a: &CsMat<f64>,
    b1: &[f64],
    b2: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    solver.factorize(a)?;
    Ok((solver.solve(a, b1)?, solver.solve(a, b2)?))
}
