//! Sparse-matrix numerics: positivity of an SCC (rank-based and
//! power-iteration methods), eigenvector computation, and the
//! absorbing outer system.
//!
//! Everything runs in double precision; the convergence threshold
//! defaults to 1e-10 and both dense fallbacks are capped at
//! [`DENSE_CAP`] unknowns.

use crate::error::{Error, Result};
use crate::product::{NodeId, ProductAutomaton};

/// Largest dimension for which dense (rank / LU) procedures run.
pub const DENSE_CAP: usize = 4096;

/// Default pivot tolerance of the rank computation, relative to the
/// row maximum (`--rank-tol`).
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Residual target of the absorbing-system solver.
pub const ABSORBING_RESIDUAL: f64 = 1e-12;

const MAX_SWEEPS: usize = 1_000_000;

/// Row-sparse square matrix; no explicit zeros are stored.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows
            .iter()
            .all(|r| r.iter().all(|&(c, w)| c < rows.len() && w != 0.0)));
        SparseMatrix { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// y = M x
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, w)| w * x[c]).sum())
            .collect()
    }

    fn dense_minus_identity(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                a[i][c] += w;
            }
            a[i][i] -= 1.0;
        }
        a
    }
}

/// The equation-system matrix of one SCC of the product: the row of
/// node `u` holds `P(s,t)` once per automaton successor that stays
/// inside the component.
pub fn scc_matrix(prod: &ProductAutomaton, component: &[NodeId]) -> SparseMatrix {
    let mut local = vec![usize::MAX; prod.num_nodes()];
    for (i, &u) in component.iter().enumerate() {
        local[u] = i;
    }
    let rows = component
        .iter()
        .map(|&u| {
            prod.row(u)
                .iter()
                .filter_map(|&(v, w)| (local[v] != usize::MAX).then_some((local[v], w)))
                .collect()
        })
        .collect();
    SparseMatrix::new(rows)
}

/// Verdict of the eigenvector iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The component contributes probability zero.
    Zero,
    /// Spectral radius 1: a strictly positive eigenvector exists.
    Positive,
}

/// Outcome of [`power_iterate`].
#[derive(Debug, Clone)]
pub struct PowerResult {
    pub verdict: Verdict,
    /// Strictly positive eigenvector estimate when `Positive`.
    pub vector: Option<Vec<f64>>,
    pub iterations: usize,
    /// Whether the rank-based fallback had to decide.
    pub used_rank_fallback: bool,
}

/// Rank-based positivity: the SCC is positive iff `M - I` is rank
/// deficient. Rank via dense Gaussian elimination with partial
/// pivoting; a pivot counts as nonzero when it exceeds `rank_tol`
/// relative to its row's original magnitude.
pub fn positivity_rank(m: &SparseMatrix, rank_tol: f64) -> Result<bool> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::Precondition("rank of a 0-dimensional matrix".into()));
    }
    if n > DENSE_CAP {
        return Err(Error::Numeric(format!(
            "rank computation needs a dense {n}x{n} matrix, cap is {DENSE_CAP}; \
             use the power-iteration method"
        )));
    }
    let rank = eliminate(&mut m.dense_minus_identity().to_vec(), rank_tol).0;
    Ok(rank < n)
}

/// Forward elimination with partial pivoting; returns (rank, pivot
/// column per eliminated row). The matrix is modified in place to row
/// echelon form.
fn eliminate(a: &mut [Vec<f64>], rank_tol: f64) -> (usize, Vec<usize>) {
    let n = a.len();
    let row_scale: Vec<f64> = a
        .iter()
        .map(|row| row.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    let mut scale_of = row_scale; // follows row swaps
    let mut rank = 0usize;
    let mut pivot_cols = Vec::new();
    for col in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for r in rank..n {
            let v = a[r][col].abs();
            if v > rank_tol * scale_of[r].max(f64::MIN_POSITIVE) {
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((r, v));
                }
            }
        }
        let Some((piv, _)) = best else { continue };
        a.swap(rank, piv);
        scale_of.swap(rank, piv);
        for r in rank + 1..n {
            if a[r][col] != 0.0 {
                let f = a[r][col] / a[rank][col];
                for c in col..n {
                    a[r][c] -= f * a[rank][c];
                }
                a[r][col] = 0.0;
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == n {
            break;
        }
    }
    (rank, pivot_cols)
}

/// A vector in the null space of `M - I` (the eigenvector for
/// eigenvalue 1), sign-normalized to positive sum.
pub fn null_space_vector(m: &SparseMatrix, rank_tol: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    if n > DENSE_CAP {
        return Err(Error::Numeric(format!(
            "null-space computation needs a dense {n}x{n} matrix, cap is {DENSE_CAP}"
        )));
    }
    let mut a = m.dense_minus_identity();
    let (rank, pivot_cols) = eliminate(&mut a, rank_tol);
    if rank == n {
        return Err(Error::Numeric(
            "matrix has full rank, no eigenvector for eigenvalue 1".into(),
        ));
    }
    // first free column; nullity is 1 for irreducible inputs
    let free = (0..n)
        .find(|c| !pivot_cols.contains(c))
        .expect("rank < n implies a free column");
    let mut x = vec![0.0; n];
    x[free] = 1.0;
    for (r, &pc) in pivot_cols.iter().enumerate().rev() {
        let s: f64 = (pc + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[pc] = -s / a[r][pc];
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(x)
}

/// Iterates `v(0) = 1`, `v(i+1) = (I + M)/2 · v(i)`.
///
/// A step in which every component shrinks by at least the relative
/// factor `1 - eps` certifies spectral radius < 1 (verdict `Zero`); a
/// step of relative size at most `eps/2` yields the eigenvector
/// (verdict `Positive`, with `‖Mv - v‖∞ ≤ eps·‖v‖∞`). If neither
/// occurs within `max_iter` steps, the rank-based check decides, and a
/// positive verdict restarts the iteration from the null-space vector.
pub fn power_iterate(
    m: &SparseMatrix,
    eps: f64,
    max_iter: usize,
    rank_tol: f64,
) -> Result<PowerResult> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::Precondition("power iteration on an empty matrix".into()));
    }
    if eps <= 0.0 {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }

    let mut v = vec![1.0; n];
    if let Some(res) = iterate_from(m, &mut v, eps, max_iter, 0) {
        return Ok(res);
    }

    // undecided after max_iter: let the rank method break the tie
    if !positivity_rank(m, rank_tol)? {
        return Ok(PowerResult {
            verdict: Verdict::Zero,
            vector: None,
            iterations: max_iter,
            used_rank_fallback: true,
        });
    }
    let mut v = null_space_vector(m, rank_tol)?;
    let extra = max_iter.min(10 * n + 1000);
    match iterate_from(m, &mut v, eps, extra, max_iter) {
        Some(mut res) if res.verdict == Verdict::Positive => {
            res.used_rank_fallback = true;
            Ok(res)
        }
        _ => Err(Error::Numeric(
            "power iteration did not converge and disagrees with the rank-based \
             fallback; raise --max-iter"
                .into(),
        )),
    }
}

fn iterate_from(
    m: &SparseMatrix,
    v: &mut Vec<f64>,
    eps: f64,
    steps: usize,
    base_iterations: usize,
) -> Option<PowerResult> {
    for it in 1..=steps {
        let mv = m.mul(v);
        let w: Vec<f64> = v.iter().zip(&mv).map(|(a, b)| 0.5 * (a + b)).collect();

        if w.iter().zip(v.iter()).all(|(wq, vq)| *wq <= (1.0 - eps) * vq) {
            return Some(PowerResult {
                verdict: Verdict::Zero,
                vector: None,
                iterations: base_iterations + it,
                used_rank_fallback: false,
            });
        }

        let vmax = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let diff = w
            .iter()
            .zip(v.iter())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if diff <= 0.5 * eps * vmax && v.iter().all(|&x| x > 0.0) {
            // v(i) satisfies ‖Mv - v‖∞ = 2‖v(i+1) - v(i)‖∞ ≤ eps·‖v‖∞
            return Some(PowerResult {
                verdict: Verdict::Positive,
                vector: Some(v.clone()),
                iterations: base_iterations + it,
                used_rank_fallback: false,
            });
        }
        *v = w;
    }
    None
}

/// Solves `ζ = Aζ + b` for the absorbing part of the system (spectral
/// radius of `A` below 1): Gauss–Seidel sweeps to a residual of
/// [`ABSORBING_RESIDUAL`], dense LU as fallback.
pub fn solve_absorbing(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    assert_eq!(n, b.len());
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut x = vec![0.0; n];
    for _ in 0..MAX_SWEEPS {
        for i in 0..n {
            let mut diag = 0.0;
            let mut acc = b[i];
            for &(c, w) in a.row(i) {
                if c == i {
                    diag += w;
                } else {
                    acc += w * x[c];
                }
            }
            // diag < 1 since ρ(A) < 1
            x[i] = acc / (1.0 - diag);
        }
        let residual = a
            .mul(&x)
            .iter()
            .zip(b)
            .zip(&x)
            .fold(0.0f64, |m, ((ax, bi), xi)| m.max((xi - (ax + bi)).abs()));
        if residual <= ABSORBING_RESIDUAL {
            return Ok(x);
        }
    }

    if n > DENSE_CAP {
        return Err(Error::Numeric(format!(
            "absorbing system of dimension {n} did not converge in {MAX_SWEEPS} sweeps \
             and exceeds the dense fallback cap {DENSE_CAP}; raise --max-iter"
        )));
    }
    // (I - A) x = b
    let mut dense = vec![vec![0.0; n]; n];
    for (i, row) in dense.iter_mut().enumerate() {
        row[i] = 1.0;
        for &(c, w) in a.row(i) {
            row[c] -= w;
        }
    }
    let x = lu_solve(dense, b.to_vec()).ok_or_else(|| {
        Error::Numeric("absorbing system is singular; its precondition is violated".into())
    })?;
    let residual = a
        .mul(&x)
        .iter()
        .zip(b)
        .zip(&x)
        .fold(0.0f64, |m, ((ax, bi), xi)| m.max((xi - (ax + bi)).abs()));
    if residual > ABSORBING_RESIDUAL * 10.0 {
        return Err(Error::Numeric(format!(
            "absorbing system residual {residual:.3e} after dense fallback"
        )));
    }
    Ok(x)
}

/// Dense LU solve with partial pivoting; `None` on singular systems.
fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| {
            a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap()
        })?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Convenience: the matrix of the largest (dominant) SCC of a product.
#[cfg(test)]
fn dominant_scc(prod: &ProductAutomaton, dag: &crate::graph::SccDag) -> Vec<NodeId> {
    dag.components()
        .iter()
        .max_by_key(|c| c.len())
        .cloned()
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset::BitSet;
    use crate::families;
    use crate::graph;
    use crate::markov::uniform_chain;
    use crate::product::build_product;

    const EPS: f64 = 1e-10;

    fn uniform_product(nba: &crate::automata::Nba) -> ProductAutomaton {
        let chain = uniform_chain(nba.alphabet()).unwrap();
        build_product(&chain, nba).unwrap()
    }

    fn fig1_right_matrix() -> SparseMatrix {
        let prod = uniform_product(&families::fig1_right());
        let dag = graph::sccs(&prod, &BitSet::full(prod.num_nodes()));
        assert_eq!(dag.num_components(), 1);
        scc_matrix(&prod, &dag.components()[0])
    }

    #[test]
    fn fig1_right_scc_matrix_rows() {
        let m = fig1_right_matrix();
        assert_eq!(m.dim(), 4);
        for i in 0..4 {
            let row = m.row(i);
            assert_eq!(row.len(), 2);
            assert!(row.iter().all(|&(_, w)| w == 0.5));
        }
    }

    #[test]
    fn single_node_self_loop_matrix() {
        let rows = vec![vec![(0, 0.5)]];
        let m = SparseMatrix::new(rows);
        assert_eq!(m.dim(), 1);
        // rank(M - I) = rank([-1/2]) = 1 = n: not positive
        assert!(!positivity_rank(&m, DEFAULT_RANK_TOL).unwrap());
    }

    #[test]
    fn rank_method_on_fixture_sccs() {
        // universal two-state fixture: positive (measure 1)
        assert!(positivity_rank(&fig1_right_matrix(), DEFAULT_RANK_TOL).unwrap());

        // dominant SCC of the inhibited automaton: not positive
        let prod = uniform_product(&families::nearly_complete_automaton(5));
        let dag = graph::sccs(&prod, &BitSet::full(prod.num_nodes()));
        let comp = dominant_scc(&prod, &dag);
        assert_eq!(comp.len(), 250);
        let m = scc_matrix(&prod, &comp);
        assert!(!positivity_rank(&m, DEFAULT_RANK_TOL).unwrap());

        assert!(positivity_rank(
            &SparseMatrix::new(vec![]),
            DEFAULT_RANK_TOL
        )
        .is_err());
    }

    #[test]
    fn power_iteration_positive_on_fig1_right() {
        let m = fig1_right_matrix();
        let res = power_iterate(&m, EPS, 1_000_000, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(res.verdict, Verdict::Positive);
        assert!(res.iterations < 20, "took {}", res.iterations);
        let v = res.vector.unwrap();
        // symmetric doubly-half matrix: eigenvector is constant
        for &x in &v {
            assert!((x - v[0]).abs() <= 1e-9);
        }
    }

    #[test]
    fn power_iteration_zero_on_nearly_complete() {
        let prod = uniform_product(&families::nearly_complete_automaton(5));
        let dag = graph::sccs(&prod, &BitSet::full(prod.num_nodes()));
        let m = scc_matrix(&prod, &dominant_scc(&prod, &dag));
        let res = power_iterate(&m, EPS, 1_000_000, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(res.verdict, Verdict::Zero);
        assert!(!res.used_rank_fallback);
        assert!(res.iterations <= 200, "took {}", res.iterations);
    }

    #[test]
    fn power_iteration_positive_on_complete_within_bound() {
        let prod = uniform_product(&families::complete_automaton(5));
        let dag = graph::sccs(&prod, &BitSet::full(prod.num_nodes()));
        let comp = dominant_scc(&prod, &dag);
        assert_eq!(comp.len(), 258);
        let m = scc_matrix(&prod, &comp);
        let res = power_iterate(&m, EPS, 1_000_000, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(res.verdict, Verdict::Positive);
        assert!(res.iterations <= 1000, "took {}", res.iterations);
        let v = res.vector.unwrap();
        assert!(v.iter().all(|&x| x > 0.0));
        // residual bound of the returned iterate
        let mv = m.mul(&v);
        let vmax = v.iter().cloned().fold(0.0f64, f64::max);
        let res_norm = mv
            .iter()
            .zip(&v)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(res_norm <= EPS * vmax * 1.01);
    }

    #[test]
    fn methods_agree_on_fixture_sccs() {
        for (nba, _) in [
            (families::fig1_right(), ()),
            (families::complete_automaton(3), ()),
            (families::nearly_complete_automaton(3), ()),
            (families::blw13().0, ()),
        ] {
            let chain = match nba.alphabet().len() {
                2 => uniform_chain(nba.alphabet()).unwrap(),
                _ => uniform_chain(nba.alphabet()).unwrap(),
            };
            let prod = build_product(&chain, &nba).unwrap();
            let (alive, dag) =
                graph::prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
            let _ = alive;
            for comp in dag.components() {
                if comp.len() < 1 || dag.components().len() == 0 {
                    continue;
                }
                let has_edge = comp.iter().any(|&u| {
                    prod.row(u).iter().any(|&(v, _)| comp.contains(&v))
                });
                if !has_edge {
                    continue;
                }
                let m = scc_matrix(&prod, comp);
                let rank_positive = positivity_rank(&m, DEFAULT_RANK_TOL).unwrap();
                let power =
                    power_iterate(&m, EPS, 1_000_000, DEFAULT_RANK_TOL).unwrap();
                assert_eq!(
                    rank_positive,
                    power.verdict == Verdict::Positive,
                    "methods disagree on a component"
                );
            }
        }
    }

    /// ρ(M) ≤ 1 for SCC matrices of products: iterates stay bounded by
    /// the dimension even though single steps may overshoot when rows
    /// carry several automaton successors.
    #[test]
    fn power_iterates_stay_bounded() {
        let prod = uniform_product(&families::complete_automaton(3));
        let dag = graph::sccs(&prod, &BitSet::full(prod.num_nodes()));
        let m = scc_matrix(&prod, &dominant_scc(&prod, &dag));
        let n = m.dim() as f64;
        let mut v = vec![1.0; m.dim()];
        for _ in 0..500 {
            let mv = m.mul(&v);
            v = v.iter().zip(&mv).map(|(a, b)| 0.5 * (a + b)).collect();
            let max = v.iter().cloned().fold(0.0f64, f64::max);
            assert!(max <= n + 1e-6, "iterate exceeded dimension bound: {max}");
        }
    }

    #[test]
    fn solve_absorbing_direct_cases() {
        // A = [[0]], b = [0.7]
        let a = SparseMatrix::new(vec![vec![]]);
        let x = solve_absorbing(&a, &[0.7]).unwrap();
        assert!((x[0] - 0.7).abs() < 1e-12);

        // A = [[0, 1/2], [0, 0]], b = [1/4, 1/2] -> [1/2, 1/2]
        let a = SparseMatrix::new(vec![vec![(1, 0.5)], vec![]]);
        let x = solve_absorbing(&a, &[0.25, 0.5]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!((x[1] - 0.5).abs() < 1e-12);

        // self-loop: x = 0.5 x + 0.25 -> 0.5
        let a = SparseMatrix::new(vec![vec![(0, 0.5)]]);
        let x = solve_absorbing(&a, &[0.25]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn null_space_vector_of_positive_scc_is_positive() {
        let m = fig1_right_matrix();
        let v = null_space_vector(&m, DEFAULT_RANK_TOL).unwrap();
        assert!(v.iter().all(|&x| x > 0.0));
        let mv = m.mul(&v);
        for (a, b) in mv.iter().zip(&v) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
