//! Complex-valued linear algebra and deterministic random-number generation.
//!
//! Everything downstream (channel draws, AN projection, detection, secrecy
//! estimation) is built on the primitives in this module. All operations are
//! pure functions of their inputs; matrices are immutable once constructed and
//! safe to share across workers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;
/// Complex column vector.
pub type CVector = DVector<Complex64>;

/// Relative tolerance for numerical rank decisions, applied as `RANK_TOL * sigma_max`.
pub const RANK_TOL: f64 = 1e-10;

/// SplitMix64 finalizer. Used to derive statistically independent stream ids.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random-number stream.
///
/// A stream is identified by a `(seed, stream_id)` pair: identical pairs yield
/// bit-identical draw sequences, and distinct stream ids yield statistically
/// independent sequences. Streams are cheap value types; each Monte-Carlo
/// worker owns its own stream, so trial outcomes do not depend on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    /// Root stream for a seed.
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    /// Stream with an explicit id.
    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derives a sub-stream. Derivation mixes the tag into the stream id, so
    /// sub-streams of distinct tags (and of distinct parents) do not collide.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws one circularly-symmetric complex Gaussian sample with per-sample
/// variance `variance` (real and imaginary parts each carry `variance / 2`).
///
/// The sample is formed as `base * sqrt(variance)` where `base` is a unit
/// variance draw, so samples from the same stream position scale exactly with
/// `sqrt(variance)`.
pub fn complex_gaussian_sample<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let base = Complex64::new(
        re * std::f64::consts::FRAC_1_SQRT_2,
        im * std::f64::consts::FRAC_1_SQRT_2,
    );
    base * variance.sqrt()
}

/// Fills a `rows x cols` matrix with i.i.d. circularly-symmetric complex
/// Gaussian entries of per-entry variance `variance`.
///
/// Entries are drawn in row-major order (row by row), real part before
/// imaginary part, so the draw sequence is part of the function's contract.
pub fn complex_gaussian_matrix<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    assert!(variance > 0.0, "variance must be positive");
    let entries: Vec<Complex64> = (0..rows * cols)
        .map(|_| complex_gaussian_sample(rng, variance))
        .collect();
    CMatrix::from_row_iterator(rows, cols, entries)
}

/// Vector variant of [`complex_gaussian_matrix`].
pub fn complex_gaussian_vector<R: Rng>(rng: &mut R, len: usize, variance: f64) -> CVector {
    assert!(variance > 0.0, "variance must be positive");
    CVector::from_iterator(len, (0..len).map(|_| complex_gaussian_sample(rng, variance)))
}

/// Largest singular value of `a`, or 0 for an empty matrix.
pub fn sigma_max(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().fold(0.0, |m, &s| m.max(s))
}

struct Householder {
    v: CVector,
    beta: f64,
}

/// Householder QR of a tall matrix (rows >= cols), returning the reflector
/// sequence and the diagonal magnitudes of R.
fn householder_qr(b: &CMatrix) -> (Vec<Householder>, Vec<f64>) {
    let (rows, cols) = b.shape();
    debug_assert!(rows >= cols);
    let mut work = b.clone();
    let mut reflectors = Vec::with_capacity(cols);
    let mut r_diag = Vec::with_capacity(cols);
    for j in 0..cols {
        let x = work.view((j, j), (rows - j, 1)).into_owned();
        let norm = x.norm();
        if norm == 0.0 {
            r_diag.push(0.0);
            reflectors.push(Householder {
                v: CVector::zeros(rows - j),
                beta: 0.0,
            });
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        let mut v = x.column(0).into_owned();
        v[0] -= alpha;
        let v_norm_sq = v.norm_squared();
        let beta = if v_norm_sq == 0.0 { 0.0 } else { 2.0 / v_norm_sq };
        // Apply H = I - beta v v^H to the trailing block of the work matrix.
        for c in j..cols {
            let col = work.view((j, c), (rows - j, 1)).into_owned();
            let coef = v.dotc(&col) * beta;
            for r in 0..rows - j {
                work[(j + r, c)] -= v[r] * coef;
            }
        }
        r_diag.push(work[(j, j)].norm());
        reflectors.push(Householder { v, beta });
    }
    (reflectors, r_diag)
}

/// Orthonormal basis of the null space of `a`.
///
/// Computed from a Householder QR of `a^H`: the reflectors are applied to the
/// trailing columns of the identity, which span the orthogonal complement of
/// the row space. Rank decisions use the fixed tolerance
/// [`RANK_TOL`]` * sigma_max`.
///
/// Returns `N` with `cols(N) = cols(a) - rows(a)`, `a * N ~ 0` and
/// `N^H * N = I` to within numerical precision.
pub fn orthonormal_null_basis(a: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if cols <= rows {
        return Err(Error::EmptyNullSpace { rows, cols });
    }
    let smax = sigma_max(a);
    let (reflectors, r_diag) = householder_qr(&a.adjoint());
    let rank = r_diag.iter().filter(|&&d| d > RANK_TOL * smax).count();
    if rank < rows {
        return Err(Error::RankDeficient { rank, rows });
    }
    // Trailing columns of Q = H_0 H_1 ... H_{r-1}, materialized by applying
    // the reflectors in reverse order to the last cols - rows identity columns.
    let dim = cols - rows;
    let mut basis = CMatrix::zeros(cols, dim);
    for k in 0..dim {
        basis[(rows + k, k)] = Complex64::new(1.0, 0.0);
    }
    for (j, h) in reflectors.iter().enumerate().rev() {
        if h.beta == 0.0 {
            continue;
        }
        let sub_rows = cols - j;
        for c in 0..dim {
            let col = basis.view((j, c), (sub_rows, 1)).into_owned();
            let coef = h.v.dotc(&col) * h.beta;
            for r in 0..sub_rows {
                basis[(j + r, c)] -= h.v[r] * coef;
            }
        }
    }
    Ok(basis)
}

/// Moore-Penrose pseudo-inverse with relative truncation: singular values
/// below `tol * sigma_max` are treated as zero.
pub fn pseudo_inverse(a: &CMatrix, tol: f64) -> CMatrix {
    assert!(tol >= 0.0, "tol must be nonnegative");
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cutoff = tol * smax;
    let k = svd.singular_values.len();
    let mut pinv = CMatrix::zeros(cols, rows);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > 0.0 && s >= cutoff {
            let vi = v_t.row(i).adjoint(); // column i of V
            let ui = u.column(i);
            let scale = Complex64::new(1.0 / s, 0.0);
            // pinv += (v_i / s) u_i^H
            for r in 0..cols {
                for c in 0..rows {
                    pinv[(r, c)] += vi[r] * scale * ui[c].conj();
                }
            }
        }
    }
    pinv
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
///
/// Unlike a generic complex factorization, this rejects inputs whose pivots
/// are not strictly positive reals, which is the actual positive-definiteness
/// test.
pub fn cholesky_lower(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let diag = d.sqrt();
        l[(j, j)] = Complex64::new(diag, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for Hermitian positive definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let l = cholesky_lower(a)?;
    let y = l
        .solve_lower_triangular(b)
        .ok_or(Error::NotPositiveDefinite)?;
    l.adjoint()
        .solve_upper_triangular(&y)
        .ok_or(Error::NotPositiveDefinite)
}

/// Pivoted Cholesky factorization of a Hermitian positive semidefinite
/// matrix: returns `L` (`n x r`) with `L L^H ~ G` and the numerical rank `r`.
/// Pivots select the largest remaining diagonal (smallest index on ties);
/// the factorization stops once every remaining pivot is at most
/// `tol * max_initial_diagonal`.
pub fn pivoted_cholesky(g: &CMatrix, tol: f64) -> (CMatrix, usize) {
    let n = g.nrows();
    assert_eq!(n, g.ncols(), "square matrix required");
    let mut diag: Vec<f64> = (0..n).map(|i| g[(i, i)].re).collect();
    let cutoff = tol * diag.iter().cloned().fold(0.0f64, f64::max);
    let mut l = CMatrix::zeros(n, n);
    let mut selected = vec![false; n];
    let mut rank = 0;
    for j in 0..n {
        let mut pivot = None;
        let mut best = cutoff;
        for (i, &d) in diag.iter().enumerate() {
            if !selected[i] && d > best {
                best = d;
                pivot = Some(i);
            }
        }
        let Some(p) = pivot else { break };
        selected[p] = true;
        let piv_sqrt = diag[p].sqrt();
        l[(p, j)] = Complex64::new(piv_sqrt, 0.0);
        for i in 0..n {
            if selected[i] {
                continue;
            }
            let mut s = g[(i, p)];
            for t in 0..j {
                s -= l[(i, t)] * l[(p, t)].conj();
            }
            let v = s / piv_sqrt;
            l[(i, j)] = v;
            diag[i] = (diag[i] - v.norm_sqr()).max(0.0);
        }
        rank = j + 1;
    }
    (l.view((0, 0), (n, rank)).into_owned(), rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_cmatrix(seed: u64, rows: usize, cols: usize) -> CMatrix {
        let mut rng = RngStream::new(seed).rng();
        complex_gaussian_matrix(&mut rng, rows, cols, 1.0)
    }

    #[test]
    fn gaussian_mean_power_is_unit() {
        let m = random_cmatrix(1, 1000, 1000);
        let mean_power: f64 =
            m.iter().map(|e| e.norm_sqr()).sum::<f64>() / (m.nrows() * m.ncols()) as f64;
        assert!(
            (0.99..=1.01).contains(&mean_power),
            "mean |entry|^2 = {mean_power}"
        );
    }

    #[test]
    fn gaussian_is_deterministic_per_stream() {
        let s = RngStream::with_stream(42, 7);
        let a = complex_gaussian_matrix(&mut s.rng(), 8, 5, 1.0);
        let b = complex_gaussian_matrix(&mut s.rng(), 8, 5, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_scales_exactly_with_sqrt_variance() {
        let s = RngStream::new(9);
        let v1 = complex_gaussian_matrix(&mut s.rng(), 6, 6, 1.0);
        let v2 = complex_gaussian_matrix(&mut s.rng(), 6, 6, 2.0);
        let scaled = v1.map(|e| e * 2.0f64.sqrt());
        assert_eq!(scaled, v2);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = complex_gaussian_matrix(&mut RngStream::with_stream(3, 0).rng(), 4, 4, 1.0);
        let b = complex_gaussian_matrix(&mut RngStream::with_stream(3, 1).rng(), 4, 4, 1.0);
        assert_ne!(a, b);
    }

    #[test]
    fn substreams_are_order_independent() {
        let root = RngStream::new(5);
        let draws_a: Vec<f64> = {
            let mut r0 = root.substream(0).rng();
            let mut r1 = root.substream(1).rng();
            // Interleave draws between the two sub-streams.
            let mut out = Vec::new();
            for _ in 0..10 {
                out.push(r0.sample::<f64, _>(StandardNormal));
                out.push(r1.sample::<f64, _>(StandardNormal));
            }
            out
        };
        let draws_b: Vec<f64> = {
            // Consume each sub-stream to completion, in the opposite order.
            let mut r1 = root.substream(1).rng();
            let s1: Vec<f64> = (0..10).map(|_| r1.sample(StandardNormal)).collect();
            let mut r0 = root.substream(0).rng();
            let s0: Vec<f64> = (0..10).map(|_| r0.sample(StandardNormal)).collect();
            s0.iter()
                .zip(s1.iter())
                .flat_map(|(a, b)| [*a, *b])
                .collect()
        };
        assert_eq!(draws_a, draws_b);
    }

    #[test]
    fn null_basis_of_square_identity_is_empty() {
        let a = CMatrix::identity(2, 2);
        match orthonormal_null_basis(&a) {
            Err(Error::EmptyNullSpace { .. }) => {}
            other => panic!("expected EmptyNullSpace, got {other:?}"),
        }
    }

    #[test]
    fn null_basis_of_unit_row_spans_second_axis() {
        let a = CMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        );
        let n = orthonormal_null_basis(&a).unwrap();
        assert_eq!(n.shape(), (2, 1));
        // Spans (0, 1)^T up to unit phase.
        assert!(n[(0, 0)].norm() < 1e-12);
        assert!((n[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_basis_residuals_random_2x4() {
        let a = random_cmatrix(11, 2, 4);
        let n = orthonormal_null_basis(&a).unwrap();
        assert_eq!(n.shape(), (4, 2));
        assert!((&a * &n).norm() < 1e-10 * a.norm());
        let gram = n.adjoint() * &n;
        assert!((gram - CMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn null_basis_residuals_over_many_shapes() {
        let mut rng = RngStream::new(77).rng();
        for i in 0..1000 {
            let rows = 1 + (i % 4);
            let cols = rows + 1 + (i % 5);
            let a = complex_gaussian_matrix(&mut rng, rows, cols, 1.0);
            let n = orthonormal_null_basis(&a).unwrap();
            assert_eq!(n.ncols(), cols - rows);
            assert!((&a * &n).norm() < 1e-10 * a.norm(), "shape {rows}x{cols}");
            let eye = CMatrix::identity(n.ncols(), n.ncols());
            assert!((n.adjoint() * &n - eye).norm() < 1e-10, "shape {rows}x{cols}");
        }
    }

    #[test]
    fn null_basis_detects_rank_deficiency() {
        // Two identical rows: rank 1 < 2.
        let row = random_cmatrix(13, 1, 5);
        let mut a = CMatrix::zeros(2, 5);
        a.row_mut(0).copy_from(&row.row(0));
        a.row_mut(1).copy_from(&row.row(0));
        match orthonormal_null_basis(&a) {
            Err(Error::RankDeficient { rank: 1, rows: 2 }) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn pseudo_inverse_of_identity() {
        let a = CMatrix::identity(3, 3);
        let p = pseudo_inverse(&a, 1e-12);
        assert!((p - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_truncates_zero_singular_values() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = Complex64::new(2.0, 0.0);
        let p = pseudo_inverse(&a, 1e-12);
        assert!((p[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!(p[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose_conditions() {
        for seed in 0..50u64 {
            let a = random_cmatrix(100 + seed, 4, 4);
            let p = pseudo_inverse(&a, 1e-12);
            let scale = a.norm();
            assert!((&a * &p * &a - &a).norm() < 1e-9 * scale);
            assert!((&p * &a * &p - &p).norm() < 1e-9 * p.norm());
            let ap = &a * &p;
            assert!((ap.adjoint() - &ap).norm() < 1e-9 * ap.norm().max(1.0));
            let pa = &p * &a;
            assert!((pa.adjoint() - &pa).norm() < 1e-9 * pa.norm().max(1.0));
        }
    }

    #[test]
    fn hermitian_solve_identity_returns_rhs() {
        let b = random_cmatrix(21, 3, 2);
        let x = hermitian_solve(&CMatrix::identity(3, 3), &b).unwrap();
        assert!((x - b).norm() < 1e-12);
    }

    #[test]
    fn hermitian_solve_scaled_identity() {
        let a = CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0);
        let x = hermitian_solve(&a, &CMatrix::identity(3, 3)).unwrap();
        let expected = CMatrix::identity(3, 3) * Complex64::new(0.5, 0.0);
        assert!((x - expected).norm() < 1e-12);
    }

    #[test]
    fn hermitian_solve_random_spd_residual() {
        let g = random_cmatrix(23, 4, 4);
        let a = g.adjoint() * &g + CMatrix::identity(4, 4);
        let b = random_cmatrix(24, 4, 3);
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() / b.norm() < 1e-9);
    }

    #[test]
    fn hermitian_solve_rejects_indefinite() {
        let a = CMatrix::identity(2, 2) * Complex64::new(-1.0, 0.0);
        match hermitian_solve(&a, &CMatrix::identity(2, 2)) {
            Err(Error::NotPositiveDefinite) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_factor_reconstructs_input() {
        let g = random_cmatrix(31, 4, 4);
        let a = g.adjoint() * &g + CMatrix::identity(4, 4);
        let l = cholesky_lower(&a).unwrap();
        assert!((&l * l.adjoint() - &a).norm() < 1e-12 * a.norm());
        for j in 0..4 {
            assert!(l[(j, j)].re > 0.0 && l[(j, j)].im == 0.0);
            for k in j + 1..4 {
                assert_eq!(l[(j, k)], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn pivoted_cholesky_recovers_low_rank_gram() {
        // Gram matrix of 6 points living in a 2-D subspace.
        let points = random_cmatrix(33, 2, 6);
        let g = points.adjoint() * &points;
        let (l, rank) = pivoted_cholesky(&g, 1e-12);
        assert_eq!(rank, 2);
        assert!((&l * l.adjoint() - &g).norm() < 1e-10 * g.norm());
    }

    #[test]
    fn pivoted_cholesky_of_zero_matrix_has_rank_zero() {
        let (l, rank) = pivoted_cholesky(&CMatrix::zeros(3, 3), 1e-12);
        assert_eq!(rank, 0);
        assert_eq!(l.ncols(), 0);
    }
}
