use raymaze_core::rng::Rng;

/// Orthogonal `rows x cols` matrix (row-major) scaled by `gain`.
///
/// A Gaussian matrix is orthonormalized along its longer side with
/// Gram-Schmidt (two passes), which yields the QR factor with a positive
/// diagonal in `R`. For `rows <= cols` the rows are orthonormal
/// (`W Wᵀ = gain² I`), otherwise the columns are (`Wᵀ W = gain² I`).
pub fn orthogonal_init(rows: usize, cols: usize, gain: f64, seed: u64) -> Vec<f64> {
    assert!(rows >= 1 && cols >= 1, "orthogonal_init needs a non-empty shape");
    let mut rng = Rng::derive(seed, &[rows as u64, cols as u64]);
    // Vectors to orthonormalize: `count` vectors of length `len`.
    let (count, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..len).map(|_| rng.normal()).collect())
        .collect();
    for i in 0..count {
        for _pass in 0..2 {
            for j in 0..i {
                let (done, rest) = vecs.split_at_mut(i);
                let proj: f64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                for (v, q) in rest[0].iter_mut().zip(&done[j]) {
                    *v -= proj * q;
                }
            }
        }
        let norm = vecs[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut vecs[i] {
            *v /= norm;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (i, v) in vecs.iter().enumerate() {
        for (j, &x) in v.iter().enumerate() {
            if rows <= cols {
                out[i * cols + j] = gain * x;
            } else {
                out[j * cols + i] = gain * x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gram matrix of rows (`W Wᵀ`) when `by_rows`, else of columns (`Wᵀ W`).
    fn gram(w: &[f64], rows: usize, cols: usize, by_rows: bool) -> Vec<Vec<f64>> {
        let (count, len) = if by_rows { (rows, cols) } else { (cols, rows) };
        let at = |i: usize, k: usize| if by_rows { w[i * cols + k] } else { w[k * cols + i] };
        (0..count)
            .map(|i| (0..count).map(|j| (0..len).map(|k| at(i, k) * at(j, k)).sum()).collect())
            .collect()
    }

    fn assert_scaled_identity(g: &[Vec<f64>], scale: f64) {
        for (i, row) in g.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { scale } else { 0.0 };
                assert!((v - want).abs() < 1e-5, "({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn square_unit_gain() {
        let w = orthogonal_init(4, 4, 1.0, 3);
        assert_scaled_identity(&gram(&w, 4, 4, false), 1.0);
    }

    #[test]
    fn square_sqrt2_gain() {
        let w = orthogonal_init(4, 4, 2f64.sqrt(), 3);
        assert_scaled_identity(&gram(&w, 4, 4, false), 2.0);
    }

    #[test]
    fn wide_rows_are_orthonormal() {
        let w = orthogonal_init(2, 5, 1.0, 8);
        assert_scaled_identity(&gram(&w, 2, 5, true), 1.0);
    }

    #[test]
    fn tall_columns_are_orthonormal() {
        let w = orthogonal_init(9, 3, 0.01, 8);
        assert_scaled_identity(&gram(&w, 9, 3, false), 1e-4);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(orthogonal_init(3, 6, 1.0, 1), orthogonal_init(3, 6, 1.0, 1));
        assert_ne!(orthogonal_init(3, 6, 1.0, 1), orthogonal_init(3, 6, 1.0, 2));
    }
}
