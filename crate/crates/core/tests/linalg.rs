use hessfield_core::linalg::{bicgstab, CsrMatrix, EnvelopeLu, Preconditioner};
use hessfield_core::sampling::Sampler;
use proptest::prelude::*;

/// Dense Gaussian elimination with partial pivoting; test oracle only.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|i, j| a[*i][c].abs().total_cmp(&a[*j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Nonsymmetric, diagonally dominant five-point-like operator on an m×m lattice.
fn lattice_matrix(m: usize, seed: u64) -> (CsrMatrix, Vec<Vec<f64>>) {
    let n = m * m;
    let mut s = Sampler::new(seed);
    let mut dense = vec![vec![0.0; n]; n];
    let mut rows = vec![Vec::new(); n];
    for i in 0..m {
        for j in 0..m {
            let r = i * m + j;
            let mut diag = 0.5;
            let mut push = |c: usize, v: f64, rows: &mut Vec<Vec<(usize, f64)>>| {
                rows[r].push((c, v));
                dense[r][c] += v;
            };
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii >= 0 && jj >= 0 && (ii as usize) < m && (jj as usize) < m {
                    let v = -s.range(0.5, 1.5);
                    diag += v.abs();
                    push(ii as usize * m + jj as usize, v, &mut rows);
                }
            }
            push(r, diag, &mut rows);
        }
    }
    (CsrMatrix::from_rows(n, rows), dense)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn envelope_lu_matches_dense(m in 2usize..12, seed in any::<u64>()) {
        let (a, dense) = lattice_matrix(m, seed);
        let mut s = Sampler::new(seed ^ 1);
        let b: Vec<f64> = (0..m * m).map(|_| s.range(-1.0, 1.0)).collect();
        let want = dense_solve(dense, b.clone());
        let got = EnvelopeLu::factor(&a).unwrap().solve(&b);
        for (x, y) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn bicgstab_matches_dense(m in 2usize..10, seed in any::<u64>(), ilu in any::<bool>()) {
        let (a, dense) = lattice_matrix(m, seed);
        let mut s = Sampler::new(seed ^ 2);
        let b: Vec<f64> = (0..m * m).map(|_| s.range(-1.0, 1.0)).collect();
        let want = dense_solve(dense, b.clone());
        let pre = if ilu { Preconditioner::Ilu0 } else { Preconditioner::Jacobi };
        let (got, stats) = bicgstab(&a, &b, pre, 1e-13, 10_000).unwrap();
        prop_assert!(stats.relative_residual <= 1e-13);
        for (x, y) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn csr_sums_duplicates_and_multiplies() {
    let a = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 2.0), (0, 3.0)], vec![(1, 5.0)]]);
    assert_eq!(a.get(0, 0), 4.0);
    assert_eq!(a.nnz(), 3);
    let mut y = vec![0.0; 2];
    a.mul_vec(&[1.0, 1.0], &mut y);
    assert_eq!(y, vec![6.0, 5.0]);
    assert_eq!(a.diagonal(), vec![4.0, 5.0]);
}

#[test]
fn singular_matrix_is_reported() {
    let a = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
    assert!(EnvelopeLu::factor(&a).is_err());
}
