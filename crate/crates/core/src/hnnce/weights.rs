use crate::matrix::Matrix;
use crate::scalar::{log_sum_exp, Scalar};

/// Hard-negative weights for both retrieval directions.
///
/// `w_i2t[i][j] = (n-1) softmax_{j!=i}(beta S_ij)` weights text `j` as a
/// negative for image `i`; `w_t2i[i][j] = (n-1) softmax_{j!=i}(beta S_ji)`
/// weights image `j` as a negative for text `i`. Diagonals are zero and each
/// row sums to `n-1`.
pub fn hn_weights<T: Scalar>(s: &Matrix<T>, beta: T) -> (Matrix<T>, Matrix<T>) {
    (row_weights(s, beta), row_weights(&s.transpose(), beta))
}

pub(crate) fn row_weights<T: Scalar>(a: &Matrix<T>, beta: T) -> Matrix<T> {
    let n = a.rows();
    let scale = T::from_usize_lossy(n - 1);
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        let row = a.row(i);
        let lse = negatives_lse(row, i, beta);
        for j in (0..n).filter(|&j| j != i) {
            w.row_mut(i)[j] = scale * (beta * row[j] - lse).exp();
        }
    }
    w
}

/// `log sum_{k != i} e^{beta a_k}`.
pub(crate) fn negatives_lse<T: Scalar>(row: &[T], i: usize, beta: T) -> T {
    log_sum_exp(
        row.iter()
            .enumerate()
            .filter(move |&(k, _)| k != i)
            .map(move |(_, &v)| beta * v),
    )
}
