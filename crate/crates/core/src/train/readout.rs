use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Graph-level feature vector: per level, the column max followed by the
/// column mean of `Z_c`, concatenated over levels.
pub fn readout<T: Scalar>(embeddings: &[Matrix<T>]) -> Result<Vec<T>> {
    if embeddings.is_empty() {
        return Err(Error::contract("readout needs at least one level"));
    }
    let mut out = Vec::new();
    for z in embeddings {
        if z.rows() == 0 || z.cols() == 0 {
            return Err(Error::contract("readout of an empty embedding matrix"));
        }
        let mut max = z.row(0).to_vec();
        for i in 1..z.rows() {
            for (m, &v) in max.iter_mut().zip(z.row(i)) {
                if v > *m {
                    *m = v;
                }
            }
        }
        let n = T::from_usize_lossy(z.rows());
        out.extend(max);
        out.extend(z.col_sums().into_iter().map(|s| s / n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readout_examples() {
        let z = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(readout(std::slice::from_ref(&z)).unwrap(), vec![3.0, 4.0, 2.0, 3.0]);
        assert_eq!(
            readout(&[z.clone(), z]).unwrap(),
            vec![3.0, 4.0, 2.0, 3.0, 3.0, 4.0, 2.0, 3.0]
        );
        let single = Matrix::from_rows(&[[5.0, 6.0]]).unwrap();
        assert_eq!(readout(&[single]).unwrap(), vec![5.0, 6.0, 5.0, 6.0]);
        assert!(readout::<f64>(&[]).is_err());
        assert!(readout(&[Matrix::<f64>::zeros(0, 2)]).is_err());
    }
}
