use super::NumericsError;
use ndarray::{Array2, ArrayView2};

/// A dense real tensor: a shape plus contiguous row-major data.
///
/// Rank 1 holds a single flattened sample, rank 2 a batch laid out as
/// `[batch, width]`. Higher ranks are accepted but nothing in the crate
/// produces them.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl RealTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::ShapeMismatch {
                expected: format!("{expected} elements for shape {shape:?}"),
                got: format!("{} elements", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Batch size under the `[batch, width]` convention; a rank-1 tensor is
    /// one sample.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[0],
        }
    }

    /// Sample width (the last dimension).
    pub fn width(&self) -> usize {
        self.shape.last().copied().unwrap_or(0)
    }

    /// View as a `[rows, width]` matrix (rank 1 becomes a single row).
    pub fn as_matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.rows(), self.width()), &self.data)
            .expect("shape invariant guarantees rows*width == len")
    }

    pub(crate) fn from_array2(a: Array2<f64>, rank1: bool) -> Self {
        let (rows, cols) = a.dim();
        let data = a.into_raw_vec_and_offset().0;
        if rank1 {
            debug_assert_eq!(rows, 1);
            Self { shape: vec![cols], data }
        } else {
            Self { shape: vec![rows, cols], data }
        }
    }

    /// Row `i` of the batch view.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_inconsistent_shape() {
        assert!(RealTensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(RealTensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn rank1_views_as_single_row() {
        let t = RealTensor::vector(vec![1.0, 2.0, 3.0]);
        assert_eq!(t.rows(), 1);
        assert_eq!(t.width(), 3);
        assert_eq!(t.as_matrix().dim(), (1, 3));
        assert_eq!(t.row(0), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn finite_check_catches_nan() {
        let mut t = RealTensor::zeros(&[4]);
        assert!(t.is_finite());
        t.data_mut()[2] = f64::NAN;
        assert!(!t.is_finite());
    }
}
