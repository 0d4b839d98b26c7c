use crate::datamodel::ImageTensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Batch of images, `(n, h, w, c)`, row-major, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T: Scalar> {
    dims: (usize, usize, usize, usize),
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn new(dims: (usize, usize, usize, usize), data: Vec<T>) -> Result<Self> {
        let (n, h, w, c) = dims;
        if data.len() != n * h * w * c {
            return Err(Error::validation(format!(
                "tensor data length {} != {n}x{h}x{w}x{c}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("tensor values must be finite"));
        }
        Ok(Tensor4 { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize, usize)) -> Self {
        let (n, h, w, c) = dims;
        Tensor4 {
            dims,
            data: vec![T::zero(); n * h * w * c],
        }
    }

    /// Stacks images of one shape into a batch.
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a ImageTensor<T>>) -> Result<Self> {
        let mut shape = None;
        let mut data = Vec::new();
        let mut n = 0;
        for img in images {
            match shape {
                None => shape = Some(img.shape()),
                Some(s) if s != img.shape() => {
                    return Err(Error::validation(format!(
                        "image {n} has shape {:?}, batch shape is {s:?}",
                        img.shape()
                    )))
                }
                _ => {}
            }
            data.extend_from_slice(img.data());
            n += 1;
        }
        let (h, w, c) = shape.ok_or_else(|| Error::validation("cannot batch zero images"))?;
        Ok(Tensor4 { dims: (n, h, w, c), data })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims.0
    }

    /// `(h, w, c)` of one sample.
    pub fn sample_shape(&self) -> (usize, usize, usize) {
        (self.dims.1, self.dims.2, self.dims.3)
    }

    pub fn sample_len(&self) -> usize {
        self.dims.1 * self.dims.2 * self.dims.3
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }
}
