use crate::{Error, Result};

/// Row-major `height × width × channels` raster of real values.
///
/// Values are nominally in `[0, 1]`; intermediate results may leave that
/// range until [`clamp01`](crate::clamp01) is applied. Every element is
/// finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at element {i}")));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        check_shape(height, width, channels)?;
        if !value.is_finite() {
            return Err(Error::invalid("fill value must be finite"));
        }
        Ok(Self { height, width, channels, data: vec![value; height * width * channels] })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds a tensor from `f(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_shape(height, width, channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Internal constructor for results of operations that preserve finiteness.
    pub(crate) fn from_parts(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sample with replicate borders.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize, c: usize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x, c)
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(dim_mismatch(self, other))
        }
    }

    /// Checks that `other` either matches exactly or is a single-channel map
    /// of the same spatial size (broadcast over channels).
    pub(crate) fn ensure_broadcastable(&self, other: &Self) -> Result<()> {
        if self.height == other.height
            && self.width == other.width
            && (other.channels == self.channels || other.channels == 1)
        {
            Ok(())
        } else {
            Err(dim_mismatch(self, other))
        }
    }

    /// Value of `self` at flat index `i` of a `channels`-wide target,
    /// broadcasting single-channel maps.
    #[inline]
    pub(crate) fn broadcast_at(&self, i: usize, channels: usize) -> f64 {
        if self.channels == channels {
            self.data[i]
        } else {
            self.data[i / channels]
        }
    }

    /// Element-wise map. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.height, self.width, self.channels, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Extracts one channel as a single-channel tensor.
    pub fn channel(&self, c: usize) -> Result<Self> {
        if c >= self.channels {
            return Err(Error::invalid(format!("channel {c} out of range for {} channels", self.channels)));
        }
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Ok(Self::from_parts(self.height, self.width, 1, data))
    }

    /// Repeats a single-channel tensor across `channels` channels.
    pub fn broadcast_channels(&self, channels: usize) -> Result<Self> {
        if self.channels == channels {
            return Ok(self.clone());
        }
        if self.channels != 1 || channels == 0 {
            return Err(Error::invalid(format!("cannot broadcast {} channels to {channels}", self.channels)));
        }
        let data = self.data.iter().flat_map(|&v| std::iter::repeat_n(v, channels)).collect();
        Ok(Self::from_parts(self.height, self.width, channels, data))
    }

    pub fn flip_horizontal(&self) -> Self {
        let (h, w, c) = self.dims();
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..h {
            for x in (0..w).rev() {
                let base = (y * w + x) * c;
                data.extend_from_slice(&self.data[base..base + c]);
            }
        }
        Self::from_parts(h, w, c, data)
    }

    /// Mean of all elements.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Element-wise sum of same-shaped tensors.
    pub fn sum_of(tensors: &[ImageTensor]) -> Result<Self> {
        let first = tensors.first().ok_or_else(|| Error::invalid("empty tensor list"))?;
        let mut data = first.data.clone();
        for t in &tensors[1..] {
            first.ensure_same_dims(t)?;
            data.iter_mut().zip(&t.data).for_each(|(a, b)| *a += b);
        }
        Self::new(first.height, first.width, first.channels, data)
    }
}

fn check_shape(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!("image dimensions must be positive, got {height}x{width}")));
    }
    if channels == 0 {
        return Err(Error::invalid("channel count must be positive"));
    }
    Ok(())
}

fn dim_mismatch(a: &ImageTensor, b: &ImageTensor) -> Error {
    let fmt = |t: &ImageTensor| format!("{}x{}x{}", t.height, t.width, t.channels);
    Error::DimensionMismatch { left: fmt(a), right: fmt(b) }
}
