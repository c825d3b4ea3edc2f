use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Raw radar record: complex baseband samples indexed
/// `(channel, chirp, fast-time sample)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCube {
    data: Array3<Complex64>,
    /// Chirp repetition rate, i.e. the slow-time sample rate.
    pub chirp_rate_hz: f64,
    /// Metres per bin of a range FFT taken at the native chirp length.
    pub range_resolution_m: f64,
}

impl IqCube {
    pub fn new(data: Array3<Complex64>, chirp_rate_hz: f64, range_resolution_m: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("IQ cube must be non-empty"));
        }
        if !(chirp_rate_hz > 0.0 && range_resolution_m > 0.0) {
            return Err(Error::invalid("chirp rate and range resolution must be positive"));
        }
        Ok(Self {
            data,
            chirp_rate_hz,
            range_resolution_m,
        })
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn chirps(&self) -> usize {
        self.data.dim().1
    }

    pub fn samples_per_chirp(&self) -> usize {
        self.data.dim().2
    }

    pub fn into_data(self) -> Array3<Complex64> {
        self.data
    }
}
