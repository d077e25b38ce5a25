use core::f64::consts::PI;

use crate::error::{invalid, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based random stream.
///
/// Every draw is a pure function of `(seed, stream_id, index)`: the stream
/// keeps a cursor for sequential use, but [`RngStream::gaussian_at`] can
/// address any draw directly. Distinct stream ids select independent
/// substreams, so parallel consumers never need to share state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    key: u64,
    cursor: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix64(mix64(seed ^ 0x5851_F42D_4C95_7F2D).wrapping_add(mix64(
            stream_id.wrapping_mul(GOLDEN_GAMMA) ^ 0x1405_7B7E_F767_814F,
        )));
        Self {
            seed,
            stream_id,
            key,
            cursor: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Index of the next sequential draw.
    pub fn position(&self) -> u64 {
        self.cursor
    }

    /// Deterministic child stream. The child of `(seed, id)` at `sub` is a new
    /// stream id under the same seed.
    pub fn substream(&self, sub: u64) -> RngStream {
        let id = mix64(self.stream_id.wrapping_add(GOLDEN_GAMMA) ^ mix64(sub.wrapping_add(1)));
        RngStream::new(self.seed, id)
    }

    #[inline]
    fn bits_at(&self, counter: u64) -> u64 {
        mix64(mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA))) ^ self.key)
    }

    /// Uniform draw in the open interval (0, 1) at a raw counter.
    #[inline]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        ((self.bits_at(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_uniform(&mut self) -> f64 {
        let u = self.uniform_at(self.cursor);
        self.cursor += 1;
        u
    }

    /// Standard normal draw number `index` (Box-Muller, cosine branch). Each
    /// normal consumes the two uniforms at counters `2 * index` and `2 * index + 1`.
    #[inline]
    pub fn standard_normal_at(&self, index: u64) -> f64 {
        let u1 = self.uniform_at(index.wrapping_mul(2));
        let u2 = self.uniform_at(index.wrapping_mul(2).wrapping_add(1));
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }

    pub fn gaussian_at(&self, index: u64, mean: f64, std: f64) -> Result<f64> {
        check_std(std)?;
        if std == 0.0 {
            return Ok(mean);
        }
        Ok(mean + std * self.standard_normal_at(index))
    }

    /// Next sequential standard normal. Shares the index space of
    /// [`RngStream::standard_normal_at`], not of [`RngStream::next_uniform`].
    pub fn next_standard_normal(&mut self) -> f64 {
        let z = self.standard_normal_at(self.cursor);
        self.cursor += 1;
        z
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }
}

fn check_std(std: f64) -> Result<()> {
    if !std.is_finite() || std < 0.0 {
        return Err(invalid!(
            "standard deviation must be finite and >= 0, got {std}"
        ));
    }
    Ok(())
}

/// One draw from `N(mean, std^2)`; advances the stream. `std == 0` returns
/// `mean` exactly.
pub fn gaussian(stream: &mut RngStream, mean: f64, std: f64) -> Result<f64> {
    check_std(std)?;
    let z = stream.next_standard_normal();
    if std == 0.0 {
        return Ok(mean);
    }
    Ok(mean + std * z)
}
