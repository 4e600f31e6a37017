use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::GrayRaster;

pub use crate::synthgen::{sinusoid_grating as grating, square_grating};

/// Uniform white noise over `[0, 255]`.
pub fn noise_image(width: usize, height: usize, seed: u64) -> GrayRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayRaster::from_fn(width, height, |_, _| rng.random()).unwrap()
}
