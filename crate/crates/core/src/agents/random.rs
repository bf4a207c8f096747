use crate::error::{invalid, Result};
use crate::rng::Rng;

/// Uniform action in `[0, size)`.
pub fn random_policy(size: usize, rng: &mut Rng) -> Result<usize> {
    if size == 0 {
        return Err(invalid("action space is empty"));
    }
    Ok(rng.below(size))
}
