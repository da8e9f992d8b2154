use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, GmmParams};
use crate::{GemError, Result};

/// Draws `n` i.i.d. samples from the mixture.
///
/// The stream is fully determined by `seed`: a `ChaCha8Rng` is seeded with
/// `seed_from_u64(seed)`, and for every sample one uniform `f64` in `[0, 1)`
/// selects the component by inverse CDF over `alpha`, followed by `m` standard
/// normals (ziggurat) `z` mapped to `mu_j + L_j z` with `Sigma_j = L_j L_j^T`.
pub fn sample(params: &GmmParams, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(GemError::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let k = params.k();
    let m = params.dim();
    let lowers: Vec<_> = (0..k)
        .map(|j| {
            nalgebra::Cholesky::new(params.covariance(j).clone())
                .expect("validated covariance")
                .unpack()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * m);
    let mut z = vec![0.0; m];
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut j = k - 1;
        let mut cum = 0.0;
        for (i, a) in params.alpha().iter().enumerate() {
            cum += a;
            if u < cum {
                j = i;
                break;
            }
        }
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mean = params.mean(j);
        let l = &lowers[j];
        for a in 0..m {
            let mut v = mean[a];
            for b in 0..=a {
                v += l[(a, b)] * z[b];
            }
            values.push(v);
        }
    }
    Dataset::from_row_major(m, values)
}
