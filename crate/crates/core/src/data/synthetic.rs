use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vector::{dot, Vector};

use super::{Dataset, ScalingSpec};

/// Planted logistic data: unscaled features, the hidden scaling and predictor.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub scaling: ScalingSpec,
    pub w_star: Vector,
}

/// Draws, in this order: `X` (n·d standard normals, row-major), `log V_kk`
/// (d uniforms on (-10, 10)), `w*` (d standard normals). Labels are
/// `+1` when `x_iᵀ V w* ≥ 0` and `-1` otherwise.
pub fn gen_synthetic(rng: &mut Rng, n: usize, d: usize) -> Result<SyntheticData> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if d == 0 {
        return Err(Error::Precondition("d must be at least 1".into()));
    }
    let features: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
    let diag: Vec<f64> = (0..d).map(|_| rng.uniform(-10.0, 10.0).exp()).collect();
    let w_star: Vector = (0..d).map(|_| rng.standard_normal()).collect::<Vec<_>>().into();

    let mut scaling = ScalingSpec::new(diag.into())?;
    scaling.law = Some(format!("exp(Unif(-10,10)), seed {}", rng.seed()));
    let planted = scaling.apply(&w_star);
    let labels = features
        .chunks_exact(d)
        .map(|x| if dot(x, &planted) >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let dataset = Dataset::new(format!("synthetic-n{n}-d{d}"), d, features, labels)?;
    Ok(SyntheticData {
        dataset,
        scaling,
        w_star,
    })
}
