//! Reconstruction quality on data normalized to `[0, 1]`.

use crate::error::{MgspError, Result};

/// PSNR reported for exact reconstructions.
pub const PSNR_CAP_DB: f64 = 999.0;

pub fn mse(orig: &[f64], recon: &[f64]) -> Result<f64> {
    if orig.len() != recon.len() {
        return Err(MgspError::shape("mse", orig.len(), recon.len()));
    }
    if orig.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = orig.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / orig.len() as f64)
}

/// `10·log₁₀(1/mse)` with peak 1, capped at [`PSNR_CAP_DB`].
pub fn psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quality {
    pub mse: f64,
    pub psnr: f64,
}

impl Quality {
    pub fn between(orig: &[f64], recon: &[f64]) -> Result<Self> {
        let mse = mse(orig, recon)?;
        Ok(Quality { mse, psnr: psnr(mse) })
    }
}
