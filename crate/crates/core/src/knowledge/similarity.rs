use crate::error::{Error, Result};

/// `(a . b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { left: a.len(), right: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    // Multiplying in this order keeps the expression symmetric in (a, b).
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
