use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::ProviderError;

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingError {
    Empty,
    NonFinite { index: usize },
    DimensionMismatch { expected: usize, found: usize },
    /// Zero-norm vector: cosine is undefined.
    Degenerate,
}

impl fmt::Display for EmbeddingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingError::Empty => f.write_str("embedding has no components"),
            EmbeddingError::NonFinite { index } => {
                write!(f, "embedding component {index} is not finite")
            }
            EmbeddingError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            EmbeddingError::Degenerate => f.write_str("degenerate embedding (zero norm)"),
        }
    }
}

impl core::error::Error for EmbeddingError {}

/// A finite, non-empty vector tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f32>,
    source: String,
}

impl Embedding {
    pub fn new(values: Vec<f32>, source: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(Embedding {
            values,
            source: source.into(),
        })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|&v| f64::from(v) * f64::from(v)).sum())
    }

    fn check_dims(&self, other: &Embedding) -> Result<(), EmbeddingError> {
        if self.dimension() != other.dimension() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dimension(),
                found: other.dimension(),
            });
        }
        Ok(())
    }

    /// Cosine similarity, clamped to `[-1, 1]`; exactly 1 for equal vectors.
    pub fn cosine(&self, other: &Embedding) -> Result<f64, EmbeddingError> {
        self.check_dims(other)?;
        let (nu, nv) = (self.norm(), other.norm());
        if nu == 0.0 || nv == 0.0 {
            return Err(EmbeddingError::Degenerate);
        }
        if self.values == other.values {
            return Ok(1.0);
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
    }

    pub fn euclidean(&self, other: &Embedding) -> Result<f64, EmbeddingError> {
        self.check_dims(other)?;
        Ok(libm::sqrt(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum(),
        ))
    }

    /// `1 / (1 + euclidean)`, in `(0, 1]`.
    pub fn inverse_euclidean(&self, other: &Embedding) -> Result<f64, EmbeddingError> {
        if self.norm() == 0.0 || other.norm() == 0.0 {
            return Err(EmbeddingError::Degenerate);
        }
        Ok(1.0 / (1.0 + self.euclidean(other)?))
    }
}

/// One sub-word unit as tokenized by the embedding provider.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordVector {
    pub token: String,
    pub vector: Embedding,
}

/// One vector per whole label.
pub trait SentenceEmbedder {
    fn embed_sentence(&self, text: &str) -> Result<Embedding, ProviderError>;
}

/// The provider's own tokenization of a label, with a vector per unit.
pub trait SubwordEmbedder {
    fn embed_subwords(&self, text: &str) -> Result<Vec<SubwordVector>, ProviderError>;
}

impl<P: SentenceEmbedder + ?Sized> SentenceEmbedder for &P {
    fn embed_sentence(&self, text: &str) -> Result<Embedding, ProviderError> {
        (**self).embed_sentence(text)
    }
}

impl<P: SubwordEmbedder + ?Sized> SubwordEmbedder for &P {
    fn embed_subwords(&self, text: &str) -> Result<Vec<SubwordVector>, ProviderError> {
        (**self).embed_subwords(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn e(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec(), "test").unwrap()
    }

    #[test]
    fn orthogonal_unit_vectors() {
        let (u, v) = (e(&[1.0, 0.0]), e(&[0.0, 1.0]));
        assert_eq!(u.cosine(&v).unwrap(), 0.0);
        let inv = u.inverse_euclidean(&v).unwrap();
        assert!((inv - 1.0 / (1.0 + core::f64::consts::SQRT_2)).abs() < 1e-12);
        assert!((inv - 0.4142).abs() < 1e-4);
    }

    #[test]
    fn identical_vectors() {
        let u = e(&[0.3, -0.7, 0.1]);
        assert_eq!(u.cosine(&u.clone()).unwrap(), 1.0);
        assert_eq!(u.inverse_euclidean(&u.clone()).unwrap(), 1.0);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Embedding::new(vec![], "m"), Err(EmbeddingError::Empty));
        assert_eq!(
            Embedding::new(vec![1.0, f32::NAN], "m"),
            Err(EmbeddingError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn degenerate_and_mismatch() {
        let zero = e(&[0.0, 0.0]);
        assert_eq!(zero.cosine(&e(&[1.0, 0.0])), Err(EmbeddingError::Degenerate));
        assert_eq!(zero.inverse_euclidean(&e(&[1.0, 0.0])), Err(EmbeddingError::Degenerate));
        assert_eq!(
            e(&[1.0]).cosine(&e(&[1.0, 0.0])),
            Err(EmbeddingError::DimensionMismatch { expected: 1, found: 2 })
        );
    }
}
