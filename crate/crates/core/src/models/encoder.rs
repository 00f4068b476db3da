//! Input encoders for the user and item sides.
//!
//! An encoder turns a raw [`FeatureInput`] into the dense vector fed to a
//! tower or joint MLP. Pretrained inputs pass through unchanged; categorical
//! inputs are looked up in per-field embedding tables whose entries are
//! trainable and therefore live inside [`ModelParameters`](crate::ModelParameters).

use rand::Rng;

use crate::error::{Error, Result};

/// Raw features of one user or item.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureInput {
    /// A precomputed dense vector.
    Dense(Vec<f64>),
    /// One category index per embedding field, in field order.
    Categorical(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingField {
    pub name: String,
    pub vocab: usize,
    /// Row-major `(vocab, dim)` table.
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderMode {
    Pretrained,
    CategoricalEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEncoder {
    Pretrained { dim: usize },
    Categorical { dim: usize, fields: Vec<EmbeddingField> },
}

impl FeatureEncoder {
    pub fn pretrained(dim: usize) -> Self {
        FeatureEncoder::Pretrained { dim }
    }

    /// Embedding tables for `(name, vocab)` fields, entries drawn from
    /// `U(-1/sqrt(dim), 1/sqrt(dim))`.
    pub fn categorical<R: Rng + ?Sized>(fields: &[(String, usize)], dim: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (dim.max(1) as f64).sqrt();
        let fields = fields
            .iter()
            .map(|(name, vocab)| EmbeddingField {
                name: name.clone(),
                vocab: *vocab,
                table: (0..vocab * dim).map(|_| rng.random_range(-limit..=limit)).collect(),
            })
            .collect();
        FeatureEncoder::Categorical { dim, fields }
    }

    pub fn mode(&self) -> EncoderMode {
        match self {
            FeatureEncoder::Pretrained { .. } => EncoderMode::Pretrained,
            FeatureEncoder::Categorical { .. } => EncoderMode::CategoricalEmbedding,
        }
    }

    /// Length of the encoded vector.
    pub fn output_dim(&self) -> usize {
        match self {
            FeatureEncoder::Pretrained { dim } => *dim,
            FeatureEncoder::Categorical { dim, fields } => dim * fields.len(),
        }
    }

    pub fn encode(&self, input: &FeatureInput) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.output_dim());
        self.encode_into(input, &mut out)?;
        Ok(out)
    }

    /// Appends the encoding of `input` to `out`.
    pub fn encode_into(&self, input: &FeatureInput, out: &mut Vec<f64>) -> Result<()> {
        match (self, input) {
            (FeatureEncoder::Pretrained { dim }, FeatureInput::Dense(v)) => {
                if v.len() != *dim {
                    return Err(Error::shape("pretrained feature", *dim, v.len()));
                }
                out.extend_from_slice(v);
            }
            (FeatureEncoder::Categorical { dim, fields }, FeatureInput::Categorical(idx)) => {
                if idx.len() != fields.len() {
                    return Err(Error::shape("categorical field count", fields.len(), idx.len()));
                }
                for (field, &i) in fields.iter().zip(idx) {
                    if i >= field.vocab {
                        return Err(Error::OutOfVocabulary {
                            field: field.name.clone(),
                            index: i,
                            vocab: field.vocab,
                        });
                    }
                    out.extend_from_slice(&field.table[i * dim..(i + 1) * dim]);
                }
            }
            (FeatureEncoder::Pretrained { .. }, FeatureInput::Categorical(_)) => {
                return Err(Error::Config("categorical input given to a pretrained encoder".into()))
            }
            (FeatureEncoder::Categorical { .. }, FeatureInput::Dense(_)) => {
                return Err(Error::Config("dense input given to a categorical encoder".into()))
            }
        }
        Ok(())
    }

    /// Scatter-adds the gradient of the encoded vector into the table rows it
    /// was read from. `grads` must be shaped like `self`; inputs are assumed
    /// already validated by a forward pass.
    pub fn accumulate_grad(&self, input: &FeatureInput, grad: &[f64], grads: &mut FeatureEncoder) {
        if let (FeatureEncoder::Categorical { dim, .. }, FeatureInput::Categorical(idx)) = (self, input) {
            if let FeatureEncoder::Categorical { fields: gfields, .. } = grads {
                for (f, (gfield, &i)) in gfields.iter_mut().zip(idx).enumerate() {
                    let src = &grad[f * dim..(f + 1) * dim];
                    let row = &mut gfield.table[i * dim..(i + 1) * dim];
                    for (r, g) in row.iter_mut().zip(src) {
                        *r += g;
                    }
                }
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            FeatureEncoder::Pretrained { dim } => FeatureEncoder::Pretrained { dim: *dim },
            FeatureEncoder::Categorical { dim, fields } => FeatureEncoder::Categorical {
                dim: *dim,
                fields: fields
                    .iter()
                    .map(|f| EmbeddingField {
                        name: f.name.clone(),
                        vocab: f.vocab,
                        table: vec![0.0; f.table.len()],
                    })
                    .collect(),
            },
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        match (self, other) {
            (FeatureEncoder::Pretrained { dim: a }, FeatureEncoder::Pretrained { dim: b }) => a == b,
            (
                FeatureEncoder::Categorical { dim: a, fields: fa },
                FeatureEncoder::Categorical { dim: b, fields: fb },
            ) => a == b && fa.len() == fb.len() && fa.iter().zip(fb).all(|(x, y)| x.vocab == y.vocab),
            _ => false,
        }
    }

    pub fn values(&self) -> Box<dyn Iterator<Item = &f64> + '_> {
        match self {
            FeatureEncoder::Pretrained { .. } => Box::new(std::iter::empty()),
            FeatureEncoder::Categorical { fields, .. } => {
                Box::new(fields.iter().flat_map(|f| f.table.iter()))
            }
        }
    }

    pub fn values_mut(&mut self) -> Box<dyn Iterator<Item = &mut f64> + '_> {
        match self {
            FeatureEncoder::Pretrained { .. } => Box::new(std::iter::empty()),
            FeatureEncoder::Categorical { fields, .. } => {
                Box::new(fields.iter_mut().flat_map(|f| f.table.iter_mut()))
            }
        }
    }
}

/// Encodes a user with `encoder`.
pub fn encode_user(encoder: &FeatureEncoder, raw_user: &FeatureInput) -> Result<Vec<f64>> {
    encoder.encode(raw_user)
}

/// Encodes an item with `encoder`.
pub fn encode_item(encoder: &FeatureEncoder, raw_item: &FeatureInput) -> Result<Vec<f64>> {
    encoder.encode(raw_item)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fields(spec: &[(&str, usize)]) -> Vec<(String, usize)> {
        spec.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn categorical_concatenates_selected_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = FeatureEncoder::categorical(&fields(&[("a", 3), ("b", 2)]), 2, &mut rng);
        let FeatureEncoder::Categorical { fields: f, .. } = &enc else {
            unreachable!()
        };
        let got = encode_user(&enc, &FeatureInput::Categorical(vec![0, 1])).unwrap();
        let mut want = f[0].table[0..2].to_vec();
        want.extend_from_slice(&f[1].table[2..4]);
        assert_eq!(got, want);
    }

    #[test]
    fn pretrained_is_passthrough() {
        let enc = FeatureEncoder::pretrained(3);
        let v = vec![0.5, -1.0, 2.0];
        assert_eq!(encode_item(&enc, &FeatureInput::Dense(v.clone())).unwrap(), v);
    }

    #[test]
    fn four_fields_of_dim_32_give_128() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = fields(&[("gender", 2), ("age", 7), ("occupation", 21), ("area", 10)]);
        let enc = FeatureEncoder::categorical(&spec, 32, &mut rng);
        let v = encode_user(&enc, &FeatureInput::Categorical(vec![1, 3, 20, 9])).unwrap();
        assert_eq!(v.len(), 128);
        let item_spec = fields(&[("rate", 6), ("genre", 18), ("director", 50), ("actor", 80)]);
        let enc = FeatureEncoder::categorical(&item_spec, 32, &mut rng);
        let v = encode_item(&enc, &FeatureInput::Categorical(vec![0, 17, 49, 0])).unwrap();
        assert_eq!(v.len(), 128);
    }

    #[test]
    fn single_row_vocabulary_always_returns_that_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = FeatureEncoder::categorical(&fields(&[("only", 1)]), 4, &mut rng);
        let a = encode_item(&enc, &FeatureInput::Categorical(vec![0])).unwrap();
        let b = encode_item(&enc, &FeatureInput::Categorical(vec![0])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn seeded_lookup_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = fields(&[("x", 5), ("y", 4), ("z", 7)]);
        let dim = 3;
        let enc = FeatureEncoder::categorical(&spec, dim, &mut rng);
        let idx = vec![rng.random_range(0..5), rng.random_range(0..4), rng.random_range(0..7)];
        let got = encode_item(&enc, &FeatureInput::Categorical(idx.clone())).unwrap();
        let FeatureEncoder::Categorical { fields: f, .. } = &enc else {
            unreachable!()
        };
        let mut want = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            for d in 0..dim {
                want.push(f[k].table[i * dim + d]);
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn out_of_vocabulary_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = FeatureEncoder::categorical(&fields(&[("g", 2)]), 2, &mut rng);
        let err = encode_user(&enc, &FeatureInput::Categorical(vec![2])).unwrap_err();
        assert!(matches!(err, Error::OutOfVocabulary { index: 2, vocab: 2, .. }));
    }
}
