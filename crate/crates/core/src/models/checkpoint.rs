//! Line-oriented text checkpoint format.
//!
//! ```text
//! meshop-checkpoint 1
//! kind <mesh|mesh_i|wide_deep|baseline>
//! encoder <user|item> pretrained <dim>
//! encoder <user|item> categorical <dim> <n_fields>
//! field <name> <vocab>
//! values <vocab*dim floats, row-major>
//! network <two_tower|joint>            (scoring kinds)
//! margin <f64>                         (baseline only)
//! neg_weight <f64>                     (baseline only)
//! mlp <user|item|joint|item_mapper> <n_layers>
//! layer <in_dim> <out_dim> <activation> <bias|nobias>
//! weights <out_dim*in_dim floats, row-major>
//! biases <out_dim floats>              (only when `bias`)
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip notation, so reading a
//! checkpoint back restores every parameter bit-exactly and writing the same
//! parameters twice yields identical bytes.

use std::fmt::Write as _;

use super::baseline::BaselineParams;
use super::encoder::{EmbeddingField, FeatureEncoder};
use super::{ModelKind, TrainedModel};
use crate::error::{Error, Result};
use crate::numcore::{Activation, DenseLayer, Mlp, ModelParameters, Network};

const MAGIC: &str = "meshop-checkpoint";
const VERSION: u32 = 1;

fn floats(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

fn write_encoder(out: &mut String, side: &str, enc: &FeatureEncoder) {
    match enc {
        FeatureEncoder::Pretrained { dim } => {
            let _ = writeln!(out, "encoder {side} pretrained {dim}");
        }
        FeatureEncoder::Categorical { dim, fields } => {
            let _ = writeln!(out, "encoder {side} categorical {dim} {}", fields.len());
            for f in fields {
                let _ = writeln!(out, "field {} {}", f.name, f.vocab);
                floats(out, "values", &f.table);
            }
        }
    }
}

fn write_mlp(out: &mut String, name: &str, mlp: &Mlp) {
    let _ = writeln!(out, "mlp {name} {}", mlp.layers.len());
    for l in &mlp.layers {
        let _ = writeln!(
            out,
            "layer {} {} {} {}",
            l.in_dim,
            l.out_dim,
            l.activation.name(),
            if l.biases.is_some() { "bias" } else { "nobias" }
        );
        floats(out, "weights", &l.weights);
        if let Some(b) = &l.biases {
            floats(out, "biases", b);
        }
    }
}

/// Serializes a trained model.
pub fn write_checkpoint(kind: ModelKind, model: &TrainedModel) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "kind {}", kind.name());
    match model {
        TrainedModel::Scoring(p) => {
            if kind.variant() != Some(p.variant()) {
                return Err(Error::Config(format!("model kind `{}` does not match the parameters", kind.name())));
            }
            write_encoder(&mut out, "user", &p.user_encoder);
            write_encoder(&mut out, "item", &p.item_encoder);
            match &p.network {
                Network::TwoTower { user, item } => {
                    out.push_str("network two_tower\n");
                    write_mlp(&mut out, "user", user);
                    write_mlp(&mut out, "item", item);
                }
                Network::Joint(m) => {
                    out.push_str("network joint\n");
                    write_mlp(&mut out, "joint", m);
                }
            }
        }
        TrainedModel::Baseline(b) => {
            if kind != ModelKind::Baseline {
                return Err(Error::Config("baseline parameters need kind `baseline`".into()));
            }
            let _ = writeln!(out, "margin {:?}", b.margin);
            let _ = writeln!(out, "neg_weight {:?}", b.neg_weight);
            write_mlp(&mut out, "item_mapper", &b.item_mapper);
        }
    }
    out.push_str("end\n");
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let (i, line) = self
            .inner
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected `{tag}`")))?;
        self.line = i + 1;
        let mut toks = line.split_ascii_whitespace();
        match toks.next() {
            Some(t) if t == tag => Ok(toks.collect()),
            other => Err(self.err(format!("expected `{tag}`, found `{}`", other.unwrap_or("")))),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.line))
    }

    fn usize_at(&self, toks: &[&str], i: usize) -> Result<usize> {
        toks.get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("expected integer at field {}", i + 1)))
    }

    fn floats(&mut self, tag: &str, n: usize) -> Result<Vec<f64>> {
        let toks = self.next(tag)?;
        if toks.len() != n {
            return Err(self.err(format!("`{tag}` expects {n} values, found {}", toks.len())));
        }
        toks.iter()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad float `{t}`"))))
            .collect()
    }

    fn scalar(&mut self, tag: &str) -> Result<f64> {
        Ok(self.floats(tag, 1)?[0])
    }
}

fn read_encoder(lines: &mut Lines<'_>, side: &str) -> Result<FeatureEncoder> {
    let toks = lines.next("encoder")?;
    if toks.first() != Some(&side) {
        return Err(lines.err(format!("expected {side} encoder")));
    }
    match toks.get(1) {
        Some(&"pretrained") => Ok(FeatureEncoder::Pretrained {
            dim: lines.usize_at(&toks, 2)?,
        }),
        Some(&"categorical") => {
            let dim = lines.usize_at(&toks, 2)?;
            let n = lines.usize_at(&toks, 3)?;
            let mut fields = Vec::with_capacity(n);
            for _ in 0..n {
                let f = lines.next("field")?;
                let name = f.first().ok_or_else(|| lines.err("field name missing"))?.to_string();
                let vocab = lines.usize_at(&f, 1)?;
                let table = lines.floats("values", vocab * dim)?;
                fields.push(EmbeddingField { name, vocab, table });
            }
            Ok(FeatureEncoder::Categorical { dim, fields })
        }
        _ => Err(lines.err("unknown encoder mode")),
    }
}

fn read_mlp(lines: &mut Lines<'_>, name: &str) -> Result<Mlp> {
    let toks = lines.next("mlp")?;
    if toks.first() != Some(&name) {
        return Err(lines.err(format!("expected mlp `{name}`")));
    }
    let n = lines.usize_at(&toks, 1)?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let t = lines.next("layer")?;
        let in_dim = lines.usize_at(&t, 0)?;
        let out_dim = lines.usize_at(&t, 1)?;
        let act = t
            .get(2)
            .and_then(|a| Activation::from_name(a))
            .ok_or_else(|| lines.err("unknown activation"))?;
        let bias = match t.get(3) {
            Some(&"bias") => true,
            Some(&"nobias") => false,
            _ => return Err(lines.err("expected `bias` or `nobias`")),
        };
        let weights = lines.floats("weights", in_dim * out_dim)?;
        let biases = if bias { Some(lines.floats("biases", out_dim)?) } else { None };
        layers.push(DenseLayer::new(in_dim, out_dim, weights, biases, act)?);
    }
    Mlp::new(layers)
}

/// Parses a checkpoint produced by [`write_checkpoint`].
pub fn read_checkpoint(text: &str) -> Result<(ModelKind, TrainedModel)> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next(MAGIC)?;
    if header != [VERSION.to_string().as_str()] {
        return Err(lines.err(format!("unsupported checkpoint version {:?}", header)));
    }
    let k = lines.next("kind")?;
    let kind = k
        .first()
        .and_then(|s| ModelKind::from_name(s))
        .ok_or_else(|| lines.err("unknown model kind"))?;
    let model = if kind == ModelKind::Baseline {
        let margin = lines.scalar("margin")?;
        let neg_weight = lines.scalar("neg_weight")?;
        let mapper = read_mlp(&mut lines, "item_mapper")?;
        TrainedModel::Baseline(BaselineParams::new(mapper, margin, neg_weight)?)
    } else {
        let user_encoder = read_encoder(&mut lines, "user")?;
        let item_encoder = read_encoder(&mut lines, "item")?;
        let net = lines.next("network")?;
        let network = match net.first() {
            Some(&"two_tower") => Network::TwoTower {
                user: read_mlp(&mut lines, "user")?,
                item: read_mlp(&mut lines, "item")?,
            },
            Some(&"joint") => Network::Joint(read_mlp(&mut lines, "joint")?),
            _ => return Err(lines.err("unknown network")),
        };
        let p = ModelParameters::new(network, user_encoder, item_encoder)?;
        if kind.variant() != Some(p.variant()) {
            return Err(Error::Checkpoint(format!("kind `{}` does not match network", kind.name())));
        }
        TrainedModel::Scoring(p)
    };
    lines.next("end")?;
    Ok((kind, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{ModelSpec, Variant};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(variant: Variant, categorical: bool, seed: u64) -> ModelParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let user = if categorical {
            FeatureEncoder::categorical(&[("a".into(), 3), ("b".into(), 2)], 2, &mut rng)
        } else {
            FeatureEncoder::pretrained(3)
        };
        let spec = ModelSpec {
            variant,
            hidden: vec![4, 3],
            bias: seed % 2 == 0,
        };
        ModelParameters::init(&spec, user, FeatureEncoder::pretrained(2), &mut rng).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_bit_exact(seed in 0u64..1000, joint in any::<bool>(), categorical in any::<bool>()) {
            let (variant, kind) = if joint { (Variant::JointMlp, ModelKind::MeShI) } else { (Variant::TwoTower, ModelKind::MeSh) };
            let p = TrainedModel::Scoring(model(variant, categorical, seed));
            let text = write_checkpoint(kind, &p).unwrap();
            let (k2, p2) = read_checkpoint(&text).unwrap();
            prop_assert_eq!(k2, kind);
            prop_assert_eq!(write_checkpoint(k2, &p2).unwrap(), text);
            prop_assert_eq!(p2, p);
        }
    }

    #[test]
    fn baseline_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = TrainedModel::Baseline(BaselineParams::init(3, &[4, 2], 0.75, 2.0, &mut rng).unwrap());
        let text = write_checkpoint(ModelKind::Baseline, &b).unwrap();
        assert_eq!(read_checkpoint(&text).unwrap(), (ModelKind::Baseline, b));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let p = TrainedModel::Scoring(model(Variant::TwoTower, false, 1));
        let text = write_checkpoint(ModelKind::MeSh, &p).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(read_checkpoint(cut), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn kind_mismatch_rejected_on_write() {
        let p = TrainedModel::Scoring(model(Variant::TwoTower, false, 1));
        assert!(write_checkpoint(ModelKind::WideDeep, &p).is_err());
    }
}
