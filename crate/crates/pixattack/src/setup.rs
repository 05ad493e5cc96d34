//! Turns oracle and attention specs into live objects, and fixes the seeds
//! of the built-in toy models.

use std::time::Duration;

use pixattack_core::toy::{toy_proxy_spec, EXEMPLAR_AMPLITUDE, EXEMPLAR_NOISE, TOY_CLASSES, TOY_TARGET_GAIN};
use pixattack_core::{AttentionMap, ConvGap, Image, LinearSoftmax, Oracle, OracleError, Shape, ToyModel};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AttentionSpec, OracleSpec, ToyVariant};
use crate::files::load_attention;
use crate::model_file::load_model;
use crate::transport::{HttpOracle, SubprocessOracle};
use crate::FormatError;

pub const TARGET_SEED: u64 = 7;
pub const PROXY_SEED: u64 = 11;
pub const CONV_TARGET_SEED: u64 = 13;
pub const HTTP_TIMEOUT: Duration = Duration::from_secs(30);

/// Seed and class of the bundled sample image.
pub const SAMPLE_SEED: u64 = 2024;
pub const SAMPLE_CLASS: usize = 3;
pub const SAMPLE_SHAPE: Shape = Shape::new(32, 32, 3);

pub fn default_target(shape: Shape) -> LinearSoftmax {
    LinearSoftmax::seeded(shape, TOY_CLASSES, TOY_TARGET_GAIN, TARGET_SEED).expect("valid toy parameters")
}

pub fn default_proxy(channels: usize) -> ConvGap {
    ConvGap::seeded(toy_proxy_spec(channels, TOY_CLASSES), PROXY_SEED).expect("valid toy parameters")
}

/// A seeded image the default linear target assigns to `class`.
pub fn exemplar(shape: Shape, class: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    default_target(shape).class_exemplar(class, EXEMPLAR_AMPLITUDE, EXEMPLAR_NOISE, &mut rng)
}

pub fn sample_image() -> Image {
    exemplar(SAMPLE_SHAPE, SAMPLE_CLASS, SAMPLE_SEED)
}

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("model file holds a {found} model, expected {expected}")]
    WrongKind { expected: ToyVariant, found: ToyVariant },
}

fn variant_of(model: &ToyModel) -> ToyVariant {
    match model {
        ToyModel::Linear(_) => ToyVariant::Linear,
        ToyModel::ConvGap(_) => ToyVariant::ConvGap,
    }
}

/// Builds the oracle for images of `shape`. `max_in_flight` only matters
/// for HTTP.
pub fn build_oracle(spec: &OracleSpec, shape: Shape, max_in_flight: usize) -> Result<Box<dyn Oracle + Send>, SetupError> {
    Ok(match spec {
        OracleSpec::Toy(ToyVariant::Linear) => Box::new(default_target(shape)),
        OracleSpec::Toy(ToyVariant::ConvGap) => Box::new(
            ConvGap::seeded(toy_proxy_spec(shape.channels, TOY_CLASSES), CONV_TARGET_SEED)
                .map_err(FormatError::from)?,
        ),
        OracleSpec::ToyFile(variant, path) => {
            let model = load_model(path)?;
            if variant_of(&model) != *variant {
                return Err(SetupError::WrongKind {
                    expected: *variant,
                    found: variant_of(&model),
                });
            }
            Box::new(model)
        }
        OracleSpec::Subprocess(cmd) => Box::new(SubprocessOracle::spawn(cmd, Some(shape))?),
        OracleSpec::Http(url) => Box::new(HttpOracle::new(url, Some(shape), max_in_flight, HTTP_TIMEOUT)),
    })
}

pub enum Attention {
    Proxy(ConvGap),
    Map(AttentionMap),
}

/// Loads the proxy model or the precomputed map for `image`.
pub fn build_attention(spec: &AttentionSpec, image: &Image) -> Result<Attention, SetupError> {
    Ok(match spec {
        AttentionSpec::Proxy => Attention::Proxy(default_proxy(image.channels())),
        AttentionSpec::ProxyFile(path) => match load_model(path)? {
            ToyModel::ConvGap(m) => Attention::Proxy(m),
            other => {
                return Err(SetupError::WrongKind {
                    expected: ToyVariant::ConvGap,
                    found: variant_of(&other),
                })
            }
        },
        AttentionSpec::File(path) => Attention::Map(load_attention(path, Some((image.height(), image.width())))?),
    })
}

impl Attention {
    pub fn source(&self) -> pixattack_core::AttentionSource<'_> {
        match self {
            Attention::Proxy(p) => pixattack_core::AttentionSource::Proxy(p),
            Attention::Map(m) => pixattack_core::AttentionSource::Map(m),
        }
    }
}
