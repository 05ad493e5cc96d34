//! Toy model weights as flat key-value text.
//!
//! ```text
//! toy-model v1
//! kind = linear
//! height = 32
//! width = 32
//! channels = 3
//! classes = 10
//! weights = <classes·height·width·channels numbers, class-major>
//! bias = <classes numbers>
//! ```
//!
//! or, for the convolutional variant (also used as the attention proxy):
//!
//! ```text
//! toy-model v1
//! kind = conv-gap
//! in_channels = 3
//! classes = 10
//! filters = 8
//! kernel = 3
//! stride = 4
//! filter_weights = <filters·in_channels·kernel·kernel numbers>
//! filter_bias = <filters numbers>
//! class_weights = <filters·classes numbers, entry k·classes + c>
//! class_bias = <classes numbers>
//! ```
//!
//! Numbers are whitespace separated and written in shortest round-trip
//! form, so saving then loading reproduces the weights bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use pixattack_core::toy::ConvGapSpec;
use pixattack_core::{ConvGap, LinearSoftmax, Shape, ToyModel};

use crate::files::{read_bytes, write_bytes};
use crate::kv::KvFile;
use crate::FormatError;

pub const HEADER: &str = "toy-model v1";

fn numbers(kv: &mut KvFile, key: &str) -> Result<Vec<f64>, FormatError> {
    let entry = kv.take(key).ok_or_else(|| FormatError::KeyValue {
        line: 0,
        message: format!("missing key `{key}`"),
    })?;
    entry
        .value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| FormatError::KeyValue {
                line: entry.line,
                message: format!("`{key}`: bad number {t:?}"),
            })
        })
        .collect()
}

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 8);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").expect("writing to a String cannot fail");
    }
    s
}

pub fn parse_model(text: &str) -> Result<ToyModel, FormatError> {
    let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == HEADER => {}
        Some((i, l)) => {
            return Err(FormatError::KeyValue {
                line: i + 1,
                message: format!("expected header `{HEADER}`, found {:?}", l.trim()),
            })
        }
        None => {
            return Err(FormatError::KeyValue {
                line: 1,
                message: "empty model file".into(),
            })
        }
    }
    let rest: Vec<(usize, &str)> = lines.collect();
    let first = rest.first().map_or(1, |(i, _)| i + 1);
    let mut kv = KvFile::parse(rest.iter().map(|(_, l)| *l), first)?;
    let kind: String = kv.require("kind")?;
    let model = match kind.as_str() {
        "linear" => {
            let shape = Shape::new(kv.require("height")?, kv.require("width")?, kv.require("channels")?);
            let classes = kv.require("classes")?;
            let weights = numbers(&mut kv, "weights")?;
            let bias = numbers(&mut kv, "bias")?;
            ToyModel::Linear(LinearSoftmax::new(shape, classes, weights, bias)?)
        }
        "conv-gap" => {
            let spec = ConvGapSpec {
                in_channels: kv.require("in_channels")?,
                classes: kv.require("classes")?,
                filters: kv.require("filters")?,
                kernel: kv.require("kernel")?,
                stride: kv.require("stride")?,
            };
            ToyModel::ConvGap(ConvGap::new(
                spec,
                numbers(&mut kv, "filter_weights")?,
                numbers(&mut kv, "filter_bias")?,
                numbers(&mut kv, "class_weights")?,
                numbers(&mut kv, "class_bias")?,
            )?)
        }
        other => {
            return Err(FormatError::KeyValue {
                line: 0,
                message: format!("unknown model kind {other:?}"),
            })
        }
    };
    kv.finish()?;
    Ok(model)
}

pub fn format_model(model: &ToyModel) -> String {
    let mut s = format!("{HEADER}\n");
    match model {
        ToyModel::Linear(m) => {
            let shape = m.shape();
            s += "kind = linear\n";
            s += &format!("height = {}\nwidth = {}\nchannels = {}\n", shape.height, shape.width, shape.channels);
            s += &format!("classes = {}\n", m.classes());
            s += &format!("weights = {}\nbias = {}\n", join(m.weights()), join(m.bias()));
        }
        ToyModel::ConvGap(m) => {
            let spec = m.spec();
            s += "kind = conv-gap\n";
            s += &format!(
                "in_channels = {}\nclasses = {}\nfilters = {}\nkernel = {}\nstride = {}\n",
                spec.in_channels, spec.classes, spec.filters, spec.kernel, spec.stride
            );
            s += &format!("filter_weights = {}\n", join(m.filter_weights()));
            s += &format!("filter_bias = {}\n", join(m.filter_bias()));
            s += &format!("class_weights = {}\n", join(m.class_weights()));
            s += &format!("class_bias = {}\n", join(m.class_bias()));
        }
    }
    s
}

pub fn load_model(path: &Path) -> Result<ToyModel, FormatError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::KeyValue {
        line: 0,
        message: format!("{} is not UTF-8", path.display()),
    })?;
    parse_model(&text)
}

pub fn save_model(path: &Path, model: &ToyModel) -> Result<(), FormatError> {
    write_bytes(path, format_model(model).as_bytes())
}
