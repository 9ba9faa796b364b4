//! Plain-text model checkpoints: a header of `key value` lines followed by one
//! line per weight matrix and bias vector.

use std::fmt::Write as _;
use std::path::Path;

use super::{Autoencoder, OneClassModel};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNetwork, Layer};
use crate::scalar::Scalar;

const MAGIC: &str = "# adfair checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Autoencoder(Autoencoder<T>),
    OneClass(OneClassModel<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub seed: u64,
    pub config_hash: String,
}

fn numbers<T: Scalar>(out: &mut String, key: &str, xs: &[T]) {
    out.push_str(key);
    for x in xs {
        let _ = write!(out, " {}", x.to_f64_lossy());
    }
    out.push('\n');
}

fn push_layers<T: Scalar>(out: &mut String, net: &DenseNetwork<T>) {
    for l in net.layers() {
        let _ = writeln!(
            out,
            "layer {} {} {} {}",
            l.in_dim,
            l.out_dim,
            l.activation.name(),
            if l.bias.is_some() { "bias" } else { "nobias" }
        );
        numbers(out, "w", &l.weights);
        if let Some(b) = &l.bias {
            numbers(out, "b", b);
        }
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let (kind, nets): (&str, Vec<&DenseNetwork<T>>) = match &self.model {
            Model::Autoencoder(ae) => ("autoencoder", vec![&ae.encoder, &ae.decoder]),
            Model::OneClass(m) => ("one_class", vec![&m.net]),
        };
        let _ = writeln!(out, "kind {kind}");
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "config {}", self.config_hash);
        for (i, net) in nets.iter().enumerate() {
            let widths: Vec<String> = net.widths().iter().map(usize::to_string).collect();
            let _ = writeln!(out, "network {i} {}", widths.join(" "));
            push_layers(&mut out, net);
        }
        if let Model::OneClass(m) = &self.model {
            numbers(&mut out, "center", &m.center);
        }
        out
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Option<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Some(l.split_whitespace().collect());
        }
        None
    }

    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        match self.next_fields() {
            Some(f) if f[0] == key => Ok(f[1..].to_vec()),
            Some(f) => Err(self.err(format!("expected `{key}`, found `{}`", f[0]))),
            None => Err(self.err(format!("expected `{key}`, found end of file"))),
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.line))
    }
}

fn parse_num<T: Scalar>(lines: &Lines<'_>, s: &str) -> Result<T> {
    s.parse::<f64>()
        .map(T::of)
        .map_err(|e| lines.err(format!("bad number `{s}`: {e}")))
}

fn parse_vec<T: Scalar>(lines: &mut Lines<'_>, key: &str, len: usize) -> Result<Vec<T>> {
    let f = lines.expect(key)?;
    if f.len() != len {
        return Err(lines.err(format!("`{key}` needs {len} values, found {}", f.len())));
    }
    f.iter().map(|s| parse_num(lines, s)).collect()
}

fn parse_network<T: Scalar>(lines: &mut Lines<'_>, index: usize) -> Result<DenseNetwork<T>> {
    let head = lines.expect("network")?;
    if head.first().and_then(|s| s.parse::<usize>().ok()) != Some(index) || head.len() < 3 {
        return Err(lines.err(format!("bad header for network {index}")));
    }
    let mut layers = Vec::new();
    for _ in 0..head.len() - 2 {
        let f = lines.expect("layer")?;
        if f.len() != 4 {
            return Err(lines.err("layer needs: in out activation bias|nobias".into()));
        }
        let in_dim: usize = f[0].parse().map_err(|_| lines.err(format!("bad width `{}`", f[0])))?;
        let out_dim: usize = f[1].parse().map_err(|_| lines.err(format!("bad width `{}`", f[1])))?;
        let activation: Activation = f[2].parse().map_err(|e: String| lines.err(e))?;
        let has_bias = match f[3] {
            "bias" => true,
            "nobias" => false,
            other => return Err(lines.err(format!("expected bias or nobias, found `{other}`"))),
        };
        let weights = parse_vec(lines, "w", in_dim * out_dim)?;
        let bias = if has_bias { Some(parse_vec(lines, "b", out_dim)?) } else { None };
        layers.push(Layer { in_dim, out_dim, weights, bias, activation });
    }
    let net = DenseNetwork::from_layers(layers).map_err(|e| lines.err(e.to_string()))?;
    let declared: Vec<usize> = head[1..].iter().filter_map(|s| s.parse().ok()).collect();
    if declared != net.widths() {
        return Err(lines.err(format!("declared widths {declared:?} disagree with layers {:?}", net.widths())));
    }
    Ok(net)
}

pub fn parse_checkpoint<T: Scalar>(text: &str) -> Result<Checkpoint<T>> {
    if !text.trim_start().starts_with(MAGIC) {
        return Err(Error::Checkpoint("missing checkpoint header".into()));
    }
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let kind = lines.expect("kind")?;
    let seed = lines.expect("seed")?;
    let seed = seed
        .first()
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| lines.err("bad seed".into()))?;
    let config_hash = lines.expect("config")?.first().copied().unwrap_or("").to_string();
    let model = match kind.first().copied() {
        Some("autoencoder") => {
            let encoder = parse_network(&mut lines, 0)?;
            let decoder = parse_network(&mut lines, 1)?;
            Model::Autoencoder(Autoencoder::new(encoder, decoder).map_err(|e| lines.err(e.to_string()))?)
        }
        Some("one_class") => {
            let net = parse_network(&mut lines, 0)?;
            let center = parse_vec(&mut lines, "center", net.output_dim())?;
            Model::OneClass(OneClassModel::new(net, center)?)
        }
        other => return Err(lines.err(format!("unknown model kind {other:?}"))),
    };
    if let Some(extra) = lines.next_fields() {
        return Err(lines.err(format!("unexpected trailing `{}`", extra[0])));
    }
    Ok(Checkpoint { model, seed, config_hash })
}

pub fn save_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
