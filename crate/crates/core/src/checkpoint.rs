//! `sips-ckpt-v1` parameter files.
//!
//! ```text
//! sips-ckpt-v1
//! meta <key> <value>            model layout, one line per key
//! tensor <name> <d1>x<d2>...    shape header
//! <values>                      row-major, whitespace separated, one line
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::encoder::{Encoder, EncoderKind};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::similarity::{HeadKind, SimilarityHead};

pub const FORMAT_TAG: &str = "sips-ckpt-v1";

pub fn to_string(model: &Model) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FORMAT_TAG}");
    let mut meta: Vec<(&str, String)> = vec![("head", model.head.kind().to_string()), ("dim", model.dim().to_string())];
    if let SimilarityHead::Ipds { k_minus, .. } = model.head {
        meta.push(("k_minus", k_minus.to_string()));
    }
    match model.encoder.kind() {
        EncoderKind::Table { n, .. } => {
            meta.push(("encoder", "table".into()));
            meta.push(("nodes", n.to_string()));
        }
        EncoderKind::Mlp { input_dim, hidden, .. } => {
            meta.push(("encoder", "mlp".into()));
            meta.push(("input_dim", input_dim.to_string()));
            meta.push(("hidden", hidden.to_string()));
        }
    }
    meta.push(("ball_projection", model.encoder.ball_projection().to_string()));
    meta.push(("separate_bias_network", model.bias_encoder.is_some().to_string()));
    for (k, v) in meta {
        let _ = writeln!(s, "meta {k} {v}");
    }
    for (name, shape, data) in model.named_tensors() {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "tensor {name} {}", dims.join("x"));
        let vals: Vec<String> = data.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    s
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_string(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    from_str(&std::fs::read_to_string(path)?)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn from_str(text: &str) -> Result<Model> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, tag)) if tag.trim() == FORMAT_TAG => {}
        Some((_, tag)) => return Err(perr(1, format!("unknown checkpoint format {tag:?}, expected {FORMAT_TAG}"))),
        None => return Err(perr(1, "empty checkpoint")),
    }
    let mut meta = BTreeMap::new();
    let mut tensors: BTreeMap<String, (usize, Vec<usize>, Vec<f64>)> = BTreeMap::new();
    while let Some((no, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("meta") => {
                let (Some(k), Some(v)) = (toks.next(), toks.next()) else {
                    return Err(perr(no, "meta line needs a key and a value"));
                };
                meta.insert(k.to_string(), v.to_string());
            }
            Some("tensor") => {
                let (Some(name), Some(shape)) = (toks.next(), toks.next()) else {
                    return Err(perr(no, "tensor line needs a name and a shape"));
                };
                let shape = shape
                    .split('x')
                    .map(|d| d.parse::<usize>().map_err(|_| perr(no, format!("bad shape {shape:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                let (vno, vals) = lines.next().ok_or_else(|| perr(no, format!("tensor {name} has no value line")))?;
                let data = vals
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| perr(vno, format!("bad value {t:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                let expected: usize = shape.iter().product();
                if data.len() != expected {
                    return Err(perr(vno, format!("tensor {name} has {} values, shape needs {expected}", data.len())));
                }
                tensors.insert(name.to_string(), (no, shape, data));
            }
            _ => return Err(perr(no, format!("unexpected line {line:?}"))),
        }
    }

    let get = |k: &str| meta.get(k).ok_or_else(|| perr(0, format!("missing meta key {k}")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| perr(0, format!("meta {k} is not a count"))) };
    let flag = |k: &str| -> Result<bool> { get(k)?.parse().map_err(|_| perr(0, format!("meta {k} is not a bool"))) };

    let head_kind: HeadKind = get("head")?.parse()?;
    let dim = num("dim")?;
    let k_minus = if head_kind == HeadKind::Ipds { Some(num("k_minus")?) } else { None };
    let mut head = head_kind.build(dim, k_minus)?;
    let separate = flag("separate_bias_network")?;
    let projection = flag("ball_projection")?;
    let main_dim = if separate { dim.checked_sub(1).ok_or_else(|| perr(0, "dim too small"))? } else { dim };
    let kind_for = |d: usize| -> Result<EncoderKind> {
        match get("encoder")?.as_str() {
            "table" => Ok(EncoderKind::Table { n: num("nodes")?, dim: d }),
            "mlp" => Ok(EncoderKind::Mlp { input_dim: num("input_dim")?, hidden: num("hidden")?, dim: d }),
            other => Err(perr(0, format!("unknown encoder {other:?}"))),
        }
    };
    let mut take = |prefix: &str, kind: EncoderKind| -> Result<Vec<Vec<f64>>> {
        let names: &[&str] = match kind {
            EncoderKind::Table { .. } => &["table"],
            EncoderKind::Mlp { .. } => &["A", "B", "c"],
        };
        let probe = Encoder::from_tensors(kind, false, zeros_for(kind))?;
        names
            .iter()
            .zip(probe.tensors())
            .map(|(n, (_, shape, _))| {
                let key = format!("{prefix}.{n}");
                let (no, got, data) = tensors.remove(&key).ok_or_else(|| perr(0, format!("missing tensor {key}")))?;
                if got != shape {
                    return Err(perr(no, format!("tensor {key} has shape {got:?}, expected {shape:?}")));
                }
                Ok(data)
            })
            .collect()
    };
    let main_kind = kind_for(main_dim)?;
    let encoder = Encoder::from_tensors(main_kind, projection, take("encoder", main_kind)?)?;
    let bias_encoder = if separate {
        let k = kind_for(1)?;
        Some(Encoder::from_tensors(k, false, take("bias_encoder", k)?)?)
    } else {
        None
    };
    if let Some(g) = head.gamma_mut() {
        let (no, shape, data) = tensors.remove("head.gamma").ok_or_else(|| perr(0, "missing tensor head.gamma"))?;
        if shape != [1] {
            return Err(perr(no, "head.gamma must have shape 1"));
        }
        *g = data[0];
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(perr(0, format!("unexpected tensor {extra}")));
    }
    Model::new(head, encoder, bias_encoder)
}

fn zeros_for(kind: EncoderKind) -> Vec<Vec<f64>> {
    match kind {
        EncoderKind::Table { n, dim } => vec![vec![0.0; n * dim]],
        EncoderKind::Mlp { input_dim, hidden, dim } => {
            vec![vec![0.0; dim * hidden], vec![0.0; hidden * input_dim], vec![0.0; hidden]]
        }
    }
}
