//! Undirected graphs with nonnegative integer link weights and optional node attributes.
//!
//! Text format (UTF-8, LF):
//!
//! ```text
//! n <count> p <attr-dim>
//! i<TAB>j<TAB>w          one line per linked pair, each pair once
//! attr i v1 v2 ... vp    optional, one per node when p > 0
//! ```
//!
//! Blank lines and lines starting with `#` are ignored on input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<BTreeMap<usize, u32>>,
    attr_dim: usize,
    attributes: Option<Vec<Vec<f64>>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self { n, adj: vec![BTreeMap::new(); n], attr_dim: 0, attributes: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn attributes(&self) -> Option<&[Vec<f64>]> {
        self.attributes.as_deref()
    }

    pub fn attribute(&self, i: usize) -> Option<&[f64]> {
        self.attributes.as_ref().and_then(|a| a.get(i)).map(Vec::as_slice)
    }

    pub fn set_attributes(&mut self, attrs: Vec<Vec<f64>>) -> Result<()> {
        if attrs.len() != self.n {
            return Err(invalid(format!("{} attribute rows for {} nodes", attrs.len(), self.n)));
        }
        let p = attrs.first().map_or(0, Vec::len);
        if p == 0 || attrs.iter().any(|a| a.len() != p) {
            return Err(invalid("attribute rows must share one positive dimension"));
        }
        if attrs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("attributes must be finite"));
        }
        self.attr_dim = p;
        self.attributes = Some(attrs);
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(invalid(format!("pair ({i}, {j}) out of range for {} nodes", self.n)));
        }
        if i == j {
            return Err(invalid(format!("self-link ({i}, {i}) not allowed")));
        }
        Ok(())
    }

    /// Sets `w_ij = w_ji = w`; zero removes the link.
    pub fn set_weight(&mut self, i: usize, j: usize, w: u32) -> Result<()> {
        self.check_pair(i, j)?;
        if w == 0 {
            self.adj[i].remove(&j);
            self.adj[j].remove(&i);
        } else {
            self.adj[i].insert(j, w);
            self.adj[j].insert(i, w);
        }
        Ok(())
    }

    pub fn add_weight(&mut self, i: usize, j: usize, w: u32) -> Result<()> {
        let cur = self.weight(i, j);
        self.set_weight(i, j, cur.saturating_add(w))
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.adj.get(i).and_then(|m| m.get(&j)).copied().unwrap_or(0)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Linked nodes of `i` with weights, ascending by index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.adj[i].iter().map(|(&j, &w)| (j, w))
    }

    /// Each linked pair once as `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.range(i + 1..).map(move |(&j, &w)| (i, j, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    /// Ordered pairs `(i, j)` with `w_ij > 0`; each undirected link appears twice.
    pub fn positive_pairs(&self) -> Vec<(usize, usize, u32)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.iter().map(move |(&j, &w)| (i, j, w)))
            .collect()
    }

    /// `Σ_{i≠j} w_ij` over ordered pairs.
    pub fn total_weight(&self) -> u64 {
        self.adj.iter().flat_map(|m| m.values()).map(|&w| u64::from(w)).sum()
    }

    /// Copy with the same nodes and attributes but no links.
    pub fn without_links(&self) -> Self {
        Self { n: self.n, adj: vec![BTreeMap::new(); self.n], attr_dim: self.attr_dim, attributes: self.attributes.clone() }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n {} p {}", self.n, self.attr_dim);
        for (i, j, w) in self.edges() {
            let _ = writeln!(s, "{i}\t{j}\t{w}");
        }
        if let Some(attrs) = &self.attributes {
            for (i, a) in attrs.iter().enumerate() {
                let _ = write!(s, "attr {i}");
                for v in a {
                    let _ = write!(s, " {v:?}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut graph: Option<Graph> = None;
        let mut attrs: Vec<Option<Vec<f64>>> = Vec::new();
        let mut p = 0usize;
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let Some(g) = graph.as_mut() else {
                let toks: Vec<&str> = line.split_whitespace().collect();
                match toks.as_slice() {
                    ["n", n, "p", pd] => {
                        let n: usize = n.parse().map_err(|_| perr(format!("bad node count {n:?}")))?;
                        p = pd.parse().map_err(|_| perr(format!("bad attribute dimension {pd:?}")))?;
                        graph = Some(Graph::new(n));
                        attrs = vec![None; if p > 0 { n } else { 0 }];
                        continue;
                    }
                    _ => return Err(perr(format!("expected header \"n <count> p <attr-dim>\", found {line:?}"))),
                }
            };
            if let Some(rest) = line.strip_prefix("attr") {
                let mut toks = rest.split_whitespace();
                let i: usize = toks
                    .next()
                    .ok_or_else(|| perr("attr line without node index".into()))?
                    .parse()
                    .map_err(|_| perr("bad attr node index".into()))?;
                let vals = toks
                    .map(|t| t.parse::<f64>().map_err(|_| perr(format!("bad attribute value {t:?}"))))
                    .collect::<Result<Vec<f64>>>()?;
                if p == 0 {
                    return Err(perr("attr line but header declares p 0".into()));
                }
                if vals.len() != p {
                    return Err(perr(format!("attr line has {} values, expected {p}", vals.len())));
                }
                let slot = attrs.get_mut(i).ok_or_else(|| perr(format!("attr node {i} out of range")))?;
                if slot.is_some() {
                    return Err(perr(format!("duplicate attr line for node {i}")));
                }
                *slot = Some(vals);
                continue;
            }
            let toks: Vec<&str> = line.split('\t').collect();
            if toks.len() != 3 {
                return Err(perr(format!("expected \"i<TAB>j<TAB>w\", found {line:?}")));
            }
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| perr(format!("bad integer {t:?}")));
            let (i, j) = (parse(toks[0])?, parse(toks[1])?);
            let w: u32 = toks[2].trim().parse().map_err(|_| perr(format!("bad weight {:?}", toks[2])))?;
            if g.weight(i, j) != 0 {
                return Err(perr(format!("duplicate pair ({i}, {j})")));
            }
            g.set_weight(i, j, w).map_err(|e| perr(e.to_string()))?;
        }
        let mut g = graph.ok_or_else(|| Error::Parse { line: 0, msg: "empty graph file".into() })?;
        if p > 0 {
            let missing = attrs.iter().position(Option::is_none);
            if let Some(i) = missing {
                return Err(Error::Parse { line: 0, msg: format!("no attr line for node {i}") });
            }
            g.set_attributes(attrs.into_iter().map(Option::unwrap).collect())?;
        }
        Ok(g)
    }
}
