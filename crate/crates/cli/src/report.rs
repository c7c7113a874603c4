//! Report tree with deterministic JSON and CSV renderings.

use std::collections::BTreeMap;

use flatquant::C64;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub const SCHEMA: &str = "flatquant-report/1";

/// JSON-like value whose objects keep insertion order and whose floats
/// print with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Node>),
    Obj(Vec<(String, Node)>),
}

impl Node {
    pub fn obj() -> Self {
        Node::Obj(Vec::new())
    }

    pub fn with(mut self, key: &str, value: impl Into<Node>) -> Self {
        if let Node::Obj(entries) = &mut self {
            entries.push((key.to_string(), value.into()));
        }
        self
    }

    pub fn complex(c: C64) -> Self {
        Node::obj().with("re", c.re).with("im", c.im)
    }

    fn scalar_text(&self) -> String {
        match self {
            Node::Null => String::new(),
            Node::Bool(b) => b.to_string(),
            Node::Int(i) => i.to_string(),
            Node::Num(x) if x.is_finite() => float(*x),
            Node::Num(x) => x.to_string(),
            Node::Str(s) => s.clone(),
            Node::Arr(_) | Node::Obj(_) => unreachable!("flattened before"),
        }
    }

    /// `(path, value)` rows of every scalar leaf.
    pub fn flatten(&self, prefix: &str, out: &mut Vec<(String, String)>) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match self {
            Node::Obj(e) => e.iter().for_each(|(k, v)| v.flatten(&join(k), out)),
            Node::Arr(a) => a.iter().enumerate().for_each(|(i, v)| v.flatten(&join(&i.to_string()), out)),
            leaf => out.push((prefix.to_string(), leaf.scalar_text())),
        }
    }
}

fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("\"{x}\"")
    }
}

impl From<f64> for Node {
    fn from(x: f64) -> Self {
        Node::Num(x)
    }
}

impl From<bool> for Node {
    fn from(b: bool) -> Self {
        Node::Bool(b)
    }
}

impl From<usize> for Node {
    fn from(i: usize) -> Self {
        Node::Int(i as i64)
    }
}

impl From<i64> for Node {
    fn from(i: i64) -> Self {
        Node::Int(i)
    }
}

impl From<&str> for Node {
    fn from(s: &str) -> Self {
        Node::Str(s.to_string())
    }
}

impl From<String> for Node {
    fn from(s: String) -> Self {
        Node::Str(s)
    }
}

impl From<C64> for Node {
    fn from(c: C64) -> Self {
        Node::complex(c)
    }
}

impl From<Option<f64>> for Node {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Node::Null, Node::Num)
    }
}

impl<T: Into<Node>> From<Vec<T>> for Node {
    fn from(v: Vec<T>) -> Self {
        Node::Arr(v.into_iter().map(Into::into).collect())
    }
}

impl Serialize for Node {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Node::Null => s.serialize_unit(),
            Node::Bool(b) => s.serialize_bool(*b),
            Node::Int(i) => s.serialize_i64(*i),
            Node::Num(x) => {
                let raw = RawValue::from_string(float(*x)).map_err(serde::ser::Error::custom)?;
                raw.serialize(s)
            }
            Node::Str(t) => s.serialize_str(t),
            Node::Arr(a) => {
                let mut seq = s.serialize_seq(Some(a.len()))?;
                for v in a {
                    seq.serialize_element(v)?;
                }
                seq.end()
            }
            Node::Obj(e) => {
                let mut map = s.serialize_map(Some(e.len()))?;
                for (k, v) in e {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

/// Complete report of one run.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub results: Node,
    /// `Some` for check-type commands.
    pub pass: Option<bool>,
    pub tolerance: Option<f64>,
    /// Rows of the CSV table, when the command has one.
    pub table: Option<(Vec<&'static str>, Vec<Vec<Node>>)>,
}

impl Report {
    pub fn to_node(&self) -> Node {
        let inputs = Node::Obj(self.inputs.iter().map(|(k, v)| (k.clone(), Node::Str(v.clone()))).collect());
        let mut n = Node::obj()
            .with("schema", SCHEMA)
            .with("version", flatquant::VERSION)
            .with("command", self.command.as_str())
            .with("config_hash", self.config_hash.as_str())
            .with("inputs", inputs)
            .with("results", self.results.clone());
        if let Some(tol) = self.tolerance {
            n = n.with("tolerance", tol);
        }
        if let Some(p) = self.pass {
            n = n.with("pass", p);
        }
        n
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_node()).expect("report serializes");
        s.push('\n');
        s
    }

    /// The command's table when it has one, otherwise `key,value` rows of
    /// every scalar in the report.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.table {
            Some((header, rows)) => {
                w.write_record(header).expect("in-memory write");
                for row in rows {
                    w.write_record(row.iter().map(Node::scalar_text)).expect("in-memory write");
                }
            }
            None => {
                let mut flat = Vec::new();
                self.to_node().flatten("", &mut flat);
                w.write_record(["key", "value"]).expect("in-memory write");
                for (k, v) in flat {
                    w.write_record([k, v]).expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
