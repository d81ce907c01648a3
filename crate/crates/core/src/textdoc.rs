//! Versioned structured-text document used for controller export and
//! network checkpoints. Scalars and tensor entries are written as decimal
//! with 17 significant digits, which round-trips `f64` exactly, so a
//! reloaded document reproduces bitwise-identical values.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const HEADER: &str = "mbcadrt-doc v1";

#[derive(Debug, Clone, Default)]
pub struct TextDoc {
    pub kind: String,
    meta: Vec<(String, String)>,
    scalars: Vec<(String, f64)>,
    tensors: Vec<(String, Matrix)>,
}

impl TextDoc {
    pub fn new(kind: &str) -> Self {
        TextDoc {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn push_meta(&mut self, key: &str, value: &str) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_scalar(&mut self, key: &str, value: f64) {
        self.scalars.push((key.to_string(), value));
    }

    pub fn push_tensor(&mut self, key: &str, value: Matrix) {
        self.tensors.push((key.to_string(), value));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn scalar(&self, key: &str) -> Result<f64> {
        self.scalars
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Parse(format!("missing scalar '{key}'")))
    }

    pub fn tensor(&self, key: &str) -> Result<&Matrix> {
        self.tensors
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Parse(format!("missing tensor '{key}'")))
    }

    pub fn tensors(&self) -> &[(String, Matrix)] {
        &self.tensors
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        out.push_str(&format!("kind {}\n", self.kind));
        for (k, v) in &self.meta {
            out.push_str(&format!("meta {k} {v}\n"));
        }
        for (k, v) in &self.scalars {
            out.push_str(&format!("scalar {k} {}\n", fmt_f64(*v)));
        }
        for (k, m) in &self.tensors {
            out.push_str(&format!("tensor {k} {} {}\n", m.rows(), m.cols()));
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<TextDoc> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Parse("bad or missing document header".into()));
        }
        let mut doc = TextDoc::default();
        let mut saw_end = false;
        while let Some(line) = lines.next() {
            let mut parts = line.splitn(2, ' ');
            let tag = parts.next().unwrap_or("");
            let rest = parts.next().unwrap_or("");
            match tag {
                "kind" => doc.kind = rest.to_string(),
                "meta" => {
                    let (k, v) = rest
                        .split_once(' ')
                        .ok_or_else(|| Error::Parse(format!("bad meta line '{line}'")))?;
                    doc.meta.push((k.to_string(), v.to_string()));
                }
                "scalar" => {
                    let (k, v) = rest
                        .split_once(' ')
                        .ok_or_else(|| Error::Parse(format!("bad scalar line '{line}'")))?;
                    doc.scalars.push((k.to_string(), parse_f64(v)?));
                }
                "tensor" => {
                    let fields: Vec<&str> = rest.split(' ').collect();
                    if fields.len() != 3 {
                        return Err(Error::Parse(format!("bad tensor line '{line}'")));
                    }
                    let name = fields[0];
                    let rows: usize = fields[1]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad tensor rows '{line}'")))?;
                    let cols: usize = fields[2]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad tensor cols '{line}'")))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let row_line = lines
                            .next()
                            .ok_or_else(|| Error::Parse(format!("truncated tensor '{name}'")))?;
                        for tok in row_line.split(' ') {
                            data.push(parse_f64(tok)?);
                        }
                    }
                    if data.len() != rows * cols {
                        return Err(Error::Parse(format!(
                            "tensor '{name}' has {} values, expected {}",
                            data.len(),
                            rows * cols
                        )));
                    }
                    doc.tensors
                        .push((name.to_string(), Matrix::from_vec(rows, cols, data)));
                }
                "end" => {
                    saw_end = true;
                    break;
                }
                "" => {}
                other => return Err(Error::Parse(format!("unknown tag '{other}'"))),
            }
        }
        if !saw_end {
            return Err(Error::Parse("document missing 'end' terminator".into()));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<TextDoc> {
        let text = std::fs::read_to_string(path)?;
        TextDoc::parse(&text)
    }
}

/// 17 significant digits: exact f64 round-trip.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad float '{s}'")))
}
