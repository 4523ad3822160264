//! Versioned plain-text tensor archives.
//!
//! ```text
//! navacl-tensors 1
//! kind predictor
//! meta layers 8 64 64 1
//! tensor layer0 1024
//! 3fb999999999999a bfe0000000000000 ...
//! end
//! ```
//!
//! Values are IEEE-754 bit patterns in hex, so archives round-trip exactly.
//! Meta values are single lines; tensors may span any number of lines.

use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "navacl-tensors";
pub const FORMAT_VERSION: u32 = 1;
/// Upper bound on the element count of one tensor accepted by the parser.
pub const MAX_TENSOR_LEN: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorArchive {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Vec<f64>)>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_graphic())
}

impl TensorArchive {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Self::default()
        }
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_tensor(&mut self, name: &str, values: &[f64]) {
        self.tensors.push((name.to_string(), values.to_vec()));
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(0, format!("missing meta `{key}`")))
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta(key)?
            .parse()
            .map_err(|_| Error::parse(0, format!("invalid meta `{key}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&[f64]> {
        self.tensors
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::parse(0, format!("missing tensor `{name}`")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::parse(2, format!("expected archive kind `{kind}`, found `{}`", self.kind)))
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{FORMAT_TAG} {FORMAT_VERSION}\nkind {}\n", self.kind);
        for (k, v) in &self.meta {
            debug_assert!(valid_name(k) && !v.contains('\n'));
            out.push_str(&format!("meta {k} {v}\n"));
        }
        for (name, values) in &self.tensors {
            out.push_str(&format!("tensor {name} {}\n", values.len()));
            for chunk in values.chunks(8) {
                let line: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
        let (n, first) = lines.next().ok_or_else(|| Error::parse(1, "empty archive"))?;
        let version = first
            .strip_prefix(FORMAT_TAG)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::parse(n, "not a tensor archive"))?;
        if version.trim() != FORMAT_VERSION.to_string() {
            return Err(Error::parse(n, format!("unsupported version {version}")));
        }
        let (n, kind_line) = lines.next().ok_or_else(|| Error::parse(n + 1, "missing kind"))?;
        let kind = kind_line
            .strip_prefix("kind ")
            .filter(|k| valid_name(k))
            .ok_or_else(|| Error::parse(n, "expected `kind <name>`"))?;
        let mut archive = TensorArchive::new(kind);

        loop {
            let (n, line) = lines.next().ok_or_else(|| Error::parse(0, "missing `end`"))?;
            if line == "end" {
                break;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                if !valid_name(k) {
                    return Err(Error::parse(n, "invalid meta key"));
                }
                archive.meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let (name, len) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::parse(n, "expected `tensor <name> <len>`"))?;
                let len: usize = len.parse().map_err(|_| Error::parse(n, "invalid tensor length"))?;
                if !valid_name(name) || len > MAX_TENSOR_LEN {
                    return Err(Error::parse(n, "invalid tensor header"));
                }
                let mut values = Vec::with_capacity(len.min(1 << 16));
                while values.len() < len {
                    let (n, data) = lines.next().ok_or_else(|| Error::parse(n, "truncated tensor"))?;
                    for word in data.split_ascii_whitespace() {
                        if values.len() == len || word.len() != 16 {
                            return Err(Error::parse(n, "malformed tensor data"));
                        }
                        let bits = u64::from_str_radix(word, 16)
                            .map_err(|_| Error::parse(n, "invalid hex value"))?;
                        values.push(f64::from_bits(bits));
                    }
                }
                archive.tensors.push((name.to_string(), values));
            } else {
                return Err(Error::parse(n, format!("unexpected line {line:?}")));
            }
        }
        if lines.any(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::parse(0, "data after `end`"));
        }
        Ok(archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::harness::io::write_atomic(path, self.render().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trips_bit_exact(values in proptest::collection::vec(any::<u64>(), 0..40), key in "[a-z_]{1,8}", val in "[ -~]{0,20}") {
            let floats: Vec<f64> = values.iter().map(|&b| f64::from_bits(b)).collect();
            let mut a = TensorArchive::new("test");
            a.push_meta(&key, &val);
            a.push_tensor("w", &floats);
            a.push_tensor("empty", &[]);
            let back = TensorArchive::parse(&a.render()).unwrap();
            let bits: Vec<u64> = back.tensor("w").unwrap().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, values);
            prop_assert_eq!(back.meta(&key).unwrap(), val.as_str());
            prop_assert!(back.tensor("empty").unwrap().is_empty());
        }
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "",
            "navacl-tensors 2\nkind x\nend\n",
            "navacl-tensors 1\nkind x\n",
            "navacl-tensors 1\nkind x\ntensor w 2\n0000000000000000\nend\n",
            "navacl-tensors 1\nkind x\ntensor w 1\nzz00000000000000\nend\n",
            "navacl-tensors 1\nkind x\ntensor w 99999999999\nend\n",
            "navacl-tensors 1\nkind x\nend\nextra\n",
        ] {
            assert!(TensorArchive::parse(bad).is_err(), "{bad:?}");
        }
    }
}
