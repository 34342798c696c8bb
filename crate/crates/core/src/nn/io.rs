//! Plain-text parameter format.
//!
//! ```text
//! mlp <layer count>
//! sizes <input> <hidden>... <output>
//! weights <fan_in> <fan_out>
//! <fan_in lines of fan_out values, row-major>
//! bias <fan_out>
//! <fan_out values>
//! ...one weights/bias pair per layer
//! ```
//!
//! Values are written in shortest round-trip form, so a save/load cycle is
//! bit-exact. Parsing is whitespace-token based; line breaks are cosmetic.

use std::fmt::Write as _;
use std::str::{FromStr, SplitWhitespace};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::nn::mlp::{Layer, Mlp};

/// Whitespace tokenizer with typed reads.
pub struct Tokens<'a> {
    inner: SplitWhitespace<'a>,
    what: &'static str,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str, what: &'static str) -> Self {
        Self {
            inner: text.split_whitespace(),
            what,
        }
    }

    fn err(&self, detail: String) -> Error {
        Error::Format {
            what: self.what,
            detail,
        }
    }

    pub fn next_token(&mut self) -> Result<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| self.err("unexpected end of input".into()))
    }

    pub fn expect(&mut self, word: &str) -> Result<()> {
        let got = self.next_token()?;
        if got != word {
            return Err(self.err(format!("expected `{word}`, found `{got}`")));
        }
        Ok(())
    }

    pub fn parse<T: FromStr>(&mut self) -> Result<T> {
        let tok = self.next_token()?;
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }

    /// `word` followed by one value.
    pub fn field<T: FromStr>(&mut self, word: &str) -> Result<T> {
        self.expect(word)?;
        self.parse()
    }

    pub fn finite(&mut self) -> Result<f64> {
        let v: f64 = self.parse()?;
        if !v.is_finite() {
            return Err(self.err(format!("non-finite value {v}")));
        }
        Ok(v)
    }

    pub fn is_done(&mut self) -> bool {
        self.inner.clone().next().is_none()
    }
}

pub fn write_mlp(out: &mut String, net: &Mlp) {
    let sizes = net.sizes();
    let _ = writeln!(out, "mlp {}", net.layers().len());
    let _ = write!(out, "sizes");
    for s in &sizes {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    for layer in net.layers() {
        let _ = writeln!(out, "weights {} {}", layer.fan_in(), layer.fan_out());
        for row in layer.weights.rows() {
            write_row(out, row.iter());
        }
        let _ = writeln!(out, "bias {}", layer.fan_out());
        write_row(out, layer.bias.iter());
    }
}

fn write_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

pub fn read_mlp(tokens: &mut Tokens) -> Result<Mlp> {
    let count: usize = tokens.field("mlp")?;
    tokens.expect("sizes")?;
    let sizes: Vec<usize> = (0..=count).map(|_| tokens.parse()).collect::<Result<_>>()?;
    let mut layers = Vec::with_capacity(count);
    for w in sizes.windows(2) {
        tokens.expect("weights")?;
        let (rows, cols): (usize, usize) = (tokens.parse()?, tokens.parse()?);
        if (rows, cols) != (w[0], w[1]) {
            return Err(tokens.err(format!(
                "layer shape {rows}x{cols} disagrees with sizes header {}x{}",
                w[0], w[1]
            )));
        }
        let data = (0..rows * cols)
            .map(|_| tokens.finite())
            .collect::<Result<Vec<_>>>()?;
        let weights = Array2::from_shape_vec((rows, cols), data).expect("length checked");
        let n: usize = tokens.field("bias")?;
        if n != cols {
            return Err(tokens.err(format!("bias length {n}, expected {cols}")));
        }
        let bias = (0..n).map(|_| tokens.finite()).collect::<Result<Vec<_>>>()?;
        layers.push(Layer {
            weights,
            bias: Array1::from_vec(bias),
        });
    }
    Mlp::from_layers(layers)
}

impl Mlp {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_mlp(&mut s, self);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Tokens::new(text, "network parameters");
        let net = read_mlp(&mut tokens)?;
        if !tokens.is_done() {
            return Err(tokens.err("trailing data after network".into()));
        }
        Ok(net)
    }
}
