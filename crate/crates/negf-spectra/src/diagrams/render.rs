use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{compile_frequency, decompose, Arrow, FeynmanDiagram, Interaction, LoopDiagram, Strand, Vertex};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ascii,
    Dot,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascii" => Ok(Format::Ascii),
            "dot" => Ok(Format::Dot),
            other => Err(Error::Config(format!("unknown format '{other}' (expected ascii or dot)"))),
        }
    }
}

/// Something with two strands that can be drawn.
pub trait Drawable {
    fn title(&self) -> String;
    /// Rows from latest to earliest: (ket cell, bra cell).
    fn rows(&self) -> Vec<(Option<&Interaction>, Option<&Interaction>)>;
    fn strands(&self) -> (Vec<&Interaction>, Vec<&Interaction>);
}

impl Drawable for LoopDiagram {
    fn title(&self) -> String {
        format!("loop sign={:+} head={:?}", self.sign, self.head).to_lowercase()
    }

    fn rows(&self) -> Vec<(Option<&Interaction>, Option<&Interaction>)> {
        let n = self.ket.len().max(self.bra.len());
        (0..n)
            .map(|r| {
                let k = self.ket.len().checked_sub(r + 1).map(|i| &self.ket[i]);
                let b = self.bra.len().checked_sub(r + 1).map(|i| &self.bra[i]);
                (k, b)
            })
            .collect()
    }

    fn strands(&self) -> (Vec<&Interaction>, Vec<&Interaction>) {
        (self.ket.iter().collect(), self.bra.iter().collect())
    }
}

impl Drawable for FeynmanDiagram {
    fn title(&self) -> String {
        format!("feynman sign={:+}", self.sign())
    }

    fn rows(&self) -> Vec<(Option<&Interaction>, Option<&Interaction>)> {
        self.sequence
            .iter()
            .rev()
            .map(|i| if i.strand == Strand::Ket { (Some(i), None) } else { (None, Some(i)) })
            .collect()
    }

    fn strands(&self) -> (Vec<&Interaction>, Vec<&Interaction>) {
        let k = self.sequence.iter().filter(|i| i.strand == Strand::Ket).collect();
        let b = self.sequence.iter().filter(|i| i.strand == Strand::Bra).collect();
        (k, b)
    }
}

fn op_name(i: &Interaction) -> &'static str {
    if i.vertex == Vertex::Raise {
        "V+"
    } else {
        "V"
    }
}

/// Right-pointing arrows carry E, left-pointing arrows carry E*.
fn arrow_glyph(i: &Interaction) -> &'static str {
    if i.vertex == Vertex::Raise {
        "-->"
    } else {
        "<--"
    }
}

fn ket_cell(i: Option<&Interaction>) -> String {
    match i {
        None => String::new(),
        Some(i) => format!("{:>5} {} {:<2} w{}", i.time_label, arrow_glyph(i), op_name(i), i.mode + 1),
    }
}

fn bra_cell(i: Option<&Interaction>) -> String {
    match i {
        None => String::new(),
        Some(i) => format!("{:<2} {} {:<5} w{}", op_name(i), arrow_glyph(i), i.time_label, i.mode + 1),
    }
}

pub fn render(d: &dyn Drawable, format: Format) -> String {
    match format {
        Format::Ascii => ascii(d),
        Format::Dot => dot(d),
    }
}

fn ascii(d: &dyn Drawable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", d.title());
    let _ = writeln!(s, "{:>16} | | {:<16}", "ket", "bra");
    for (k, b) in d.rows() {
        let _ = writeln!(s, "{:>16} | | {:<16}", ket_cell(k), bra_cell(b));
    }
    let _ = writeln!(s, "{:>16} ^ ^  time runs upward", "");
    s
}

fn node_id(i: &Interaction, k: usize) -> String {
    let p = if i.strand == Strand::Ket { "k" } else { "b" };
    format!("{p}{k}")
}

fn dot(d: &dyn Drawable) -> String {
    let (ket, bra) = d.strands();
    let mut s = String::new();
    let _ = writeln!(s, "digraph diagram {{");
    let _ = writeln!(s, "  label=\"{}\";", d.title());
    let _ = writeln!(s, "  rankdir=BT;");
    for seq in [&ket, &bra] {
        for (k, i) in seq.iter().enumerate() {
            let dir = if i.arrow == Arrow::Inward { "in" } else { "out" };
            let _ = writeln!(
                s,
                "  {} [label=\"{} {} w{} {}\"];",
                node_id(i, k),
                op_name(i),
                i.time_label,
                i.mode + 1,
                dir
            );
        }
        for k in 1..seq.len() {
            let name = if seq[k].strand == Strand::Ket { "ket" } else { "bra" };
            let _ = writeln!(s, "  {} -> {} [label=\"{name}\"];", node_id(seq[k - 1], k - 1), node_id(seq[k], k));
        }
    }
    if let (Some(k), Some(b)) = (ket.last(), bra.last()) {
        let _ = writeln!(s, "  {} -> {} [style=dashed, label=\"trace\"];", node_id(b, bra.len() - 1), node_id(k, ket.len() - 1));
    }
    let _ = writeln!(s, "}}");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListingEntry {
    #[serde(rename = "loop")]
    pub lp: LoopDiagram,
    pub feynman_count: usize,
    pub expression: String,
    pub arguments: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub process: String,
    pub loops: Vec<ListingEntry>,
}

impl Listing {
    pub fn new(process: &str, loops: &[LoopDiagram], freqs: &[f64]) -> Result<Listing> {
        let mut out = Vec::new();
        for lp in loops {
            let e = compile_frequency(lp, freqs)?;
            out.push(ListingEntry {
                lp: lp.clone(),
                feynman_count: decompose(lp).len(),
                expression: e.printed(),
                arguments: e.frequency_arguments.iter().map(|a| a.display()).collect(),
            });
        }
        Ok(Listing { process: process.to_string(), loops: out })
    }
}

pub fn listing_json(listing: &Listing) -> String {
    serde_json::to_string_pretty(listing).expect("listing serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::{generate_loops, Process};
    use crate::model::presets;

    #[test]
    fn sle_renderings() {
        let lp = &generate_loops(&presets::kh_raman(), &Process::sle(0, 1)).unwrap()[0];
        let a = render(lp, Format::Ascii);
        assert_eq!(a.matches("-->").count() + a.matches("<--").count(), 4);
        assert!(a.contains("time runs upward"));
        let d = render(lp, Format::Dot);
        assert_eq!(d.matches("[label=\"V").count(), 4);
        assert_eq!(d.matches("label=\"ket\"").count(), 1);
        assert_eq!(d.matches("label=\"bra\"").count(), 1);
        assert_eq!(render(lp, Format::Ascii), render(&lp.clone(), Format::Ascii));
        assert!("svg".parse::<Format>().is_err());
    }
}
