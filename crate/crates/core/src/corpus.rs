//! Bundled mini-IR programs with their input heap images.

use crate::ir::{parse_module, HeapImage, Module};

#[derive(Debug, Clone, Copy)]
pub struct Program {
    pub name: &'static str,
    pub source: &'static str,
    pub inputs: &'static str,
}

macro_rules! program {
    ($name:literal) => {
        Program {
            name: $name,
            source: include_str!(concat!("../corpus/", $name, ".ir")),
            inputs: include_str!(concat!("../corpus/", $name, ".heap")),
        }
    };
}

pub const PROGRAMS: &[Program] = &[
    program!("sample"),
    program!("vecops"),
    program!("stats"),
    program!("decoder"),
    program!("filters"),
    program!("checksums"),
    program!("matrix"),
    program!("sorting"),
    program!("quant"),
    program!("bitops"),
];

impl Program {
    pub fn module(&self) -> Module {
        parse_module(self.source).unwrap_or_else(|e| panic!("corpus program {}: {e}", self.name))
    }

    pub fn heap_images(&self) -> Vec<HeapImage> {
        HeapImage::parse_many(self.inputs).unwrap_or_else(|e| panic!("corpus inputs {}: {e}", self.name))
    }
}

pub fn get(name: &str) -> Option<&'static Program> {
    PROGRAMS.iter().find(|p| p.name == name)
}
