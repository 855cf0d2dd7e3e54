//! The PSV XML document format, version 1: reader, canonical writer and
//! schema validation.

mod parse;
mod serialize;

pub use parse::{
    parse_psv, parse_psv_mapped, parse_psv_with, validate_schema, ParseOptions, SourceMap,
    DEFAULT_MAX_BYTES,
};
pub use serialize::{serialize_psv, serialize_spec};

use crate::model::ProtocolSpec;

pub const XML_VERSION: &str = "1.0";
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsvDocument {
    pub xml_version: String,
    pub format_version: String,
    pub spec: ProtocolSpec,
}

impl PsvDocument {
    pub fn new(spec: ProtocolSpec) -> Self {
        PsvDocument {
            xml_version: XML_VERSION.to_owned(),
            format_version: FORMAT_VERSION.to_owned(),
            spec,
        }
    }
}
