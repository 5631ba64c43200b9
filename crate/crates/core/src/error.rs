use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("symbol index {index} out of range for {modulation} (M = {order})")]
    SymbolIndex {
        index: usize,
        modulation: &'static str,
        order: usize,
    },
    #[error("expected {expected} samples, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid OFDM parameters: {0}")]
    OfdmParams(String),
    #[error("invalid channel spec: {0}")]
    ChannelSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty sequence")]
    Empty,
    #[error("degenerate dataset: {0}")]
    Dataset(String),
    #[error("model shape mismatch: {0}")]
    Model(String),
    #[error("unknown modulation name {0:?}")]
    UnknownModulation(String),
}
