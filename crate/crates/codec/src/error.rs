use crate::Tag;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("missing DICM magic after 128-byte preamble")]
    MissingMagic,
    #[error("element {tag} truncated at offset {offset}")]
    TruncatedElement { tag: Tag, offset: usize },
    #[error("unsupported transfer syntax {0:?}")]
    UnsupportedTransferSyntax(String),
    #[error("invalid VR bytes for {tag} at offset {offset}")]
    InvalidVr { tag: Tag, offset: usize },
    #[error("unexpected item or delimiter {tag} at offset {offset}")]
    UnexpectedDelimiter { tag: Tag, offset: usize },
    #[error("undefined length on non-sequence element {tag} at offset {offset}")]
    UnexpectedUndefinedLength { tag: Tag, offset: usize },
    #[error("value of {0} has odd length and its VR has no padding rule")]
    OddLengthValue(Tag),
    #[error("value of {0} too long for a 16-bit length field")]
    ValueTooLong(Tag),
}

pub type Result<T, E = CodecError> = std::result::Result<T, E>;
