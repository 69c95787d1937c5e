//! Concept extraction from dependency-parsed text: CoNLL-U ingestion,
//! pattern-based extraction and frequency ranking.

pub mod conllu;
pub mod count;
pub mod extract;

pub use conllu::{read_conllu, read_conllu_file, ConlluError, ParsedSentence, Token};
pub use count::{count_and_filter, read_ranked, write_ranked, RankedFileError};
pub use extract::{
    parse_all, parse_concepts, CandidateConcept, DepSets, ParserConfig, Pattern, PosClasses,
};
