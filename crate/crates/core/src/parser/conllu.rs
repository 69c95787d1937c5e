//! CoNLL-U ingestion. Parses are produced upstream; this reader only loads
//! the 10-column format into [`ParsedSentence`] values.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// One token of a dependency-parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    /// Coarse POS tag as given (UPOS like `NOUN` or treebank tags like `NN`).
    pub upos: String,
    /// 1-based index of the head token; 0 means root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    /// Lemma if present, surface form otherwise, lowercased.
    pub fn lemma_lower(&self) -> String {
        if self.lemma.is_empty() || self.lemma == "_" {
            self.form.to_lowercase()
        } else {
            self.lemma.to_lowercase()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub doc_id: String,
    pub sent_id: String,
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Token by 1-based index.
    pub fn token(&self, idx: usize) -> Option<&Token> {
        idx.checked_sub(1).and_then(|i| self.tokens.get(i))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConlluError {
    #[error("failed to read CoNLL-U input: {0}")]
    Io(#[from] std::io::Error),
    #[error("CoNLL-U line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Reads every sentence from a CoNLL-U file. Comment lines set document and
/// sentence ids (`# newdoc id = ...`, `# sent_id = ...`); multiword-token
/// ranges (`1-2`) and empty nodes (`1.1`) are skipped; a blank line closes a
/// sentence. Head indices are checked against the sentence length. A root
/// count other than one is tolerated with a warning since the extraction
/// rules never consult the root.
pub fn read_conllu(reader: impl Read) -> Result<Vec<ParsedSentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut doc_id = String::from("doc");
    let mut sent_id: Option<String> = None;
    let mut tokens: Vec<Token> = Vec::new();
    let mut auto_sent = 0usize;

    let flush = |tokens: &mut Vec<Token>,
                 sent_id: &mut Option<String>,
                 doc_id: &str,
                 auto_sent: &mut usize,
                 line: usize|
     -> Result<Option<ParsedSentence>, ConlluError> {
        if tokens.is_empty() {
            *sent_id = None;
            return Ok(None);
        }
        let id = sent_id.take().unwrap_or_else(|| {
            *auto_sent += 1;
            format!("s{auto_sent}")
        });
        let n = tokens.len();
        for t in tokens.iter() {
            if t.head > n {
                return Err(ConlluError::Parse {
                    line,
                    msg: format!(
                        "head index {} out of range in sentence `{id}` of {n} tokens",
                        t.head
                    ),
                });
            }
        }
        let roots = tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            log::warn!("sentence `{id}`: {roots} root tokens");
        }
        Ok(Some(ParsedSentence {
            doc_id: doc_id.to_string(),
            sent_id: id,
            tokens: std::mem::take(tokens),
        }))
    };

    let mut last_line = 0usize;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let n = lineno + 1;
        last_line = n;
        let trimmed = line.trim_end();

        if trimmed.is_empty() {
            if let Some(s) = flush(&mut tokens, &mut sent_id, &doc_id, &mut auto_sent, n)? {
                sentences.push(s);
            }
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("newdoc id") {
                doc_id = v.trim_start_matches(['=', ' ']).trim().to_string();
                if doc_id.is_empty() {
                    doc_id = "doc".into();
                }
            } else if let Some(v) = comment.strip_prefix("sent_id") {
                sent_id = Some(v.trim_start_matches(['=', ' ']).trim().to_string());
            }
            continue;
        }

        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::Parse {
                line: n,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        // multiword ranges and empty nodes carry no dependency structure
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| ConlluError::Parse {
            line: n,
            msg: format!("bad token id `{}`", cols[0]),
        })?;
        if id != tokens.len() + 1 {
            return Err(ConlluError::Parse {
                line: n,
                msg: format!(
                    "token id {} out of sequence, expected {}",
                    id,
                    tokens.len() + 1
                ),
            });
        }
        let head: usize = match cols[6] {
            "_" => 0,
            h => h.parse().map_err(|_| ConlluError::Parse {
                line: n,
                msg: format!("bad head index `{h}`"),
            })?,
        };
        tokens.push(Token {
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    if let Some(s) = flush(
        &mut tokens,
        &mut sent_id,
        &doc_id,
        &mut auto_sent,
        last_line + 1,
    )? {
        sentences.push(s);
    }
    Ok(sentences)
}

pub fn read_conllu_file(path: &Path) -> Result<Vec<ParsedSentence>, ConlluError> {
    let file = std::fs::File::open(path)?;
    read_conllu(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# newdoc id = report1
# sent_id = r1-s1
1\tWe\twe\tPRON\tPRP\t_\t2\tnsubj\t_\t_
2\timprove\timprove\tVERB\tVBP\t_\t0\troot\t_\t_
3\tworkplace\tworkplace\tNOUN\tNN\t_\t4\tcompound\t_\t_
4\tsafety\tsafety\tNOUN\tNN\t_\t2\tobj\t_\t_

# sent_id = r1-s2
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\tVBP\t_\t3\taux\t_\t_
2\tnot\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_
3\tpollute\tpollute\tVERB\tVB\t_\t0\troot\t_\t_
";

    #[test]
    fn reads_sentences_with_ids() {
        let sents = read_conllu(SAMPLE.as_bytes()).unwrap();
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].doc_id, "report1");
        assert_eq!(sents[0].sent_id, "r1-s1");
        assert_eq!(sents[0].tokens.len(), 4);
        assert_eq!(sents[0].token(4).unwrap().form, "safety");
        // multiword range line was skipped
        assert_eq!(sents[1].tokens.len(), 3);
    }

    #[test]
    fn rejects_out_of_range_head() {
        let bad = "1\tx\tx\tNOUN\tNN\t_\t9\tobj\t_\t_\n";
        assert!(matches!(
            read_conllu(bad.as_bytes()),
            Err(ConlluError::Parse { .. })
        ));
    }

    #[test]
    fn rejects_wrong_column_count() {
        let bad = "1\tx\tx\n";
        match read_conllu(bad.as_bytes()) {
            Err(ConlluError::Parse { line: 1, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_sent_id_gets_running_index() {
        let text = "1\tgrow\tgrow\tVERB\tVB\t_\t0\troot\t_\t_\n\n1\ttrees\ttree\tNOUN\tNNS\t_\t0\troot\t_\t_\n";
        let sents = read_conllu(text.as_bytes()).unwrap();
        assert_eq!(sents[0].sent_id, "s1");
        assert_eq!(sents[1].sent_id, "s2");
    }
}
