//! Frequency ranking of extracted concepts.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::kb::Concept;

/// Counts occurrences and keeps the `k` most frequent concepts. Sorted by
/// frequency descending; ties break lexicographically ascending. Order of
/// the input stream never affects the result.
pub fn count_and_filter<I>(concepts: I, k: usize) -> Vec<(Concept, usize)>
where
    I: IntoIterator<Item = Concept>,
{
    let mut counts: HashMap<Concept, usize> = HashMap::new();
    for c in concepts {
        *counts.entry(c).or_insert(0) += 1;
    }
    let mut ranked: Vec<(Concept, usize)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|(ca, na), (cb, nb)| nb.cmp(na).then_with(|| ca.cmp(cb)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, thiserror::Error)]
pub enum RankedFileError {
    #[error("failed to access ranked concept file: {0}")]
    Io(#[from] std::io::Error),
    #[error("ranked concept file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Writes `concept \t frequency` lines in rank order.
pub fn write_ranked(path: &Path, ranked: &[(Concept, usize)]) -> Result<(), RankedFileError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (concept, freq) in ranked {
        writeln!(out, "{concept}\t{freq}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ranked(path: &Path) -> Result<Vec<(Concept, usize)>, RankedFileError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let n = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (concept_text, freq_text) =
            trimmed.rsplit_once('\t').ok_or(RankedFileError::Parse {
                line: n,
                msg: "expected `concept \\t frequency`".into(),
            })?;
        let concept = Concept::new(concept_text).map_err(|e| RankedFileError::Parse {
            line: n,
            msg: e.to_string(),
        })?;
        let freq: usize = freq_text
            .trim()
            .parse()
            .map_err(|_| RankedFileError::Parse {
                line: n,
                msg: format!("bad frequency `{freq_text}`"),
            })?;
        out.push((concept, freq));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(text: &str) -> Concept {
        Concept::new(text).unwrap()
    }

    #[test]
    fn top_one_of_two() {
        let stream = vec![
            c("plant tree"),
            c("plant tree"),
            c("plant tree"),
            c("cut tree"),
        ];
        assert_eq!(count_and_filter(stream, 1), vec![(c("plant tree"), 3)]);
    }

    #[test]
    fn tie_breaks_lexicographically() {
        let stream = vec![
            c("boost growth"),
            c("audit risk"),
            c("boost growth"),
            c("audit risk"),
        ];
        assert_eq!(count_and_filter(stream, 1), vec![(c("audit risk"), 2)]);
    }

    #[test]
    fn k_beyond_population_keeps_everything() {
        let stream: Vec<Concept> = ["a b", "c d", "e f", "g h", "i j"]
            .iter()
            .map(|t| c(t))
            .collect();
        assert_eq!(count_and_filter(stream, 110_000).len(), 5);
    }

    #[test]
    fn empty_stream_yields_empty_list() {
        assert!(count_and_filter(Vec::<Concept>::new(), 10).is_empty());
    }

    #[test]
    fn input_order_is_irrelevant() {
        let mut stream = vec![
            c("plant tree"),
            c("cut tree"),
            c("plant tree"),
            c("audit risk"),
            c("cut tree"),
        ];
        let a = count_and_filter(stream.clone(), 2);
        stream.reverse();
        let b = count_and_filter(stream, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn ranked_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ranked.tsv");
        let ranked = vec![(c("plant tree"), 7), (c("audit risk"), 2)];
        write_ranked(&path, &ranked).unwrap();
        assert_eq!(read_ranked(&path).unwrap(), ranked);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn concept_stream() -> impl Strategy<Value = Vec<Concept>> {
            // small vocabulary so duplicates occur
            let word = prop::sample::select(vec!["cut", "plant", "tree", "risk", "audit", "waste"]);
            let concept = (word.clone(), word).prop_map(|(a, b)| c(&format!("{a} {b}")));
            prop::collection::vec(concept, 0..60)
        }

        proptest! {
            #[test]
            fn permutation_invariant(stream in concept_stream(), k in 1usize..20, seed in 0u64..1000) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = stream.clone();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                shuffled.shuffle(&mut rng);
                prop_assert_eq!(count_and_filter(stream, k), count_and_filter(shuffled, k));
            }

            #[test]
            fn sorted_and_truncated(stream in concept_stream(), k in 1usize..20) {
                let distinct = stream.iter().collect::<std::collections::HashSet<_>>().len();
                let ranked = count_and_filter(stream.clone(), k);
                prop_assert_eq!(ranked.len(), k.min(distinct));
                for w in ranked.windows(2) {
                    let ((ca, na), (cb, nb)) = (&w[0], &w[1]);
                    prop_assert!(na > nb || (na == nb && ca < cb));
                }
                let total: usize = ranked.iter().map(|(_, n)| n).sum();
                prop_assert!(total <= stream.len());
                for (concept, n) in &ranked {
                    let exact = stream.iter().filter(|x| x == &concept).count();
                    prop_assert_eq!(*n, exact);
                }
            }
        }
    }
}
