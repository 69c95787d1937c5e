//! Hierarchical topic taxonomy: three pillars plus broad, sub, cross-broad
//! and cross-sub topics. Loaded from a TSV file or from the built-in table.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const BUILTIN_TSV: &str = include_str!("../../assets/taxonomy.tsv");

/// Level of a topic in the hierarchy.
///
/// `Broad` and `Sub` cover strategic business activities; `CrossBroad` and
/// `CrossSub` cover direct sustainability impacts and exist only under the
/// Environmental pillar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopicType {
    Pillar,
    Broad,
    Sub,
    CrossBroad,
    CrossSub,
}

impl TopicType {
    pub const ALL: [TopicType; 5] = [
        TopicType::Pillar,
        TopicType::Broad,
        TopicType::Sub,
        TopicType::CrossBroad,
        TopicType::CrossSub,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopicType::Pillar => "pillar",
            TopicType::Broad => "broad",
            TopicType::Sub => "sub",
            TopicType::CrossBroad => "cross-broad",
            TopicType::CrossSub => "cross-sub",
        }
    }

    /// Topic types that label concepts (everything except the pillar level).
    pub fn label_levels() -> [TopicType; 4] {
        [
            TopicType::Broad,
            TopicType::Sub,
            TopicType::CrossBroad,
            TopicType::CrossSub,
        ]
    }
}

impl fmt::Display for TopicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopicType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "pillar" => Ok(TopicType::Pillar),
            "broad" => Ok(TopicType::Broad),
            "sub" => Ok(TopicType::Sub),
            "cross-broad" => Ok(TopicType::CrossBroad),
            "cross-sub" => Ok(TopicType::CrossSub),
            other => Err(format!("unknown topic type `{other}`")),
        }
    }
}

/// One of the three top-level pillars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pillar {
    Environmental,
    Social,
    Governance,
}

impl Pillar {
    pub const ALL: [Pillar; 3] = [Pillar::Environmental, Pillar::Social, Pillar::Governance];

    pub fn as_str(self) -> &'static str {
        match self {
            Pillar::Environmental => "Environmental",
            Pillar::Social => "Social",
            Pillar::Governance => "Governance",
        }
    }
}

impl fmt::Display for Pillar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pillar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "environmental" | "e" => Ok(Pillar::Environmental),
            "social" | "s" => Ok(Pillar::Social),
            "governance" | "g" => Ok(Pillar::Governance),
            other => Err(format!("unknown pillar `{other}`")),
        }
    }
}

/// A single taxonomy entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub name: String,
    pub topic_type: TopicType,
    /// Canonical name of the parent topic; `None` for pillars and for broad
    /// topics that sit under several pillars at once.
    pub parent: Option<String>,
    /// Pillars this topic can appear under. A single pillar for everything
    /// except multi-pillar broad topics.
    pub pillar_scope: Vec<Pillar>,
}

impl Topic {
    pub fn in_pillar_scope(&self, pillar: Pillar) -> bool {
        self.pillar_scope.contains(&pillar)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("failed to read taxonomy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("taxonomy line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("taxonomy line {line}: duplicate topic `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("topic `{name}` references unknown parent `{parent}`")]
    DanglingParent { name: String, parent: String },
    #[error(
        "topic `{name}` of type {topic_type} has parent of type {parent_type}, expected {expected}"
    )]
    ParentType {
        name: String,
        topic_type: TopicType,
        parent_type: TopicType,
        expected: TopicType,
    },
    #[error("taxonomy file contains no topics")]
    Empty,
}

/// The full topic hierarchy. Topic order follows the source file and is used
/// wherever output is reported "in taxonomy order".
#[derive(Debug, Clone)]
pub struct Taxonomy {
    topics: Vec<Topic>,
    // lowercase name -> index into `topics`
    index: HashMap<String, usize>,
}

impl Taxonomy {
    /// The taxonomy shipped with the library: 3 pillars, 7 broad, 22 sub,
    /// 4 cross-broad and 7 cross-sub topics.
    pub fn builtin() -> Taxonomy {
        Taxonomy::parse_str(BUILTIN_TSV).expect("built-in taxonomy must parse")
    }

    pub fn load(path: &Path) -> Result<Taxonomy, TaxonomyError> {
        let text = std::fs::read_to_string(path)?;
        Taxonomy::parse_str(&text)
    }

    /// Parses the 4-column TSV format: `name, topic_type, parent, pillar_scope`.
    /// `parent` is `-` when absent; `pillar_scope` is a comma-separated pillar
    /// list. Lines starting with `#` and blank lines are skipped.
    pub fn parse_str(text: &str) -> Result<Taxonomy, TaxonomyError> {
        let mut topics: Vec<Topic> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(TaxonomyError::Parse {
                    line,
                    msg: format!("expected 4 tab-separated columns, found {}", cols.len()),
                });
            }
            let name = cols[0].to_string();
            if name.is_empty() {
                return Err(TaxonomyError::Parse {
                    line,
                    msg: "empty topic name".into(),
                });
            }
            let topic_type: TopicType = cols[1]
                .parse()
                .map_err(|msg| TaxonomyError::Parse { line, msg })?;
            let parent = match cols[2] {
                "-" | "" => None,
                p => Some(p.to_string()),
            };
            let mut pillar_scope = Vec::new();
            for part in cols[3].split(',') {
                let pillar: Pillar = part
                    .parse()
                    .map_err(|msg| TaxonomyError::Parse { line, msg })?;
                if !pillar_scope.contains(&pillar) {
                    pillar_scope.push(pillar);
                }
            }
            if pillar_scope.is_empty() {
                return Err(TaxonomyError::Parse {
                    line,
                    msg: "empty pillar scope".into(),
                });
            }

            let key = name.to_lowercase();
            if index.contains_key(&key) {
                return Err(TaxonomyError::Duplicate { line, name });
            }
            index.insert(key, topics.len());
            topics.push(Topic {
                name,
                topic_type,
                parent,
                pillar_scope,
            });
        }

        if topics.is_empty() {
            return Err(TaxonomyError::Empty);
        }

        let tax = Taxonomy { topics, index };
        tax.check_parents()?;
        Ok(tax)
    }

    // Every stated parent must exist and sit one level up: sub under broad,
    // cross-sub under cross-broad, broad/cross-broad under a pillar.
    fn check_parents(&self) -> Result<(), TaxonomyError> {
        for topic in &self.topics {
            let Some(parent_name) = &topic.parent else {
                continue;
            };
            let Some(parent) = self.get(parent_name) else {
                return Err(TaxonomyError::DanglingParent {
                    name: topic.name.clone(),
                    parent: parent_name.clone(),
                });
            };
            let expected = match topic.topic_type {
                TopicType::Pillar => {
                    return Err(TaxonomyError::Parse {
                        line: 0,
                        msg: format!("pillar `{}` must not have a parent", topic.name),
                    });
                }
                TopicType::Broad | TopicType::CrossBroad => TopicType::Pillar,
                TopicType::Sub => TopicType::Broad,
                TopicType::CrossSub => TopicType::CrossBroad,
            };
            if parent.topic_type != expected {
                return Err(TaxonomyError::ParentType {
                    name: topic.name.clone(),
                    topic_type: topic.topic_type,
                    parent_type: parent.topic_type,
                    expected,
                });
            }
        }
        Ok(())
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<&Topic> {
        self.index
            .get(&name.trim().to_lowercase())
            .map(|&i| &self.topics[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Canonical casing for a (possibly differently-cased) topic name.
    pub fn canonical_name(&self, name: &str) -> Option<&str> {
        self.get(name).map(|t| t.name.as_str())
    }

    /// All topics in file order.
    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn topics_of_type(&self, tt: TopicType) -> impl Iterator<Item = &Topic> {
        self.topics.iter().filter(move |t| t.topic_type == tt)
    }

    /// Direct children of `name`, in file order.
    pub fn children_of(&self, name: &str) -> Vec<&Topic> {
        let Some(canon) = self.canonical_name(name) else {
            return Vec::new();
        };
        self.topics
            .iter()
            .filter(|t| t.parent.as_deref() == Some(canon))
            .collect()
    }

    /// Broad topics available under `pillar` (multi-pillar topics included).
    pub fn broad_topics_for(&self, pillar: Pillar) -> Vec<&Topic> {
        self.topics_of_type(TopicType::Broad)
            .filter(|t| t.in_pillar_scope(pillar))
            .collect()
    }

    /// Cross-broad topics, all Environmental by construction.
    pub fn cross_broad_topics(&self) -> Vec<&Topic> {
        self.topics_of_type(TopicType::CrossBroad).collect()
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}
