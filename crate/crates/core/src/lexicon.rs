//! Term lists and the compiled multi-pattern matcher.
//!
//! The abuse lexicon is a CSV of categorized terms (slurs, offensive words,
//! identity markers), optionally subtyped so matches can be typed as sexist,
//! racist, antisemitic, and so on. The topic lexicon is a flat (topic, term)
//! CSV. Both are compiled together into one immutable [`CompiledLexicon`]
//! whose matcher runs a single pass over a normalized token stream and
//! reports every occurrence of every term, including overlapping ones and
//! multiword phrases matched as consecutive tokens.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Role a term plays in the composition rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Abusive on its own ("idiot").
    Slur,
    /// A vulgarity that only becomes abusive in composition ("f**king").
    Offensive,
    /// A group marker that types abuse when composed ("muslim", "woman").
    Identity,
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slur" => Ok(Category::Slur),
            "offensive" => Ok(Category::Offensive),
            "identity" => Ok(Category::Identity),
            other => Err(format!("unknown category: {other}")),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Slur => "slur",
            Category::Offensive => "offensive",
            Category::Identity => "identity",
        })
    }
}

/// Identity dimension carried by identity terms and by subtyped slurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Race,
    Nationality,
    ReligionJewish,
    ReligionMuslim,
    GenderFemale,
    GenderMale,
    SexualOrientation,
    Political,
}

impl FromStr for Subtype {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "race" => Ok(Subtype::Race),
            "nationality" => Ok(Subtype::Nationality),
            "religion_jewish" => Ok(Subtype::ReligionJewish),
            "religion_muslim" => Ok(Subtype::ReligionMuslim),
            "gender_female" => Ok(Subtype::GenderFemale),
            "gender_male" => Ok(Subtype::GenderMale),
            "sexual_orientation" => Ok(Subtype::SexualOrientation),
            "political" => Ok(Subtype::Political),
            other => Err(format!("unknown subtype: {other}")),
        }
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subtype::Race => "race",
            Subtype::Nationality => "nationality",
            Subtype::ReligionJewish => "religion_jewish",
            Subtype::ReligionMuslim => "religion_muslim",
            Subtype::GenderFemale => "gender_female",
            Subtype::GenderMale => "gender_male",
            Subtype::SexualOrientation => "sexual_orientation",
            Subtype::Political => "political",
        })
    }
}

/// One row of the abuse lexicon.
///
/// `surface` is stored normalized (lowercase, single spaces, 1 to 4 tokens).
/// `plural_forms` are explicit alternate surfaces that mark a plural match;
/// the target-resolution plural rule depends on knowing whether a slur was
/// matched in plural form, so plurals are listed rather than stemmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub surface: String,
    pub category: Category,
    pub subtype: Option<Subtype>,
    pub plural_forms: Vec<String>,
}

/// Errors from lexicon loading and validation.
#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column {column}")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path} row {row}: empty surface")]
    EmptySurface { path: String, row: u64 },
    #[error("{path} row {row}: {message}")]
    BadRow {
        path: String,
        row: u64,
        message: String,
    },
    #[error("{path} row {row}: duplicate entry {surface} ({category})")]
    DuplicateEntry {
        path: String,
        row: u64,
        surface: String,
        category: Category,
    },
    #[error("{path} row {row}: duplicate topic term {topic}/{term}")]
    DuplicateTopicTerm {
        path: String,
        row: u64,
        topic: String,
        term: String,
    },
}

/// Lowercase, Unicode NFC, and strip trailing punctuation.
///
/// Internal asterisks and apostrophes survive ("F**KING" becomes "f**king",
/// "don't" stays "don't"), so censored variants match their own lexicon rows
/// and contractions stay whole. Only trailing punctuation is stripped; the
/// tokenizer never produces leading punctuation on word tokens.
pub fn normalize_token(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let composed: String = lowered.nfc().collect();
    let trimmed = composed.trim_end_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c));
    trimmed.to_string()
}

fn is_unicode_punct(c: char) -> bool {
    // Covers the common non-ASCII punctuation seen in tweets (curly quotes,
    // ellipsis, dashes) without pulling in full category tables.
    matches!(
        c,
        '\u{2018}'..='\u{201F}' | '\u{2026}' | '\u{2010}'..='\u{2015}' | '\u{00A1}' | '\u{00BF}'
    )
}

/// Split a hashtag body (no leading '#') into candidate word tokens.
///
/// Camel-case and letter/digit boundaries split directly ("StupidWoman",
/// "Brexit2019"). A tag with no such boundaries is segmented against the
/// vocabulary by fewest segments, ties broken by the longest first segment
/// (then recursively at the next position). When no full segmentation
/// exists the lowercased tag comes back as a single token. The outputs
/// always concatenate to the lowercased input, so no characters are lost.
pub fn segment_hashtag(tag: &str, vocab: &SegmentationVocab) -> Vec<String> {
    if let Some(parts) = case_digit_split(tag) {
        return parts;
    }
    let lower: String = tag.to_lowercase();
    if let Some(parts) = dictionary_split(&lower, vocab) {
        return parts;
    }
    vec![lower]
}

/// Word set used by hashtag segmentation, with the longest word length
/// cached so lookups stay bounded.
#[derive(Debug, Default, Clone)]
pub struct SegmentationVocab {
    words: HashSet<String>,
    max_chars: usize,
}

impl SegmentationVocab {
    pub fn new<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut set = HashSet::new();
        let mut max_chars = 0;
        for w in words {
            if w.is_empty() {
                continue;
            }
            max_chars = max_chars.max(w.chars().count());
            set.insert(w);
        }
        SegmentationVocab {
            words: set,
            max_chars,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Split on case and digit boundaries. Returns None when the tag has no
/// boundary at all, which routes it to dictionary segmentation instead.
fn case_digit_split(tag: &str) -> Option<Vec<String>> {
    let chars: Vec<char> = tag.chars().collect();
    if chars.len() < 2 {
        return None;
    }
    let mut cuts = Vec::new();
    for i in 1..chars.len() {
        let prev = chars[i - 1];
        let cur = chars[i];
        let boundary = (prev.is_lowercase() && cur.is_uppercase())
            // An uppercase run followed by a lowercase letter breaks before
            // its last capital: "BBCNews" -> "BBC" + "News".
            || (prev.is_uppercase()
                && cur.is_uppercase()
                && chars.get(i + 1).is_some_and(|n| n.is_lowercase()))
            || (prev.is_alphabetic() && cur.is_numeric())
            || (prev.is_numeric() && cur.is_alphabetic())
            // Underscores stick to the preceding segment so characters are
            // preserved; normalization strips them later.
            || prev == '_';
        if boundary {
            cuts.push(i);
        }
    }
    if cuts.is_empty() {
        return None;
    }
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut begin = 0;
    for cut in cuts.into_iter().chain(std::iter::once(chars.len())) {
        let part: String = chars[begin..cut].iter().collect::<String>().to_lowercase();
        if !part.is_empty() {
            parts.push(part);
        }
        begin = cut;
    }
    Some(parts)
}

/// Fewest-segments dictionary split, ties by longest first segment.
fn dictionary_split(lower: &str, vocab: &SegmentationVocab) -> Option<Vec<String>> {
    let char_starts: Vec<usize> = lower
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(lower.len()))
        .collect();
    let n = char_starts.len() - 1; // number of chars
    if n == 0 {
        return None;
    }
    // min_segs[i] = fewest vocabulary words covering chars i..n
    let mut min_segs: Vec<Option<u32>> = vec![None; n + 1];
    min_segs[n] = Some(0);
    for i in (0..n).rev() {
        let longest = vocab.max_chars.min(n - i);
        let mut best: Option<u32> = None;
        for len in 1..=longest {
            let piece = &lower[char_starts[i]..char_starts[i + len]];
            if vocab.contains(piece) {
                if let Some(rest) = min_segs[i + len] {
                    let total = rest + 1;
                    if best.is_none_or(|b| total < b) {
                        best = Some(total);
                    }
                }
            }
        }
        min_segs[i] = best;
    }
    min_segs[0]?;
    // Walk forward, preferring the longest word that still achieves the
    // minimum; this realizes the longest-first-segment tie-break at every
    // position in turn.
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let here = min_segs[i].expect("reachable position");
        let longest = vocab.max_chars.min(n - i);
        let mut chosen = None;
        for len in (1..=longest).rev() {
            let piece = &lower[char_starts[i]..char_starts[i + len]];
            if vocab.contains(piece) && min_segs[i + len] == Some(here - 1) {
                chosen = Some(len);
                break;
            }
        }
        let len = chosen.expect("consistent dp table");
        out.push(lower[char_starts[i]..char_starts[i + len]].to_string());
        i += len;
    }
    Some(out)
}

/// What a compiled pattern stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PatternPayload {
    Abuse { entry: usize, plural: bool },
    Topic { topic: usize },
}

/// One pattern occurrence in a token stream, in token coordinates
/// (half-open `start..end`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PatternHit {
    pub start: usize,
    pub end: usize,
    pub pattern: usize,
}

/// Immutable compiled form of both lexica.
///
/// Matching is deterministic and independent of the order entries were
/// loaded in: patterns are sorted before the automaton is built, and every
/// overlapping occurrence is reported.
pub struct CompiledLexicon {
    entries: Vec<LexiconEntry>,
    topic_names: Vec<String>,
    topic_terms: BTreeMap<String, Vec<String>>,
    automaton: AhoCorasick,
    pattern_strings: Vec<String>,
    payloads: Vec<PatternPayload>,
    seg_vocab: SegmentationVocab,
}

impl fmt::Debug for CompiledLexicon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompiledLexicon")
            .field("entries", &self.entries.len())
            .field("topics", &self.topic_names.len())
            .field("patterns", &self.payloads.len())
            .finish()
    }
}

/// Byte that stands in for tokens excluded from matching (mentions, URLs).
/// Surfaces are validated to contain only printable word characters, so the
/// placeholder can never occur inside a pattern.
const OPAQUE: &str = "\u{1}";

impl CompiledLexicon {
    /// Build the matcher from validated entries and the topic map.
    pub fn compile(
        entries: Vec<LexiconEntry>,
        topic_terms: BTreeMap<String, Vec<String>>,
    ) -> CompiledLexicon {
        let mut entries = entries;
        entries.sort_by(|a, b| {
            (&a.surface, a.category, a.subtype).cmp(&(&b.surface, b.category, b.subtype))
        });

        let mut pattern_strings = Vec::new();
        let mut payloads = Vec::new();
        for (idx, e) in entries.iter().enumerate() {
            pattern_strings.push(e.surface.clone());
            payloads.push(PatternPayload::Abuse {
                entry: idx,
                plural: false,
            });
            let mut plurals: Vec<&String> = e.plural_forms.iter().collect();
            plurals.sort();
            for p in plurals {
                pattern_strings.push(p.clone());
                payloads.push(PatternPayload::Abuse {
                    entry: idx,
                    plural: true,
                });
            }
        }
        let topic_names: Vec<String> = topic_terms.keys().cloned().collect();
        for (topic_idx, name) in topic_names.iter().enumerate() {
            let mut terms: Vec<&String> = topic_terms[name].iter().collect();
            terms.sort();
            for t in terms {
                pattern_strings.push(t.clone());
                payloads.push(PatternPayload::Topic { topic: topic_idx });
            }
        }

        let automaton = AhoCorasick::builder()
            .match_kind(MatchKind::Standard)
            .build(&pattern_strings)
            .expect("lexicon patterns are valid");

        let seg_vocab = SegmentationVocab::new(
            pattern_strings
                .iter()
                .flat_map(|p| p.split(' '))
                .map(str::to_string),
        );

        CompiledLexicon {
            entries,
            topic_names,
            topic_terms,
            automaton,
            pattern_strings,
            payloads,
            seg_vocab,
        }
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn topic_terms(&self) -> &BTreeMap<String, Vec<String>> {
        &self.topic_terms
    }

    pub fn topic_name(&self, idx: usize) -> &str {
        &self.topic_names[idx]
    }

    pub fn segmentation_vocab(&self) -> &SegmentationVocab {
        &self.seg_vocab
    }

    /// Segment a hashtag body against the combined lexicon vocabulary.
    pub fn segment_hashtag(&self, tag: &str) -> Vec<String> {
        segment_hashtag(tag, &self.seg_vocab)
    }

    pub(crate) fn payload(&self, pattern: usize) -> &PatternPayload {
        &self.payloads[pattern]
    }

    pub(crate) fn pattern_string(&self, pattern: usize) -> &str {
        &self.pattern_strings[pattern]
    }

    /// Run the automaton over one token stream. `keys[i]` is the normalized
    /// form of token i, or None for tokens excluded from matching. Every
    /// overlapping occurrence of every pattern is returned, sorted by
    /// (start, end, pattern).
    pub(crate) fn token_matches(&self, keys: &[Option<&str>]) -> Vec<PatternHit> {
        if keys.is_empty() {
            return Vec::new();
        }
        // Join tokens with single spaces; matches must start and end on
        // token boundaries. A byte-offset table maps hits back to indices.
        let mut haystack = String::new();
        let mut starts = Vec::with_capacity(keys.len());
        for (i, key) in keys.iter().enumerate() {
            if i > 0 {
                haystack.push(' ');
            }
            starts.push(haystack.len());
            haystack.push_str(key.unwrap_or(OPAQUE));
        }
        let bytes = haystack.as_bytes();
        let mut hits = Vec::new();
        for m in self.automaton.find_overlapping_iter(&haystack) {
            let begin_ok = m.start() == 0 || bytes[m.start() - 1] == b' ';
            let end_ok = m.end() == bytes.len() || bytes[m.end()] == b' ';
            if !begin_ok || !end_ok {
                continue;
            }
            let start_tok = match starts.binary_search(&m.start()) {
                Ok(i) => i,
                Err(_) => continue, // starts mid-token; boundary check already filtered
            };
            let token_len = self.pattern_strings[m.pattern().as_usize()]
                .split(' ')
                .count();
            hits.push(PatternHit {
                start: start_tok,
                end: start_tok + token_len,
                pattern: m.pattern().as_usize(),
            });
        }
        hits.sort_by_key(|h| (h.start, h.end, h.pattern));
        hits
    }
}

/// Load and validate both lexica.
///
/// Abuse CSV header: `surface,category,subtype,plural_forms` with plural
/// forms separated by `;`. Topic CSV header: `topic,term`. Duplicate
/// (surface, category) pairs and duplicate (topic, term) pairs are errors,
/// as are unknown enum values, empty surfaces, and subtype placement that
/// breaks the category rules (identity terms must carry a subtype,
/// offensive words must not; slurs may carry one, which is how "zio" types
/// antisemitic and "libtard" types political).
pub fn load_lexicon(
    abuse_path: &Path,
    topic_path: &Path,
) -> Result<(Vec<LexiconEntry>, BTreeMap<String, Vec<String>>), LexiconError> {
    let entries = load_abuse_terms(abuse_path)?;
    let topics = load_topic_terms(topic_path)?;
    Ok((entries, topics))
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, LexiconError> {
    let file = std::fs::File::open(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_index(
    headers: &csv::StringRecord,
    name: &'static str,
    path: &Path,
) -> Result<usize, LexiconError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or(LexiconError::MissingColumn {
            path: path.display().to_string(),
            column: name,
        })
}

/// Check that a surface is already in matcher-ready form: normalized
/// tokens joined by single spaces, 1 to 4 tokens.
fn validate_surface(surface: &str, path: &Path, row: u64) -> Result<(), LexiconError> {
    let p = || path.display().to_string();
    if surface.is_empty() {
        return Err(LexiconError::EmptySurface { path: p(), row });
    }
    let words: Vec<&str> = surface.split(' ').collect();
    if words.len() > 4 {
        return Err(LexiconError::BadRow {
            path: p(),
            row,
            message: format!("surface {surface:?} has more than 4 tokens"),
        });
    }
    for w in &words {
        if w.is_empty() {
            return Err(LexiconError::BadRow {
                path: p(),
                row,
                message: format!("surface {surface:?} has doubled or edge spaces"),
            });
        }
        if normalize_token(w) != *w || w.contains(char::is_whitespace) || w.contains('\u{1}') {
            return Err(LexiconError::BadRow {
                path: p(),
                row,
                message: format!("surface word {w:?} is not in normalized form"),
            });
        }
    }
    Ok(())
}

pub fn load_abuse_terms(path: &Path) -> Result<Vec<LexiconEntry>, LexiconError> {
    let mut reader = open_csv(path)?;
    let headers = reader
        .headers()
        .map_err(|source| LexiconError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let surface_col = header_index(&headers, "surface", path)?;
    let category_col = header_index(&headers, "category", path)?;
    let subtype_col = header_index(&headers, "subtype", path)?;
    let plurals_col = header_index(&headers, "plural_forms", path)?;

    let mut seen: BTreeSet<(String, Category)> = BTreeSet::new();
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2; // header is row 1
        let record = record.map_err(|source| LexiconError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let surface = record.get(surface_col).unwrap_or("").to_string();
        validate_surface(&surface, path, row)?;

        let category: Category = record
            .get(category_col)
            .unwrap_or("")
            .parse()
            .map_err(|message| LexiconError::BadRow {
                path: path.display().to_string(),
                row,
                message,
            })?;
        let subtype_raw = record.get(subtype_col).unwrap_or("");
        let subtype: Option<Subtype> = if subtype_raw.is_empty() {
            None
        } else {
            Some(
                subtype_raw
                    .parse()
                    .map_err(|message| LexiconError::BadRow {
                        path: path.display().to_string(),
                        row,
                        message,
                    })?,
            )
        };
        match (category, subtype) {
            (Category::Identity, None) => {
                return Err(LexiconError::BadRow {
                    path: path.display().to_string(),
                    row,
                    message: format!("identity term {surface:?} requires a subtype"),
                });
            }
            (Category::Offensive, Some(_)) => {
                return Err(LexiconError::BadRow {
                    path: path.display().to_string(),
                    row,
                    message: format!("offensive word {surface:?} must not carry a subtype"),
                });
            }
            _ => {}
        }

        let plurals_raw = record.get(plurals_col).unwrap_or("");
        let mut plural_forms = Vec::new();
        for p in plurals_raw.split(';').filter(|p| !p.is_empty()) {
            validate_surface(p, path, row)?;
            plural_forms.push(p.to_string());
        }

        if !seen.insert((surface.clone(), category)) {
            return Err(LexiconError::DuplicateEntry {
                path: path.display().to_string(),
                row,
                surface,
                category,
            });
        }
        entries.push(LexiconEntry {
            surface,
            category,
            subtype,
            plural_forms,
        });
    }
    Ok(entries)
}

pub fn load_topic_terms(path: &Path) -> Result<BTreeMap<String, Vec<String>>, LexiconError> {
    let mut reader = open_csv(path)?;
    let headers = reader
        .headers()
        .map_err(|source| LexiconError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let topic_col = header_index(&headers, "topic", path)?;
    let term_col = header_index(&headers, "term", path)?;

    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2;
        let record = record.map_err(|source| LexiconError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let topic = record.get(topic_col).unwrap_or("").to_string();
        let term = record.get(term_col).unwrap_or("").to_string();
        if topic.is_empty() {
            return Err(LexiconError::BadRow {
                path: path.display().to_string(),
                row,
                message: "empty topic".into(),
            });
        }
        validate_surface(&term, path, row)?;
        let terms = out.entry(topic.clone()).or_default();
        if terms.contains(&term) {
            return Err(LexiconError::DuplicateTopicTerm {
                path: path.display().to_string(),
                row,
                topic,
                term,
            });
        }
        terms.push(term);
    }
    Ok(out)
}
