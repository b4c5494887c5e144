//! Tweet tokenization and the compositional abuse classifier.
//!
//! A tweet is classified in three steps. Tokenization turns the text into a
//! normalized token stream, expanding hashtags in place and marking mentions
//! and URLs as opaque. Span detection finds maximal clusters of lexicon
//! terms and keeps the clusters the composition rules call abusive. Target
//! resolution then decides who each abusive span is aimed at, which is what
//! separates abuse directed at the reply's recipient from abuse about third
//! parties and from generic venting that names nobody.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexicon::{Category, CompiledLexicon, PatternPayload, Subtype, normalize_token};

/// Where a token came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Mention,
    Url,
    /// Produced by expanding `#tag`; keeps the original tag for provenance.
    Hashtag { tag: String },
}

/// One unit of the token stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Normalized form used for matching; empty for tokens that normalize
    /// away entirely (such as a bare run of asterisks).
    pub norm: String,
    /// Original surface as written, before normalization.
    pub raw: String,
    pub kind: TokenKind,
    /// Zero-based sentence index; terminal punctuation (. ! ?) advances it.
    pub sentence: usize,
}

/// Abuse categories a span can be typed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbuseType {
    Sexist,
    Racist,
    Antisemitic,
    Islamophobic,
    Homophobic,
    Political,
    Untyped,
}

impl fmt::Display for AbuseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbuseType::Sexist => "sexist",
            AbuseType::Racist => "racist",
            AbuseType::Antisemitic => "antisemitic",
            AbuseType::Islamophobic => "islamophobic",
            AbuseType::Homophobic => "homophobic",
            AbuseType::Political => "political",
            AbuseType::Untyped => "untyped",
        })
    }
}

/// Map an identity dimension onto the abuse type it signals.
pub fn subtype_abuse_type(subtype: Subtype) -> AbuseType {
    match subtype {
        Subtype::GenderFemale | Subtype::GenderMale => AbuseType::Sexist,
        Subtype::Race | Subtype::Nationality => AbuseType::Racist,
        Subtype::ReligionJewish => AbuseType::Antisemitic,
        Subtype::ReligionMuslim => AbuseType::Islamophobic,
        Subtype::SexualOrientation => AbuseType::Homophobic,
        Subtype::Political => AbuseType::Political,
    }
}

/// One lexicon term occurrence inside an abusive span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedTerm {
    /// Index into the compiled lexicon's entry table.
    pub entry: usize,
    pub category: Category,
    /// Token span, half-open.
    pub start: usize,
    pub end: usize,
    /// True when the occurrence matched one of the entry's plural forms.
    pub plural: bool,
}

/// A maximal cluster of lexicon terms that the composition rules accept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbuseMatch {
    /// Token span of the whole cluster, half-open.
    pub start: usize,
    pub end: usize,
    pub terms: Vec<MatchedTerm>,
    /// Number of matched terms in the cluster, a proxy for severity.
    pub component_count: usize,
    pub types: BTreeSet<AbuseType>,
}

/// Who an abusive reply is aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// The politician being replied to.
    Recipient,
    /// Somebody else named or referenced in the same sentence.
    ThirdParty,
    /// No referent found, but the abuse still counts (singular insults).
    UntargetedCounted,
    /// Excluded from abuse counts: either nothing matched, or every slur
    /// was plural with no referent (group venting, not personal abuse).
    NotCounted,
}

impl Target {
    /// Combination precedence across a tweet's matches: a recipient hit
    /// dominates, then counted-but-untargeted, then third party.
    fn precedence(self) -> u8 {
        match self {
            Target::Recipient => 0,
            Target::UntargetedCounted => 1,
            Target::ThirdParty => 2,
            Target::NotCounted => 3,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Recipient => "recipient",
            Target::ThirdParty => "third_party",
            Target::UntargetedCounted => "untargeted_counted",
            Target::NotCounted => "not_counted",
        })
    }
}

/// Full classification of one tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub abusive: bool,
    pub matches: Vec<AbuseMatch>,
    pub target: Target,
    /// Largest component count across matches, 0 when nothing matched.
    pub max_components: usize,
}

impl Classification {
    /// Union of types across all matches; empty when nothing matched.
    pub fn types(&self) -> BTreeSet<AbuseType> {
        self.matches.iter().flat_map(|m| m.types.clone()).collect()
    }

    /// Whether this reply counts as abuse aimed at the recipient, the
    /// notion daily abuse series are built from.
    pub fn counts_toward_recipient(&self) -> bool {
        self.abusive && matches!(self.target, Target::Recipient | Target::UntargetedCounted)
    }
}

/// Split a tweet into tokens.
///
/// Words are runs of alphanumerics plus word-internal apostrophes and
/// asterisks; all other punctuation separates. `@mentions` and URLs become
/// single opaque tokens that never match the lexicon but still occupy a
/// position (so they widen term clusters as gap tokens). `#hashtags` are
/// expanded through the lexicon's segmenter, each segment becoming its own
/// token tagged with the originating tag. Terminal punctuation advances the
/// sentence index once per run, so "No!!!" ends one sentence, not three.
pub fn tokenize(text: &str, lex: &CompiledLexicon) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentence = 0usize;
    let mut sentence_break = false;
    let mut i = 0usize;

    fn push(
        tokens: &mut Vec<Token>,
        raw: String,
        norm: String,
        kind: TokenKind,
        sentence: &mut usize,
        brk: &mut bool,
    ) {
        if *brk {
            // Only advance if something precedes the break; a leading "!" is
            // decoration, not an empty first sentence.
            *sentence += 1;
            *brk = false;
        }
        tokens.push(Token {
            norm,
            raw,
            kind,
            sentence: *sentence,
        });
    }

    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            if !tokens.is_empty() {
                sentence_break = true;
            }
            i += 1;
            continue;
        }
        if c == '@' && chars.get(i + 1).is_some_and(|n| is_word_char(*n)) {
            let start = i;
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            let norm = raw.to_lowercase();
            push(&mut tokens, raw, norm, TokenKind::Mention, &mut sentence, &mut sentence_break);
            continue;
        }
        if c == '#' && chars.get(i + 1).is_some_and(|n| is_word_char(*n)) {
            let start = i + 1;
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            let tag: String = chars[start..i].iter().collect();
            for seg in lex.segment_hashtag(&tag) {
                let norm = normalize_token(&seg);
                if norm.is_empty() {
                    continue;
                }
                push(
                    &mut tokens,
                    seg,
                    norm,
                    TokenKind::Hashtag { tag: tag.clone() },
                    &mut sentence,
                    &mut sentence_break,
                );
            }
            continue;
        }
        if starts_url(&chars[i..]) {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            push(&mut tokens, raw.clone(), raw.to_lowercase(), TokenKind::Url, &mut sentence, &mut sentence_break);
            continue;
        }
        if is_token_char(c) {
            let start = i;
            while i < chars.len() && is_token_char(chars[i]) {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            let norm = normalize_token(&raw);
            push(&mut tokens, raw, norm, TokenKind::Word, &mut sentence, &mut sentence_break);
            continue;
        }
        i += 1; // separator
    }
    tokens
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}' || c == '*'
}

fn starts_url(rest: &[char]) -> bool {
    let prefix: String = rest.iter().take(8).collect::<String>().to_lowercase();
    prefix.starts_with("http://") || prefix.starts_with("https://") || prefix.starts_with("www.")
}

/// Matching key per token: the normalized form for words and hashtag
/// segments, None for mentions, URLs, and tokens that normalized away.
fn matching_keys(tokens: &[Token]) -> Vec<Option<&str>> {
    tokens
        .iter()
        .map(|t| match t.kind {
            TokenKind::Word | TokenKind::Hashtag { .. } if !t.norm.is_empty() => {
                Some(t.norm.as_str())
            }
            _ => None,
        })
        .collect()
}

/// Find abusive spans in a token stream.
///
/// Matched terms are clustered into windows: a term joins the current
/// window when at most one non-matched token separates it from the window's
/// end. Each window is kept when it satisfies one of the composition rules:
///
/// 1. it contains a slur;
/// 2. it contains an offensive word and an identity term; or
/// 3. it contains at least two offensive words.
///
/// A lone offensive word ("f**king" as an intensifier) or a lone identity
/// term ("muslim" in ordinary speech) is not abuse. Windows may cross
/// sentence boundaries; only targeting is sentence-scoped.
pub fn find_abuse_spans(tokens: &[Token], lex: &CompiledLexicon) -> Vec<AbuseMatch> {
    let keys = matching_keys(tokens);
    let mut hits: Vec<MatchedTerm> = lex
        .token_matches(&keys)
        .into_iter()
        .filter_map(|h| match *lex.payload(h.pattern) {
            PatternPayload::Abuse { entry, plural } => Some(MatchedTerm {
                entry,
                category: lex.entries()[entry].category,
                start: h.start,
                end: h.end,
                plural,
            }),
            PatternPayload::Topic { .. } => None,
        })
        .collect();
    hits.sort_by_key(|h| (h.start, h.end, h.entry));

    let mut windows: Vec<Vec<MatchedTerm>> = Vec::new();
    for hit in hits {
        match windows.last_mut() {
            Some(win) => {
                let win_end = win.iter().map(|h| h.end).max().expect("non-empty window");
                if hit.start <= win_end + 1 {
                    win.push(hit);
                } else {
                    windows.push(vec![hit]);
                }
            }
            None => windows.push(vec![hit]),
        }
    }

    windows
        .into_iter()
        .filter_map(|terms| build_match(terms, lex))
        .collect()
}

fn build_match(terms: Vec<MatchedTerm>, lex: &CompiledLexicon) -> Option<AbuseMatch> {
    let mut slurs = 0usize;
    let mut offensive = 0usize;
    let mut identity = 0usize;
    for t in &terms {
        match t.category {
            Category::Slur => slurs += 1,
            Category::Offensive => offensive += 1,
            Category::Identity => identity += 1,
        }
    }
    let abusive = slurs >= 1 || (offensive >= 1 && identity >= 1) || offensive >= 2;
    if !abusive {
        return None;
    }
    let start = terms.iter().map(|t| t.start).min().expect("non-empty");
    let end = terms.iter().map(|t| t.end).max().expect("non-empty");
    let mut types: BTreeSet<AbuseType> = terms
        .iter()
        .filter_map(|t| lex.entries()[t.entry].subtype)
        .map(subtype_abuse_type)
        .collect();
    if types.is_empty() {
        types.insert(AbuseType::Untyped);
    }
    let component_count = terms.len();
    Some(AbuseMatch {
        start,
        end,
        terms,
        component_count,
        types,
    })
}

const SECOND_PERSON: &[&str] = &[
    "you", "your", "yours", "yourself", "yourselves", "u", "ur", "you're", "youre",
];

const THIRD_PERSON: &[&str] = &[
    "he", "him", "his", "she", "her", "hers", "himself", "herself", "they", "them", "their",
    "theirs", "themselves",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CueKind {
    Second,
    Third,
}

/// Decide who the matched abuse is aimed at.
///
/// Cues are second-person pronouns (recipient) and third-person pronouns or
/// mid-sentence capitalized names (third party), considered only in the
/// sentences the span touches. The nearest cue to the span wins, measuring
/// token distance to the span edge (zero inside it); a distance tie goes to
/// the recipient. Names only count as cues within two tokens of the span,
/// pronouns at any same-sentence range. Mentions are never cues: replies
/// quote `@handles` far too freely for them to signal the target.
///
/// With no cue at all, the plural rule applies: if the span's slurs were
/// all matched in plural form ("idiots"), the tweet is venting at a group
/// and is not counted; any singular slur or any composed abuse without a
/// slur ("stupid woman") still counts as untargeted abuse.
pub fn resolve_target(tokens: &[Token], matches: &[AbuseMatch]) -> Target {
    if matches.is_empty() {
        return Target::NotCounted;
    }
    matches
        .iter()
        .map(|m| target_for(tokens, m))
        .min_by_key(|t| t.precedence())
        .expect("non-empty matches")
}

fn target_for(tokens: &[Token], m: &AbuseMatch) -> Target {
    let span_sentences: BTreeSet<usize> = tokens[m.start..m.end]
        .iter()
        .map(|t| t.sentence)
        .collect();
    let matched_token: Vec<bool> = {
        let mut v = vec![false; tokens.len()];
        for t in &m.terms {
            for slot in &mut v[t.start..t.end] {
                *slot = true;
            }
        }
        v
    };

    let mut best: Option<(usize, u8)> = None; // (distance, rank) with Second=0
    for (idx, tok) in tokens.iter().enumerate() {
        if !span_sentences.contains(&tok.sentence) {
            continue;
        }
        let cue = cue_kind(tokens, idx, &matched_token);
        let Some(kind) = cue else { continue };
        let distance = if idx >= m.start && idx < m.end {
            0
        } else if idx < m.start {
            m.start - idx
        } else {
            idx - (m.end - 1)
        };
        if kind == CueKind::Third && !is_pronoun(tok) && distance > 2 {
            continue; // name cues only work close to the span
        }
        let rank = match kind {
            CueKind::Second => 0u8,
            CueKind::Third => 1u8,
        };
        let candidate = (distance, rank);
        if best.is_none_or(|b| candidate < b) {
            best = Some(candidate);
        }
    }

    match best {
        Some((_, 0)) => Target::Recipient,
        Some(_) => Target::ThirdParty,
        None => untargeted_kind(m),
    }
}

fn is_pronoun(tok: &Token) -> bool {
    SECOND_PERSON.contains(&tok.norm.as_str()) || THIRD_PERSON.contains(&tok.norm.as_str())
}

fn cue_kind(tokens: &[Token], idx: usize, matched_token: &[bool]) -> Option<CueKind> {
    let tok = &tokens[idx];
    if !matches!(tok.kind, TokenKind::Word) {
        return None; // mentions, URLs, and hashtag segments carry no case
    }
    if SECOND_PERSON.contains(&tok.norm.as_str()) {
        return Some(CueKind::Second);
    }
    if THIRD_PERSON.contains(&tok.norm.as_str()) {
        return Some(CueKind::Third);
    }
    // Mid-sentence capitalized name heuristic.
    if matched_token[idx] {
        return None; // the abuse content itself is not its own referent
    }
    let sentence_initial = idx == 0 || tokens[idx - 1].sentence != tok.sentence;
    if sentence_initial {
        return None;
    }
    let mut chars = tok.raw.chars();
    let first_upper = chars.next().is_some_and(|c| c.is_uppercase());
    let len_ok = tok.raw.chars().count() >= 2;
    let all_alpha = tok.raw.chars().all(char::is_alphabetic);
    let all_caps = tok.raw.chars().all(|c| !c.is_lowercase());
    if first_upper && len_ok && all_alpha && !all_caps {
        Some(CueKind::Third)
    } else {
        None
    }
}

fn untargeted_kind(m: &AbuseMatch) -> Target {
    // The plural rule looks only at slur terms: a window whose every slur
    // was plural-matched is venting at a group. Windows with no slur at all
    // (offensive+identity or doubled offensive) always count.
    let mut saw_slur = false;
    for t in &m.terms {
        if t.category == Category::Slur {
            saw_slur = true;
            if !t.plural {
                return Target::UntargetedCounted;
            }
        }
    }
    if saw_slur {
        Target::NotCounted
    } else {
        Target::UntargetedCounted
    }
}

/// Classify a tweet end to end.
pub fn classify(text: &str, lex: &CompiledLexicon) -> Classification {
    let tokens = tokenize(text, lex);
    let matches = find_abuse_spans(&tokens, lex);
    let target = resolve_target(&tokens, &matches);
    let max_components = matches.iter().map(|m| m.component_count).max().unwrap_or(0);
    Classification {
        abusive: !matches.is_empty() && target != Target::NotCounted,
        matches,
        target,
        max_components,
    }
}
